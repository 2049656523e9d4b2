//! A flow whose divergence cancels a mean-zero field on the torus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use interlace::flows::uniformize_flow;
use interlace::lattice::TorusGeometry;
use interlace::variational::ScalarField;

fn main() -> interlace::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (n, d) in [(8, 1), (8, 2), (16, 3)] {
        let geom = TorusGeometry::new(n, d)?;
        let values: Vec<f64> = (0..geom.volume()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = ScalarField::torus(geom, values)?;
        let flow = uniformize_flow(&h)?;
        let div = flow.divergence_field();
        let residual = div
            .values()
            .iter()
            .zip(h.values())
            .map(|(a, b)| (a + b - h.mean()).abs())
            .fold(0.0, f64::max);
        println!(
            "d={d} N={n:<2} max |div L + h - mean h| = {residual:.2e}  |L|_inf / (N |h|_inf) = {:.3}",
            flow.sup_norm() / (n as f64 * h.sup_norm())
        );
    }
    Ok(())
}
