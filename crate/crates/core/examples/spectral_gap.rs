//! Spectral gap of the torus walk and the exact mean entrance time of a point.

use interlace::lattice::{Point, PointSet, TorusGeometry};
use interlace::variational::{expected_hitting_exact, spectral_gap};

fn main() -> interlace::Result<()> {
    for n in [4, 8, 12, 16] {
        let geom = TorusGeometry::new(n, 3)?;
        let set = PointSet::torus(&geom, [Point::origin(3)])?;
        let gap = spectral_gap(&geom);
        let eh = expected_hitting_exact(&set, &geom)?;
        println!(
            "N={n:<2} gap = {gap:.6}  gap N^2 = {:.4}  E[H_0] = {eh:.2}  N^3 / E[H_0] = {:.4}",
            gap * (n * n) as f64,
            geom.volume() as f64 / eh
        );
    }
    Ok(())
}
