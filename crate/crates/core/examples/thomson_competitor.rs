//! Builds the competitor flow `I* + J` and compares its energy with the exact
//! expected hitting time.

use std::time::Instant;

use interlace::flows::{default_flow_radius, thomson_competitor};
use interlace::lattice::{choose_basepoint, BoxEmbedding, Point, PointSet, TorusGeometry};
use interlace::variational::expected_hitting_exact;

fn main() -> interlace::Result<()> {
    for n in [8usize, 12, 16] {
        let geom = TorusGeometry::new(n, 3)?;
        let half = n as i64 / 2;
        for centers in [vec![Point::origin(3)], vec![Point::origin(3), Point::splat(3, half)]] {
            let t = Instant::now();
            let windows = vec![PointSet::lattice(3, [Point::origin(3)])?; centers.len()];
            let choice = choose_basepoint(&centers, &windows, &geom)?;
            let emb = BoxEmbedding::new(geom, choice.basepoint)?;
            let b = PointSet::torus(&geom, centers.iter().cloned())?;
            let comp = thomson_competitor(&b, &emb, default_flow_radius(&geom))?;
            let exact = expected_hitting_exact(&b, &geom)? / geom.volume() as f64;
            let r = comp.report;
            println!(
                "N={n:2} M={} energy={:.6} exact={:.6} |J|N^2={:.4} |g|N^2={:.4} resid={:.1e} ({:.2?})",
                centers.len(),
                r.energy,
                exact,
                r.j_sup * (n * n) as f64,
                r.charge_sup * (n * n) as f64,
                r.identity_residual,
                t.elapsed()
            );
        }
    }
    Ok(())
}
