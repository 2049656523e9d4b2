//! Green function and capacities of small sets in Z^3.

use std::time::Instant;

use interlace::lattice::{Point, PointSet};
use interlace::potential::{capacity, CapacityMethod, GreenTable};

fn main() -> interlace::Result<()> {
    let radius: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(32);
    let t = Instant::now();
    let table = GreenTable::compute(3, radius)?;
    let o = Point::origin(3);
    println!(
        "g_R(0,0) = {:.9}  extrapolated = {:.9}  bound = {:.2e}  c = {:.4}  ({:.2?})",
        table.value(&o),
        table.extrapolated(&o),
        table.error_bound(),
        table.truncation_constant(),
        t.elapsed()
    );
    let pair = PointSet::lattice(3, [o.clone(), Point::new(vec![1, 0, 0])])?;
    for method in [CapacityMethod::Equilibrium, CapacityMethod::DirichletUpper] {
        let est = capacity(&pair, radius, method)?;
        println!("cap(pair) by {method:?}: {:.9} +/- {:.2e}", est.value, est.error_bound);
    }
    Ok(())
}
