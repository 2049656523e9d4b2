//! Escape probabilities from a set: the harmonic solve against simulation.

use interlace::lattice::{Point, PointSet};
use interlace::potential::{BoxDomain, HittingProbabilities};
use interlace::walk::{simulate_return_escape, ReturnEscape, WalkRng};

fn main() -> interlace::Result<()> {
    let radius = 16;
    let set = PointSet::lattice(3, [Point::origin(3), Point::unit(3, 0, 1)])?;
    let solved = HittingProbabilities::solve(&set, &BoxDomain::centered(3, radius))?;
    let x = Point::origin(3);
    let trials = 20_000;
    let mut rng = WalkRng::new(5, 0);
    let mut escaped = 0;
    for _ in 0..trials {
        if simulate_return_escape(&set, &x, radius, &mut rng)? == ReturnEscape::Escaped {
            escaped += 1;
        }
    }
    let p = escaped as f64 / trials as f64;
    println!(
        "escape from {:?} beyond radius {radius}: solve {:.4}  simulation {:.4} +/- {:.4}",
        x,
        solved.escape_probability(&x),
        p,
        (p * (1.0 - p) / trials as f64).sqrt()
    );
    Ok(())
}
