//! The vacant configuration around a point against the random interlacement law.

use interlace::lattice::{Point, PointSet, TorusGeometry};
use interlace::potential::vacant_law;
use interlace::walk::{vacant_configuration, Start, Trajectory, WalkRng};

fn main() -> interlace::Result<()> {
    let (n, u, trials) = (12usize, 0.5, 4_000);
    let geom = TorusGeometry::new(n, 3)?;
    let window = PointSet::lattice(3, [Point::origin(3), Point::unit(3, 0, 1)])?;
    let t = u * geom.volume() as f64;
    let center = Point::splat(3, 5);
    let mut vacant = 0;
    let mut rng = WalkRng::new(11, 0);
    for k in 0..trials {
        let path = Trajectory::sample(&geom, &Start::Uniform, t, &mut rng)?;
        let w = vacant_configuration(&center, t, &window, &path)?;
        if k == 0 {
            println!("{}", w.to_json()?);
        }
        vacant += usize::from(w.all_vacant());
    }
    let law = vacant_law(&window, u, 24)?;
    println!(
        "P[window vacant] ~ {:.4}  interlacement law {:.4} in [{:.4}, {:.4}]",
        vacant as f64 / trials as f64,
        law.probability,
        law.lower,
        law.upper
    );
    Ok(())
}
