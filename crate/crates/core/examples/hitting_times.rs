//! Entrance times of a torus set: samples, their CSV form and the exact mean.

use interlace::lattice::{Point, PointSet, TorusGeometry};
use interlace::variational::expected_hitting_exact;
use interlace::walk::{default_step_cap, write_samples_csv, HittingSimulator, Start, WalkRng};

fn main() -> interlace::Result<()> {
    let geom = TorusGeometry::new(8, 3)?;
    let set = PointSet::torus(&geom, [Point::origin(3)])?;
    let exact = expected_hitting_exact(&set, &geom)?;
    let sim = HittingSimulator::new(&set, &geom)?;
    let cap = default_step_cap(1.0, &geom);
    let mut rng = WalkRng::new(7, 0);
    let samples = (0..20_000)
        .map(|_| sim.run(&Start::Uniform, cap, &mut rng))
        .collect::<interlace::Result<Vec<_>>>()?;
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.discrete_time as f64).sum::<f64>() / n;
    let mean_bar = samples.iter().map(|s| s.continuous_time).sum::<f64>() / n;
    println!("E[H] exact = {exact:.3}  mean H = {mean:.3}  mean H_bar = {mean_bar:.3}");

    write_samples_csv(&samples[..5], std::io::stdout().lock())?;
    Ok(())
}
