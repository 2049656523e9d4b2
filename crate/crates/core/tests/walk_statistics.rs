//! Monte Carlo estimates against exact or independently solved values.

use interlace::lattice::{Point, PointSet, TorusGeometry};
use interlace::potential::{BoxDomain, GreenTable, HittingProbabilities};
use interlace::variational::expected_hitting_exact;
use interlace::walk::{
    simulate_return_escape, vacant_configuration, HittingSimulator, ReturnEscape, Start,
    Trajectory, WalkRng,
};

/// Killed walk: each step moves the mass of every point not in `A` to its
/// neighbours and drops what lands in `A`.
fn survival_exact(geom: &TorusGeometry, a: &PointSet, steps: usize) -> f64 {
    let v = geom.volume();
    let inside: Vec<bool> = (0..v).map(|i| a.contains(&geom.point(i))).collect();
    let mut mass: Vec<f64> = inside.iter().map(|&b| if b { 0.0 } else { 1.0 / v as f64 }).collect();
    let two_d = 2 * geom.dim();
    for _ in 0..steps {
        let mut next = vec![0.0; v];
        for (x, m) in mass.iter().enumerate() {
            if *m == 0.0 {
                continue;
            }
            for dir in 0..two_d {
                let y = geom.neighbor(x, dir);
                if !inside[y] {
                    next[y] += m / two_d as f64;
                }
            }
        }
        mass = next;
    }
    mass.iter().sum()
}

#[test]
fn escape_frequency_matches_green_function() {
    let radius = 16;
    let origin = Point::origin(3);
    let a = PointSet::lattice(3, [origin.clone()]).unwrap();
    let table = GreenTable::compute(3, radius).unwrap();
    let solved = HittingProbabilities::solve(&a, &BoxDomain::centered(3, radius)).unwrap();
    let oracle = 1.0 / table.value(&origin);
    assert!((solved.escape_probability(&origin) - oracle).abs() < 1e-9);

    let trials = 10_000;
    let mut rng = WalkRng::new(21, 0);
    let escaped = (0..trials)
        .filter(|_| simulate_return_escape(&a, &origin, radius, &mut rng).unwrap() == ReturnEscape::Escaped)
        .count();
    let p = escaped as f64 / trials as f64;
    let se = (oracle * (1.0 - oracle) / trials as f64).sqrt();
    assert!((p - oracle).abs() < 4.0 * se, "{p} vs {oracle}");
}

#[test]
fn mean_entrance_time_matches_exact_solve() {
    let geom = TorusGeometry::new(8, 3).unwrap();
    let a = PointSet::torus(&geom, [Point::origin(3), Point::new(vec![4, 4, 4])]).unwrap();
    let exact = expected_hitting_exact(&a, &geom).unwrap();
    let sim = HittingSimulator::new(&a, &geom).unwrap();
    let mut rng = WalkRng::new(22, 0);
    let n = 20_000;
    let times: Vec<f64> = (0..n)
        .map(|_| {
            let s = sim.run(&Start::Uniform, 1 << 30, &mut rng).unwrap();
            assert!(!s.truncated);
            s.discrete_time as f64
        })
        .collect();
    let mean = times.iter().sum::<f64>() / n as f64;
    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!((mean - exact).abs() < 4.0 * se, "{mean} vs {exact} (se {se})");
}

#[test]
fn vacant_frequency_matches_killed_walk() {
    let geom = TorusGeometry::new(12, 3).unwrap();
    let window = PointSet::lattice(3, [Point::origin(3), Point::unit(3, 1, 1)]).unwrap();
    let center = Point::new(vec![3, 7, 5]);
    let t = 0.4 * geom.volume() as f64;
    let target = PointSet::torus(&geom, window.iter().map(|w| w.add(&center))).unwrap();
    let oracle = survival_exact(&geom, &target, t.floor() as usize);

    let trials = 5_000;
    let mut rng = WalkRng::new(23, 0);
    let mut vacant = 0;
    for _ in 0..trials {
        let path = Trajectory::sample(&geom, &Start::Uniform, t, &mut rng).unwrap();
        vacant += usize::from(vacant_configuration(&center, t, &window, &path).unwrap().all_vacant());
    }
    let p = vacant as f64 / trials as f64;
    let se = (oracle * (1.0 - oracle) / trials as f64).sqrt();
    assert!((p - oracle).abs() < 4.0 * se, "{p} vs {oracle}");
}
