//! One line per acceptance criterion; exits nonzero when any fails.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use interlace::experiments::{run, sandwich, Experiment, ExperimentConfig, SandwichOutcome, SANDWICH_TOL};
use interlace::flows::uniformize_flow;
use interlace::lattice::{Point, PointSet, TorusGeometry};
use interlace::potential::{capacity, hitting_identities_with, CapacityMethod, GreenTable};
use interlace::variational::{spectral_gap, ScalarField};
use interlace::Result;

/// Watson's integral: the Green function of the simple random walk on Z^3 at
/// the origin, `3 (18 + 12 sqrt2 - 10 sqrt3 - 7 sqrt6) K(k)^2 / pi^2`.
const WATSON_G00: f64 = 1.516_386_059_151_978;

const UNIFORMIZE_REL_TOL: f64 = 1e-10;
const IDENTITY_TOL: f64 = 1e-10;
const J_CONSTANT: f64 = 2.0;
const SINGLETON_TOL: f64 = 1e-2;
const PAIR_TOL: f64 = 1e-3;
const HITTING_TOL: f64 = 1e-3;
const GAP_TOL: f64 = 1e-10;

struct Outcome {
    pass: bool,
    detail: String,
    limit_secs: Option<f64>,
}

fn p(c: [i64; 3]) -> Point {
    Point::new(c.to_vec())
}

fn set(points: &[[i64; 3]]) -> PointSet {
    PointSet::lattice(3, points.iter().map(|&c| p(c))).unwrap()
}

fn singletons(side: usize, m: usize) -> (Vec<Point>, Vec<PointSet>) {
    let centers = (0..m).map(|i| Point::splat(3, (i * side / m) as i64)).collect();
    (centers, vec![set(&[[0, 0, 0]]); m])
}

fn uniformize_identity() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_rel, mut worst_const) = (0.0f64, 0.0f64);
    let mut ok = true;
    for d in 1..=3 {
        let mut constant = 0.0f64;
        for n in [4, 8, 16] {
            let geom = TorusGeometry::new(n, d)?;
            for _ in 0..100 {
                let values = (0..geom.volume()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let h = ScalarField::torus(geom, values)?;
                let flow = uniformize_flow(&h)?;
                let div = flow.divergence_field();
                let mean = h.mean();
                let scale = h.sup_norm();
                for (dv, hv) in div.values().iter().zip(h.values()) {
                    worst_rel = worst_rel.max((dv + hv - mean).abs() / scale);
                }
                constant = constant.max(flow.sup_norm() / (n as f64 * scale));
            }
        }
        ok &= constant <= 2.0 * d as f64;
        worst_const = worst_const.max(constant / (2.0 * d as f64));
    }
    Ok(Outcome {
        pass: ok && worst_rel <= UNIFORMIZE_REL_TOL,
        detail: format!(
            "max relative residual {worst_rel:.2e} (tol {UNIFORMIZE_REL_TOL:.0e}), max |L|/(N|h|) / 2d = {worst_const:.3}"
        ),
        limit_secs: Some(10.0),
    })
}

fn sandwiches() -> Result<Vec<(usize, usize, SandwichOutcome)>> {
    let mut out = Vec::new();
    for side in [8, 12, 16] {
        let geom = TorusGeometry::new(side, 3)?;
        for m in [1, 2] {
            let (centers, windows) = singletons(side, m);
            out.push((side, m, sandwich(&geom, &centers, &windows)?));
        }
    }
    Ok(out)
}

fn flow_identity(all: &[(usize, usize, SandwichOutcome)]) -> Outcome {
    let mut residual = 0.0f64;
    let mut constant = 0.0f64;
    let mut scaled = Vec::new();
    for (side, m, s) in all {
        residual = residual.max(s.competitor.identity_residual);
        let c = s.competitor.j_sup * (side * side) as f64;
        constant = constant.max(c);
        scaled.push(format!("M{m} N={side}: {c:.3}"));
    }
    Outcome {
        pass: residual <= IDENTITY_TOL && constant <= J_CONSTANT,
        detail: format!(
            "max identity residual {residual:.2e} (tol {IDENTITY_TOL:.0e}); |J|N^2 constant {constant:.3} <= {J_CONSTANT} [{}]",
            scaled.join(", ")
        ),
        limit_secs: Some(120.0),
    }
}

fn sandwich_criterion(all: &[(usize, usize, SandwichOutcome)]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (side, m, s) in all.iter().filter(|(side, _, _)| *side <= 12) {
        let b = &s.bounds;
        ok &= b.holds(SANDWICH_TOL);
        parts.push(format!(
            "M{m} N={side}: {:.5} <= {:.5} <= {:.5}",
            b.lower(),
            b.exact,
            b.dirichlet_upper
        ));
    }
    Outcome {
        pass: ok,
        detail: parts.join("; "),
        limit_secs: Some(120.0),
    }
}

fn capacity_cross_validation() -> Result<Outcome> {
    let radius = 48;
    let corpus = [
        ("singleton", set(&[[0, 0, 0]])),
        ("pair", set(&[[0, 0, 0], [1, 0, 0]])),
        ("L-tromino", set(&[[0, 0, 0], [1, 0, 0], [0, 1, 0]])),
        (
            "cube2",
            set(&[
                [0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0],
                [0, 0, 1], [1, 0, 1], [0, 1, 1], [1, 1, 1],
            ]),
        ),
    ];
    let table = GreenTable::compute(3, radius)?;
    let g00 = table.extrapolated(&p([0, 0, 0]));
    let g01 = table.extrapolated(&p([1, 0, 0]));
    let mut ok = (g00 - WATSON_G00).abs() <= 1e-3;
    let mut parts = vec![format!("g(0,0) = {g00:.6} (Watson {WATSON_G00:.6})")];
    for (name, a) in &corpus {
        let eq = capacity(a, radius, CapacityMethod::Equilibrium)?;
        let up = capacity(a, radius, CapacityMethod::DirichletUpper)?;
        let agree = (eq.value - up.value).abs() <= eq.error_bound + up.error_bound;
        ok &= agree;
        parts.push(format!("{name}: {:.6} vs {:.6} (bound {:.1e})", eq.value, up.value, eq.error_bound + up.error_bound));
        match *name {
            "singleton" => {
                let dev = (eq.value - 1.0 / g00).abs();
                ok &= dev <= SINGLETON_TOL;
                parts.push(format!("|cap - 1/g| = {dev:.2e}"));
            }
            "pair" => {
                let dev = (eq.extrapolated - 2.0 / (g00 + g01)).abs();
                ok &= dev <= PAIR_TOL;
                parts.push(format!("|cap - 2/(g00+g01)| = {dev:.2e}"));
            }
            _ => {}
        }
    }
    Ok(Outcome {
        pass: ok,
        detail: parts.join("; "),
        limit_secs: Some(180.0),
    })
}

fn hitting_identity() -> Result<Outcome> {
    let single = set(&[[0, 0, 0]]);
    let pair = set(&[[0, 0, 0], [1, 0, 0]]);
    let tromino = set(&[[0, 0, 0], [1, 0, 0], [0, 1, 0]]);
    let cube = set(&[
        [0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0],
        [0, 0, 1], [1, 0, 1], [0, 1, 1], [1, 1, 1],
    ]);
    let cases: [(&PointSet, Vec<Point>); 4] = [
        (&single, vec![p([1, 0, 0]), p([3, 2, 1]), p([10, 0, 0])]),
        (&pair, vec![p([0, 1, 0]), p([5, 5, 5])]),
        (&tromino, vec![p([2, 2, 0]), p([-4, 3, 7])]),
        (&cube, vec![p([3, 0, 0]), p([-6, -6, -6]), p([12, 4, -2])]),
    ];
    let table = GreenTable::compute(3, 64)?;
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for (a, xs) in &cases {
        for id in hitting_identities_with(&table, a, xs)? {
            worst = worst.max(id.residual);
            pairs += 1;
        }
    }
    Ok(Outcome {
        pass: worst <= HITTING_TOL,
        detail: format!("max residual over {pairs} pairs {worst:.2e} (tol {HITTING_TOL:.0e})"),
        limit_secs: Some(120.0),
    })
}

fn experiment(kind: Experiment, limit: f64, quantity: &str) -> Result<Outcome> {
    let report = run(&ExperimentConfig::default_for(kind))?;
    let rows: Vec<String> = report
        .rows_named(quantity)
        .map(|r| format!("N={} {:.5}", r.side, r.estimate))
        .collect();
    let checks: Vec<String> = report.checks.iter().map(|c| format!("{} {}", c.name, c.detail)).collect();
    Ok(Outcome {
        pass: report.passed(),
        detail: format!("{quantity} [{}] {}", rows.join(", "), checks.join("; ")),
        limit_secs: Some(limit),
    })
}

fn spectral_gap_criterion() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for d in 1..=2 {
        for n in 3..=8 {
            let geom = TorusGeometry::new(n, d)?;
            let v = geom.volume();
            let mut p = DMatrix::<f64>::zeros(v, v);
            for x in 0..v {
                for dir in 0..2 * d {
                    p[(x, geom.neighbor(x, dir))] += 1.0 / (2 * d) as f64;
                }
            }
            let mut eig: Vec<f64> = p.symmetric_eigen().eigenvalues.iter().copied().collect();
            eig.sort_by(|a, b| b.total_cmp(a));
            let brute = 1.0 - eig[1];
            let formula = (1.0 - (2.0 * std::f64::consts::PI / n as f64).cos()) / d as f64;
            let gap = spectral_gap(&geom);
            worst = worst.max((gap - brute).abs()).max((gap - formula).abs());
        }
    }
    Ok(Outcome {
        pass: worst <= GAP_TOL,
        detail: format!("max deviation from eigendecomposition {worst:.2e} (tol {GAP_TOL:.0e})"),
        limit_secs: Some(5.0),
    })
}

fn csv_rows(cfg: &ExperimentConfig) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    run(cfg)?.write_csv(&mut buf)?;
    Ok(buf)
}

fn determinism() -> Result<Outcome> {
    let mut t1 = ExperimentConfig::default_for(Experiment::Theorem1);
    t1.sides = vec![8, 12];
    t1.trials = 20_000;
    t1.capacity_radius = 16;
    let mut ind = ExperimentConfig::default_for(Experiment::Independence);
    ind.sides = vec![12];
    ind.trials = 20_000;
    ind.capacity_radius = 16;
    let mut ok = true;
    let mut parts = Vec::new();
    for cfg in [t1, ind] {
        let a = csv_rows(&cfg)?;
        let b = csv_rows(&cfg)?;
        let mut two = cfg.clone();
        two.workers = 2;
        let c = csv_rows(&two)?;
        ok &= a == b && a == c;
        parts.push(format!(
            "{}: rerun {}, 1 vs 2 workers {} ({} bytes)",
            cfg.experiment,
            if a == b { "identical" } else { "differs" },
            if a == c { "identical" } else { "differs" },
            a.len()
        ));
    }
    Ok(Outcome {
        pass: ok,
        detail: parts.join("; "),
        limit_secs: None,
    })
}

fn report(k: usize, name: &str, started: Instant, outcome: Result<Outcome>) -> bool {
    let secs = started.elapsed().as_secs_f64();
    let (pass, detail) = match outcome {
        Ok(o) => {
            let in_time = o.limit_secs.is_none_or(|l| secs < l);
            let limit = o.limit_secs.map(|l| format!(", limit {l} s")).unwrap_or_default();
            (o.pass && in_time, format!("{} ({secs:.1} s{limit})", o.detail))
        }
        Err(e) => (false, format!("error: {e}")),
    };
    println!("{} criterion {k}: {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn main() {
    let mut all = true;
    let t = Instant::now();
    all &= report(1, "uniformizing flow identity", t, uniformize_identity());

    let t = Instant::now();
    let computed = sandwiches();
    let secs = t.elapsed();
    let (c2, c3) = match computed {
        Ok(s) => (Ok(flow_identity(&s)), Ok(sandwich_criterion(&s))),
        Err(e) => (Err(interlace::Error::Precondition(e.to_string())), Err(e)),
    };
    all &= report(2, "redirected flow identity", Instant::now() - secs, c2);
    all &= report(3, "variational sandwich", Instant::now() - secs, c3);

    let t = Instant::now();
    all &= report(4, "capacity cross-validation", t, capacity_cross_validation());
    let t = Instant::now();
    all &= report(5, "hitting identity", t, hitting_identity());
    let t = Instant::now();
    all &= report(6, "survival probability limit", t, experiment(Experiment::Theorem1, 900.0, "survival"));
    let t = Instant::now();
    all &= report(7, "exponential entrance time", t, experiment(Experiment::Exponentiality, 600.0, "sup_deviation_times_N"));
    let t = Instant::now();
    all &= report(8, "independence of distant windows", t, experiment(Experiment::Independence, 600.0, "covariance"));
    let t = Instant::now();
    all &= report(9, "spectral gap", t, spectral_gap_criterion());
    let t = Instant::now();
    all &= report(10, "determinism", t, determinism());

    println!("acceptance: {}", if all { "all criteria pass" } else { "some criteria FAIL" });
    if !all {
        std::process::exit(1);
    }
}
