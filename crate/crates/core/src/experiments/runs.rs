use std::time::Instant;

use rand::Rng;

use super::config::{Experiment, ExperimentConfig};
use super::engine::{run_batches, Plan, Tally};
use super::report::{Check, ExperimentReport, ReportRow, Rule};
use crate::error::{Error, Result};
use crate::flows::{default_flow_radius, thomson_competitor, uniformize_flow, CompetitorReport};
use crate::lattice::{choose_basepoint, union_of_windows, BoxEmbedding, Point, PointSet, TorusGeometry};
use crate::potential::{capacity, BoxDomain, CapacityEstimate, CapacityMethod, HittingProbabilities};
use crate::variational::{
    build_test_function, expected_hitting_exact, torus_dirichlet_value, ScalarField,
    VariationalBounds,
};
use crate::walk::{HittingSimulator, Start, VisitTracker};

/// Slack on each side of the variational sandwich.
pub const SANDWICH_TOL: f64 = 1e-9;

/// Runs the experiment named in the config.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match cfg.experiment {
        Experiment::Theorem1 => run_theorem1(cfg),
        Experiment::Exponentiality => run_exponentiality(cfg),
        Experiment::Independence => run_independence(cfg),
        Experiment::Capacity => run_capacity_convergence(cfg),
        Experiment::FlowsCheck => run_flows_check(cfg),
    }
}

fn plan(cfg: &ExperimentConfig, family: u64) -> Plan {
    Plan {
        seed: cfg.seed,
        trials: cfg.trials,
        batch_size: cfg.batch_size,
        workers: cfg.workers,
        family: (cfg.experiment.tag() << 16) | family,
    }
}

fn start_report(cfg: &ExperimentConfig) -> Result<(ExperimentReport, Instant)> {
    cfg.validate()?;
    Ok((
        ExperimentReport::new(cfg.experiment.name(), cfg.seed, cfg.workers),
        Instant::now(),
    ))
}

fn finish(mut report: ExperimentReport, started: Instant) -> ExperimentReport {
    report.metadata.wall_time_secs = started.elapsed().as_secs_f64();
    report
}

fn require_transient(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.dim < 3 {
        return Err(Error::Config(format!(
            "{} needs d >= 3, got d = {}",
            cfg.experiment, cfg.dim
        )));
    }
    Ok(())
}

/// `cap(K_i)` for every window at the configured radius.
fn window_capacities(cfg: &ExperimentConfig) -> Result<Vec<CapacityEstimate>> {
    cfg.window_sets()?
        .iter()
        .map(|k| capacity(k, cfg.capacity_radius, CapacityMethod::Equilibrium))
        .collect()
}

/// `prod_i exp(-u cap(K_i))` with a bound from the spread between the box
/// value and its extrapolation.
fn product_law(u: f64, caps: &[CapacityEstimate]) -> (f64, f64) {
    let total: f64 = caps.iter().map(|c| c.extrapolated).sum();
    let spread: f64 = caps.iter().map(|c| (c.value - c.extrapolated).abs()).sum();
    let target = (-u * total).exp();
    (target, u * target * spread)
}

fn geometry(cfg: &ExperimentConfig, side: usize) -> Result<(TorusGeometry, Vec<Point>, Vec<PointSet>)> {
    let geom = TorusGeometry::new(side, cfg.dim)?;
    Ok((geom, cfg.centers_for(&geom), cfg.window_sets()?))
}

fn horizon(cfg: &ExperimentConfig, geom: &TorusGeometry) -> f64 {
    cfg.u * geom.volume() as f64
}

/// Monte Carlo estimate of `P[H_B > u N^d]` for uniform starts, against the
/// product law of the windows.
pub fn run_theorem1(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (mut report, started) = start_report(cfg)?;
    require_transient(cfg)?;
    let caps = window_capacities(cfg)?;
    let (target, target_err) = product_law(cfg.u, &caps);
    let largest = *cfg.sides.iter().max().expect("validated");
    let mut deviations = Vec::new();
    for (k, &side) in cfg.sides.iter().enumerate() {
        let (geom, centers, windows) = geometry(cfg, side)?;
        let b = union_of_windows(&centers, &windows, &geom)?;
        let tracker = VisitTracker::new(&geom, std::slice::from_ref(&b))?;
        let t = horizon(cfg, &geom);
        let tally = run_batches(&plan(cfg, k as u64), |rng, n| {
            let mut tally = Tally::new(1, 0);
            for _ in 0..n {
                if tracker.run(&Start::Uniform, t, true, rng)? == 0 {
                    tally.counts[0] += 1;
                }
            }
            Ok(tally)
        })?;
        let (p, se) = tally.proportion(0);
        let rule = if side == largest { Rule::Within } else { Rule::Info };
        let row = ReportRow::new(side, "survival", p)
            .stderr(se)
            .target(target, target_err)
            .rule(rule, cfg.tolerance, cfg.z);
        deviations.push((side, row.deviation()));
        report.rows.push(row);
    }
    deviations.sort_by_key(|d| d.0);
    let decreasing = deviations.windows(2).all(|w| w[1].1 < w[0].1);
    let detail = deviations
        .iter()
        .map(|(n, d)| format!("N={n}: {d:.5}"))
        .collect::<Vec<_>>()
        .join(", ");
    report.checks.push(Check::new("deviation_decreasing_in_N", decreasing, detail));
    Ok(finish(report, started))
}

/// Sup over the t-grid of `|P[H_bar_A > t E[H_A]] - exp(-t)|` with the exact
/// `E[H_A]`, and its size relative to the `N^2 / E[H_A]` scale.
pub fn run_exponentiality(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (mut report, started) = start_report(cfg)?;
    if cfg.windows.len() != 1 {
        return Err(Error::Config("exponentiality takes a single window".into()));
    }
    let grid = cfg.t_grid.clone();
    let mut constants = Vec::new();
    for (k, &side) in cfg.sides.iter().enumerate() {
        let (geom, centers, windows) = geometry(cfg, side)?;
        let a = union_of_windows(&centers, &windows, &geom)?;
        let mean = expected_hitting_exact(&a, &geom)?;
        let sim = HittingSimulator::new(&a, &geom)?;
        let cap = (cfg.step_cap_factor * geom.volume() as f64).ceil() as u64;
        let thresholds: Vec<f64> = grid.iter().map(|t| t * mean).collect();
        let tally = run_batches(&plan(cfg, k as u64), |rng, n| {
            // counts: one per grid point, then truncations
            // sums: H, H^2, H_bar - H
            let mut tally = Tally::new(thresholds.len() + 1, 3);
            for _ in 0..n {
                let hit = sim.run_raw(&Start::Uniform, cap, true, rng)?;
                for (c, th) in tally.counts.iter_mut().zip(&thresholds) {
                    if hit.truncated() || hit.clock > *th {
                        *c += 1;
                    }
                }
                if hit.truncated() {
                    tally.counts[thresholds.len()] += 1;
                }
                let h = hit.steps as f64;
                tally.sums[0] += h;
                tally.sums[1] += h * h;
                tally.sums[2] += hit.clock - h;
            }
            Ok(tally)
        })?;
        let trials = tally.trials as f64;
        let truncated = tally.counts[grid.len()] as f64 / trials;
        if truncated > 1e-3 {
            report.metadata.warnings.push(format!(
                "N={side}: {:.2e} of the trials hit the step cap",
                truncated
            ));
        }
        let (mut sup, mut sup_se) = (0.0f64, 0.0);
        for (j, t) in grid.iter().enumerate() {
            let (p, se) = tally.proportion(j);
            let dev = (p - (-t).exp()).abs();
            if dev > sup {
                sup = dev;
                sup_se = se;
            }
        }
        let n2 = (side * side) as f64;
        let mean_h = tally.sums[0] / trials;
        let var_h = (tally.sums[1] / trials - mean_h * mean_h).max(0.0);
        report.rows.push(ReportRow::new(side, "expected_hitting_exact", mean));
        report.rows.push(
            ReportRow::new(side, "mean_H", mean_h)
                .stderr((var_h / trials).sqrt())
                .target(mean, 0.0)
                .rule(Rule::Within, 0.0, 4.0),
        );
        report.rows.push(
            ReportRow::new(side, "mean_H_bar_minus_H", tally.sums[2] / trials)
                .stderr((mean_h / trials).sqrt()),
        );
        report.rows.push(ReportRow::new(side, "sup_deviation", sup).stderr(sup_se));
        report.rows.push(
            ReportRow::new(side, "sup_deviation_times_E_over_N2", sup * mean / n2)
                .stderr(sup_se * mean / n2),
        );
        report.rows.push(
            ReportRow::new(side, "sup_deviation_times_N", sup * side as f64)
                .stderr(sup_se * side as f64)
                .rule(Rule::AtMost, cfg.tolerance, 0.0),
        );
        constants.push(sup * side as f64);
    }
    let worst = constants.iter().copied().fold(0.0f64, f64::max);
    report.checks.push(Check::new(
        "scaled_deviation_bounded",
        worst <= cfg.tolerance,
        format!("max_N sup-deviation * N = {worst:.4}, pinned bound {}", cfg.tolerance),
    ));
    Ok(finish(report, started))
}

/// Joint vacancy of two windows on shared trajectories.
pub fn run_independence(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (mut report, started) = start_report(cfg)?;
    if cfg.windows.len() != 2 {
        return Err(Error::Config("independence takes exactly two windows".into()));
    }
    let marginals = if cfg.dim >= 3 {
        Some(window_capacities(cfg)?)
    } else {
        None
    };
    for (k, &side) in cfg.sides.iter().enumerate() {
        let (geom, centers, windows) = geometry(cfg, side)?;
        let groups = centers
            .iter()
            .zip(&windows)
            .map(|(c, w)| union_of_windows(std::slice::from_ref(c), std::slice::from_ref(w), &geom))
            .collect::<Result<Vec<_>>>()?;
        let tracker = VisitTracker::new(&geom, &groups)?;
        let t = horizon(cfg, &geom);
        let tally = run_batches(&plan(cfg, k as u64), |rng, n| {
            // counts: first vacant, second vacant, both vacant
            let mut tally = Tally::new(3, 0);
            for _ in 0..n {
                let seen = tracker.run(&Start::Uniform, t, false, rng)?;
                let a = seen & 1 == 0;
                let b = seen & 2 == 0;
                tally.counts[0] += u64::from(a);
                tally.counts[1] += u64::from(b);
                tally.counts[2] += u64::from(a && b);
            }
            Ok(tally)
        })?;
        let (p1, se1) = tally.proportion(0);
        let (p2, se2) = tally.proportion(1);
        let (p12, se12) = tally.proportion(2);
        let cov = p12 - p1 * p2;
        let se_cov = covariance_stderr(&tally);
        let mut rows = vec![
            ReportRow::new(side, "vacant_first", p1).stderr(se1),
            ReportRow::new(side, "vacant_second", p2).stderr(se2),
            ReportRow::new(side, "vacant_both", p12).stderr(se12),
        ];
        if let Some(caps) = &marginals {
            let (target, err) = product_law(cfg.u, caps);
            rows[2] = rows[2].clone().target(target, err);
        }
        rows.push(
            ReportRow::new(side, "covariance", cov)
                .stderr(se_cov)
                .target(0.0, 0.0)
                .rule(Rule::Within, cfg.tolerance, cfg.z),
        );
        report.rows.extend(rows);
    }
    Ok(finish(report, started))
}

/// Standard error of `p12 - p1 p2` from the influence function
/// `XY - p2 X - p1 Y`, evaluated on the four cells of the 2x2 table.
fn covariance_stderr(t: &Tally) -> f64 {
    let n = t.trials as f64;
    let (a, b, ab) = (t.counts[0] as f64, t.counts[1] as f64, t.counts[2] as f64);
    let (p1, p2) = (a / n, b / n);
    let cells = [
        (ab, 1.0 - p2 - p1),
        (a - ab, -p2),
        (b - ab, -p1),
        (n - a - b + ab, 0.0),
    ];
    let mean: f64 = cells.iter().map(|(c, z)| c * z).sum::<f64>() / n;
    let var: f64 = cells.iter().map(|(c, z)| c * (z - mean).powi(2)).sum::<f64>() / n;
    (var / n).sqrt()
}

/// Radius of the window functions: the cubes around `psi(x_i)` stay inside
/// the interior of `T'` and apart from each other.
fn window_radius(centers: &[Point], emb: &BoxEmbedding) -> i64 {
    let n = emb.geom().side() as i64;
    let images: Vec<Point> = centers.iter().map(|c| emb.psi(c)).collect();
    let mut r = i64::MAX;
    for y in &images {
        for &c in y.coords() {
            r = r.min(c - 1).min(n - 2 - c);
        }
    }
    for (i, y) in images.iter().enumerate() {
        for z in &images[i + 1..] {
            r = r.min((y.sub(z).linf_norm() - 2) / 2);
        }
    }
    r.max(0)
}

/// `1_K` extended harmonically to the cube of radius `r`, zero outside.
fn window_function(k: &PointSet, r: i64) -> Result<ScalarField> {
    let r = r.max(0) as usize;
    let region = crate::lattice::BoxRegion::cube(&Point::origin(k.dim()), r);
    if k.radius() > r as i64 {
        return Err(Error::Config(format!(
            "window of radius {} does not fit a test-function cube of radius {r}",
            k.radius()
        )));
    }
    if k.len() == region.len() {
        return ScalarField::lattice(region.clone(), vec![1.0; region.len()]);
    }
    let phi = HittingProbabilities::solve(k, &BoxDomain::centered(k.dim(), r))?;
    let values = (0..region.len()).map(|i| phi.value(&region.point(i))).collect();
    ScalarField::lattice(region, values)
}

/// Everything the sandwich needs at one torus size.
#[derive(Clone, Debug)]
pub struct SandwichOutcome {
    pub bounds: VariationalBounds,
    pub competitor: CompetitorReport,
    pub window_radius: i64,
    pub box_capacity_of_image: f64,
}

/// `1/(I*+J, I*+J) <= N^d / E[H_B] <= E_T(f, f)` with the three sides
/// computed independently.
pub fn sandwich(
    geom: &TorusGeometry,
    centers: &[Point],
    windows: &[PointSet],
) -> Result<SandwichOutcome> {
    let choice = choose_basepoint(centers, windows, geom)?;
    let emb = BoxEmbedding::new(*geom, choice.basepoint)?;
    let b = union_of_windows(centers, windows, geom)?;
    let exact = geom.volume() as f64 / expected_hitting_exact(&b, geom)?;

    let r = window_radius(centers, &emb);
    let fs = windows
        .iter()
        .map(|k| window_function(k, r))
        .collect::<Result<Vec<_>>>()?;
    let tf = build_test_function(&fs, centers, &emb)?;
    let dirichlet_upper = torus_dirichlet_value(&tf.field, &b)?;

    let comp = thomson_competitor(&b, &emb, default_flow_radius(geom))?;
    Ok(SandwichOutcome {
        bounds: VariationalBounds {
            dirichlet_upper,
            exact,
            thomson_upper_on_eh: comp.energy,
        },
        competitor: comp.report,
        window_radius: r,
        box_capacity_of_image: comp.box_capacity,
    })
}

/// `cap(psi(B))` and `N^d / E[H_B]` against `sum_i cap(K_i)`, bracketed by the
/// two variational bounds.
pub fn run_capacity_convergence(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (mut report, started) = start_report(cfg)?;
    require_transient(cfg)?;
    let caps = window_capacities(cfg)?;
    let total: f64 = caps.iter().map(|c| c.value).sum();
    let total_err: f64 = caps.iter().map(|c| c.error_bound).sum();
    let mut gaps = Vec::new();
    let mut sides = cfg.sides.clone();
    sides.sort_unstable();
    for &side in &sides {
        let (geom, centers, windows) = geometry(cfg, side)?;
        let choice = choose_basepoint(&centers, &windows, &geom)?;
        let emb = BoxEmbedding::new(geom, choice.basepoint.clone())?;
        let b = union_of_windows(&centers, &windows, &geom)?;
        let image = emb.psi_set(&b)?.translate(&emb.psi(&centers[0]).scale(-1))?;
        if cfg.capacity_radius as i64 <= 2 * image.radius() {
            return Err(Error::Config(format!(
                "capacity_radius {} is too small for N = {side}",
                cfg.capacity_radius
            )));
        }
        let cap_b = capacity(&image, cfg.capacity_radius, CapacityMethod::Equilibrium)?;
        let s = sandwich(&geom, &centers, &windows)?;
        let gap = cap_b.value - total;
        gaps.push((side, gap));
        report.rows.push(
            ReportRow::new(side, "cap_psi_B", cap_b.value)
                .target(total, total_err + cap_b.error_bound),
        );
        report.rows.push(ReportRow::new(side, "cap_gap_times_N", gap * side as f64));
        report.rows.push(ReportRow::new(side, "exact_rate", s.bounds.exact).target(total, total_err));
        report.rows.push(ReportRow::new(side, "dirichlet_upper", s.bounds.dirichlet_upper));
        report.rows.push(ReportRow::new(side, "thomson_lower", s.bounds.lower()));
        report.checks.push(Check::new(
            format!("sandwich_N{side}"),
            s.bounds.holds(SANDWICH_TOL),
            serde_json::to_string(&s.bounds)?,
        ));
    }
    if cfg.windows.len() == 1 {
        let worst = gaps.iter().fold(0.0f64, |m, g| m.max(g.1.abs()));
        report.checks.push(Check::new(
            "single_window_capacity_is_N_free",
            worst <= cfg.tolerance,
            format!("max |cap(psi(B)) - cap(K)| = {worst:.2e}"),
        ));
    } else {
        let decreasing = gaps.windows(2).all(|w| w[1].1.abs() < w[0].1.abs());
        let detail = gaps
            .iter()
            .map(|(n, g)| format!("N={n}: {g:.3e}"))
            .collect::<Vec<_>>()
            .join(", ");
        report.checks.push(Check::new("capacity_gap_decreasing_in_N", decreasing, detail));
    }
    Ok(finish(report, started))
}

/// The exact flow identities: the uniformizing flow on random fields, the
/// redirecting flow for the configured windows, and the variational sandwich.
pub fn run_flows_check(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (mut report, started) = start_report(cfg)?;
    let mut family = 0u64;
    for &d in &cfg.flow_dims {
        for &n in &cfg.flow_sides {
            let geom = TorusGeometry::new(n, d)?;
            let mut rng = crate::walk::WalkRng::new(cfg.seed, (cfg.experiment.tag() << 48) | family);
            family += 1;
            let (mut resid, mut constant) = (0.0f64, 0.0f64);
            for _ in 0..cfg.flow_fields {
                let values = (0..geom.volume())
                    .map(|_| rng.step_stream().random_range(-1.0..1.0))
                    .collect();
                let h = ScalarField::torus(geom, values)?;
                let l = uniformize_flow(&h)?;
                let nu = h.mean();
                let scale = h.sup_norm().max(f64::MIN_POSITIVE);
                let div = l.divergence_field();
                for (dv, hv) in div.values().iter().zip(h.values()) {
                    resid = resid.max((dv + hv - nu).abs() / scale);
                }
                constant = constant.max(l.sup_norm() / (n as f64 * scale));
            }
            report.rows.push(
                ReportRow::new(n, format!("uniformize_residual_d{d}"), resid)
                    .rule(Rule::AtMost, cfg.tolerance, 0.0),
            );
            report.rows.push(
                ReportRow::new(n, format!("uniformize_constant_d{d}"), constant)
                    .rule(Rule::AtMost, 2.0 * d as f64, 0.0),
            );
        }
    }
    if cfg.dim >= 3 {
        let windows = cfg.window_sets()?;
        let mut j_constant = 0.0f64;
        for m in 1..=windows.len() {
            let sub = ExperimentConfig {
                windows: cfg.windows[..m].to_vec(),
                ..cfg.clone()
            };
            for &side in &cfg.sides {
                let (geom, centers, ws) = geometry(&sub, side)?;
                let s = sandwich(&geom, &centers, &ws)?;
                let c = &s.competitor;
                let scale = (side as f64).powi(cfg.dim as i32 - 1);
                j_constant = j_constant.max(c.j_sup * scale);
                let q = |name: &str| format!("M{m}_{name}");
                report.rows.push(
                    ReportRow::new(side, q("identity_residual"), c.identity_residual)
                        .rule(Rule::AtMost, cfg.tolerance, 0.0),
                );
                report.rows.push(ReportRow::new(side, q("j_sup_times_N^(d-1)"), c.j_sup * scale));
                report.rows.push(ReportRow::new(side, q("charge_sup_times_N^(d-1)"), c.charge_sup * scale));
                report.rows.push(ReportRow::new(side, q("j_energy"), c.j_energy));
                report.rows.push(ReportRow::new(side, q("thomson_lower"), s.bounds.lower()));
                report.rows.push(ReportRow::new(side, q("exact_rate"), s.bounds.exact));
                report.rows.push(ReportRow::new(side, q("dirichlet_upper"), s.bounds.dirichlet_upper));
                report.checks.push(Check::new(
                    format!("M{m}_sandwich_N{side}"),
                    s.bounds.holds(SANDWICH_TOL),
                    serde_json::to_string(&s.bounds)?,
                ));
            }
        }
        report.checks.push(Check::new(
            "j_constant_bounded",
            j_constant <= cfg.flow_constant,
            format!(
                "max |J|_inf N^(d-1) = {j_constant:.4}, pinned bound {}",
                cfg.flow_constant
            ),
        ));
    }
    Ok(finish(report, started))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariance_stderr_matches_direct_computation() {
        // 2x2 table: both 30, only first 20, only second 10, neither 40
        let t = Tally {
            trials: 100,
            counts: vec![50, 40, 30],
            sums: vec![],
        };
        let (p1, p2) = (0.5, 0.4);
        let mut zs = Vec::new();
        for (x, y, c) in [(1.0, 1.0, 30), (1.0, 0.0, 20), (0.0, 1.0, 10), (0.0, 0.0, 40)] {
            for _ in 0..c {
                zs.push(x * y - p2 * x - p1 * y);
            }
        }
        let m = zs.iter().sum::<f64>() / 100.0;
        let v = zs.iter().map(|z| (z - m) * (z - m)).sum::<f64>() / 100.0;
        assert!((covariance_stderr(&t) - (v / 100.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn small_theorem1_run_is_deterministic() {
        let mut cfg = ExperimentConfig::default_for(Experiment::Theorem1);
        cfg.sides = vec![6, 8];
        cfg.trials = 600;
        cfg.batch_size = 100;
        cfg.capacity_radius = 8;
        let a = run(&cfg).unwrap();
        cfg.workers = 2;
        let b = run(&cfg).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.rows.len(), 2);
    }

    #[test]
    fn window_function_shapes() {
        let k = PointSet::lattice(3, [Point::origin(3)]).unwrap();
        let f0 = window_function(&k, 0).unwrap();
        assert_eq!(f0.values(), &[1.0]);
        let f2 = window_function(&k, 2).unwrap();
        assert_eq!(f2.get(&Point::origin(3)), 1.0);
        assert!(f2.get(&Point::new(vec![2, 2, 2])) > 0.0);
        assert_eq!(f2.get(&Point::new(vec![3, 0, 0])), 0.0);
    }
}
