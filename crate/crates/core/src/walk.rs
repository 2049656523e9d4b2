//! Simple random walk on the torus and on `Z^d`.
//!
//! Each [`WalkRng`] owns two ChaCha8 streams derived from `(seed, stream)`:
//! one drives the start point and the steps, the other the exponential clock.
//! Keeping them apart means that the discrete path is the same whether or not
//! the continuous clock is read, so [`simulate_hitting`] and [`Trajectory`]
//! see identical paths for identical `(seed, stream)`.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Point, PointSet, TorusGeometry};

/// Paired random streams of one worker.
#[derive(Clone, Debug)]
pub struct WalkRng {
    seed: u64,
    stream: u64,
    steps: ChaCha8Rng,
    clock: ChaCha8Rng,
}

impl WalkRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut steps = ChaCha8Rng::seed_from_u64(seed);
        steps.set_stream(2 * stream);
        let mut clock = ChaCha8Rng::seed_from_u64(seed);
        clock.set_stream(2 * stream + 1);
        WalkRng {
            seed,
            stream,
            steps,
            clock,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// The step stream, for auxiliary draws that should follow the same
    /// stream layout.
    pub fn step_stream(&mut self) -> &mut ChaCha8Rng {
        &mut self.steps
    }

    #[inline]
    fn direction(&mut self, two_d: usize) -> usize {
        self.steps.random_range(0..two_d)
    }

    #[inline]
    fn uniform_index(&mut self, n: usize) -> usize {
        self.steps.random_range(0..n)
    }

    #[inline]
    fn holding_time(&mut self) -> f64 {
        self.clock.sample(Exp1)
    }
}

/// Where the walk starts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Start {
    /// `X_0` drawn from the uniform distribution on the torus.
    Uniform,
    At(Point),
}

/// One realisation of `H_A` and its Poissonized version `H_bar_A`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HittingSample {
    pub start: Point,
    pub discrete_time: u64,
    pub continuous_time: f64,
    /// `None` when the walk was stopped before reaching `A`.
    pub hit_point: Option<Point>,
    pub truncated: bool,
}

/// Index-level result of a hitting run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawHit {
    pub start: usize,
    pub steps: u64,
    /// Sum of one unit exponential per step; `NaN` when the clock was off.
    pub clock: f64,
    pub hit: Option<usize>,
}

impl RawHit {
    pub fn truncated(&self) -> bool {
        self.hit.is_none()
    }
}

/// Walk on a fixed torus towards a fixed target, with the neighbour table and
/// target mask built once.
#[derive(Clone, Debug)]
pub struct HittingSimulator {
    geom: TorusGeometry,
    neighbors: Vec<u32>,
    target: Vec<bool>,
}

impl HittingSimulator {
    pub fn new(set: &PointSet, geom: &TorusGeometry) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::EmptyTarget);
        }
        let mut target = vec![false; geom.volume()];
        for p in set.iter() {
            geom.check_dim(p)?;
            target[geom.index(&geom.project(p))] = true;
        }
        Ok(HittingSimulator {
            geom: *geom,
            neighbors: neighbor_table(geom),
            target,
        })
    }

    pub fn geom(&self) -> &TorusGeometry {
        &self.geom
    }

    fn start_index(&self, start: &Start, rng: &mut WalkRng) -> Result<usize> {
        match start {
            Start::Uniform => Ok(rng.uniform_index(self.geom.volume())),
            Start::At(p) => {
                self.geom.check_dim(p)?;
                Ok(self.geom.index(&self.geom.project(p)))
            }
        }
    }

    /// Runs `X_0, .., X_{step_cap}` and stops at the first visit to `A`.
    /// Without a visit the result is truncated with `steps = step_cap`.
    pub fn run_raw(
        &self,
        start: &Start,
        step_cap: u64,
        with_clock: bool,
        rng: &mut WalkRng,
    ) -> Result<RawHit> {
        let x0 = self.start_index(start, rng)?;
        let two_d = 2 * self.geom.dim();
        let mut x = x0;
        let mut clock = if with_clock { 0.0 } else { f64::NAN };
        let mut n = 0u64;
        loop {
            if self.target[x] {
                return Ok(RawHit {
                    start: x0,
                    steps: n,
                    clock,
                    hit: Some(x),
                });
            }
            if n == step_cap {
                return Ok(RawHit {
                    start: x0,
                    steps: n,
                    clock,
                    hit: None,
                });
            }
            x = self.neighbors[x * two_d + rng.direction(two_d)] as usize;
            if with_clock {
                clock += rng.holding_time();
            }
            n += 1;
        }
    }

    pub fn run(&self, start: &Start, step_cap: u64, rng: &mut WalkRng) -> Result<HittingSample> {
        let raw = self.run_raw(start, step_cap, true, rng)?;
        Ok(HittingSample {
            start: self.geom.point(raw.start),
            discrete_time: raw.steps,
            continuous_time: raw.clock,
            hit_point: raw.hit.map(|i| self.geom.point(i)),
            truncated: raw.truncated(),
        })
    }
}

fn neighbor_table(geom: &TorusGeometry) -> Vec<u32> {
    let two_d = 2 * geom.dim();
    let mut out = Vec::with_capacity(geom.volume() * two_d);
    for i in 0..geom.volume() {
        for dir in 0..two_d {
            out.push(geom.neighbor(i, dir) as u32);
        }
    }
    out
}

/// `H_A = inf{n >= 0 : X_n in A}` together with `H_bar_A`, the sum of one
/// `Exp(1)` holding time per step.
pub fn simulate_hitting(
    set: &PointSet,
    geom: &TorusGeometry,
    start: &Start,
    step_cap: u64,
    rng: &mut WalkRng,
) -> Result<HittingSample> {
    if step_cap < 1 {
        return Err(Error::Precondition("step_cap must be at least 1".into()));
    }
    HittingSimulator::new(set, geom)?.run(start, step_cap, rng)
}

/// Default truncation `100 u N^d` for torus runs at level `u`.
pub fn default_step_cap(u: f64, geom: &TorusGeometry) -> u64 {
    (100.0 * u * geom.volume() as f64).ceil().max(1.0) as u64
}

/// Writes hitting samples as CSV with columns `start,H,H_bar,truncated`.
pub fn write_samples_csv(samples: &[HittingSample], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["start", "H", "H_bar", "truncated"])?;
    for s in samples {
        out.write_record([
            s.start.to_string(),
            s.discrete_time.to_string(),
            format!("{:e}", s.continuous_time),
            s.truncated.to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_samples_csv_file(samples: &[HittingSample], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_samples_csv(samples, std::io::BufWriter::new(file))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnEscape {
    Returned,
    Escaped,
}

/// Runs the walk on `Z^d` from `start` in `A` until it comes back to `A`
/// (at a time `n >= 1`) or leaves the l-infinity ball of radius `R`.
pub fn simulate_return_escape(
    set: &PointSet,
    start: &Point,
    radius: usize,
    rng: &mut WalkRng,
) -> Result<ReturnEscape> {
    let d = set.dim();
    if d < 3 {
        return Err(Error::Precondition(format!("needs d >= 3, got {d}")));
    }
    if !set.contains(start) {
        return Err(Error::Precondition(format!("{start:?} is not in A")));
    }
    let r = radius as i64;
    if r <= set.radius() {
        return Err(Error::Precondition(format!(
            "R = {radius} does not exceed the radius {} of A",
            set.radius()
        )));
    }
    let members: HashSet<&[i64]> = set.iter().map(|p| p.coords()).collect();
    let mut x = start.coords().to_vec();
    loop {
        let dir = rng.direction(2 * d);
        x[dir / 2] += if dir % 2 == 0 { 1 } else { -1 };
        if x[dir / 2].abs() > r {
            return Ok(ReturnEscape::Escaped);
        }
        if members.contains(x.as_slice()) {
            return Ok(ReturnEscape::Returned);
        }
    }
}

/// The torus path `X_0, .., X_T` of one walk.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    geom: TorusGeometry,
    path: Vec<u32>,
}

impl Trajectory {
    /// Draws `X_0` and `floor(horizon)` steps from the step stream.
    pub fn sample(
        geom: &TorusGeometry,
        start: &Start,
        horizon: f64,
        rng: &mut WalkRng,
    ) -> Result<Self> {
        if !(horizon >= 0.0) {
            return Err(Error::Precondition(format!("horizon {horizon} < 0")));
        }
        let steps = horizon.floor() as usize;
        let x0 = match start {
            Start::Uniform => rng.uniform_index(geom.volume()),
            Start::At(p) => {
                geom.check_dim(p)?;
                geom.index(&geom.project(p))
            }
        };
        let two_d = 2 * geom.dim();
        let mut path = Vec::with_capacity(steps + 1);
        let mut x = x0;
        path.push(x as u32);
        for _ in 0..steps {
            x = geom.neighbor(x, rng.direction(two_d));
            path.push(x as u32);
        }
        Ok(Trajectory { geom: *geom, path })
    }

    pub fn geom(&self) -> &TorusGeometry {
        &self.geom
    }

    pub fn len(&self) -> usize {
        self.path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }

    pub fn position(&self, n: usize) -> Point {
        self.geom.point(self.path[n] as usize)
    }

    /// Largest time covered by the path.
    pub fn horizon(&self) -> usize {
        self.path.len() - 1
    }

    /// Torus indices visited at times `0..=t`.
    fn visited(&self, t: usize) -> Vec<bool> {
        let mut seen = vec![false; self.geom.volume()];
        for &x in &self.path[..=t] {
            seen[x as usize] = true;
        }
        seen
    }
}

/// `omega_{x,t}` read off a window of `Z^d` around a torus point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VacantWindow {
    pub center: Point,
    pub horizon: f64,
    pub window: Vec<Point>,
    /// `bits[k] = 1` iff `project(window[k]) + center` is not visited by time
    /// `floor(horizon)`.
    pub bits: Vec<u8>,
}

impl VacantWindow {
    /// The event that every point of the window is vacant.
    pub fn all_vacant(&self) -> bool {
        self.bits.iter().all(|&b| b == 1)
    }

    pub fn bit(&self, w: &Point) -> Option<u8> {
        self.window.iter().position(|p| p == w).map(|k| self.bits[k])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Vacant configuration of one window, read from a shared trajectory.
pub fn vacant_configuration(
    center: &Point,
    t: f64,
    window: &PointSet,
    source: &Trajectory,
) -> Result<VacantWindow> {
    let geom = source.geom();
    geom.check_dim(center)?;
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!("t = {t} < 0")));
    }
    let steps = t.floor() as usize;
    if steps > source.horizon() {
        return Err(Error::Precondition(format!(
            "trajectory covers {} steps, {steps} needed",
            source.horizon()
        )));
    }
    if !window.is_empty() && window.dim() != geom.dim() {
        return Err(Error::DimensionMismatch {
            expected: geom.dim(),
            got: window.dim(),
        });
    }
    let seen = source.visited(steps);
    let bits = window
        .iter()
        .map(|w| u8::from(!seen[geom.index(&geom.project(&w.add(center)))]))
        .collect();
    Ok(VacantWindow {
        center: center.clone(),
        horizon: t,
        window: window.points().to_vec(),
        bits,
    })
}

/// Labels torus points by the groups they belong to and reports which groups
/// a walk visits by a time horizon. Used for several windows read off one
/// shared trajectory without storing the path.
#[derive(Clone, Debug)]
pub struct VisitTracker {
    geom: TorusGeometry,
    neighbors: Vec<u32>,
    labels: Vec<u64>,
    full: u64,
}

impl VisitTracker {
    /// At most 64 groups; groups may share points.
    pub fn new(geom: &TorusGeometry, groups: &[PointSet]) -> Result<Self> {
        if groups.is_empty() || groups.len() > 64 {
            return Err(Error::Precondition(format!(
                "{} groups, expected 1 to 64",
                groups.len()
            )));
        }
        let mut labels = vec![0u64; geom.volume()];
        for (k, g) in groups.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::EmptyTarget);
            }
            for p in g.iter() {
                geom.check_dim(p)?;
                labels[geom.index(&geom.project(p))] |= 1 << k;
            }
        }
        let full = if groups.len() == 64 {
            u64::MAX
        } else {
            (1u64 << groups.len()) - 1
        };
        Ok(VisitTracker {
            geom: *geom,
            neighbors: neighbor_table(geom),
            labels,
            full,
        })
    }

    /// Bit `k` of the result is set iff group `k` is visited at some time
    /// `0 <= n <= floor(horizon)`. With `stop_early` the walk stops once any
    /// group is visited, so the result is only reliable as zero / nonzero.
    pub fn run(&self, start: &Start, horizon: f64, stop_early: bool, rng: &mut WalkRng) -> Result<u64> {
        let steps = horizon.max(0.0).floor() as u64;
        let mut x = match start {
            Start::Uniform => rng.uniform_index(self.geom.volume()),
            Start::At(p) => {
                self.geom.check_dim(p)?;
                self.geom.index(&self.geom.project(p))
            }
        };
        let two_d = 2 * self.geom.dim();
        let mut seen = self.labels[x];
        let mut n = 0u64;
        while n < steps && seen != self.full && !(stop_early && seen != 0) {
            x = self.neighbors[x * two_d + rng.direction(two_d)] as usize;
            seen |= self.labels[x];
            n += 1;
        }
        Ok(seen)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[i64]) -> Point {
        Point::new(c.to_vec())
    }

    fn tset(g: &TorusGeometry, pts: &[&[i64]]) -> PointSet {
        PointSet::torus(g, pts.iter().map(|c| p(c))).unwrap()
    }

    #[test]
    fn start_in_target_is_immediate() {
        let g = TorusGeometry::new(5, 2).unwrap();
        let a = tset(&g, &[&[1, 1]]);
        let s = simulate_hitting(&a, &g, &Start::At(p(&[1, 1])), 10, &mut WalkRng::new(1, 0)).unwrap();
        assert_eq!(s.discrete_time, 0);
        assert_eq!(s.continuous_time, 0.0);
        assert_eq!(s.hit_point, Some(p(&[1, 1])));
    }

    #[test]
    fn two_point_cycle_is_forced() {
        let g = TorusGeometry::new(2, 1).unwrap();
        let a = tset(&g, &[&[0]]);
        for seed in 0..20 {
            let s = simulate_hitting(&a, &g, &Start::At(p(&[1])), 10, &mut WalkRng::new(seed, 3)).unwrap();
            assert_eq!(s.discrete_time, 1);
            assert!(s.continuous_time > 0.0);
        }
    }

    #[test]
    fn errors_and_truncation() {
        let g = TorusGeometry::new(9, 3).unwrap();
        let empty = PointSet::torus(&g, []).unwrap();
        let mut rng = WalkRng::new(0, 0);
        assert!(matches!(
            simulate_hitting(&empty, &g, &Start::Uniform, 10, &mut rng),
            Err(Error::EmptyTarget)
        ));
        let a = tset(&g, &[&[0, 0, 0]]);
        let s = simulate_hitting(&a, &g, &Start::At(p(&[4, 4, 4])), 3, &mut rng).unwrap();
        assert!(s.truncated);
        assert_eq!(s.discrete_time, 3);
        assert_eq!(s.hit_point, None);
    }

    #[test]
    fn same_seed_same_sample() {
        let g = TorusGeometry::new(6, 3).unwrap();
        let a = tset(&g, &[&[0, 0, 0]]);
        let run = |stream| {
            simulate_hitting(&a, &g, &Start::Uniform, 1 << 20, &mut WalkRng::new(42, stream)).unwrap()
        };
        let (x, y, z) = (run(5), run(5), run(6));
        assert_eq!(x, y);
        assert_eq!(x.continuous_time.to_bits(), y.continuous_time.to_bits());
        assert_ne!(x, z);
    }

    #[test]
    fn four_cycle_mean_and_poissonization() {
        let g = TorusGeometry::new(4, 1).unwrap();
        let sim = HittingSimulator::new(&tset(&g, &[&[0]]), &g).unwrap();
        let mut rng = WalkRng::new(7, 0);
        let n = 40_000;
        let (mut s, mut s2, mut diff) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let h = sim.run_raw(&Start::Uniform, 1 << 30, true, &mut rng).unwrap();
            let v = h.steps as f64;
            s += v;
            s2 += v * v;
            diff += h.clock - v;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - 2.5).abs() < 3.0 * se, "mean {mean} se {se}");
        // paired difference has variance E[H]
        assert!((diff / n as f64).abs() < 3.0 * (2.5f64 / n as f64).sqrt() + 1e-12);
    }

    #[test]
    fn uniform_start_stays_uniform() {
        let g = TorusGeometry::new(5, 2).unwrap();
        let trials = 25_000;
        let mut counts = vec![0usize; 25];
        let mut rng = WalkRng::new(11, 0);
        for _ in 0..trials {
            let t = Trajectory::sample(&g, &Start::Uniform, 7.0, &mut rng).unwrap();
            counts[g.index(&t.position(7))] += 1;
        }
        let e = trials as f64 / 25.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 24 degrees of freedom, 0.999 quantile is about 51.2
        assert!(chi2 < 51.2, "chi2 {chi2}");
    }

    #[test]
    fn first_step_returns_when_neighbours_are_in_a() {
        let mut pts = vec![Point::origin(3)];
        pts.extend((0..6).map(|dir| Point::origin(3).step(dir)));
        let a = PointSet::lattice(3, pts).unwrap();
        let mut rng = WalkRng::new(0, 0);
        for _ in 0..100 {
            assert_eq!(
                simulate_return_escape(&a, &Point::origin(3), 4, &mut rng).unwrap(),
                ReturnEscape::Returned
            );
        }
        assert!(simulate_return_escape(&a, &Point::origin(3), 1, &mut rng).is_err());
        assert!(simulate_return_escape(&a, &p(&[5, 0, 0]), 8, &mut rng).is_err());
    }

    #[test]
    fn vacant_window_at_time_zero() {
        let g = TorusGeometry::new(5, 2).unwrap();
        let mut rng = WalkRng::new(3, 1);
        let t = Trajectory::sample(&g, &Start::Uniform, 0.0, &mut rng).unwrap();
        let window = PointSet::lattice(2, g.points().map(|q| q.sub(&p(&[2, 2])))).unwrap();
        let center = p(&[1, 3]);
        let v = vacant_configuration(&center, 0.0, &window, &t).unwrap();
        let x0 = t.position(0);
        for (w, b) in v.window.iter().zip(&v.bits) {
            let hit = g.project(&w.add(&center)) == x0;
            assert_eq!(*b, u8::from(!hit));
        }
        assert_eq!(v.bits.iter().filter(|&&b| b == 0).count(), 1);
        let empty = vacant_configuration(&center, 0.0, &PointSet::empty_lattice(2), &t).unwrap();
        assert!(empty.all_vacant());
        assert!(v.to_json().unwrap().contains("\"bits\":["));
    }

    #[test]
    fn vacant_event_is_the_hitting_event_pathwise() {
        let g = TorusGeometry::new(7, 3).unwrap();
        let k = PointSet::lattice(3, [p(&[0, 0, 0]), p(&[1, 0, 0]), p(&[0, -1, 0])]).unwrap();
        let center = p(&[3, 2, 6]);
        let a = PointSet::torus(&g, k.iter().map(|w| g.project(&w.add(&center)))).unwrap();
        let horizon = 150.7;
        let tracker = VisitTracker::new(&g, std::slice::from_ref(&a)).unwrap();
        let (mut agree, mut vacant) = (0, 0);
        for stream in 0..400 {
            let traj = Trajectory::sample(&g, &Start::Uniform, horizon, &mut WalkRng::new(9, stream)).unwrap();
            let w = vacant_configuration(&center, horizon, &k, &traj).unwrap();
            let h = simulate_hitting(&a, &g, &Start::Uniform, 1 << 24, &mut WalkRng::new(9, stream)).unwrap();
            let seen = tracker.run(&Start::Uniform, horizon, true, &mut WalkRng::new(9, stream)).unwrap();
            assert_eq!(w.all_vacant(), h.discrete_time > 150);
            assert_eq!(seen == 0, w.all_vacant());
            agree += 1;
            vacant += usize::from(w.all_vacant());
        }
        assert_eq!(agree, 400);
        assert!(vacant > 0 && vacant < 400);
    }

    #[test]
    fn tracker_reports_each_group() {
        let g = TorusGeometry::new(4, 1).unwrap();
        let groups = [tset(&g, &[&[1]]), tset(&g, &[&[1], &[3]])];
        let tr = VisitTracker::new(&g, &groups).unwrap();
        let mut rng = WalkRng::new(0, 0);
        assert_eq!(tr.run(&Start::At(p(&[1])), 0.0, false, &mut rng).unwrap(), 0b11);
        assert_eq!(tr.run(&Start::At(p(&[0])), 0.0, false, &mut rng).unwrap(), 0);
        assert_eq!(tr.run(&Start::At(p(&[3])), 0.0, false, &mut rng).unwrap(), 0b10);
    }

    #[test]
    fn samples_csv() {
        let s = HittingSample {
            start: p(&[1, 2]),
            discrete_time: 4,
            continuous_time: 3.5,
            hit_point: Some(p(&[0, 0])),
            truncated: false,
        };
        let mut buf = Vec::new();
        write_samples_csv(&[s], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "start,H,H_bar,truncated\n1 2,4,3.5e0,false\n"
        );
    }
}
