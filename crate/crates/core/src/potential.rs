//! Potential theory of the simple random walk on `Z^d`, `d >= 3`.
//!
//! Every infinite-volume quantity is approximated by the walk killed on
//! leaving a cube `center + [-R, R]^d`. Killing only removes paths, so box
//! Green functions and hitting probabilities increase to their limits while
//! escape probabilities (and hence capacities) decrease to theirs. The gap
//! decays like `c R^{2-d}`; `c` is calibrated from a second solve at `R/2`,
//! which also gives a Richardson-extrapolated value.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{BoxRegion, Point, PointSet};
use crate::solver::{self, DirichletProblem, SolveStats};
use crate::variational::{dirichlet_form, Domain, LatticeFlow, ScalarField};

/// Slack applied to the calibrated truncation constant when it is turned into
/// an error bound.
pub const TRUNCATION_SAFETY: f64 = 1.5;

/// The cube `center + [-radius, radius]^d` outside of which the walk is killed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxDomain {
    pub center: Point,
    pub radius: usize,
}

impl BoxDomain {
    pub fn centered(dim: usize, radius: usize) -> Self {
        BoxDomain {
            center: Point::origin(dim),
            radius,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// The cube plus the absorbing layer around it.
    pub fn padded(&self) -> BoxRegion {
        BoxRegion::cube(&self.center, self.radius + 1)
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.sub(&self.center).linf_norm() <= self.radius as i64
    }

    fn halved(&self) -> BoxDomain {
        BoxDomain {
            center: self.center.clone(),
            radius: self.radius / 2,
        }
    }
}

fn check_transient(dim: usize) -> Result<()> {
    if dim < 3 {
        return Err(Error::Precondition(format!(
            "potential theory needs d >= 3, got d = {dim}"
        )));
    }
    Ok(())
}

/// Two-radius truncation fit `v(R) = v_inf + c R^{2-d}` with the effective
/// radius `R + 1` (the first killed layer).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TruncationFit {
    pub extrapolated: f64,
    pub constant: f64,
    /// `|c| (R + 1)^{2-d}` times [`TRUNCATION_SAFETY`].
    pub error_bound: f64,
}

fn truncation_fit(dim: usize, small: (usize, f64), large: (usize, f64)) -> TruncationFit {
    let p = 2.0 - dim as f64;
    let r1 = (small.0 + 1) as f64;
    let r2 = (large.0 + 1) as f64;
    let c = (large.1 - small.1) / (r2.powf(p) - r1.powf(p));
    TruncationFit {
        extrapolated: large.1 - c * r2.powf(p),
        constant: c,
        error_bound: TRUNCATION_SAFETY * c.abs() * r2.powf(p),
    }
}

/// `phi(z) = P_z[H_A < exit of the box]`, the harmonic extension of `1_A`.
#[derive(Clone, Debug)]
pub struct HittingProbabilities {
    domain: BoxDomain,
    region: BoxRegion,
    values: Vec<f64>,
    stats: SolveStats,
}

impl HittingProbabilities {
    pub fn solve(set: &PointSet, domain: &BoxDomain) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::EmptySet);
        }
        if set.dim() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                got: set.dim(),
            });
        }
        let region = domain.padded();
        let mut prob = DirichletProblem::new(region.len());
        for i in 0..region.len() {
            if region.on_rim(i) {
                prob.fix(i, 0.0);
            }
        }
        for a in set.iter() {
            if !domain.contains(a) {
                return Err(Error::Precondition(format!(
                    "{a:?} is outside the box of radius {}",
                    domain.radius
                )));
            }
            prob.fix(region.index(a).expect("inside"), 1.0);
        }
        let (values, stats) = solver::solve_box(&region, &prob)?;
        Ok(HittingProbabilities {
            domain: domain.clone(),
            region,
            values,
            stats,
        })
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn stats(&self) -> SolveStats {
        self.stats
    }

    /// `phi(z)`, zero outside the box.
    pub fn value(&self, z: &Point) -> f64 {
        self.region.index(z).map_or(0.0, |i| self.values[i])
    }

    /// `(2d)^{-1} sum_{x'~x} (1 - phi(x'))`, the probability of escaping the
    /// box from `x` before returning to `A`.
    pub fn escape_probability(&self, x: &Point) -> f64 {
        let d = x.dim();
        (0..2 * d)
            .map(|dir| 1.0 - self.value(&x.step(dir)))
            .sum::<f64>()
            / (2 * d) as f64
    }

    /// `phi` as a finitely supported lattice field.
    pub fn to_field(&self) -> ScalarField {
        ScalarField::lattice(self.region.clone(), self.values.clone()).expect("sizes agree")
    }
}

/// `g_R(0, .)` on a centered box, plus the same table at radius `R/2`.
#[derive(Clone, Debug)]
pub struct GreenTable {
    dim: usize,
    radius: usize,
    region: BoxRegion,
    values: Vec<f64>,
    coarse_region: BoxRegion,
    coarse_values: Vec<f64>,
    fit_at_origin: TruncationFit,
}

fn green_solve(dim: usize, radius: usize) -> Result<(BoxRegion, Vec<f64>)> {
    let domain = BoxDomain::centered(dim, radius);
    let region = domain.padded();
    let mut prob = DirichletProblem::new(region.len());
    for i in 0..region.len() {
        if region.on_rim(i) {
            prob.fix(i, 0.0);
        }
    }
    prob.source[region.index(&Point::origin(dim)).expect("origin")] = 1.0;
    let (values, _) = solver::solve_box(&region, &prob)?;
    Ok((region, values))
}

impl GreenTable {
    /// Solves `h = 1_{0} + P h` in `[-R, R]^d` with `h = 0` outside, at `R`
    /// and at `R/2`.
    pub fn compute(dim: usize, radius: usize) -> Result<Self> {
        check_transient(dim)?;
        if radius < 4 {
            return Err(Error::Precondition(format!("radius {radius} < 4")));
        }
        let (region, values) = green_solve(dim, radius)?;
        let (coarse_region, coarse_values) = green_solve(dim, radius / 2)?;
        let o = Point::origin(dim);
        let fit_at_origin = truncation_fit(
            dim,
            (radius / 2, coarse_values[coarse_region.index(&o).unwrap()]),
            (radius, values[region.index(&o).unwrap()]),
        );
        Ok(GreenTable {
            dim,
            radius,
            region,
            values,
            coarse_region,
            coarse_values,
            fit_at_origin,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Box value `g_R(0, x)`, zero outside the box.
    pub fn value(&self, x: &Point) -> f64 {
        self.region.index(x).map_or(0.0, |i| self.values[i])
    }

    /// `g_R(x, x')` through translation invariance of the infinite-volume
    /// kernel.
    pub fn between(&self, x: &Point, y: &Point) -> f64 {
        self.value(&y.sub(x))
    }

    /// Two-radius fit at `x`; meaningful for `|x|_inf < R/2`.
    pub fn fit(&self, x: &Point) -> TruncationFit {
        let coarse = self.coarse_region.index(x).map_or(0.0, |i| self.coarse_values[i]);
        truncation_fit(self.dim, (self.radius / 2, coarse), (self.radius, self.value(x)))
    }

    /// Richardson-extrapolated `g(0, x)`.
    pub fn extrapolated(&self, x: &Point) -> f64 {
        self.fit(x).extrapolated
    }

    /// Bound on `g(0,0) - g_R(0,0)`; by the maximum principle the same bound
    /// covers every `x`.
    pub fn error_bound(&self) -> f64 {
        self.fit_at_origin.error_bound
    }

    /// The calibrated constant `c` in `g - g_R ~ c R^{2-d}`.
    pub fn truncation_constant(&self) -> f64 {
        -self.fit_at_origin.constant
    }
}

/// A box value of the Green function with its truncation bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GreenValue {
    pub value: f64,
    pub extrapolated: f64,
    pub error_bound: f64,
}

/// `g(0, x)` approximated on the box of radius `R`.
pub fn green(x: &Point, radius: usize) -> Result<GreenValue> {
    if x.linf_norm() >= radius as i64 {
        return Err(Error::Precondition(format!(
            "|x|_inf = {} is not below R = {radius}",
            x.linf_norm()
        )));
    }
    let table = GreenTable::compute(x.dim(), radius)?;
    let fit = table.fit(x);
    Ok(GreenValue {
        value: table.value(x),
        extrapolated: fit.extrapolated,
        error_bound: table.error_bound(),
    })
}

/// Equilibrium measure of a finite set, computed in a box.
#[derive(Clone, Debug, Serialize)]
pub struct EquilibriumMeasure {
    pub support: PointSet,
    pub weights: BTreeMap<Point, f64>,
    pub radius: usize,
    /// Bound on the truncation error of the total mass.
    pub error_bound: f64,
}

impl EquilibriumMeasure {
    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }

    pub fn weight(&self, x: &Point) -> f64 {
        self.weights.get(x).copied().unwrap_or(0.0)
    }
}

fn check_set_in_radius(set: &PointSet, radius: usize) -> Result<()> {
    check_transient(set.dim())?;
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    if radius as i64 <= 2 * set.radius() {
        return Err(Error::Precondition(format!(
            "R = {radius} must exceed twice the set radius {}",
            set.radius()
        )));
    }
    Ok(())
}

fn escape_weights(set: &PointSet, phi: &HittingProbabilities) -> BTreeMap<Point, f64> {
    set.iter()
        .map(|x| (x.clone(), phi.escape_probability(x)))
        .collect()
}

/// `e_A^{(R)}(x) = P_x[escape the box before returning to A]` for `x` in `A`.
pub fn equilibrium_measure(set: &PointSet, radius: usize) -> Result<EquilibriumMeasure> {
    check_set_in_radius(set, radius)?;
    let domain = BoxDomain::centered(set.dim(), radius);
    let phi = HittingProbabilities::solve(set, &domain)?;
    let weights = escape_weights(set, &phi);
    let coarse = HittingProbabilities::solve(set, &domain.halved())?;
    let coarse_total: f64 = escape_weights(set, &coarse).values().sum();
    let total: f64 = weights.values().sum();
    let fit = truncation_fit(set.dim(), (radius / 2, coarse_total), (radius, total));
    Ok(EquilibriumMeasure {
        support: set.clone(),
        weights,
        radius,
        error_bound: fit.error_bound,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityMethod {
    /// Total mass of the box equilibrium measure.
    Equilibrium,
    /// Dirichlet form of the harmonic extension of `1_A`.
    DirichletUpper,
    /// Reciprocal energy of the unit flow built from the hitting probabilities.
    FlowEnergyCheck,
}

/// `cap(A)` approximated in a box. All three methods give upper bounds that
/// decrease to `cap(A)`; the true value lies in `[value - error_bound, value]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityEstimate {
    pub value: f64,
    pub method: CapacityMethod,
    pub radius: usize,
    pub error_bound: f64,
    /// Richardson value from the radii `R/2` and `R`.
    pub extrapolated: f64,
}

impl CapacityEstimate {
    pub fn lower(&self) -> f64 {
        (self.value - self.error_bound).max(0.0)
    }
}

fn capacity_in(set: &PointSet, domain: &BoxDomain, method: CapacityMethod) -> Result<f64> {
    let phi = HittingProbabilities::solve(set, domain)?;
    Ok(match method {
        CapacityMethod::Equilibrium => escape_weights(set, &phi).values().sum(),
        CapacityMethod::DirichletUpper => dirichlet_form(&phi.to_field()),
        CapacityMethod::FlowEnergyCheck => {
            let cap: f64 = escape_weights(set, &phi).values().sum();
            1.0 / unit_flow_from(&phi, cap).energy()
        }
    })
}

pub fn capacity(set: &PointSet, radius: usize, method: CapacityMethod) -> Result<CapacityEstimate> {
    if set.is_empty() {
        return Ok(CapacityEstimate {
            value: 0.0,
            method,
            radius,
            error_bound: 0.0,
            extrapolated: 0.0,
        });
    }
    check_set_in_radius(set, radius)?;
    let domain = BoxDomain::centered(set.dim(), radius);
    let value = capacity_in(set, &domain, method)?;
    let coarse = capacity_in(set, &domain.halved(), method)?;
    let fit = truncation_fit(set.dim(), (radius / 2, coarse), (radius, value));
    Ok(CapacityEstimate {
        value,
        method,
        radius,
        error_bound: fit.error_bound,
        extrapolated: fit.extrapolated,
    })
}

/// Persisted form of a capacity computation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityRecord {
    pub set: Vec<Point>,
    pub method: CapacityMethod,
    #[serde(rename = "R")]
    pub radius: usize,
    pub value: f64,
    pub error_bound: f64,
}

impl CapacityRecord {
    pub fn new(set: &PointSet, est: &CapacityEstimate) -> Self {
        CapacityRecord {
            set: set.points().to_vec(),
            method: est.method,
            radius: est.radius,
            value: est.value,
            error_bound: est.error_bound,
        }
    }
}

/// Both sides of `P_x[H_A < inf] = sum_{x' in A} g(x, x') e_A(x')`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HittingIdentity {
    pub hitting_probability: f64,
    pub green_sum: f64,
    pub residual: f64,
    /// Combined truncation bounds of the inputs.
    pub bound: f64,
}

/// Evaluates the last-exit decomposition at `x`. The left side comes from the
/// harmonic extension of `1_A`, the right side from a separate Green table
/// solve and the equilibrium measure; each is Richardson-extrapolated from
/// radii `R/2` and `R`.
pub fn hitting_identity_check(x: &Point, set: &PointSet, radius: usize) -> Result<HittingIdentity> {
    let table = GreenTable::compute(set.dim(), radius)?;
    hitting_identity_with(&table, x, set)
}

/// [`hitting_identity_check`] with a precomputed Green table.
pub fn hitting_identity_with(
    table: &GreenTable,
    x: &Point,
    set: &PointSet,
) -> Result<HittingIdentity> {
    let mut out = hitting_identities_with(table, set, std::slice::from_ref(x))?;
    Ok(out.pop().expect("one point"))
}

/// [`hitting_identity_with`] at several points, solving for `A` once.
pub fn hitting_identities_with(
    table: &GreenTable,
    set: &PointSet,
    xs: &[Point],
) -> Result<Vec<HittingIdentity>> {
    let radius = table.radius();
    check_set_in_radius(set, radius)?;
    for x in xs {
        let far = set.iter().map(|a| a.sub(x).linf_norm()).max().unwrap_or(0);
        if 2 * (x.linf_norm().max(far)) >= radius as i64 {
            return Err(Error::Precondition(format!(
                "{x:?} is too far out for R = {radius}"
            )));
        }
    }
    let domain = BoxDomain::centered(set.dim(), radius);
    let phi = HittingProbabilities::solve(set, &domain)?;
    let phi_coarse = HittingProbabilities::solve(set, &domain.halved())?;
    let e = escape_weights(set, &phi);
    let e_coarse = escape_weights(set, &phi_coarse);
    let dim = set.dim();
    let weights: Vec<TruncationFit> = set
        .iter()
        .map(|a| truncation_fit(dim, (radius / 2, e_coarse[a]), (radius, e[a])))
        .collect();
    Ok(xs
        .iter()
        .map(|x| {
            let lhs = truncation_fit(dim, (radius / 2, phi_coarse.value(x)), (radius, phi.value(x)));
            let mut rhs = 0.0;
            let mut rhs_bound = 0.0;
            for (a, ea) in set.iter().zip(&weights) {
                let g = table.fit(&a.sub(x));
                rhs += g.extrapolated * ea.extrapolated;
                rhs_bound +=
                    g.error_bound * ea.extrapolated.abs() + g.extrapolated.abs() * ea.error_bound;
            }
            HittingIdentity {
                hitting_probability: lhs.extrapolated,
                green_sum: rhs,
                residual: (lhs.extrapolated - rhs).abs(),
                bound: lhs.error_bound + rhs_bound,
            }
        })
        .collect())
}

/// The unit flow `I^A` from `A` to the absorbing boundary of a box.
#[derive(Clone, Debug)]
pub struct UnitFlow {
    pub flow: LatticeFlow,
    /// Box capacity used for the normalisation.
    pub capacity: f64,
    pub domain: BoxDomain,
    pub stats: SolveStats,
}

fn unit_flow_from(phi: &HittingProbabilities, cap: f64) -> LatticeFlow {
    let region = phi.region.clone();
    let d = region.dim();
    let k = 1.0 / (2.0 * d as f64 * cap);
    let mut flow = LatticeFlow::lattice(region.clone());
    let slots = flow.slots_mut();
    for i in 0..region.len() {
        for axis in 0..d {
            if region.offset(i, axis) + 1 < region.shape()[axis] {
                let j = i + region.strides()[axis];
                slots[i * d + axis] = -k * (phi.values[j] - phi.values[i]);
            }
        }
    }
    flow
}

/// `I^A(x, x') = -(2d cap(A))^{-1} (phi(x') - phi(x))` on a centered box.
pub fn optimal_flow(set: &PointSet, radius: usize) -> Result<UnitFlow> {
    check_transient(set.dim())?;
    optimal_flow_in(set, &BoxDomain::centered(set.dim(), radius))
}

/// [`optimal_flow`] on an arbitrary box.
pub fn optimal_flow_in(set: &PointSet, domain: &BoxDomain) -> Result<UnitFlow> {
    check_transient(set.dim())?;
    let phi = HittingProbabilities::solve(set, domain)?;
    let cap: f64 = escape_weights(set, &phi).values().sum();
    Ok(UnitFlow {
        flow: unit_flow_from(&phi, cap),
        capacity: cap,
        domain: domain.clone(),
        stats: phi.stats,
    })
}

impl UnitFlow {
    /// Restricts to a field-free view: the underlying lattice region.
    pub fn region(&self) -> &BoxRegion {
        match self.flow.domain() {
            Domain::Lattice(r) => r,
            Domain::Torus(_) => unreachable!("unit flows live on lattice boxes"),
        }
    }
}

/// `Q_u[vacant on K] = exp(-u cap(K))` with the interval implied by the
/// capacity bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VacantLaw {
    pub probability: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn vacant_law(set: &PointSet, u: f64, radius: usize) -> Result<VacantLaw> {
    if !(u >= 0.0) {
        return Err(Error::Precondition(format!("u = {u} must be >= 0")));
    }
    if set.is_empty() || u == 0.0 {
        return Ok(VacantLaw {
            probability: 1.0,
            lower: 1.0,
            upper: 1.0,
        });
    }
    let cap = capacity(set, radius, CapacityMethod::Equilibrium)?;
    Ok(vacant_law_from(&cap, u))
}

pub fn vacant_law_from(cap: &CapacityEstimate, u: f64) -> VacantLaw {
    VacantLaw {
        probability: (-u * cap.value).exp(),
        lower: (-u * cap.value).exp(),
        upper: (-u * cap.lower()).exp(),
    }
}
