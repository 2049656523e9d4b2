//! Flow constructions on the torus: restriction of a lattice unit flow to the
//! box `T'`, the charges it leaves on `S`, the uniformizing flow `L^h`, the
//! fiber flows `K^x`, and the redirecting flow `J = K + L^{div K + g}` whose
//! sum with the restriction is admissible in the flow characterisation of
//! `E[H_B] N^{-d}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{BoxEmbedding, Fiber, Point, PointSet, TorusGeometry};
use crate::potential::{optimal_flow_in, BoxDomain};
use crate::variational::{torus_thomson_value, Domain, LatticeFlow, ScalarField};

/// Restricts a flow on a lattice box containing `T'` to the torus:
/// `I*(x, x') = I(psi(x), psi(x'))` when `psi(x), psi(x')` are neighbours in
/// `Z^d`, and zero across the seam of the box.
pub fn restrict_flow(flow: &LatticeFlow, emb: &BoxEmbedding) -> Result<LatticeFlow> {
    let Domain::Lattice(region) = flow.domain() else {
        return Err(Error::Precondition("expected a lattice flow".into()));
    };
    let geom = *emb.geom();
    if region.dim() != geom.dim() {
        return Err(Error::DimensionMismatch {
            expected: geom.dim(),
            got: region.dim(),
        });
    }
    if !region.contains_region(&emb.region()) {
        return Err(Error::Precondition("the flow's box does not contain T'".into()));
    }
    let d = geom.dim();
    let n = geom.side() as i64;
    let mut out = LatticeFlow::torus(geom)?;
    let slots = out.slots_mut();
    for i in 0..geom.volume() {
        let y = emb.psi(&geom.point(i));
        let j = region.index(&y).expect("T' is inside the box");
        for axis in 0..d {
            if y.coords()[axis] < n - 1 {
                slots[i * d + axis] = flow.forward(j, axis);
            }
        }
    }
    Ok(out)
}

/// `g = (div I*) 1_S`, with its sup norm.
#[derive(Clone, Debug)]
pub struct BoundaryCharge {
    pub field: ScalarField,
    pub bound: f64,
}

impl BoundaryCharge {
    pub fn get(&self, x: &Point) -> f64 {
        self.field.get(x)
    }

    pub fn total(&self) -> f64 {
        self.field.values().iter().sum()
    }
}

pub fn boundary_charge(restricted: &LatticeFlow, s: &PointSet) -> Result<BoundaryCharge> {
    let Domain::Torus(geom) = restricted.domain() else {
        return Err(Error::Precondition("expected a torus flow".into()));
    };
    let mut field = ScalarField::zeros(Domain::Torus(*geom));
    let mut bound = 0.0f64;
    for x in s.iter() {
        let v = restricted.divergence_at(geom.index(x));
        field.set(x, v)?;
        bound = bound.max(v.abs());
    }
    Ok(BoundaryCharge { field, bound })
}

/// 1-d prefix-sum flow along consecutive points of a line of `N` sites
/// starting at `start` with stride `stride`, using the values `h`.
fn line_flow(h: &[f64], mean: f64, out: &mut [f64], start: usize, stride: usize, k: usize, axis: usize) {
    let n = h.len();
    let mut acc = 0.0;
    for (i, hv) in h.iter().enumerate().take(n - 1) {
        acc += mean - hv;
        out[(start + i * stride) * k + axis] = acc;
    }
}

/// `L^h` on `T_k` with `N^k` values in row-major order; slots as in
/// [`LatticeFlow`].
fn uniformize_rec(h: &[f64], n: usize, k: usize) -> Vec<f64> {
    let vol = h.len();
    let mut out = vec![0.0; vol * k];
    if k == 1 {
        let mean = h.iter().sum::<f64>() / n as f64;
        line_flow(h, mean, &mut out, 0, 1, 1, 0);
        return out;
    }
    let slice = vol / n;
    // fibers {(0,y), .., (N-1,y)} along the first axis
    let mut h2 = vec![0.0; slice];
    let mut fiber = vec![0.0; n];
    for y in 0..slice {
        for (i, f) in fiber.iter_mut().enumerate() {
            *f = h[i * slice + y];
        }
        let mean = fiber.iter().sum::<f64>() / n as f64;
        h2[y] = mean;
        line_flow(&fiber, mean, &mut out, y, slice, k, 0);
    }
    // the same (k-1)-dimensional flow on every slice S_i
    let sub = uniformize_rec(&h2, n, k - 1);
    for i in 0..n {
        for y in 0..slice {
            let idx = i * slice + y;
            out[idx * k + 1..idx * k + k].copy_from_slice(&sub[y * (k - 1)..(y + 1) * (k - 1)]);
        }
    }
    out
}

/// `L^h` with `div L^h + h = nu(h)` everywhere: prefix sums along the fibers
/// of the first axis, then the same construction one dimension lower on every
/// slice, for the fiber means.
pub fn uniformize_flow(h: &ScalarField) -> Result<LatticeFlow> {
    let Domain::Torus(geom) = h.domain() else {
        return Err(Error::Precondition("expected a torus field".into()));
    };
    let mut flow = LatticeFlow::torus(*geom)?;
    let values = uniformize_rec(h.values(), geom.side(), geom.dim());
    flow.slots_mut().copy_from_slice(&values);
    Ok(flow)
}

/// Adds `K^x` to `flow`: the charge at the base of the fiber is spread evenly
/// over its `N` points, `K_{x+ie, x+(i+1)e} = -charge (N-(i+1))/N`.
fn add_fiber_flow(flow: &mut LatticeFlow, geom: &TorusGeometry, charge: f64, fiber: &Fiber) {
    if charge == 0.0 {
        return;
    }
    let n = fiber.length;
    let idx = fiber.indices(geom);
    for (i, &x) in idx.iter().enumerate().take(n - 1) {
        flow.add_along(x, fiber.dir(), -charge * (n - (i + 1)) as f64 / n as f64);
    }
}

/// The fiber flow `K^x` on its own.
pub fn fiber_flow(geom: &TorusGeometry, charge: f64, fiber: &Fiber) -> Result<LatticeFlow> {
    if fiber.length != geom.side() {
        return Err(Error::Precondition(format!(
            "fiber of length {} on a torus of side {}",
            fiber.length,
            geom.side()
        )));
    }
    let mut flow = LatticeFlow::torus(*geom)?;
    add_fiber_flow(&mut flow, geom, charge, fiber);
    Ok(flow)
}

/// The pieces of `J = K + L^{div K + g}`.
#[derive(Clone, Debug)]
pub struct Redirection {
    pub charge: BoundaryCharge,
    pub k: LatticeFlow,
    pub l: LatticeFlow,
    pub j: LatticeFlow,
}

/// Builds `J` from the restricted flow: each charge on `S` is spread along
/// its fiber by `K`, and what is left is made uniform by `L`.
pub fn redirecting_flow(restricted: &LatticeFlow, emb: &BoxEmbedding) -> Result<Redirection> {
    let geom = *emb.geom();
    if restricted.domain() != &Domain::Torus(geom) {
        return Err(Error::Precondition("flow is not on the embedding's torus".into()));
    }
    let s = emb.boundary_sets().s;
    let charge = boundary_charge(restricted, &s)?;
    let fibers = emb.assign_fibers(&s)?;
    let mut k = LatticeFlow::torus(geom)?;
    for (x, fiber) in &fibers {
        add_fiber_flow(&mut k, &geom, charge.get(x), fiber);
    }
    let mut residual = k.divergence_field();
    for (r, g) in residual.values_mut().iter_mut().zip(charge.field.values()) {
        *r += g;
    }
    let l = uniformize_flow(&residual)?;
    let j = k.sum(&l)?;
    Ok(Redirection { charge, k, l, j })
}

/// Box radius for the lattice unit flow, leaving slack around `T'`.
pub fn default_flow_radius(geom: &TorusGeometry) -> usize {
    2 * geom.side()
}

/// The competitor `I* + J` with the quantities entering the energy bound.
#[derive(Clone, Debug)]
pub struct ThomsonCompetitor {
    pub flow: LatticeFlow,
    pub restricted: LatticeFlow,
    pub redirection: Redirection,
    /// `cap(psi(B))` in the lattice box the unit flow was built in.
    pub box_capacity: f64,
    /// `(I* + J, I* + J)_T`, an upper bound on `E[H_B] N^{-d}`.
    pub energy: f64,
    pub report: CompetitorReport,
}

/// Summary numbers of a competitor, for persistence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CompetitorReport {
    pub side: usize,
    pub dim: usize,
    pub radius: usize,
    pub box_capacity: f64,
    pub restricted_energy: f64,
    pub j_energy: f64,
    pub energy: f64,
    /// `((I*,I*)^{1/2} + (J,J)^{1/2})^2`.
    pub minkowski_bound: f64,
    pub charge_sup: f64,
    pub j_sup: f64,
    /// `max |div J + g + N^{-d}|`.
    pub identity_residual: f64,
}

/// Builds and validates `I* + J` for a torus set `B` with `psi(B)` inside
/// the interior of `T'`.
pub fn thomson_competitor(
    set: &PointSet,
    emb: &BoxEmbedding,
    radius: usize,
) -> Result<ThomsonCompetitor> {
    let geom = *emb.geom();
    if geom.dim() < 3 {
        return Err(Error::Precondition("unit flows to infinity need d >= 3".into()));
    }
    if set.is_empty() {
        return Err(Error::EmptyTarget);
    }
    if radius < geom.side() {
        return Err(Error::Precondition(format!(
            "R = {radius} must be at least N = {}",
            geom.side()
        )));
    }
    let image = emb.psi_set(set)?;
    if image.iter().any(|y| emb.on_box_boundary(y)) {
        return Err(Error::Precondition("psi(B) touches the boundary of T'".into()));
    }
    let domain = BoxDomain {
        center: Point::splat(geom.dim(), geom.side() as i64 / 2),
        radius,
    };
    let unit = optimal_flow_in(&image, &domain)?;
    let restricted = restrict_flow(&unit.flow, emb)?;
    let redirection = redirecting_flow(&restricted, emb)?;
    let flow = restricted.sum(&redirection.j)?;
    let energy = torus_thomson_value(&flow, set)?;

    let vol = geom.volume() as f64;
    let div_j = redirection.j.divergence_field();
    let identity_residual = div_j
        .values()
        .iter()
        .zip(redirection.charge.field.values())
        .fold(0.0f64, |m, (dj, g)| m.max((dj + g + 1.0 / vol).abs()));
    let restricted_energy = restricted.energy();
    let j_energy = redirection.j.energy();
    let report = CompetitorReport {
        side: geom.side(),
        dim: geom.dim(),
        radius,
        box_capacity: unit.capacity,
        restricted_energy,
        j_energy,
        energy,
        minkowski_bound: (restricted_energy.sqrt() + j_energy.sqrt()).powi(2),
        charge_sup: redirection.charge.bound,
        j_sup: redirection.j.sup_norm(),
        identity_residual,
    };
    Ok(ThomsonCompetitor {
        flow,
        restricted,
        redirection,
        box_capacity: unit.capacity,
        energy,
        report,
    })
}
