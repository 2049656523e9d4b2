//! Matrix-free solvers for `(I - P) u = f`, `P` the simple random walk
//! transition operator, with Dirichlet values on a set of fixed sites.
//!
//! Two geometries are supported: a lattice box whose outer layer is fixed
//! (conjugate gradients preconditioned by a geometric multigrid V-cycle), and
//! the periodic torus (plain conjugate gradients).

use crate::error::{Error, Result};
use crate::lattice::{BoxRegion, TorusGeometry};

/// Max-norm residual every solve must reach.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// A Dirichlet problem on a grid: `u = values` on fixed sites and
/// `u - P u = source` on free sites. `values` doubles as the initial guess on
/// free sites.
#[derive(Clone, Debug)]
pub struct DirichletProblem {
    pub free: Vec<bool>,
    pub values: Vec<f64>,
    pub source: Vec<f64>,
}

impl DirichletProblem {
    pub fn new(len: usize) -> Self {
        DirichletProblem {
            free: vec![true; len],
            values: vec![0.0; len],
            source: vec![0.0; len],
        }
    }

    pub fn fix(&mut self, idx: usize, value: f64) {
        self.free[idx] = false;
        self.values[idx] = value;
    }

    pub fn unknowns(&self) -> usize {
        self.free.iter().filter(|&&f| f).count()
    }
}

trait Operator {
    fn len(&self) -> usize;
    /// `y = (I - P) x` on free sites, 0 elsewhere; `x` vanishes off free sites.
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn is_free(&self, i: usize) -> bool;
}

trait Preconditioner {
    fn apply(&mut self, r: &[f64], z: &mut [f64]);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn true_residual(op: &dyn Operator, b: &[f64], x: &[f64], r: &mut [f64]) -> f64 {
    op.apply(x, r);
    for i in 0..r.len() {
        r[i] = if op.is_free(i) { b[i] - r[i] } else { 0.0 };
    }
    max_abs(r)
}

fn pcg(
    op: &dyn Operator,
    mut pre: Option<&mut dyn Preconditioner>,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<SolveStats> {
    let n = op.len();
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];

    let mask = |v: &mut [f64]| {
        for (i, vi) in v.iter_mut().enumerate() {
            if !op.is_free(i) {
                *vi = 0.0;
            }
        }
    };
    let precondition = |r: &[f64], z: &mut [f64], pre: &mut Option<&mut dyn Preconditioner>| {
        match pre {
            Some(m) => {
                m.apply(r, z);
                mask(z);
            }
            None => z.copy_from_slice(r),
        }
    };

    let mut res = true_residual(op, b, x, &mut r);
    if res <= tol {
        return Ok(SolveStats {
            iterations: 0,
            residual: res,
        });
    }
    precondition(&r, &mut z, &mut pre);
    p.copy_from_slice(&z);
    let mut rz = dot(&r, &z);

    for it in 1..=max_iter {
        op.apply(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 || !pq.is_finite() {
            break;
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        if max_abs(&r) <= 0.5 * tol {
            res = true_residual(op, b, x, &mut r);
            if res <= tol {
                return Ok(SolveStats {
                    iterations: it,
                    residual: res,
                });
            }
            // recursive residual drifted; restart from the true one
            precondition(&r, &mut z, &mut pre);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        precondition(&r, &mut z, &mut pre);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = true_residual(op, b, x, &mut r);
    if res <= tol {
        return Ok(SolveStats {
            iterations: max_iter,
            residual: res,
        });
    }
    Err(Error::SolverDiverged {
        iterations: max_iter,
        residual: res,
        tolerance: tol,
    })
}

/// Start index of every row (along the last axis) of the interior of a
/// padded box, and the row length.
fn interior_rows(shape: &[usize], strides: &[usize]) -> (Vec<usize>, usize) {
    let d = shape.len();
    let row_len = shape[d - 1].saturating_sub(2);
    if shape.iter().any(|&s| s < 3) {
        return (Vec::new(), 0);
    }
    let mut rows = Vec::new();
    let mut c = vec![1usize; d - 1];
    loop {
        let base: usize = c.iter().zip(strides).map(|(a, s)| a * s).sum();
        rows.push(base + strides[d - 1]);
        let mut axis = d - 1;
        loop {
            if axis == 0 {
                return (rows, row_len);
            }
            axis -= 1;
            c[axis] += 1;
            if c[axis] + 1 < shape[axis] {
                break;
            }
            c[axis] = 1;
        }
    }
}

struct BoxOperator<'a> {
    strides: Vec<usize>,
    rows: Vec<usize>,
    row_len: usize,
    free: &'a [bool],
    inv2d: f64,
}

impl Operator for BoxOperator<'_> {
    fn len(&self) -> usize {
        self.free.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for &start in &self.rows {
            for i in start..start + self.row_len {
                if self.free[i] {
                    let mut s = 0.0;
                    for &st in &self.strides {
                        s += x[i - st] + x[i + st];
                    }
                    y[i] = x[i] - self.inv2d * s;
                }
            }
        }
    }

    fn is_free(&self, i: usize) -> bool {
        self.free[i]
    }
}

/// One grid of the multigrid hierarchy, padded by a zero layer.
struct Level {
    shape: Vec<usize>,
    strides: Vec<usize>,
    rows: Vec<usize>,
    row_len: usize,
    /// The level operator is `scale * (I - P)`.
    scale: f64,
    x: Vec<f64>,
    b: Vec<f64>,
    t: Vec<f64>,
}

impl Level {
    fn new(interior: &[usize], scale: f64) -> Self {
        let shape: Vec<usize> = interior.iter().map(|n| n + 2).collect();
        let region = BoxRegion::new(crate::lattice::Point::origin(shape.len()), shape.clone());
        let strides = region.strides().to_vec();
        let (rows, row_len) = interior_rows(&shape, &strides);
        let len = region.len();
        Level {
            shape,
            strides,
            rows,
            row_len,
            scale,
            x: vec![0.0; len],
            b: vec![0.0; len],
            t: vec![0.0; len],
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let inv2d = 1.0 / (2 * self.strides.len()) as f64;
        for &start in &self.rows {
            for i in start..start + self.row_len {
                let mut s = 0.0;
                for &st in &self.strides {
                    s += x[i - st] + x[i + st];
                }
                y[i] = self.scale * (x[i] - inv2d * s);
            }
        }
    }

    fn jacobi(&mut self, sweeps: usize, omega: f64) {
        let w = omega / self.scale;
        for _ in 0..sweeps {
            let mut t = std::mem::take(&mut self.t);
            self.apply(&self.x, &mut t);
            for &start in &self.rows {
                for i in start..start + self.row_len {
                    self.x[i] += w * (self.b[i] - t[i]);
                }
            }
            self.t = t;
        }
    }
}

/// Symmetric V-cycle for the plain box Laplacian: damped Jacobi smoothing,
/// full weighting restriction, multilinear prolongation and a rediscretised
/// coarse operator.
struct Multigrid {
    levels: Vec<Level>,
    omega: f64,
    sweeps: usize,
}

const COARSE_SWEEPS: usize = 60;

impl Multigrid {
    fn new(padded_shape: &[usize]) -> Self {
        let d = padded_shape.len();
        let mut interior: Vec<usize> = padded_shape.iter().map(|s| s - 2).collect();
        let mut levels = vec![Level::new(&interior, 1.0)];
        let mut scale = 1.0;
        while interior.iter().all(|&n| n >= 4) {
            interior = interior.iter().map(|n| n / 2).collect();
            scale *= 0.25;
            levels.push(Level::new(&interior, scale));
        }
        Multigrid {
            levels,
            omega: 2.0 * d as f64 / (2.0 * d as f64 + 1.0),
            sweeps: 2,
        }
    }

    /// Visits every fine interior site with its coarse stencil: `f(fine_idx,
    /// coarse_idx, weight)`.
    fn transfer(fine: &Level, coarse: &Level, mut f: impl FnMut(usize, usize, f64)) {
        let d = fine.shape.len();
        let nf: Vec<usize> = fine.shape.iter().map(|s| s - 2).collect();
        // per axis: fine interior coordinate -> up to two (padded coarse coord, weight)
        let tables: Vec<Vec<[(usize, f64); 2]>> = (0..d)
            .map(|a| {
                (0..nf[a])
                    .map(|i| {
                        if i % 2 == 1 {
                            [((i - 1) / 2 + 1, 1.0), (0, 0.0)]
                        } else {
                            [(i / 2, 0.5), (i / 2 + 1, 0.5)]
                        }
                    })
                    .collect()
            })
            .collect();
        let mut c = vec![0usize; d];
        let total: usize = nf.iter().product();
        for _ in 0..total {
            let fidx: usize = (0..d).map(|a| (c[a] + 1) * fine.strides[a]).sum();
            for mask in 0..(1usize << d) {
                let mut w = 1.0;
                let mut cidx = 0;
                for a in 0..d {
                    let (ci, wi) = tables[a][c[a]][(mask >> a) & 1];
                    w *= wi;
                    cidx += ci * coarse.strides[a];
                }
                if w != 0.0 {
                    f(fidx, cidx, w);
                }
            }
            for a in (0..d).rev() {
                c[a] += 1;
                if c[a] < nf[a] {
                    break;
                }
                c[a] = 0;
            }
        }
    }

    fn vcycle(&mut self, l: usize) {
        let omega = self.omega;
        let sweeps = self.sweeps;
        self.levels[l].x.iter_mut().for_each(|v| *v = 0.0);
        if l + 1 == self.levels.len() {
            self.levels[l].jacobi(COARSE_SWEEPS, omega);
            return;
        }
        self.levels[l].jacobi(sweeps, omega);
        {
            let lv = &mut self.levels[l];
            let mut t = std::mem::take(&mut lv.t);
            lv.apply(&lv.x, &mut t);
            for &start in &lv.rows {
                for i in start..start + lv.row_len {
                    t[i] = lv.b[i] - t[i];
                }
            }
            lv.t = t;
        }
        let d = self.levels[l].shape.len();
        let norm = 1.0 / (1usize << d) as f64;
        {
            let (head, tail) = self.levels.split_at_mut(l + 1);
            let fine = &head[l];
            let coarse = &mut tail[0];
            let mut cb = std::mem::take(&mut coarse.b);
            cb.iter_mut().for_each(|v| *v = 0.0);
            Self::transfer(fine, coarse, |fi, ci, w| cb[ci] += norm * w * fine.t[fi]);
            coarse.b = cb;
        }
        self.vcycle(l + 1);
        {
            let (head, tail) = self.levels.split_at_mut(l + 1);
            let fine = &mut head[l];
            let coarse = &tail[0];
            let mut fx = std::mem::take(&mut fine.x);
            Self::transfer(fine, coarse, |fi, ci, w| fx[fi] += w * coarse.x[ci]);
            fine.x = fx;
        }
        self.levels[l].jacobi(sweeps, omega);
    }
}

impl Preconditioner for Multigrid {
    fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        self.levels[0].b.copy_from_slice(r);
        self.vcycle(0);
        z.copy_from_slice(&self.levels[0].x);
    }
}

fn assemble_rhs(
    problem: &DirichletProblem,
    neighbors: impl Fn(usize, &mut dyn FnMut(usize)),
    inv2d: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = problem.free.len();
    let mut b = vec![0.0; n];
    let mut x = vec![0.0; n];
    for i in 0..n {
        if problem.free[i] {
            let mut s = 0.0;
            neighbors(i, &mut |j| {
                if !problem.free[j] {
                    s += problem.values[j];
                }
            });
            b[i] = problem.source[i] + inv2d * s;
            x[i] = problem.values[i];
        }
    }
    (b, x)
}

fn finish(problem: &DirichletProblem, x: Vec<f64>) -> Vec<f64> {
    x.into_iter()
        .zip(problem.free.iter().zip(&problem.values))
        .map(|(xi, (&f, &v))| if f { xi } else { v })
        .collect()
}

/// Solves a Dirichlet problem on a box region. Every site on the outer layer
/// of `region` must be fixed.
pub fn solve_box(region: &BoxRegion, problem: &DirichletProblem) -> Result<(Vec<f64>, SolveStats)> {
    assert_eq!(region.len(), problem.free.len());
    let d = region.dim();
    for i in 0..region.len() {
        if problem.free[i] && region.on_rim(i) {
            return Err(Error::Precondition(
                "box problem has a free site on the outer layer".into(),
            ));
        }
    }
    let strides = region.strides().to_vec();
    let (rows, row_len) = interior_rows(region.shape(), &strides);
    let inv2d = 1.0 / (2 * d) as f64;
    let (b, mut x) = assemble_rhs(
        problem,
        |i, f| {
            for &st in &strides {
                f(i - st);
                f(i + st);
            }
        },
        inv2d,
    );
    let op = BoxOperator {
        strides: strides.clone(),
        rows,
        row_len,
        free: &problem.free,
        inv2d,
    };
    let mut mg = Multigrid::new(region.shape());
    let stats = pcg(&op, Some(&mut mg), &b, &mut x, RESIDUAL_TOL, 400)?;
    Ok((finish(problem, x), stats))
}

struct TorusOperator<'a> {
    neighbors: Vec<u32>,
    two_d: usize,
    free: &'a [bool],
}

impl Operator for TorusOperator<'_> {
    fn len(&self) -> usize {
        self.free.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let inv2d = 1.0 / self.two_d as f64;
        for i in 0..x.len() {
            y[i] = if self.free[i] {
                let nb = &self.neighbors[i * self.two_d..(i + 1) * self.two_d];
                x[i] - inv2d * nb.iter().map(|&j| x[j as usize]).sum::<f64>()
            } else {
                0.0
            };
        }
    }

    fn is_free(&self, i: usize) -> bool {
        self.free[i]
    }
}

/// Neighbour table `idx * 2d + dir -> neighbour index`.
pub(crate) fn torus_neighbors(geom: &TorusGeometry) -> Vec<u32> {
    let two_d = 2 * geom.dim();
    let mut out = Vec::with_capacity(geom.volume() * two_d);
    for i in 0..geom.volume() {
        for dir in 0..two_d {
            out.push(geom.neighbor(i, dir) as u32);
        }
    }
    out
}

/// Solves a Dirichlet problem on the torus. At least one site must be fixed.
pub fn solve_torus(
    geom: &TorusGeometry,
    problem: &DirichletProblem,
) -> Result<(Vec<f64>, SolveStats)> {
    assert_eq!(geom.volume(), problem.free.len());
    if problem.free.iter().all(|&f| f) {
        return Err(Error::EmptyTarget);
    }
    let two_d = 2 * geom.dim();
    let neighbors = torus_neighbors(geom);
    let (b, mut x) = assemble_rhs(
        problem,
        |i, f| {
            for &j in &neighbors[i * two_d..(i + 1) * two_d] {
                f(j as usize);
            }
        },
        1.0 / two_d as f64,
    );
    // the residual floor scales with the size of the solution
    let scale = max_abs(&b).max(1.0);
    let op = TorusOperator {
        neighbors,
        two_d,
        free: &problem.free,
    };
    let max_iter = 200 * geom.volume().max(100);
    let stats = pcg(&op, None, &b, &mut x, RESIDUAL_TOL * scale, max_iter)?;
    Ok((finish(problem, x), stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Point;

    #[test]
    fn interior_rows_cover_interior() {
        let region = BoxRegion::new(Point::origin(3), vec![5, 4, 6]);
        let (rows, len) = interior_rows(region.shape(), region.strides());
        assert_eq!(len, 4);
        let mut count = 0;
        for &r in &rows {
            for i in r..r + len {
                assert!(!region.on_rim(i));
                count += 1;
            }
        }
        assert_eq!(count, 3 * 2 * 4);
    }

    #[test]
    fn one_dimensional_gambler_ruin() {
        // u(0)=0, u(n)=1, harmonic in between -> u(k) = k/n
        let n = 20;
        let region = BoxRegion::new(Point::origin(1), vec![n + 1]);
        let mut prob = DirichletProblem::new(n + 1);
        prob.fix(0, 0.0);
        prob.fix(n, 1.0);
        let (u, stats) = solve_box(&region, &prob).unwrap();
        assert!(stats.residual <= RESIDUAL_TOL);
        for (k, v) in u.iter().enumerate() {
            assert!((v - k as f64 / n as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn box_solve_has_small_residual_in_3d() {
        let region = BoxRegion::cube(&Point::origin(3), 13);
        let mut prob = DirichletProblem::new(region.len());
        for i in 0..region.len() {
            if region.on_rim(i) {
                prob.fix(i, 0.0);
            }
        }
        let c = region.index(&Point::origin(3)).unwrap();
        prob.fix(c, 1.0);
        prob.source[region.index(&Point::new(vec![3, 1, 0])).unwrap()] = 0.3;
        let (u, stats) = solve_box(&region, &prob).unwrap();
        assert!(stats.iterations < 60, "{stats:?}");
        // recompute the residual independently
        let st = region.strides();
        for i in 0..region.len() {
            if prob.free[i] {
                let avg: f64 = st.iter().map(|s| u[i - s] + u[i + s]).sum::<f64>() / 6.0;
                assert!((u[i] - avg - prob.source[i]).abs() <= RESIDUAL_TOL);
            }
        }
    }

    #[test]
    fn torus_cycle_hitting_times() {
        // E_k[H_0] on the N-cycle is k (N - k)
        let g = TorusGeometry::new(9, 1).unwrap();
        let mut prob = DirichletProblem::new(9);
        prob.source = vec![1.0; 9];
        prob.fix(0, 0.0);
        let (h, _) = solve_torus(&g, &prob).unwrap();
        for k in 0..9 {
            assert!((h[k] - (k * (9 - k)) as f64).abs() < 1e-8);
        }
    }
}
