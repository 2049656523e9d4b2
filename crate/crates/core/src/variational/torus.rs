use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{BoxEmbedding, Point, PointSet, TorusGeometry};
use crate::solver::{self, DirichletProblem};

use super::field::{dirichlet_form, Domain, ScalarField};
use super::flow::LatticeFlow;

/// Largest torus handed to the exact hitting-time solver.
pub const MAX_EXACT_UNKNOWNS: usize = 1_000_000;

/// Per-point tolerance on the constraints of the flow characterisation.
pub const CONSTRAINT_TOL: f64 = 1e-9;

fn check_torus_set(set: &PointSet, geom: &TorusGeometry) -> Result<()> {
    if set.is_empty() {
        return Err(Error::EmptyTarget);
    }
    for p in set.iter() {
        geom.check_dim(p)?;
        if !geom.is_canonical(p) {
            return Err(Error::OutsideDomain(p.clone()));
        }
    }
    Ok(())
}

/// `E_nu[H_A] (x)` for every start `x`: zero on `A`, `1 + Ph` elsewhere.
pub fn expected_hitting_field(set: &PointSet, geom: &TorusGeometry) -> Result<ScalarField> {
    check_torus_set(set, geom)?;
    if geom.volume() > MAX_EXACT_UNKNOWNS {
        return Err(Error::TooLarge {
            unknowns: geom.volume(),
            limit: MAX_EXACT_UNKNOWNS,
        });
    }
    let mut prob = DirichletProblem::new(geom.volume());
    prob.source.iter_mut().for_each(|s| *s = 1.0);
    for p in set.iter() {
        prob.fix(geom.index(p), 0.0);
    }
    let (h, _) = solver::solve_torus(geom, &prob)?;
    ScalarField::torus(*geom, h)
}

/// `E_nu[H_A]` from a linear solve.
pub fn expected_hitting_exact(set: &PointSet, geom: &TorusGeometry) -> Result<f64> {
    if set.len() == geom.volume() {
        return Ok(0.0);
    }
    Ok(expected_hitting_field(set, geom)?.mean())
}

/// The torus test function built from window functions, with the pieces of
/// its construction.
#[derive(Clone, Debug)]
pub struct TestFunction {
    pub field: ScalarField,
    /// `nu(sum_i f_i o tau_{x_i})`.
    pub shifted_mean: f64,
    /// `sum_i E_{Z^d}(f_i, f_i)`.
    pub window_energy: f64,
}

impl TestFunction {
    pub fn normalizer(&self) -> f64 {
        1.0 - self.shifted_mean
    }

    /// `sum_i E(f_i, f_i) / (1 - nu)^2`, equal to `E_T(f, f)` when the
    /// shifted supports are apart.
    pub fn closed_form_energy(&self) -> f64 {
        self.window_energy / (self.normalizer() * self.normalizer())
    }
}

/// Shifts lattice fields `f_i` to the centers `x_i` through
/// `tau_x(x') = psi(x') - psi(x)`, subtracts the mean and rescales so that the
/// result is 1 wherever the `f_i` are 1 and has mean zero.
pub fn build_test_function(
    windows: &[ScalarField],
    centers: &[Point],
    emb: &BoxEmbedding,
) -> Result<TestFunction> {
    let geom = *emb.geom();
    if windows.len() != centers.len() || windows.is_empty() {
        return Err(Error::Precondition(format!(
            "{} window functions for {} centers",
            windows.len(),
            centers.len()
        )));
    }
    let n = geom.side() as i64;
    let mut sum = vec![0.0; geom.volume()];
    let mut owner: Vec<Option<usize>> = vec![None; geom.volume()];
    let mut window_energy = 0.0;
    for (i, (f, c)) in windows.iter().zip(centers).enumerate() {
        if !matches!(f.domain(), Domain::Lattice(_)) {
            return Err(Error::Precondition("window functions live on Z^d".into()));
        }
        geom.check_dim(c)?;
        let origin = emb.psi(c);
        for z in f.support().iter() {
            let y = origin.add(z);
            if y.coords().iter().any(|&v| v < 1 || v > n - 2) {
                return Err(Error::Precondition(format!(
                    "shifted support point {y:?} is not inside the box interior"
                )));
            }
            let idx = geom.index(&emb.psi_inv(&y));
            sum[idx] += f.get(z);
            owner[idx] = Some(i);
        }
        window_energy += dirichlet_form(f);
    }
    // supports must be apart: no point of one support next to or on another
    let mut counts = vec![0usize; windows.len()];
    for (idx, o) in owner.iter().enumerate() {
        if let Some(i) = *o {
            counts[i] += 1;
            for dir in 0..2 * geom.dim() {
                if let Some(j) = owner[geom.neighbor(idx, dir)] {
                    if j != i {
                        return Err(Error::SupportsOverlap);
                    }
                }
            }
        }
    }
    let expected: Vec<usize> = windows.iter().map(|f| f.support().len()).collect();
    if counts != expected {
        return Err(Error::SupportsOverlap);
    }
    let shifted_mean = sum.iter().sum::<f64>() / geom.volume() as f64;
    let norm = 1.0 - shifted_mean;
    if !(norm > 0.5) {
        return Err(Error::DegenerateNormalizer(norm));
    }
    let values = sum.iter().map(|s| (s - shifted_mean) / norm).collect();
    Ok(TestFunction {
        field: ScalarField::torus(geom, values)?,
        shifted_mean,
        window_energy,
    })
}

/// `E_T(f, f)` for `f` admissible in the function characterisation:
/// `f = 1` on `A` and `nu(f) = 0`. The result bounds `N^d / E[H_A]` from above.
pub fn torus_dirichlet_value(f: &ScalarField, set: &PointSet) -> Result<f64> {
    let Domain::Torus(geom) = f.domain() else {
        return Err(Error::Precondition("expected a torus field".into()));
    };
    check_torus_set(set, geom)?;
    let mut worst: Option<(Point, f64)> = None;
    for p in set.iter() {
        let dev = (f.get(p) - 1.0).abs();
        if dev > CONSTRAINT_TOL && worst.as_ref().is_none_or(|w| dev > w.1) {
            worst = Some((p.clone(), dev));
        }
    }
    if let Some((point, deviation)) = worst {
        return Err(Error::ConstraintViolated {
            point,
            what: "f = 1 on A",
            deviation,
        });
    }
    let mean = f.mean();
    if mean.abs() > CONSTRAINT_TOL {
        return Err(Error::ConstraintViolated {
            point: Point::origin(geom.dim()),
            what: "nu(f) = 0",
            deviation: mean.abs(),
        });
    }
    Ok(dirichlet_form(f))
}

/// `(I, I)_T` for a flow from `A` to the uniform distribution:
/// `I(A) = 1 - |A| N^{-d}` and `div I = -N^{-d}` off `A`. The result bounds
/// `E[H_A] N^{-d}` from above.
pub fn torus_thomson_value(flow: &LatticeFlow, set: &PointSet) -> Result<f64> {
    check_thomson_constraints(flow, set)?;
    Ok(flow.energy())
}

/// Validates the constraints of [`torus_thomson_value`], reporting the worst
/// offending point.
pub fn check_thomson_constraints(flow: &LatticeFlow, set: &PointSet) -> Result<()> {
    let Domain::Torus(geom) = flow.domain() else {
        return Err(Error::Precondition("expected a torus flow".into()));
    };
    check_torus_set(set, geom)?;
    let vol = geom.volume() as f64;
    let div = flow.divergence_field();
    let mut worst: Option<(Point, &'static str, f64)> = None;
    let mut consider = |p: Point, what, dev: f64| {
        if dev > CONSTRAINT_TOL && worst.as_ref().is_none_or(|w| dev > w.2) {
            worst = Some((p, what, dev));
        }
    };
    let mut out = 0.0;
    for (i, &v) in div.values().iter().enumerate() {
        let p = geom.point(i);
        if set.contains(&p) {
            out += v;
        } else {
            consider(p, "div I = -N^-d off A", (v + 1.0 / vol).abs());
        }
    }
    let dev = (out - (1.0 - set.len() as f64 / vol)).abs();
    consider(set.points()[0].clone(), "I(A) = 1 - |A| N^-d", dev);
    match worst {
        Some((point, what, deviation)) => Err(Error::ConstraintViolated {
            point,
            what,
            deviation,
        }),
        None => Ok(()),
    }
}

/// `(1 - cos(2 pi / N)) / d`, the spectral gap of the walk on the torus.
pub fn spectral_gap(geom: &TorusGeometry) -> f64 {
    let n = geom.side() as f64;
    (1.0 - (2.0 * std::f64::consts::PI / n).cos()) / geom.dim() as f64
}

/// The three sides of the variational sandwich.
///
/// `dirichlet_upper` and `exact` are on the `N^d / E[H]` scale;
/// `thomson_upper_on_EH` bounds `E[H] N^{-d}`, so its reciprocal is the lower
/// end on the first scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalBounds {
    pub dirichlet_upper: f64,
    pub exact: f64,
    #[serde(rename = "thomson_upper_on_EH")]
    pub thomson_upper_on_eh: f64,
}

impl VariationalBounds {
    pub fn lower(&self) -> f64 {
        1.0 / self.thomson_upper_on_eh
    }

    /// `1/thomson <= exact <= dirichlet`, each side with slack `tol`.
    pub fn holds(&self, tol: f64) -> bool {
        self.lower() <= self.exact + tol && self.exact <= self.dirichlet_upper + tol
    }
}
