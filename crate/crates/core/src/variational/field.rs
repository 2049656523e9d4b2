use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{BoxRegion, Point, PointSet, TorusGeometry};

/// Where a field or a flow lives: the whole torus, or a finite box of `Z^d`
/// outside of which it vanishes.
#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Torus(TorusGeometry),
    Lattice(BoxRegion),
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Torus(g) => g.dim(),
            Domain::Lattice(r) => r.dim(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Domain::Torus(g) => g.volume(),
            Domain::Lattice(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of a point, `None` for lattice points outside the box. Torus
    /// points are projected first.
    pub fn index(&self, p: &Point) -> Option<usize> {
        match self {
            Domain::Torus(g) => {
                if p.dim() != g.dim() {
                    return None;
                }
                Some(g.index(&g.project(p)))
            }
            Domain::Lattice(r) => r.index(p),
        }
    }

    pub fn point(&self, idx: usize) -> Point {
        match self {
            Domain::Torus(g) => g.point(idx),
            Domain::Lattice(r) => r.point(idx),
        }
    }

    /// Neighbour of `idx` in direction `dir`, `None` when it leaves the box.
    #[inline]
    pub fn neighbor(&self, idx: usize, dir: usize) -> Option<usize> {
        match self {
            Domain::Torus(g) => Some(g.neighbor(idx, dir)),
            Domain::Lattice(r) => {
                let axis = dir / 2;
                let off = r.offset(idx, axis);
                let st = r.strides()[axis];
                if dir % 2 == 0 {
                    (off + 1 < r.shape()[axis]).then(|| idx + st)
                } else {
                    (off > 0).then(|| idx - st)
                }
            }
        }
    }
}

/// A real function on the torus, or a finitely supported function on `Z^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    domain: Domain,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(domain: Domain) -> Self {
        let n = domain.len();
        ScalarField {
            domain,
            values: vec![0.0; n],
        }
    }

    pub fn torus(geom: TorusGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geom.volume() {
            return Err(Error::Precondition(format!(
                "{} values for {} torus points",
                values.len(),
                geom.volume()
            )));
        }
        Ok(ScalarField {
            domain: Domain::Torus(geom),
            values,
        })
    }

    pub fn lattice(region: BoxRegion, values: Vec<f64>) -> Result<Self> {
        if values.len() != region.len() {
            return Err(Error::Precondition(format!(
                "{} values for a box of {} points",
                values.len(),
                region.len()
            )));
        }
        Ok(ScalarField {
            domain: Domain::Lattice(region),
            values,
        })
    }

    /// Indicator of a set, on the torus of the set or on its bounding box.
    pub fn indicator(domain: Domain, set: &PointSet) -> Result<Self> {
        let mut f = ScalarField::zeros(domain);
        for p in set.iter() {
            f.set(p, 1.0)?;
        }
        Ok(f)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at a point; lattice fields vanish outside their box.
    pub fn get(&self, p: &Point) -> f64 {
        self.domain.index(p).map_or(0.0, |i| self.values[i])
    }

    pub fn set(&mut self, p: &Point, v: f64) -> Result<()> {
        let i = self
            .domain
            .index(p)
            .ok_or_else(|| Error::OutsideDomain(p.clone()))?;
        self.values[i] = v;
        Ok(())
    }

    /// `nu(f)`, the uniform average over the torus. For lattice fields this is
    /// the average over the box.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Points where the field is nonzero.
    pub fn support(&self) -> PointSet {
        let pts = self
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| self.domain.point(i));
        match &self.domain {
            Domain::Torus(g) => PointSet::torus(g, pts).expect("canonical"),
            Domain::Lattice(r) => PointSet::lattice(r.dim(), pts).expect("dims agree"),
        }
    }

    pub fn scaled(&self, k: f64) -> ScalarField {
        ScalarField {
            domain: self.domain.clone(),
            values: self.values.iter().map(|v| k * v).collect(),
        }
    }
}

/// `E(f, f) = 1/2 sum_x sum_{x'~x} (f(x) - f(x'))^2 / (2d)`.
///
/// Lattice fields are extended by zero outside their box, so edges leaving
/// the box count as well.
pub fn dirichlet_form(f: &ScalarField) -> f64 {
    let d = f.domain.dim();
    let w = 1.0 / (2 * d) as f64;
    match &f.domain {
        Domain::Torus(g) => {
            let mut s = 0.0;
            for i in 0..g.volume() {
                for axis in 0..d {
                    let j = g.neighbor(i, 2 * axis);
                    let diff = f.values[i] - f.values[j];
                    s += diff * diff;
                }
            }
            s * w
        }
        Domain::Lattice(r) => {
            // every edge with an endpoint in the box is the +e_axis edge of a
            // point of the box grown by one layer
            let grown = r.grow(1);
            let mut s = 0.0;
            for i in 0..grown.len() {
                let x = grown.point(i);
                let fx = f.get(&x);
                for axis in 0..d {
                    let fy = f.get(&x.step(2 * axis));
                    let diff = fx - fy;
                    s += diff * diff;
                }
            }
            s * w
        }
    }
}

#[derive(Serialize)]
struct FieldDump<'a> {
    points: Vec<Point>,
    values: &'a [f64],
}

impl ScalarField {
    pub fn to_json(&self) -> Result<String> {
        let points = (0..self.values.len()).map(|i| self.domain.point(i)).collect();
        Ok(serde_json::to_string(&FieldDump {
            points,
            values: &self.values,
        })?)
    }
}
