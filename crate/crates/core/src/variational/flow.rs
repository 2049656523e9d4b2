use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lattice::{BoxRegion, Point, PointSet, TorusGeometry};

use super::field::{Domain, ScalarField};

/// An antisymmetric function on the directed edges of the torus or of a box
/// of `Z^d`.
///
/// One value is stored per vertex and positive axis: slot `idx * d + axis`
/// holds `I(x, x + e_axis)`. On a lattice box the slots whose edge leaves
/// the box are always zero.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeFlow {
    domain: Domain,
    values: Vec<f64>,
}

/// Torus flows are rejected above this many vertices.
pub const MAX_DENSE_VERTICES: usize = 1_000_000;

impl LatticeFlow {
    /// Zero flow on the torus. Needs `N >= 3` so that neighbours along an
    /// axis are distinct.
    pub fn torus(geom: TorusGeometry) -> Result<Self> {
        if geom.side() < 3 {
            return Err(Error::InvalidGeometry(format!(
                "flows need N >= 3, got N = {}",
                geom.side()
            )));
        }
        if geom.volume() > MAX_DENSE_VERTICES {
            return Err(Error::TooLarge {
                unknowns: geom.volume(),
                limit: MAX_DENSE_VERTICES,
            });
        }
        Ok(LatticeFlow {
            values: vec![0.0; geom.volume() * geom.dim()],
            domain: Domain::Torus(geom),
        })
    }

    /// Zero flow on the edges inside a lattice box.
    pub fn lattice(region: BoxRegion) -> Self {
        LatticeFlow {
            values: vec![0.0; region.len() * region.dim()],
            domain: Domain::Lattice(region),
        }
    }

    pub fn zeros_like(&self) -> Self {
        LatticeFlow {
            domain: self.domain.clone(),
            values: vec![0.0; self.values.len()],
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Raw slot storage, see the type docs for the layout.
    pub fn slots(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn slots_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `I(x, x + e_axis)` by vertex index.
    #[inline]
    pub fn forward(&self, idx: usize, axis: usize) -> f64 {
        self.values[idx * self.dim() + axis]
    }

    /// Value on the edge leaving `idx` in direction `dir`.
    #[inline]
    pub fn along(&self, idx: usize, dir: usize) -> f64 {
        let axis = dir / 2;
        if dir % 2 == 0 {
            self.forward(idx, axis)
        } else {
            match self.domain.neighbor(idx, dir) {
                Some(j) => -self.forward(j, axis),
                None => 0.0,
            }
        }
    }

    /// Adds `v` to the edge leaving `idx` in direction `dir`.
    pub(crate) fn add_along(&mut self, idx: usize, dir: usize, v: f64) {
        let d = self.dim();
        let axis = dir / 2;
        let j = self
            .domain
            .neighbor(idx, dir)
            .expect("edge inside the domain");
        if dir % 2 == 0 {
            self.values[idx * d + axis] += v;
        } else {
            self.values[j * d + axis] -= v;
        }
    }

    /// Locates the edge `x -> x'` as (tail index, direction).
    fn locate(&self, x: &Point, y: &Point) -> Result<(usize, usize)> {
        let d = self.dim();
        let ix = self
            .domain
            .index(x)
            .ok_or_else(|| Error::OutsideDomain(x.clone()))?;
        let iy = self.domain.index(y);
        for dir in 0..2 * d {
            if let (Some(j), Some(iy)) = (self.domain.neighbor(ix, dir), iy) {
                if j == iy && j != ix {
                    return Ok((ix, dir));
                }
            }
        }
        let adjacent = match &self.domain {
            Domain::Torus(g) => g.adjacent(&g.project(x), &g.project(y)),
            Domain::Lattice(_) => x.is_adjacent(y),
        };
        if adjacent {
            Err(Error::OutsideDomain(y.clone()))
        } else {
            Err(Error::NonAdjacentEdge {
                from: x.clone(),
                to: y.clone(),
            })
        }
    }

    /// Sets `I(x, x') = v` and `I(x', x) = -v`.
    pub fn set(&mut self, x: &Point, y: &Point, v: f64) -> Result<()> {
        let (i, dir) = self.locate(x, y)?;
        let cur = self.along(i, dir);
        self.add_along(i, dir, v - cur);
        Ok(())
    }

    /// `I(x, x')`, zero for non-adjacent pairs and edges outside the domain.
    pub fn get(&self, x: &Point, y: &Point) -> f64 {
        match self.locate(x, y) {
            Ok((i, dir)) => self.along(i, dir),
            Err(_) => 0.0,
        }
    }

    /// `div I(x) = sum_{x'~x} I(x, x')` by vertex index.
    pub fn divergence_at(&self, idx: usize) -> f64 {
        (0..2 * self.dim()).map(|dir| self.along(idx, dir)).sum()
    }

    /// Divergence at every vertex of the domain.
    pub fn divergence_field(&self) -> ScalarField {
        let d = self.dim();
        let n = self.domain.len();
        let mut div = vec![0.0; n];
        for i in 0..n {
            for axis in 0..d {
                let v = self.values[i * d + axis];
                if v != 0.0 {
                    div[i] += v;
                    let j = self
                        .domain
                        .neighbor(i, 2 * axis)
                        .expect("nonzero slots are inside the domain");
                    div[j] -= v;
                }
            }
        }
        match &self.domain {
            Domain::Torus(g) => ScalarField::torus(*g, div),
            Domain::Lattice(r) => ScalarField::lattice(r.clone(), div),
        }
        .expect("sizes agree")
    }

    /// `(I, I) = 1/2 sum_x sum_x' I(x,x')^2 2d`.
    pub fn energy(&self) -> f64 {
        2.0 * self.dim() as f64 * self.values.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn add_assign(&mut self, other: &LatticeFlow) -> Result<()> {
        if self.domain != other.domain {
            return Err(Error::Precondition("flows live on different domains".into()));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }

    pub fn sum(&self, other: &LatticeFlow) -> Result<LatticeFlow> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    /// Number of edges carrying a nonzero value.
    pub fn support_size(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    /// Writes `x,x',value` rows, one per nonzero edge, oriented along `+e_axis`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv_to(&mut w).map_err(|e| Error::io(path, e))
    }

    pub fn write_csv_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        let d = self.dim();
        writeln!(w, "x,x_prime,value")?;
        for i in 0..self.domain.len() {
            for axis in 0..d {
                let v = self.values[i * d + axis];
                if v != 0.0 {
                    let j = self.domain.neighbor(i, 2 * axis).expect("inside");
                    writeln!(
                        w,
                        "{},{},{:e}",
                        self.domain.point(i),
                        self.domain.point(j),
                        v
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// Dissipated energy of a flow.
pub fn flow_energy(flow: &LatticeFlow) -> f64 {
    flow.energy()
}

/// Net flow out of `x`.
pub fn divergence(flow: &LatticeFlow, x: &Point) -> f64 {
    flow.domain
        .index(x)
        .map_or(0.0, |i| flow.divergence_at(i))
}

/// Net flow out of a finite set, `I(A) = sum_{x in A} div I(x)`.
pub fn flow_out(flow: &LatticeFlow, set: &PointSet) -> f64 {
    set.iter().map(|x| divergence(flow, x)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[i64]) -> Point {
        Point::new(c.to_vec())
    }

    #[test]
    fn zero_flow() {
        let g = TorusGeometry::new(4, 2).unwrap();
        let f = LatticeFlow::torus(g).unwrap();
        assert_eq!(f.energy(), 0.0);
        assert!(f.divergence_field().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_edge_energy_in_three_dimensions() {
        let mut f = LatticeFlow::lattice(BoxRegion::cube(&Point::origin(3), 2));
        f.set(&p(&[0, 0, 0]), &p(&[0, 1, 0]), 1.0).unwrap();
        assert!((f.energy() - 6.0).abs() < 1e-15);
        assert_eq!(f.get(&p(&[0, 1, 0]), &p(&[0, 0, 0])), -1.0);
        assert_eq!(divergence(&f, &p(&[0, 0, 0])), 1.0);
        assert_eq!(divergence(&f, &p(&[0, 1, 0])), -1.0);
    }

    #[test]
    fn non_adjacent_edges_are_rejected() {
        let g = TorusGeometry::new(5, 2).unwrap();
        let mut f = LatticeFlow::torus(g).unwrap();
        assert!(matches!(
            f.set(&p(&[0, 0]), &p(&[1, 1]), 1.0),
            Err(Error::NonAdjacentEdge { .. })
        ));
        // wrap-around edges are torus edges
        f.set(&p(&[0, 0]), &p(&[4, 0]), 2.0).unwrap();
        assert_eq!(f.get(&p(&[4, 0]), &p(&[0, 0])), -2.0);
        assert_eq!(f.get(&p(&[0, 0]), &p(&[2, 2])), 0.0);
    }

    #[test]
    fn torus_divergence_telescopes() {
        let g = TorusGeometry::new(5, 3).unwrap();
        let mut f = LatticeFlow::torus(g).unwrap();
        for (k, v) in f.slots_mut().iter_mut().enumerate() {
            *v = ((k * 37) % 17) as f64 - 8.3;
        }
        let div = f.divergence_field();
        let total: f64 = div.values().iter().sum();
        assert!(total.abs() < 1e-10);
        for i in [0, 17, 124] {
            assert!((div.values()[i] - f.divergence_at(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn torus_flows_need_three_points_per_axis() {
        assert!(LatticeFlow::torus(TorusGeometry::new(2, 3).unwrap()).is_err());
    }

    #[test]
    fn csv_dump_lists_nonzero_edges() {
        let g = TorusGeometry::new(3, 1).unwrap();
        let mut f = LatticeFlow::torus(g).unwrap();
        f.set(&p(&[2]), &p(&[0]), 0.5).unwrap();
        let mut buf = Vec::new();
        f.write_csv_to(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,x_prime,value\n2,0,5e-1\n");
    }
}
