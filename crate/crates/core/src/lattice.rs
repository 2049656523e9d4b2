//! Geometry of `Z^d` and of the discrete torus `(Z/NZ)^d`.
//!
//! Torus points are always stored canonically, with every coordinate in
//! `0..N`, so equality of torus points is structural. Linear indices use
//! row-major order with the first coordinate most significant; sorting points
//! lexicographically therefore agrees with sorting their indices.
//!
//! The [`BoxEmbedding`] type is the bijection between the torus and the box
//! `{0,..,N-1}^d` obtained by declaring a basepoint to be the origin. It owns
//! the boundary decomposition of the box and the fiber assignment used to
//! spread boundary charges.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of `Z^d`, or of the torus when its coordinates are canonical.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<i64>);

impl Point {
    pub fn new(coords: Vec<i64>) -> Self {
        Point(coords)
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![0; dim])
    }

    /// The unit vector `sign * e_axis`.
    pub fn unit(dim: usize, axis: usize, sign: i64) -> Self {
        let mut c = vec![0; dim];
        c[axis] = sign;
        Point(c)
    }

    /// The point `(v, v, ..., v)`.
    pub fn splat(dim: usize, v: i64) -> Self {
        Point(vec![v; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn add(&self, other: &Point) -> Point {
        debug_assert_eq!(self.dim(), other.dim());
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Point) -> Point {
        debug_assert_eq!(self.dim(), other.dim());
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, k: i64) -> Point {
        Point(self.0.iter().map(|a| a * k).collect())
    }

    /// Neighbour in direction `dir`, where `dir = 2*axis` is `+e_axis` and
    /// `dir = 2*axis + 1` is `-e_axis`.
    pub fn step(&self, dir: usize) -> Point {
        let mut c = self.0.clone();
        c[dir / 2] += if dir % 2 == 0 { 1 } else { -1 };
        Point(c)
    }

    pub fn linf_norm(&self) -> i64 {
        self.0.iter().map(|a| a.abs()).max().unwrap_or(0)
    }

    pub fn l1_norm(&self) -> i64 {
        self.0.iter().map(|a| a.abs()).sum()
    }

    /// Lattice adjacency: `|x - x'|_1 = 1`.
    pub fn is_adjacent(&self, other: &Point) -> bool {
        self.dim() == other.dim() && self.sub(other).l1_norm() == 1
    }

    /// Applies a signed permutation of the coordinates: coordinate `i` of the
    /// result is `signs[i] * self[perm[i]]`.
    pub fn permute(&self, perm: &[usize], signs: &[i64]) -> Point {
        Point(perm.iter().zip(signs).map(|(&p, &s)| s * self.0[p]).collect())
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for Point {
    /// Space separated coordinates, the form used in CSV columns.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl From<Vec<i64>> for Point {
    fn from(v: Vec<i64>) -> Self {
        Point(v)
    }
}

/// Side length and dimension of the torus `(Z/NZ)^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawGeometry", into = "RawGeometry")]
pub struct TorusGeometry {
    side: usize,
    dim: usize,
    volume: usize,
}

#[derive(Serialize, Deserialize)]
struct RawGeometry {
    side: usize,
    dim: usize,
}

impl TryFrom<RawGeometry> for TorusGeometry {
    type Error = Error;
    fn try_from(raw: RawGeometry) -> Result<Self> {
        TorusGeometry::new(raw.side, raw.dim)
    }
}

impl From<TorusGeometry> for RawGeometry {
    fn from(g: TorusGeometry) -> Self {
        RawGeometry {
            side: g.side,
            dim: g.dim,
        }
    }
}

impl TorusGeometry {
    /// Rejects `N < 2`, `d = 0` and volumes that do not fit in a `u32` index.
    pub fn new(side: usize, dim: usize) -> Result<Self> {
        if side < 2 {
            return Err(Error::InvalidGeometry(format!("side {side} < 2")));
        }
        if dim == 0 {
            return Err(Error::InvalidGeometry("dimension 0".into()));
        }
        let volume = u32::try_from(dim)
            .ok()
            .and_then(|d| side.checked_pow(d))
            .filter(|&v| v <= u32::MAX as usize)
            .ok_or_else(|| Error::InvalidGeometry(format!("{side}^{dim} points overflow")))?;
        Ok(TorusGeometry { side, dim, volume })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of vertices `N^d`.
    pub fn volume(&self) -> usize {
        self.volume
    }

    /// Index stride of coordinate `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.side.pow((self.dim - 1 - axis) as u32)
    }

    pub fn coord(&self, idx: usize, axis: usize) -> usize {
        (idx / self.stride(axis)) % self.side
    }

    /// Index of a canonical torus point.
    pub fn index(&self, p: &Point) -> usize {
        debug_assert_eq!(p.dim(), self.dim);
        p.coords().iter().fold(0usize, |acc, &c| {
            debug_assert!(c >= 0 && (c as usize) < self.side);
            acc * self.side + c as usize
        })
    }

    pub fn point(&self, mut idx: usize) -> Point {
        let mut c = vec![0i64; self.dim];
        for axis in (0..self.dim).rev() {
            c[axis] = (idx % self.side) as i64;
            idx /= self.side;
        }
        Point(c)
    }

    /// Index of the torus neighbour of `idx` in direction `dir` (see [`Point::step`]).
    #[inline]
    pub fn neighbor(&self, idx: usize, dir: usize) -> usize {
        let axis = dir / 2;
        let stride = self.stride(axis);
        let c = (idx / stride) % self.side;
        if dir % 2 == 0 {
            if c + 1 == self.side {
                idx - (self.side - 1) * stride
            } else {
                idx + stride
            }
        } else if c == 0 {
            idx + (self.side - 1) * stride
        } else {
            idx - stride
        }
    }

    /// Canonical projection `Z^d -> T`.
    pub fn project(&self, z: &Point) -> Point {
        let n = self.side as i64;
        Point(z.coords().iter().map(|c| c.rem_euclid(n)).collect())
    }

    pub fn is_canonical(&self, p: &Point) -> bool {
        p.dim() == self.dim
            && p
                .coords()
                .iter()
                .all(|&c| c >= 0 && (c as usize) < self.side)
    }

    pub fn check_dim(&self, p: &Point) -> Result<()> {
        if p.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: p.dim(),
            });
        }
        Ok(())
    }

    /// Torus adjacency of two canonical points (multiplicity ignored).
    pub fn adjacent(&self, a: &Point, b: &Point) -> bool {
        let ia = self.index(a);
        let ib = self.index(b);
        (0..2 * self.dim).any(|dir| self.neighbor(ia, dir) == ib) && ia != ib
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.volume).map(|i| self.point(i))
    }
}

/// Canonical projection `Z^d -> T`.
pub fn project(z: &Point, geom: &TorusGeometry) -> Point {
    geom.project(z)
}

/// The box representative of `x - basepoint` in `{0,..,N-1}^d`.
pub fn box_bijection(x: &Point, basepoint: &Point, geom: &TorusGeometry) -> Point {
    geom.project(&x.sub(basepoint))
}

/// Whether a [`PointSet`] lives in `Z^d` or on a torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ambient {
    Lattice,
    Torus(TorusGeometry),
}

/// A finite duplicate-free set of points, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointSet {
    dim: usize,
    ambient: Ambient,
    points: Vec<Point>,
}

impl PointSet {
    pub fn lattice(dim: usize, points: impl IntoIterator<Item = Point>) -> Result<Self> {
        let mut pts: Vec<Point> = points.into_iter().collect();
        for p in &pts {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
        }
        pts.sort();
        pts.dedup();
        Ok(PointSet {
            dim,
            ambient: Ambient::Lattice,
            points: pts,
        })
    }

    /// Builds a torus set, projecting every point to canonical coordinates.
    pub fn torus(geom: &TorusGeometry, points: impl IntoIterator<Item = Point>) -> Result<Self> {
        let mut pts = Vec::new();
        for p in points {
            geom.check_dim(&p)?;
            pts.push(geom.project(&p));
        }
        pts.sort();
        pts.dedup();
        Ok(PointSet {
            dim: geom.dim(),
            ambient: Ambient::Torus(*geom),
            points: pts,
        })
    }

    pub fn empty_lattice(dim: usize) -> Self {
        PointSet {
            dim,
            ambient: Ambient::Lattice,
            points: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ambient(&self) -> Ambient {
        self.ambient
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point> {
        self.points.iter()
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.points.binary_search(p).is_ok()
    }

    /// `max |x|_inf` over the set, 0 when empty.
    pub fn radius(&self) -> i64 {
        self.points.iter().map(Point::linf_norm).max().unwrap_or(0)
    }

    /// l-infinity diameter, 0 when empty.
    pub fn diameter(&self) -> i64 {
        let mut best = 0;
        for a in &self.points {
            for b in &self.points {
                best = best.max(a.sub(b).linf_norm());
            }
        }
        best
    }

    pub fn translate(&self, by: &Point) -> Result<PointSet> {
        let moved = self.points.iter().map(|p| p.add(by));
        match self.ambient {
            Ambient::Lattice => PointSet::lattice(self.dim, moved),
            Ambient::Torus(g) => PointSet::torus(&g, moved),
        }
    }

    pub fn is_subset(&self, other: &PointSet) -> bool {
        self.points.iter().all(|p| other.contains(p))
    }

    pub fn union(&self, other: &PointSet) -> Result<PointSet> {
        let all = self.points.iter().chain(other.points.iter()).cloned();
        match self.ambient {
            Ambient::Lattice => PointSet::lattice(self.dim, all),
            Ambient::Torus(g) => PointSet::torus(&g, all),
        }
    }
}

impl Serialize for PointSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.points.serialize(s)
    }
}

/// An axis-aligned hyperrectangle `lo + {0..shape_0} x .. x {0..shape_{d-1}}`
/// of `Z^d`, with row-major linear indexing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxRegion {
    lo: Point,
    shape: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl BoxRegion {
    pub fn new(lo: Point, shape: Vec<usize>) -> Self {
        assert_eq!(lo.dim(), shape.len());
        let mut strides = vec![1; shape.len()];
        for axis in (0..shape.len().saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * shape[axis + 1];
        }
        let len = shape.iter().product();
        BoxRegion {
            lo,
            shape,
            strides,
            len,
        }
    }

    /// The cube `center + [-radius, radius]^d`.
    pub fn cube(center: &Point, radius: usize) -> Self {
        let r = radius as i64;
        let lo = center.sub(&Point::splat(center.dim(), r));
        BoxRegion::new(lo, vec![2 * radius + 1; center.dim()])
    }

    /// This region grown by `k` layers on every side.
    pub fn grow(&self, k: usize) -> Self {
        let lo = self.lo.sub(&Point::splat(self.dim(), k as i64));
        BoxRegion::new(lo, self.shape.iter().map(|s| s + 2 * k).collect())
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn lo(&self) -> &Point {
        &self.lo
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn index(&self, p: &Point) -> Option<usize> {
        if p.dim() != self.dim() {
            return None;
        }
        let mut idx = 0;
        for axis in 0..self.dim() {
            let off = p.coords()[axis] - self.lo.coords()[axis];
            if off < 0 || off as usize >= self.shape[axis] {
                return None;
            }
            idx += off as usize * self.strides[axis];
        }
        Some(idx)
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.index(p).is_some()
    }

    pub fn point(&self, idx: usize) -> Point {
        let mut c = Vec::with_capacity(self.dim());
        for axis in 0..self.dim() {
            let off = (idx / self.strides[axis]) % self.shape[axis];
            c.push(self.lo.coords()[axis] + off as i64);
        }
        Point(c)
    }

    /// Offset of `idx` along `axis`, in `0..shape[axis]`.
    pub fn offset(&self, idx: usize, axis: usize) -> usize {
        (idx / self.strides[axis]) % self.shape[axis]
    }

    /// True when `idx` is on the outermost layer of the region.
    pub fn on_rim(&self, idx: usize) -> bool {
        (0..self.dim()).any(|a| {
            let o = self.offset(idx, a);
            o == 0 || o + 1 == self.shape[a]
        })
    }

    pub fn contains_region(&self, other: &BoxRegion) -> bool {
        (0..self.dim()).all(|a| {
            let lo = self.lo.coords()[a];
            let olo = other.lo.coords()[a];
            olo >= lo && olo + other.shape[a] as i64 <= lo + self.shape[a] as i64
        })
    }
}

/// Outcome of [`choose_basepoint`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BasepointChoice {
    pub basepoint: Point,
    /// `d(psi(B), inner boundary of the box)` in the l-infinity metric.
    pub margin: i64,
}

/// Picks the torus point sent to the origin of the box so that the union
/// `B = U (x_i + K_i)` stays far from the inner boundary of the box.
///
/// Works axis by axis: the occupied coordinates are sorted, the largest cyclic
/// gap is found and the seam is put in its middle.
pub fn choose_basepoint(
    centers: &[Point],
    windows: &[PointSet],
    geom: &TorusGeometry,
) -> Result<BasepointChoice> {
    if centers.is_empty() || centers.len() != windows.len() {
        return Err(Error::Precondition(format!(
            "{} centers for {} windows",
            centers.len(),
            windows.len()
        )));
    }
    let n = geom.side() as i64;
    for w in windows {
        if w.dim() != geom.dim() {
            return Err(Error::DimensionMismatch {
                expected: geom.dim(),
                got: w.dim(),
            });
        }
        if 4 * w.diameter() >= n {
            return Err(Error::Precondition(format!(
                "window diameter {} is not below N/4",
                w.diameter()
            )));
        }
    }
    let b = union_of_windows(centers, windows, geom)?;
    if b.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut base = Vec::with_capacity(geom.dim());
    for axis in 0..geom.dim() {
        let mut cs: Vec<i64> = b.iter().map(|p| p.coords()[axis]).collect();
        cs.sort_unstable();
        cs.dedup();
        // gap following cs[i], cyclically
        let (mut best_gap, mut best_upper) = (0, 0);
        for i in 0..cs.len() {
            let upper = if i + 1 < cs.len() { cs[i + 1] } else { cs[0] + n };
            let gap = upper - cs[i];
            if gap > best_gap {
                best_gap = gap;
                best_upper = upper;
            }
        }
        let k = (best_gap - 1) / 2;
        base.push((best_upper - k).rem_euclid(n));
    }
    let basepoint = Point(base);
    let margin = embedding_margin(&b, &basepoint, geom);
    if margin < 1 {
        return Err(Error::MarginTooSmall { best: margin });
    }
    Ok(BasepointChoice { basepoint, margin })
}

/// The torus set `U (x_i + pi(K_i))`.
pub fn union_of_windows(
    centers: &[Point],
    windows: &[PointSet],
    geom: &TorusGeometry,
) -> Result<PointSet> {
    let mut pts = Vec::new();
    for (c, w) in centers.iter().zip(windows) {
        geom.check_dim(c)?;
        pts.extend(w.iter().map(|k| c.add(k)));
    }
    PointSet::torus(geom, pts)
}

/// `d(psi(B), inner boundary of {0..N-1}^d)` for the given basepoint.
pub fn embedding_margin(b: &PointSet, basepoint: &Point, geom: &TorusGeometry) -> i64 {
    let n = geom.side() as i64;
    b.iter()
        .map(|x| {
            let y = box_bijection(x, basepoint, geom);
            y.coords()
                .iter()
                .map(|&c| c.min(n - 1 - c))
                .min()
                .unwrap_or(0)
        })
        .min()
        .unwrap_or(0)
}

/// `int T'`, `inner boundary of T'`, and their torus preimages `C` and `S`.
#[derive(Clone, Debug)]
pub struct BoundarySets {
    pub interior: PointSet,
    pub boundary: PointSet,
    pub c: PointSet,
    pub s: PointSet,
}

/// An axis segment of `N` torus points starting at a base point of `S` and
/// staying inside the box.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Fiber {
    pub base: Point,
    pub axis: usize,
    /// `+e_axis` when true, `-e_axis` otherwise.
    pub positive: bool,
    pub length: usize,
}

impl Fiber {
    pub fn direction(&self, dim: usize) -> Point {
        Point::unit(dim, self.axis, if self.positive { 1 } else { -1 })
    }

    /// Step direction in the convention of [`Point::step`].
    pub fn dir(&self) -> usize {
        2 * self.axis + usize::from(!self.positive)
    }

    /// Torus points `x, x + e, .., x + (N-1) e` in order.
    pub fn points(&self, geom: &TorusGeometry) -> Vec<Point> {
        let e = self.direction(geom.dim());
        (0..self.length as i64)
            .map(|k| geom.project(&self.base.add(&e.scale(k))))
            .collect()
    }

    pub fn indices(&self, geom: &TorusGeometry) -> Vec<usize> {
        let mut idx = geom.index(&self.base);
        let mut out = Vec::with_capacity(self.length);
        for _ in 0..self.length {
            out.push(idx);
            idx = geom.neighbor(idx, self.dir());
        }
        out
    }
}

/// The bijection `psi: T -> T' = {0,..,N-1}^d` sending `basepoint` to the origin.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxEmbedding {
    geom: TorusGeometry,
    basepoint: Point,
}

impl BoxEmbedding {
    pub fn new(geom: TorusGeometry, basepoint: Point) -> Result<Self> {
        geom.check_dim(&basepoint)?;
        let basepoint = geom.project(&basepoint);
        Ok(BoxEmbedding { geom, basepoint })
    }

    pub fn geom(&self) -> &TorusGeometry {
        &self.geom
    }

    pub fn basepoint(&self) -> &Point {
        &self.basepoint
    }

    pub fn psi(&self, x: &Point) -> Point {
        box_bijection(x, &self.basepoint, &self.geom)
    }

    pub fn psi_inv(&self, y: &Point) -> Point {
        self.geom.project(&y.add(&self.basepoint))
    }

    /// `psi` on indices; box points share the torus index layout.
    pub fn psi_index(&self, idx: usize) -> usize {
        self.geom.index(&self.psi(&self.geom.point(idx)))
    }

    /// The box `T'` as a lattice region.
    pub fn region(&self) -> BoxRegion {
        BoxRegion::new(
            Point::origin(self.geom.dim()),
            vec![self.geom.side(); self.geom.dim()],
        )
    }

    pub fn psi_set(&self, b: &PointSet) -> Result<PointSet> {
        PointSet::lattice(self.geom.dim(), b.iter().map(|x| self.psi(x)))
    }

    /// Whether a box point lies on the inner boundary of `T'`.
    pub fn on_box_boundary(&self, y: &Point) -> bool {
        let n = self.geom.side() as i64;
        y.coords().iter().any(|&c| c == 0 || c == n - 1)
    }

    pub fn boundary_sets(&self) -> BoundarySets {
        let mut interior = Vec::new();
        let mut boundary = Vec::new();
        for y in self.geom.points() {
            if self.on_box_boundary(&y) {
                boundary.push(y);
            } else {
                interior.push(y);
            }
        }
        let d = self.geom.dim();
        let c = interior.iter().map(|y| self.psi_inv(y));
        let s = boundary.iter().map(|y| self.psi_inv(y));
        BoundarySets {
            c: PointSet::torus(&self.geom, c).expect("canonical"),
            s: PointSet::torus(&self.geom, s).expect("canonical"),
            interior: PointSet::lattice(d, interior).expect("dims agree"),
            boundary: PointSet::lattice(d, boundary).expect("dims agree"),
        }
    }

    /// Chooses a fiber for every point of `S`. Among the extremal coordinates
    /// of `psi(x)` the smallest axis wins; the direction points into the box.
    pub fn assign_fibers(&self, s: &PointSet) -> Result<BTreeMap<Point, Fiber>> {
        let n = self.geom.side() as i64;
        let mut out = BTreeMap::new();
        for x in s.iter() {
            let y = self.psi(x);
            let (axis, positive) = y
                .coords()
                .iter()
                .enumerate()
                .find_map(|(j, &c)| {
                    if c == 0 {
                        Some((j, true))
                    } else if c == n - 1 {
                        Some((j, false))
                    } else {
                        None
                    }
                })
                .ok_or_else(|| Error::Precondition(format!("{x:?} is not in S")))?;
            out.insert(
                x.clone(),
                Fiber {
                    base: x.clone(),
                    axis,
                    positive,
                    length: self.geom.side(),
                },
            );
        }
        Ok(out)
    }
}
