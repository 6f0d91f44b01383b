//! Masked uniform lattices standing in for open sets, the five-point (or
//! three-point) Dirichlet Laplacian on them, and midpoint-rule `L^p` norms.
//!
//! Lattice point `(ix, iy)` sits at `origin + (ix + 1, iy + 1) * h`, so a
//! bounding box of side `L` carries `L / h - 1` candidate points per axis and
//! the box boundary itself is never interior.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

const MULTIPLE_TOL: f64 = 1e-9;

/// Scalars a [`Field`] may carry: real or complex doubles.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + fmt::Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<f64, Output = Self>
    + Mul<Output = Self>
    + 'static
{
    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    fn modulus(self) -> f64;
    fn conj(self) -> Self;
    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn conj(self) -> Self {
        self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Geometry and mask of a lattice domain.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    dim: usize,
    h: f64,
    origin: [f64; 2],
    shape: [usize; 2],
    mask: Vec<bool>,
}

fn points_between(a: f64, b: f64, h: f64) -> Result<usize> {
    if !(b > a) {
        return Err(Error::InvalidGrid(format!("empty interval ({a}, {b})")));
    }
    let cells = (b - a) / h;
    let rounded = cells.round();
    if (cells - rounded).abs() > MULTIPLE_TOL * rounded.max(1.0) {
        return Err(Error::InvalidGrid(format!("side length {} is not a multiple of h = {h}", b - a)));
    }
    if rounded < 2.0 {
        return Err(Error::EmptyDomain);
    }
    Ok(rounded as usize - 1)
}

impl GridSpec {
    /// Builds a spec from raw parts. `shape[1]` must be 1 when `dim == 1`;
    /// the mask is row-major with `x` fastest.
    pub fn new(dim: usize, h: f64, origin: [f64; 2], shape: [usize; 2], mask: Vec<bool>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidGrid(format!("cell width {h} must be positive")));
        }
        if dim == 1 && shape[1] != 1 {
            return Err(Error::InvalidGrid("1-D grids have a single row".into()));
        }
        if shape[0] == 0 || shape[1] == 0 {
            return Err(Error::EmptyDomain);
        }
        if mask.len() != shape[0] * shape[1] {
            return Err(Error::InvalidGrid(format!(
                "mask has {} entries, expected {}",
                mask.len(),
                shape[0] * shape[1]
            )));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::EmptyDomain);
        }
        Ok(Self { dim, h, origin, shape, mask })
    }

    /// The open interval `(a, b)` sampled at spacing `h`.
    pub fn interval(a: f64, b: f64, h: f64) -> Result<Self> {
        let nx = points_between(a, b, h)?;
        Self::new(1, h, [a, 0.0], [nx, 1], vec![true; nx])
    }

    /// `(0, 1)` with `n` interior points, `h = 1 / (n + 1)`.
    pub fn unit_interval(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDomain);
        }
        let h = 1.0 / (n as f64 + 1.0);
        Self::new(1, h, [0.0, 0.0], [n, 1], vec![true; n])
    }

    /// The open rectangle `(x0, x1) x (y0, y1)` at spacing `h`.
    pub fn rectangle(x: (f64, f64), y: (f64, f64), h: f64) -> Result<Self> {
        let nx = points_between(x.0, x.1, h)?;
        let ny = points_between(y.0, y.1, h)?;
        Self::new(2, h, [x.0, y.0], [nx, ny], vec![true; nx * ny])
    }

    /// `(0, 1)^2` with `m x m` interior points.
    pub fn unit_square(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyDomain);
        }
        let h = 1.0 / (m as f64 + 1.0);
        Self::new(2, h, [0.0, 0.0], [m, m], vec![true; m * m])
    }

    /// Keeps the lattice points of a bounding box whose coordinates satisfy
    /// `inside`. Use this to approximate a general open set by a union of
    /// cells.
    pub fn from_predicate<F>(bbox: &[(f64, f64)], h: f64, inside: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> bool,
    {
        match bbox.len() {
            1 => {
                let (a, b) = bbox[0];
                let nx = points_between(a, b, h)?;
                let mask = (0..nx).map(|i| inside(&[a + (i as f64 + 1.0) * h])).collect();
                Self::new(1, h, [a, 0.0], [nx, 1], mask)
            }
            2 => {
                let nx = points_between(bbox[0].0, bbox[0].1, h)?;
                let ny = points_between(bbox[1].0, bbox[1].1, h)?;
                let mut mask = Vec::with_capacity(nx * ny);
                for iy in 0..ny {
                    for ix in 0..nx {
                        let p = [bbox[0].0 + (ix as f64 + 1.0) * h, bbox[1].0 + (iy as f64 + 1.0) * h];
                        mask.push(inside(&p));
                    }
                }
                Self::new(2, h, [bbox[0].0, bbox[1].0], [nx, ny], mask)
            }
            d => Err(Error::InvalidGrid(format!("dimension {d} not in {{1, 2}}"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Per-axis `(low, high)` corners of the bounding box.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|a| {
                let lo = self.origin[a];
                (lo, lo + (self.shape[a] as f64 + 1.0) * self.h)
            })
            .collect()
    }

    /// Parses the ASCII mask format: a header `d h nx [ny]` followed by rows
    /// of `0`/`1`, the first row being `iy = 0`.
    pub fn parse_mask(text: &str) -> Result<Self> {
        text.parse()
    }

    /// Inverse of [`GridSpec::parse_mask`].
    pub fn to_mask_string(&self) -> String {
        let mut out = String::new();
        if self.dim == 1 {
            out.push_str(&format!("1 {} {}\n", self.h, self.shape[0]));
        } else {
            out.push_str(&format!("2 {} {} {}\n", self.h, self.shape[0], self.shape[1]));
        }
        for row in self.mask.chunks(self.shape[0]) {
            out.extend(row.iter().map(|&m| if m { '1' } else { '0' }));
            out.push('\n');
        }
        out
    }
}

impl GridSpec {
    /// The same lattice dilated by `factor` about the coordinate origin:
    /// eigenvalues scale by `factor^-2`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::InvalidGrid(format!("scale factor {factor}")));
        }
        let origin = [self.origin[0] * factor, self.origin[1] * factor];
        Self::new(self.dim, self.h * factor, origin, self.shape, self.mask.clone())
    }

    /// Halves `h`: each axis of `m` points becomes `2m + 1`. A new point is
    /// kept when every old neighbour it sits between is inside the mask
    /// (neighbours past the bounding box count as boundary), so intervals
    /// and rectangles refine exactly.
    pub fn refined(&self) -> Self {
        let [nx, ny] = self.shape;
        let (mx, my) = (2 * nx + 1, if self.dim == 1 { 1 } else { 2 * ny + 1 });
        // old indices a fine index lies on or between; None = boundary
        let parents = |i: usize, n: usize| -> Vec<Option<usize>> {
            if i % 2 == 1 {
                vec![Some(i / 2)]
            } else {
                let hi = i / 2;
                vec![hi.checked_sub(1), (hi < n).then_some(hi)]
            }
        };
        let inside = |ix: usize, iy: usize| self.mask[iy * nx + ix];
        let mut mask = Vec::with_capacity(mx * my);
        for jy in 0..my {
            let py = if self.dim == 1 { vec![Some(0)] } else { parents(jy, ny) };
            for jx in 0..mx {
                let px = parents(jx, nx);
                let mut any = false;
                let mut all = true;
                for a in &px {
                    for b in &py {
                        if let (Some(a), Some(b)) = (a, b) {
                            any = true;
                            all &= inside(*a, *b);
                        }
                    }
                }
                mask.push(any && all);
            }
        }
        Self { dim: self.dim, h: self.h / 2.0, origin: self.origin, shape: [mx, my], mask }
    }
}

fn parse_width(tok: &str) -> Result<f64> {
    let bad = || Error::MaskFormat(format!("bad cell width {tok:?}"));
    match tok.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            Ok(num / den)
        }
        None => tok.parse().map_err(|_| bad()),
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::MaskFormat("missing header".into()))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        let dim: usize = toks
            .first()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::MaskFormat(format!("bad header {header:?}")))?;
        let expected_toks = if dim == 1 { 3 } else { 4 };
        if toks.len() != expected_toks {
            return Err(Error::MaskFormat(format!("header {header:?} needs {expected_toks} fields for d = {dim}")));
        }
        let h = parse_width(toks[1])?;
        let parse_count =
            |t: &str| -> Result<usize> { t.parse().map_err(|_| Error::MaskFormat(format!("bad count {t:?}"))) };
        let nx = parse_count(toks[2])?;
        let ny = if dim == 2 { parse_count(toks[3])? } else { 1 };
        let mut mask = Vec::with_capacity(nx * ny);
        let mut rows = 0;
        for line in lines {
            if line.chars().count() != nx {
                return Err(Error::MaskFormat(format!(
                    "row {rows} has length {}, expected {nx}",
                    line.chars().count()
                )));
            }
            for c in line.chars() {
                match c {
                    '0' => mask.push(false),
                    '1' => mask.push(true),
                    other => return Err(Error::MaskFormat(format!("unexpected character {other:?}"))),
                }
            }
            rows += 1;
        }
        if rows != ny {
            return Err(Error::MaskFormat(format!("found {rows} rows, expected {ny}")));
        }
        GridSpec::new(dim, h, [0.0, 0.0], [nx, ny], mask)
    }
}

/// A [`GridSpec`] together with the bijection between interior lattice
/// points and `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    spec: GridSpec,
    lattice_of: Vec<usize>,
    index_of: Vec<Option<usize>>,
}

impl GridDomain {
    pub fn new(spec: GridSpec) -> Result<Arc<Self>> {
        build_domain(spec)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Number of interior cells.
    pub fn n(&self) -> usize {
        self.lattice_of.len()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn h(&self) -> f64 {
        self.spec.h
    }

    /// Quadrature weight `h^d` of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spec.h.powi(self.spec.dim as i32)
    }

    /// Lattice coordinates `(ix, iy)` of interior cell `i`.
    pub fn lattice_coords(&self, i: usize) -> [usize; 2] {
        let l = self.lattice_of[i];
        [l % self.spec.shape[0], l / self.spec.shape[0]]
    }

    /// Physical position of interior cell `i` (second entry is 0 in 1-D).
    pub fn position(&self, i: usize) -> [f64; 2] {
        let [ix, iy] = self.lattice_coords(i);
        let h = self.spec.h;
        let y = if self.spec.dim == 2 { self.spec.origin[1] + (iy as f64 + 1.0) * h } else { 0.0 };
        [self.spec.origin[0] + (ix as f64 + 1.0) * h, y]
    }

    /// Interior index of the lattice point `(ix, iy)`, if it is interior.
    pub fn index_at(&self, ix: usize, iy: usize) -> Option<usize> {
        if ix >= self.spec.shape[0] || iy >= self.spec.shape[1] {
            return None;
        }
        self.index_of[iy * self.spec.shape[0] + ix]
    }

    /// Interior cell closest to the centroid of the interior cells.
    pub fn central_cell(&self) -> usize {
        let n = self.n() as f64;
        let (mut cx, mut cy) = (0.0, 0.0);
        for i in 0..self.n() {
            let p = self.position(i);
            cx += p[0] / n;
            cy += p[1] / n;
        }
        (0..self.n())
            .min_by(|&a, &b| {
                let da = dist2(self.position(a), [cx, cy]);
                let db = dist2(self.position(b), [cx, cy]);
                da.total_cmp(&db)
            })
            .unwrap_or(0)
    }

    /// Interior neighbours of cell `i` along the lattice axes.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let [ix, iy] = self.lattice_coords(i);
        let mut out = [None; 4];
        if ix > 0 {
            out[0] = self.index_at(ix - 1, iy);
        }
        out[1] = self.index_at(ix + 1, iy);
        if self.spec.dim == 2 {
            if iy > 0 {
                out[2] = self.index_at(ix, iy - 1);
            }
            out[3] = self.index_at(ix, iy + 1);
        }
        out.into_iter().flatten()
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Indexes the interior cells of `spec` in row-major lattice order.
pub fn build_domain(spec: GridSpec) -> Result<Arc<GridDomain>> {
    let mut lattice_of = Vec::new();
    let mut index_of = vec![None; spec.mask.len()];
    for (l, &inside) in spec.mask.iter().enumerate() {
        if inside {
            index_of[l] = Some(lattice_of.len());
            lattice_of.push(l);
        }
    }
    if lattice_of.is_empty() {
        return Err(Error::EmptyDomain);
    }
    Ok(Arc::new(GridDomain { spec, lattice_of, index_of }))
}

/// A grid function on the interior cells of a domain.
#[derive(Debug, Clone)]
pub struct Field<S: Scalar = f64> {
    domain: Arc<GridDomain>,
    values: Vec<S>,
}

impl<S: Scalar> Field<S> {
    pub fn new(domain: Arc<GridDomain>, values: Vec<S>) -> Result<Self> {
        if values.len() != domain.n() {
            return Err(Error::LengthMismatch { expected: domain.n(), got: values.len() });
        }
        Ok(Self { domain, values })
    }

    pub fn zeros(domain: Arc<GridDomain>) -> Self {
        let values = vec![S::zero(); domain.n()];
        Self { domain, values }
    }

    pub fn from_fn<F: FnMut([f64; 2]) -> S>(domain: Arc<GridDomain>, mut f: F) -> Self {
        let values = (0..domain.n()).map(|i| f(domain.position(i))).collect();
        Self { domain, values }
    }

    /// Unit-mass point source at cell `i`: value `1 / h^d` there.
    pub fn point_source(domain: Arc<GridDomain>, i: usize) -> Self {
        let mut out = Self::zeros(domain);
        out.values[i] = S::from_real(1.0 / out.domain.cell_volume());
        out
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [S] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_domain(&self, other: &Field<S>) -> bool {
        Arc::ptr_eq(&self.domain, &other.domain) || *self.domain == *other.domain
    }

    /// Discrete `L^2` inner product `sum h^d u_i conj(v_i)`.
    pub fn inner(&self, other: &Field<S>) -> Result<S> {
        if !self.same_domain(other) {
            return Err(Error::DomainMismatch);
        }
        let w = self.domain.cell_volume();
        let s = self.values.iter().zip(&other.values).fold(S::zero(), |acc, (&u, &v)| acc + u * v.conj());
        Ok(s * w)
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm(self, p)
    }

    pub fn scaled(&self, c: S) -> Self {
        let values = self.values.iter().map(|&v| v * c).collect();
        Self { domain: self.domain.clone(), values }
    }

    pub fn add(&self, other: &Field<S>) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field<S>) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Field<S>, op: impl Fn(S, S) -> S) -> Result<Self> {
        if !self.same_domain(other) {
            return Err(Error::DomainMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| op(a, b)).collect();
        Ok(Self { domain: self.domain.clone(), values })
    }
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

/// Weighted `L^p` norm of raw cell values with cell volume `w`.
pub(crate) fn lp_norm_slice<S: Scalar>(values: &[S], w: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(v.modulus()));
    }
    if p == 1.0 {
        return w * values.iter().map(|v| v.modulus()).sum::<f64>();
    }
    if p == 2.0 {
        return (w * values.iter().map(|v| v.modulus().powi(2)).sum::<f64>()).sqrt();
    }
    // scale by the max to avoid overflow in |f|^p
    let peak = values.iter().fold(0.0, |m: f64, v| m.max(v.modulus()));
    if peak == 0.0 {
        return 0.0;
    }
    let s: f64 = values.iter().map(|v| (v.modulus() / peak).powf(p)).sum();
    peak * (w * s).powf(1.0 / p)
}

/// `(sum h^d |f_i|^p)^(1/p)`, or `max |f_i|` for `p = inf`.
pub fn lp_norm<S: Scalar>(f: &Field<S>, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(lp_norm_slice(&f.values, f.domain.cell_volume(), p))
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    /// Compressed sparse rows: `row_ptr`, `cols`, `vals`.
    Sparse { row_ptr: Vec<usize>, cols: Vec<usize>, vals: Vec<f64> },
    /// Row-major dense matrix.
    Dense(Vec<f64>),
}

/// A real symmetric matrix acting on cell values.
#[derive(Debug, Clone, PartialEq)]
pub struct SymOperator {
    domain: Arc<GridDomain>,
    storage: Storage,
}

impl SymOperator {
    /// Wraps a row-major dense matrix. Fails unless it is exactly symmetric.
    pub fn from_dense(domain: Arc<GridDomain>, data: Vec<f64>) -> Result<Self> {
        let n = domain.n();
        if data.len() != n * n {
            return Err(Error::LengthMismatch { expected: n * n, got: data.len() });
        }
        let op = Self { domain, storage: Storage::Dense(data) };
        let asym = op.max_asymmetry();
        if asym > 0.0 {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(op)
    }

    /// Symmetrizes `(M + M^T) / 2` before wrapping.
    pub fn from_dense_symmetrized(domain: Arc<GridDomain>, mut data: Vec<f64>) -> Result<Self> {
        let n = domain.n();
        if data.len() != n * n {
            return Err(Error::LengthMismatch { expected: n * n, got: data.len() });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let m = 0.5 * (data[i * n + j] + data[j * n + i]);
                data[i * n + j] = m;
                data[j * n + i] = m;
            }
        }
        Ok(Self { domain, storage: Storage::Dense(data) })
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn n(&self) -> usize {
        self.domain.n()
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse { .. })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(d) => d[i * self.n() + j],
            Storage::Sparse { row_ptr, cols, vals } => {
                (row_ptr[i]..row_ptr[i + 1]).find(|&k| cols[k] == j).map_or(0.0, |k| vals[k])
            }
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(x.len(), n, "matvec length mismatch");
        match &self.storage {
            Storage::Dense(d) => d.chunks_exact(n).map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect(),
            Storage::Sparse { row_ptr, cols, vals } => {
                (0..n).map(|i| (row_ptr[i]..row_ptr[i + 1]).map(|k| vals[k] * x[cols[k]]).sum()).collect()
            }
        }
    }

    pub fn apply(&self, f: &Field) -> Result<Field> {
        if !(Arc::ptr_eq(&self.domain, f.domain()) || *self.domain == **f.domain()) {
            return Err(Error::DomainMismatch);
        }
        Field::new(self.domain.clone(), self.matvec(f.values()))
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        match &self.storage {
            Storage::Dense(d) => d.clone(),
            Storage::Sparse { row_ptr, cols, vals } => {
                let n = self.n();
                let mut out = vec![0.0; n * n];
                for i in 0..n {
                    for k in row_ptr[i]..row_ptr[i + 1] {
                        out[i * n + cols[k]] = vals[k];
                    }
                }
                out
            }
        }
    }

    /// `max |M_ij - M_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let n = self.n();
        match &self.storage {
            Storage::Dense(d) => {
                let mut worst: f64 = 0.0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        worst = worst.max((d[i * n + j] - d[j * n + i]).abs());
                    }
                }
                worst
            }
            Storage::Sparse { row_ptr, cols, vals } => {
                let mut worst: f64 = 0.0;
                for i in 0..n {
                    for k in row_ptr[i]..row_ptr[i + 1] {
                        worst = worst.max((vals[k] - self.get(cols[k], i)).abs());
                    }
                }
                worst
            }
        }
    }
}

/// Second-order central stencil with homogeneous Dirichlet data: diagonal
/// `2d / h^2`, `-1 / h^2` for every pair of interior neighbours.
pub fn assemble_laplacian(domain: &Arc<GridDomain>) -> SymOperator {
    let n = domain.n();
    let inv_h2 = 1.0 / (domain.h() * domain.h());
    let diag = 2.0 * domain.dim() as f64 * inv_h2;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for i in 0..n {
        let mut entries: Vec<(usize, f64)> = domain.neighbors(i).map(|j| (j, -inv_h2)).collect();
        entries.push((i, diag));
        entries.sort_by_key(|e| e.0);
        for (j, v) in entries {
            cols.push(j);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    SymOperator { domain: domain.clone(), storage: Storage::Sparse { row_ptr, cols, vals } }
}
