//! Scaled amalgam norms, the weighted-commutator seminorm `A_N`, the
//! `H^s(R)` norm of spectral symbols, and numerical checks of the scaled
//! multiplier bounds built on them.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use faer::{Mat, Side};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde_json::json;

use crate::error::{Error, Result};
use crate::grid::{check_exponent, Field, GridDomain, Scalar};
use crate::partition::{phi0, theta as theta_cut, DyadicPartition};
use crate::report::{exponent, Row};
use crate::spectral::SpectralDecomposition;

/// Cubes `C_theta(k)` of side `sqrt(theta)` centred at `sqrt(theta) k`.
#[derive(Debug, Clone)]
pub struct CubeDecomposition {
    theta: f64,
    dim: usize,
    /// Cube index and member cells, in lexicographic order of `k`.
    cubes: Vec<([i64; 2], Vec<usize>)>,
    membership: Vec<usize>,
}

impl CubeDecomposition {
    /// Every cell joins the cube whose centre is nearest coordinate-wise;
    /// cells on a shared face go to the smaller index.
    pub fn new(domain: &GridDomain, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidParameter(format!("cube scale theta = {theta}")));
        }
        let side = theta.sqrt();
        let dim = domain.dim();
        let mut map: BTreeMap<[i64; 2], Vec<usize>> = BTreeMap::new();
        for i in 0..domain.n() {
            let x = domain.position(i);
            let mut k = [0i64; 2];
            for (a, ka) in k.iter_mut().enumerate().take(dim) {
                *ka = (x[a] / side - 0.5).ceil() as i64;
            }
            map.entry(k).or_default().push(i);
        }
        let cubes: Vec<([i64; 2], Vec<usize>)> = map.into_iter().collect();
        let mut membership = vec![0; domain.n()];
        for (c, (_, cells)) in cubes.iter().enumerate() {
            for &i in cells {
                membership[i] = c;
            }
        }
        Ok(Self { theta, dim, cubes, membership })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn index(&self, c: usize) -> [i64; 2] {
        self.cubes[c].0
    }

    pub fn cells(&self, c: usize) -> &[usize] {
        &self.cubes[c].1
    }

    /// Position in `0..len()` of the cube containing cell `i`.
    pub fn cube_of(&self, i: usize) -> usize {
        self.membership[i]
    }

    pub fn center(&self, c: usize) -> [f64; 2] {
        let side = self.theta.sqrt();
        let k = self.cubes[c].0;
        [side * k[0] as f64, side * k[1] as f64]
    }

    fn distance(&self, c: usize, x: [f64; 2]) -> f64 {
        let z = self.center(c);
        (0..self.dim).map(|a| (x[a] - z[a]).powi(2)).sum::<f64>().sqrt()
    }
}

/// `sum_k ||f||_(L^2(C_theta(k)))`.
pub fn amalgam_norm<S: Scalar>(f: &Field<S>, cubes: &CubeDecomposition) -> f64 {
    amalgam_of(f.values(), f.domain().cell_volume(), cubes)
}

fn amalgam_of<S: Scalar>(values: &[S], w: f64, cubes: &CubeDecomposition) -> f64 {
    let mut mass = vec![0.0; cubes.len()];
    for (i, v) in values.iter().enumerate() {
        mass[cubes.cube_of(i)] += v.modulus().powi(2);
    }
    mass.iter().map(|m| (w * m).sqrt()).sum()
}

/// Largest singular value and the corresponding right singular vector.
fn top_singular(b: &Mat<f64>) -> (f64, Vec<f64>) {
    let cols = b.ncols();
    if cols == 0 || b.nrows() == 0 {
        return (0.0, vec![0.0; cols]);
    }
    let gram = b.transpose() * b;
    let evd = gram.self_adjoint_eigen(Side::Lower).expect("gram matrix is symmetric");
    let s = evd.S().column_vector();
    let top = (0..cols).max_by(|&a, &c| s[a].total_cmp(&s[c])).unwrap_or(0);
    let v = (0..cols).map(|i| evd.U()[(i, top)]).collect();
    (s[top].max(0.0).sqrt(), v)
}

/// A dense matrix acting on cell values, row-major.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    domain: Arc<GridDomain>,
    data: Vec<f64>,
}

impl DenseOperator {
    pub fn new(domain: Arc<GridDomain>, data: Vec<f64>) -> Result<Self> {
        let n = domain.n();
        if data.len() != n * n {
            return Err(Error::LengthMismatch { expected: n * n, got: data.len() });
        }
        Ok(Self { domain, data })
    }

    pub fn identity(domain: Arc<GridDomain>) -> Self {
        let n = domain.n();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { domain, data }
    }

    /// `g(A)` assembled from the spectral decomposition.
    pub fn function_of(dec: &SpectralDecomposition, g: impl Fn(f64) -> f64) -> Result<Self> {
        let data = dec.function_matrix_in(g, 0..dec.n())?;
        Self::new(dec.domain().clone(), data)
    }

    pub fn n(&self) -> usize {
        self.domain.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n() + j]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { domain: self.domain.clone(), data: self.data.iter().map(|x| c * x).collect() }
    }

    /// `L^p -> L^p` norm for `p` in `{1, inf}` (max column / row sum).
    pub fn lp_operator_norm(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        let n = self.n();
        if p == 1.0 {
            Ok((0..n).map(|j| (0..n).map(|i| self.get(i, j).abs()).sum::<f64>()).fold(0.0, f64::max))
        } else if p.is_infinite() {
            Ok((0..n).map(|i| self.data[i * n..(i + 1) * n].iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max))
        } else {
            Err(Error::InvalidParameter(format!("exact operator norm needs p in {{1, inf}}, got {p}")))
        }
    }

    fn block(&self, rows: &[usize], cols: &[usize], row_weight: impl Fn(usize) -> f64) -> Mat<f64> {
        Mat::from_fn(rows.len(), cols.len(), |a, b| row_weight(rows[a]) * self.get(rows[a], cols[b]))
    }
}

/// `sup_k || |x - sqrt(theta) k|^N T chi_(C_theta(k)) ||_(L^2 -> L^2)`.
pub fn script_a_norm(t: &DenseOperator, cubes: &CubeDecomposition, n_pow: u32) -> f64 {
    let all: Vec<usize> = (0..t.n()).collect();
    (0..cubes.len())
        .map(|c| {
            let b = t.block(&all, cubes.cells(c), |i| cubes.distance(c, t.domain.position(i)).powi(n_pow as i32));
            top_singular(&b).0
        })
        .fold(0.0, f64::max)
}

/// Two-sided bracket of the `l^1(L^2)_theta -> l^1(L^2)_theta` norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormBracket {
    pub lower: f64,
    pub upper: f64,
}

/// Upper bound `max_k sum_m ||chi_m T chi_k||_(2->2)`; lower bound from the
/// top right singular vector of `T chi_k` for each `k`.
pub fn amalgam_operator_bracket(t: &DenseOperator, cubes: &CubeDecomposition) -> NormBracket {
    let w = t.domain.cell_volume();
    let n = t.n();
    let all: Vec<usize> = (0..n).collect();
    let mut upper: f64 = 0.0;
    let mut lower: f64 = 0.0;
    for k in 0..cubes.len() {
        let ck = cubes.cells(k);
        let col_sum: f64 = (0..cubes.len()).map(|m| top_singular(&t.block(cubes.cells(m), ck, |_| 1.0)).0).sum();
        upper = upper.max(col_sum);
        let (_, v) = top_singular(&t.block(&all, ck, |_| 1.0));
        let mut f = vec![0.0; n];
        for (&i, &vi) in ck.iter().zip(&v) {
            f[i] = vi;
        }
        let tf: Vec<f64> = (0..n).map(|i| (0..n).map(|j| t.get(i, j) * f[j]).sum()).collect();
        let denom = amalgam_of(&f, w, cubes);
        if denom > 0.0 {
            lower = lower.max(amalgam_of(&tf, w, cubes) / denom);
        }
    }
    NormBracket { lower, upper }
}

/// `max_y ||T e_y||_(l^1(L^2)_theta) / h^d`, the exact `L^1 -> l^1(L^2)_theta`
/// norm.
pub fn l1_to_amalgam_norm(t: &DenseOperator, cubes: &CubeDecomposition) -> f64 {
    let n = t.n();
    let w = t.domain.cell_volume();
    (0..n)
        .map(|y| {
            let col: Vec<f64> = (0..n).map(|i| t.get(i, y)).collect();
            amalgam_of(&col, w, cubes) / w
        })
        .fold(0.0, f64::max)
}

/// Uniform sampling of `[-L, L)` with `m` points for symbol transforms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevGrid {
    pub half_width: f64,
    pub size: usize,
}

impl Default for SobolevGrid {
    fn default() -> Self {
        Self { half_width: 64.0, size: 1 << 14 }
    }
}

impl SobolevGrid {
    pub fn refined(self) -> Self {
        Self { size: 2 * self.size, ..self }
    }
}

/// `(xi_k, |g^(xi_k)|)` with the unitary transform `(2 pi)^(-1/2) int g e^(-i x xi)`.
fn transform_modulus(g: &dyn Fn(f64) -> f64, grid: SobolevGrid) -> Result<Vec<(f64, f64)>> {
    let m = grid.size;
    if !m.is_power_of_two() || m < 4 || !(grid.half_width > 0.0) {
        return Err(Error::InvalidParameter(format!("sobolev grid {grid:?}")));
    }
    let dx = 2.0 * grid.half_width / m as f64;
    let samples: Vec<f64> = (0..m).map(|i| g(-grid.half_width + i as f64 * dx)).collect();
    if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSymbol(*bad));
    }
    let peak = samples.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
    let edge = samples[0].abs().max(samples[m - 1].abs()).max(g(grid.half_width).abs());
    if edge > 1e-12 * peak.max(f64::MIN_POSITIVE) {
        return Err(Error::GridTooSmall(edge));
    }
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let scale = dx / (2.0 * PI).sqrt();
    let dxi = 2.0 * PI / (m as f64 * dx);
    Ok(buf
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let kk = if k < m / 2 { k as f64 } else { k as f64 - m as f64 };
            (kk * dxi, scale * c.norm())
        })
        .collect())
}

fn sobolev_on(g: &dyn Fn(f64) -> f64, s: f64, grid: SobolevGrid) -> Result<f64> {
    let spec = transform_modulus(g, grid)?;
    let dxi = 2.0 * PI / (2.0 * grid.half_width);
    let sum: f64 = spec.iter().map(|&(xi, a)| (1.0 + xi * xi).powf(s) * a * a).sum();
    Ok((sum * dxi).sqrt())
}

fn resolved(coarse: f64, fine: f64, tol: f64) -> Result<f64> {
    let change = (fine - coarse).abs() / fine.abs().max(f64::MIN_POSITIVE);
    if fine != 0.0 && change > tol {
        Err(Error::QuadratureUnresolved(change))
    } else {
        Ok(fine)
    }
}

/// `||(1 + xi^2)^(s/2) g^||_(L^2(R))` by FFT on `grid`, checked against
/// the grid with twice the points; returns the refined value.
pub fn sobolev_norm_1d(g: impl Fn(f64) -> f64, s: f64, grid: SobolevGrid) -> Result<f64> {
    let coarse = sobolev_on(&g, s, grid)?;
    let fine = sobolev_on(&g, s, grid.refined())?;
    resolved(coarse, fine, 1e-6)
}

/// [`sobolev_norm_1d`], doubling the number of samples (up to `2^20`) until
/// the refinement check passes.
pub fn sobolev_norm_adaptive(g: impl Fn(f64) -> f64, s: f64) -> Result<f64> {
    let mut grid = SobolevGrid::default();
    loop {
        match sobolev_norm_1d(&g, s, grid) {
            Err(Error::QuadratureUnresolved(_)) if grid.size < 1 << 20 => grid = grid.refined(),
            other => return other,
        }
    }
}

/// `int (1 + xi^2)^(N/2) |g^(xi)| dxi`, checked under refinement.
pub fn fourier_weighted_l1(g: impl Fn(f64) -> f64, n_pow: u32, grid: SobolevGrid) -> Result<f64> {
    let on = |grid: SobolevGrid| -> Result<f64> {
        let spec = transform_modulus(&g, grid)?;
        let dxi = 2.0 * PI / (2.0 * grid.half_width);
        Ok(spec.iter().map(|&(xi, a)| (1.0 + xi * xi).powf(n_pow as f64 / 2.0) * a).sum::<f64>() * dxi)
    };
    resolved(on(grid)?, on(grid.refined())?, 1e-6)
}

/// `N`, `delta`, `M`, `beta` and the support `[a, b]` of the cut-off.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MultiplierParams {
    pub n: u32,
    pub delta: f64,
    pub m: f64,
    pub beta: f64,
    pub a: f64,
    pub b: f64,
}

impl MultiplierParams {
    /// `N = floor(d/2) + 1`, `delta = 1/2`, `M = 1`, `beta = d/4 + 1/2`,
    /// `[a, b] = [1/2, 2]`.
    pub fn defaults(dim: usize) -> Self {
        Self { n: (dim / 2 + 1) as u32, delta: 0.5, m: 1.0, beta: dim as f64 / 4.0 + 0.5, a: 0.5, b: 2.0 }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let d = dim as f64;
        if !(self.n as f64 > d / 2.0) {
            return Err(Error::InvalidParameter(format!("N = {} must exceed d/2", self.n)));
        }
        if !(self.beta > d / 4.0) {
            return Err(Error::InvalidParameter(format!("beta = {} must exceed d/4", self.beta)));
        }
        if !(self.delta > 0.0 && self.m > 0.0 && 0.0 < self.a && self.a < self.b) {
            return Err(Error::InvalidParameter(format!("{self:?}")));
        }
        Ok(())
    }

    /// Sobolev order `N + 1/2 + delta`.
    pub fn sobolev_order(&self) -> f64 {
        self.n as f64 + 0.5 + self.delta
    }
}

/// Symbol families `G` for the scaled multiplier bound, as functions of
/// `x = sqrt(lambda)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SymbolFamily {
    Identity,
    /// `exp(-t x^alpha)` with fixed `t`.
    Semigroup {
        t: f64,
        alpha: f64,
    },
    /// `exp(-2^(-alpha j) x^alpha)`: the semigroup at the block's own time.
    ScaledSemigroup {
        alpha: f64,
    },
}

impl SymbolFamily {
    pub fn eval(&self, j: i32, x: f64) -> f64 {
        match *self {
            SymbolFamily::Identity => 1.0,
            SymbolFamily::Semigroup { t, alpha } => (-t * x.powf(alpha)).exp(),
            SymbolFamily::ScaledSemigroup { alpha } => (-(2f64.powi(-j) * x).powf(alpha)).exp(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            SymbolFamily::Identity => "identity".into(),
            SymbolFamily::Semigroup { t, alpha } => format!("semigroup(t={t},alpha={alpha})"),
            SymbolFamily::ScaledSemigroup { alpha } => format!("scaled_semigroup(alpha={alpha})"),
        }
    }
}

/// Blocks whose whole spectral support `[4^(j-1), 4^(j+1)]` lies inside
/// `[lambda_1, lambda_n]`.
pub fn interior_blocks(dec: &SpectralDecomposition, part: &DyadicPartition) -> Vec<i32> {
    part.j_range().filter(|&j| 4f64.powi(j - 1) >= dec.lambda_min() && 4f64.powi(j + 1) <= dec.lambda_max()).collect()
}

/// `L^p -> L^p` norm of `g(A)` for `p` in `{1, 2, inf}`; for `p = 2` this is
/// `max_k |g(lambda_k)|`.
pub fn multiplier_norm(dec: &SpectralDecomposition, g: impl Fn(f64) -> f64, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if p == 2.0 {
        return Ok(dec.symbol_values(g)?.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    DenseOperator::function_of(dec, g)?.lp_operator_norm(p)
}

/// One `(j, p)` evaluation of the scaled multiplier bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierSample {
    pub j: i32,
    pub p: f64,
    pub lhs: f64,
    pub h_norm: f64,
    /// `sup_mu |G(2^j sqrt mu) phi0(sqrt mu)|`, the `p = 2` spectral bound.
    pub sup_symbol: f64,
}

impl MultiplierSample {
    pub fn ratio(&self) -> f64 {
        self.lhs / self.h_norm
    }
}

/// `||G(sqrt A) phi0(2^-j sqrt A)||_(p -> p)` against
/// `||G(2^j sqrt .) phi0(sqrt .)||_(H^(N + 1/2 + delta))` for each `(j, p)`.
pub fn multiplier_samples(
    dec: &SpectralDecomposition,
    family: SymbolFamily,
    j_list: &[i32],
    p_list: &[f64],
    prm: &MultiplierParams,
) -> Result<Vec<MultiplierSample>> {
    prm.validate(dec.domain().dim())?;
    let order = prm.sobolev_order();
    let mut out = Vec::new();
    for &j in j_list {
        let scaled = |mu: f64| {
            if mu <= 0.0 {
                0.0
            } else {
                family.eval(j, 2f64.powi(j) * mu.sqrt()) * phi0(mu.sqrt())
            }
        };
        let h_norm = sobolev_norm_adaptive(scaled, order)?;
        let (lo, hi) = (prm.a * prm.a, prm.b * prm.b);
        let mut sup_symbol: f64 =
            (0..=20_000).map(|i| scaled(lo + (hi - lo) * i as f64 / 20_000.0).abs()).fold(0.0, f64::max);
        for &lam in dec.eigenvalues() {
            sup_symbol = sup_symbol.max(scaled(lam * 4f64.powi(-j)).abs());
        }
        let symbol = |lam: f64| family.eval(j, lam.sqrt()) * phi0(2f64.powi(-j) * lam.sqrt());
        let range = dec.index_range(4f64.powi(j - 1), 4f64.powi(j + 1));
        let mut dense: Option<DenseOperator> = None;
        for &p in p_list {
            check_exponent(p)?;
            let lhs = if p == 2.0 {
                multiplier_norm(dec, symbol, 2.0)?
            } else {
                if dense.is_none() {
                    dense =
                        Some(DenseOperator::new(dec.domain().clone(), dec.function_matrix_in(symbol, range.clone())?)?);
                }
                dense.as_ref().expect("just built").lp_operator_norm(p)?
            };
            out.push(MultiplierSample { j, p, lhs, h_norm, sup_symbol });
        }
    }
    Ok(out)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Rows for the scaled multiplier bound: one per `(j, p)` with the ratio,
/// a `max/median <= 10` uniformity row per `p`, and for `p = 2` the check
/// against the spectral bound `sup |symbol|`.
pub fn verify_lemma_2_1(
    dec: &SpectralDecomposition,
    part: &DyadicPartition,
    family: SymbolFamily,
    j_list: &[i32],
    p_list: &[f64],
    prm: &MultiplierParams,
) -> Result<Vec<Row>> {
    let j_list = if j_list.is_empty() { interior_blocks(dec, part) } else { j_list.to_vec() };
    let samples = multiplier_samples(dec, family, &j_list, p_list, prm)?;
    let name = family.name();
    let mut rows = Vec::new();
    for s in &samples {
        let prm_json = json!({"family": name, "j": s.j, "p": exponent(s.p), "a": prm.a, "b": prm.b});
        rows.push(Row::finite("multiplier.ratio", prm_json.clone(), s.ratio()));
        if s.p == 2.0 {
            rows.push(Row::at_most(
                "multiplier.l2_spectral",
                prm_json,
                s.lhs / s.sup_symbol.max(f64::MIN_POSITIVE),
                1.0 + 1e-8,
            ));
        }
    }
    for &p in p_list {
        let mut ratios: Vec<f64> = samples.iter().filter(|s| s.p == p).map(|s| s.ratio()).collect();
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        let med = median(&mut ratios);
        rows.push(Row::at_most(
            "multiplier.uniformity",
            json!({"family": name, "p": exponent(p), "j": j_list}),
            max / med,
            10.0,
        ));
    }
    Ok(rows)
}

/// Largest entrywise gap between the matrices of `G(A) phi(2^(-2j) A)` and
/// `psi((M + 2^(-2j) A)^(-1)) (M + 2^(-2j) A)^(-beta)` with
/// `psi(mu) = G(2^(2j)(1/mu - M)) phi(1/mu - M) mu^(-beta)` and
/// `phi(x) = phi0(sqrt x)`; returns `(deviation, scale)`.
pub fn verify_resolvent_factorization(
    dec: &SpectralDecomposition,
    g: impl Fn(f64) -> f64,
    j: i32,
    prm: &MultiplierParams,
) -> Result<(f64, f64)> {
    let phi = |x: f64| if x <= 0.0 { 0.0 } else { phi0(x.sqrt()) };
    let s = 4f64.powi(-j);
    let (m, beta) = (prm.m, prm.beta);
    let psi = |mu: f64| {
        let x = 1.0 / mu - m;
        g(x / s) * phi(x) * mu.powf(-beta)
    };
    let lhs = dec.function_matrix_in(|lam| g(lam) * phi(s * lam), 0..dec.n())?;
    let rhs = dec.function_matrix_in(
        |lam| {
            let r = m + s * lam;
            psi(1.0 / r) * r.powf(-beta)
        },
        0..dec.n(),
    )?;
    let dev = lhs.iter().zip(&rhs).fold(0.0, |a: f64, (x, y)| a.max((x - y).abs()));
    let scale = lhs.iter().fold(0.0, |a: f64, x| a.max(x.abs()));
    Ok((dev, scale))
}

/// Per-`theta` measurements for the amalgam-space bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmalgamSample {
    pub theta: f64,
    pub bracket: NormBracket,
    pub l2_norm: f64,
    pub script_a: f64,
    pub fourier_l1: f64,
    /// `||(M + theta A)^(-beta)||_(L^1 -> l^1(L^2)_theta)`.
    pub resolvent_l1: f64,
}

pub fn amalgam_samples(
    dec: &SpectralDecomposition,
    thetas: &[f64],
    prm: &MultiplierParams,
    profile: impl Fn(f64) -> f64,
) -> Result<Vec<AmalgamSample>> {
    let dim = dec.domain().dim();
    prm.validate(dim)?;
    let fourier_l1 = fourier_weighted_l1(&profile, prm.n, SobolevGrid::default())?;
    thetas
        .iter()
        .map(|&theta| {
            let cubes = CubeDecomposition::new(dec.domain(), theta)?;
            let symbol = |lam: f64| profile(1.0 / (prm.m + theta * lam));
            let t = DenseOperator::function_of(dec, symbol)?;
            let l2_norm = multiplier_norm(dec, symbol, 2.0)?;
            let r = DenseOperator::function_of(dec, |lam| (prm.m + theta * lam).powf(-prm.beta))?;
            Ok(AmalgamSample {
                theta,
                bracket: amalgam_operator_bracket(&t, &cubes),
                l2_norm,
                script_a: script_a_norm(&t, &cubes, prm.n),
                fourier_l1,
                resolvent_l1: l1_to_amalgam_norm(&r, &cubes),
            })
        })
        .collect()
}

/// Rows for the amalgam bounds with `T = profile((M + theta A)^(-1))`:
/// bracket consistency and ratio to the interpolated right member,
/// `A_N` against `theta^(N/2) int (1+xi^2)^(N/2) |profile^|`, and the
/// `L^1 -> l^1(L^2)_theta` norm of the resolvent power times `theta^(d/2)`
/// with its spread over the sweep.
pub fn verify_lemma_2_2(
    dec: &SpectralDecomposition,
    thetas: &[f64],
    prm: &MultiplierParams,
    profile: impl Fn(f64) -> f64,
) -> Result<Vec<Row>> {
    let d = dec.domain().dim() as f64;
    let samples = amalgam_samples(dec, thetas, prm, profile)?;
    let mut rows = Vec::new();
    let mut scaled = Vec::new();
    for s in &samples {
        let p = json!({"theta": s.theta, "N": prm.n, "M": prm.m, "beta": prm.beta});
        let e = d / (2.0 * prm.n as f64);
        let rhs = s.l2_norm + s.theta.powf(-d / 4.0) * s.script_a.powf(e) * s.l2_norm.powf(1.0 - e);
        rows.push(Row::at_most("amalgam.bracket", p.clone(), s.bracket.lower, s.bracket.upper * (1.0 + 1e-12)));
        rows.push(Row::finite("amalgam.operator_ratio", p.clone(), s.bracket.upper / rhs));
        let a_bound = s.theta.powf(prm.n as f64 / 2.0) * s.fourier_l1;
        rows.push(Row::finite("amalgam.script_a_ratio", p.clone(), s.script_a / a_bound));
        let v = s.resolvent_l1 * s.theta.powf(d / 2.0);
        scaled.push(v);
        rows.push(Row::finite("amalgam.resolvent_l1", p, v));
    }
    if !scaled.is_empty() {
        let max = scaled.iter().cloned().fold(0.0, f64::max);
        let min = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
        rows.push(Row::at_most("amalgam.resolvent_spread", json!({"theta": thetas}), max / min, 10.0));
    }
    Ok(rows)
}

/// `(4 pi t)^(-d/2) exp(-|x - y|^2 / (4t))`.
pub fn gaussian_bound(t: f64, dim: usize, dist2: f64) -> f64 {
    (4.0 * PI * t).powf(-(dim as f64) / 2.0) * (-dist2 / (4.0 * t)).exp()
}

/// Measured properties of `exp(-tA)(x, y)` at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSample {
    pub t: f64,
    pub min_entry: f64,
    /// `max_x K(x, x) (4 pi t)^(d/2)`.
    pub diagonal_ratio: f64,
    /// `max K(x, y) / gaussian_bound` over pairs where the bound is at least
    /// `1e-8` of its peak and `|x - y| <= t/h`; further out the lattice
    /// kernel has Poisson-type rather than Gaussian tails.
    pub offdiag_ratio: f64,
    /// Max relative gap to `e^(-lambda_1 t) v_1(x) v_1(y)`.
    pub ground_state_gap: f64,
}

pub fn kernel_sample(dec: &SpectralDecomposition, t: f64) -> Result<KernelSample> {
    let dom = dec.domain();
    let dim = dom.dim();
    let w = dom.cell_volume();
    let k = dec.kernel_matrix(t, 2.0)?;
    let n = dec.n();
    let peak = (4.0 * PI * t).powf(-(dim as f64) / 2.0);
    let v1 = dec.vector(0);
    let e1 = (-dec.lambda_min() * t).exp();
    let mut s =
        KernelSample { t, min_entry: f64::INFINITY, diagonal_ratio: 0.0, offdiag_ratio: 0.0, ground_state_gap: 0.0 };
    let mut ground_peak: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            ground_peak = ground_peak.max(e1 * (v1[i] * v1[j]).abs());
        }
    }
    for i in 0..n {
        let xi = dom.position(i);
        for j in 0..n {
            let kij = k.get(i, j) / w;
            s.min_entry = s.min_entry.min(kij);
            let xj = dom.position(j);
            let d2 = (xi[0] - xj[0]).powi(2) + (xi[1] - xj[1]).powi(2);
            let bound = gaussian_bound(t, dim, d2);
            if i == j {
                s.diagonal_ratio = s.diagonal_ratio.max(kij / peak);
            }
            if bound >= 1e-8 * peak && d2 <= (t / dom.h()).powi(2) {
                s.offdiag_ratio = s.offdiag_ratio.max(kij / bound);
            }
            s.ground_state_gap = s.ground_state_gap.max((kij - e1 * v1[i] * v1[j]).abs() / ground_peak);
        }
    }
    Ok(s)
}

/// Nonnegativity at every `t`, diagonal and floored off-diagonal Gaussian
/// bounds (slack 4) for `t >= 4 h^2`, and ground-state dominance (1%) once
/// `exp(-(lambda_2 - lambda_1) t) < 1e-3`.
pub fn verify_gaussian_bound(dec: &SpectralDecomposition, t_list: &[f64]) -> Result<Vec<Row>> {
    let h = dec.domain().h();
    let gap = if dec.n() > 1 { dec.eigenvalues()[1] - dec.eigenvalues()[0] } else { f64::INFINITY };
    let mut rows = Vec::new();
    for &t in t_list {
        let s = kernel_sample(dec, t)?;
        let p = json!({"t": t, "t_over_h2": t / (h * h)});
        rows.push(Row::at_least("gaussian.nonnegative", p.clone(), s.min_entry, -1e-12));
        if t >= 4.0 * h * h * (1.0 - 1e-12) {
            rows.push(Row::at_most("gaussian.diagonal", p.clone(), s.diagonal_ratio, 4.0));
            rows.push(Row::at_most("gaussian.offdiagonal", p.clone(), s.offdiag_ratio, 4.0));
        }
        if (-gap * t).exp() < 1e-3 {
            rows.push(Row::at_most("gaussian.ground_state", p, s.ground_state_gap, 0.01));
        }
    }
    Ok(rows)
}

/// `H^(N + 1/2 + delta)` norm of `lambda -> (e^(-t lambda) - 1) psi~(lambda)`,
/// where `psi~(lambda) = theta(sqrt |lambda|)` is the even smooth extension
/// of the low-frequency cut-off to the real line.
pub fn low_frequency_h_norm(t: f64, prm: &MultiplierParams) -> Result<f64> {
    let g = |lam: f64| ((-t * lam).exp() - 1.0) * theta_cut(lam.abs().sqrt());
    sobolev_norm_adaptive(g, prm.sobolev_order())
}
