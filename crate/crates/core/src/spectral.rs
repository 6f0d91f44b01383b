//! Dense eigendecomposition of the discrete Dirichlet Laplacian and the
//! functional calculus `g(A) f = sum_k g(lambda_k) <f, v_k> v_k` built on it.

use std::ops::Range;
use std::sync::Arc;

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};
use crate::grid::{Field, GridDomain, Scalar, SymOperator};

/// Orthonormality tolerance on `<v_i, v_j>`.
pub const ORTHO_TOL: f64 = 1e-10;
/// Residual tolerance, relative to the largest eigenvalue.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Ascending eigenvalues and `L^2(Omega)`-orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    domain: Arc<GridDomain>,
    eigenvalues: Vec<f64>,
    /// Column-major, column `k` holds the cell values of `v_k`.
    vectors: Vec<f64>,
}

/// Diagnostics measured while validating a decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionQuality {
    pub max_orthogonality_error: f64,
    pub max_residual: f64,
}

/// Computes the full spectral decomposition of a symmetric operator.
pub fn decompose(op: &SymOperator) -> Result<SpectralDecomposition> {
    let asym = op.max_asymmetry();
    if asym > 0.0 {
        return Err(Error::NotSymmetric(asym));
    }
    let domain = op.domain().clone();
    let n = domain.n();
    let dense = op.to_dense();
    let mat = Mat::<f64>::from_fn(n, n, |i, j| dense[i * n + j]);
    let evd = mat.self_adjoint_eigen(Side::Lower).map_err(|e| Error::ConvergenceFailure(format!("{e:?}")))?;
    let u = evd.U();
    let s = evd.S().column_vector();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let scale = 1.0 / domain.cell_volume().sqrt();
    let mut eigenvalues = Vec::with_capacity(n);
    let mut vectors = vec![0.0; n * n];
    for (k, &src) in order.iter().enumerate() {
        eigenvalues.push(s[src]);
        let col = &mut vectors[k * n..(k + 1) * n];
        for (i, c) in col.iter_mut().enumerate() {
            *c = u[(i, src)] * scale;
        }
        // fix the sign: largest entry positive (first one on ties)
        let mut pivot = 0;
        for i in 1..n {
            if col[i].abs() > col[pivot].abs() * (1.0 + 1e-12) {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            col.iter_mut().for_each(|c| *c = -*c);
        }
    }
    let dec = SpectralDecomposition { domain, eigenvalues, vectors };
    let q = dec.quality(op);
    let lambda_max = dec.lambda_max();
    if !(q.max_residual <= RESIDUAL_TOL * lambda_max) {
        return Err(Error::ConvergenceFailure(format!(
            "residual {:e} exceeds {:e}",
            q.max_residual,
            RESIDUAL_TOL * lambda_max
        )));
    }
    if !(q.max_orthogonality_error <= ORTHO_TOL) {
        return Err(Error::ConvergenceFailure(format!("orthonormality error {:e}", q.max_orthogonality_error)));
    }
    if !(dec.eigenvalues[0] > 0.0) {
        return Err(Error::ConvergenceFailure(format!("smallest eigenvalue {} is not positive", dec.eigenvalues[0])));
    }
    Ok(dec)
}

impl SpectralDecomposition {
    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[self.n() - 1]
    }

    /// Cell values of `v_k`.
    pub fn vector(&self, k: usize) -> &[f64] {
        let n = self.n();
        &self.vectors[k * n..(k + 1) * n]
    }

    pub fn eigenvector(&self, k: usize) -> Field {
        Field::new(self.domain.clone(), self.vector(k).to_vec()).expect("length matches domain")
    }

    /// Measures orthonormality and residuals against `op`.
    pub fn quality(&self, op: &SymOperator) -> DecompositionQuality {
        let n = self.n();
        let w = self.domain.cell_volume();
        let v = Mat::<f64>::from_fn(n, n, |i, k| self.vectors[k * n + i]);
        let gram = v.transpose() * &v;
        let mut ortho: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                ortho = ortho.max((gram[(i, j)] * w - target).abs());
            }
        }
        let mut resid: f64 = 0.0;
        for k in 0..n {
            let av = op.matvec(self.vector(k));
            let lam = self.eigenvalues[k];
            let r2: f64 = av.iter().zip(self.vector(k)).map(|(a, x)| (a - lam * x).powi(2)).sum();
            resid = resid.max((w * r2).sqrt());
        }
        DecompositionQuality { max_orthogonality_error: ortho, max_residual: resid }
    }

    fn check_field<S: Scalar>(&self, f: &Field<S>) -> Result<()> {
        if Arc::ptr_eq(&self.domain, f.domain()) || *self.domain == **f.domain() {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }

    /// Eigen-coefficients `<f, v_k>` (the eigenvectors are real).
    pub fn coefficients<S: Scalar>(&self, f: &Field<S>) -> Result<Vec<S>> {
        self.check_field(f)?;
        Ok(self.coefficients_of(f.values()))
    }

    pub(crate) fn coefficients_of<S: Scalar>(&self, values: &[S]) -> Vec<S> {
        let w = self.domain.cell_volume();
        (0..self.n())
            .map(|k| self.vector(k).iter().zip(values).fold(S::zero(), |acc, (&v, &x)| acc + x * v) * w)
            .collect()
    }

    /// `sum_k c_k v_k`.
    pub fn synthesize<S: Scalar>(&self, coeffs: &[S]) -> Field<S> {
        let values = self.synthesize_weighted(coeffs, 0..self.n(), |_| 1.0);
        Field::new(self.domain.clone(), values).expect("length matches domain")
    }

    /// `sum_{k in range} weight(k) c_k v_k`, skipping zero terms.
    pub(crate) fn synthesize_weighted<S: Scalar>(
        &self,
        coeffs: &[S],
        range: Range<usize>,
        weight: impl Fn(usize) -> f64,
    ) -> Vec<S> {
        let n = self.n();
        let mut out = vec![S::zero(); n];
        for k in range {
            let c = coeffs[k];
            if c == S::zero() {
                continue;
            }
            let w = weight(k);
            if w == 0.0 {
                continue;
            }
            let a = c * w;
            for (o, &v) in out.iter_mut().zip(self.vector(k)) {
                *o = *o + a * v;
            }
        }
        out
    }

    /// Cell values of `sum_k coeffs[k - range.start, c] v_k` for every column
    /// `c`, as an `n x cols` matrix.
    pub(crate) fn synthesize_columns(&self, range: Range<usize>, coeffs: MatRef<'_, f64>) -> Mat<f64> {
        let n = self.n();
        let v = MatRef::from_column_major_slice(&self.vectors, n, n).subcols(range.start, range.len());
        v * coeffs
    }

    /// `g(lambda_k)` for every eigenvalue, failing on non-finite values.
    pub fn symbol_values(&self, g: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        self.eigenvalues
            .iter()
            .map(|&lam| {
                let v = g(lam);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFiniteSymbol(lam))
                }
            })
            .collect()
    }

    /// `g(A) f`.
    pub fn apply_function<S: Scalar>(&self, g: impl Fn(f64) -> f64, f: &Field<S>) -> Result<Field<S>> {
        let sym = self.symbol_values(g)?;
        let c = self.coefficients(f)?;
        let values = self.synthesize_weighted(&c, 0..self.n(), |k| sym[k]);
        Field::new(self.domain.clone(), values)
    }

    /// `A^(alpha/2) f`; any real `alpha` is allowed since `lambda_1 > 0`.
    pub fn fractional_power<S: Scalar>(&self, alpha: f64, f: &Field<S>) -> Result<Field<S>> {
        self.apply_function(|lam| lam.powf(alpha / 2.0), f)
    }

    /// `exp(-t A^(alpha/2)) f`.
    pub fn semigroup_apply<S: Scalar>(&self, t: f64, alpha: f64, f: &Field<S>) -> Result<Field<S>> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        if t == 0.0 {
            self.check_field(f)?;
            return Ok(f.clone());
        }
        self.apply_function(|lam| (-t * lam.powf(alpha / 2.0)).exp(), f)
    }

    /// Dense row-major matrix of `g(A)` acting on cell values, built from the
    /// eigenvectors in `range` only (the rest are treated as `g = 0`).
    pub fn function_matrix_in(&self, g: impl Fn(f64) -> f64, range: Range<usize>) -> Result<Vec<f64>> {
        let n = self.n();
        let w = self.domain.cell_volume();
        let sym: Vec<f64> = self.symbol_values(&g)?;
        let ks: Vec<usize> = range.filter(|&k| sym[k] != 0.0).collect();
        if ks.is_empty() {
            return Ok(vec![0.0; n * n]);
        }
        let m = ks.len();
        let v = Mat::<f64>::from_fn(n, m, |i, c| self.vectors[ks[c] * n + i]);
        let vg = Mat::<f64>::from_fn(n, m, |i, c| self.vectors[ks[c] * n + i] * sym[ks[c]] * w);
        let prod = &vg * v.transpose();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = prod[(i, j)];
            }
        }
        Ok(out)
    }

    /// Dense matrix of `g(A)`, exactly symmetrized.
    pub fn function_operator(&self, g: impl Fn(f64) -> f64) -> Result<SymOperator> {
        let m = self.function_matrix_in(g, 0..self.n())?;
        SymOperator::from_dense_symmetrized(self.domain.clone(), m)
    }

    /// Matrix of `exp(-t A^(alpha/2))` acting on cell values. Dividing an
    /// entry by `h^d` gives the discrete heat kernel at `(x_i, x_j)`.
    pub fn kernel_matrix(&self, t: f64, alpha: f64) -> Result<SymOperator> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        self.function_operator(|lam| (-t * lam.powf(alpha / 2.0)).exp())
    }

    /// Indices `k` with `lo <= lambda_k <= hi` as a contiguous range.
    pub fn index_range(&self, lo: f64, hi: f64) -> Range<usize> {
        let start = self.eigenvalues.partition_point(|&l| l < lo);
        let end = self.eigenvalues.partition_point(|&l| l <= hi);
        start..end.max(start)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{assemble_laplacian, build_domain, GridSpec};
    use num_complex::Complex64;

    fn quarter() -> SpectralDecomposition {
        let d = build_domain(GridSpec::interval(0.0, 1.0, 0.25).unwrap()).unwrap();
        decompose(&assemble_laplacian(&d)).unwrap()
    }

    #[test]
    fn quarter_eigenvalues_closed_form() {
        let dec = quarter();
        let expect: Vec<f64> = (1..=3).map(|k| 64.0 * (k as f64 * std::f64::consts::PI / 8.0).sin().powi(2)).collect();
        for (a, b) in dec.eigenvalues().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12 * b, "{a} vs {b}");
        }
        assert!((dec.eigenvalues()[0] - 16.0 * (2.0 - 2f64.sqrt())).abs() < 1e-12);
        assert!((dec.eigenvalues()[1] - 32.0).abs() < 1e-12);
    }

    #[test]
    fn first_eigenvector_is_sampled_sine() {
        let dec = quarter();
        let v = dec.eigenvector(0);
        let s: Vec<f64> = (1..=3).map(|i| (std::f64::consts::PI * i as f64 / 4.0).sin()).collect();
        let ratio = v.values()[0] / s[0];
        for (a, b) in v.values().iter().zip(&s) {
            assert!((a - ratio * b).abs() < 1e-12);
        }
        assert!((v.lp_norm(2.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_cell_domain() {
        let d = build_domain(GridSpec::unit_square(1).unwrap()).unwrap();
        let dec = decompose(&assemble_laplacian(&d)).unwrap();
        assert_eq!(dec.n(), 1);
        assert!((dec.eigenvalues()[0] - 16.0).abs() < 1e-12);
        assert!((dec.vector(0)[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn nonsymmetric_rejected() {
        let d = build_domain(GridSpec::unit_interval(2).unwrap()).unwrap();
        assert!(matches!(SymOperator::from_dense(d, vec![1.0, 2.0, 3.0, 1.0]), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn identity_and_eigenvector_cases() {
        let dec = quarter();
        let f = Field::new(dec.domain().clone(), vec![1.0, -2.0, 0.5]).unwrap();
        let same = dec.apply_function(|_| 1.0, &f).unwrap();
        for (a, b) in same.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let v = dec.eigenvector(1);
        let gv = dec.apply_function(|l| l.ln(), &v).unwrap();
        let lam = dec.eigenvalues()[1];
        for (a, b) in gv.values().iter().zip(v.values()) {
            assert!((a - lam.ln() * b).abs() < 1e-12);
        }
    }

    #[test]
    fn fractional_power_examples() {
        let dec = quarter();
        let v1 = dec.eigenvector(0);
        let r = dec.fractional_power(1.0, &v1).unwrap();
        let expect = (16.0 * (2.0 - 2f64.sqrt())).sqrt();
        assert!((expect - 3.0615).abs() < 1e-4);
        for (a, b) in r.values().iter().zip(v1.values()) {
            assert!((a - expect * b).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_symbol() {
        let dec = quarter();
        let f = dec.eigenvector(0);
        assert!(matches!(
            dec.apply_function(|l| if l > 30.0 { f64::NAN } else { 1.0 }, &f),
            Err(Error::NonFiniteSymbol(_))
        ));
    }

    #[test]
    fn negative_time() {
        let dec = quarter();
        let f = dec.eigenvector(0);
        assert_eq!(dec.semigroup_apply(-1.0, 2.0, &f).unwrap_err(), Error::NegativeTime(-1.0));
        assert!(matches!(dec.kernel_matrix(-1.0, 2.0), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn complex_fields_pass_through() {
        let dec = quarter();
        let vals: Vec<Complex64> = dec.vector(2).iter().map(|&x| Complex64::new(0.0, x)).collect();
        let f = Field::new(dec.domain().clone(), vals).unwrap();
        let g = dec.semigroup_apply(0.01, 2.0, &f).unwrap();
        let factor = (-0.01 * dec.eigenvalues()[2]).exp();
        for (a, b) in g.values().iter().zip(f.values()) {
            assert!((*a - *b * factor).norm() < 1e-12);
        }
    }

    #[test]
    fn kernel_matrix_matches_semigroup() {
        let d = build_domain(GridSpec::unit_interval(9).unwrap()).unwrap();
        let dec = decompose(&assemble_laplacian(&d)).unwrap();
        let k = dec.kernel_matrix(0.01, 2.0).unwrap();
        assert_eq!(k.max_asymmetry(), 0.0);
        let f = Field::from_fn(d.clone(), |x| x[0] * (1.0 - x[0]));
        let a = k.apply(&f).unwrap();
        let b = dec.semigroup_apply(0.01, 2.0, &f).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
