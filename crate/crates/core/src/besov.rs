//! Homogeneous and inhomogeneous Besov norms built from spectral blocks,
//! together with the embedding, lifting and duality checks.

use faer::Mat;

use crate::error::{Error, Result};
use crate::grid::{check_exponent, lp_norm_slice, Field, Scalar};
use crate::partition::{phi, phi_wide, psi, DyadicPartition};
use crate::spectral::SpectralDecomposition;

/// `(s, p, q)` and the homogeneous/inhomogeneous flag.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BesovParams {
    pub s: f64,
    #[serde(with = "crate::exponent")]
    pub p: f64,
    #[serde(with = "crate::exponent")]
    pub q: f64,
    #[serde(default = "yes")]
    pub homogeneous: bool,
}

fn yes() -> bool {
    true
}

impl BesovParams {
    pub fn homogeneous(s: f64, p: f64, q: f64) -> Self {
        Self { s, p, q, homogeneous: true }
    }

    pub fn inhomogeneous(s: f64, p: f64, q: f64) -> Self {
        Self { s, p, q, homogeneous: false }
    }

    pub fn validate(&self) -> Result<()> {
        check_exponent(self.p)?;
        check_exponent(self.q)?;
        if !self.s.is_finite() {
            return Err(Error::InvalidParameter(format!("regularity s = {}", self.s)));
        }
        Ok(())
    }

    pub fn with_s(self, s: f64) -> Self {
        Self { s, ..self }
    }
}

/// `l^q` norm of a nonnegative sequence (`max` for `q = inf`).
pub fn lq_aggregate(values: impl IntoIterator<Item = f64>, q: f64) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    let peak = v.iter().fold(0.0, |m: f64, &x| m.max(x));
    if q.is_infinite() || peak == 0.0 {
        return peak;
    }
    let s: f64 = v.iter().map(|&x| (x / peak).powf(q)).sum();
    peak * s.powf(1.0 / q)
}

/// `L^p` norms of the spectral pieces of one field.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockNorms {
    /// `||psi(A) f||_p`, present for the inhomogeneous decomposition.
    pub low: Option<f64>,
    /// `(j, ||phi_j(sqrt A) f||_p)` in increasing `j`.
    pub blocks: Vec<(i32, f64)>,
}

impl BlockNorms {
    /// Weighted `l^q` aggregation, plus the low-frequency term if present.
    pub fn besov(&self, s: f64, q: f64) -> f64 {
        let high = lq_aggregate(self.blocks.iter().map(|&(j, n)| 2f64.powf(s * j as f64) * n), q);
        self.low.unwrap_or(0.0) + high
    }
}

/// Block norms of the field with eigen-coefficients `c`, each coefficient
/// first multiplied by `extra(k)`.
pub(crate) fn block_norms_from_coeffs<S: Scalar>(
    dec: &SpectralDecomposition,
    part: &DyadicPartition,
    c: &[S],
    p: f64,
    homogeneous: bool,
    extra: impl Fn(usize) -> f64,
) -> BlockNorms {
    let w = dec.domain().cell_volume();
    let ev = dec.eigenvalues();
    if homogeneous {
        let blocks = part
            .j_range()
            .map(|j| {
                let vals = dec.synthesize_weighted(c, part.block_support(dec, j), |k| phi(j, ev[k].sqrt()) * extra(k));
                (j, lp_norm_slice(&vals, w, p))
            })
            .collect();
        BlockNorms { low: None, blocks }
    } else {
        let low_vals = dec.synthesize_weighted(c, dec.index_range(0.0, 4.0), |k| psi(ev[k]) * extra(k));
        let blocks = (1.max(part.j_min())..=part.j_max())
            .map(|j| {
                let vals = dec.synthesize_weighted(c, part.block_support(dec, j), |k| phi(j, ev[k].sqrt()) * extra(k));
                (j, lp_norm_slice(&vals, w, p))
            })
            .collect();
        BlockNorms { low: Some(lp_norm_slice(&low_vals, w, p)), blocks }
    }
}

pub fn block_norms<S: Scalar>(
    dec: &SpectralDecomposition,
    part: &DyadicPartition,
    f: &Field<S>,
    p: f64,
    homogeneous: bool,
) -> Result<BlockNorms> {
    check_exponent(p)?;
    let c = dec.coefficients(f)?;
    Ok(block_norms_from_coeffs(dec, part, &c, p, homogeneous, |_| 1.0))
}

/// The norm measuring a field in a time sweep: plain `L^p` or Besov.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormSpec {
    Lp(#[serde(with = "crate::exponent")] f64),
    Besov(BesovParams),
}

impl NormSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            NormSpec::Lp(p) => check_exponent(*p),
            NormSpec::Besov(b) => b.validate(),
        }
    }
}

/// Norms of the fields whose eigen-coefficients are the columns of `coeffs`
/// (`n x m`), batched through dense products.
pub(crate) fn column_norms(
    dec: &SpectralDecomposition,
    part: &DyadicPartition,
    coeffs: &Mat<f64>,
    spec: &NormSpec,
) -> Vec<f64> {
    let m = coeffs.ncols();
    let w = dec.domain().cell_volume();
    let nonzero = |k: usize| (0..m).any(|c| coeffs[(k, c)] != 0.0);
    let Some(first) = (0..dec.n()).find(|&k| nonzero(k)) else {
        return vec![0.0; m];
    };
    let last = (first..dec.n()).rev().find(|&k| nonzero(k)).unwrap_or(first);
    let live = first..last + 1;
    let ev = dec.eigenvalues();
    // block norms of every column for a symbol restricted to `range`
    let norms_for = |range: std::ops::Range<usize>, sym: &dyn Fn(f64) -> f64, p: f64| -> Vec<f64> {
        let lo = range.start.max(live.start);
        let hi = range.end.min(live.end);
        if lo >= hi {
            return vec![0.0; m];
        }
        let s: Vec<f64> = (lo..hi).map(|k| sym(ev[k])).collect();
        if p == 2.0 {
            // Parseval: the eigenvectors are L^2-orthonormal
            return (0..m)
                .map(|c| (lo..hi).zip(&s).map(|(k, sk)| (coeffs[(k, c)] * sk).powi(2)).sum::<f64>().sqrt())
                .collect();
        }
        let wts = Mat::from_fn(hi - lo, m, |r, c| coeffs[(lo + r, c)] * s[r]);
        let vals = dec.synthesize_columns(lo..hi, wts.as_ref());
        (0..m).map(|c| lp_norm_slice(vals.col_as_slice(c), w, p)).collect()
    };
    match *spec {
        NormSpec::Lp(p) => norms_for(0..dec.n(), &|_| 1.0, p),
        NormSpec::Besov(b) => {
            let js: Vec<i32> =
                if b.homogeneous { part.j_range().collect() } else { (1.max(part.j_min())..=part.j_max()).collect() };
            let blocks: Vec<Vec<f64>> =
                js.iter().map(|&j| norms_for(part.block_support(dec, j), &|l: f64| phi(j, l.sqrt()), b.p)).collect();
            let low = (!b.homogeneous).then(|| norms_for(dec.index_range(0.0, 4.0), &psi, b.p));
            (0..m)
                .map(|c| {
                    let high =
                        lq_aggregate(js.iter().zip(&blocks).map(|(&j, v)| 2f64.powf(b.s * j as f64) * v[c]), b.q);
                    high + low.as_ref().map_or(0.0, |l| l[c])
                })
                .collect()
        }
    }
}

/// Norm of a single coefficient vector under `spec`.
pub fn spec_norm_coeffs(dec: &SpectralDecomposition, part: &DyadicPartition, c: &[f64], spec: &NormSpec) -> f64 {
    match *spec {
        NormSpec::Lp(p) => {
            lp_norm_slice(&dec.synthesize_weighted(c, 0..dec.n(), |_| 1.0), dec.domain().cell_volume(), p)
        }
        NormSpec::Besov(b) => besov_norm_coeffs(dec, part, c, &b),
    }
}

/// `|| { 2^(sj) ||phi_j(sqrt A) f||_p }_j ||_(l^q)`, plus `||psi(A) f||_p`
/// (and only `j >= 1`) in the inhomogeneous case.
pub fn besov_norm<S: Scalar>(
    dec: &SpectralDecomposition,
    part: &DyadicPartition,
    f: &Field<S>,
    prm: &BesovParams,
) -> Result<f64> {
    prm.validate()?;
    let c = dec.coefficients(f)?;
    Ok(besov_norm_coeffs(dec, part, &c, prm))
}

pub(crate) fn besov_norm_coeffs<S: Scalar>(
    dec: &SpectralDecomposition,
    part: &DyadicPartition,
    c: &[S],
    prm: &BesovParams,
) -> f64 {
    block_norms_from_coeffs(dec, part, c, prm.p, prm.homogeneous, |_| 1.0).besov(prm.s, prm.q)
}

/// `||f||_(B^s_(p,q)) / ||f||_(B^(s + d(1/r - 1/p))_(r,q))` for `r <= p`.
pub fn check_embedding<S: Scalar>(
    dec: &SpectralDecomposition,
    part: &DyadicPartition,
    f: &Field<S>,
    r: f64,
    p: f64,
    s: f64,
    q: f64,
) -> Result<f64> {
    if r > p {
        return Err(Error::InvalidParameter(format!("embedding needs r <= p, got r = {r}, p = {p}")));
    }
    let d = dec.domain().dim() as f64;
    let target = besov_norm(dec, part, f, &BesovParams::homogeneous(s, p, q))?;
    let source = besov_norm(dec, part, f, &BesovParams::homogeneous(s + d * (1.0 / r - 1.0 / p), r, q))?;
    Ok(target / source)
}

/// `||A^(alpha/2) f||_(B^s) / ||f||_(B^(s + alpha))`.
pub fn check_lifting<S: Scalar>(
    dec: &SpectralDecomposition,
    part: &DyadicPartition,
    f: &Field<S>,
    alpha: f64,
    prm: &BesovParams,
) -> Result<f64> {
    if !prm.homogeneous {
        return Err(Error::InvalidParameter("lifting uses homogeneous norms".into()));
    }
    prm.validate()?;
    let c = dec.coefficients(f)?;
    let ev = dec.eigenvalues();
    let lifted = block_norms_from_coeffs(dec, part, &c, prm.p, true, |k| ev[k].powf(alpha / 2.0)).besov(prm.s, prm.q);
    let base = besov_norm_coeffs(dec, part, &c, &prm.with_s(prm.s + alpha));
    Ok(lifted / base)
}

/// `sum_j <phi_j(sqrt A) f, Phi_j(sqrt A) g>` with the discrete inner product.
pub fn duality_pairing<S: Scalar>(
    dec: &SpectralDecomposition,
    part: &DyadicPartition,
    f: &Field<S>,
    g: &Field<S>,
) -> Result<S> {
    if !f.same_domain(g) {
        return Err(Error::DomainMismatch);
    }
    let cf = dec.coefficients(f)?;
    let cg = dec.coefficients(g)?;
    let ev = dec.eigenvalues();
    let mut total = S::zero();
    for j in part.j_range() {
        let fj = part.block_from_coeffs(dec, j, &cf, |_| 1.0);
        let wide = dec.synthesize_weighted(&cg, 0..dec.n(), |k| phi_wide(j, ev[k].sqrt()));
        let gj = Field::new(dec.domain().clone(), wide)?;
        total = total + fj.inner(&gj)?;
    }
    Ok(total)
}

/// Inhomogeneous pairing `<psi f, Psi g> + sum_(j>=1) <phi_j f, Phi_j g>` with
/// `Psi = psi + phi_1` and `Phi_1 = psi + phi_1 + phi_2`.
pub fn duality_pairing_inhomogeneous<S: Scalar>(
    dec: &SpectralDecomposition,
    part: &DyadicPartition,
    f: &Field<S>,
    g: &Field<S>,
) -> Result<S> {
    if !f.same_domain(g) {
        return Err(Error::DomainMismatch);
    }
    let cf = dec.coefficients(f)?;
    let cg = dec.coefficients(g)?;
    let ev = dec.eigenvalues();
    let all = 0..dec.n();
    let synth = |c: &[S], sym: &dyn Fn(f64) -> f64| -> Result<Field<S>> {
        Field::new(dec.domain().clone(), dec.synthesize_weighted(c, all.clone(), |k| sym(ev[k])))
    };
    let low_f = synth(&cf, &|l| psi(l))?;
    let low_g = synth(&cg, &|l| psi(l) + phi(1, l.sqrt()))?;
    let mut total = low_f.inner(&low_g)?;
    for j in 1.max(part.j_min())..=part.j_max() {
        let fj = synth(&cf, &|l| phi(j, l.sqrt()))?;
        let gj = if j == 1 {
            synth(&cg, &|l| psi(l) + phi(1, l.sqrt()) + phi(2, l.sqrt()))?
        } else {
            synth(&cg, &|l| phi_wide(j, l.sqrt()))?
        };
        total = total + fj.inner(&gj)?;
    }
    Ok(total)
}

/// `sum_j phi_j(mu) Phi_j(mu)` over the active range; equals 1 on the spectrum.
pub fn pairing_symbol(part: &DyadicPartition, mu: f64) -> f64 {
    part.j_range().map(|j| phi(j, mu) * phi_wide(j, mu)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{assemble_laplacian, build_domain, GridSpec};
    use crate::partition::build_partition;
    use crate::spectral::decompose;

    fn setup(n: usize) -> (SpectralDecomposition, DyadicPartition) {
        let d = build_domain(GridSpec::unit_interval(n).unwrap()).unwrap();
        let dec = decompose(&assemble_laplacian(&d)).unwrap();
        let part = build_partition(&dec);
        (dec, part)
    }

    #[test]
    fn lq_aggregate_cases() {
        assert_eq!(lq_aggregate([3.0, 4.0], f64::INFINITY), 4.0);
        assert!((lq_aggregate([3.0, 4.0], 2.0) - 5.0).abs() < 1e-14);
        assert_eq!(lq_aggregate([0.0, 0.0], 1.0), 0.0);
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let (dec, part) = setup(31);
        let z: Field = Field::zeros(dec.domain().clone());
        assert_eq!(besov_norm(&dec, &part, &z, &BesovParams::homogeneous(0.5, 2.0, 2.0)).unwrap(), 0.0);
    }

    #[test]
    fn s_zero_q_inf_is_max_block() {
        let (dec, part) = setup(31);
        let f = Field::from_fn(dec.domain().clone(), |x| (x[0] * 7.0).sin() + x[0]);
        let norm = besov_norm(&dec, &part, &f, &BesovParams::homogeneous(0.0, 3.0, f64::INFINITY)).unwrap();
        let max =
            part.j_range().map(|j| part.phi_block(&dec, j, &f).unwrap().lp_norm(3.0).unwrap()).fold(0.0, f64::max);
        assert!((norm - max).abs() < 1e-12 * max);
    }

    #[test]
    fn invalid_exponents() {
        let (dec, part) = setup(7);
        let f = dec.eigenvector(0);
        assert!(matches!(
            besov_norm(&dec, &part, &f, &BesovParams::homogeneous(0.0, 0.5, 1.0)),
            Err(Error::InvalidExponent(_))
        ));
        assert!(matches!(
            besov_norm(&dec, &part, &f, &BesovParams::homogeneous(0.0, 1.0, 0.0)),
            Err(Error::InvalidExponent(_))
        ));
    }

    #[test]
    fn embedding_identical_norms_at_r_equal_p() {
        let (dec, part) = setup(31);
        let f = Field::from_fn(dec.domain().clone(), |x| x[0].powi(2) * (1.0 - x[0]));
        let r = check_embedding(&dec, &part, &f, 2.0, 2.0, 0.3, 2.0).unwrap();
        assert!((r - 1.0).abs() < 1e-14);
        assert!(check_embedding(&dec, &part, &f, 3.0, 2.0, 0.3, 2.0).is_err());
    }

    #[test]
    fn lifting_alpha_zero_is_identity() {
        let (dec, part) = setup(31);
        let f = Field::from_fn(dec.domain().clone(), |x| (x[0] * 13.0).cos());
        let r = check_lifting(&dec, &part, &f, 0.0, &BesovParams::homogeneous(0.5, 1.0, 2.0)).unwrap();
        assert!((r - 1.0).abs() < 1e-13);
    }

    #[test]
    fn pairing_of_orthogonal_modes_vanishes() {
        let (dec, part) = setup(31);
        let a = dec.eigenvector(3);
        let b = dec.eigenvector(8);
        assert!(duality_pairing(&dec, &part, &a, &b).unwrap().abs() < 1e-12);
        let same = duality_pairing(&dec, &part, &a, &a).unwrap();
        assert!((same - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pairing_symbol_is_one_on_spectrum() {
        let (dec, part) = setup(63);
        for &lam in dec.eigenvalues() {
            assert!((pairing_symbol(&part, lam.sqrt()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inhomogeneous_pairing_matches_l2() {
        let d = build_domain(GridSpec::interval(0.0, 4.0, 0.125).unwrap()).unwrap();
        let dec = decompose(&assemble_laplacian(&d)).unwrap();
        let part = build_partition(&dec);
        let f = Field::from_fn(d.clone(), |x| x[0].sin() * (4.0 - x[0]));
        let g = Field::from_fn(d, |x| (3.0 * x[0]).cos());
        let a = duality_pairing_inhomogeneous(&dec, &part, &f, &g).unwrap();
        let b = f.inner(&g).unwrap();
        assert!((a - b).abs() < 1e-10 * b.abs().max(1.0));
    }
}
