//! Smooth dyadic partition of unity on `(0, inf)` and the spectral blocks
//! `phi_j(sqrt A)`.
//!
//! `theta` is the `C^inf` step equal to 1 on `[0, 1]` and 0 on `[2, inf)`;
//! `phi_0(x) = theta(x) - theta(2x)` is supported in `[1/2, 2]`, so the dyadic
//! translates telescope to 1. The low-frequency cutoff is `psi(mu) =
//! theta(sqrt mu)`.

use std::ops::RangeInclusive;

use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::grid::{Field, Scalar};
use crate::spectral::SpectralDecomposition;

fn bump_tail(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

/// `0` for `x <= 0`, `1` for `x >= 1`, smooth in between.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let a = bump_tail(x);
    let b = bump_tail(1.0 - x);
    a / (a + b)
}

/// `1` on `[0, 1]`, `0` on `[2, inf)`.
pub fn theta(x: f64) -> f64 {
    smooth_step(2.0 - x)
}

/// The dyadic bump, supported in `[1/2, 2]` with `phi0(1) = 1`.
pub fn phi0(x: f64) -> f64 {
    if x <= 0.5 || x >= 2.0 {
        return 0.0;
    }
    theta(x) - theta(2.0 * x)
}

/// `phi_j(x) = phi0(2^-j x)`.
pub fn phi(j: i32, x: f64) -> f64 {
    phi0(x * 2f64.powi(-j))
}

/// `Phi_j = phi_{j-1} + phi_j + phi_{j+1}`.
pub fn phi_wide(j: i32, x: f64) -> f64 {
    phi(j - 1, x) + phi(j, x) + phi(j + 1, x)
}

/// Low-frequency cutoff as a function of an eigenvalue `mu` of `A`.
pub fn psi(mu: f64) -> f64 {
    theta(mu.max(0.0).sqrt())
}

/// Hex SHA-256 identifying this construction of `phi0`, from a fixed sampling.
pub fn construction_hash() -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"phi0 = theta(x) - theta(2x); theta(x) = s(2 - x); s = e(x)/(e(x)+e(1-x)); e(x) = exp(-1/x)");
    for i in 0..=4096 {
        let x = 0.5 + 1.5 * i as f64 / 4096.0;
        hasher.update(phi0(x).to_le_bytes());
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// The partition restricted to the blocks that can see a given spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicPartition {
    j_min: i32,
    j_max: i32,
}

/// Chooses the active block range for `dec`: all `j` whose support
/// `[2^(j-1), 2^(j+1)]` meets `[sqrt(lambda_1), sqrt(lambda_n)]`, padded by
/// one on each side.
pub fn build_partition(dec: &SpectralDecomposition) -> DyadicPartition {
    DyadicPartition::for_frequencies(dec.lambda_min().sqrt(), dec.lambda_max().sqrt())
}

impl DyadicPartition {
    pub fn for_frequencies(lo: f64, hi: f64) -> Self {
        let j_min = lo.log2().floor() as i32 - 1;
        let j_max = hi.log2().ceil() as i32 + 1;
        Self { j_min, j_max }
    }

    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    pub fn j_range(&self) -> RangeInclusive<i32> {
        self.j_min..=self.j_max
    }

    pub fn len(&self) -> usize {
        (self.j_max - self.j_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, j: i32) -> bool {
        self.j_range().contains(&j)
    }

    /// `phi_j(sqrt lambda)`; zero outside the active range.
    pub fn block_symbol(&self, j: i32, lambda: f64) -> f64 {
        if self.contains(j) {
            phi(j, lambda.sqrt())
        } else {
            0.0
        }
    }

    /// Eigen-index range where `phi_j(sqrt A)` may be nonzero.
    pub fn block_support(&self, dec: &SpectralDecomposition, j: i32) -> std::ops::Range<usize> {
        let lo = 4f64.powi(j - 1);
        let hi = 4f64.powi(j + 1);
        dec.index_range(lo, hi)
    }

    /// `phi_j(sqrt A) f`.
    pub fn phi_block<S: Scalar>(&self, dec: &SpectralDecomposition, j: i32, f: &Field<S>) -> Result<Field<S>> {
        if !self.contains(j) {
            return Ok(Field::zeros(f.domain().clone()));
        }
        let c = dec.coefficients(f)?;
        Ok(self.block_from_coeffs(dec, j, &c, |_| 1.0))
    }

    /// `Phi_j(sqrt A) f`.
    pub fn wide_block<S: Scalar>(&self, dec: &SpectralDecomposition, j: i32, f: &Field<S>) -> Result<Field<S>> {
        dec.apply_function(|lam| phi_wide(j, lam.sqrt()), f)
    }

    /// `psi(A) f`.
    pub fn psi_low<S: Scalar>(&self, dec: &SpectralDecomposition, f: &Field<S>) -> Result<Field<S>> {
        dec.apply_function(psi, f)
    }

    /// Block `j` of the field with eigen-coefficients `c`, each coefficient
    /// further multiplied by `extra(k)`.
    pub(crate) fn block_from_coeffs<S: Scalar>(
        &self,
        dec: &SpectralDecomposition,
        j: i32,
        c: &[S],
        extra: impl Fn(usize) -> f64,
    ) -> Field<S> {
        let ev = dec.eigenvalues();
        let values = if self.contains(j) {
            dec.synthesize_weighted(c, self.block_support(dec, j), |k| phi(j, ev[k].sqrt()) * extra(k))
        } else {
            vec![S::zero(); dec.n()]
        };
        Field::new(dec.domain().clone(), values).expect("length matches domain")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{assemble_laplacian, build_domain, GridSpec};
    use crate::spectral::decompose;

    #[test]
    fn support_is_exact() {
        for i in 0..=200_000 {
            let x = i as f64 * 0.5 / 200_000.0;
            assert_eq!(phi0(x), 0.0);
            assert_eq!(phi0(2.0 + i as f64 * 1e-4), 0.0);
            assert_eq!(phi0(-x), 0.0);
        }
        assert_eq!(phi0(1.0), 1.0);
        assert_eq!(phi0(0.5), 0.0);
        assert_eq!(phi0(2.0), 0.0);
    }

    #[test]
    fn bounded_between_zero_and_one() {
        for i in 0..10_000 {
            let x = 0.5 + 1.5 * i as f64 / 10_000.0;
            let v = phi0(x);
            assert!((0.0..=1.0).contains(&v), "phi0({x}) = {v}");
        }
    }

    #[test]
    fn dyadic_points_hit_one_block() {
        for j0 in -5..8 {
            let lam = 2f64.powi(j0);
            for j in -10..12 {
                let expect = if j == j0 { 1.0 } else { 0.0 };
                assert_eq!(phi(j, lam), expect);
            }
        }
    }

    #[test]
    fn three_times_dyadic_two_blocks() {
        for j0 in -3..6 {
            let lam = 3.0 * 2f64.powi(j0);
            let active: Vec<i32> = (-10..12).filter(|&j| phi(j, lam) != 0.0).collect();
            assert_eq!(active, vec![j0 + 1, j0 + 2]);
            assert!((phi(j0 + 1, lam) + phi(j0 + 2, lam) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn psi_plus_high_blocks_is_one() {
        for i in 0..5000 {
            let lam = i as f64 * 0.01;
            let s: f64 = (1..40).map(|j| phi(j, lam)).sum();
            assert!((psi(lam * lam) + s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(construction_hash(), construction_hash());
        assert_eq!(construction_hash().len(), 64);
    }

    #[test]
    fn quarter_range_covers_zero_to_four() {
        let d = build_domain(GridSpec::interval(0.0, 1.0, 0.25).unwrap()).unwrap();
        let dec = decompose(&assemble_laplacian(&d)).unwrap();
        let part = build_partition(&dec);
        assert!(part.j_min() <= 0 && part.j_max() >= 4, "{part:?}");
        // every eigenvalue is covered and the blocks sum to one
        for &lam in dec.eigenvalues() {
            let s: f64 = part.j_range().map(|j| part.block_symbol(j, lam)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn blocks_outside_range_are_zero() {
        let d = build_domain(GridSpec::unit_interval(7).unwrap()).unwrap();
        let dec = decompose(&assemble_laplacian(&d)).unwrap();
        let part = build_partition(&dec);
        let f = dec.eigenvector(3);
        let z = part.phi_block(&dec, part.j_max() + 3, &f).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn psi_low_keeps_low_and_kills_high() {
        // (0, 4) at h = 1/8: lambda_1 ~ 0.617, lambda_n ~ 255
        let d = build_domain(GridSpec::interval(0.0, 4.0, 0.125).unwrap()).unwrap();
        let dec = decompose(&assemble_laplacian(&d)).unwrap();
        let part = build_partition(&dec);
        let low = dec.eigenvector(0);
        assert!(dec.eigenvalues()[0].sqrt() <= 1.0);
        let out = part.psi_low(&dec, &low).unwrap();
        for (a, b) in out.values().iter().zip(low.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let k = dec.n() - 1;
        assert!(dec.eigenvalues()[k].sqrt() >= 2.0);
        let high = dec.eigenvector(k);
        let out = part.psi_low(&dec, &high).unwrap();
        assert!(out.values().iter().all(|v| v.abs() < 1e-12));
    }
}
