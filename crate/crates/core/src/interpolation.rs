//! Peetre K-functional and real interpolation norms for couples of Besov
//! spaces sharing `p`.
//!
//! `K(t, f)` is computed over threshold splittings
//! `f = theta(2^-J sqrt A) f + (1 - theta(2^-J sqrt A)) f` in both
//! orientations; each splitting is a line `A + tB`, so `K` is their lower envelope and the interpolation
//! integral is done piece by piece.

use faer::Mat;
use serde_json::json;

use crate::besov::{besov_norm_coeffs, column_norms, BesovParams, NormSpec};
use crate::ensemble::Probe;
use crate::error::{Error, Result};
use crate::grid::check_exponent;
use crate::partition::{phi, theta, DyadicPartition};
use crate::quadrature::simpson_log;
use crate::report::Row;
use crate::spectral::SpectralDecomposition;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InterpolationCouple {
    #[serde(with = "crate::exponent")]
    pub p: f64,
    pub s0: f64,
    #[serde(with = "crate::exponent")]
    pub q0: f64,
    pub s1: f64,
    #[serde(with = "crate::exponent")]
    pub q1: f64,
    /// Interpolation parameter in `(0, 1)`.
    pub theta: f64,
    #[serde(with = "crate::exponent")]
    pub q: f64,
    #[serde(default = "yes")]
    pub homogeneous: bool,
}

fn yes() -> bool {
    true
}

impl InterpolationCouple {
    pub fn new(p: f64, (s0, q0): (f64, f64), (s1, q1): (f64, f64), theta: f64, q: f64) -> Result<Self> {
        let c = Self { p, s0, q0, s1, q1, theta, q, homogeneous: true };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for e in [self.p, self.q0, self.q1, self.q] {
            check_exponent(e)?;
        }
        if self.s0 == self.s1 {
            return Err(Error::InvalidParameter("interpolation couple needs s0 != s1".into()));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidParameter(format!("theta = {} not in (0, 1)", self.theta)));
        }
        Ok(())
    }

    pub fn inhomogeneous(self) -> Self {
        Self { homogeneous: false, ..self }
    }

    pub fn x0(&self) -> BesovParams {
        BesovParams { s: self.s0, p: self.p, q: self.q0, homogeneous: self.homogeneous }
    }

    pub fn x1(&self) -> BesovParams {
        BesovParams { s: self.s1, p: self.p, q: self.q1, homogeneous: self.homogeneous }
    }

    /// `B^s_(p,q)` with `s = (1 - theta) s0 + theta s1`.
    pub fn target(&self) -> BesovParams {
        let s = (1.0 - self.theta) * self.s0 + self.theta * self.s1;
        BesovParams { s, p: self.p, q: self.q, homogeneous: self.homogeneous }
    }

    /// `(q theta (1 - theta))^(-1/q)`, the ratio for a field living in one
    /// block (1 for `q = inf`).
    pub fn single_block_constant(&self) -> f64 {
        if self.q.is_infinite() {
            1.0
        } else {
            (self.q * self.theta * (1.0 - self.theta)).powf(-1.0 / self.q)
        }
    }
}

/// A splitting `f = a0 + a1` seen through `K`: `||a0||_0 + t ||a1||_1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub a: f64,
    pub b: f64,
}

impl Line {
    pub fn at(&self, t: f64) -> f64 {
        self.a + t * self.b
    }
}

/// Norms of every threshold splitting, `J` over the partition range plus
/// `-inf` (nothing in the low part) and `+inf` (everything).
pub fn threshold_lines(
    dec: &SpectralDecomposition,
    part: &DyadicPartition,
    c: &[f64],
    couple: &InterpolationCouple,
) -> Result<Vec<Line>> {
    couple.validate()?;
    if c.len() != dec.n() {
        return Err(Error::LengthMismatch { expected: dec.n(), got: c.len() });
    }
    let ev = dec.eigenvalues();
    let js: Vec<i32> = part.j_range().collect();
    let cols = js.len() + 2;
    // column 0: J = -inf, last: J = +inf
    let low_weight = |col: usize, k: usize| -> f64 {
        if col == 0 {
            0.0
        } else if col == cols - 1 {
            1.0
        } else {
            theta(2f64.powi(-js[col - 1]) * ev[k].sqrt())
        }
    };
    let low = Mat::from_fn(dec.n(), cols, |k, col| c[k] * low_weight(col, k));
    let high = Mat::from_fn(dec.n(), cols, |k, col| c[k] * (1.0 - low_weight(col, k)));
    let (x0, x1) = (NormSpec::Besov(couple.x0()), NormSpec::Besov(couple.x1()));
    let (l0, l1) = (column_norms(dec, part, &low, &x0), column_norms(dec, part, &low, &x1));
    let (h0, h1) = (column_norms(dec, part, &high, &x0), column_norms(dec, part, &high, &x1));
    let mut lines = Vec::with_capacity(2 * cols);
    for i in 0..cols {
        lines.push(Line { a: l0[i], b: h1[i] });
        lines.push(Line { a: h0[i], b: l1[i] });
    }
    Ok(lines)
}

/// Lower envelope of lines on `t > 0` as `(breakpoints, pieces)`: piece `i`
/// is active between `breaks[i - 1]` and `breaks[i]` (open ends at `0` and
/// `inf`), so `pieces.len() == breaks.len() + 1`.
pub fn lower_envelope(lines: &[Line]) -> (Vec<f64>, Vec<Line>) {
    if lines.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let mut cuts: Vec<f64> = Vec::new();
    for (i, x) in lines.iter().enumerate() {
        for y in &lines[i + 1..] {
            if x.b != y.b {
                let t = (y.a - x.a) / (x.b - y.b);
                if t > 0.0 && t.is_finite() {
                    cuts.push(t);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let argmin =
        |t: f64| *lines.iter().min_by(|x, y| x.at(t).total_cmp(&y.at(t)).then(x.b.total_cmp(&y.b))).expect("nonempty");
    // one probe inside each interval between consecutive cuts
    let probe = |i: usize| -> f64 {
        match (i.checked_sub(1).map(|k| cuts[k]), cuts.get(i)) {
            (None, Some(&b)) => b / 2.0,
            (Some(a), Some(&b)) => (a * b).sqrt(),
            (Some(a), None) => a * 2.0,
            (None, None) => 1.0,
        }
    };
    let mut pieces = vec![argmin(probe(0))];
    let mut breaks = Vec::new();
    for i in 1..=cuts.len() {
        let l = argmin(probe(i));
        if l != *pieces.last().expect("nonempty") {
            breaks.push(cuts[i - 1]);
            pieces.push(l);
        }
    }
    (breaks, pieces)
}

/// `K(t, f)` over threshold splittings.
pub fn k_functional(
    dec: &SpectralDecomposition,
    part: &DyadicPartition,
    c: &[f64],
    t: f64,
    couple: &InterpolationCouple,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("K needs t > 0, got {t}")));
    }
    let lines = threshold_lines(dec, part, c, couple)?;
    Ok(lines.iter().map(|l| l.at(t)).fold(f64::INFINITY, f64::min))
}

/// `K` at every `t` in `ts`, from one set of lines.
pub fn k_profile(
    dec: &SpectralDecomposition,
    part: &DyadicPartition,
    c: &[f64],
    ts: &[f64],
    couple: &InterpolationCouple,
) -> Result<Vec<f64>> {
    let lines = threshold_lines(dec, part, c, couple)?;
    Ok(ts.iter().map(|&t| lines.iter().map(|l| l.at(t)).fold(f64::INFINITY, f64::min)).collect())
}

/// `int_0^inf (t^-theta K(t))^q dt/t` from the envelope: Simpson in `log t`
/// on each piece, closed forms on the two unbounded pieces.
fn envelope_integral(breaks: &[f64], pieces: &[Line], theta: f64, q: f64, panels: usize) -> f64 {
    let f = |l: Line| move |t: f64| (t.powf(-theta) * l.at(t)).powf(q);
    let first = pieces[0];
    let last = pieces[pieces.len() - 1];
    if breaks.is_empty() {
        // a single line through the origin and flat: only possible for f = 0
        return if first.a == 0.0 && first.b == 0.0 { 0.0 } else { f64::INFINITY };
    }
    if first.a != 0.0 || last.b != 0.0 {
        return f64::INFINITY;
    }
    let (ta, tb) = (breaks[0], breaks[breaks.len() - 1]);
    let mut total = first.b.powf(q) * ta.powf((1.0 - theta) * q) / ((1.0 - theta) * q);
    total += last.a.powf(q) * tb.powf(-theta * q) / (theta * q);
    for (i, w) in breaks.windows(2).enumerate() {
        total += simpson_log(f(pieces[i + 1]), w[0], w[1], panels);
    }
    total
}

/// `{ int_0^inf (t^-theta K(t, f))^q dt/t }^(1/q)`, or `sup_t t^-theta K`
/// for `q = inf`. The Simpson rule is doubled once and must agree to `1e-4`.
pub fn interpolation_norm(
    dec: &SpectralDecomposition,
    part: &DyadicPartition,
    c: &[f64],
    couple: &InterpolationCouple,
) -> Result<f64> {
    let lines = threshold_lines(dec, part, c, couple)?;
    norm_from_lines(&lines, couple)
}

pub fn norm_from_lines(lines: &[Line], couple: &InterpolationCouple) -> Result<f64> {
    let (breaks, pieces) = lower_envelope(lines);
    if pieces.is_empty() || pieces.iter().all(|l| l.a == 0.0 && l.b == 0.0) {
        return Ok(0.0);
    }
    let th = couple.theta;
    if couple.q.is_infinite() {
        // t^-theta (A + tB) has no interior maximum, so the sup sits on a
        // breakpoint
        return Ok(breaks.iter().zip(&pieces[1..]).map(|(&t, l)| t.powf(-th) * l.at(t)).fold(0.0, f64::max));
    }
    let coarse = envelope_integral(&breaks, &pieces, th, couple.q, 8);
    let fine = envelope_integral(&breaks, &pieces, th, couple.q, 16);
    if !fine.is_finite() {
        return Err(Error::QuadratureUnresolved(f64::INFINITY));
    }
    let change = (fine - coarse).abs() / fine;
    if change > 1e-4 {
        return Err(Error::QuadratureUnresolved(change));
    }
    Ok(fine.powf(1.0 / couple.q))
}

/// Blocks carrying part of `c`.
pub fn active_blocks(dec: &SpectralDecomposition, part: &DyadicPartition, c: &[f64]) -> Vec<i32> {
    let ev = dec.eigenvalues();
    part.j_range().filter(|&j| part.block_support(dec, j).any(|k| c[k] != 0.0 && phi(j, ev[k].sqrt()) != 0.0)).collect()
}

/// `K(t)` minimised over every assignment of the active blocks to the two
/// endpoints (`a0 = sum_(j in S) phi_j(sqrt A) f`); at most 16 blocks.
pub fn brute_force_k(
    dec: &SpectralDecomposition,
    part: &DyadicPartition,
    c: &[f64],
    ts: &[f64],
    couple: &InterpolationCouple,
) -> Result<Vec<f64>> {
    couple.validate()?;
    let mut blocks = active_blocks(dec, part, c);
    if !couple.homogeneous {
        // the low-frequency remainder psi(A) f counts as one more unit
        blocks.retain(|&j| j >= 1);
    }
    if blocks.len() > 16 {
        return Err(Error::InvalidParameter(format!("{} active blocks; brute force allows 16", blocks.len())));
    }
    let ev = dec.eigenvalues();
    let units = blocks.len() + usize::from(!couple.homogeneous);
    let subsets = 1usize << units;
    let weight = |mask: usize, k: usize| -> f64 {
        let x = ev[k].sqrt();
        let mut w = 0.0;
        for (b, &j) in blocks.iter().enumerate() {
            if mask >> b & 1 == 1 {
                w += phi(j, x);
            }
        }
        if !couple.homogeneous && mask >> blocks.len() & 1 == 1 {
            // everything below the first block kept: 1 - sum_(j >= 1) phi_j
            w += 1.0 - blocks.iter().map(|&j| phi(j, x)).sum::<f64>();
        }
        w
    };
    let a0 = Mat::from_fn(dec.n(), subsets, |k, m| c[k] * weight(m, k));
    let a1 = Mat::from_fn(dec.n(), subsets, |k, m| c[k] - a0[(k, m)]);
    let n0 = column_norms(dec, part, &a0, &NormSpec::Besov(couple.x0()));
    let n1 = column_norms(dec, part, &a1, &NormSpec::Besov(couple.x1()));
    Ok(ts.iter().map(|&t| n0.iter().zip(&n1).map(|(x, y)| x + t * y).fold(f64::INFINITY, f64::min)).collect())
}

/// Ratios `interpolation_norm / ||f||_(B^s_(p,q))` over the probes and
/// their bracket constant `max(max, 1/min)`.
pub fn interpolation_bracket(
    dec: &SpectralDecomposition,
    part: &DyadicPartition,
    probes: &[Probe],
    couple: &InterpolationCouple,
) -> Result<(f64, f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for p in probes {
        let v = interpolation_norm(dec, part, &p.coeffs, couple)?;
        let b = besov_norm_coeffs(dec, part, &p.coeffs, &couple.target());
        if b > 0.0 {
            lo = lo.min(v / b);
            hi = hi.max(v / b);
        }
    }
    Ok((lo, hi, hi.max(1.0 / lo)))
}

/// Bracket row (`C <= 20`), and for `brute` probes the two-sided
/// threshold-to-brute force gap on a log grid of `t` (at most 2).
pub fn verify_interpolation_identity(
    dec: &SpectralDecomposition,
    part: &DyadicPartition,
    probes: &[Probe],
    brute: &[Probe],
    couple: &InterpolationCouple,
) -> Result<Vec<Row>> {
    let (lo, hi, c) = interpolation_bracket(dec, part, probes, couple)?;
    let prm = json!({"couple": couple, "n": dec.n(), "probes": probes.len()});
    let mut rows =
        vec![Row::at_most("interpolation.bracket", prm, c, 20.0).with_note(format!("ratios in [{lo:.4}, {hi:.4}]"))];
    for p in brute {
        let lines = threshold_lines(dec, part, &p.coeffs, couple)?;
        let (breaks, _) = lower_envelope(&lines);
        let (a, b) = match (breaks.first(), breaks.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => continue,
        };
        let ts = crate::quadrature::log_grid(a / 10.0, b * 10.0, 10);
        let thr = k_profile(dec, part, &p.coeffs, &ts, couple)?;
        let bf = brute_force_k(dec, part, &p.coeffs, &ts, couple)?;
        let gap = thr
            .iter()
            .zip(&bf)
            .map(|(x, y)| if *x > 0.0 && *y > 0.0 { (x / y).max(y / x) } else { 1.0 })
            .fold(0.0, f64::max);
        // homogeneous threshold splits are block-subset splits, so brute force
        // can only do better; inhomogeneous ones with J < 0 cut inside the low unit
        let below = !couple.homogeneous || thr.iter().zip(&bf).all(|(x, y)| *y <= x * (1.0 + 1e-12));
        let blocks = active_blocks(dec, part, &p.coeffs).len();
        rows.push(
            Row::at_most(
                "interpolation.threshold_gap",
                json!({"couple": couple, "probe": p.label(), "blocks": blocks}),
                gap,
                2.0,
            )
            .and(below),
        );
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{eigenmode_probes, gaussian_probes};
    use crate::grid::{assemble_laplacian, build_domain, GridSpec};
    use crate::partition::build_partition;
    use crate::quadrature::log_grid;
    use crate::spectral::decompose;
    use approx::assert_relative_eq;

    fn setup(n: usize) -> (SpectralDecomposition, DyadicPartition) {
        let d = build_domain(GridSpec::unit_interval(n).unwrap()).unwrap();
        let dec = decompose(&assemble_laplacian(&d)).unwrap();
        let part = build_partition(&dec);
        (dec, part)
    }

    /// Interval whose mode `k` has eigenvalue exactly `4^j0`.
    fn single_block(j0: i32, n: usize, k: usize) -> (SpectralDecomposition, DyadicPartition, Vec<f64>) {
        let h = 2.0 * (((k + 1) as f64) * std::f64::consts::PI / (2.0 * (n + 1) as f64)).sin() / 2f64.powi(j0);
        let d = build_domain(GridSpec::interval(0.0, (n + 1) as f64 * h, h).unwrap()).unwrap();
        let dec = decompose(&assemble_laplacian(&d)).unwrap();
        let part = build_partition(&dec);
        let mut c = vec![0.0; n];
        c[k] = 1.0;
        (dec, part, c)
    }

    fn couple(q: f64) -> InterpolationCouple {
        InterpolationCouple::new(2.0, (0.0, 2.0), (1.0, 1.0), 0.3, q).unwrap()
    }

    #[test]
    fn envelope_of_two_lines() {
        let lines = [Line { a: 0.0, b: 2.0 }, Line { a: 3.0, b: 0.0 }, Line { a: 5.0, b: 0.5 }];
        let (br, pc) = lower_envelope(&lines);
        assert_eq!(br, vec![1.5]);
        assert_eq!(pc, vec![lines[0], lines[1]]);
    }

    #[test]
    fn single_block_k_and_norm() {
        for j0 in [2, 4, 6] {
            let (dec, part, c) = single_block(j0, 15, 5);
            assert_relative_eq!(dec.eigenvalues()[5], 4f64.powi(j0), max_relative = 1e-12);
            let cp = couple(f64::INFINITY);
            let vp = 1.0; // unit L^2 eigenvector
            let (a, b) = (vp * 2f64.powf(cp.s0 * j0 as f64), vp * 2f64.powf(cp.s1 * j0 as f64));
            for t in [1e-3, 0.1, 1.0, 10.0] {
                let k = k_functional(&dec, &part, &c, t, &cp).unwrap();
                assert_relative_eq!(k, a.min(t * b), max_relative = 1e-10);
            }
            for q in [1.0, 2.0, 3.5, f64::INFINITY] {
                let cp = couple(q);
                let v = interpolation_norm(&dec, &part, &c, &cp).unwrap();
                let besov = besov_norm_coeffs(&dec, &part, &c, &cp.target());
                assert_relative_eq!(v / besov, cp.single_block_constant(), max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn k_limits() {
        let (dec, part) = setup(63);
        let c = gaussian_probes(63, 1, 3).remove(0).coeffs;
        let cp = couple(2.0);
        let n0 = besov_norm_coeffs(&dec, &part, &c, &cp.x0());
        let n1 = besov_norm_coeffs(&dec, &part, &c, &cp.x1());
        assert_relative_eq!(k_functional(&dec, &part, &c, 1e9, &cp).unwrap(), n0, max_relative = 1e-12);
        let t = 1e-9;
        assert_relative_eq!(k_functional(&dec, &part, &c, t, &cp).unwrap(), t * n1, max_relative = 1e-12);
    }

    #[test]
    fn k_is_concave_and_bounded() {
        let (dec, part) = setup(63);
        let cp = couple(2.0);
        for p in gaussian_probes(63, 4, 11) {
            let ts = log_grid(1e-4, 1e2, 10);
            let k = k_profile(&dec, &part, &p.coeffs, &ts, &cp).unwrap();
            let n0 = besov_norm_coeffs(&dec, &part, &p.coeffs, &cp.x0());
            let n1 = besov_norm_coeffs(&dec, &part, &p.coeffs, &cp.x1());
            for i in 0..ts.len() {
                assert!(k[i] <= n0.min(ts[i] * n1) * (1.0 + 1e-12));
                if i > 0 {
                    assert!(k[i] >= k[i - 1]);
                }
                if i > 0 && i + 1 < ts.len() {
                    // concavity in t on a non-uniform grid
                    let w = (ts[i] - ts[i - 1]) / (ts[i + 1] - ts[i - 1]);
                    let chord = (1.0 - w) * k[i - 1] + w * k[i + 1];
                    assert!(k[i] >= chord - 1e-10 * n0);
                }
            }
        }
    }

    #[test]
    fn brute_force_is_below_threshold() {
        let (dec, part) = setup(63);
        let cp = couple(2.0);
        for p in gaussian_probes(63, 3, 5) {
            let ts = log_grid(1e-3, 1.0, 5);
            let thr = k_profile(&dec, &part, &p.coeffs, &ts, &cp).unwrap();
            let bf = brute_force_k(&dec, &part, &p.coeffs, &ts, &cp).unwrap();
            for (x, y) in thr.iter().zip(&bf) {
                assert!(*y <= x * (1.0 + 1e-12));
                assert!(*x <= 2.0 * y);
            }
        }
    }

    #[test]
    fn zero_field_and_validation() {
        let (dec, part) = setup(15);
        assert_eq!(interpolation_norm(&dec, &part, &[0.0; 15], &couple(2.0)).unwrap(), 0.0);
        assert!(InterpolationCouple::new(2.0, (1.0, 2.0), (1.0, 2.0), 0.5, 2.0).is_err());
        assert!(InterpolationCouple::new(2.0, (0.0, 2.0), (1.0, 2.0), 1.0, 2.0).is_err());
    }

    #[test]
    fn homogeneity() {
        let (dec, part) = setup(31);
        let cp = couple(2.0);
        let c = eigenmode_probes(31)[7].coeffs.clone();
        let scaled: Vec<f64> = c.iter().map(|x| -3.0 * x).collect();
        let a = interpolation_norm(&dec, &part, &c, &cp).unwrap();
        let b = interpolation_norm(&dec, &part, &scaled, &cp).unwrap();
        assert_relative_eq!(b, 3.0 * a, max_relative = 1e-12);
    }
}
