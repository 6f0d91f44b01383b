//! Geometric time grids and quadrature in `log t`.
//!
//! Grids are anchored at integer multiples of `1/per_decade` in `log10 t`,
//! so the grid at `2m` points per decade contains the one at `m`.

use std::f64::consts::LN_10;

/// `10^(i/per_decade)` for all `i` with the result in `[lo, hi]` (widened
/// outwards to the nearest grid point).
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let pd = per_decade as f64;
    let a = (lo.log10() * pd).floor() as i64;
    let b = (hi.log10() * pd).ceil() as i64;
    (a..=b).map(|i| 10f64.powf(i as f64 / pd)).collect()
}

/// Number of decades spanned by `[lo, hi]`.
pub fn decades(lo: f64, hi: f64) -> f64 {
    (hi / lo).log10()
}

/// Trapezoid rule for `int F(t) dt/t` over a grid from [`log_grid`].
pub fn trapezoid_log(values: &[f64], per_decade: usize) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let step = LN_10 / per_decade as f64;
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    step * (inner + 0.5 * (values[0] + values[values.len() - 1]))
}

/// Composite Simpson rule for `int_a^b F(t) dt/t` using `2m` panels in
/// `log t`.
pub fn simpson_log(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let (la, lb) = (a.ln(), b.ln());
    let panels = 2 * m.max(1);
    let step = (lb - la) / panels as f64;
    let mut s = f(a) + f(b);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f((la + step * i as f64).exp());
    }
    s * step / 3.0
}

/// Maximum of sampled values, refined by a parabola through the peak and its
/// neighbours in `log t`.
pub fn refined_max(ts: &[f64], values: &[f64]) -> f64 {
    let Some((i, &vmax)) = values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) else {
        return 0.0;
    };
    if i == 0 || i + 1 == values.len() {
        return vmax;
    }
    let (x0, x1, x2) = (ts[i - 1].ln(), ts[i].ln(), ts[i + 1].ln());
    let (y0, y1, y2) = (values[i - 1], values[i], values[i + 1]);
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if a >= 0.0 {
        return vmax;
    }
    let b = d01 - a * (x0 + x1);
    let xs = -b / (2.0 * a);
    let peak = y1 + d01 * (xs - x1) + a * (xs - x0) * (xs - x1);
    peak.max(vmax)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_nest() {
        let coarse = log_grid(1e-3, 1e2, 40);
        let fine = log_grid(1e-3, 1e2, 80);
        assert_eq!(fine.len(), 2 * coarse.len() - 1);
        for (i, t) in coarse.iter().enumerate() {
            assert!((fine[2 * i] / t - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn trapezoid_gamma_integral() {
        // int_0^inf t e^-t dt/t = 1
        let ts = log_grid(1e-12, 60.0, 40);
        let vals: Vec<f64> = ts.iter().map(|t| t * (-t).exp()).collect();
        assert!((trapezoid_log(&vals, 40) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn simpson_power() {
        let v = simpson_log(|t| t * t, 1.0, 3.0, 200);
        assert!((v - 4.0).abs() < 1e-10);
    }

    #[test]
    fn parabolic_peak() {
        // max of u e^-u is 1/e at u = 1
        let ts = log_grid(1e-2, 1e2, 10);
        let vals: Vec<f64> = ts.iter().map(|t| t * (-t).exp()).collect();
        assert!((refined_max(&ts, &vals) - (-1f64).exp()).abs() < 1e-4);
    }
}
