//! Least-squares rate fits.

use crate::error::{Error, Result};

/// Slope, intercept and coefficient of determination of a line fit.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    // a perfectly flat response is an exact fit
    let r_squared = if syy <= 1e-30 * (1.0 + my * my) { 1.0 } else { sxy * sxy / (sxx * syy) };
    LineFit { slope, intercept, r_squared }
}

fn checked(points: &[(f64, f64)]) -> Result<()> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints(points.len()));
    }
    for &(t, v) in points {
        if !(t > 0.0) {
            return Err(Error::NonPositiveValue(t));
        }
        if !(v > 0.0) {
            return Err(Error::NonPositiveValue(v));
        }
    }
    Ok(())
}

/// Fits `log v = slope * log t + intercept`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<LineFit> {
    checked(points)?;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    Ok(least_squares(&xs, &ys))
}

/// Fits `log v = -rate * t + c`; returns the fit with `slope = -rate`.
/// Here `t` may be zero.
pub fn fit_exponential(points: &[(f64, f64)]) -> Result<LineFit> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints(points.len()));
    }
    if let Some(&(_, v)) = points.iter().find(|p| !(p.1 > 0.0)) {
        return Err(Error::NonPositiveValue(v));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    Ok(least_squares(&xs, &ys))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_lines() {
        let f = fit_rate(&[(1.0, 1.0), (2.0, 2.0), (4.0, 4.0)]).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-14 && (f.r_squared - 1.0).abs() < 1e-14);
        let f = fit_rate(&[(1.0, 1.0), (2.0, 1.0), (4.0, 1.0)]).unwrap();
        assert_eq!(f.slope, 0.0);
        let f = fit_rate(&[(1.0, 8.0), (2.0, 2.0), (4.0, 0.5)]).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-14);
        assert!((f.intercept - 8f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn errors() {
        assert_eq!(fit_rate(&[(1.0, 1.0), (2.0, 2.0)]), Err(Error::TooFewPoints(2)));
        assert_eq!(fit_rate(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]), Err(Error::NonPositiveValue(0.0)));
        assert!(fit_rate(&[(-1.0, 1.0), (2.0, 1.0), (3.0, 1.0)]).is_err());
    }

    #[test]
    fn exponential_rate() {
        let pts: Vec<(f64, f64)> = (0..6).map(|k| (k as f64 * 0.1, 3.0 * (-7.0 * k as f64 * 0.1).exp())).collect();
        let f = fit_exponential(&pts).unwrap();
        assert!((f.slope + 7.0).abs() < 1e-12);
    }

    #[test]
    fn two_mode_rate_lies_between() {
        let pts: Vec<(f64, f64)> = (0..20)
            .map(|k| {
                let t = k as f64 * 0.05;
                (t, (-4.0 * t).exp() + (-9.0 * t).exp())
            })
            .collect();
        let rate = -fit_exponential(&pts).unwrap().slope;
        assert!(rate > 4.0 && rate < 9.0, "{rate}");
    }
}
