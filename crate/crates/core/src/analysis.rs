//! Log-linear decay fits for error sequences.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 10;
pub const WINDOW_FLOOR: f64 = 1e-10;
pub const WINDOW_CEILING: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateKind {
    Exponential,
    Geometric,
    PowerLaw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub kind: RateKind,
    /// Exponential: −slope. Geometric: e^{slope}. PowerLaw: slope.
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: Range<usize>,
}

struct Ols {
    slope: f64,
    intercept: f64,
    r_squared: f64,
}

fn ols(x: &[f64], y: &[f64]) -> Ols {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy <= f64::EPSILON * f64::EPSILON * (my * my).max(1.0) * n {
        1.0
    } else {
        let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ols { slope, intercept, r_squared }
}

fn prepare(xs: &[f64], errors: &[f64], window: Range<usize>, log_x: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    if xs.len() != errors.len() {
        return Err(Error::DimensionMismatch(format!("{} abscissae for {} errors", xs.len(), errors.len())));
    }
    if window.end > xs.len() || window.start >= window.end {
        return Err(Error::InvalidParameter(format!("window {window:?} invalid for {} points", xs.len())));
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for i in window {
        let (a, e) = (xs[i], errors[i]);
        if !(e > 0.0) || !e.is_finite() {
            return Err(Error::InvalidParameter(format!("error at index {i} is not positive: {e}")));
        }
        if log_x && !(a > 0.0) {
            return Err(Error::InvalidParameter(format!("abscissa at index {i} is not positive: {a}")));
        }
        x.push(if log_x { a.ln() } else { a });
        y.push(e.ln());
    }
    if x.len() < MIN_POINTS {
        return Err(Error::InsufficientData { found: x.len(), needed: MIN_POINTS });
    }
    Ok((x, y))
}

/// Last half of the samples with error in [1e-10, 1e-2].
pub fn auto_window(errors: &[f64]) -> Result<Range<usize>> {
    let idx: Vec<usize> = (0..errors.len())
        .filter(|&i| (WINDOW_FLOOR..=WINDOW_CEILING).contains(&errors[i]))
        .collect();
    if idx.len() < MIN_POINTS {
        return Err(Error::InsufficientData { found: idx.len(), needed: MIN_POINTS });
    }
    let start = idx[idx.len() / 2];
    let end = idx[idx.len() - 1] + 1;
    if end - start < MIN_POINTS {
        return Err(Error::InsufficientData { found: end - start, needed: MIN_POINTS });
    }
    Ok(start..end)
}

/// Every sample with error in [1e-14, 1e-2], for sequences that cross the standard window in a few steps.
pub fn wide_window(errors: &[f64]) -> Result<Range<usize>> {
    let first = errors.iter().position(|e| (1e-14..=WINDOW_CEILING).contains(e));
    let last = errors.iter().rposition(|e| (1e-14..=WINDOW_CEILING).contains(e));
    match (first, last) {
        (Some(a), Some(b)) if b + 1 - a >= MIN_POINTS => Ok(a..b + 1),
        (Some(a), Some(b)) => Err(Error::InsufficientData { found: b + 1 - a, needed: MIN_POINTS }),
        _ => Err(Error::InsufficientData { found: 0, needed: MIN_POINTS }),
    }
}

/// ln e ≈ a − rate·t.
pub fn fit_exponential(times: &[f64], errors: &[f64], window: Range<usize>) -> Result<RateFit> {
    let (x, y) = prepare(times, errors, window.clone(), false)?;
    let f = ols(&x, &y);
    Ok(RateFit { kind: RateKind::Exponential, rate: -f.slope, intercept: f.intercept, r_squared: f.r_squared, window })
}

/// ln e ≈ a + t·ln q.
pub fn fit_geometric(steps: &[f64], errors: &[f64], window: Range<usize>) -> Result<RateFit> {
    let (x, y) = prepare(steps, errors, window.clone(), false)?;
    let f = ols(&x, &y);
    Ok(RateFit { kind: RateKind::Geometric, rate: f.slope.exp(), intercept: f.intercept, r_squared: f.r_squared, window })
}

/// ln e ≈ a + p·ln t.
pub fn fit_powerlaw(times: &[f64], errors: &[f64], window: Range<usize>) -> Result<RateFit> {
    let (x, y) = prepare(times, errors, window.clone(), true)?;
    let f = ols(&x, &y);
    Ok(RateFit { kind: RateKind::PowerLaw, rate: f.slope, intercept: f.intercept, r_squared: f.r_squared, window })
}

/// Indices whose abscissa lies in [lo, hi].
pub fn range_window(xs: &[f64], lo: f64, hi: f64) -> Result<Range<usize>> {
    let start = xs.iter().position(|&x| x >= lo);
    let end = xs.iter().rposition(|&x| x <= hi);
    match (start, end) {
        (Some(s), Some(e)) if e >= s => Ok(s..e + 1),
        _ => Err(Error::InsufficientData { found: 0, needed: MIN_POINTS }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar_continuous::{integrate_scalar, theoretical_rate, ComponentParams};
    use proptest::prelude::*;

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * dt).collect()
    }

    #[test]
    fn exact_exponential() {
        let t = grid(200, 0.01);
        let e: Vec<f64> = t.iter().map(|t| (-2.0 * t).exp()).collect();
        let f = fit_exponential(&t, &e, 0..200).unwrap();
        assert!((f.rate - 2.0).abs() < 1e-9);
        assert!(f.r_squared > 0.999999);
    }

    #[test]
    fn constant_sequence() {
        let t = grid(50, 1.0);
        let e = vec![0.3; 50];
        let f = fit_exponential(&t, &e, 0..50).unwrap();
        assert!(f.rate.abs() < 1e-12);
        assert_eq!(f.r_squared, 1.0);
    }

    #[test]
    fn exact_geometric() {
        let t = grid(40, 1.0);
        let e: Vec<f64> = t.iter().map(|t| 0.5f64.powf(*t)).collect();
        let f = fit_geometric(&t, &e, 0..40).unwrap();
        assert!((f.rate - 0.5).abs() < 1e-9);
    }

    #[test]
    fn exact_powerlaw() {
        let t: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let e: Vec<f64> = t.iter().map(|t| t.powf(-1.5)).collect();
        let f = fit_powerlaw(&t, &e, 0..100).unwrap();
        assert!((f.rate + 1.5).abs() < 1e-9);
    }

    #[test]
    fn powerlaw_flags_exponential_input() {
        let t: Vec<f64> = (0..=100).map(|i| 10f64.powf(-1.0 + 0.02 * i as f64)).collect();
        let e: Vec<f64> = t.iter().map(|t| (-3.0 * t).exp()).collect();
        let f = fit_powerlaw(&t, &e, 0..t.len()).unwrap();
        assert!(f.r_squared < 0.9, "r2 = {}", f.r_squared);
    }

    #[test]
    fn too_few_points() {
        let t = grid(9, 1.0);
        let e = vec![1.0; 9];
        assert!(matches!(fit_exponential(&t, &e, 0..9), Err(Error::InsufficientData { found: 9, .. })));
        assert!(auto_window(&e).is_err());
    }

    #[test]
    fn nonpositive_error_rejected() {
        let t = grid(20, 1.0);
        let mut e = vec![1.0; 20];
        e[5] = 0.0;
        assert!(fit_exponential(&t, &e, 0..20).is_err());
        assert!(fit_exponential(&t, &e, 6..20).is_ok());
    }

    #[test]
    fn auto_window_takes_last_half() {
        let e: Vec<f64> = (0..200).map(|i| 10f64.powf(-(i as f64) / 10.0)).collect();
        let w = auto_window(&e).unwrap();
        // qualifying indices are 20..=100
        assert_eq!(w, 60..101);
    }

    #[test]
    fn wide_window_for_fast_sequences() {
        let e: Vec<f64> = (0..25).map(|i| 10f64.powi(-i)).collect();
        assert!(auto_window(&e).is_err());
        let w = wide_window(&e).unwrap();
        assert_eq!(w, 2..15);
        let t: Vec<f64> = (0..25).map(|i| i as f64).collect();
        assert!((fit_geometric(&t, &e, w).unwrap().rate - 0.1).abs() < 1e-9);
    }

    #[test]
    fn k0_rk4_rate_matches_theory() {
        let p = ComponentParams::aligned(3.0, 2.0, 0.0).unwrap();
        let traj = integrate_scalar(&p, 6.0, 1e-3).unwrap();
        let err = traj.column("abs_error").unwrap();
        let w = auto_window(&err).unwrap();
        let f = fit_exponential(traj.times(), &err, w).unwrap();
        let theory = theoretical_rate(&p).unwrap().exponential().unwrap();
        assert!((theory - 7.862).abs() < 1e-3);
        assert!((f.rate / theory - 1.0).abs() < 0.05, "{} vs {theory}", f.rate);
    }

    proptest! {
        #[test]
        fn scale_invariant(rate in 0.1f64..5.0, scale in 1e-3f64..1e3) {
            let t = grid(30, 0.1);
            let e: Vec<f64> = t.iter().map(|t| (-rate * t).exp() * (1.0 + 0.1 * (7.0 * t).sin())).collect();
            let s: Vec<f64> = e.iter().map(|v| v * scale).collect();
            let a = fit_exponential(&t, &e, 0..30).unwrap();
            let b = fit_exponential(&t, &s, 0..30).unwrap();
            prop_assert!((a.rate - b.rate).abs() < 1e-9 * rate.max(1.0));
            prop_assert!((b.intercept - a.intercept - scale.ln()).abs() < 1e-8);
            prop_assert!((a.r_squared - b.r_squared).abs() < 1e-9);
        }
    }
}
