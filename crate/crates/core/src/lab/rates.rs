//! Convergence-rate fitting.

use serde::Serialize;

/// Least-squares fit of `log e = q log h + c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    /// Standard error of the slope; zero for an exact two-point fit.
    pub stderr: f64,
    pub points: usize,
}

pub fn fit_slope(h: &[f64], e: &[f64]) -> Option<SlopeFit> {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(e)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    let stderr = if n > 2 {
        let c = my - slope * mx;
        let ss: f64 = pts.iter().map(|p| (p.1 - c - slope * p.0).powi(2)).sum();
        (ss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(SlopeFit { slope, stderr, points: n })
}

#[derive(Clone, Debug, Serialize)]
pub struct RateFit {
    pub norm: String,
    /// Fit over the finest three levels (the asserted value).
    pub finest: Option<SlopeFit>,
    /// Fit over all levels.
    pub all: Option<SlopeFit>,
    /// Errors decrease from level to level. Recorded, not enforced.
    pub monotone: bool,
}

pub fn fit_rate(norm: &str, h: &[f64], e: &[f64]) -> RateFit {
    let start = h.len().saturating_sub(3);
    RateFit {
        norm: norm.to_string(),
        finest: fit_slope(&h[start..], &e[start..]),
        all: fit_slope(h, e),
        monotone: e.windows(2).all(|w| w[1] <= w[0]),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RateCheck {
    pub norm: String,
    pub expected: f64,
    pub tolerance: f64,
    pub measured: Option<f64>,
    pub passed: bool,
}

impl RateCheck {
    pub fn new(norm: &str, expected: f64, tolerance: f64, measured: Option<f64>) -> Self {
        Self {
            norm: norm.to_string(),
            expected,
            tolerance,
            measured,
            passed: measured.is_some_and(|m| (m - expected).abs() <= tolerance),
        }
    }
}

/// Non-increasing sequence, allowing one inversion between the two coarsest
/// entries. Returns `(ok, coarse_inversion)`.
pub fn nonincreasing_with_coarse_slack(v: &[f64]) -> (bool, bool) {
    let tol = |a: f64| 1e-12 * a.abs();
    let inverted: Vec<usize> = (1..v.len()).filter(|&i| v[i] > v[i - 1] + tol(v[i - 1])).collect();
    match inverted.as_slice() {
        [] => (true, false),
        [1] => (true, true),
        _ => (false, !inverted.is_empty() && inverted[0] == 1),
    }
}
