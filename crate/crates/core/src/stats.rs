//! Small descriptive statistics used by the Monte Carlo summaries.

use serde::{Deserialize, Serialize};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (divisor `n − 1`); zero for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Normal-approximation 95% confidence interval for the mean.
pub fn ci95(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    let half = 1.959_963_984_540_054 * sample_std(xs) / (xs.len().max(1) as f64).sqrt();
    (m - half, m + half)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    /// `log` of the prefactor.
    pub intercept: f64,
    /// `log y_i − (intercept + exponent · log x_i)`.
    pub residuals: Vec<f64>,
}

/// Unweighted least squares of `log y` on `log x`. Refuses fewer than three
/// points or any non-positive value.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Option<PowerLawFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return None;
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = mean(&lx);
    let my = mean(&ly);
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let residuals = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| y - (intercept + exponent * x))
        .collect();
    Some(PowerLawFit {
        exponent,
        intercept,
        residuals,
    })
}
