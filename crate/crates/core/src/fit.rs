//! Least-squares power-law fits in log-log space.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    /// `sqrt(SSR / (n - 2))` of the log-log residuals.
    pub residual_std_error: f64,
    pub points: usize,
}

impl PowerFit {
    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x.ln()).exp()
    }
}

/// Fits `y ≈ exp(intercept) x^slope`.
pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<PowerFit> {
    if x.len() != y.len() {
        return invalid("x and y differ in length");
    }
    if x.len() < 3 {
        return invalid(format!("need at least 3 points, got {}", x.len()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return invalid("power-law fit needs positive finite data");
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx <= 1e-24 {
        return invalid("degenerate sweep: all x values coincide");
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Ok(PowerFit { slope, intercept, residual_std_error: (ssr / (n - 2.0)).sqrt(), points: x.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let x: Vec<f64> = (1..=6).map(|j| (1u64 << j) as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.5 * v.powf(-0.37)).collect();
        let fit = fit_power_law(&x, &y).unwrap();
        assert!((fit.slope + 0.37).abs() < 1e-10);
        assert!((fit.intercept - 3.5f64.ln()).abs() < 1e-10);
        assert!(fit.residual_std_error < 1e-10);
        assert!((fit.predict(10.0) - 3.5 * 10f64.powf(-0.37)).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_sweeps() {
        assert!(fit_power_law(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(fit_power_law(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_power_law(&[1.0, 2.0, 3.0], &[1.0, 0.0, 3.0]).is_err());
    }
}
