//! Small statistics helpers: quantiles, Kolmogorov-Smirnov, log-log fits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Empirical quantile (linear interpolation between order statistics) of
/// already sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (sorted[j] - sorted[i]) * (pos - i as f64)
}

pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// `sup |F_n - F|` for samples against an analytic CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let s = sorted(samples);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Least-squares line `y = a + b x`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% residual bootstrap interval of the slope.
    pub slope_ci: (f64, f64),
    pub used: usize,
    pub excluded: Vec<usize>,
}

/// OLS of `log y` on `log n`, dropping non-positive values, with a residual
/// bootstrap interval for the slope.
pub fn fit_rate(n: &[f64], y: &[f64], resamples: usize, seed: u64) -> Result<RateFit> {
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    let mut excluded = Vec::new();
    for (i, (&a, &b)) in n.iter().zip(y).enumerate() {
        if a > 0.0 && b > 0.0 && b.is_finite() {
            lx.push(a.ln());
            ly.push(b.ln());
        } else {
            excluded.push(i);
        }
    }
    if lx.len() < 4 {
        return Err(Error::Fit(format!(
            "need at least 4 positive values, have {}",
            lx.len()
        )));
    }
    let (a, b) = ols(&lx, &ly);
    let fitted: Vec<f64> = lx.iter().map(|x| a + b * x).collect();
    let resid: Vec<f64> = ly.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slopes = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let yb: Vec<f64> = fitted
            .iter()
            .map(|f| f + resid[rng.random_range(0..resid.len())])
            .collect();
        slopes.push(ols(&lx, &yb).1);
    }
    let s = sorted(&slopes);
    Ok(RateFit {
        slope: b,
        intercept: a,
        slope_ci: (quantile_sorted(&s, 0.025), quantile_sorted(&s, 0.975)),
        used: lx.len(),
        excluded,
    })
}

/// Pearson chi-square of a histogram against expected counts, with the
/// degrees of freedom (cells with expected count >= 5).
pub fn chi_square(observed: &[f64], expected: &[f64]) -> (f64, usize) {
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (o, e) in observed.iter().zip(expected) {
        if *e >= 5.0 {
            stat += (o - e) * (o - e) / e;
            cells += 1;
        }
    }
    (stat, cells.saturating_sub(1))
}

/// Upper 1% point of the chi-square law (Wilson-Hilferty).
pub fn chi_square_upper_1pct(dof: usize) -> f64 {
    let k = dof as f64;
    let z = 2.326_347_874_040_841;
    let c = 2.0 / (9.0 * k);
    k * (1.0 - c + z * c.sqrt()).powi(3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let n = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
        let y: Vec<f64> = n.iter().map(|v| 0.3 / v).collect();
        let f = fit_rate(&n, &y, 200, 1).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-9);
        let y2: Vec<f64> = n.iter().map(|v| 2.0 / (v * v)).collect();
        assert!((fit_rate(&n, &y2, 200, 1).unwrap().slope + 2.0).abs() < 1e-9);
    }

    #[test]
    fn fit_needs_four_positive_values() {
        let n = [1.0, 2.0, 4.0, 8.0];
        let r = fit_rate(&n, &[1.0, 0.5, -1.0, 0.1], 10, 1);
        assert!(matches!(r, Err(Error::Fit(_))));
    }

    #[test]
    fn quantiles() {
        let v: Vec<f64> = (0..=100).map(|i| i as f64).collect();
        assert_eq!(quantile_sorted(&v, 0.25), 25.0);
        assert_eq!(quantile_sorted(&v, 1.0), 100.0);
    }

    #[test]
    fn chi_square_critical_value() {
        // tabulated 99th percentile for 10 degrees of freedom is 23.209
        assert!((chi_square_upper_1pct(10) - 23.209).abs() < 0.1);
    }
}
