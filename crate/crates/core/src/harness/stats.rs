//! Sampling-distribution diagnostics for normalized estimates.

use serde::{Deserialize, Serialize};

use crate::numeric::{normal_cdf, normal_pdf, normal_quantile};

/// Standard deviations below this make normalization meaningless.
pub const SD_FLOOR: f64 = 1e-12;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation with the `n - 1` divisor.
pub fn sd(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

fn central_moment(x: &[f64], k: i32) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(k)).sum::<f64>() / x.len() as f64
}

/// Moment skewness `m3 / m2^{3/2}`.
pub fn skewness(x: &[f64]) -> f64 {
    central_moment(x, 3) / central_moment(x, 2).powf(1.5)
}

/// `m4 / m2^2 - 3`.
pub fn excess_kurtosis(x: &[f64]) -> f64 {
    central_moment(x, 4) / central_moment(x, 2).powi(2) - 3.0
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Kolmogorov–Smirnov distance to the standard normal CDF.
pub fn ks_statistic(x: &[f64]) -> f64 {
    let v = sorted(x);
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0, |d, (i, &z)| {
        let f = normal_cdf(z);
        d.max((i + 1) as f64 / n - f).max(f - i as f64 / n)
    })
}

/// `(Phi^{-1}((i - 0.5)/R), x_(i))` pairs.
pub fn qq_data(x: &[f64]) -> Vec<(f64, f64)> {
    let v = sorted(x);
    let n = v.len() as f64;
    v.into_iter()
        .enumerate()
        .map(|(i, z)| (normal_quantile((i as f64 + 0.5) / n), z))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub density: f64,
    /// Standard normal density at the bin midpoint.
    pub normal_density: f64,
}

/// Freedman–Diaconis width for standard-normal IQR, `2 * 1.349 * R^{-1/3}`,
/// with edges at integer multiples of the width.
pub fn histogram(x: &[f64]) -> Vec<HistBin> {
    if x.is_empty() {
        return Vec::new();
    }
    let iqr = normal_quantile(0.75) - normal_quantile(0.25);
    let h = 2.0 * iqr / (x.len() as f64).cbrt();
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let first = (lo / h).floor() as i64;
    let last = ((hi / h).floor() as i64).max(first);
    let mut counts = vec![0usize; (last - first + 1) as usize];
    for &v in x {
        let k = ((v / h).floor() as i64).clamp(first, last);
        counts[(k - first) as usize] += 1;
    }
    let n = x.len() as f64;
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| {
            let lo = (first + i as i64) as f64 * h;
            HistBin {
                lo,
                hi: lo + h,
                count,
                density: count as f64 / (n * h),
                normal_density: normal_pdf(lo + h / 2.0),
            }
        })
        .collect()
}
