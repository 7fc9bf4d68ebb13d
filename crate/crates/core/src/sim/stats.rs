//! Batch-means confidence intervals and trend tests.

use serde::{Deserialize, Serialize};

use crate::numeric::t_critical_95;

/// Point estimate with the half-width of a 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
    pub batches: usize,
}

impl Estimate {
    pub fn contains(&self, value: f64) -> bool {
        (self.mean - value).abs() <= self.half_width
    }
}

/// Student-t interval from per-batch values.
pub fn batch_means(values: &[f64]) -> Estimate {
    let b = values.len();
    let mean = values.iter().sum::<f64>() / b as f64;
    if b < 2 {
        return Estimate {
            mean,
            half_width: f64::INFINITY,
            batches: b,
        };
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
    Estimate {
        mean,
        half_width: t_critical_95(b - 1) * (var / b as f64).sqrt(),
        batches: b,
    }
}

/// Least-squares slope with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub slope: f64,
    pub std_err: f64,
}

impl Trend {
    /// One-sided test at the 95% level for a positive slope.
    pub fn significantly_positive(&self) -> bool {
        self.slope > 1.645 * self.std_err
    }
}

pub fn linear_trend(x: &[f64], y: &[f64]) -> Trend {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let resid: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - my - slope * (a - mx)).powi(2))
        .sum();
    let std_err = if x.len() > 2 {
        (resid / (n - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    Trend { slope, std_err }
}
