//! Batch-means error estimation.

use serde::{Deserialize, Serialize};

pub const DEFAULT_BATCHES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// Standard error from batch means.
    pub se: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn exact(v: f64) -> Self {
        Self {
            mean: v,
            se: 0.0,
            samples: 0,
        }
    }

    /// |mean − target| ≤ k·se (exact equality when se = 0, up to rounding).
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se + 1e-12 * target.abs().max(1.0)
    }
}

/// Mean and batch-means standard error of a series.
pub fn batch_means(samples: &[f64], batches: usize) -> Estimate {
    let n = samples.len();
    if n == 0 {
        return Estimate {
            mean: f64::NAN,
            se: f64::NAN,
            samples: 0,
        };
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let b = batches.min(n).max(1);
    if b < 2 {
        return Estimate {
            mean,
            se: f64::INFINITY,
            samples: n,
        };
    }
    let size = n / b;
    let means: Vec<f64> = (0..b)
        .map(|i| samples[i * size..(i + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let bm = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (b - 1) as f64;
    Estimate {
        mean,
        se: (var / b as f64).sqrt(),
        samples: n,
    }
}

/// Compares the first and second halves of a series; true when their means
/// differ by more than `k` combined standard errors.
pub fn drifts(samples: &[f64], k: f64) -> bool {
    let h = samples.len() / 2;
    if h < 4 {
        return false;
    }
    let a = batch_means(&samples[..h], DEFAULT_BATCHES / 2);
    let b = batch_means(&samples[h..2 * h], DEFAULT_BATCHES / 2);
    let se = (a.se * a.se + b.se * b.se).sqrt();
    (a.mean - b.mean).abs() > k * se + 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_has_zero_error() {
        let e = batch_means(&[2.0; 100], 10);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.se, 0.0);
        assert!(!drifts(&[2.0; 100], 4.0));
    }

    #[test]
    fn trend_is_detected() {
        let s: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert!(drifts(&s, 4.0));
    }
}
