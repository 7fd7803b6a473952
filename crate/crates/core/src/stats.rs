//! Small statistics helpers for the Monte Carlo checks.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return MeanEstimate {
                mean: f64::NAN,
                stderr: f64::NAN,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        MeanEstimate { mean, stderr, n }
    }

    /// Mean with a batch-means standard error, for autocorrelated series.
    pub fn batch_means(xs: &[f64], batches: usize) -> Self {
        let batches = batches.max(2).min(xs.len().max(1));
        let len = xs.len() / batches;
        if len == 0 {
            return Self::from_samples(xs);
        }
        let means: Vec<f64> = (0..batches)
            .map(|b| xs[b * len..(b + 1) * len].iter().sum::<f64>() / len as f64)
            .collect();
        let est = Self::from_samples(&means);
        MeanEstimate {
            mean: xs.iter().sum::<f64>() / xs.len() as f64,
            stderr: est.stderr,
            n: xs.len(),
        }
    }

    /// Whether `target` lies within `k` standard errors.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

/// Kolmogorov-Smirnov statistic of `samples` against Uniform(0, 1).
pub fn ks_uniform(samples: &[f64]) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let lo = x - i as f64 / n;
            let hi = (i + 1) as f64 / n - x;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

/// Pearson goodness-of-fit result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square of observed counts against expected probabilities.
/// Cells with zero expected probability must have zero counts; they are
/// dropped from the statistic.
pub fn chi_square_gof(counts: &[u64], probs: &[f64]) -> ChiSquareTest {
    let total: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&c, &p) in counts.iter().zip(probs) {
        if p <= 0.0 {
            if c > 0 {
                stat = f64::INFINITY;
            }
            continue;
        }
        cells += 1;
        let e = p * total as f64;
        stat += (c as f64 - e).powi(2) / e;
    }
    let dof = cells.saturating_sub(1);
    let p_value = if !stat.is_finite() {
        0.0
    } else if dof == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(dof as f64).unwrap().cdf(stat)
    };
    ChiSquareTest {
        statistic: stat,
        dof,
        p_value,
    }
}
