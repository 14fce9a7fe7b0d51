//! One-sample Kolmogorov–Smirnov test against an exponential distribution
//! whose rate is fitted by maximum likelihood.
//!
//! Estimating the rate from the same sample makes the plain asymptotic
//! p-value conservative (Lilliefors effect); the plain test is reported as is.

use crate::error::{Error, Result};
use crate::stats::portmanteau::SIGNIFICANCE;

pub const MIN_KS_SAMPLES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsResult {
    pub d_statistic: f64,
    pub n: usize,
    /// Maximum-likelihood rate, `1 / mean`.
    pub rate_estimate: f64,
    pub p_value: f64,
    pub reject_at_5pct: bool,
}

/// Survival function of the asymptotic Kolmogorov distribution,
/// `P(K > t) = 2 Σ (-1)^(j-1) exp(-2 j² t²)`.
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=1_000_000u32 {
        let j = f64::from(j);
        let term = (-2.0 * j * j * t * t).exp();
        sum += sign * term;
        if term < 1e-10 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Sup distance between the empirical CDF of `sorted` and `cdf`.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i as f64 + 1.0) / n - f;
            let below = f - i as f64 / n;
            above.abs().max(below.abs())
        })
        .fold(0.0, f64::max)
}

pub fn ks_exponential(samples: &[f64]) -> Result<KsResult> {
    if samples.len() < MIN_KS_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_KS_SAMPLES,
            got: samples.len(),
        });
    }
    if let Some(&bad) = samples.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::NonPositiveSample(bad));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let rate = 1.0 / mean;
    let d = ks_distance(&sorted, |x| -(-rate * x).exp_m1());
    let p_value = kolmogorov_sf((n as f64).sqrt() * d);
    Ok(KsResult {
        d_statistic: d,
        n,
        rate_estimate: rate,
        p_value,
        reject_at_5pct: p_value < SIGNIFICANCE,
    })
}
