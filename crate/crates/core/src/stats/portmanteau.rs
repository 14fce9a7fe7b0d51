//! Sample autocorrelation and the Ljung–Box Q test.

use crate::error::{Error, Result};
use crate::stats::special::chi_square_sf;

pub const DEFAULT_MAX_LAG: usize = 6;
pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QTestResult {
    pub q_statistic: f64,
    pub lags_used: usize,
    pub p_value: f64,
    pub reject_at_5pct: bool,
}

fn centered(series: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let dev: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let ss: f64 = dev.iter().map(|d| d * d).sum();
    if !(ss > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok((dev, ss))
}

fn lagged_ratio(dev: &[f64], ss: f64, k: usize) -> f64 {
    dev.iter().zip(&dev[k..]).map(|(a, b)| a * b).sum::<f64>() / ss
}

/// Sample autocorrelation at lag `k`; `r_0` is 1 by definition.
pub fn autocorrelation(series: &[f64], k: usize) -> Result<f64> {
    if k == 0 {
        return Ok(1.0);
    }
    if k >= series.len() {
        return Err(Error::LagTooLarge { lag: k, len: series.len() });
    }
    let (dev, ss) = centered(series)?;
    Ok(lagged_ratio(&dev, ss, k))
}

/// Ljung–Box portmanteau test over lags `1..=m`.
///
/// `m` is capped at `n / 4` for short series; a series too short to test a
/// single lag is rejected with [`Error::SeriesTooShort`].
pub fn ljung_box(series: &[f64], max_lag: usize) -> Result<QTestResult> {
    let n = series.len();
    let m = max_lag.min(n / 4);
    if m < 1 {
        return Err(Error::SeriesTooShort(n));
    }
    let (dev, ss) = centered(series)?;
    let nf = n as f64;
    let sum: f64 = (1..=m)
        .map(|k| {
            let r = lagged_ratio(&dev, ss, k);
            r * r / (nf - k as f64)
        })
        .sum();
    let q = nf * (nf + 2.0) * sum;
    let p_value = chi_square_sf(q, m as u32);
    Ok(QTestResult {
        q_statistic: q,
        lags_used: m,
        p_value,
        reject_at_5pct: p_value < SIGNIFICANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALT: [f64; 6] = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0];

    #[test]
    fn alternating_lag_one() {
        let r = autocorrelation(&ALT, 1).unwrap();
        assert!((r + 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(autocorrelation(&ALT, 0).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(autocorrelation(&[2.0, 2.0, 2.0], 1), Err(Error::ZeroVariance)));
        assert!(matches!(autocorrelation(&ALT, 6), Err(Error::LagTooLarge { .. })));
        assert!(matches!(ljung_box(&[0.0; 40], 6), Err(Error::ZeroVariance)));
        assert!(matches!(ljung_box(&[1.0, 2.0, 3.0], 6), Err(Error::SeriesTooShort(3))));
    }

    #[test]
    fn alternating_q_test() {
        let res = ljung_box(&ALT, 1).unwrap();
        // 6 * 8 * (25/36) / 5
        assert!((res.q_statistic - 20.0 / 3.0).abs() < 1e-12);
        assert_eq!(res.lags_used, 1);
        assert!((res.p_value - 0.0098).abs() < 1e-3);
        assert!(res.reject_at_5pct);
    }

    #[test]
    fn lag_cap_applies_to_short_series() {
        let series: Vec<f64> = (0..12).map(|i| ((i * 7) % 5) as f64).collect();
        assert_eq!(ljung_box(&series, 6).unwrap().lags_used, 3);
    }
}
