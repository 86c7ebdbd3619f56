use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::two_sided_z;

pub const MIN_SIGNS: usize = 1000;
pub const DEFAULT_MAX_LAG: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquiprobabilityReport {
    pub n: usize,
    pub alpha: f64,
    pub plus_fraction: f64,
    /// z statistic of the one-sample proportion test against 1/2.
    pub freq_stat: f64,
    pub freq_bound: f64,
    /// Sample autocorrelations at lags `1..=K`.
    pub lag_autocorr: Vec<f64>,
    pub lag_bound: f64,
    /// How many of the `K + 1` statistics fall outside their bound.
    pub failures: usize,
    pub pass: bool,
}

/// Fairness and lag-independence of a `+-1` stream, each tested at level `alpha`.
pub fn equiprobability_test(signs: &[i8], alpha: f64, max_lag: usize) -> Result<EquiprobabilityReport> {
    let n = signs.len();
    if n < MIN_SIGNS {
        return Err(Error::InsufficientData(format!(
            "{n} signs, need at least {MIN_SIGNS}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must be in (0, 1), got {alpha}")));
    }
    if signs.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::InvalidValue("signs must be +1 or -1".into()));
    }
    let z = two_sided_z(alpha);
    let nf = n as f64;
    let plus = signs.iter().filter(|&&s| s == 1).count() as f64;
    let freq_stat = (plus - nf / 2.0) / (nf.sqrt() / 2.0);

    let sum: i64 = signs.iter().map(|&s| i64::from(s)).sum();
    let mean = sum as f64 / nf;
    let centered: Vec<f64> = signs.iter().map(|&s| f64::from(s) - mean).collect();
    let denom: f64 = centered.iter().map(|c| c * c).sum();
    let lag_autocorr: Vec<f64> = (1..=max_lag)
        .map(|k| {
            if denom == 0.0 || k >= n {
                return f64::NAN;
            }
            let num: f64 = centered.iter().zip(&centered[k..]).map(|(a, b)| a * b).sum();
            num / denom
        })
        .collect();
    let lag_bound = z / nf.sqrt();

    let mut failures = usize::from(freq_stat.abs() > z);
    // a constant stream has no defined autocorrelation; count it as failing
    failures += lag_autocorr
        .iter()
        .filter(|r| r.is_nan() || r.abs() > lag_bound)
        .count();
    Ok(EquiprobabilityReport {
        n,
        alpha,
        plus_fraction: plus / nf,
        freq_stat,
        freq_bound: z,
        lag_autocorr,
        lag_bound,
        failures,
        pass: failures == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::PathStream;

    #[test]
    fn counter_stream_passes() {
        let s = PathStream::new(1, 0);
        let signs: Vec<i8> = (0..1_000_000).map(|k| s.sign(k)).collect();
        let r = equiprobability_test(&signs, 0.001, 8).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.lag_autocorr.len(), 8);
    }

    #[test]
    fn constant_stream_fails() {
        let r = equiprobability_test(&vec![1i8; 5000], 0.001, 8).unwrap();
        assert!(!r.pass);
        assert!(r.freq_stat.is_infinite() || r.freq_stat > 50.0);
    }

    #[test]
    fn alternating_stream_fails_on_lag_one() {
        let signs: Vec<i8> = (0..10_000).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let r = equiprobability_test(&signs, 0.001, 8).unwrap();
        assert_eq!(r.freq_stat, 0.0);
        assert!((r.lag_autocorr[0] + 1.0).abs() < 1e-3);
        assert!(!r.pass);
    }

    #[test]
    fn short_or_bad_input() {
        assert!(matches!(
            equiprobability_test(&[1, -1, 1], 0.01, 8),
            Err(Error::InsufficientData(_))
        ));
        assert!(equiprobability_test(&vec![0i8; 2000], 0.01, 8).is_err());
    }
}
