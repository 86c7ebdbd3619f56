//! Empirical check that the next increment's law depends on `(t, x(t))` only.
//!
//! A finite ensemble can refute the condition but never confirm it, so a
//! passing report reads "not refuted at level alpha".

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{chi_square_2x2, mann_whitney, quantile_select};
use crate::walk::Ensemble;

pub const MIN_PATHS: u64 = 10_000;
pub const MIN_STRATUM: usize = 50;
pub const DEFAULT_BINS: usize = 10;

/// Past functional used to split paths into two strata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PastFunctional {
    /// `x(t - k dt) - x(t) > 0`.
    LaggedSign { k: u64 },
    /// `max_{s <= t} x(s) > threshold`.
    RunningMaxIndicator { threshold: f64 },
}

impl FromStr for PastFunctional {
    type Err = Error;

    /// `lagged-sign:K` or `running-max:THRESHOLD`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("past functional `{s}`: expected lagged-sign:K or running-max:T"));
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "lagged-sign" => {
                let k: u64 = arg.parse().map_err(|_| bad())?;
                if k == 0 {
                    return Err(bad());
                }
                Ok(PastFunctional::LaggedSign { k })
            }
            "running-max" => {
                let threshold: f64 = arg.parse().map_err(|_| bad())?;
                if !threshold.is_finite() {
                    return Err(bad());
                }
                Ok(PastFunctional::RunningMaxIndicator { threshold })
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for PastFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PastFunctional::LaggedSign { k } => write!(f, "lagged-sign:{k}"),
            PastFunctional::RunningMaxIndicator { threshold } => write!(f, "running-max:{threshold}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Unreliable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovBin {
    pub x_lo: f64,
    pub x_hi: f64,
    /// Path counts with the past functional false / true.
    pub n_low: usize,
    pub n_high: usize,
    /// Rows: stratum (low, high); columns: next increment (`> 0`, `<= 0`).
    pub sign_table: [[u64; 2]; 2],
    pub mean_sq_low: f64,
    pub mean_sq_high: f64,
    pub tested: bool,
    pub chi2: Option<f64>,
    pub chi2_p: Option<f64>,
    pub mw_z: Option<f64>,
    pub mw_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovReport {
    pub n_q: u64,
    pub paths: u64,
    pub t_probe: f64,
    pub step: u64,
    pub past: PastFunctional,
    pub strata: String,
    pub alpha: f64,
    /// Number of tests entering the Bonferroni correction.
    pub tests: usize,
    pub per_test_alpha: f64,
    pub bins: Vec<MarkovBin>,
    pub rejections: usize,
    /// Every increment in the ensemble is identical; no test can reject.
    pub degenerate: bool,
    pub verdict: Verdict,
    pub pass: bool,
    pub statement: String,
}

/// Run the test on an ensemble at grid time `t_probe`.
pub fn markov_test(
    ensemble: &Ensemble,
    past: PastFunctional,
    t_probe: f64,
    bins: usize,
    alpha: f64,
) -> Result<MarkovReport> {
    let scale = ensemble.scale;
    let step = scale.step_at(t_probe);
    if step < 2 || step >= scale.n_q() {
        return Err(Error::Config(format!(
            "t_probe = {t_probe} must lie in [2 dt, 1 - dt] on a grid of {} steps",
            scale.n_q()
        )));
    }
    if let PastFunctional::LaggedSign { k } = past {
        if k > step {
            return Err(Error::Config(format!("lag {k} reaches before t = 0 at step {step}")));
        }
    }
    let mut stepper = ensemble.stepper()?;
    let mut lagged: Vec<f64> = Vec::new();
    while stepper.step_index() < step {
        if let PastFunctional::LaggedSign { k } = past {
            if stepper.step_index() == step - k {
                lagged = stepper.positions().to_vec();
            }
        }
        stepper.advance()?;
    }
    let x: Vec<f64> = stepper.positions().to_vec();
    let indicator: Vec<bool> = match past {
        PastFunctional::LaggedSign { .. } => lagged.iter().zip(&x).map(|(a, b)| a - b > 0.0).collect(),
        PastFunctional::RunningMaxIndicator { threshold } => {
            stepper.running_max().iter().map(|&m| m > threshold).collect()
        }
    };
    let (prev, next) = stepper.advance()?;
    let dx: Vec<f64> = prev.iter().zip(next).map(|(a, b)| b - a).collect();

    let mut report = markov_from_samples(&x, &indicator, &dx, bins, alpha)?;
    report.n_q = scale.n_q();
    report.t_probe = scale.time(step);
    report.step = step;
    report.past = past;
    report.strata = match past {
        PastFunctional::LaggedSign { k } => format!("x(t - {k} dt) - x(t) > 0 vs <= 0"),
        PastFunctional::RunningMaxIndicator { threshold } => {
            format!("running max over [0, t] > {threshold} vs <= {threshold}")
        }
    };
    Ok(report)
}

/// Core of [`markov_test`] on per-path samples: position at the probe time,
/// past-functional indicator and next increment.
pub fn markov_from_samples(
    x: &[f64],
    indicator: &[bool],
    dx: &[f64],
    bins: usize,
    alpha: f64,
) -> Result<MarkovReport> {
    let p = x.len();
    if indicator.len() != p || dx.len() != p || p == 0 {
        return Err(Error::InvalidValue("sample arrays must be non-empty and of equal length".into()));
    }
    if bins == 0 {
        return Err(Error::Config("need at least one state bin".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let mut scratch = x.to_vec();
    let lo = quantile_select(&mut scratch, 0.01);
    let hi = quantile_select(&mut scratch, 0.99);
    let width = hi - lo;

    let mut groups: Vec<[Vec<usize>; 2]> = vec![[Vec::new(), Vec::new()]; bins];
    for i in 0..p {
        if !(x[i] >= lo && x[i] <= hi) {
            continue;
        }
        let j = if width > 0.0 {
            (((x[i] - lo) / width * bins as f64).floor() as usize).min(bins - 1)
        } else {
            0
        };
        groups[j][usize::from(indicator[i])].push(i);
    }

    let mut out = Vec::with_capacity(bins);
    for (j, [low, high]) in groups.iter().enumerate() {
        let (x_lo, x_hi) = if width > 0.0 {
            let w = width / bins as f64;
            (lo + w * j as f64, if j + 1 == bins { hi } else { lo + w * (j + 1) as f64 })
        } else {
            (lo, hi)
        };
        let mut sign_table = [[0u64; 2]; 2];
        let sq = |idx: &[usize]| -> Vec<f64> { idx.iter().map(|&i| dx[i] * dx[i]).collect() };
        for (s, idx) in [low, high].into_iter().enumerate() {
            for &i in idx {
                sign_table[s][usize::from(dx[i] <= 0.0)] += 1;
            }
        }
        let (sq_low, sq_high) = (sq(low), sq(high));
        let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
        let tested = low.len() >= MIN_STRATUM && high.len() >= MIN_STRATUM;
        let mut bin = MarkovBin {
            x_lo,
            x_hi,
            n_low: low.len(),
            n_high: high.len(),
            sign_table,
            mean_sq_low: mean(&sq_low),
            mean_sq_high: mean(&sq_high),
            tested,
            chi2: None,
            chi2_p: None,
            mw_z: None,
            mw_p: None,
        };
        if tested {
            let (c, cp) = chi_square_2x2(sign_table);
            let (z, zp) = mann_whitney(&sq_low, &sq_high);
            bin.chi2 = Some(c);
            bin.chi2_p = Some(cp);
            bin.mw_z = Some(z);
            bin.mw_p = Some(zp);
        }
        out.push(bin);
    }

    let tests = 2 * out.iter().filter(|b| b.tested).count();
    let per_test_alpha = if tests > 0 { alpha / tests as f64 } else { alpha };
    let rejections = out
        .iter()
        .flat_map(|b| [b.chi2_p, b.mw_p])
        .flatten()
        .filter(|&pv| pv < per_test_alpha)
        .count();
    let degenerate = dx.iter().all(|&d| d == dx[0]);
    let verdict = if degenerate {
        Verdict::Pass
    } else if rejections > 0 {
        Verdict::Fail
    } else if tests == 0 || (p as u64) < MIN_PATHS {
        Verdict::Unreliable
    } else {
        Verdict::Pass
    };
    let statement = match verdict {
        Verdict::Pass if degenerate => format!("not refuted at level {alpha} (degenerate: all increments identical)"),
        Verdict::Pass => format!("not refuted at level {alpha}"),
        Verdict::Fail => format!("refuted at level {alpha}: {rejections} of {tests} tests reject"),
        Verdict::Unreliable => format!(
            "unreliable: {p} paths (need {MIN_PATHS}), {} bins with both strata >= {MIN_STRATUM}",
            tests / 2
        ),
    };
    Ok(MarkovReport {
        n_q: 0,
        paths: p as u64,
        t_probe: f64::NAN,
        step: 0,
        past: PastFunctional::LaggedSign { k: 1 },
        strata: String::new(),
        alpha,
        tests,
        per_test_alpha,
        bins: out,
        rejections,
        degenerate,
        pass: verdict == Verdict::Pass,
        verdict,
        statement,
    })
}
