use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::WalkSpec;
use crate::error::{Error, Result};
use crate::scale::QuantumScale;
use crate::stats::{linear_fit, CompensatedSum};
use crate::walk::{Path, WalkModel};

pub const MIN_RUNGS: usize = 4;
pub const MIN_RANGE_RATIO: f64 = 16.0;
/// Resolution floor, in units of the typical one-step size `sigma_typ sqrt(dt)`.
pub const FLOOR_STEPS: f64 = 4.0;
/// Rungs averaging fewer crossings per path are dropped.
pub const MIN_CROSSINGS: f64 = 2.0;

/// Geometric ladder of spatial resolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaLadder(pub Vec<f64>);

impl LambdaLadder {
    pub fn geometric(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && hi.is_finite() && count >= 2) {
            return Err(Error::Config(format!("lambda ladder {lo}:{hi}:{count} needs 0 < lo < hi, count >= 2")));
        }
        let r = (hi / lo).ln() / (count - 1) as f64;
        let mut v: Vec<f64> = (0..count).map(|i| lo * (r * i as f64).exp()).collect();
        v[0] = lo;
        v[count - 1] = hi;
        Ok(Self(v))
    }
}

impl FromStr for LambdaLadder {
    type Err = Error;

    /// `LO:HI:COUNT`, geometrically spaced.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("lambda ladder `{s}`: expected LO:HI:COUNT"));
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, n] = parts.as_slice() else { return Err(bad()) };
        Self::geometric(
            lo.parse().map_err(|_| bad())?,
            hi.parse().map_err(|_| bad())?,
            n.parse().map_err(|_| bad())?,
        )
    }
}

/// Successive crossings of the level grid `lambda Z` by one path.
#[derive(Debug, Clone, Copy)]
pub struct CrossingCounter {
    lambda: f64,
    level: i64,
    count: u64,
}

impl CrossingCounter {
    pub fn new(lambda: f64, x0: f64) -> Self {
        Self { lambda, level: (x0 / lambda).round() as i64, count: 0 }
    }

    /// A crossing is recorded when the path reaches the next level up or down
    /// (within `1e-6 lambda`); jumps over several levels count each one.
    #[inline]
    pub fn visit(&mut self, x: f64) {
        let slack = 1e-6 * self.lambda;
        loop {
            if x >= (self.level + 1) as f64 * self.lambda - slack {
                self.level += 1;
            } else if x <= (self.level - 1) as f64 * self.lambda + slack {
                self.level -= 1;
            } else {
                break;
            }
            self.count += 1;
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}

pub fn count_crossings(values: &[f64], lambda: f64) -> u64 {
    let mut c = CrossingCounter::new(lambda, values[0]);
    for &x in &values[1..] {
        c.visit(x);
    }
    c.count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionRung {
    pub lambda: f64,
    pub mean_crossings: f64,
    /// `lambda * mean_crossings`.
    pub length: f64,
    pub used: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub n_q: u64,
    pub paths: u64,
    pub rungs: Vec<DimensionRung>,
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    /// `1 - slope` of `log L` against `log lambda`.
    pub d_hat: f64,
    pub sigma_typ: f64,
    pub resolution_floor: f64,
    pub warnings: Vec<String>,
    pub note: String,
}

fn check_ladder(lambdas: &[f64]) -> Result<()> {
    if lambdas.len() < MIN_RUNGS {
        return Err(Error::Config(format!("{} rungs, need at least {MIN_RUNGS}", lambdas.len())));
    }
    if lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::Config("resolutions must be positive".into()));
    }
    let lo = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lambdas.iter().copied().fold(0.0, f64::max);
    if hi / lo < MIN_RANGE_RATIO {
        return Err(Error::Config(format!(
            "lambda_max / lambda_min = {}, need at least {MIN_RANGE_RATIO}",
            hi / lo
        )));
    }
    Ok(())
}

fn finish(
    n_q: u64,
    lambdas: &[f64],
    per_path: &[Vec<u64>],
    qv: &[f64],
) -> Result<DimensionReport> {
    let p = per_path.len() as f64;
    let mut qv_sum = CompensatedSum::new();
    for &q in qv {
        qv_sum.add(q);
    }
    let sigma_typ = (qv_sum.value() / p).sqrt();
    let resolution_floor = FLOOR_STEPS * sigma_typ / (n_q as f64).sqrt();
    let lo = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    if lo < resolution_floor {
        return Err(Error::Config(format!(
            "lambda_min = {lo} is below the resolution floor {resolution_floor}"
        )));
    }
    let mut warnings = Vec::new();
    let mut rungs = Vec::with_capacity(lambdas.len());
    for (i, &lambda) in lambdas.iter().enumerate() {
        let mut total = CompensatedSum::new();
        for counts in per_path {
            total.add(counts[i] as f64);
        }
        let mean_crossings = total.value() / p;
        let used = mean_crossings >= MIN_CROSSINGS;
        if !used {
            warnings.push(format!("lambda = {lambda}: {mean_crossings} crossings per path, rung dropped"));
        }
        rungs.push(DimensionRung { lambda, mean_crossings, length: lambda * mean_crossings, used });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = rungs
        .iter()
        .filter(|r| r.used)
        .map(|r| (r.lambda.ln(), r.length.ln()))
        .unzip();
    if x.len() < MIN_RUNGS {
        return Err(Error::InsufficientData(format!(
            "{} usable rungs, need at least {MIN_RUNGS}",
            x.len()
        )));
    }
    let (slope, intercept, stderr) = linear_fit(&x, &y);
    Ok(DimensionReport {
        n_q,
        paths: per_path.len() as u64,
        rungs,
        slope,
        intercept,
        stderr,
        d_hat: 1.0 - slope,
        sigma_typ,
        resolution_floor,
        warnings,
        note: "length measured by level crossings at spatial resolution lambda, not by time subsampling".into(),
    })
}

/// Dimension estimate from materialized paths.
pub fn fractal_dimension(paths: &[Path], lambdas: &[f64]) -> Result<DimensionReport> {
    check_ladder(lambdas)?;
    let first = paths.first().ok_or_else(|| Error::InsufficientData("no paths".into()))?;
    let per_path: Vec<Vec<u64>> = paths
        .par_iter()
        .map(|p| lambdas.iter().map(|&l| count_crossings(&p.values, l)).collect())
        .collect();
    let qv: Vec<f64> = paths.iter().map(crate::walk::quadratic_variation).collect();
    finish(first.scale.n_q(), lambdas, &per_path, &qv)
}

/// Dimension estimate simulating paths `0..n_paths` one at a time, O(P) memory.
pub fn fractal_dimension_streaming(
    spec: &WalkSpec,
    scale: &QuantumScale,
    seed: u64,
    n_paths: u64,
    lambdas: &[f64],
) -> Result<DimensionReport> {
    check_ladder(lambdas)?;
    if n_paths == 0 {
        return Err(Error::InsufficientData("no paths".into()));
    }
    let model = WalkModel::new(spec)?;
    let results: Vec<Result<(Vec<u64>, f64)>> = (0..n_paths)
        .into_par_iter()
        .map(|id| {
            let mut counters: Vec<CrossingCounter> = Vec::new();
            let (mut prev, mut qv) = (0.0, 0.0);
            model.run(scale, seed, id, |k, x| {
                if k == 0 {
                    counters = lambdas.iter().map(|&l| CrossingCounter::new(l, x)).collect();
                } else {
                    qv += (x - prev) * (x - prev);
                    for c in counters.iter_mut() {
                        c.visit(x);
                    }
                }
                prev = x;
            })?;
            Ok((counters.iter().map(|c| c.count()).collect(), qv))
        })
        .collect();
    let (per_path, qv): (Vec<Vec<u64>>, Vec<f64>) = results.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    finish(scale.n_q(), lambdas, &per_path, &qv)
}
