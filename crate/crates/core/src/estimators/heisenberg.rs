use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scale::{Classification, TolerancePolicy};
use crate::walk::Path;

/// Number of steps in each classification band.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub struct ClassCounts {
    pub infinitesimal: u64,
    pub small_gap: u64,
    pub appreciable: u64,
    pub large_gap: u64,
    pub unlimited: u64,
}

impl ClassCounts {
    pub fn add(&mut self, c: Classification) {
        match c {
            Classification::Infinitesimal => self.infinitesimal += 1,
            Classification::SmallGap => self.small_gap += 1,
            Classification::Appreciable => self.appreciable += 1,
            Classification::LargeGap => self.large_gap += 1,
            Classification::Unlimited => self.unlimited += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.infinitesimal + self.small_gap + self.appreciable + self.large_gap + self.unlimited
    }
}

/// Classification of `(dx)^2 / dt` over every step of a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergReport {
    pub path_id: u64,
    pub counts: ClassCounts,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalScaleConfig {
    /// `hbar / m`, in position^2 / time.
    pub hbar_over_m: f64,
}

/// Classification of `((dx)^2 / dt) / (hbar / m)` over every step of a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalScaleReport {
    pub path_id: u64,
    pub hbar_over_m: f64,
    pub counts: ClassCounts,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub pass: bool,
}

fn step_statistics(path: &Path) -> Vec<f64> {
    let dt = path.scale.delta_t();
    path.increments().map(|d| d * d / dt).collect()
}

fn classify_all(values: &[f64], policy: &TolerancePolicy) -> Result<ClassCounts> {
    let mut counts = ClassCounts::default();
    for &v in values {
        counts.add(policy.classify(v)?);
    }
    Ok(counts)
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Passes iff every step's `(dx)^2 / dt` is appreciable under `policy`.
pub fn heisenberg_check(path: &Path, policy: &TolerancePolicy) -> Result<HeisenbergReport> {
    let stats = step_statistics(path);
    let counts = classify_all(&stats, policy)?;
    Ok(HeisenbergReport {
        path_id: path.path_id,
        pass: counts.appreciable == counts.total(),
        counts,
        min: stats.iter().copied().fold(f64::INFINITY, f64::min),
        max: stats.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        median: median(&stats),
    })
}

/// Passes iff the ratio to `hbar / m` is never infinitesimal: the inequality
/// only bounds the ratio from below, so large values are admissible.
pub fn physical_scale_check(
    path: &Path,
    cfg: &PhysicalScaleConfig,
    policy: &TolerancePolicy,
) -> Result<PhysicalScaleReport> {
    if !(cfg.hbar_over_m > 0.0 && cfg.hbar_over_m.is_finite()) {
        return Err(Error::Config(format!(
            "hbar_over_m must be positive, got {}",
            cfg.hbar_over_m
        )));
    }
    let ratios: Vec<f64> = step_statistics(path)
        .into_iter()
        .map(|s| s / cfg.hbar_over_m)
        .collect();
    let counts = classify_all(&ratios, policy)?;
    Ok(PhysicalScaleReport {
        path_id: path.path_id,
        hbar_over_m: cfg.hbar_over_m,
        pass: counts.infinitesimal == 0,
        counts,
        min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        max_ratio: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}
