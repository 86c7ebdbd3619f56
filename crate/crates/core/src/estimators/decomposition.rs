//! Conditional drift and volatility estimated by ensemble averaging in
//! `(time, state)` cells, and the normalized residuals they imply.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{quantile_select, CompensatedSum};
use crate::walk::Ensemble;

pub const MIN_PATHS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionOptions {
    /// Number of time bins; `0` means one bin per grid step.
    pub time_bins: usize,
    pub state_bins: usize,
    /// Cells with fewer increments are reported as unreliable.
    pub min_count: u64,
    /// Empirical quantiles spanned by the state bins of each time bin.
    pub lower_quantile: f64,
    pub upper_quantile: f64,
}

impl Default for DecompositionOptions {
    fn default() -> Self {
        Self {
            time_bins: 0,
            state_bins: 32,
            min_count: 50,
            lower_quantile: 0.01,
            upper_quantile: 0.99,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBin {
    /// Steps `k` with `step_lo <= k < step_hi`.
    pub step_lo: u64,
    pub step_hi: u64,
    pub x_lo: f64,
    pub x_hi: f64,
}

impl TimeBin {
    /// State bin of `x`, or `None` outside `[x_lo, x_hi]`.
    pub fn state_bin(&self, x: f64, n_bins: usize) -> Option<usize> {
        if !(x >= self.x_lo && x <= self.x_hi) {
            return None;
        }
        let width = self.x_hi - self.x_lo;
        if width <= 0.0 {
            return Some(0);
        }
        let j = ((x - self.x_lo) / width * n_bins as f64).floor() as usize;
        Some(j.min(n_bins - 1))
    }

    pub fn state_edges(&self, j: usize, n_bins: usize) -> (f64, f64) {
        let width = (self.x_hi - self.x_lo) / n_bins as f64;
        if width <= 0.0 {
            return (self.x_lo, self.x_hi);
        }
        let lo = self.x_lo + width * j as f64;
        let hi = if j + 1 == n_bins { self.x_hi } else { self.x_lo + width * (j + 1) as f64 };
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub time_bin: usize,
    pub state_bin: usize,
    pub t_center: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub x_center: f64,
    pub count: u64,
    pub reliable: bool,
    /// Conditional mean of `dx / dt`.
    pub drift_est: Option<f64>,
    pub drift_se: Option<f64>,
    /// Conditional RMS of `(dx - drift_est dt) / sqrt(dt)` (Bessel-corrected).
    pub vol_est: Option<f64>,
    pub vol_se: Option<f64>,
    /// In-cell mean and second moment of the normalized residual.
    pub residual_mean: Option<f64>,
    pub residual_second_moment: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub n_q: u64,
    pub paths: u64,
    pub seed: u64,
    pub options: DecompositionOptions,
    pub time_bins: Vec<TimeBin>,
    /// Occupied cells, ordered by `(time_bin, state_bin)`.
    pub cells: Vec<Cell>,
    pub reliable_cells: usize,
    pub unreliable_cells: usize,
    /// Increments whose start point fell outside the quantile range of their time bin.
    pub outside_range: u64,
}

impl DecompositionReport {
    /// Cell lookup table indexed by `time_bin * state_bins + state_bin`.
    fn index(&self) -> Vec<Option<usize>> {
        let nb = self.options.state_bins;
        let mut idx = vec![None; self.time_bins.len() * nb];
        for (i, c) in self.cells.iter().enumerate() {
            idx[c.time_bin * nb + c.state_bin] = Some(i);
        }
        idx
    }

    fn bin_of_step(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_q as usize);
        for (b, tb) in self.time_bins.iter().enumerate() {
            for _ in tb.step_lo..tb.step_hi {
                out.push(b);
            }
        }
        out
    }
}

fn time_bin_ranges(n_q: u64, time_bins: usize) -> Result<Vec<(u64, u64)>> {
    let t = if time_bins == 0 { n_q } else { time_bins as u64 };
    if t > n_q {
        return Err(Error::Config(format!("{t} time bins for only {n_q} steps")));
    }
    Ok((0..t).map(|i| (i * n_q / t, (i + 1) * n_q / t)).collect())
}

/// Mean of identical values is returned exactly.
fn shifted_mean(values: &[f64]) -> f64 {
    let v0 = values[0];
    let mut acc = CompensatedSum::new();
    for &v in values {
        acc.add(v - v0);
    }
    v0 + acc.value() / values.len() as f64
}

/// Unbiased estimate of `Var(s^2) = mu4 / n - sigma^4 (n - 3) / (n (n - 1))` from the
/// central sample moments `m2`, `m4` (divisor `n`), floored at the value for kurtosis 1.
///
/// The delta method keeps only the `mu4 - sigma^4` term, which vanishes for
/// two-point residuals such as those of the walk.
fn var_sample_variance(n: f64, m2: f64, m4: f64) -> f64 {
    let n3 = n * n * n;
    let (a1, a2) = ((n - 1.0) * (n * n - 3.0 * n + 3.0) / n3, 3.0 * (2.0 * n - 3.0) * (n - 1.0) / n3);
    let (b1, b2) = ((n - 1.0) * (n - 1.0) / n3, (n - 1.0) * (n * n - 2.0 * n + 3.0) / n3);
    let (a, b) = (m4, m2 * m2);
    let det = a1 * b2 - a2 * b1;
    let mu4 = (a * b2 - a2 * b) / det;
    let sigma4 = (a1 * b - b1 * a) / det;
    let s2 = m2 * n / (n - 1.0);
    let floor = 2.0 * s2 * s2 / (n * (n - 1.0));
    (mu4 / n - sigma4 * (n - 3.0) / (n * (n - 1.0))).max(floor)
}

fn cell_estimates(cell: &mut Cell, increments: &[f64], dt: f64) {
    let n = increments.len() as f64;
    let sqrt_dt = dt.sqrt();
    let mean_dx = shifted_mean(increments);
    let drift = mean_dx / dt;
    let residuals: Vec<f64> = increments.iter().map(|d| (d - mean_dx) / sqrt_dt).collect();
    let ss: f64 = residuals.iter().map(|r| r * r).sum();
    // var(dx / dt) = ss / (n - 1) / dt
    let drift_sd = (ss / (n - 1.0) / dt).sqrt();
    let vol = (ss / (n - 1.0)).sqrt();
    let vol_se = if vol > 0.0 {
        let m4 = residuals.iter().map(|r| r.powi(4)).sum::<f64>() / n;
        var_sample_variance(n, ss / n, m4).sqrt() / (2.0 * vol)
    } else {
        0.0
    };
    cell.drift_est = Some(drift);
    cell.drift_se = Some(drift_sd / n.sqrt());
    cell.vol_est = Some(vol);
    cell.vol_se = Some(vol_se);
    if vol > 0.0 {
        cell.residual_mean = Some(residuals.iter().sum::<f64>() / n / vol);
        cell.residual_second_moment = Some(ss / n / (vol * vol));
    }
}

pub fn estimate_decomposition(ensemble: &Ensemble, options: DecompositionOptions) -> Result<DecompositionReport> {
    let paths = ensemble.n_paths();
    if paths < MIN_PATHS {
        return Err(Error::InsufficientData(format!(
            "{paths} paths, need at least {MIN_PATHS}"
        )));
    }
    if options.state_bins == 0 || options.min_count < 2 {
        return Err(Error::Config("need state_bins >= 1 and min_count >= 2".into()));
    }
    if !(0.0 <= options.lower_quantile && options.lower_quantile < options.upper_quantile && options.upper_quantile <= 1.0) {
        return Err(Error::Config("quantile range must satisfy 0 <= lower < upper <= 1".into()));
    }
    let scale = ensemble.scale;
    let dt = scale.delta_t();
    let nb = options.state_bins;
    let ranges = time_bin_ranges(scale.n_q(), options.time_bins)?;
    let mut stepper = ensemble.stepper()?;

    let mut time_bins = Vec::with_capacity(ranges.len());
    let mut cells = Vec::new();
    let mut outside_range = 0u64;
    let (mut reliable_cells, mut unreliable_cells) = (0usize, 0usize);

    let mut xs: Vec<f64> = Vec::new();
    let mut dxs: Vec<f64> = Vec::new();
    let mut scratch: Vec<f64> = Vec::new();
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); nb];

    for (b, &(step_lo, step_hi)) in ranges.iter().enumerate() {
        xs.clear();
        dxs.clear();
        for _ in step_lo..step_hi {
            let (prev, next) = stepper.advance()?;
            xs.extend_from_slice(prev);
            dxs.extend(prev.iter().zip(next).map(|(a, b)| b - a));
        }
        scratch.clear();
        scratch.extend_from_slice(&xs);
        let x_lo = quantile_select(&mut scratch, options.lower_quantile);
        let x_hi = quantile_select(&mut scratch, options.upper_quantile);
        let tb = TimeBin { step_lo, step_hi, x_lo, x_hi };

        for g in groups.iter_mut() {
            g.clear();
        }
        for (&x, &dx) in xs.iter().zip(&dxs) {
            match tb.state_bin(x, nb) {
                Some(j) => groups[j].push(dx),
                None => outside_range += 1,
            }
        }
        let t_center = 0.5 * (scale.time(step_lo) + scale.time(step_hi - 1));
        for (j, g) in groups.iter().enumerate() {
            if g.is_empty() {
                continue;
            }
            let (lo, hi) = tb.state_edges(j, nb);
            let mut cell = Cell {
                time_bin: b,
                state_bin: j,
                t_center,
                x_lo: lo,
                x_hi: hi,
                x_center: 0.5 * (lo + hi),
                count: g.len() as u64,
                reliable: g.len() as u64 >= options.min_count,
                drift_est: None,
                drift_se: None,
                vol_est: None,
                vol_se: None,
                residual_mean: None,
                residual_second_moment: None,
            };
            if cell.reliable {
                cell_estimates(&mut cell, g, dt);
                reliable_cells += 1;
            } else {
                unreliable_cells += 1;
            }
            cells.push(cell);
        }
        time_bins.push(tb);
    }
    if cells.is_empty() {
        return Err(Error::InsufficientData("all cells empty".into()));
    }
    Ok(DecompositionReport {
        n_q: scale.n_q(),
        paths,
        seed: ensemble.seed,
        options,
        time_bins,
        cells,
        reliable_cells,
        unreliable_cells,
        outside_range,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualMoments {
    pub mean_eta: f64,
    pub second_moment_eta: f64,
    pub steps_used: u64,
    /// Steps outside every reliable cell or in cells with zero volatility estimate.
    pub steps_excluded: u64,
}

#[derive(Default)]
struct MomentAcc {
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
    used: u64,
    excluded: u64,
}

impl MomentAcc {
    fn add(&mut self, eta: f64) {
        self.sum.add(eta);
        self.sum_sq.add(eta * eta);
        self.used += 1;
    }

    fn finish(&self) -> ResidualMoments {
        let n = self.used as f64;
        ResidualMoments {
            mean_eta: if self.used > 0 { self.sum.value() / n } else { f64::NAN },
            second_moment_eta: if self.used > 0 { self.sum_sq.value() / n } else { f64::NAN },
            steps_used: self.used,
            steps_excluded: self.excluded,
        }
    }
}

/// Normalized residuals `eta = (dx - D dt) / (s sqrt(dt))` of `ensemble`, using the
/// cell estimates of `report` (which may come from a different ensemble).
pub fn residual_moments(ensemble: &Ensemble, report: &DecompositionReport) -> Result<ResidualMoments> {
    let scale = ensemble.scale;
    if scale.n_q() != report.n_q {
        return Err(Error::Config(format!(
            "report built on n_q = {}, ensemble has n_q = {}",
            report.n_q,
            scale.n_q()
        )));
    }
    let dt = scale.delta_t();
    let sqrt_dt = scale.sqrt_delta_t();
    let nb = report.options.state_bins;
    let index = report.index();
    let bin_of = report.bin_of_step();
    let mut acc = MomentAcc::default();
    let mut stepper = ensemble.stepper()?;
    for &b in &bin_of {
        let tb = &report.time_bins[b];
        let (prev, next) = stepper.advance()?;
        for (&x, &y) in prev.iter().zip(next) {
            let cell = tb
                .state_bin(x, nb)
                .and_then(|j| index[b * nb + j])
                .map(|i| &report.cells[i]);
            match cell.and_then(|c| Some((c.drift_est?, c.vol_est?))) {
                Some((drift, vol)) if vol > 0.0 => acc.add((y - x - drift * dt) / (vol * sqrt_dt)),
                _ => acc.excluded += 1,
            }
        }
    }
    Ok(acc.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueResidualReport {
    pub pooled: ResidualMoments,
    /// `max_p |mean_k eta_pk^2 - 1|` over paths with at least one used step.
    pub max_path_second_moment_dev: f64,
}

/// Residuals computed with the spec's own coefficients, for which `eta = eps`.
pub fn residual_moments_true(ensemble: &Ensemble) -> Result<TrueResidualReport> {
    let scale = ensemble.scale;
    let dt = scale.delta_t();
    let sqrt_dt = scale.sqrt_delta_t();
    let model = ensemble.model()?;
    let p = ensemble.n_paths() as usize;
    let mut acc = MomentAcc::default();
    let mut path_sq = vec![0.0f64; p];
    let mut path_n = vec![0u64; p];
    let mut stepper = ensemble.stepper()?;
    let mut max_before = stepper.running_max().to_vec();
    for k in 0..scale.n_q() {
        let t = scale.time(k);
        max_before.copy_from_slice(stepper.running_max());
        let (prev, next) = stepper.advance()?;
        for i in 0..p {
            let x = prev[i];
            let (b, sigma) = model
                .coefficients_at(t, x, max_before[i])
                .map_err(|source| Error::Eval { t, x, source })?;
            if sigma == 0.0 {
                acc.excluded += 1;
                continue;
            }
            let eta = (next[i] - x - b * dt) / (sigma * sqrt_dt);
            acc.add(eta);
            path_sq[i] += eta * eta;
            path_n[i] += 1;
        }
    }
    let max_dev = path_sq
        .iter()
        .zip(&path_n)
        .filter(|(_, &n)| n > 0)
        .map(|(s, &n)| (s / n as f64 - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(TrueResidualReport {
        pooled: acc.finish(),
        max_path_second_moment_dev: max_dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{InitialCondition, WalkSpec};
    use crate::scale::QuantumScale;
    use crate::walk::simulate_ensemble;

    fn ensemble(b: &str, s: &str, n_q: u64, p: u64, seed: u64) -> Ensemble {
        simulate_ensemble(&WalkSpec::new(b, s).unwrap(), &QuantumScale::new(n_q).unwrap(), seed, p).unwrap()
    }

    #[test]
    fn vol_se_matches_spread_for_two_point_increments() {
        let (n, reps, dt) = (400usize, 2000u64, 1e-3f64);
        let mut vols = Vec::new();
        let mut ses = Vec::new();
        for rep in 0..reps {
            let inc: Vec<f64> = (0..n as u64)
                .map(|k| 0.5 * dt.sqrt() * f64::from(crate::walk::sample_sign(5, rep, k)))
                .collect();
            let mut cell = blank_cell();
            cell_estimates(&mut cell, &inc, dt);
            vols.push(cell.vol_est.unwrap());
            ses.push(cell.vol_se.unwrap());
        }
        let mean = vols.iter().sum::<f64>() / reps as f64;
        let sd = (vols.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        let se = ses.iter().sum::<f64>() / reps as f64;
        // two-point law: s^2 = sigma^2 n / (n - 1) (1 - mean_eps^2), so sd(s) ~ sigma / (sqrt(2) n)
        assert!((sd * n as f64 / (0.5 / 2f64.sqrt()) - 1.0).abs() < 0.1, "sd {sd}");
        assert!(se >= sd && se <= 1.3 * sd, "se {se} vs sd {sd}");
    }

    fn blank_cell() -> Cell {
        Cell {
            time_bin: 0,
            state_bin: 0,
            t_center: 0.0,
            x_lo: 0.0,
            x_hi: 0.0,
            x_center: 0.0,
            count: 0,
            reliable: true,
            drift_est: None,
            drift_se: None,
            vol_est: None,
            vol_se: None,
            residual_mean: None,
            residual_second_moment: None,
        }
    }

    #[test]
    fn pure_drift_recovered_exactly() {
        let e = ensemble("1", "0", 64, 200, 3);
        let r = estimate_decomposition(&e, DecompositionOptions::default()).unwrap();
        assert_eq!(r.reliable_cells, 64);
        for c in &r.cells {
            assert!((c.drift_est.unwrap() - 1.0).abs() < 1e-9);
            assert_eq!(c.vol_est, Some(0.0));
        }
        let m = residual_moments(&e, &r).unwrap();
        assert_eq!(m.steps_used, 0);
        assert_eq!(m.steps_excluded, 64 * 200);
    }

    #[test]
    fn brownian_cells_within_sampling_bounds() {
        // |D| <= 3 (1 / sqrt(dt)) / sqrt(n) and |s - 1| <= 3 / sqrt(n) per cell
        let n_q = 100;
        let e = ensemble("0", "1", n_q, 20_000, 5);
        let opts = DecompositionOptions { state_bins: 8, ..Default::default() };
        let r = estimate_decomposition(&e, opts).unwrap();
        let dt = 1.0 / n_q as f64;
        let mut bad = 0;
        let mut total = 0;
        for c in r.cells.iter().filter(|c| c.reliable) {
            let n = c.count as f64;
            total += 1;
            let d_ok = c.drift_est.unwrap().abs() <= 3.0 / dt.sqrt() / n.sqrt();
            let s_ok = (c.vol_est.unwrap() - 1.0).abs() <= 3.0 * 2f64.sqrt() / (2.0 * n).sqrt();
            if !(d_ok && s_ok) {
                bad += 1;
            }
        }
        assert!(total > 500);
        assert!((bad as f64) < 0.01 * total as f64, "{bad} of {total}");
    }

    #[test]
    fn adding_constant_drift_shifts_estimates() {
        let a = ensemble("0", "1", 50, 2000, 9);
        let b = ensemble("0.5", "1", 50, 2000, 9);
        // one state bin spanning everything: each cell holds the same increments shifted by 0.5 dt
        let opts = DecompositionOptions {
            state_bins: 1,
            lower_quantile: 0.0,
            upper_quantile: 1.0,
            ..Default::default()
        };
        let ra = estimate_decomposition(&a, opts).unwrap();
        let rb = estimate_decomposition(&b, opts).unwrap();
        assert_eq!(ra.cells.len(), 50);
        for (ca, cb) in ra.cells.iter().zip(&rb.cells) {
            let (da, db) = (ca.drift_est.unwrap(), cb.drift_est.unwrap());
            assert!((db - da - 0.5).abs() < 1e-9, "{da} {db}");
            assert!((ca.vol_est.unwrap() - cb.vol_est.unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn true_residuals_are_the_signs() {
        let spec = WalkSpec::with_params("-theta*x", "s", &[("theta", 1.0), ("s", 0.5)])
            .unwrap()
            .with_x0(InitialCondition::Uniform([-1.0, 1.0]))
            .unwrap();
        let e = simulate_ensemble(&spec, &QuantumScale::new(200).unwrap(), 1, 300).unwrap();
        let r = residual_moments_true(&e).unwrap();
        assert!(r.max_path_second_moment_dev < 1e-10);
        assert!(r.pooled.mean_eta.abs() <= 3.0 / (r.pooled.steps_used as f64).sqrt());
    }

    #[test]
    fn out_of_sample_residuals() {
        let fit = ensemble("-x", "0.5", 50, 20_000, 1);
        let fresh = ensemble("-x", "0.5", 50, 20_000, 2);
        let opts = DecompositionOptions { state_bins: 8, ..Default::default() };
        let r = estimate_decomposition(&fit, opts).unwrap();
        let m = residual_moments(&fresh, &r).unwrap();
        assert!(m.mean_eta.abs() < 0.02, "{m:?}");
        assert!((m.second_moment_eta - 1.0).abs() < 0.02, "{m:?}");
    }

    #[test]
    fn too_few_paths() {
        let e = ensemble("0", "1", 16, 50, 0);
        assert!(matches!(
            estimate_decomposition(&e, DecompositionOptions::default()),
            Err(Error::InsufficientData(_))
        ));
    }
}
