//! Coupled simulation of two specs on the same sign stream.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::{probe_bound, Coefficients, WalkSpec};
use crate::error::{Error, Result};
use crate::scale::QuantumScale;
use crate::stats::CompensatedSum;
use crate::walk::{PathStream, WalkModel};

/// Grid size used to estimate coefficient gaps and Lipschitz constants.
pub const PROBE_GRID: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub n_q: u64,
    pub paths: u64,
    pub seed: u64,
    /// Sup of `|b_a - b_b|` and `|sigma_a - sigma_b|` over `[0, 1] x visited`.
    pub eta_b: f64,
    pub eta_sigma: f64,
    pub x0_gap: f64,
    pub lipschitz_b: f64,
    pub lipschitz_sigma: f64,
    pub visited: (f64, f64),
    /// `sup_k |x_a(t_k) - x_b(t_k)|` for each path.
    pub sup_path_diff: Vec<f64>,
    pub mean_sup_diff: f64,
    pub max_sup_diff: f64,
    pub rms_terminal_diff: f64,
    /// `(x0_gap + eta_b + eta_sigma) * exp(L_b + L_sigma^2 / 2 + 1)`.
    pub bound_used: f64,
    /// Verdict on the ensemble mean; the pathwise maximum is reported alongside.
    pub pass: bool,
    pub note: String,
}

struct Coupled {
    sup: f64,
    terminal: f64,
    x0_gap: f64,
    lo: f64,
    hi: f64,
}

fn run_coupled<F: FnMut(f64)>(
    a: &WalkModel,
    b: &WalkModel,
    scale: &QuantumScale,
    seed: u64,
    path_id: u64,
    mut visit: F,
) -> Result<Coupled> {
    let stream = PathStream::new(seed, path_id);
    let mut xa = a.initial_value(&stream, scale);
    let mut xb = b.initial_value(&stream, scale);
    let (mut ma, mut mb) = (xa, xb);
    let mut out = Coupled {
        sup: (xa - xb).abs(),
        terminal: 0.0,
        x0_gap: (xa - xb).abs(),
        lo: xa.min(xb),
        hi: xa.max(xb),
    };
    visit(out.sup);
    for k in 0..scale.n_q() {
        let eps = stream.sign_f64(k);
        let fail = |x: f64| move |source| Error::Simulation { path_id, step: k, t: scale.time(k), x, source };
        xa = a.step(scale, k, xa, ma, eps).map_err(fail(xa))?;
        xb = b.step(scale, k, xb, mb, eps).map_err(fail(xb))?;
        ma = ma.max(xa);
        mb = mb.max(xb);
        out.sup = out.sup.max((xa - xb).abs());
        out.lo = out.lo.min(xa.min(xb));
        out.hi = out.hi.max(xa.max(xb));
        visit(out.sup);
    }
    out.terminal = xa - xb;
    Ok(out)
}

/// Running sup `sup_{j <= k} |x_a(t_j) - x_b(t_j)|` for `k = 0..=n_q` along one coupled path.
pub fn coupled_running_sup(
    spec_a: &WalkSpec,
    spec_b: &WalkSpec,
    scale: &QuantumScale,
    seed: u64,
    path_id: u64,
) -> Result<Vec<f64>> {
    let (a, b) = (WalkModel::new(spec_a)?, WalkModel::new(spec_b)?);
    let mut out = Vec::with_capacity(scale.len());
    run_coupled(&a, &b, scale, seed, path_id, |s| out.push(s))?;
    Ok(out)
}

fn sup_gap(ca: &Coefficients, cb: &Coefficients, x_range: (f64, f64)) -> Result<(f64, f64)> {
    let n = PROBE_GRID;
    let (mut eta_b, mut eta_s) = (0.0f64, 0.0f64);
    let (lo, hi) = x_range;
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64;
        for j in 0..n {
            let x = if j + 1 == n { hi } else { lo + (hi - lo) * j as f64 / (n - 1) as f64 };
            let (ba, sa) = ca.eval(t, x).map_err(|source| Error::Eval { t, x, source })?;
            let (bb, sb) = cb.eval(t, x).map_err(|source| Error::Eval { t, x, source })?;
            eta_b = eta_b.max((ba - bb).abs());
            eta_s = eta_s.max((sa - sb).abs());
        }
    }
    Ok((eta_b, eta_s))
}

/// Couple `spec_a` and `spec_b` path by path (same seed, same `path_id`).
pub fn coupled_distance(
    spec_a: &WalkSpec,
    spec_b: &WalkSpec,
    scale: &QuantumScale,
    seed: u64,
    n_paths: u64,
) -> Result<EquivalenceReport> {
    coupled_distance_scaled(spec_a, scale, spec_b, scale, seed, n_paths)
}

/// As [`coupled_distance`], with each spec's scale given separately; they must agree.
pub fn coupled_distance_scaled(
    spec_a: &WalkSpec,
    scale_a: &QuantumScale,
    spec_b: &WalkSpec,
    scale_b: &QuantumScale,
    seed: u64,
    n_paths: u64,
) -> Result<EquivalenceReport> {
    if scale_a != scale_b {
        return Err(Error::Config(format!(
            "coupling needs one scale, got n_q = {} and n_q = {}",
            scale_a.n_q(),
            scale_b.n_q()
        )));
    }
    if n_paths == 0 {
        return Err(Error::Config("need at least one path".into()));
    }
    let scale = *scale_a;
    let (a, b) = (WalkModel::new(spec_a)?, WalkModel::new(spec_b)?);
    let results: Vec<Result<Coupled>> = (0..n_paths)
        .into_par_iter()
        .map(|id| run_coupled(&a, &b, &scale, seed, id, |_| {}))
        .collect();
    let runs: Vec<Coupled> = results.into_iter().collect::<Result<_>>()?;

    let mut sum_sup = CompensatedSum::new();
    let mut sum_sq_term = CompensatedSum::new();
    let (mut lo, mut hi, mut max_sup, mut x0_gap) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, 0.0f64);
    for r in &runs {
        sum_sup.add(r.sup);
        sum_sq_term.add(r.terminal * r.terminal);
        lo = lo.min(r.lo);
        hi = hi.max(r.hi);
        max_sup = max_sup.max(r.sup);
        x0_gap = x0_gap.max(r.x0_gap);
    }
    let p = n_paths as f64;
    let (ca, cb) = (a.coefficients(), b.coefficients());
    let (eta_b, eta_sigma) = sup_gap(ca, cb, (lo, hi))?;
    let probe_x = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let lip = |e| probe_bound(e, (0.0, 1.0), probe_x, PROBE_GRID).map(|r| r.lipschitz_est);
    let lipschitz_b = lip(&ca.drift)?.max(lip(&cb.drift)?);
    let lipschitz_sigma = lip(&ca.volatility)?.max(lip(&cb.volatility)?);
    let bound_used =
        (x0_gap + eta_b + eta_sigma) * (lipschitz_b + lipschitz_sigma * lipschitz_sigma / 2.0 + 1.0).exp();
    let mean_sup_diff = sum_sup.value() / p;
    Ok(EquivalenceReport {
        n_q: scale.n_q(),
        paths: n_paths,
        seed,
        eta_b,
        eta_sigma,
        x0_gap,
        lipschitz_b,
        lipschitz_sigma,
        visited: (lo, hi),
        sup_path_diff: runs.iter().map(|r| r.sup).collect(),
        mean_sup_diff,
        max_sup_diff: max_sup,
        rms_terminal_diff: (sum_sq_term.value() / p).sqrt(),
        bound_used,
        pass: mean_sup_diff <= bound_used,
        note: "verdict on the ensemble-mean sup difference (mean-square form); \
               the +1 in the exponent is a safety margin"
            .into(),
    })
}
