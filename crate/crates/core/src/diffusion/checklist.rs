use serde::{Deserialize, Serialize};

use crate::coeffs::{probe_bound, Regularity, WalkSpec};
use crate::error::{Error, Result};
use crate::scale::{QuantumScale, TolerancePolicy};
use crate::stats::quantile_select;
use crate::walk::SignStream;

pub const CHECKLIST_GRID: usize = 64;
const X0_QUANTILE: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub t_range: (f64, f64),
    pub x_range: (f64, f64),
}

impl Domain {
    pub fn new(t_range: (f64, f64), x_range: (f64, f64)) -> Result<Self> {
        for (lo, hi) in [t_range, x_range] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("domain range [{lo}, {hi}] must be bounded")));
            }
        }
        Ok(Self { t_range, x_range })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionChecklist {
    pub domain: Domain,
    pub policy: TolerancePolicy,
    /// Both coefficients bounded by `limited_cut` on the domain grid.
    pub s0_class_ok: bool,
    pub sup_b: Option<f64>,
    pub sup_sigma: Option<f64>,
    /// Evaluation failure on the grid, with its location.
    pub s0_error: Option<String>,
    /// First and second divided differences bounded by `limited_cut`.
    pub shadow_smooth_ok: bool,
    pub lipschitz_b: Option<f64>,
    pub lipschitz_sigma: Option<f64>,
    pub d2_b: Option<f64>,
    pub d2_sigma: Option<f64>,
    /// `min sigma >= appreciable_low` on the domain grid.
    pub sigma_positive_ok: bool,
    pub min_sigma: Option<f64>,
    /// Empirical `1 - 1e-6` quantile of `|x0|` is at most `limited_cut`.
    pub x0_limited_ok: bool,
    pub x0_quantile: f64,
    pub x0_draws: u64,
    pub overall: bool,
}

/// The four surrogate conditions, each on a `CHECKLIST_GRID`-point grid of the domain.
pub fn diffusion_checklist(
    spec: &WalkSpec,
    domain: Domain,
    scale: &QuantumScale,
    policy: &TolerancePolicy,
    x0_draws: u64,
    seed: u64,
) -> Result<DiffusionChecklist> {
    policy.validate()?;
    let domain = Domain::new(domain.t_range, domain.x_range)?;
    if x0_draws == 0 {
        return Err(Error::Config("need at least one x0 draw".into()));
    }
    let model = crate::walk::WalkModel::new(spec)?;
    let family = SignStream::new(seed);
    let mut abs_x0: Vec<f64> = (0..x0_draws)
        .map(|id| model.initial_value(&family.path(id), scale).abs())
        .collect();
    let x0_quantile = quantile_select(&mut abs_x0, X0_QUANTILE);

    let coeffs = model.coefficients();
    let probe = |e| probe_bound(e, domain.t_range, domain.x_range, CHECKLIST_GRID);
    let probed: Result<(Regularity, Regularity)> = probe(&coeffs.drift).and_then(|b| Ok((b, probe(&coeffs.volatility)?)));

    let mut out = DiffusionChecklist {
        domain,
        policy: *policy,
        s0_class_ok: false,
        sup_b: None,
        sup_sigma: None,
        s0_error: None,
        shadow_smooth_ok: false,
        lipschitz_b: None,
        lipschitz_sigma: None,
        d2_b: None,
        d2_sigma: None,
        sigma_positive_ok: false,
        min_sigma: None,
        x0_limited_ok: x0_quantile <= policy.limited_cut,
        x0_quantile,
        x0_draws,
        overall: false,
    };
    match probed {
        Ok((b, s)) => {
            let cut = policy.limited_cut;
            out.sup_b = Some(b.sup_abs);
            out.sup_sigma = Some(s.sup_abs);
            out.s0_class_ok = b.sup_abs <= cut && s.sup_abs <= cut;
            out.lipschitz_b = Some(b.lipschitz_est);
            out.lipschitz_sigma = Some(s.lipschitz_est);
            out.d2_b = Some(b.d2_est);
            out.d2_sigma = Some(s.d2_est);
            out.shadow_smooth_ok = [b.lipschitz_est, s.lipschitz_est, b.d2_est, s.d2_est]
                .iter()
                .all(|&v| v <= cut);
            out.min_sigma = Some(s.min_value);
            out.sigma_positive_ok = s.min_value >= policy.appreciable_low;
        }
        Err(Error::Eval { t, x, source }) => {
            out.s0_error = Some(format!("at t = {t}, x = {x}: {source}"));
        }
        Err(e) => return Err(e),
    }
    out.overall = out.s0_class_ok && out.shadow_smooth_ok && out.sigma_positive_ok && out.x0_limited_ok;
    Ok(out)
}
