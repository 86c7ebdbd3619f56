use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::coeffs::{InitialCondition, WalkSpec};
use crate::error::{Error, Result};
use crate::scale::QuantumScale;
use crate::stats::{ks_distance_sorted, std_normal_cdf, CompensatedSum};
use crate::walk::simulate_ensemble;

/// Two-sided 95% Kolmogorov-Smirnov critical value, times `1 / sqrt(P)`.
const KS_MC_CONSTANT: f64 = 1.95;
/// Berry-Esseen constant for sums of iid Rademacher variables.
const BERRY_ESSEEN: f64 = 0.4748;

/// Closed-form reference diffusions started from a point `x0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceLaw {
    /// `dx = sigma0 dW`.
    Brownian { sigma0: f64 },
    /// `dx = -theta x dt + sigma0 dW`.
    Ou { theta: f64, sigma0: f64 },
}

impl FromStr for ReferenceLaw {
    type Err = Error;

    /// `brownian:SIGMA0` or `ou:THETA:SIGMA0`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("reference `{s}`: expected brownian:SIGMA0 or ou:THETA:SIGMA0"));
        let parts: Vec<&str> = s.split(':').collect();
        let num = |v: &str| v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(bad);
        let law = match parts.as_slice() {
            ["brownian", s0] => ReferenceLaw::Brownian { sigma0: num(s0)? },
            ["ou", th, s0] => ReferenceLaw::Ou { theta: num(th)?, sigma0: num(s0)? },
            _ => return Err(bad()),
        };
        law.validate()?;
        Ok(law)
    }
}

/// Exact mean, variance and fourth central moment of the walk at `t = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMoments {
    pub mean: f64,
    pub var: f64,
    pub m4: f64,
}

impl ReferenceLaw {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ReferenceLaw::Brownian { sigma0 } => sigma0 > 0.0,
            ReferenceLaw::Ou { theta, sigma0 } => sigma0 > 0.0 && theta.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("reference {self:?} needs sigma0 > 0")))
        }
    }

    pub fn sigma0(&self) -> f64 {
        match *self {
            ReferenceLaw::Brownian { sigma0 } | ReferenceLaw::Ou { sigma0, .. } => sigma0,
        }
    }

    pub fn mean(&self, t: f64, x0: f64) -> f64 {
        match *self {
            ReferenceLaw::Brownian { .. } => x0,
            ReferenceLaw::Ou { theta, .. } => x0 * (-theta * t).exp(),
        }
    }

    pub fn variance(&self, t: f64) -> f64 {
        match *self {
            ReferenceLaw::Brownian { sigma0 } => sigma0 * sigma0 * t,
            ReferenceLaw::Ou { theta: 0.0, sigma0 } => sigma0 * sigma0 * t,
            ReferenceLaw::Ou { theta, sigma0 } => sigma0 * sigma0 * (1.0 - (-2.0 * theta * t).exp()) / (2.0 * theta),
        }
    }

    /// CDF of `x(1)` under the reference diffusion.
    pub fn terminal_cdf(&self, x0: f64, x: f64) -> f64 {
        std_normal_cdf((x - self.mean(1.0, x0)) / self.variance(1.0).sqrt())
    }

    /// Moments of the walk itself (not the diffusion) at `t = 1`, by exact recursion.
    pub fn discrete_moments(&self, scale: &QuantumScale, x0: f64) -> DiscreteMoments {
        let dt = scale.delta_t();
        match *self {
            ReferenceLaw::Brownian { sigma0 } => {
                let s2 = sigma0 * sigma0;
                DiscreteMoments { mean: x0, var: s2, m4: s2 * s2 * (3.0 - 2.0 * dt) }
            }
            ReferenceLaw::Ou { theta, sigma0 } => {
                let a = 1.0 - theta * dt;
                let c2 = sigma0 * sigma0 * dt;
                let (mut m1, mut v, mut m4) = (x0, 0.0f64, 0.0f64);
                for _ in 0..scale.n_q() {
                    m1 *= a;
                    m4 = a.powi(4) * m4 + 6.0 * a * a * c2 * v + c2 * c2;
                    v = a * a * v + c2;
                }
                DiscreteMoments { mean: m1, var: v, m4 }
            }
        }
    }

    /// Check that `spec` is the walk of this reference law and return its `x0`.
    pub fn matches(&self, spec: &WalkSpec) -> Result<f64> {
        let x0 = match spec.x0() {
            InitialCondition::Point(v) => v,
            other => return Err(Error::Config(format!("reference laws need a point x0, spec has {other:?}"))),
        };
        if spec.variant().is_some() {
            return Err(Error::Config("reference laws do not cover spec variants".into()));
        }
        let c = spec.coefficients()?;
        let mismatch = |what: &str| Error::Config(format!("spec {what} does not match reference {self:?}"));
        if c.volatility.constant() != Some(self.sigma0()) {
            return Err(mismatch("volatility"));
        }
        match *self {
            ReferenceLaw::Brownian { .. } => {
                if c.drift.constant() != Some(0.0) {
                    return Err(mismatch("drift"));
                }
            }
            ReferenceLaw::Ou { theta, .. } => {
                for t in [0.0, 0.37, 1.0] {
                    for x in [-3.0, -1.0, 0.0, 0.5, 2.0] {
                        let b = c.drift.eval(t, x).map_err(|_| mismatch("drift"))?;
                        if (b + theta * x).abs() > 1e-12 * (1.0 + (theta * x).abs()) {
                            return Err(mismatch("drift"));
                        }
                    }
                }
            }
        }
        Ok(x0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungReport {
    pub n_q: u64,
    /// KS distance used for the verdict: continuity-corrected at lattice
    /// midpoints for Brownian references, plain otherwise.
    pub ks_stat: f64,
    pub ks_tol: f64,
    /// Plain KS distance between the empirical CDF and the reference CDF.
    pub ks_naive: f64,
    pub ks_naive_tol: f64,
    /// Distance between the exact walk law and the reference, with no sampling
    /// error: plain for `lattice_floor`, corrected for `lattice_corrected`.
    pub lattice_floor: Option<f64>,
    pub lattice_corrected: Option<f64>,
    pub exact: DiscreteMoments,
    pub mean: f64,
    pub mean_err: f64,
    pub mean_se: f64,
    pub var: f64,
    pub var_err: f64,
    pub var_se: f64,
    pub m4: f64,
    pub m4_err: f64,
    pub m4_se: f64,
    pub moments_ok: bool,
    pub ks_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakConvergenceReport {
    pub reference: ReferenceLaw,
    pub paths: u64,
    pub seed: u64,
    pub alpha: f64,
    pub rungs: Vec<RungReport>,
    /// `ks_naive` never grows along the ladder, except within the next rung's tolerance.
    pub ks_shrinks: bool,
    pub ks_strictly_decreasing: bool,
    pub pass: bool,
    pub note: String,
}

fn ln_binomial_pmf(n: u64, j: u64) -> f64 {
    let nf = n as f64;
    ln_gamma(nf + 1.0) - ln_gamma(j as f64 + 1.0) - ln_gamma((n - j) as f64 + 1.0) - nf * std::f64::consts::LN_2
}

/// Exact plain and midpoint-corrected KS distances between the symmetric binomial
/// lattice law of a Brownian walk and its normal limit.
fn binomial_normal_distance(n: u64) -> (f64, f64) {
    let sqrt_n = (n as f64).sqrt();
    let (mut naive, mut corrected) = (0.0f64, 0.0f64);
    let mut below = 0.0;
    for j in 0..=n {
        let z = (2.0 * j as f64 - n as f64) / sqrt_n;
        let phi = std_normal_cdf(z);
        let p = ln_binomial_pmf(n, j).exp();
        naive = naive.max((below - phi).abs()).max((below + p - phi).abs());
        below += p;
        if j < n {
            let mid = (2.0 * j as f64 + 1.0 - n as f64) / sqrt_n;
            corrected = corrected.max((below - std_normal_cdf(mid)).abs());
        }
    }
    (naive, corrected)
}

/// Largest gap between the empirical CDF at the midpoints between lattice atoms
/// `x0 + sigma0 sqrt(dt) (2j - n)` and the reference CDF there.
fn midpoint_ks(sorted: &[f64], n: u64, x0: f64, sigma0: f64, sqrt_dt: f64) -> f64 {
    let p = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for j in 0..n {
        let mid = x0 + sigma0 * sqrt_dt * (2.0 * j as f64 + 1.0 - n as f64);
        let below = sorted.partition_point(|&v| v < mid) as f64 / p;
        d = d.max((below - std_normal_cdf((mid - x0) / sigma0)).abs());
    }
    d
}

/// Terminal law along a ladder of scales versus a closed-form reference diffusion.
pub fn weak_convergence_test(
    spec: &WalkSpec,
    reference: ReferenceLaw,
    nq_ladder: &[u64],
    n_paths: u64,
    seed: u64,
    alpha: f64,
) -> Result<WeakConvergenceReport> {
    reference.validate()?;
    let x0 = reference.matches(spec)?;
    if nq_ladder.is_empty() {
        return Err(Error::Config("empty n_q ladder".into()));
    }
    if n_paths < 2 {
        return Err(Error::InsufficientData(format!("{n_paths} paths")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let p = n_paths as f64;
    let mc = KS_MC_CONSTANT / p.sqrt();
    let mut rungs = Vec::with_capacity(nq_ladder.len());
    for &n_q in nq_ladder {
        let scale = QuantumScale::new(n_q)?;
        let ensemble = simulate_ensemble(spec, &scale, seed, n_paths)?;
        let mut terminal: Vec<f64> = ensemble.summaries.iter().map(|s| s.terminal).collect();
        let exact = reference.discrete_moments(&scale, x0);

        let (mut s1, mut s2, mut s4, mut s8) =
            (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
        for &x in &terminal {
            let d = x - exact.mean;
            let d2 = d * d;
            s1.add(x);
            s2.add(d2);
            s4.add(d2 * d2);
            s8.add(d2 * d2 * d2 * d2);
        }
        let mean = s1.value() / p;
        let var = s2.value() / p;
        let m4 = s4.value() / p;
        let m8 = s8.value() / p;
        let mean_se = (exact.var / p).sqrt();
        let var_se = ((exact.m4 - exact.var * exact.var).max(0.0) / p).sqrt();
        let m4_se = ((m8 - m4 * m4).max(0.0) / p).sqrt();
        let (mean_err, var_err, m4_err) = (mean - exact.mean, var - exact.var, m4 - exact.m4);
        let within = |err: f64, se: f64| err.abs() <= 3.0 * se || err.abs() <= 1e-12 * (1.0 + se);
        let moments_ok = within(mean_err, mean_se) && within(var_err, var_se) && within(m4_err, m4_se);

        terminal.sort_by(f64::total_cmp);
        let ks_naive = ks_distance_sorted(&terminal, |x| reference.terminal_cdf(x0, x));
        let rung = match reference {
            ReferenceLaw::Brownian { sigma0 } => {
                let (floor, corrected) = binomial_normal_distance(n_q);
                let ks_stat = midpoint_ks(&terminal, n_q, x0, sigma0, scale.sqrt_delta_t());
                RungReport {
                    n_q,
                    ks_stat,
                    ks_tol: mc + corrected,
                    ks_naive,
                    ks_naive_tol: mc + floor,
                    lattice_floor: Some(floor),
                    lattice_corrected: Some(corrected),
                    exact,
                    mean,
                    mean_err,
                    mean_se,
                    var,
                    var_err,
                    var_se,
                    m4,
                    m4_err,
                    m4_se,
                    moments_ok,
                    ks_ok: ks_stat <= mc + corrected,
                }
            }
            ReferenceLaw::Ou { .. } => {
                let tol = mc + BERRY_ESSEEN / (n_q as f64).sqrt();
                RungReport {
                    n_q,
                    ks_stat: ks_naive,
                    ks_tol: tol,
                    ks_naive,
                    ks_naive_tol: tol,
                    lattice_floor: None,
                    lattice_corrected: None,
                    exact,
                    mean,
                    mean_err,
                    mean_se,
                    var,
                    var_err,
                    var_se,
                    m4,
                    m4_err,
                    m4_se,
                    moments_ok,
                    ks_ok: ks_naive <= tol,
                }
            }
        };
        rungs.push(rung);
    }
    let ks_shrinks = rungs
        .windows(2)
        .all(|w| w[1].ks_naive <= w[0].ks_naive.max(w[1].ks_naive_tol));
    let ks_strictly_decreasing = rungs.windows(2).all(|w| w[1].ks_naive < w[0].ks_naive);
    let last = rungs.last().expect("non-empty ladder");
    let pass = ks_shrinks && last.ks_ok && rungs.iter().all(|r| r.moments_ok);
    Ok(WeakConvergenceReport {
        reference,
        paths: n_paths,
        seed,
        alpha,
        rungs,
        ks_shrinks,
        ks_strictly_decreasing,
        pass,
        note: "moment errors are against the exact moments of the walk; Brownian ks_stat compares \
               CDFs at midpoints between lattice atoms, ks_naive keeps the lattice floor"
            .into(),
    })
}
