use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sign::{PathStream, SignStream};
use crate::coeffs::{Coefficients, EvalError, InitialCondition, Variant, WalkSpec};
use crate::error::{Error, Result};
use crate::scale::QuantumScale;

/// Default cap on materialized path values (`P * (n_q + 1)`), 256 MiB of f64.
pub const DEFAULT_MEMORY_BUDGET: usize = 1 << 25;

const CHUNK: usize = 2048;

/// A spec compiled for simulation.
#[derive(Debug, Clone)]
pub struct WalkModel {
    coefficients: Coefficients,
    x0: InitialCondition,
    variant: Option<Variant>,
}

impl WalkModel {
    pub fn new(spec: &WalkSpec) -> Result<Self> {
        Ok(Self {
            coefficients: spec.coefficients()?,
            x0: spec.x0(),
            variant: spec.variant(),
        })
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coefficients
    }

    /// `x(0)`. Uniform initial laws draw from step index `n_q`, which no increment uses.
    pub fn initial_value(&self, stream: &PathStream, scale: &QuantumScale) -> f64 {
        match self.x0 {
            InitialCondition::Point(v) => v,
            ic => ic.sample(stream.uniform(scale.n_q())),
        }
    }

    /// Effective `(b, sigma)` at a grid point, given the running maximum so far.
    #[inline]
    pub fn coefficients_at(&self, t: f64, x: f64, running_max: f64) -> Result<(f64, f64), EvalError> {
        let (b, mut sigma) = self.coefficients.eval(t, x)?;
        if let Some(Variant::RunningMax { threshold, boost }) = self.variant {
            if running_max > threshold {
                sigma += boost;
            }
        }
        Ok((b, sigma))
    }

    /// One increment: `x + b dt + sigma eps sqrt(dt)`.
    #[inline]
    pub fn step(
        &self,
        scale: &QuantumScale,
        k: u64,
        x: f64,
        running_max: f64,
        eps: f64,
    ) -> Result<f64, EvalError> {
        let t = scale.time(k);
        let (b, sigma) = self.coefficients_at(t, x, running_max)?;
        let next = x + b * scale.delta_t() + sigma * eps * scale.sqrt_delta_t();
        if next.is_finite() {
            Ok(next)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Walk one path, calling `visit(k, x_k)` for every grid point `k = 0..=n_q`.
    pub fn run<F: FnMut(u64, f64)>(
        &self,
        scale: &QuantumScale,
        seed: u64,
        path_id: u64,
        mut visit: F,
    ) -> Result<()> {
        let stream = PathStream::new(seed, path_id);
        let mut x = self.initial_value(&stream, scale);
        let mut max = x;
        visit(0, x);
        for k in 0..scale.n_q() {
            x = self
                .step(scale, k, x, max, stream.sign_f64(k))
                .map_err(|source| Error::Simulation {
                    path_id,
                    step: k,
                    t: scale.time(k),
                    x,
                    source,
                })?;
            max = max.max(x);
            visit(k + 1, x);
        }
        Ok(())
    }
}

/// One simulated trajectory on the full grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub scale: QuantumScale,
    pub values: Vec<f64>,
    pub path_id: u64,
    pub seed: u64,
}

impl Path {
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("path has n_q + 1 values")
    }

    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }
}

/// Per-path accumulators kept when paths are not materialized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub path_id: u64,
    pub x0: f64,
    pub terminal: f64,
    pub quadratic_variation: f64,
    pub running_max: f64,
}

#[derive(Default)]
struct Accumulator {
    x0: f64,
    prev: f64,
    qv: f64,
    max: f64,
}

impl Accumulator {
    fn visit(&mut self, k: u64, x: f64) {
        if k == 0 {
            self.x0 = x;
            self.max = x;
        } else {
            let d = x - self.prev;
            self.qv += d * d;
            self.max = self.max.max(x);
        }
        self.prev = x;
    }

    fn finish(self, path_id: u64) -> PathSummary {
        PathSummary {
            path_id,
            x0: self.x0,
            terminal: self.prev,
            quadratic_variation: self.qv,
            running_max: self.max,
        }
    }
}

pub fn simulate_path(spec: &WalkSpec, scale: &QuantumScale, seed: u64, path_id: u64) -> Result<Path> {
    let model = WalkModel::new(spec)?;
    simulate_model_path(&model, scale, seed, path_id)
}

pub fn simulate_model_path(
    model: &WalkModel,
    scale: &QuantumScale,
    seed: u64,
    path_id: u64,
) -> Result<Path> {
    let mut values = Vec::with_capacity(scale.len());
    model.run(scale, seed, path_id, |_, x| values.push(x))?;
    Ok(Path {
        scale: *scale,
        values,
        path_id,
        seed,
    })
}

pub fn summarize_path(model: &WalkModel, scale: &QuantumScale, seed: u64, path_id: u64) -> Result<PathSummary> {
    let mut acc = Accumulator::default();
    model.run(scale, seed, path_id, |k, x| acc.visit(k, x))?;
    Ok(acc.finish(path_id))
}

/// Walk driven by explicit signs instead of the counter stream.
pub fn simulate_with_signs(
    spec: &WalkSpec,
    scale: &QuantumScale,
    x0: f64,
    signs: &[i8],
) -> Result<Vec<f64>> {
    if signs.len() as u64 != scale.n_q() {
        return Err(Error::Config(format!(
            "{} signs supplied for n_q = {}",
            signs.len(),
            scale.n_q()
        )));
    }
    let model = WalkModel::new(spec)?;
    let mut values = Vec::with_capacity(scale.len());
    let mut x = x0;
    let mut max = x0;
    values.push(x);
    for (k, &s) in signs.iter().enumerate() {
        let k = k as u64;
        x = model
            .step(scale, k, x, max, f64::from(s))
            .map_err(|source| Error::Simulation { path_id: 0, step: k, t: scale.time(k), x, source })?;
        max = max.max(x);
        values.push(x);
    }
    Ok(values)
}

/// `sum_k (x(t_{k+1}) - x(t_k))^2`.
pub fn quadratic_variation(path: &Path) -> f64 {
    path.increments().map(|d| d * d).sum()
}

/// Ensemble of paths `0..P` sharing a spec, scale and seed.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub spec: WalkSpec,
    pub scale: QuantumScale,
    pub seed: u64,
    /// Full trajectories, present when `P * (n_q + 1)` fits the memory budget.
    pub paths: Option<Vec<Path>>,
    pub summaries: Vec<PathSummary>,
}

impl Ensemble {
    pub fn n_paths(&self) -> u64 {
        self.summaries.len() as u64
    }

    pub fn model(&self) -> Result<WalkModel> {
        WalkModel::new(&self.spec)
    }

    /// Re-walk the ensemble time-major. Values equal those of the stored paths.
    pub fn stepper(&self) -> Result<EnsembleStepper> {
        EnsembleStepper::new(self.model()?, self.scale, self.seed, self.n_paths())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EnsembleOptions {
    pub memory_budget: usize,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

pub fn simulate_ensemble(spec: &WalkSpec, scale: &QuantumScale, seed: u64, n_paths: u64) -> Result<Ensemble> {
    simulate_ensemble_with(spec, scale, seed, n_paths, EnsembleOptions::default())
}

/// First error by path index, so failures do not depend on scheduling.
fn first_error<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

pub fn simulate_ensemble_with(
    spec: &WalkSpec,
    scale: &QuantumScale,
    seed: u64,
    n_paths: u64,
    options: EnsembleOptions,
) -> Result<Ensemble> {
    if n_paths == 0 {
        return Err(Error::Config("ensemble needs at least one path".into()));
    }
    let model = WalkModel::new(spec)?;
    let materialize = (n_paths as u128) * (scale.len() as u128) <= options.memory_budget as u128;
    let (paths, summaries) = if materialize {
        let paths = first_error(
            (0..n_paths)
                .into_par_iter()
                .map(|id| simulate_model_path(&model, scale, seed, id))
                .collect(),
        )?;
        let summaries = paths
            .iter()
            .map(|p| {
                let mut acc = Accumulator::default();
                for (k, &x) in p.values.iter().enumerate() {
                    acc.visit(k as u64, x);
                }
                acc.finish(p.path_id)
            })
            .collect();
        (Some(paths), summaries)
    } else {
        let summaries = first_error(
            (0..n_paths)
                .into_par_iter()
                .map(|id| summarize_path(&model, scale, seed, id))
                .collect(),
        )?;
        (None, summaries)
    };
    Ok(Ensemble {
        spec: spec.clone(),
        scale: *scale,
        seed,
        paths,
        summaries,
    })
}

/// Advances all paths of an ensemble one grid step at a time, holding O(P) state.
pub struct EnsembleStepper {
    model: WalkModel,
    scale: QuantumScale,
    streams: Vec<PathStream>,
    prev: Vec<f64>,
    current: Vec<f64>,
    max: Vec<f64>,
    k: u64,
}

impl EnsembleStepper {
    pub fn new(model: WalkModel, scale: QuantumScale, seed: u64, n_paths: u64) -> Result<Self> {
        if n_paths == 0 {
            return Err(Error::Config("ensemble needs at least one path".into()));
        }
        let family = SignStream::new(seed);
        let streams: Vec<PathStream> = (0..n_paths).map(|id| family.path(id)).collect();
        let current: Vec<f64> = streams.iter().map(|s| model.initial_value(s, &scale)).collect();
        Ok(Self {
            model,
            scale,
            prev: current.clone(),
            max: current.clone(),
            current,
            streams,
            k: 0,
        })
    }

    pub fn scale(&self) -> &QuantumScale {
        &self.scale
    }

    /// Index of the grid point the positions refer to.
    pub fn step_index(&self) -> u64 {
        self.k
    }

    pub fn positions(&self) -> &[f64] {
        &self.current
    }

    pub fn running_max(&self) -> &[f64] {
        &self.max
    }

    /// Advance every path from `t_k` to `t_{k+1}`; returns `(x(t_k), x(t_{k+1}))`.
    pub fn advance(&mut self) -> Result<(&[f64], &[f64])> {
        let k = self.k;
        if k >= self.scale.n_q() {
            return Err(Error::Config("stepper already at the end of the grid".into()));
        }
        std::mem::swap(&mut self.prev, &mut self.current);
        let model = &self.model;
        let scale = &self.scale;
        let failures: Vec<Option<(usize, EvalError)>> = self
            .current
            .par_chunks_mut(CHUNK)
            .zip(self.prev.par_chunks(CHUNK))
            .zip(self.max.par_chunks_mut(CHUNK))
            .zip(self.streams.par_chunks(CHUNK))
            .enumerate()
            .map(|(chunk, (((next, prev), max), streams))| {
                for i in 0..next.len() {
                    match model.step(scale, k, prev[i], max[i], streams[i].sign_f64(k)) {
                        Ok(v) => {
                            next[i] = v;
                            max[i] = max[i].max(v);
                        }
                        Err(e) => return Some((chunk * CHUNK + i, e)),
                    }
                }
                None
            })
            .collect();
        if let Some((i, source)) = failures.into_iter().flatten().next() {
            return Err(Error::Simulation {
                path_id: i as u64,
                step: k,
                t: scale.time(k),
                x: self.prev[i],
                source,
            });
        }
        self.k += 1;
        Ok((&self.prev, &self.current))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scale(n: u64) -> QuantumScale {
        QuantumScale::new(n).unwrap()
    }

    #[test]
    fn constant_drift_is_exact_ode() {
        let spec = WalkSpec::new("1", "0").unwrap();
        for n in [2u64, 4, 8, 1024] {
            let p = simulate_path(&spec, &scale(n), 3, 0).unwrap();
            assert_eq!(p.terminal(), 1.0, "n_q={n}");
            assert_eq!(p.values.len(), n as usize + 1);
        }
    }

    #[test]
    fn prescribed_signs() {
        let spec = WalkSpec::new("0", "1").unwrap();
        let v = simulate_with_signs(&spec, &scale(4), 0.0, &[1, 1, -1, 1]).unwrap();
        assert_eq!(v, vec![0.0, 0.5, 1.0, 0.5, 1.0]);
        assert!(simulate_with_signs(&spec, &scale(4), 0.0, &[1, 1]).is_err());
    }

    #[test]
    fn path_uses_counter_signs() {
        let spec = WalkSpec::new("0", "1").unwrap();
        let s = scale(64);
        let p = simulate_path(&spec, &s, 11, 5).unwrap();
        let stream = PathStream::new(11, 5);
        for (k, d) in p.increments().enumerate() {
            assert_eq!(d, stream.sign_f64(k as u64) * s.sqrt_delta_t());
        }
    }

    #[test]
    fn quadratic_variation_examples() {
        let s = scale(1 << 10);
        let brownian = simulate_path(&WalkSpec::new("0", "1").unwrap(), &s, 1, 0).unwrap();
        assert!((quadratic_variation(&brownian) - 1.0).abs() < 1e-12);
        let line = simulate_path(&WalkSpec::new("1", "0").unwrap(), &s, 1, 0).unwrap();
        assert!((quadratic_variation(&line) - s.delta_t()).abs() < 1e-15);
    }

    #[test]
    fn quadratic_variation_with_drift_and_noise() {
        // (b dt + s eps sqrt(dt))^2 summed: s^2 + b^2 dt + 2 b s dt^{3/2} sum(eps).
        // The cross term has sd 2|b|s dt^{3/2} sqrt(n_q) = 2|b|s dt; allow 3 sd.
        let n = 10_000u64;
        let s = scale(n);
        let spec = WalkSpec::new("2", "1").unwrap();
        let dt = s.delta_t();
        for seed in 0..5 {
            let p = simulate_path(&spec, &s, seed, 0).unwrap();
            let qv = quadratic_variation(&p);
            let cross_bound = 3.0 * 2.0 * 2.0 * 1.0 * dt;
            assert!((qv - (1.0 + 4.0 * dt)).abs() <= cross_bound + 1e-9, "{qv}");
        }
    }

    #[test]
    fn simulation_error_reports_location() {
        let spec = WalkSpec::new("1/(t - 0.5)", "0").unwrap();
        match simulate_path(&spec, &scale(4), 0, 9) {
            Err(Error::Simulation { path_id: 9, step: 2, t, x, source }) => {
                assert_eq!(t, 0.5);
                assert_eq!(x, -1.5);
                assert_eq!(source, EvalError::DivisionByZero);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn uniform_initial_condition_is_deterministic_and_in_range() {
        let spec = WalkSpec::new("0", "1")
            .unwrap()
            .with_x0(InitialCondition::Uniform([2.0, 3.0]))
            .unwrap();
        let s = scale(16);
        let a = simulate_path(&spec, &s, 4, 2).unwrap();
        let b = simulate_path(&spec, &s, 4, 2).unwrap();
        assert_eq!(a, b);
        assert!((2.0..3.0).contains(&a.values[0]));
        assert_eq!(a.values[0], 2.0 + PathStream::new(4, 2).uniform(16));
    }

    #[test]
    fn single_path_ensemble_matches_path() {
        let spec = WalkSpec::new("-x", "0.5").unwrap();
        let s = scale(128);
        let e = simulate_ensemble(&spec, &s, 77, 1).unwrap();
        assert_eq!(e.paths.as_ref().unwrap()[0], simulate_path(&spec, &s, 77, 0).unwrap());
    }

    #[test]
    fn ensembles_are_deterministic_and_streaming_agrees() {
        let spec = WalkSpec::new("-x", "0.5").unwrap();
        let s = scale(256);
        let a = simulate_ensemble(&spec, &s, 5, 50).unwrap();
        let b = simulate_ensemble(&spec, &s, 5, 50).unwrap();
        assert_eq!(a.paths, b.paths);
        let streamed =
            simulate_ensemble_with(&spec, &s, 5, 50, EnsembleOptions { memory_budget: 10 }).unwrap();
        assert!(streamed.paths.is_none());
        assert_eq!(streamed.summaries, a.summaries);
        let paths = a.paths.unwrap();
        for (p, sum) in paths.iter().zip(&a.summaries) {
            assert_eq!(quadratic_variation(p).to_bits(), sum.quadratic_variation.to_bits());
        }
    }

    #[test]
    fn stepper_reproduces_paths() {
        let spec = WalkSpec::new("-x", "0.5 + 0.1*sin(x)")
            .unwrap()
            .with_x0(InitialCondition::Uniform([-1.0, 1.0]))
            .unwrap();
        let s = scale(64);
        let e = simulate_ensemble(&spec, &s, 8, 5000).unwrap();
        let paths = e.paths.as_ref().unwrap();
        let mut st = e.stepper().unwrap();
        for (i, p) in paths.iter().enumerate() {
            assert_eq!(st.positions()[i], p.values[0]);
        }
        for k in 0..64usize {
            let (prev, next) = st.advance().unwrap();
            for (i, p) in paths.iter().enumerate() {
                assert_eq!(prev[i].to_bits(), p.values[k].to_bits());
                assert_eq!(next[i].to_bits(), p.values[k + 1].to_bits());
            }
        }
        assert!(st.advance().is_err());
    }

    #[test]
    fn ensemble_error_is_first_failing_path() {
        // x0 uniform on [0, 1]: paths whose x0 lands below 0.5 hit sqrt of a negative.
        let spec = WalkSpec::new("sqrt(x - 0.5)", "0")
            .unwrap()
            .with_x0(InitialCondition::Uniform([0.0, 1.0]))
            .unwrap();
        let s = scale(8);
        let first_bad = (0..100u64)
            .find(|&id| PathStream::new(1, id).uniform(8) < 0.5)
            .unwrap();
        match simulate_ensemble(&spec, &s, 1, 100) {
            Err(Error::Simulation { path_id, .. }) => assert_eq!(path_id, first_bad),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn running_max_variant_boosts_volatility() {
        let spec = WalkSpec::new("1", "0")
            .unwrap()
            .with_variant(Variant::RunningMax { threshold: 0.5, boost: 1.0 })
            .unwrap();
        let model = WalkModel::new(&spec).unwrap();
        assert_eq!(model.coefficients_at(0.0, 0.0, 0.4).unwrap(), (1.0, 0.0));
        assert_eq!(model.coefficients_at(0.0, 0.0, 0.6).unwrap(), (1.0, 1.0));
    }
}
