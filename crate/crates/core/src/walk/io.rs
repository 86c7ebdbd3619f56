use std::io::Write;

use serde::{Deserialize, Serialize};

use super::engine::{Path, PathSummary};
use crate::stats::CompensatedSum;

pub const CSV_HEADER: &str = "t,x,path_id";

/// Write paths as `t,x,path_id` rows, path-major then time-major.
pub fn write_paths_csv<W: Write + ?Sized>(out: &mut W, paths: &[Path]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for p in paths {
        write_path_rows(out, p)?;
    }
    Ok(())
}

pub fn write_path_rows<W: Write + ?Sized>(out: &mut W, path: &Path) -> std::io::Result<()> {
    for (k, x) in path.values.iter().enumerate() {
        writeln!(out, "{},{},{}", path.scale.time(k as u64), x, path.path_id)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalMoments {
    pub mean: f64,
    /// Population variance.
    pub var: f64,
    /// Raw fourth moment `E[x(1)^4]`.
    pub m4: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QvMoments {
    pub mean: f64,
    pub var: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub seed: u64,
    pub n_q: u64,
    #[serde(rename = "P")]
    pub paths: u64,
    pub terminal: TerminalMoments,
    pub qv: QvMoments,
}

impl EnsembleSummary {
    /// Reduce per-path summaries in ascending `path_id` order with compensated sums.
    pub fn from_summaries(seed: u64, n_q: u64, summaries: &[PathSummary]) -> Self {
        let mut sorted: Vec<&PathSummary> = summaries.iter().collect();
        sorted.sort_by_key(|s| s.path_id);
        let n = sorted.len() as f64;

        let mean_of = |f: &dyn Fn(&PathSummary) -> f64| {
            let mut acc = CompensatedSum::new();
            for s in &sorted {
                acc.add(f(s));
            }
            acc.value() / n
        };
        let t_mean = mean_of(&|s| s.terminal);
        let t_var = mean_of(&|s| (s.terminal - t_mean).powi(2));
        let t_m4 = mean_of(&|s| s.terminal.powi(4));
        let q_mean = mean_of(&|s| s.quadratic_variation);
        let q_var = mean_of(&|s| (s.quadratic_variation - q_mean).powi(2));

        Self {
            seed,
            n_q,
            paths: sorted.len() as u64,
            terminal: TerminalMoments {
                mean: t_mean,
                var: t_var,
                m4: t_m4,
            },
            qv: QvMoments {
                mean: q_mean,
                var: q_var,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::WalkSpec;
    use crate::scale::QuantumScale;
    use crate::walk::simulate_ensemble;

    #[test]
    fn csv_layout() {
        let spec = WalkSpec::new("1", "0").unwrap();
        let e = simulate_ensemble(&spec, &QuantumScale::new(2).unwrap(), 0, 2).unwrap();
        let mut buf = Vec::new();
        write_paths_csv(&mut buf, e.paths.as_ref().unwrap()).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,x,path_id\n0,0,0\n0.5,0.5,0\n1,1,0\n0,0,1\n0.5,0.5,1\n1,1,1\n"
        );
    }

    #[test]
    fn summary_field_names() {
        let s = EnsembleSummary::from_summaries(
            3,
            4,
            &[PathSummary { path_id: 0, x0: 0.0, terminal: 2.0, quadratic_variation: 1.0, running_max: 2.0 }],
        );
        let v = serde_json::to_value(s).unwrap();
        assert_eq!(v["P"], 1);
        assert_eq!(v["terminal"]["m4"], 16.0);
        assert_eq!(v["qv"]["var"], 0.0);
        assert_eq!(v["seed"], 3);
        assert_eq!(v["n_q"], 4);
    }

    #[test]
    fn brownian_mean_within_three_sigma() {
        // sd of x(1) is 1, so 3 sd / sqrt(P) = 0.0095 at P = 10^5
        let spec = WalkSpec::new("0", "1").unwrap();
        let e = simulate_ensemble(&spec, &QuantumScale::new(1000).unwrap(), 12, 100_000).unwrap();
        let s = EnsembleSummary::from_summaries(12, 1000, &e.summaries);
        assert!(s.terminal.mean.abs() <= 0.0095, "{}", s.terminal.mean);
        assert!((s.qv.mean - 1.0).abs() < 1e-9);
    }
}
