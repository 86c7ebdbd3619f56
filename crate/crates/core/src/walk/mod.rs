//! The infinitesimal random walk `x + b(t, x) dt + sigma(t, x) eps sqrt(dt)` on a
//! finite grid, driven by counter-based `+-1` signs.

mod engine;
mod io;
mod sign;

pub use engine::{
    quadratic_variation, simulate_ensemble, simulate_ensemble_with, simulate_model_path,
    simulate_path, simulate_with_signs, summarize_path, Ensemble, EnsembleOptions,
    EnsembleStepper, Path, PathSummary, WalkModel, DEFAULT_MEMORY_BUDGET,
};
pub use io::{write_path_rows, write_paths_csv, EnsembleSummary, QvMoments, TerminalMoments, CSV_HEADER};
pub use sign::{mix64, sample_sign, PathStream, SignStream};
