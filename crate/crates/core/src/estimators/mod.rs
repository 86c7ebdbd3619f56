//! Path-level and ensemble-level estimators.

mod decomposition;
mod equiprob;
mod heisenberg;

pub use decomposition::{
    estimate_decomposition, residual_moments, residual_moments_true, Cell, DecompositionOptions,
    DecompositionReport, ResidualMoments, TimeBin, TrueResidualReport, MIN_PATHS,
};
pub use equiprob::{equiprobability_test, EquiprobabilityReport, DEFAULT_MAX_LAG, MIN_SIGNS};
pub use heisenberg::{
    heisenberg_check, physical_scale_check, ClassCounts, HeisenbergReport, PhysicalScaleConfig,
    PhysicalScaleReport,
};
