//! Diffusion regularity checklist, weak convergence against closed-form
//! references, and the spatial fractal dimension of sample paths.

mod checklist;
mod fractal;
mod weak;

pub use checklist::{diffusion_checklist, DiffusionChecklist, Domain, CHECKLIST_GRID};
pub use fractal::{
    count_crossings, fractal_dimension, fractal_dimension_streaming, CrossingCounter, DimensionReport,
    DimensionRung, LambdaLadder, FLOOR_STEPS, MIN_CROSSINGS, MIN_RANGE_RATIO, MIN_RUNGS,
};
pub use weak::{weak_convergence_test, DiscreteMoments, ReferenceLaw, RungReport, WeakConvergenceReport};
