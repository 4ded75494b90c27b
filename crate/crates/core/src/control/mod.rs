//! Sampling, editing, inversion and enhancement against a personalized model.

mod barycentric;
mod degradation;
mod ops;

pub use barycentric::{hull_membership, sample_alpha, Barycentric, HullCheck, DEFAULT_BETA};
pub use degradation::Degradation;
pub use ops::{
    edit, enhance, enhance_with, invert, pivotal_tune, sample_latent, synthesize, AttributeTargets, Edited,
    PivotConfig, SolveConfig, SolveStart, Solved, Synthesis,
};
