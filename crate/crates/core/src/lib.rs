pub mod container;
pub mod control;
pub mod diffnet;
pub mod error;
pub mod latentspace;
pub mod metrics;
pub mod personalize;
pub mod scalar;
pub mod toyface;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type MlpF64 = diffnet::Mlp<f64>;
pub type MlpF32 = diffnet::Mlp<f32>;
pub type AnchorSetF64 = latentspace::AnchorSet<f64>;
pub type AnchorSetF32 = latentspace::AnchorSet<f32>;
pub type DirectionBasisF64 = latentspace::DirectionBasis<f64>;
pub type DirectionBasisF32 = latentspace::DirectionBasis<f32>;
pub type PretrainedF64 = personalize::Pretrained<f64>;
pub type PretrainedF32 = personalize::Pretrained<f32>;
/// The precision the CLI and service run in.
pub type PersonalizedModelF64 = personalize::PersonalizedModel<f64>;
pub type PersonalizedModelF32 = personalize::PersonalizedModel<f32>;
