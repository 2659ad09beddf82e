//! Security index of discrete-time LTI systems under sparse attacks and
//! unknown disturbances, with residual filters and attack identification.
//!
//! The numerical core is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common cases.

pub mod classify;
pub mod decouple;
pub mod error;
pub mod examples;
pub mod identify;
pub mod index;
pub mod linalg;
pub mod model;
pub mod pencil;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::{Real, Settings, Tolerances};

pub type RealizationF64 = model::Realization<f64>;
pub type RealizationF32 = model::Realization<f32>;
pub type TraceF64 = sim::Trace<f64>;
pub type TraceF32 = sim::Trace<f32>;
pub type AttackPatternF64 = index::AttackPattern<f64>;
pub type AttackPatternF32 = index::AttackPattern<f32>;
pub type SecurityIndexResultF64 = index::SecurityIndexResult<f64>;
pub type SecurityIndexResultF32 = index::SecurityIndexResult<f32>;
pub type ResidualGeneratorF64 = decouple::ResidualGenerator<f64>;
pub type ResidualGeneratorF32 = decouple::ResidualGenerator<f32>;
pub type IdentificationResultF64 = identify::IdentificationResult<f64>;
pub type IdentificationResultF32 = identify::IdentificationResult<f32>;
