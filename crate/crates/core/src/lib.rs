//! Interference modeling and mitigation designs for network-level integrated
//! sensing and communication.
//!
//! Numeric modules are generic over [`Scalar`] (`f32` or `f64`); the
//! experiment drivers and the aliases below fix `f64`.

pub mod config;
pub mod error;
pub mod experiments;
pub mod interference;
pub mod linalg;
pub mod metrics;
pub mod output;
pub mod scalar;
pub mod scene;
pub mod solvers;
pub mod techniques;

pub use error::{IsacError, Result};
pub use scalar::{Cplx, Scalar};

pub type ChannelSet64 = scene::ChannelSet<f64>;
pub type BeamPlan64 = interference::BeamPlan<f64>;
pub type CMat64 = linalg::CMat<f64>;
pub type CVec64 = linalg::CVec<f64>;
