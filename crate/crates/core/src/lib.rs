//! Pointing control for free-space optical links in weak turbulence.
//!
//! The crate models the received-irradiance channel as a lognormal diffusion,
//! the receiving aperture as a trapped Brownian particle, and combines both
//! into a two-state nonlinear plant. A robust state-feedback gain is found by
//! minimising the disturbance-to-error bound of a linear matrix inequality,
//! then checked on the nonlinear closed loop. Link metrics (outage, power
//! margin, bit-error rate) are provided for comparison of open- and
//! closed-loop scintillation levels.
//!
//! Scalar-generic code is instantiated for `f64` and `f32`; the matrix
//! synthesis works in `f64` only.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aperture;
pub mod channel;
pub mod error;
pub mod linalg;
pub mod lmi;
pub mod metrics;
pub mod noise;
pub mod plant;
pub mod quadrature;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use noise::{NoiseSource, TrajectoryNoise, GENERATOR_ID};
pub use scalar::{q_function, std_normal_cdf, std_normal_pdf, Real};

pub type Turbulence = channel::TurbulenceParams<f64>;
pub type Turbulence32 = channel::TurbulenceParams<f32>;
pub type Aperture = aperture::ApertureParams<f64>;
pub type Aperture32 = aperture::ApertureParams<f32>;
