#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Simulation and spectral analysis of magnonic frequency combs in a
//! driven cavity magnomechanical system with dissipative magnon-photon
//! coupling.
//!
//! The pipeline is [`integrator::integrate`] → [`spectral::power_spectrum`]
//! → [`spectral::analyze_comb`], with [`analysis::run_sweep`] repeating it
//! over a grid of coupling strengths.

pub mod analysis;
pub mod config;
pub mod error;
pub mod integrator;
pub mod io;
pub mod model;
pub mod spectral;

pub use config::RunConfig;
pub use error::{ConfigError, IntegrationError, IoError, ModelError, SpectralError};
pub use integrator::{integrate, IntegrationConfig, Method, Trajectory};
pub use model::{ModeState, PhysicalParams, ScaledParams};
pub use spectral::{CombAnalysis, CombTooth, Spectrum, Window};
