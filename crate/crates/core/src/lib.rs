//! Radially symmetric biharmonic nonlinear Schrödinger equation
//! `i ψ_t = Δ² ψ - |ψ|^{2σ} ψ`: ground states, adaptive-grid simulation of
//! collapse and post-processing of the blowup rate.

pub mod analysis;
pub mod asymptotics;
pub mod diagnostics;
pub mod error;
pub mod fd;
pub mod grid;
pub mod precise;
pub mod presets;
pub mod sgr;
pub mod srm;
pub mod stencil;
pub mod timestepper;

pub use error::{BnlsError, Result};
