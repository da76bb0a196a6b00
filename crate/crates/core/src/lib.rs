//! Simulation and analysis of light storage by a controlled homogeneous
//! splitting: a weak probe travels between two absorption lines split by Δ,
//! is slowed down, and is parked in the atomic coherences when Δ is switched
//! to zero.
//!
//! * [`model`]: parameters, schedules, pulses and the normalized unit system.
//! * [`spectral`]: susceptibility, delays, mixing angle and the dark state.
//! * [`mb_solver`]: time-domain Maxwell-Bloch integration.
//! * [`metrics`]: fidelity, delay and energy bookkeeping.
//! * [`sweep`]: heatmaps, splitting optimization and scaling fits.

pub mod error;
pub mod estimate;
pub mod mb_solver;
pub mod metrics;
pub mod model;
pub mod search;
pub mod spectral;
pub mod sweep;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
