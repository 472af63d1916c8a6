//! Reconstruction of the full dynamic response of partially instrumented
//! multi-story shear buildings from sparse motion records, and conversion of
//! the resulting inter-story drift estimates into probabilistic
//! post-earthquake performance classifications (IO/LS/CP/C).
//!
//! The crate is organized around the monitoring pipeline:
//!
//! * [`model`] — n-story shear-building model with story-level hysteresis and
//!   a Newmark/Newton time-stepping simulator ([`newmark`]).
//! * [`ground_motion`] — Kanai–Tajimi stochastic ground-motion model:
//!   spectral density, amplitude modulation, realization synthesis, and
//!   ensemble-based calibration of the white-noise intensity.
//! * [`observer`] — the model-based observer (the physical model augmented
//!   with grounded dampers at measured stories, driven by velocity-
//!   proportional corrective forces), its frequency-domain error analysis,
//!   and feedback-gain optimization.
//! * [`placement`] — sensor placement minimizing the displacement-estimation
//!   error under a per-story drift-variance constraint.
//! * [`performance`] — drift statistics, per-story and building-level
//!   exceedance/class probabilities, and the re-occupancy classification.
//! * [`record`] / [`filter`] — time-series container with CSV I/O, and the
//!   zero-phase high-pass filtering used when integrating accelerations to
//!   velocities.
//!
//! # Conventions
//!
//! All quantities are SI (kg, m, s, N). Spectral densities are two-sided in
//! angular frequency: the variance of a stationary signal is the plain
//! integral of its density over `(-inf, inf)` rad/s, with no `1/(2*pi)`
//! factor. White noise of density `S0` therefore has autocorrelation
//! `2*pi*S0*delta(t)`, and a discrete white sequence sampled at `dt` carries
//! a per-sample variance of `2*pi*S0/dt`.

pub mod error;
pub mod filter;
pub mod ground_motion;
pub mod model;
pub mod newmark;
pub mod observer;
pub mod performance;
pub mod placement;
pub mod record;

mod nelder_mead;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
