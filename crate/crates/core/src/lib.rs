//! Dynamic state and parameter estimation for a third-order flux-decay
//! synchronous generator observed through a noisy PMU.
//!
//! The crate is organised as a pipeline:
//!
//! * [`dynamics`] simulates the ground-truth machine (flux-decay model, AVR/PSS,
//!   SMIB or Kron-reduced network) with a fixed-step RK4 integrator.
//! * [`pmu`] turns terminal quantities into bounded-noise PMU samples.
//! * [`algobs`] inverts the stator algebraic equation to recover the rotor angle
//!   and the q-axis transient voltage from a single sample.
//! * [`adapobs`] runs the DREM-based adaptive observer for the speed deviation and
//!   the lumped parameters `a1 = ws*D/(2H)`, `a2 = ws/(2H)`.
//! * [`analysis`] computes analytic noise bounds, persistence-of-excitation
//!   metrics and empirical boundedness statistics.
//! * [`runner`] wires everything together behind scenario configs and writes
//!   CSV / JSON artifacts.

pub mod adapobs;
pub mod algobs;
pub mod analysis;
pub mod dynamics;
mod error;
pub mod pmu;
pub mod runner;

pub use error::{Error, Result};
