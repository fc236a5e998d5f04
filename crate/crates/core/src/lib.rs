//! Simulation and analysis of teleporting an atomic state between two
//! optical cavities.
//!
//! Two three-level atoms (`f`, `g`, `e`) sit in separate single-mode
//! cavities whose output ports are mixed on a beam splitter in front of two
//! photodetectors. The protocol runs two interaction-detection cycles and
//! post-selects on exactly one click per cycle. This crate provides:
//!
//! * [`hilbert`]: state vectors and operators on the 36-dimensional
//!   composite basis (two atoms, two cavity modes truncated at one photon).
//! * [`dynamics`]: the no-detection (conditional) evolution, its closed-form
//!   damped vacuum-Rabi solution, and the jump channels.
//! * [`pulses`]: the instantaneous single-atom transformations and the Raman
//!   drive model.
//! * [`protocol`]: the state machine producing conditional checkpoint states
//!   and per-pattern outcomes.
//! * [`analysis`]: closed-form success probability, mistimed fidelity and the
//!   timing budget.
//! * [`trajectory`]: a quantum-jump Monte-Carlo sampler with imperfect
//!   detection, used to check the closed forms empirically.
//!
//! Rates are angular frequencies in rad/μs; times are in μs.

pub mod analysis;
pub mod dynamics;
mod error;
pub mod hilbert;
pub mod par;
pub mod protocol;
pub mod pulses;
mod quad;
pub mod trajectory;

pub use error::{Error, Result};

/// Absolute tolerance for algebraic identities on the composite space.
pub const EPS_NUM: f64 = 1e-10;
