//! Micro-macro parareal integration of singularly perturbed fast-slow ODE
//! systems.
//!
//! The crate couples a fine propagator of the full microscopic model with a
//! coarse propagator of its reduced macroscopic model through restriction,
//! lifting and matching operators, and provides the tooling to measure how
//! the parareal iterates converge in the time-scale separation `ε`.
//!
//! Modules, bottom-up:
//! - [`linalg`]: small dense linear algebra and the matrix exponential.
//! - [`systems`]: linear and nonlinear fast-slow model problems.
//! - [`propagators`]: exact and forward-Euler fine/coarse propagators.
//! - [`transfer`]: restriction, lifting and matching operators.
//! - [`engine`]: the parareal iteration (lifting, matching and DAE-coarse variants).
//! - [`analysis`]: error tables, slope fits and bound diagnostics.
//! - [`experiments`]: named scenarios, sweeps and CSV output.
//! - [`verify`]: the invariant suite behind `mmparareal verify`.

pub mod analysis;
mod clock;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod propagators;
pub mod systems;
pub mod transfer;
pub mod verify;

pub use engine::{PararealConfig, PararealRun, Variant};
pub use error::{Error, Result};
pub use systems::{LinearFastSlowSystem, MacroState, MicroState, NonlinearFastSlowSystem, System};
