//! Restriction, lifting and matching between the microscopic and the
//! macroscopic descriptions.

use std::fmt;
use std::sync::Arc;

use crate::systems::{MacroState, MicroState, System};

/// Restriction `R u = x`.
pub fn restrict(u: &MicroState) -> MacroState {
    MacroState::new(u.slow().to_vec())
}

/// Complement `R⊥ u = y`, so that `u = (R u, R⊥ u)`.
pub fn complement(u: &MicroState) -> Vec<f64> {
    u.fast().to_vec()
}

/// A matching operator `P(X, v)`: a micro state whose restriction is `X`
/// that stays as close to `v` as the operator allows. Implementations must
/// satisfy `R P(X, v) = X`, `P(R u, u) = u`, and be Lipschitz in both
/// arguments.
pub trait Matching: Send + Sync {
    fn apply(&self, x: &MacroState, v: &MicroState) -> MicroState;
}

/// `P(X, v) = (X, R⊥ v)`: impose the slow block, keep the fast block.
#[derive(Debug, Clone, Copy, Default)]
pub struct KeepFastMatching;

impl Matching for KeepFastMatching {
    fn apply(&self, x: &MacroState, v: &MicroState) -> MicroState {
        debug_assert_eq!(x.dim(), v.slow_dim());
        MicroState::new(x.as_slice(), v.fast())
    }
}

/// Transfer operators bound to one system.
#[derive(Clone)]
pub struct TransferSet {
    system: System,
    matching: Arc<dyn Matching>,
}

impl fmt::Debug for TransferSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransferSet")
            .field("system", &self.system)
            .finish_non_exhaustive()
    }
}

impl TransferSet {
    pub fn new(system: System) -> Self {
        TransferSet {
            system,
            matching: Arc::new(KeepFastMatching),
        }
    }

    /// Swaps in another matching operator.
    pub fn with_matching(mut self, matching: Arc<dyn Matching>) -> Self {
        self.matching = matching;
        self
    }

    pub fn system(&self) -> &System {
        &self.system
    }

    pub fn restrict(&self, u: &MicroState) -> MacroState {
        restrict(u)
    }

    pub fn complement(&self, u: &MicroState) -> Vec<f64> {
        complement(u)
    }

    /// Lifting `L(X)`; lands on the slow manifold for the linear systems.
    pub fn lift(&self, x: &MacroState) -> MicroState {
        self.system.lift(x)
    }

    pub fn matching(&self, x: &MacroState, v: &MicroState) -> MicroState {
        self.matching.apply(x, v)
    }
}
