//! Time-advance maps over one parareal interval `Δt`: the fine microscopic
//! propagator `F_Δt` and the coarse macroscopic propagator `C_Δt`.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::systems::{LinearFastSlowSystem, MacroState, MicroState, System};

/// Common contract of fine and coarse propagators.
pub trait Propagator: Send + Sync {
    type State;

    /// Advances `state` over one interval of length [`Propagator::dt`].
    fn step(&self, state: &Self::State) -> Result<Self::State>;

    fn dt(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MicroKind {
    ExactLinear,
    ForwardEuler,
}

#[derive(Debug, Clone)]
enum MicroScheme {
    Exact { phi: Matrix },
    Euler { substeps: usize, delta_t: f64 },
}

/// Fine propagator `F_Δt` of the full microscopic model.
#[derive(Debug, Clone)]
pub struct MicroPropagator {
    system: System,
    dt: f64,
    scheme: MicroScheme,
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("time step must be > 0, got {dt}")))
    }
}

/// Number of `delta_t` substeps in `dt`, when that ratio is integral.
pub fn substep_count(dt: f64, delta_t: f64) -> Result<usize> {
    check_dt(dt)?;
    check_dt(delta_t)?;
    let ratio = dt / delta_t;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::InvalidConfig(format!(
            "interval {dt} is not an integer multiple of substep {delta_t}"
        )));
    }
    Ok(n as usize)
}

impl MicroPropagator {
    /// Exact propagator `Φ_Δt = exp(B^ε Δt)`, computed once.
    pub fn exact(system: &LinearFastSlowSystem, dt: f64) -> Result<Self> {
        check_dt(dt)?;
        let phi = linalg::mat_exp(&system.generator().scaled(dt))?;
        Ok(MicroPropagator {
            system: System::Linear(system.clone()),
            dt,
            scheme: MicroScheme::Exact { phi },
        })
    }

    /// `Δt/δt` explicit Euler substeps of the full microscopic vector field.
    pub fn forward_euler(system: System, dt: f64, delta_t: f64) -> Result<Self> {
        let substeps = substep_count(dt, delta_t)?;
        Ok(MicroPropagator {
            system,
            dt,
            scheme: MicroScheme::Euler {
                substeps,
                delta_t: dt / substeps as f64,
            },
        })
    }

    pub fn kind(&self) -> MicroKind {
        match self.scheme {
            MicroScheme::Exact { .. } => MicroKind::ExactLinear,
            MicroScheme::Euler { .. } => MicroKind::ForwardEuler,
        }
    }

    pub fn system(&self) -> &System {
        &self.system
    }

    /// Cached `exp(B^ε Δt)` for the exact kind.
    pub fn transition_matrix(&self) -> Option<&Matrix> {
        match &self.scheme {
            MicroScheme::Exact { phi } => Some(phi),
            MicroScheme::Euler { .. } => None,
        }
    }

    /// Euler substep `δt` actually used, if any.
    pub fn substep(&self) -> Option<f64> {
        match self.scheme {
            MicroScheme::Euler { delta_t, .. } => Some(delta_t),
            MicroScheme::Exact { .. } => None,
        }
    }

    /// Sequential fine trajectory `[u0, F(u0), …, F^N(u0)]`.
    pub fn reference_trajectory(&self, u0: &MicroState, steps: usize) -> Result<Vec<MicroState>> {
        let mut out = Vec::with_capacity(steps + 1);
        out.push(u0.clone());
        for n in 0..steps {
            let next = self.step(&out[n])?;
            out.push(next);
        }
        Ok(out)
    }
}

/// Substeps between finiteness checks during long Euler runs.
const EULER_CHECK_EVERY: usize = 4096;

impl Propagator for MicroPropagator {
    type State = MicroState;

    fn step(&self, u: &MicroState) -> Result<MicroState> {
        if u.dim() != self.system.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.system.dim(),
                got: u.dim(),
            });
        }
        if !u.is_finite() {
            return Err(Error::NonFinite("micro step input"));
        }
        let next = match &self.scheme {
            MicroScheme::Exact { phi } => {
                MicroState::from_flat(phi.mul_vec(u.as_slice()), u.slow_dim())
            }
            MicroScheme::Euler { substeps, delta_t } => {
                let mut state = u.as_slice().to_vec();
                let mut rate = vec![0.0; state.len()];
                for i in 0..*substeps {
                    self.system.micro_rhs(&state, &mut rate);
                    for (s, r) in state.iter_mut().zip(&rate) {
                        *s += delta_t * r;
                    }
                    if i % EULER_CHECK_EVERY == EULER_CHECK_EVERY - 1
                        && !state.iter().all(|v| v.is_finite())
                    {
                        return Err(Error::NonFinite("forward Euler micro substep"));
                    }
                }
                MicroState::from_flat(state, u.slow_dim())
            }
        };
        if !next.is_finite() {
            return Err(Error::NonFinite("micro step"));
        }
        Ok(next)
    }

    fn dt(&self) -> f64 {
        self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MacroKind {
    ExactLinear,
    ForwardEulerSingleStep,
}

#[derive(Debug, Clone)]
enum MacroScheme {
    Exact { rho: f64 },
    Euler,
}

/// Coarse propagator `C_Δt` of the reduced macroscopic model.
#[derive(Debug, Clone)]
pub struct MacroPropagator {
    system: System,
    dt: f64,
    scheme: MacroScheme,
}

impl MacroPropagator {
    /// Exact linear propagator `ρ_Δt = exp(λΔt)`.
    pub fn exact(system: &LinearFastSlowSystem, dt: f64) -> Result<Self> {
        check_dt(dt)?;
        Ok(MacroPropagator {
            system: System::Linear(system.clone()),
            dt,
            scheme: MacroScheme::Exact {
                rho: (system.macro_rate() * dt).exp(),
            },
        })
    }

    /// A single forward Euler step of size `Δt` on the macroscopic model.
    pub fn forward_euler(system: System, dt: f64) -> Result<Self> {
        check_dt(dt)?;
        Ok(MacroPropagator {
            system,
            dt,
            scheme: MacroScheme::Euler,
        })
    }

    pub fn kind(&self) -> MacroKind {
        match self.scheme {
            MacroScheme::Exact { .. } => MacroKind::ExactLinear,
            MacroScheme::Euler => MacroKind::ForwardEulerSingleStep,
        }
    }

    /// Multiplier `ρ_Δt` for the exact linear kind.
    pub fn rho(&self) -> Option<f64> {
        match self.scheme {
            MacroScheme::Exact { rho } => Some(rho),
            MacroScheme::Euler => None,
        }
    }

    pub fn system(&self) -> &System {
        &self.system
    }
}

impl Propagator for MacroPropagator {
    type State = MacroState;

    fn step(&self, x: &MacroState) -> Result<MacroState> {
        if !x.is_finite() {
            return Err(Error::NonFinite("macro step input"));
        }
        let next = match self.scheme {
            MacroScheme::Exact { rho } => {
                MacroState::new(x.as_slice().iter().map(|v| rho * v).collect())
            }
            MacroScheme::Euler => {
                let mut rate = vec![0.0; x.dim()];
                self.system.macro_rhs(x.as_slice(), &mut rate);
                MacroState::new(
                    x.as_slice()
                        .iter()
                        .zip(&rate)
                        .map(|(v, r)| v + self.dt * r)
                        .collect(),
                )
            }
        };
        if !next.is_finite() {
            return Err(Error::NonFinite("macro step"));
        }
        Ok(next)
    }

    fn dt(&self) -> f64 {
        self.dt
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{builtin_quadratic, builtin_toy};
    use approx::assert_relative_eq;

    /// Classical RK4 with a fixed step, used as an independent oracle.
    fn rk4_linear(sys: &LinearFastSlowSystem, u0: &[f64], t: f64, h: f64) -> Vec<f64> {
        let b = sys.generator();
        let steps = (t / h).round() as usize;
        let h = t / steps as f64;
        let mut u = u0.to_vec();
        let axpy = |u: &[f64], k: &[f64], s: f64| -> Vec<f64> {
            u.iter().zip(k).map(|(a, b)| a + s * b).collect()
        };
        for _ in 0..steps {
            let k1 = b.mul_vec(&u);
            let k2 = b.mul_vec(&axpy(&u, &k1, h / 2.0));
            let k3 = b.mul_vec(&axpy(&u, &k2, h / 2.0));
            let k4 = b.mul_vec(&axpy(&u, &k3, h));
            for i in 0..u.len() {
                u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        u
    }

    #[test]
    fn exact_micro_matches_rk4_oracle() {
        let eps = 1e-2;
        let sys = builtin_toy(eps).unwrap();
        let prop = MicroPropagator::exact(&sys, 0.1).unwrap();
        let u0 = MicroState::new(&[1.0], &[0.0, 0.0]);
        let got = prop.step(&u0).unwrap();
        let want = rk4_linear(&sys, u0.as_slice(), 0.1, eps / 100.0);
        let err: f64 = got.as_slice().iter().zip(&want).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-8 * linalg::norm2(&want), "err = {err}");
    }

    #[test]
    fn exact_micro_semigroup() {
        let sys = builtin_toy(1e-3).unwrap();
        let prop = MicroPropagator::exact(&sys, 0.1).unwrap();
        let u0 = MicroState::new(&[1.0], &[0.5, -0.25]);
        let traj = prop.reference_trajectory(&u0, 20).unwrap();
        for n in [0usize, 1, 7, 20] {
            let direct = linalg::mat_exp(&sys.generator().scaled(0.1 * n as f64)).unwrap();
            let want = direct.mul_vec(u0.as_slice());
            let diff: Vec<f64> = traj[n].as_slice().iter().zip(&want).map(|(a, b)| a - b).collect();
            assert!(linalg::norm2(&diff) <= 1e-9 * linalg::norm2(&want).max(1e-300));
        }
    }

    #[test]
    fn zero_length_trajectory() {
        let sys = builtin_toy(1e-3).unwrap();
        let prop = MicroPropagator::exact(&sys, 0.1).unwrap();
        let u0 = MicroState::new(&[1.0], &[0.0, 0.0]);
        assert_eq!(prop.reference_trajectory(&u0, 0).unwrap(), vec![u0]);
    }

    #[test]
    fn single_euler_substep_is_one_explicit_step() {
        let sys: System = builtin_toy(0.5).unwrap().into();
        let prop = MicroPropagator::forward_euler(sys.clone(), 0.1, 0.1).unwrap();
        let u0 = MicroState::new(&[1.0], &[0.2, -0.3]);
        let mut rate = [0.0; 3];
        sys.micro_rhs(u0.as_slice(), &mut rate);
        let got = prop.step(&u0).unwrap();
        for i in 0..3 {
            assert_eq!(got.as_slice()[i], u0.as_slice()[i] + 0.1 * rate[i]);
        }
    }

    #[test]
    fn euler_substeps_must_divide_interval() {
        let sys: System = builtin_toy(0.5).unwrap().into();
        assert!(MicroPropagator::forward_euler(sys.clone(), 0.1, 0.03).is_err());
        assert!(MicroPropagator::forward_euler(sys.clone(), 0.1, 0.2).is_err());
        let p = MicroPropagator::forward_euler(sys, 0.1, 1e-5).unwrap();
        assert_relative_eq!(p.substep().unwrap(), 1e-5, max_relative = 1e-12);
    }

    #[test]
    fn stiff_euler_blow_up_is_an_error() {
        let sys: System = builtin_toy(1e-4).unwrap().into();
        let prop = MicroPropagator::forward_euler(sys, 10.0, 1e-2).unwrap();
        let err = prop.step(&MicroState::new(&[1.0], &[0.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn macro_steps() {
        let sys = builtin_toy(1e-3).unwrap();
        let exact = MacroPropagator::exact(&sys, 0.1).unwrap();
        let x = exact.step(&MacroState::scalar(1.0)).unwrap();
        assert_relative_eq!(x.value(), 0.904_837_418_035_959_6, max_relative = 1e-15);
        assert!(exact.rho().unwrap() > 0.0);
        assert_eq!(exact.step(&MacroState::scalar(0.0)).unwrap().value(), 0.0);

        let euler = MacroPropagator::forward_euler(sys.into(), 0.1).unwrap();
        assert_relative_eq!(euler.step(&MacroState::scalar(1.0)).unwrap().value(), 0.9, max_relative = 1e-15);
        assert_eq!(euler.step(&MacroState::scalar(0.0)).unwrap().value(), 0.0);
    }

    #[test]
    fn nonlinear_euler_macro_step() {
        let sys: System = builtin_quadratic(1.0, 1e-3).into();
        let c = MacroPropagator::forward_euler(sys, 0.1).unwrap();
        // 0.5 + 0.1·(−0.5 − 0.25)
        assert_relative_eq!(c.step(&MacroState::scalar(0.5)).unwrap().value(), 0.425, max_relative = 1e-15);
    }

    #[test]
    fn rejects_non_finite_input() {
        let sys = builtin_toy(1e-3).unwrap();
        let f = MicroPropagator::exact(&sys, 0.1).unwrap();
        assert!(f.step(&MicroState::new(&[f64::NAN], &[0.0, 0.0])).is_err());
        let c = MacroPropagator::exact(&sys, 0.1).unwrap();
        assert!(c.step(&MacroState::scalar(f64::INFINITY)).is_err());
    }
}
