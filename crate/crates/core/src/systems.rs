//! Fast-slow model problems and their reduced macroscopic models.
//!
//! A microscopic state `u = (x, y)` carries the slow block `x` first and the
//! fast block `y` after it in one flat buffer; the macroscopic state is the
//! slow block alone.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{self, norm2, Matrix, Vector};

/// Full microscopic state `u = (x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroState {
    data: Vec<f64>,
    slow_dim: usize,
}

impl MicroState {
    pub fn new(slow: &[f64], fast: &[f64]) -> Self {
        let mut data = Vec::with_capacity(slow.len() + fast.len());
        data.extend_from_slice(slow);
        data.extend_from_slice(fast);
        MicroState {
            data,
            slow_dim: slow.len(),
        }
    }

    /// Wraps a flat `(x, y)` buffer whose first `slow_dim` entries are slow.
    pub fn from_flat(data: Vec<f64>, slow_dim: usize) -> Self {
        assert!(slow_dim <= data.len(), "slow block larger than state");
        MicroState { data, slow_dim }
    }

    pub fn zeros(slow_dim: usize, fast_dim: usize) -> Self {
        MicroState::from_flat(vec![0.0; slow_dim + fast_dim], slow_dim)
    }

    pub fn slow(&self) -> &[f64] {
        &self.data[..self.slow_dim]
    }

    pub fn fast(&self) -> &[f64] {
        &self.data[self.slow_dim..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn slow_dim(&self) -> usize {
        self.slow_dim
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Euclidean distance to another state of the same shape.
    pub fn distance(&self, other: &MicroState) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        let diff: Vec<f64> = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        norm2(&diff)
    }

    /// Entrywise `self - other`.
    pub fn sub(&self, other: &MicroState) -> MicroState {
        MicroState {
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
            slow_dim: self.slow_dim,
        }
    }

    /// Entrywise `self + other`.
    pub fn add(&self, other: &MicroState) -> MicroState {
        MicroState {
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
            slow_dim: self.slow_dim,
        }
    }
}

/// Reduced macroscopic state `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroState(Vec<f64>);

impl MacroState {
    pub fn new(values: Vec<f64>) -> Self {
        MacroState(values)
    }

    pub fn scalar(x: f64) -> Self {
        MacroState(vec![x])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// First slow component; the whole state for scalar macro models.
    pub fn value(&self) -> f64 {
        self.0[0]
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn sub(&self, other: &MacroState) -> MacroState {
        MacroState(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &MacroState) -> MacroState {
        MacroState(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

/// Linear singularly perturbed system
/// `ẋ = αx + pᵀy`, `ẏ = (qx − Ay)/ε` with its reduced rate
/// `λ = α + pᵀA⁻¹q`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFastSlowSystem {
    alpha: f64,
    p: Vector,
    q: Vector,
    a: Matrix,
    epsilon: f64,
    a_inv_q: Vector,
    lambda: f64,
    lambda_minus: f64,
}

impl LinearFastSlowSystem {
    /// Validates dimensions, `ε > 0` and `min Re σ(A) > 0`, then caches
    /// `A⁻¹q`, `λ` and `λ₋`.
    pub fn new(alpha: f64, p: Vector, q: Vector, a: Matrix, epsilon: f64) -> Result<Self> {
        let m = a.rows();
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: a.cols(),
            });
        }
        for v in [&p, &q] {
            if v.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: v.len(),
                });
            }
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon must be > 0, got {epsilon}")));
        }
        if !(alpha.is_finite() && p.is_finite() && q.is_finite() && a.is_finite()) {
            return Err(Error::NonFinite("system parameters"));
        }
        let lambda_minus = linalg::eigenvalues(&a)?
            .iter()
            .map(|z| z.re)
            .fold(f64::INFINITY, f64::min);
        if lambda_minus <= 0.0 {
            return Err(Error::NotStable(lambda_minus));
        }
        let a_inv_q = linalg::solve(&a, &q)?;
        let lambda = alpha + p.dot(&a_inv_q);
        Ok(LinearFastSlowSystem {
            alpha,
            p,
            q,
            a,
            epsilon,
            a_inv_q,
            lambda,
            lambda_minus,
        })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon must be > 0, got {epsilon}")));
        }
        Ok(LinearFastSlowSystem {
            epsilon,
            ..self.clone()
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p(&self) -> &Vector {
        &self.p
    }

    pub fn q(&self) -> &Vector {
        &self.q
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn fast_dim(&self) -> usize {
        self.a.rows()
    }

    /// Full state dimension `d`.
    pub fn dim(&self) -> usize {
        1 + self.fast_dim()
    }

    /// Slow-manifold slope `A⁻¹q`.
    pub fn a_inv_q(&self) -> &Vector {
        &self.a_inv_q
    }

    /// Macroscopic rate `λ = α + pᵀA⁻¹q`.
    pub fn macro_rate(&self) -> f64 {
        self.lambda
    }

    /// `λ₋ = min Re σ(A)`.
    pub fn lambda_minus(&self) -> f64 {
        self.lambda_minus
    }

    /// Boundary layer length `(2ε/λ₋) ln(1/ε)`, zero for `ε ≥ 1`.
    pub fn boundary_layer_time(&self) -> f64 {
        if self.epsilon >= 1.0 {
            0.0
        } else {
            2.0 * self.epsilon / self.lambda_minus * (1.0 / self.epsilon).ln()
        }
    }

    /// Offset from the slow manifold, `z = y − (A⁻¹q)x`.
    pub fn slow_manifold_offset(&self, u: &MicroState) -> Vector {
        let x = u.slow()[0];
        Vector::new(
            u.fast()
                .iter()
                .zip(self.a_inv_q.as_slice())
                .map(|(y, s)| y - s * x)
                .collect(),
        )
    }

    /// Generator `B^ε` of `u̇ = B^ε u`.
    pub fn generator(&self) -> Matrix {
        let d = self.dim();
        let m = self.fast_dim();
        let mut b = Matrix::zeros(d, d);
        b[(0, 0)] = self.alpha;
        for j in 0..m {
            b[(0, j + 1)] = self.p[j];
            b[(j + 1, 0)] = self.q[j] / self.epsilon;
            for k in 0..m {
                b[(j + 1, k + 1)] = -self.a[(j, k)] / self.epsilon;
            }
        }
        b
    }

    fn micro_rhs(&self, u: &[f64], out: &mut [f64]) {
        let m = self.fast_dim();
        let x = u[0];
        let y = &u[1..];
        out[0] = self.alpha * x + self.p.as_slice().iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        for j in 0..m {
            let ay: f64 = self.a.row(j).iter().zip(y).map(|(a, b)| a * b).sum();
            out[j + 1] = (self.q[j] * x - ay) / self.epsilon;
        }
    }

    /// Lifting onto the slow manifold, `L(X) = (X, (A⁻¹q)X)`.
    pub fn lift(&self, x: f64) -> MicroState {
        let fast: Vec<f64> = self.a_inv_q.as_slice().iter().map(|s| s * x).collect();
        MicroState::new(&[x], &fast)
    }
}

pub type MicroRhs = Arc<dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync>;
pub type MacroRhs = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type LiftMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Nonlinear system `ẋ = f(x,y)`, `ẏ = g(x,y)/ε` given by function values,
/// together with its macroscopic model and a lifting map.
#[derive(Clone)]
pub struct NonlinearFastSlowSystem {
    pub name: String,
    pub slow_dim: usize,
    pub fast_dim: usize,
    pub epsilon: f64,
    /// `(u, ε, out)`: writes `u̇` into `out`.
    pub micro_rhs: MicroRhs,
    /// `(X, out)`: writes `Ẋ` into `out`.
    pub macro_rhs: MacroRhs,
    /// Maps a slow state to a full state whose slow block is the input.
    pub lift_map: LiftMap,
}

impl fmt::Debug for NonlinearFastSlowSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearFastSlowSystem")
            .field("name", &self.name)
            .field("slow_dim", &self.slow_dim)
            .field("fast_dim", &self.fast_dim)
            .field("epsilon", &self.epsilon)
            .finish_non_exhaustive()
    }
}

impl NonlinearFastSlowSystem {
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon must be > 0, got {epsilon}")));
        }
        Ok(NonlinearFastSlowSystem {
            epsilon,
            ..self.clone()
        })
    }

    pub fn lift(&self, x: &[f64]) -> MicroState {
        MicroState::from_flat((self.lift_map)(x), self.slow_dim)
    }
}

/// Either kind of fast-slow system, behind one interface for propagators
/// and transfer operators.
#[derive(Debug, Clone)]
pub enum System {
    Linear(LinearFastSlowSystem),
    Nonlinear(NonlinearFastSlowSystem),
}

impl From<LinearFastSlowSystem> for System {
    fn from(s: LinearFastSlowSystem) -> Self {
        System::Linear(s)
    }
}

impl From<NonlinearFastSlowSystem> for System {
    fn from(s: NonlinearFastSlowSystem) -> Self {
        System::Nonlinear(s)
    }
}

impl System {
    pub fn slow_dim(&self) -> usize {
        match self {
            System::Linear(_) => 1,
            System::Nonlinear(s) => s.slow_dim,
        }
    }

    pub fn fast_dim(&self) -> usize {
        match self {
            System::Linear(s) => s.fast_dim(),
            System::Nonlinear(s) => s.fast_dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.slow_dim() + self.fast_dim()
    }

    pub fn epsilon(&self) -> f64 {
        match self {
            System::Linear(s) => s.epsilon(),
            System::Nonlinear(s) => s.epsilon,
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<System> {
        Ok(match self {
            System::Linear(s) => System::Linear(s.with_epsilon(epsilon)?),
            System::Nonlinear(s) => System::Nonlinear(s.with_epsilon(epsilon)?),
        })
    }

    pub fn as_linear(&self) -> Option<&LinearFastSlowSystem> {
        match self {
            System::Linear(s) => Some(s),
            System::Nonlinear(_) => None,
        }
    }

    /// Writes the microscopic vector field at `u` into `out`.
    pub fn micro_rhs(&self, u: &[f64], out: &mut [f64]) {
        match self {
            System::Linear(s) => s.micro_rhs(u, out),
            System::Nonlinear(s) => (s.micro_rhs)(u, s.epsilon, out),
        }
    }

    /// Writes the macroscopic vector field at `x` into `out`.
    pub fn macro_rhs(&self, x: &[f64], out: &mut [f64]) {
        match self {
            System::Linear(s) => out[0] = s.macro_rate() * x[0],
            System::Nonlinear(s) => (s.macro_rhs)(x, out),
        }
    }

    pub fn lift(&self, x: &MacroState) -> MicroState {
        match self {
            System::Linear(s) => s.lift(x.value()),
            System::Nonlinear(s) => s.lift(x.as_slice()),
        }
    }
}

/// The three-dimensional linear test system with `λ = −1`.
pub fn builtin_toy(epsilon: f64) -> Result<LinearFastSlowSystem> {
    LinearFastSlowSystem::new(
        -0.5,
        Vector::new(vec![-0.25, -0.25]),
        Vector::new(vec![1.0, 1.0]),
        Matrix::from_rows(&[&[0.5, 0.5], &[0.0, 1.0 / 3.0]]),
        epsilon,
    )
}

/// `ẋ = −λx − y`, `ẏ = (x² − y)/ε`, reduced to `Ẋ = −λX − X²`, lifted by
/// `X ↦ (X, X²)`.
pub fn builtin_quadratic(lambda: f64, epsilon: f64) -> NonlinearFastSlowSystem {
    NonlinearFastSlowSystem {
        name: "quadratic".into(),
        slow_dim: 1,
        fast_dim: 1,
        epsilon,
        micro_rhs: Arc::new(move |u, eps, out| {
            let (x, y) = (u[0], u[1]);
            out[0] = -lambda * x - y;
            out[1] = (x * x - y) / eps;
        }),
        macro_rhs: Arc::new(move |x, out| {
            out[0] = -lambda * x[0] - x[0] * x[0];
        }),
        lift_map: Arc::new(|x| vec![x[0], x[0] * x[0]]),
    }
}

pub const BRUSSELATOR_A: f64 = 1.0;
pub const BRUSSELATOR_B0: f64 = 3.0;

/// Brusselator with slow `(x₁, x₂)` and fast `y` relaxing to `B₀`. The
/// `−y x₁` term of the fast equation is not scaled by `1/ε`.
pub fn builtin_brusselator(epsilon: f64) -> NonlinearFastSlowSystem {
    let (a, b0) = (BRUSSELATOR_A, BRUSSELATOR_B0);
    NonlinearFastSlowSystem {
        name: "brusselator".into(),
        slow_dim: 2,
        fast_dim: 1,
        epsilon,
        micro_rhs: Arc::new(move |u, eps, out| {
            let (x1, x2, y) = (u[0], u[1], u[2]);
            let x1sq_x2 = x1 * x1 * x2;
            out[0] = a - (y + 1.0) * x1 + x1sq_x2;
            out[1] = y * x1 - x1sq_x2;
            out[2] = (b0 - y) / eps - y * x1;
        }),
        macro_rhs: Arc::new(move |x, out| {
            let (x1, x2) = (x[0], x[1]);
            let x1sq_x2 = x1 * x1 * x2;
            out[0] = a - (b0 + 1.0) * x1 + x1sq_x2;
            out[1] = b0 * x1 - x1sq_x2;
        }),
        lift_map: Arc::new(move |x| vec![x[0], x[1], b0]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn toy_macro_rate_is_minus_one() {
        let sys = builtin_toy(1e-3).unwrap();
        assert!((sys.macro_rate() + 1.0).abs() < 1e-14);
        assert_eq!(sys.dim(), 3);
        assert_relative_eq!(sys.lambda_minus(), 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn macro_rate_decoupled_and_scalar() {
        let a = Matrix::from_rows(&[&[2.0, 0.0], &[1.0, 3.0]]);
        let sys = LinearFastSlowSystem::new(
            0.7,
            Vector::zeros(2),
            Vector::new(vec![1.0, -1.0]),
            a,
            0.1,
        )
        .unwrap();
        assert_eq!(sys.macro_rate(), 0.7);

        // α + pq/A = 0 + 1·1/2
        let s = LinearFastSlowSystem::new(
            0.0,
            Vector::new(vec![1.0]),
            Vector::new(vec![1.0]),
            Matrix::from_rows(&[&[2.0]]),
            0.1,
        )
        .unwrap();
        assert_eq!(s.macro_rate(), 0.5);
    }

    #[test]
    fn rejects_unstable_fast_block_and_bad_epsilon() {
        let bad = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, -0.5]]);
        let err = LinearFastSlowSystem::new(0.0, Vector::zeros(2), Vector::zeros(2), bad, 0.1)
            .unwrap_err();
        assert!(matches!(err, Error::NotStable(v) if v == -0.5));
        let rot = Matrix::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]]);
        assert!(LinearFastSlowSystem::new(0.0, Vector::zeros(2), Vector::zeros(2), rot, 0.1).is_err());
        assert!(builtin_toy(0.0).is_err());
        assert!(builtin_toy(-1e-3).is_err());
    }

    #[test]
    fn slow_manifold_offset_cases() {
        let sys = builtin_toy(1e-2).unwrap();
        let z = sys.slow_manifold_offset(&MicroState::new(&[1.0], &[0.0, 0.0]));
        assert_relative_eq!(z[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(z[1], -3.0, epsilon = 1e-14);
        let z = sys.slow_manifold_offset(&MicroState::new(&[0.0], &[0.4, -2.0]));
        assert_eq!(z.as_slice(), &[0.4, -2.0]);
        let z = sys.slow_manifold_offset(&sys.lift(-1.7));
        assert!(z.norm() < 1e-15);
    }

    #[test]
    fn boundary_layer_time_values() {
        let sys = builtin_toy(1e-2).unwrap();
        // 2·0.01/(1/3)·ln(100) = 0.06·ln(100)
        assert_relative_eq!(sys.boundary_layer_time(), 0.276_310_211_159_285_5, max_relative = 1e-12);
        assert_eq!(builtin_toy(1.0).unwrap().boundary_layer_time(), 0.0);
        assert_eq!(builtin_toy(3.0).unwrap().boundary_layer_time(), 0.0);

        let e = (-1.0f64).exp();
        let s = LinearFastSlowSystem::new(
            -1.0,
            Vector::new(vec![0.0]),
            Vector::new(vec![1.0]),
            Matrix::from_rows(&[&[2.0]]),
            e,
        )
        .unwrap();
        assert_relative_eq!(s.boundary_layer_time(), 0.367_879_441_171_442_3, max_relative = 1e-14);
    }

    #[test]
    fn generator_matches_rhs() {
        let sys = builtin_toy(0.05).unwrap();
        let b = sys.generator();
        let u = [0.3, -1.2, 2.5];
        let mut out = [0.0; 3];
        System::from(sys).micro_rhs(&u, &mut out);
        let bu = b.mul_vec(&u);
        for (a, c) in out.iter().zip(&bu) {
            assert_relative_eq!(a, c, max_relative = 1e-14);
        }
    }

    #[test]
    fn quadratic_definitions() {
        let sys: System = builtin_quadratic(1.0, 1e-3).into();
        let mut out = [0.0];
        sys.macro_rhs(&[0.0], &mut out);
        assert_eq!(out[0], 0.0);
        let mut du = [0.0; 2];
        sys.micro_rhs(&[1.0, 1.0], &mut du);
        assert_eq!(du, [-2.0, 0.0]);
        assert_eq!(sys.lift(&MacroState::scalar(2.0)).as_slice(), &[2.0, 4.0]);
    }

    #[test]
    fn brusselator_definitions() {
        let sys: System = builtin_brusselator(1e-3).into();
        assert_eq!((sys.slow_dim(), sys.fast_dim()), (2, 1));
        let mut out = [0.0; 2];
        sys.macro_rhs(&[1.0, 3.0], &mut out);
        assert_eq!(out, [0.0, 0.0]);
        let mut du = [0.0; 3];
        sys.micro_rhs(&[0.0, 0.7, 3.0], &mut du);
        assert_eq!(du[2], 0.0);
        let lifted = sys.lift(&MacroState::new(vec![0.4, 1.9]));
        assert_eq!(lifted.as_slice(), &[0.4, 1.9, 3.0]);
        assert_eq!(lifted.slow(), &[0.4, 1.9]);
    }
}
