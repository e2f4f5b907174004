//! Micro-macro parareal iteration.
//!
//! Each iteration evaluates the coarse and fine propagators from the
//! previous row on every interval (the only concurrent region), forms the
//! macroscopic jumps, runs the sequential corrected coarse sweep and finally
//! rebuilds the microscopic row. The three variants differ only in that
//! last reconstruction step:
//!
//! * [`Variant::Lifting`]: `u = L(X)`.
//! * [`Variant::Matching`]: `u = P(X, ū)` with `ū` the fine end point.
//! * [`Variant::DaeCoarse`]: standard parareal with coarse propagator
//!   `G = L ∘ C ∘ R`, i.e. `u = ū + L(C(R u_{k+1}) − C(R u_k))`.

use std::time::Duration;

use rayon::prelude::*;

use crate::clock::Stopwatch;
use crate::error::{Error, Result};
use crate::propagators::{MacroKind, MacroPropagator, MicroKind, MicroPropagator, Propagator};
use crate::systems::{MacroState, MicroState, System};
use crate::transfer::{restrict, TransferSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Variant {
    Lifting,
    Matching,
    DaeCoarse,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Lifting, Variant::Matching, Variant::DaeCoarse];

    /// Algorithm number used in reports (1, 2 or 3).
    pub fn number(self) -> u8 {
        match self {
            Variant::Lifting => 1,
            Variant::Matching => 2,
            Variant::DaeCoarse => 3,
        }
    }

    pub fn from_number(n: u8) -> Option<Variant> {
        match n {
            1 => Some(Variant::Lifting),
            2 => Some(Variant::Matching),
            3 => Some(Variant::DaeCoarse),
            _ => None,
        }
    }
}

/// Returns `T/Δt` when it is a positive integer (up to round-off).
pub fn interval_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(t_end > 0.0 && dt > 0.0 && t_end.is_finite() && dt.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "need T > 0 and dt > 0, got T={t_end}, dt={dt}"
        )));
    }
    let ratio = t_end / dt;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio {
        return Err(Error::InvalidConfig(format!(
            "dt={dt} does not divide T={t_end} into an integer number of intervals"
        )));
    }
    Ok(n as usize)
}

/// Everything a parareal run needs.
#[derive(Debug, Clone)]
pub struct PararealConfig {
    pub t_end: f64,
    pub k_max: usize,
    pub variant: Variant,
    pub fine: MicroPropagator,
    pub coarse: MacroPropagator,
    pub transfer: TransferSet,
    pub u0: MicroState,
    /// Threads used for the fine/coarse evaluations of step 2a.
    pub workers: usize,
    steps: usize,
}

impl PararealConfig {
    pub fn new(
        t_end: f64,
        k_max: usize,
        variant: Variant,
        fine: MicroPropagator,
        coarse: MacroPropagator,
        transfer: TransferSet,
        u0: MicroState,
    ) -> Result<Self> {
        let dt = fine.dt();
        if (coarse.dt() - dt).abs() > 1e-12 * dt {
            return Err(Error::InvalidConfig(format!(
                "fine interval {dt} and coarse interval {} differ",
                coarse.dt()
            )));
        }
        let steps = interval_count(t_end, dt)?;
        let system = transfer.system();
        if u0.dim() != system.dim() || u0.slow_dim() != system.slow_dim() {
            return Err(Error::DimensionMismatch {
                expected: system.dim(),
                got: u0.dim(),
            });
        }
        if !u0.is_finite() {
            return Err(Error::NonFinite("initial condition"));
        }
        if variant == Variant::DaeCoarse && system.as_linear().is_none() {
            return Err(Error::InvalidConfig(
                "the DAE-coarse variant is only available for linear systems".into(),
            ));
        }
        Ok(PararealConfig {
            t_end,
            k_max,
            variant,
            fine,
            coarse,
            transfer,
            u0,
            workers: 1,
            steps,
        })
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn dt(&self) -> f64 {
        self.fine.dt()
    }

    /// Number of intervals `N = T/Δt`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn system(&self) -> &System {
        self.transfer.system()
    }
}

/// Wall-clock timings of one parareal iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IterationTiming {
    /// Wall-clock time of the concurrent fine/coarse stage.
    pub fine_stage: Duration,
    /// Sum of the individual fine evaluations inside that stage.
    pub fine_work: Duration,
    /// Jumps, corrected sweep and reconstruction.
    pub sequential: Duration,
}

/// Lattices `u[k][n]`, `X[k][n]` of a parareal run plus the sequential
/// fine reference trajectory.
#[derive(Debug, Clone)]
pub struct PararealRun {
    pub variant: Variant,
    pub dt: f64,
    pub t_end: f64,
    pub workers: usize,
    micro: Vec<Vec<MicroState>>,
    macro_: Vec<Vec<MacroState>>,
    fine_endpoints: Vec<Vec<MicroState>>,
    reference: Vec<MicroState>,
    pub timings: Vec<IterationTiming>,
    pub reference_time: Duration,
}

impl PararealRun {
    fn from_init(config: &PararealConfig, macro0: Vec<MacroState>, micro0: Vec<MicroState>) -> Self {
        PararealRun {
            variant: config.variant,
            dt: config.dt(),
            t_end: config.t_end,
            workers: config.workers,
            micro: vec![micro0],
            macro_: vec![macro0],
            fine_endpoints: Vec::new(),
            reference: Vec::new(),
            timings: Vec::new(),
            reference_time: Duration::ZERO,
        }
    }

    /// Number of intervals `N`.
    pub fn steps(&self) -> usize {
        self.micro[0].len() - 1
    }

    /// Number of completed parareal iterations (rows minus one).
    pub fn iterations(&self) -> usize {
        self.micro.len() - 1
    }

    pub fn micro(&self, k: usize, n: usize) -> &MicroState {
        &self.micro[k][n]
    }

    pub fn macro_state(&self, k: usize, n: usize) -> &MacroState {
        &self.macro_[k][n]
    }

    pub fn micro_row(&self, k: usize) -> &[MicroState] {
        &self.micro[k]
    }

    pub fn macro_row(&self, k: usize) -> &[MacroState] {
        &self.macro_[k]
    }

    /// Fine end points `ū[k][n] = F(u[k][n−1])` computed during iteration
    /// `k → k+1`; index 0 holds `u0`.
    pub fn fine_endpoints(&self, k: usize) -> &[MicroState] {
        &self.fine_endpoints[k]
    }

    /// Sequential fine trajectory `F^n(u0)`.
    pub fn reference(&self) -> &[MicroState] {
        &self.reference
    }

    /// Total wall-clock time of the concurrent fine stages.
    pub fn fine_stage_time(&self) -> Duration {
        self.timings.iter().map(|t| t.fine_stage).sum()
    }

    /// Total fine work summed over tasks.
    pub fn fine_work_time(&self) -> Duration {
        self.timings.iter().map(|t| t.fine_work).sum()
    }
}

/// Step 1: coarse sweep from `R u0`, lifted to the micro level (`u[0][0] = u0`).
pub fn init_sweep(config: &PararealConfig) -> Result<(Vec<MacroState>, Vec<MicroState>)> {
    let n_steps = config.steps();
    let mut macro_row = Vec::with_capacity(n_steps + 1);
    macro_row.push(restrict(&config.u0));
    for n in 0..n_steps {
        let next = config.coarse.step(&macro_row[n])?;
        macro_row.push(next);
    }
    let micro_row = std::iter::once(config.u0.clone())
        .chain(macro_row[1..].iter().map(|x| config.transfer.lift(x)))
        .collect();
    Ok((macro_row, micro_row))
}

struct Executor {
    pool: Option<rayon::ThreadPool>,
}

impl Executor {
    fn new(workers: usize) -> Self {
        let pool = if workers > 1 {
            rayon::ThreadPoolBuilder::new().num_threads(workers).build().ok()
        } else {
            None
        };
        Executor { pool }
    }

    /// Ordered map over `0..len`; identical results whatever the width.
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Send + Sync,
    {
        match &self.pool {
            Some(pool) => pool.install(|| (0..len).into_par_iter().map(&f).collect()),
            None => (0..len).map(f).collect(),
        }
    }
}

struct IntervalResult {
    coarse: MacroState,
    fine: MicroState,
    coarse_of_restricted: Option<MacroState>,
    work: Duration,
}

fn iterate(config: &PararealConfig, run: &mut PararealRun, k: usize, exec: &Executor) -> Result<()> {
    let n_steps = config.steps();
    if run.micro.len() != k + 1
        || run.micro[k].len() != n_steps + 1
        || run.macro_[k].len() != n_steps + 1
    {
        return Err(Error::InconsistentRow(k));
    }
    let dae = config.variant == Variant::DaeCoarse;

    // (2a) concurrent coarse and fine propagation from row k
    let stage = Stopwatch::start();
    let micro_k = &run.micro[k];
    let macro_k = &run.macro_[k];
    let results: Vec<Result<IntervalResult>> = exec.map(n_steps, |n| {
        let sw = Stopwatch::start();
        let fine = config.fine.step(&micro_k[n])?;
        let work = sw.elapsed();
        let coarse = config.coarse.step(&macro_k[n])?;
        let coarse_of_restricted = if dae {
            Some(config.coarse.step(&restrict(&micro_k[n]))?)
        } else {
            None
        };
        Ok(IntervalResult {
            coarse,
            fine,
            coarse_of_restricted,
            work,
        })
    });
    let fine_stage = stage.elapsed();
    let results: Vec<IntervalResult> = results.into_iter().collect::<Result<_>>()?;
    let fine_work = results.iter().map(|r| r.work).sum();

    let seq = Stopwatch::start();
    // (2b) jumps at the macroscopic level
    let jumps: Vec<MacroState> = results
        .iter()
        .map(|r| restrict(&r.fine).sub(&r.coarse))
        .collect();

    // (2c) corrected coarse sweep
    let mut macro_next = Vec::with_capacity(n_steps + 1);
    macro_next.push(restrict(&config.u0));
    for n in 0..n_steps {
        let x = config.coarse.step(&macro_next[n])?.add(&jumps[n]);
        macro_next.push(x);
    }

    // (2d) microscopic reconstruction
    let mut micro_next = Vec::with_capacity(n_steps + 1);
    micro_next.push(config.u0.clone());
    for n in 0..n_steps {
        let u = match config.variant {
            Variant::Lifting => config.transfer.lift(&macro_next[n + 1]),
            Variant::Matching => config.transfer.matching(&macro_next[n + 1], &results[n].fine),
            Variant::DaeCoarse => {
                let g_new = config.coarse.step(&restrict(&micro_next[n]))?;
                let g_old = results[n]
                    .coarse_of_restricted
                    .as_ref()
                    .expect("computed for the DAE variant");
                results[n].fine.add(&config.transfer.lift(&g_new.sub(g_old)))
            }
        };
        micro_next.push(u);
    }
    let sequential = seq.elapsed();

    let mut endpoints = Vec::with_capacity(n_steps + 1);
    endpoints.push(config.u0.clone());
    endpoints.extend(results.into_iter().map(|r| r.fine));
    run.fine_endpoints.push(endpoints);
    run.micro.push(micro_next);
    run.macro_.push(macro_next);
    run.timings.push(IterationTiming {
        fine_stage,
        fine_work,
        sequential,
    });
    Ok(())
}

/// Computes row `k + 1` of `run` from row `k`.
pub fn parareal_iteration(config: &PararealConfig, run: &mut PararealRun, k: usize) -> Result<()> {
    iterate(config, run, k, &Executor::new(config.workers))
}

/// Starts a run holding only the initial coarse sweep.
pub fn start(config: &PararealConfig) -> Result<PararealRun> {
    let (macro0, micro0) = init_sweep(config)?;
    Ok(PararealRun::from_init(config, macro0, micro0))
}

/// Initial sweep, `K` iterations and the sequential reference trajectory.
pub fn run(config: &PararealConfig) -> Result<PararealRun> {
    let exec = Executor::new(config.workers);
    let mut run = start(config)?;
    for k in 0..config.k_max {
        iterate(config, &mut run, k, &exec)?;
    }
    let sw = Stopwatch::start();
    run.reference = config.fine.reference_trajectory(&config.u0, config.steps())?;
    run.reference_time = sw.elapsed();
    Ok(run)
}

/// Labels used when reporting a run.
pub fn coarse_label(kind: MacroKind) -> &'static str {
    match kind {
        MacroKind::ExactLinear => "exact",
        MacroKind::ForwardEulerSingleStep => "euler",
    }
}

pub fn fine_label(kind: MicroKind) -> &'static str {
    match kind {
        MicroKind::ExactLinear => "exact",
        MicroKind::ForwardEuler => "euler",
    }
}

/// Standard parareal on the scalar problem with fine multiplier `rho_fine`
/// and coarse multiplier `rho_coarse`. Returns `|E[k][n]|` for
/// `0 ≤ k ≤ k_max`, `0 ≤ n ≤ steps`, measured against `rho_fine^n u0`.
pub fn classic_parareal(
    rho_fine: f64,
    rho_coarse: f64,
    u0: f64,
    steps: usize,
    k_max: usize,
) -> Vec<Vec<f64>> {
    let exact: Vec<f64> = (0..=steps).map(|n| rho_fine.powi(n as i32) * u0).collect();
    let mut row: Vec<f64> = Vec::with_capacity(steps + 1);
    row.push(u0);
    for n in 0..steps {
        row.push(rho_coarse * row[n]);
    }
    let abs_err = |row: &[f64]| -> Vec<f64> { row.iter().zip(&exact).map(|(u, e)| (u - e).abs()).collect() };
    let mut errors = vec![abs_err(&row)];
    for _ in 0..k_max {
        let mut next = Vec::with_capacity(steps + 1);
        next.push(u0);
        for n in 0..steps {
            next.push(rho_coarse * next[n] + rho_fine * row[n] - rho_coarse * row[n]);
        }
        errors.push(abs_err(&next));
        row = next;
    }
    errors
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{builtin_quadratic, builtin_toy};
    use crate::transfer::TransferSet;
    use approx::assert_relative_eq;

    fn toy_config(eps: f64, variant: Variant, k_max: usize) -> PararealConfig {
        let sys = builtin_toy(eps).unwrap();
        PararealConfig::new(
            10.0,
            k_max,
            variant,
            MicroPropagator::exact(&sys, 0.1).unwrap(),
            MacroPropagator::exact(&sys, 0.1).unwrap(),
            TransferSet::new(sys.into()),
            MicroState::new(&[1.0], &[0.0, 0.0]),
        )
        .unwrap()
    }

    fn rel_close(a: &MicroState, b: &MicroState, tol: f64) -> bool {
        a.distance(b) <= tol * (1.0 + b.norm())
    }

    #[test]
    fn init_sweep_values() {
        let cfg = toy_config(1e-3, Variant::Lifting, 0);
        let (x, u) = init_sweep(&cfg).unwrap();
        assert_eq!(u[0], cfg.u0);
        assert_relative_eq!(x[1].value(), 0.904_837_418_035_959_6, max_relative = 1e-15);
        assert_relative_eq!(u[1].fast()[0], -0.904_837_418_035_959_6, max_relative = 1e-14);
        assert_relative_eq!(u[1].fast()[1], 2.714_512_254_107_878_7, max_relative = 1e-14);
        assert_eq!(x.len(), 101);
    }

    #[test]
    fn init_sweep_with_euler_coarse() {
        let sys = builtin_toy(1e-3).unwrap();
        let cfg = PararealConfig::new(
            1.0,
            0,
            Variant::Matching,
            MicroPropagator::exact(&sys, 0.1).unwrap(),
            MacroPropagator::forward_euler(sys.clone().into(), 0.1).unwrap(),
            TransferSet::new(sys.into()),
            MicroState::new(&[1.0], &[0.0, 0.0]),
        )
        .unwrap();
        let (x, _) = init_sweep(&cfg).unwrap();
        assert_relative_eq!(x[1].value(), 0.9, max_relative = 1e-15);
    }

    #[test]
    fn k_zero_is_init_sweep_only() {
        let cfg = toy_config(1e-3, Variant::Matching, 0);
        let r = run(&cfg).unwrap();
        assert_eq!(r.iterations(), 0);
        assert_eq!(r.reference().len(), 101);
        let (x, u) = init_sweep(&cfg).unwrap();
        assert_eq!(r.macro_row(0), &x[..]);
        assert_eq!(r.micro_row(0), &u[..]);
    }

    #[test]
    fn matching_first_interval_is_fine_step() {
        let cfg = toy_config(1e-3, Variant::Matching, 1);
        let r = run(&cfg).unwrap();
        let want = cfg.fine.step(&cfg.u0).unwrap();
        assert!(rel_close(r.micro(1, 1), &want, 1e-14));
    }

    #[test]
    fn local_exactness_matching_and_dae() {
        for variant in [Variant::Matching, Variant::DaeCoarse] {
            let cfg = toy_config(1e-3, variant, 6);
            let r = run(&cfg).unwrap();
            for k in 0..=6 {
                for p in 0..=k {
                    assert!(
                        rel_close(r.micro(k, p), &r.reference()[p], 1e-12),
                        "{variant:?} k={k} p={p}"
                    );
                }
            }
        }
    }

    #[test]
    fn full_iterations_reproduce_reference() {
        let sys = builtin_toy(1e-2).unwrap();
        let cfg = PararealConfig::new(
            1.0,
            10,
            Variant::Matching,
            MicroPropagator::exact(&sys, 0.1).unwrap(),
            MacroPropagator::exact(&sys, 0.1).unwrap(),
            TransferSet::new(sys.into()),
            MicroState::new(&[1.0], &[0.0, 0.0]),
        )
        .unwrap();
        let r = run(&cfg).unwrap();
        for n in 0..=10 {
            assert!(rel_close(r.micro(10, n), &r.reference()[n], 1e-12));
        }
    }

    #[test]
    fn lifting_rows_lie_on_slow_manifold() {
        let cfg = toy_config(1e-3, Variant::Lifting, 3);
        let sys = cfg.system().as_linear().unwrap().clone();
        let r = run(&cfg).unwrap();
        for k in 0..=3 {
            for n in 1..=r.steps() {
                assert!(sys.slow_manifold_offset(r.micro(k, n)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn matching_equals_explicit_parareal_form() {
        // u_{k+1}^{n+1} = F(u_k^n) + (1,0)ᵀ (C(R u_{k+1}^n) − C(R u_k^n))
        let cfg = toy_config(1e-3, Variant::Matching, 4);
        let r = run(&cfg).unwrap();
        let rho = cfg.coarse.rho().unwrap();
        let phi = cfg.fine.transition_matrix().unwrap();
        let (_, mut prev) = init_sweep(&cfg).unwrap();
        for k in 0..4 {
            let mut next = vec![cfg.u0.as_slice().to_vec()];
            for n in 0..r.steps() {
                let mut u = phi.mul_vec(prev[n].as_slice());
                u[0] += rho * next[n][0] - rho * prev[n].as_slice()[0];
                next.push(u);
            }
            for n in 0..=r.steps() {
                let want = MicroState::from_flat(next[n].clone(), 1);
                assert!(rel_close(r.micro(k + 1, n), &want, 1e-13), "k={k} n={n}");
            }
            prev = next.into_iter().map(|v| MicroState::from_flat(v, 1)).collect();
        }
    }

    #[test]
    fn bit_identical_across_worker_counts() {
        let base = run(&toy_config(1e-4, Variant::Matching, 5)).unwrap();
        for w in [2, 4] {
            let other = run(&toy_config(1e-4, Variant::Matching, 5).with_workers(w)).unwrap();
            for k in 0..=5 {
                assert_eq!(base.micro_row(k), other.micro_row(k));
                assert_eq!(base.macro_row(k), other.macro_row(k));
            }
        }
    }

    #[test]
    fn iteration_requires_complete_previous_row() {
        let cfg = toy_config(1e-3, Variant::Matching, 0);
        let mut r = start(&cfg).unwrap();
        assert_eq!(parareal_iteration(&cfg, &mut r, 1).unwrap_err(), Error::InconsistentRow(1));
        parareal_iteration(&cfg, &mut r, 0).unwrap();
        assert_eq!(r.iterations(), 1);
        assert_eq!(r.fine_endpoints(0).len(), 101);
    }

    #[test]
    fn config_validation() {
        let sys = builtin_toy(1e-3).unwrap();
        let mk = |t: f64, dt_c: f64| {
            PararealConfig::new(
                t,
                1,
                Variant::Matching,
                MicroPropagator::exact(&sys, 0.1).unwrap(),
                MacroPropagator::exact(&sys, dt_c).unwrap(),
                TransferSet::new(sys.clone().into()),
                MicroState::new(&[1.0], &[0.0, 0.0]),
            )
        };
        assert!(mk(10.0, 0.1).is_ok());
        assert!(mk(10.05, 0.1).is_err());
        assert!(mk(10.0, 0.2).is_err());

        let quad = builtin_quadratic(1.0, 1e-3);
        let dae = PararealConfig::new(
            1.0,
            1,
            Variant::DaeCoarse,
            MicroPropagator::forward_euler(quad.clone().into(), 0.1, 1e-3).unwrap(),
            MacroPropagator::forward_euler(quad.clone().into(), 0.1).unwrap(),
            TransferSet::new(quad.into()),
            MicroState::new(&[1.0], &[0.0]),
        );
        assert!(matches!(dae, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn interval_count_cases() {
        assert_eq!(interval_count(10.0, 0.1).unwrap(), 100);
        assert_eq!(interval_count(10.0, 1.0 / 40.0).unwrap(), 400);
        assert!(interval_count(10.0, 0.3).is_err());
        assert!(interval_count(0.0, 0.1).is_err());
    }

    #[test]
    fn classic_parareal_trivial_cases() {
        let e = classic_parareal(0.9, 0.9, 1.0, 20, 3);
        assert!(e.iter().flatten().all(|v| *v < 1e-15));

        let rf = (-0.1f64).exp();
        let e = classic_parareal(rf, 0.9, 1.0, 10, 2);
        for n in 0..=10 {
            assert_relative_eq!(e[0][n], (0.9f64.powi(n as i32) - rf.powi(n as i32)).abs(), epsilon = 1e-15);
        }
        // local exactness of standard parareal
        for k in 0..=2 {
            for n in 0..=k {
                assert!(e[k][n] < 1e-15);
            }
        }
    }
}
