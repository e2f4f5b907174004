//! Named scenarios and parameter sweeps producing error tables.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{compute_errors, speedup_report, ErrorTable, RunLabel, SpeedupReport};
use crate::engine::{self, interval_count, PararealConfig, Variant};
use crate::error::{Error, Result};
use crate::propagators::{MacroPropagator, MicroPropagator};
use crate::systems::{builtin_brusselator, builtin_quadratic, builtin_toy, MicroState, System};
use crate::transfer::TransferSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemName {
    Toy,
    Quadratic,
    Brusselator,
}

impl SystemName {
    pub fn is_linear(self) -> bool {
        self == SystemName::Toy
    }
}

impl fmt::Display for SystemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SystemName::Toy => "toy",
            SystemName::Quadratic => "quadratic",
            SystemName::Brusselator => "brusselator",
        })
    }
}

impl FromStr for SystemName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "toy" => Ok(SystemName::Toy),
            "quadratic" => Ok(SystemName::Quadratic),
            "brusselator" => Ok(SystemName::Brusselator),
            other => Err(Error::InvalidConfig(format!("unknown system `{other}`"))),
        }
    }
}

/// Propagator choice for either level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Exact,
    Euler,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Exact => "exact",
            Scheme::Euler => "euler",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(Scheme::Exact),
            "euler" => Ok(Scheme::Euler),
            other => Err(Error::InvalidConfig(format!("unknown propagator `{other}`"))),
        }
    }
}

/// Default initial conditions.
pub fn default_initial_state(system: SystemName) -> MicroState {
    match system {
        SystemName::Toy => MicroState::new(&[1.0], &[0.0, 0.0]),
        SystemName::Quadratic => MicroState::new(&[1.0], &[0.0]),
        SystemName::Brusselator => MicroState::new(&[1.0, 1.0], &[crate::systems::BRUSSELATOR_B0]),
    }
}

/// Everything of a run except `ε` and the iteration count.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub system: SystemName,
    pub variant: Variant,
    pub coarse: Scheme,
    pub fine: Scheme,
    pub t_end: f64,
    pub dt: f64,
    /// Fine Euler sub-step.
    pub fine_step: f64,
    pub u0: Option<Vec<f64>>,
    /// `λ` of the quadratic system.
    pub quadratic_lambda: f64,
}

impl Scenario {
    /// Exact propagators on the linear system, Euler on the nonlinear ones.
    pub fn new(system: SystemName, variant: Variant) -> Self {
        let scheme = if system.is_linear() {
            Scheme::Exact
        } else {
            Scheme::Euler
        };
        Scenario {
            system,
            variant,
            coarse: scheme,
            fine: scheme,
            t_end: 10.0,
            dt: 0.1,
            fine_step: 1e-5,
            u0: None,
            quadratic_lambda: 1.0,
        }
    }

    pub fn with_coarse(mut self, coarse: Scheme) -> Self {
        self.coarse = coarse;
        self
    }

    pub fn with_fine(mut self, fine: Scheme) -> Self {
        self.fine = fine;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn with_fine_step(mut self, fine_step: f64) -> Self {
        self.fine_step = fine_step;
        self
    }

    pub fn with_u0(mut self, u0: Vec<f64>) -> Self {
        self.u0 = Some(u0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        interval_count(self.t_end, self.dt)?;
        if !self.system.is_linear() {
            if self.coarse == Scheme::Exact || self.fine == Scheme::Exact {
                return Err(Error::InvalidConfig(format!(
                    "exact propagators need a linear system, `{}` is nonlinear",
                    self.system
                )));
            }
            if self.variant == Variant::DaeCoarse {
                return Err(Error::InvalidConfig(
                    "the DAE-coarse variant is only available for linear systems".into(),
                ));
            }
        }
        if self.fine == Scheme::Euler {
            crate::propagators::substep_count(self.dt, self.fine_step)?;
        }
        if let Some(u0) = &self.u0 {
            let dim = default_initial_state(self.system).dim();
            if u0.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: u0.len(),
                });
            }
        }
        Ok(())
    }

    pub fn system_at(&self, epsilon: f64) -> Result<System> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(match self.system {
            SystemName::Toy => builtin_toy(epsilon)?.into(),
            SystemName::Quadratic => builtin_quadratic(self.quadratic_lambda, epsilon).into(),
            SystemName::Brusselator => builtin_brusselator(epsilon).into(),
        })
    }

    pub fn initial_state(&self) -> MicroState {
        let default = default_initial_state(self.system);
        match &self.u0 {
            Some(v) => MicroState::from_flat(v.clone(), default.slow_dim()),
            None => default,
        }
    }

    pub fn config(&self, epsilon: f64, k_max: usize) -> Result<PararealConfig> {
        self.validate()?;
        let system = self.system_at(epsilon)?;
        let fine = match (self.fine, system.as_linear()) {
            (Scheme::Exact, Some(lin)) => MicroPropagator::exact(lin, self.dt)?,
            _ => MicroPropagator::forward_euler(system.clone(), self.dt, self.fine_step)?,
        };
        let coarse = match (self.coarse, system.as_linear()) {
            (Scheme::Exact, Some(lin)) => MacroPropagator::exact(lin, self.dt)?,
            _ => MacroPropagator::forward_euler(system.clone(), self.dt)?,
        };
        PararealConfig::new(
            self.t_end,
            k_max,
            self.variant,
            fine,
            coarse,
            TransferSet::new(system),
            self.initial_state(),
        )
    }

    pub fn label(&self, epsilon: f64) -> RunLabel {
        RunLabel {
            system: self.system.to_string(),
            coarse: self.coarse.to_string(),
            fine: self.fine.to_string(),
            epsilon,
        }
    }

    /// Human-readable description of the run, one line per item.
    pub fn metadata(&self) -> Vec<String> {
        let u0 = self.initial_state();
        let mut lines = vec![
            format!("system: {}", self.system),
            format!("algorithm: {}", self.variant.number()),
            format!("coarse: {}, fine: {}", self.coarse, self.fine),
            format!("T: {}, dt: {}", self.t_end, self.dt),
            format!("u0: {:?}", u0.as_slice()),
        ];
        if self.fine == Scheme::Euler {
            lines.push(format!("fine Euler step: {}", self.fine_step));
        }
        if self.system == SystemName::Quadratic {
            lines.push(format!("quadratic lambda: {}", self.quadratic_lambda));
        }
        lines
    }
}

/// `n` points per decade from `lo` to `hi`, both included.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    let count = ((b - a) * per_decade as f64).round() as usize;
    (0..=count)
        .map(|j| 10f64.powf(a + (b - a) * j as f64 / count.max(1) as f64))
        .collect()
}

/// Five points per decade on `[1e-5, 1e-1]`.
pub fn default_epsilon_grid() -> Vec<f64> {
    log_grid(1e-5, 1e-1, 5)
}

/// Runs one parareal computation and returns its error table.
pub fn run_point(scenario: &Scenario, epsilon: f64, dt: f64, k_max: usize, all_times: bool) -> Result<ErrorTable> {
    let s = scenario.clone().with_dt(dt);
    let config = s.config(epsilon, k_max)?;
    let run = engine::run(&config)?;
    let mut table = compute_errors(&run, &s.label(epsilon));
    if !all_times {
        let n = run.steps();
        table.rows.retain(|r| r.n == n);
    }
    Ok(table)
}

/// Runs every `(ε, Δt)` point, spreading points over `workers` threads.
/// Rows come back in the order of `points`.
pub fn sweep(
    scenario: &Scenario,
    points: &[(f64, f64)],
    k_max: usize,
    workers: usize,
    all_times: bool,
) -> Result<ErrorTable> {
    if points.is_empty() {
        return Err(Error::InvalidConfig("empty sweep".into()));
    }
    for &(eps, dt) in points {
        scenario.clone().with_dt(dt).validate()?;
        scenario.system_at(eps)?;
    }
    let go = || -> Vec<Result<ErrorTable>> {
        points
            .par_iter()
            .map(|&(eps, dt)| run_point(scenario, eps, dt, k_max, all_times))
            .collect()
    };
    let tables = if workers > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .install(go)
    } else {
        points
            .iter()
            .map(|&(eps, dt)| run_point(scenario, eps, dt, k_max, all_times))
            .collect()
    };
    let mut out = ErrorTable::default();
    for t in tables {
        out.extend(t?);
    }
    Ok(out)
}

pub fn sweep_epsilon(
    scenario: &Scenario,
    epsilons: &[f64],
    k_max: usize,
    workers: usize,
    all_times: bool,
) -> Result<ErrorTable> {
    if epsilons.is_empty() {
        return Err(Error::InvalidConfig("empty epsilon list".into()));
    }
    let points: Vec<_> = epsilons.iter().map(|&e| (e, scenario.dt)).collect();
    sweep(scenario, &points, k_max, workers, all_times)
}

pub fn sweep_dt(
    scenario: &Scenario,
    epsilon: f64,
    dts: &[f64],
    k_max: usize,
    workers: usize,
    all_times: bool,
) -> Result<ErrorTable> {
    if dts.is_empty() {
        return Err(Error::InvalidConfig("empty dt list".into()));
    }
    let points: Vec<_> = dts.iter().map(|&dt| (epsilon, dt)).collect();
    sweep(scenario, &points, k_max, workers, all_times)
}

pub const CSV_HEADER: [&str; 13] = [
    "system",
    "algorithm",
    "coarse",
    "fine",
    "epsilon",
    "dt",
    "T",
    "k",
    "n",
    "rel_macro_error",
    "rel_micro_error",
    "abs_macro_error",
    "abs_micro_error",
];

/// Writes `table` as CSV with a header row. Floats use the shortest
/// representation that round-trips.
pub fn write_csv<W: Write>(table: &ErrorTable, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for row in &table.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the same computation with each worker count and reports timings.
pub fn speedup_experiment(
    scenario: &Scenario,
    epsilon: f64,
    k_max: usize,
    worker_counts: &[usize],
) -> Result<Vec<SpeedupReport>> {
    let config = scenario.config(epsilon, k_max)?;
    worker_counts
        .iter()
        .map(|&w| {
            let run = engine::run(&config.clone().with_workers(w))?;
            Ok(speedup_report(&run))
        })
        .collect()
}
