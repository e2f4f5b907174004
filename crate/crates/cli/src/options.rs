//! Command-line flags, the optional TOML config file, and their merge.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use parareal_core::experiments::{Scenario, Scheme, SystemName};
use parareal_core::Variant;
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(name = "mmparareal", version, about = "Micro-macro parareal experiments for fast-slow ODEs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Final-time errors as a function of epsilon, one row per (epsilon, k).
    SweepEpsilon(RunArgs),
    /// Errors as a function of the iteration number for a few epsilons.
    SweepK(RunArgs),
    /// Errors as a function of the parareal step at fixed epsilon.
    SweepDt(RunArgs),
    /// Runs the invariant checks and prints one line per check.
    Verify,
    /// Ideal N/K and measured fine-stage timings for several worker counts.
    Speedup(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// toy, quadratic or brusselator
    #[arg(long)]
    pub system: Option<String>,
    /// 1 (lifting), 2 (matching) or 3 (DAE coarse, linear only)
    #[arg(long)]
    pub algorithm: Option<u8>,
    /// exact or euler
    #[arg(long)]
    pub coarse: Option<String>,
    /// exact or euler
    #[arg(long)]
    pub fine: Option<String>,
    /// Comma-separated list, e.g. 1e-5,1e-4
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Comma-separated list of parareal steps (sweep-dt)
    #[arg(long, value_delimiter = ',')]
    pub dts: Option<Vec<f64>>,
    /// Final time
    #[arg(long = "T")]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Forward Euler sub-step of the fine propagator
    #[arg(long)]
    pub delta_t_fine: Option<f64>,
    /// Initial condition, comma-separated (slow block first)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub u0: Option<Vec<f64>>,
    /// Output CSV path; standard output when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Emit every time index instead of the final time only
    #[arg(long)]
    pub all_times: bool,
    /// TOML file with the same keys; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Keys accepted in the config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub system: Option<String>,
    pub algorithm: Option<u8>,
    pub coarse: Option<String>,
    pub fine: Option<String>,
    pub epsilons: Option<Vec<f64>>,
    pub dt: Option<f64>,
    pub dts: Option<Vec<f64>>,
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
    pub kmax: Option<usize>,
    pub delta_t_fine: Option<f64>,
    pub u0: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub all_times: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Epsilon,
    K,
    Dt,
    Speedup,
}

/// Fully resolved experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub epsilons: Vec<f64>,
    pub dts: Vec<f64>,
    pub kmax: usize,
    pub out: Option<PathBuf>,
    pub workers: usize,
    /// Whether `--workers` was given explicitly.
    pub workers_set: bool,
    pub all_times: bool,
}

fn default_kmax(mode: Mode, variant: Variant) -> usize {
    match (mode, variant) {
        (Mode::K, _) => 30,
        (Mode::Speedup, _) => 6,
        (Mode::Dt, _) => 4,
        (Mode::Epsilon, Variant::Lifting) => 3,
        (Mode::Epsilon, Variant::Matching) => 6,
        (Mode::Epsilon, Variant::DaeCoarse) => 4,
    }
}

fn default_epsilons(mode: Mode) -> Vec<f64> {
    match mode {
        Mode::Epsilon => parareal_core::experiments::default_epsilon_grid(),
        Mode::K => vec![1e-5, 1e-4, 1e-3, 1e-2, 1e-1],
        Mode::Dt => vec![1e-5],
        Mode::Speedup => vec![1e-3],
    }
}

impl ExperimentSpec {
    /// Merges flags over the config file over the defaults.
    pub fn resolve(args: &RunArgs, mode: Mode) -> anyhow::Result<Self> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let system: SystemName = args
            .system
            .clone()
            .or(file.system)
            .unwrap_or_else(|| "toy".into())
            .parse()?;
        let number = args.algorithm.or(file.algorithm).unwrap_or(2);
        let variant = Variant::from_number(number)
            .ok_or_else(|| anyhow::anyhow!("algorithm must be 1, 2 or 3, got {number}"))?;
        let mut scenario = Scenario::new(system, variant);
        if mode == Mode::Speedup {
            scenario.fine = Scheme::Euler;
        }
        if let Some(c) = args.coarse.clone().or(file.coarse) {
            scenario.coarse = c.parse()?;
        }
        if let Some(f) = args.fine.clone().or(file.fine) {
            scenario.fine = f.parse()?;
        }
        if let Some(dt) = args.dt.or(file.dt) {
            scenario.dt = dt;
        }
        if let Some(t) = args.t_end.or(file.t_end) {
            scenario.t_end = t;
        }
        if let Some(d) = args.delta_t_fine.or(file.delta_t_fine) {
            scenario.fine_step = d;
        }
        scenario.u0 = args.u0.clone().or(file.u0);

        let epsilons = args.epsilons.clone().or(file.epsilons).unwrap_or_else(|| default_epsilons(mode));
        let dts = args
            .dts
            .clone()
            .or(file.dts)
            .unwrap_or_else(|| vec![0.2, 0.1, 0.05, 0.025]);
        let workers_opt = args.workers.or(file.workers);
        let workers = workers_opt
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1);
        let spec = ExperimentSpec {
            kmax: args.kmax.or(file.kmax).unwrap_or_else(|| default_kmax(mode, variant)),
            scenario,
            epsilons,
            dts,
            out: args.out.clone().or(file.out),
            workers,
            workers_set: workers_opt.is_some(),
            all_times: args.all_times || file.all_times.unwrap_or(false),
        };
        spec.validate(mode)?;
        Ok(spec)
    }

    fn validate(&self, mode: Mode) -> anyhow::Result<()> {
        if self.epsilons.is_empty() {
            anyhow::bail!("empty epsilon list");
        }
        if mode == Mode::Dt {
            if self.dts.is_empty() {
                anyhow::bail!("empty dt list");
            }
            for &dt in &self.dts {
                self.scenario.clone().with_dt(dt).validate()?;
            }
        } else {
            self.scenario.validate()?;
        }
        for &e in &self.epsilons {
            self.scenario.system_at(e)?;
        }
        Ok(())
    }
}
