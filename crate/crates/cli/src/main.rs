mod options;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::Parser;
use parareal_core::analysis::truncate_decimals;
use parareal_core::experiments::{self, write_csv};
use parareal_core::verify::{run_checks, VerifyOptions};
use parareal_core::Error;

use options::{Cli, Command, ExperimentSpec, Mode, RunArgs};

enum Failure {
    Validation(anyhow::Error),
    Numerical(anyhow::Error),
    Verification(usize),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Verification(_) => 3,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(
                Error::SingularMatrix | Error::Overflow | Error::NoConvergence | Error::NonFinite(_) | Error::NotStable(_),
            ) => Failure::Numerical(e),
            _ => Failure::Validation(e),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::from(anyhow::Error::new(e))
    }
}

fn open_output(spec: &ExperimentSpec) -> Result<Box<dyn Write>, Failure> {
    Ok(match &spec.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| Failure::Validation(anyhow::anyhow!("{}: {e}", path.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn print_metadata(spec: &ExperimentSpec) {
    for line in spec.scenario.metadata() {
        eprintln!("# {line}");
    }
    eprintln!("# kmax: {}, workers: {}", spec.kmax, spec.workers);
}

fn sweep(args: &RunArgs, mode: Mode) -> Result<(), Failure> {
    let spec = ExperimentSpec::resolve(args, mode)?;
    print_metadata(&spec);
    let table = match mode {
        Mode::Dt => experiments::sweep_dt(
            &spec.scenario,
            spec.epsilons[0],
            &spec.dts,
            spec.kmax,
            spec.workers,
            spec.all_times,
        )?,
        _ => experiments::sweep_epsilon(&spec.scenario, &spec.epsilons, spec.kmax, spec.workers, spec.all_times)?,
    };
    let out = open_output(&spec)?;
    write_csv(&table, out)?;
    Ok(())
}

fn verify() -> Result<(), Failure> {
    let results = run_checks(&VerifyOptions::default());
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} checks, {failed} failed", results.len());
    if failed > 0 {
        return Err(Failure::Verification(failed));
    }
    Ok(())
}

fn speedup(args: &RunArgs) -> Result<(), Failure> {
    let spec = ExperimentSpec::resolve(args, Mode::Speedup)?;
    print_metadata(&spec);
    let counts: Vec<usize> = if spec.workers_set {
        let mut c = vec![1, spec.workers];
        c.dedup();
        c
    } else {
        vec![1, 2, 4]
    };
    let reports = experiments::speedup_experiment(&spec.scenario, spec.epsilons[0], spec.kmax, &counts)?;
    let first = &reports[0];
    match first.ideal {
        Some(s) => println!(
            "N = {}, K = {}, ideal speed-up N/K = {}",
            first.steps,
            first.iterations,
            truncate_decimals(s, 1)
        ),
        None => println!(
            "N = {}, K = 0: no parareal iterations, ideal speed-up undefined",
            first.steps
        ),
    }
    for r in &reports {
        println!("{r}");
    }
    if reports.len() > 1 {
        let base = first.fine_stage.as_secs_f64();
        for r in &reports[1..] {
            let t = r.fine_stage.as_secs_f64();
            if t > 0.0 {
                println!("fine stage, {} workers vs 1: {:.2}x", r.workers, base / t);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::SweepEpsilon(a) => sweep(a, Mode::Epsilon),
        Command::SweepK(a) => sweep(a, Mode::K),
        Command::SweepDt(a) => sweep(a, Mode::Dt),
        Command::Verify => verify(),
        Command::Speedup(a) => speedup(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Validation(e) => eprintln!("error: {e:#}"),
                Failure::Numerical(e) => eprintln!("numerical failure: {e:#}"),
                Failure::Verification(n) => eprintln!("verification failed: {n} check(s)"),
            }
            ExitCode::from(f.code())
        }
    }
}
