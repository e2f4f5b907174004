//! Self-checks of the structural properties the algorithms rely on.
//!
//! Every check is cheap (exact propagators or small grids) and returns a
//! [`CheckResult`] instead of panicking, so a binary can print a report.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{
    compute_errors, error_lattice, fit_slope, lemma_diagnostics, recursion_prediction, relative_distance,
    sharpness_system, spectral_decay_check, LemmaOptions,
};
use crate::engine::{self, classic_parareal, PararealConfig, PararealRun, Variant};
use crate::error::Result;
use crate::experiments::{log_grid, Scenario, SystemName};
use crate::linalg::{self, Matrix};
use crate::propagators::{MicroPropagator, Propagator};
use crate::systems::{builtin_toy, MacroState, MicroState};
use crate::transfer::{restrict, KeepFastMatching, Matching};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{status}] {}: {}", self.name, self.detail)
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

fn from_result(name: &'static str, r: Result<CheckResult>) -> CheckResult {
    r.unwrap_or_else(|e| check(name, false, format!("error: {e}")))
}

/// Inputs of the suite.
#[derive(Clone)]
pub struct VerifyOptions {
    /// Matching operator used by the transfer and consistency checks.
    pub matching: Arc<dyn Matching>,
    pub seed: u64,
    /// Random triples for the transfer identities.
    pub samples: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            matching: Arc::new(KeepFastMatching),
            seed: 7,
            samples: 1000,
        }
    }
}

const TOY_EPS: f64 = 1e-4;
const K: usize = 6;

fn toy_config(variant: Variant, opts: &VerifyOptions, k_max: usize) -> Result<PararealConfig> {
    let mut config = Scenario::new(SystemName::Toy, variant).config(TOY_EPS, k_max)?;
    config.transfer = config.transfer.clone().with_matching(opts.matching.clone());
    Ok(config)
}

fn toy_run(variant: Variant, opts: &VerifyOptions) -> Result<PararealRun> {
    engine::run(&toy_config(variant, opts, K)?)
}

fn macro_rate() -> Result<CheckResult> {
    let lambda = builtin_toy(TOY_EPS)?.macro_rate();
    Ok(check(
        "toy macro rate",
        (lambda + 1.0).abs() <= 1e-14,
        format!("lambda = {lambda}"),
    ))
}

fn linear_algebra(opts: &VerifyOptions) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst_solve = 0.0f64;
    let mut worst_exp = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(1..=5);
        let data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = &Matrix::from_row_major(n, n, data) + &Matrix::identity(n).scaled(n as f64);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = linalg::solve(&a, &linalg::Vector::new(b.clone()))?;
        let r = a.mul_vec(x.as_slice());
        let res = r.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        worst_solve = worst_solve.max(res / (a.norm_inf() * x.norm() + 1.0));
        let m = a.scaled(0.3);
        let e1 = linalg::mat_exp(&m)?;
        let e2 = linalg::mat_exp(&m.scaled(2.0))?;
        let diff = (&(&e1 * &e1) - &e2).norm_1() / e2.norm_1();
        worst_exp = worst_exp.max(diff);
    }
    Ok(check(
        "linear algebra residuals",
        worst_solve < 1e-13 && worst_exp < 1e-12,
        format!("solve residual {worst_solve:.2e}, exp(2M) vs exp(M)^2 {worst_exp:.2e}"),
    ))
}

fn rk4_oracle() -> Result<CheckResult> {
    let sys = builtin_toy(1e-2)?;
    let dt = 0.1;
    let exact = MicroPropagator::exact(&sys, dt)?;
    let u0 = MicroState::new(&[1.0], &[0.0, 0.0]);
    let got = exact.step(&u0)?;
    let b = sys.generator();
    let h = sys.epsilon() / 100.0;
    let steps = (dt / h).round() as usize;
    let mut u = u0.as_slice().to_vec();
    let axpy = |u: &[f64], k: &[f64], s: f64| -> Vec<f64> { u.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    for _ in 0..steps {
        let k1 = b.mul_vec(&u);
        let k2 = b.mul_vec(&axpy(&u, &k1, h / 2.0));
        let k3 = b.mul_vec(&axpy(&u, &k2, h / 2.0));
        let k4 = b.mul_vec(&axpy(&u, &k3, h));
        for i in 0..u.len() {
            u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    let oracle = MicroState::from_flat(u, 1);
    let rel = got.distance(&oracle) / oracle.norm();
    Ok(check("exact propagator vs RK4", rel <= 1e-8, format!("relative difference {rel:.2e}")))
}

fn transfer_identities(opts: &VerifyOptions) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
    let mut worst_restrict = 0.0f64;
    let mut worst_fixed = 0.0f64;
    let mut worst_lip = 0.0f64;
    let m = &opts.matching;
    for _ in 0..opts.samples {
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect() };
        let x = MacroState::new(draw(1));
        let x2 = MacroState::new(draw(1));
        let v = MicroState::from_flat(draw(3), 1);
        let w = MicroState::from_flat(draw(3), 1);
        worst_restrict = worst_restrict.max(restrict(&m.apply(&x, &v)).sub(&x).norm());
        worst_fixed = worst_fixed.max(m.apply(&restrict(&v), &v).distance(&v));
        let dx = m.apply(&x, &v).distance(&m.apply(&x2, &v)) / x.sub(&x2).norm().max(1e-300);
        let dv = m.apply(&x, &v).distance(&m.apply(&x, &w)) / v.distance(&w).max(1e-300);
        worst_lip = worst_lip.max(dx).max(dv);
    }
    check(
        "matching identities",
        worst_restrict <= 1e-15 && worst_fixed <= 1e-15 && worst_lip <= 1.0 + 1e-12,
        format!(
            "max |R P(X,v) - X| = {worst_restrict:.2e}, max |P(Ru,u) - u| = {worst_fixed:.2e}, Lipschitz {worst_lip:.3}"
        ),
    )
}

fn consistency(opts: &VerifyOptions) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for variant in [Variant::Lifting, Variant::Matching] {
        let run = toy_run(variant, opts)?;
        for k in 0..=run.iterations() {
            for n in 0..=run.steps() {
                let x = run.macro_state(k, n);
                let gap = x.sub(&restrict(run.micro(k, n))).norm() / (1.0 + x.norm());
                worst = worst.max(gap);
            }
        }
    }
    Ok(check(
        "consistency X = R u",
        worst <= 1e-13,
        format!("max relative gap {worst:.2e} (variants 1, 2; K={K})"),
    ))
}

fn local_exactness(opts: &VerifyOptions) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for variant in [Variant::Matching, Variant::DaeCoarse] {
        let run = toy_run(variant, opts)?;
        for k in 0..=run.iterations() {
            for p in 0..=k.min(run.steps()) {
                worst = worst.max(relative_distance(run.micro(k, p), &run.reference()[p]));
            }
        }
    }
    Ok(check(
        "local exactness",
        worst <= 1e-12,
        format!("max relative deviation of u[k][p] for p <= k: {worst:.2e} (variants 2, 3)"),
    ))
}

fn error_recursion(opts: &VerifyOptions) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for variant in [Variant::Lifting, Variant::Matching] {
        let config = toy_config(variant, opts, 5)?;
        let run = engine::run(&config)?;
        let phi = config.fine.transition_matrix().expect("exact fine propagator");
        let rho = config.coarse.rho().expect("exact coarse propagator");
        let lattice = error_lattice(&run);
        for k in 0..run.iterations() {
            for n in 1..=run.steps() {
                let predicted = recursion_prediction(phi, rho, &lattice.micro[k], &lattice.macro_[k], n);
                worst = worst.max((predicted - lattice.macro_[k + 1][n].value()).abs());
            }
        }
    }
    Ok(check(
        "macroscopic error recursion",
        worst <= 1e-10,
        format!("max absolute mismatch {worst:.2e} (variants 1, 2)"),
    ))
}

fn lifting_structure(opts: &VerifyOptions) -> Result<CheckResult> {
    let config = toy_config(Variant::Lifting, opts, 3)?;
    let run = engine::run(&config)?;
    let lattice = error_lattice(&run);
    let transfer = &config.transfer;
    let mut worst = 0.0f64;
    for k in 0..=run.iterations() {
        for n in 1..=run.steps() {
            let exact = &run.reference()[n];
            let projected = transfer.lift(&restrict(exact));
            let predicted = transfer.lift(&lattice.macro_[k][n]).sub(&exact.sub(&projected));
            worst = worst.max(predicted.distance(&lattice.micro[k][n]));
        }
    }
    Ok(check(
        "lifting error structure",
        worst <= 1e-12,
        format!("max mismatch {worst:.2e}"),
    ))
}

fn error_table_consistency(opts: &VerifyOptions) -> Result<CheckResult> {
    let run = toy_run(Variant::Matching, opts)?;
    let lattice = error_lattice(&run);
    let mut worst = 0.0f64;
    for (macro_row, micro_row) in lattice.macro_.iter().zip(&lattice.micro) {
        for (big, small) in macro_row.iter().zip(micro_row) {
            worst = worst.max(big.sub(&restrict(small)).norm());
        }
    }
    let table = compute_errors(&run, &Scenario::new(SystemName::Toy, Variant::Matching).label(TOY_EPS));
    let rows_ok = table.rows.len() == (run.iterations() + 1) * (run.steps() + 1);
    Ok(check(
        "error lattices E = R e",
        worst <= 1e-13 && rows_ok,
        format!("max gap {worst:.2e}, {} rows", table.rows.len()),
    ))
}

fn determinism(opts: &VerifyOptions) -> Result<CheckResult> {
    let config = toy_config(Variant::Matching, opts, 4)?;
    let base = engine::run(&config.clone().with_workers(1))?;
    let mut identical = true;
    for w in [2, 4] {
        let other = engine::run(&config.clone().with_workers(w))?;
        for k in 0..=base.iterations() {
            identical &= base.micro_row(k) == other.micro_row(k) && base.macro_row(k) == other.macro_row(k);
        }
    }
    Ok(check(
        "determinism",
        identical,
        if identical { "identical lattices for 1, 2, 4 workers".into() } else { "lattices differ between worker counts".into() },
    ))
}

fn slope_fit() -> Result<CheckResult> {
    let xs = log_grid(1e-5, 1e-1, 5);
    let mut worst = 0.0f64;
    for m in [0.5, 1.0, 2.0, 3.5] {
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(m)).collect();
        worst = worst.max((fit_slope(&xs, &ys, 0.0)?.slope - m).abs());
    }
    Ok(check("slope fit on power laws", worst <= 1e-10, format!("max slope error {worst:.2e}")))
}

fn classic_baseline() -> Result<CheckResult> {
    let dts: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];
    let mut slopes = Vec::new();
    for k in 1..=3 {
        let ys: Vec<f64> = dts
            .iter()
            .map(|&dt| {
                let n = (10.0 / dt).round() as usize;
                classic_parareal((-dt).exp(), 1.0 - dt, 1.0, n, k)[k].iter().cloned().fold(0.0, f64::max)
            })
            .collect();
        slopes.push(fit_slope(&dts, &ys, 0.0)?.slope);
    }
    let ok = slopes.iter().enumerate().all(|(i, s)| (s - (i + 2) as f64).abs() <= 0.3);
    Ok(check(
        "classic parareal order",
        ok,
        format!("slopes for k=1,2,3: {:.2}, {:.2}, {:.2}", slopes[0], slopes[1], slopes[2]),
    ))
}

fn boundary_layer_bounds() -> Result<CheckResult> {
    let sys = builtin_toy(1e-3)?;
    let u0 = MicroState::new(&[1.0], &[0.0, 0.0]);
    let grid = log_grid(1e-5, 1e-2, 3);
    let report = lemma_diagnostics(&sys, &u0, &grid, &LemmaOptions::default())?;
    let witness: Vec<f64> = grid
        .iter()
        .map(|&e| {
            let s = sharpness_system(e)?;
            let r = lemma_diagnostics(&s, &MicroState::new(&[1.0], &[0.0]), &[e], &LemmaOptions::default())?;
            Ok(r.rows[0].offset_after_layer)
        })
        .collect::<Result<_>>()?;
    let floor = witness.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(check(
        "boundary-layer bounds",
        !report.flagged && floor >= 0.1,
        format!(
            "spreads {:?}, sharpness witness min ratio {floor:.3}",
            report.spread.iter().map(|s| (s * 100.0).round() / 100.0).collect::<Vec<_>>()
        ),
    ))
}

fn spectral_decay(opts: &VerifyOptions) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xdeca7);
    let mut matrices = vec![builtin_toy(1.0)?.a().clone()];
    for _ in 0..5 {
        let n = 3;
        let data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = Matrix::from_row_major(n, n, data);
        let shift = m.norm_inf() + 0.5;
        matrices.push(&m + &Matrix::identity(n).scaled(shift));
    }
    let mut worst = 0.0f64;
    let mut ok = true;
    for m in &matrices {
        let c = spectral_decay_check(m, 100)?;
        ok &= c.holds;
        worst = worst.max(c.max_ratio / c.constant);
    }
    Ok(check(
        "exponential decay bound",
        ok,
        format!("{} matrices, max sup/C {worst:.3}", matrices.len()),
    ))
}

/// Runs every check in a fixed order.
pub fn run_checks(opts: &VerifyOptions) -> Vec<CheckResult> {
    vec![
        from_result("toy macro rate", macro_rate()),
        from_result("linear algebra residuals", linear_algebra(opts)),
        from_result("exact propagator vs RK4", rk4_oracle()),
        transfer_identities(opts),
        from_result("consistency X = R u", consistency(opts)),
        from_result("local exactness", local_exactness(opts)),
        from_result("macroscopic error recursion", error_recursion(opts)),
        from_result("lifting error structure", lifting_structure(opts)),
        from_result("error lattices E = R e", error_table_consistency(opts)),
        from_result("determinism", determinism(opts)),
        from_result("slope fit on power laws", slope_fit()),
        from_result("classic parareal order", classic_baseline()),
        from_result("boundary-layer bounds", boundary_layer_bounds()),
        from_result("exponential decay bound", spectral_decay(opts)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Shifted;

    impl Matching for Shifted {
        fn apply(&self, x: &MacroState, v: &MicroState) -> MicroState {
            let shifted: Vec<f64> = x.as_slice().iter().map(|a| a + 1e-3).collect();
            MicroState::new(&shifted, v.fast())
        }
    }

    #[test]
    fn all_checks_pass() {
        for r in run_checks(&VerifyOptions::default()) {
            assert!(r.passed, "{r}");
        }
    }

    #[test]
    fn tampered_matching_is_caught() {
        let opts = VerifyOptions {
            matching: Arc::new(Shifted),
            ..VerifyOptions::default()
        };
        let results = run_checks(&opts);
        let get = |name: &str| results.iter().find(|r| r.name == name).unwrap().passed;
        assert!(!get("consistency X = R u"));
        assert!(!get("matching identities"));
    }
}
