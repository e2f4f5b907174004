//! Error measurement, convergence-order fits and numerical checks of the
//! boundary-layer bounds.

use std::fmt;
use std::time::Duration;

use serde::Serialize;

use crate::engine::PararealRun;
use crate::error::{Error, Result};
use crate::experiments::Scenario;
use crate::linalg::{self, norm2, Matrix};
use crate::propagators::MicroPropagator;
use crate::systems::{LinearFastSlowSystem, MacroState, MicroState};
use crate::transfer::restrict;

/// Provenance attached to every error row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLabel {
    pub system: String,
    pub coarse: String,
    pub fine: String,
    pub epsilon: f64,
}

/// One CSV row: errors of iterate `k` at time index `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    pub system: String,
    pub algorithm: u8,
    pub coarse: String,
    pub fine: String,
    pub epsilon: f64,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub k: usize,
    pub n: usize,
    pub rel_macro_error: f64,
    pub rel_micro_error: f64,
    pub abs_macro_error: f64,
    pub abs_micro_error: f64,
}

/// Signed error lattices `E[k][n] = X[k][n] − R u_ref[n]` and
/// `e[k][n] = u[k][n] − u_ref[n]`.
#[derive(Debug, Clone)]
pub struct ErrorLattice {
    pub macro_: Vec<Vec<MacroState>>,
    pub micro: Vec<Vec<MicroState>>,
}

pub fn error_lattice(run: &PararealRun) -> ErrorLattice {
    let reference = run.reference();
    assert_eq!(reference.len(), run.steps() + 1, "run has no reference trajectory");
    let rows = run.iterations() + 1;
    let macro_ = (0..rows)
        .map(|k| {
            run.macro_row(k)
                .iter()
                .zip(reference)
                .map(|(x, r)| x.sub(&restrict(r)))
                .collect()
        })
        .collect();
    let micro = (0..rows)
        .map(|k| {
            run.micro_row(k)
                .iter()
                .zip(reference)
                .map(|(u, r)| u.sub(r))
                .collect()
        })
        .collect();
    ErrorLattice { macro_, micro }
}

/// Error rows for every `(k, n)` of a completed run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn final_time(&self) -> impl Iterator<Item = &ErrorRow> {
        self.rows.iter().filter(|r| (r.n as f64 * r.dt - r.t_end).abs() <= 1e-9 * r.t_end)
    }

    pub fn get(&self, k: usize, n: usize) -> Option<&ErrorRow> {
        self.rows.iter().find(|r| r.k == k && r.n == n)
    }

    pub fn extend(&mut self, other: ErrorTable) {
        self.rows.extend(other.rows);
    }
}

/// Errors of `run` against its sequential fine reference.
pub fn compute_errors(run: &PararealRun, label: &RunLabel) -> ErrorTable {
    let lattice = error_lattice(run);
    let reference = run.reference();
    let last = &reference[run.steps()];
    let macro_scale = norm2(last.slow());
    let micro_scale = last.norm();
    let mut rows = Vec::with_capacity(lattice.micro.len() * (run.steps() + 1));
    for (k, (macro_row, micro_row)) in lattice.macro_.iter().zip(&lattice.micro).enumerate() {
        for (n, (big_e, small_e)) in macro_row.iter().zip(micro_row).enumerate() {
            let abs_macro = big_e.norm();
            let abs_micro = small_e.norm();
            rows.push(ErrorRow {
                system: label.system.clone(),
                algorithm: run.variant.number(),
                coarse: label.coarse.clone(),
                fine: label.fine.clone(),
                epsilon: label.epsilon,
                dt: run.dt,
                t_end: run.t_end,
                k,
                n,
                rel_macro_error: abs_macro / macro_scale,
                rel_micro_error: abs_micro / micro_scale,
                abs_macro_error: abs_macro,
                abs_micro_error: abs_micro,
            });
        }
    }
    ErrorTable { rows }
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub points_used: usize,
    pub floor: f64,
}

/// Fits `ln y = slope · ln x + intercept` on the points with `y > floor`.
pub fn fit_slope(xs: &[f64], ys: &[f64], floor: f64) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > floor && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let m = pts.len();
    if m < 2 {
        return Err(Error::TooFewPoints(m));
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::TooFewPoints(1));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(SlopeFit {
        xs: xs.to_vec(),
        ys: ys.to_vec(),
        slope,
        intercept: my - slope * mx,
        points_used: m,
        floor,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorLevel {
    Macro,
    Micro,
}

impl ErrorLevel {
    pub fn pick(self, row: &ErrorRow) -> f64 {
        match self {
            ErrorLevel::Macro => row.rel_macro_error,
            ErrorLevel::Micro => row.rel_micro_error,
        }
    }
}

/// Thresholds for the order fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderOptions {
    /// Relative errors at or below this are treated as round-off.
    pub floor: f64,
    /// Drop grid points with `t_BL(ε) ≥ Δt` (linear systems only).
    pub require_boundary_layer: bool,
    pub workers: usize,
}

impl Default for OrderOptions {
    fn default() -> Self {
        OrderOptions {
            floor: 1e-12,
            require_boundary_layer: true,
            workers: 1,
        }
    }
}

fn boundary_layer_ok(scenario: &Scenario, eps: f64, dt: f64) -> Result<bool> {
    Ok(match scenario.system_at(eps)?.as_linear() {
        Some(sys) => sys.boundary_layer_time() < dt,
        None => true,
    })
}

/// Final-time relative error of iterate `k` as a function of `ε`, with its
/// log-log slope.
pub fn epsilon_order(
    scenario: &Scenario,
    k: usize,
    epsilons: &[f64],
    level: ErrorLevel,
    opts: &OrderOptions,
) -> Result<SlopeFit> {
    let mut used = Vec::new();
    for &eps in epsilons {
        if !opts.require_boundary_layer || boundary_layer_ok(scenario, eps, scenario.dt)? {
            used.push((eps, scenario.dt));
        }
    }
    if used.len() < 2 {
        return Err(Error::TooFewPoints(used.len()));
    }
    let table = crate::experiments::sweep(scenario, &used, k, opts.workers, false)?;
    let ys: Vec<f64> = used
        .iter()
        .map(|(eps, _)| {
            table
                .final_time()
                .find(|r| r.k == k && r.epsilon == *eps)
                .map(|r| level.pick(r))
                .expect("sweep produced every point")
        })
        .collect();
    let xs: Vec<f64> = used.iter().map(|p| p.0).collect();
    fit_slope(&xs, &ys, opts.floor)
}

/// Final-time relative error of iterate `k` against `1/Δt` at fixed `ε`.
pub fn dt_order(
    scenario: &Scenario,
    k: usize,
    dts: &[f64],
    epsilon: f64,
    level: ErrorLevel,
    opts: &OrderOptions,
) -> Result<SlopeFit> {
    let mut used = Vec::new();
    for &dt in dts {
        if !opts.require_boundary_layer || boundary_layer_ok(scenario, epsilon, dt)? {
            used.push((epsilon, dt));
        }
    }
    if used.len() < 2 {
        return Err(Error::TooFewPoints(used.len()));
    }
    let table = crate::experiments::sweep(scenario, &used, k, opts.workers, false)?;
    let ys: Vec<f64> = used
        .iter()
        .map(|(_, dt)| {
            table
                .final_time()
                .find(|r| r.k == k && r.dt == *dt)
                .map(|r| level.pick(r))
                .expect("sweep produced every point")
        })
        .collect();
    let xs: Vec<f64> = used.iter().map(|p| 1.0 / p.1).collect();
    fit_slope(&xs, &ys, opts.floor)
}

/// Normalised bound ratios at one `ε`: each left-hand side divided by its
/// right-hand side without the constant.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaRow {
    pub epsilon: f64,
    /// `sup |x(t) − x0 e^{λt}| / (ε(|x0| + ‖z0‖))`
    pub slow_deviation: f64,
    /// `sup ‖z(t) − e^{−At/ε} z0‖ / (ε(|x0| + ‖z0‖))`
    pub offset_with_layer: f64,
    /// `sup_{t ≥ t_BL} ‖z(t)‖ / (ε(|x0| + ‖z0‖))`
    pub offset_after_layer: f64,
    /// `sup |x(t)| / (|x0| + ε‖y0‖)`
    pub slow_magnitude: f64,
    /// `sup_{t ≥ t_BL} ‖y(t)‖ / (|x0| + ε‖y0‖)`
    pub fast_magnitude: f64,
}

impl LemmaRow {
    fn families(&self) -> [f64; 5] {
        [
            self.slow_deviation,
            self.offset_with_layer,
            self.offset_after_layer,
            self.slow_magnitude,
            self.fast_magnitude,
        ]
    }
}

pub const LEMMA_FAMILY_NAMES: [&str; 5] = [
    "slow deviation |x - x0 e^(lambda t)|",
    "offset incl. layer |z - e^(-At/eps) z0|",
    "offset after layer |z|",
    "slow magnitude |x|",
    "fast magnitude after layer |y|",
];

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub rows: Vec<LemmaRow>,
    /// max/min of each ratio family over the grid points with `ε < ε₀`.
    pub spread: [f64; 5],
    pub flagged: bool,
}

/// Options for [`lemma_diagnostics`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaOptions {
    pub t_end: f64,
    /// Uniform samples on `[0, T]`.
    pub samples: usize,
    /// Extra samples across the boundary layer `[0, 2 t_BL]`.
    pub layer_samples: usize,
    /// Points with `ε ≥ ε₀` are reported but not flagged.
    pub epsilon_max: f64,
    /// Largest tolerated max/min ratio of a family across the grid.
    pub max_spread: f64,
}

impl Default for LemmaOptions {
    fn default() -> Self {
        LemmaOptions {
            t_end: 10.0,
            samples: 1000,
            layer_samples: 200,
            epsilon_max: 0.05,
            max_spread: 10.0,
        }
    }
}

fn lemma_row(sys: &LinearFastSlowSystem, u0: &MicroState, opts: &LemmaOptions) -> Result<LemmaRow> {
    let eps = sys.epsilon();
    let lambda = sys.macro_rate();
    let t_bl = sys.boundary_layer_time();
    let b = sys.generator();
    let x0 = u0.slow()[0];
    let z0 = sys.slow_manifold_offset(u0);
    let y0_norm = norm2(u0.fast());
    let lemma_scale = eps * (x0.abs() + z0.norm());
    let cor_scale = x0.abs() + eps * y0_norm;

    let h = opts.t_end / (opts.samples - 1) as f64;
    let step = linalg::mat_exp(&b.scaled(h))?;
    let mut times = Vec::with_capacity(opts.samples + opts.layer_samples);
    let mut states = Vec::with_capacity(times.capacity());
    let mut u = u0.as_slice().to_vec();
    for j in 0..opts.samples {
        if j > 0 {
            u = step.mul_vec(&u);
        }
        times.push(j as f64 * h);
        states.push(u.clone());
    }
    let layer_end = (2.0 * t_bl).min(opts.t_end);
    for j in 1..=opts.layer_samples {
        let t = layer_end * j as f64 / opts.layer_samples as f64;
        times.push(t);
        states.push(linalg::mat_exp(&b.scaled(t))?.mul_vec(u0.as_slice()));
    }

    let neg_a = -sys.a();
    let mut row = LemmaRow {
        epsilon: eps,
        slow_deviation: 0.0,
        offset_with_layer: 0.0,
        offset_after_layer: 0.0,
        slow_magnitude: 0.0,
        fast_magnitude: 0.0,
    };
    for (t, s) in times.iter().zip(&states) {
        let state = MicroState::from_flat(s.clone(), 1);
        let x = s[0];
        let z = sys.slow_manifold_offset(&state);
        row.slow_deviation = row.slow_deviation.max((x - x0 * (lambda * t).exp()).abs());
        row.slow_magnitude = row.slow_magnitude.max(x.abs());
        let decayed = linalg::mat_exp(&neg_a.scaled(t / eps))?.mul_vec(z0.as_slice());
        let dev: Vec<f64> = z.as_slice().iter().zip(&decayed).map(|(a, b)| a - b).collect();
        row.offset_with_layer = row.offset_with_layer.max(norm2(&dev));
        if *t >= t_bl {
            row.offset_after_layer = row.offset_after_layer.max(z.norm());
            row.fast_magnitude = row.fast_magnitude.max(norm2(state.fast()));
        }
    }
    row.slow_deviation /= lemma_scale;
    row.offset_with_layer /= lemma_scale;
    row.offset_after_layer /= lemma_scale;
    row.slow_magnitude /= cor_scale;
    row.fast_magnitude /= cor_scale;
    Ok(row)
}

/// Evaluates the boundary-layer bounds over an `ε` grid and flags any
/// ratio family whose spread exceeds `max_spread` for `ε < ε₀`.
pub fn lemma_diagnostics(
    sys: &LinearFastSlowSystem,
    u0: &MicroState,
    epsilons: &[f64],
    opts: &LemmaOptions,
) -> Result<LemmaReport> {
    let rows = epsilons
        .iter()
        .map(|&eps| lemma_row(&sys.with_epsilon(eps)?, u0, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut spread = [1.0; 5];
    for (f, s) in spread.iter_mut().enumerate() {
        let vals: Vec<f64> = rows
            .iter()
            .filter(|r| r.epsilon < opts.epsilon_max)
            .map(|r| r.families()[f])
            .collect();
        if vals.is_empty() {
            continue;
        }
        let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
        let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
        *s = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    }
    // NaN spreads count as failures
    let flagged = spread.iter().any(|s| s.is_nan() || *s > opts.max_spread);
    Ok(LemmaReport {
        rows,
        spread,
        flagged,
    })
}

/// `ẋ = −x`, `ẏ = (x − y)/ε`: its offset after the layer is of order `ε`
/// and no smaller.
pub fn sharpness_system(epsilon: f64) -> Result<LinearFastSlowSystem> {
    LinearFastSlowSystem::new(
        -1.0,
        linalg::Vector::new(vec![0.0]),
        linalg::Vector::new(vec![1.0]),
        Matrix::from_rows(&[&[1.0]]),
        epsilon,
    )
}

/// Result of the exponential decay check `‖exp(−Mt)‖ ≤ C e^{−μt}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayCheck {
    /// `μ = min Re σ(M) / 2`.
    pub mu: f64,
    /// Constant fitted on the initial window `t ≤ 10/μ`.
    pub constant: f64,
    /// Largest `‖exp(−Mt)‖ e^{μt}` over the whole horizon.
    pub max_ratio: f64,
    pub holds: bool,
}

/// Samples `‖exp(−Mt)‖₂ e^{μt}` on `samples` points of `[0, 50/μ]`, fits
/// `C` on the first fifth of the horizon and checks the bound on all of it.
pub fn spectral_decay_check(m: &Matrix, samples: usize) -> Result<DecayCheck> {
    let min_re = linalg::eigenvalues(m)?
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min);
    if min_re <= 0.0 {
        return Err(Error::NotStable(min_re));
    }
    let mu = min_re / 2.0;
    let horizon = 50.0 / mu;
    let mut ratios = Vec::with_capacity(samples);
    for j in 0..samples {
        let t = horizon * j as f64 / (samples - 1) as f64;
        let norm = linalg::mat_exp(&m.scaled(-t))?.norm_2()?;
        ratios.push((t, norm * (mu * t).exp()));
    }
    let constant = ratios
        .iter()
        .filter(|(t, _)| *t <= 10.0 / mu)
        .map(|r| r.1)
        .fold(0.0, f64::max);
    let max_ratio = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(DecayCheck {
        mu,
        constant,
        max_ratio,
        holds: max_ratio <= constant * (1.0 + 1e-9),
    })
}

/// Ideal and measured parallel speed-up of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupReport {
    pub steps: usize,
    pub iterations: usize,
    /// `N/K`; undefined without iterations.
    pub ideal: Option<f64>,
    pub workers: usize,
    pub fine_stage: Duration,
    pub fine_work: Duration,
    /// Summed fine work over fine-stage wall-clock time.
    pub measured: Option<f64>,
}

pub fn speedup_report(run: &PararealRun) -> SpeedupReport {
    let k = run.iterations();
    let n = run.steps();
    let fine_stage = run.fine_stage_time();
    let fine_work = run.fine_work_time();
    SpeedupReport {
        steps: n,
        iterations: k,
        ideal: (k > 0).then(|| n as f64 / k as f64),
        workers: run.workers,
        fine_stage,
        fine_work,
        measured: (fine_stage > Duration::ZERO)
            .then(|| fine_work.as_secs_f64() / fine_stage.as_secs_f64()),
    }
}

/// Formats `v` truncated (not rounded) to `digits` decimals.
pub fn truncate_decimals(v: f64, digits: u32) -> String {
    let scale = 10f64.powi(digits as i32);
    let t = (v * scale + 1e-9).floor() / scale;
    format!("{t:.*}", digits as usize)
}

impl fmt::Display for SpeedupReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.ideal {
            Some(s) => write!(
                f,
                "N={} K={} ideal speed-up N/K={}",
                self.steps,
                self.iterations,
                truncate_decimals(s, 1)
            )?,
            None => write!(
                f,
                "N={} K=0: no parareal iterations, ideal speed-up undefined",
                self.steps
            )?,
        }
        write!(
            f,
            " | workers={} fine-stage wall={:.3}s fine work={:.3}s",
            self.workers,
            self.fine_stage.as_secs_f64(),
            self.fine_work.as_secs_f64()
        )?;
        if let Some(m) = self.measured {
            write!(f, " measured ratio={m:.2}")?;
        }
        Ok(())
    }
}

/// Right-hand side of the macroscopic error recursion,
/// `Σ_{p=1}^{n−1} ρ^{n−p−1} (R Φ e[k][p] − ρ E[k][p])`, for exact linear
/// propagators.
pub fn recursion_prediction(
    phi: &Matrix,
    rho: f64,
    micro_errors: &[MicroState],
    macro_errors: &[MacroState],
    n: usize,
) -> f64 {
    let mut sum = 0.0;
    for p in 1..n {
        let r_phi_e = phi.row(0).iter().zip(micro_errors[p].as_slice()).map(|(a, b)| a * b).sum::<f64>();
        sum += rho.powi((n - p - 1) as i32) * (r_phi_e - rho * macro_errors[p].value());
    }
    sum
}

/// Relative distance used by the local-exactness checks.
pub fn relative_distance(a: &MicroState, b: &MicroState) -> f64 {
    a.distance(b) / (1.0 + b.norm())
}

/// Advances a linear system exactly and returns `Φ^n u0` for `n ≤ steps`.
pub fn exact_trajectory(sys: &LinearFastSlowSystem, dt: f64, u0: &MicroState, steps: usize) -> Result<Vec<MicroState>> {
    MicroPropagator::exact(sys, dt)?.reference_trajectory(u0, steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Variant;
    use crate::experiments::SystemName;
    use approx::assert_relative_eq;

    #[test]
    fn two_point_slope() {
        let f = fit_slope(&[1e-3, 1e-4], &[1e-6, 1e-8], 0.0).unwrap();
        assert_relative_eq!(f.slope, 2.0, epsilon = 1e-12);
        assert_eq!(f.points_used, 2);
    }

    #[test]
    fn constant_values_have_zero_slope() {
        let f = fit_slope(&[1.0, 2.0, 4.0], &[3.0, 3.0, 3.0], 0.0).unwrap();
        assert!(f.slope.abs() < 1e-14);
    }

    #[test]
    fn floor_excludes_points() {
        let xs = [1e-5, 1e-4, 1e-3, 1e-2];
        let ys = [1e-14, 1e-8, 1e-6, 1e-4];
        let f = fit_slope(&xs, &ys, 1e-13).unwrap();
        assert_eq!(f.points_used, 3);
        assert_relative_eq!(f.slope, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert_eq!(fit_slope(&[0.1], &[1.0], 0.0).unwrap_err(), Error::TooFewPoints(1));
        assert_eq!(
            fit_slope(&[0.1, 0.2], &[1e-15, 1.0], 1e-12).unwrap_err(),
            Error::TooFewPoints(1)
        );
    }

    #[test]
    fn truncation_formatting() {
        assert_eq!(truncate_decimals(100.0 / 6.0, 1), "16.6");
        assert_eq!(truncate_decimals(1.0, 1), "1.0");
        assert_eq!(truncate_decimals(2.25, 1), "2.2");
    }

    #[test]
    fn sharpness_witness() {
        let sys = sharpness_system(1e-3).unwrap();
        assert_eq!(sys.macro_rate(), -1.0);
        let u0 = MicroState::new(&[1.0], &[0.0]);
        let r = lemma_diagnostics(&sys, &u0, &[1e-4, 1e-3], &LemmaOptions::default()).unwrap();
        // z(t) ≈ ε x(t) after the layer, so the ratio sits near 1/2
        for row in &r.rows {
            assert!(row.offset_after_layer > 0.4 && row.offset_after_layer < 0.5, "{row:?}");
        }
    }

    fn toy_scenario(variant: Variant) -> Scenario {
        Scenario::new(SystemName::Toy, variant)
    }

    #[test]
    fn errors_vanish_at_start_and_inside_exact_region() {
        let s = toy_scenario(Variant::Matching).with_t_end(1.0);
        let run = crate::engine::run(&s.config(1e-3, 4).unwrap()).unwrap();
        let table = compute_errors(&run, &s.label(1e-3));
        for k in 0..=4 {
            assert_eq!(table.get(k, 0).unwrap().abs_micro_error, 0.0);
            for n in 0..=k {
                assert!(table.get(k, n).unwrap().abs_macro_error <= 1e-12);
            }
        }
        assert!(table.rows.iter().all(|r| r.rel_macro_error >= 0.0 && r.rel_micro_error >= 0.0));
        assert_eq!(table.final_time().count(), 5);
    }

    #[test]
    fn epsilon_orders_of_the_three_variants() {
        let grid = [1e-5, 1e-4, 1e-3];
        let opts = OrderOptions::default();
        let lifting = epsilon_order(&toy_scenario(Variant::Lifting), 1, &grid, ErrorLevel::Macro, &opts).unwrap();
        assert!((lifting.slope - 2.0).abs() < 0.3, "{lifting:?}");
        let matching = epsilon_order(&toy_scenario(Variant::Matching), 2, &grid, ErrorLevel::Micro, &opts).unwrap();
        assert!((matching.slope - 2.0).abs() < 0.3, "{matching:?}");
        let dae = epsilon_order(&toy_scenario(Variant::DaeCoarse), 1, &grid, ErrorLevel::Macro, &opts).unwrap();
        assert!((dae.slope - 2.0).abs() < 0.3, "{dae:?}");
    }

    #[test]
    fn large_epsilon_points_are_dropped() {
        // t_BL(0.1) > 0.1, so only two points remain
        let grid = [1e-4, 1e-3, 1e-1];
        let fit = epsilon_order(&toy_scenario(Variant::Lifting), 0, &grid, ErrorLevel::Macro, &OrderOptions::default()).unwrap();
        assert_eq!(fit.points_used, 2);
        assert_eq!(fit.xs, vec![1e-4, 1e-3]);
    }

    #[test]
    fn dt_order_needs_two_steps() {
        let s = toy_scenario(Variant::Matching);
        let err = dt_order(&s, 1, &[0.1], 1e-5, ErrorLevel::Macro, &OrderOptions::default()).unwrap_err();
        assert_eq!(err, Error::TooFewPoints(1));
        // with exact propagators the initial sweep is exp(λt) x0 whatever Δt is
        let fit = dt_order(&s, 0, &[0.2, 0.1, 0.05], 1e-5, ErrorLevel::Macro, &OrderOptions::default()).unwrap();
        assert!(fit.slope.abs() < 1e-6, "{fit:?}");
    }

    #[test]
    fn speedup_numbers() {
        let s = toy_scenario(Variant::Matching);
        let run = crate::engine::run(&s.config(1e-3, 6).unwrap()).unwrap();
        let r = speedup_report(&run);
        assert_eq!((r.steps, r.iterations), (100, 6));
        assert_eq!(truncate_decimals(r.ideal.unwrap(), 1), "16.6");
        assert!(r.to_string().contains("N/K=16.6"));
        let short = toy_scenario(Variant::Matching).with_t_end(0.5);
        let run = crate::engine::run(&short.config(1e-3, 5).unwrap()).unwrap();
        assert_eq!(speedup_report(&run).ideal, Some(1.0));
        let run = crate::engine::run(&short.config(1e-3, 0).unwrap()).unwrap();
        let r = speedup_report(&run);
        assert_eq!(r.ideal, None);
        assert!(r.to_string().contains("undefined"));
    }

    #[test]
    fn single_worker_measured_ratio_near_one() {
        let s = toy_scenario(Variant::Matching).with_fine(crate::experiments::Scheme::Euler).with_fine_step(1e-4);
        let run = crate::engine::run(&s.config(1e-2, 2).unwrap()).unwrap();
        let m = speedup_report(&run).measured.unwrap();
        assert!(m > 0.8 && m <= 1.0 + 1e-9, "{m}");
    }

    #[test]
    fn lemma_flag_ignores_large_epsilon() {
        let sys = crate::systems::builtin_toy(1e-3).unwrap();
        let u0 = MicroState::new(&[1.0], &[0.0, 0.0]);
        let opts = LemmaOptions {
            max_spread: 1.05,
            epsilon_max: 1e-3,
            ..LemmaOptions::default()
        };
        let r = lemma_diagnostics(&sys, &u0, &[1e-5, 1e-4, 0.5], &opts).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert!(!r.flagged, "{:?}", r.spread);
        let strict = LemmaOptions { epsilon_max: 1.0, ..opts };
        assert!(lemma_diagnostics(&sys, &u0, &[1e-5, 1e-4, 0.5], &strict).unwrap().flagged);
    }

    #[test]
    fn decay_bound_for_normal_and_non_normal_matrices() {
        let normal = Matrix::from_diagonal(&[1.0, 3.0]);
        let c = spectral_decay_check(&normal, 100).unwrap();
        assert!(c.holds);
        assert!((c.constant - 1.0).abs() < 1e-12);
        let shear = Matrix::from_rows(&[&[1.0, 20.0], &[0.0, 1.0]]);
        let c = spectral_decay_check(&shear, 100).unwrap();
        assert!(c.holds && c.constant > 1.0, "{c:?}");
        assert!(matches!(
            spectral_decay_check(&Matrix::from_diagonal(&[-1.0, 2.0]), 10),
            Err(Error::NotStable(_))
        ));
    }
}
