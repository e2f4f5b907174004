//! Browser bindings: each export runs a small experiment on the linear test
//! system and returns JSON for the page in `www/` to plot.

use parareal_core::engine;
use parareal_core::experiments::{log_grid, sweep_epsilon, Scenario, Scheme, SystemName};
use parareal_core::Variant;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest iteration count accepted from the page.
const MAX_K: usize = 40;

#[derive(Debug, Serialize)]
pub struct EpsilonCurves {
    pub epsilons: Vec<f64>,
    /// `macro_errors[k][i]`: relative final-time error of iterate `k` at `epsilons[i]`.
    pub macro_errors: Vec<Vec<f64>>,
    pub micro_errors: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct History {
    pub epsilon: f64,
    pub macro_errors: Vec<f64>,
    pub micro_errors: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Trajectories {
    pub times: Vec<f64>,
    pub reference: Vec<f64>,
    /// Slow component of each iterate, `iterates[k][n]`.
    pub iterates: Vec<Vec<f64>>,
}

fn scenario(variant: u8, coarse: &str) -> Result<Scenario, String> {
    let v = Variant::from_number(variant).ok_or_else(|| format!("unknown algorithm {variant}"))?;
    let c: Scheme = coarse.parse().map_err(|e| format!("{e}"))?;
    Ok(Scenario::new(SystemName::Toy, v).with_coarse(c))
}

fn check_k(k_max: usize) -> Result<(), String> {
    if k_max > MAX_K {
        return Err(format!("at most {MAX_K} iterations"));
    }
    Ok(())
}

/// Final-time errors over `ε ∈ [1e-5, 1e-1]` for every `k ≤ k_max`.
pub fn epsilon_curves(variant: u8, coarse: &str, k_max: usize, per_decade: usize) -> Result<EpsilonCurves, String> {
    check_k(k_max)?;
    let s = scenario(variant, coarse)?;
    let epsilons = log_grid(1e-5, 1e-1, per_decade.clamp(1, 10));
    let table = sweep_epsilon(&s, &epsilons, k_max, 1, false).map_err(|e| e.to_string())?;
    let mut macro_errors = vec![Vec::with_capacity(epsilons.len()); k_max + 1];
    let mut micro_errors = vec![Vec::with_capacity(epsilons.len()); k_max + 1];
    for r in &table.rows {
        macro_errors[r.k].push(r.rel_macro_error);
        micro_errors[r.k].push(r.rel_micro_error);
    }
    Ok(EpsilonCurves {
        epsilons,
        macro_errors,
        micro_errors,
    })
}

/// Final-time errors against the iteration number at one `ε`.
pub fn iteration_history(variant: u8, coarse: &str, epsilon: f64, k_max: usize) -> Result<History, String> {
    check_k(k_max)?;
    let s = scenario(variant, coarse)?;
    let table = sweep_epsilon(&s, &[epsilon], k_max, 1, false).map_err(|e| e.to_string())?;
    Ok(History {
        epsilon,
        macro_errors: table.rows.iter().map(|r| r.rel_macro_error).collect(),
        micro_errors: table.rows.iter().map(|r| r.rel_micro_error).collect(),
    })
}

/// Slow component of the reference and of every iterate on the time grid.
pub fn trajectories(variant: u8, coarse: &str, epsilon: f64, k_max: usize) -> Result<Trajectories, String> {
    check_k(k_max)?;
    let s = scenario(variant, coarse)?;
    let config = s.config(epsilon, k_max).map_err(|e| e.to_string())?;
    let run = engine::run(&config).map_err(|e| e.to_string())?;
    Ok(Trajectories {
        times: (0..=run.steps()).map(|n| n as f64 * run.dt).collect(),
        reference: run.reference().iter().map(|u| u.slow()[0]).collect(),
        iterates: (0..=k_max)
            .map(|k| run.micro_row(k).iter().map(|u| u.slow()[0]).collect())
            .collect(),
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = epsilonCurves)]
pub fn epsilon_curves_js(variant: u8, coarse: &str, k_max: usize, per_decade: usize) -> Result<String, JsValue> {
    to_js(epsilon_curves(variant, coarse, k_max, per_decade))
}

#[wasm_bindgen(js_name = iterationHistory)]
pub fn iteration_history_js(variant: u8, coarse: &str, epsilon: f64, k_max: usize) -> Result<String, JsValue> {
    to_js(iteration_history(variant, coarse, epsilon, k_max))
}

#[wasm_bindgen(js_name = trajectories)]
pub fn trajectories_js(variant: u8, coarse: &str, epsilon: f64, k_max: usize) -> Result<String, JsValue> {
    to_js(trajectories(variant, coarse, epsilon, k_max))
}
