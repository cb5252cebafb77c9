//! wasm-bindgen bindings behind `www/index.html`. Each export wraps a plain
//! Rust function so the logic is testable natively.

use immune_sim::analytic::{model2_mean_offspring, model3_phase, AnalyticError, SurvivalProbability};
use immune_sim::spatial::SpatialState;
use immune_sim::{derive_trial_rng, ModelId, RecordOptions, SimParams, StopRule, TrialRng};
use wasm_bindgen::prelude::*;

/// Largest lattice the stepper lets grow before it stops adding events.
const LATTICE_CAP: u64 = 20_000;

fn js_err(e: impl ToString) -> JsError {
    JsError::new(&e.to_string())
}

/// Closed-form curve over `lambdas` at fixed `r`: the Model 3 survival
/// probability `max(0, 1 - 1/(r lambda))`, or the Model 2 mean number of
/// mutant types per type (`Infinity` once `lambda (1 - r) >= 1`).
pub fn curve(model: &str, r: f64, lambdas: &[f64]) -> Result<Vec<f64>, String> {
    let model: ModelId = model.parse().map_err(|e: immune_sim::ParamError| e.to_string())?;
    lambdas
        .iter()
        .map(|&l| match model {
            ModelId::M3 => model3_phase(l, r).map(|v| match v.survival_probability {
                SurvivalProbability::Positive(p) => p,
                _ => 0.0,
            }),
            ModelId::M2 => model2_mean_offspring(l, r).map(|m| m.finite().unwrap_or(f64::INFINITY)),
            other => Err(AnalyticError::InvalidParameter(format!("no closed-form curve for {other}"))),
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn analytic_curve(model: &str, r: f64, lambdas: Vec<f64>) -> Result<Vec<f64>, JsError> {
    curve(model, r, &lambdas).map_err(js_err)
}

/// One well-mixed trajectory sampled every `stride` time units, flattened as
/// `[t0, N0, K0, t1, N1, K1, ...]`.
pub fn trajectory_points(
    model: &str,
    lambda: f64,
    r: f64,
    seed: u64,
    max_pop: u64,
    max_time: f64,
    stride: f64,
) -> Result<Vec<f64>, String> {
    let model: ModelId = model.parse().map_err(|e: immune_sim::ParamError| e.to_string())?;
    let params = SimParams::nonspatial(model, lambda, r)
        .map_err(|e| e.to_string())?
        .with_stop(StopRule {
            max_population: max_pop,
            max_time,
            ..StopRule::default()
        });
    if !(stride > 0.0) {
        return Err("stride must be positive".into());
    }
    let opts = RecordOptions::default().with_series(stride);
    let out = immune_sim::simulate(&params, &mut derive_trial_rng(seed, 0), &opts).map_err(|e| e.to_string())?;
    Ok(out
        .series
        .unwrap_or_default()
        .iter()
        .flat_map(|p| [p.t, p.population as f64, p.types as f64])
        .collect())
}

#[wasm_bindgen]
pub fn trajectory(
    model: &str,
    lambda: f64,
    r: f64,
    seed: u64,
    max_pop: u64,
    max_time: f64,
    stride: f64,
) -> Result<Vec<f64>, JsError> {
    trajectory_points(model, lambda, r, seed, max_pop, max_time, stride).map_err(js_err)
}

/// A lattice population advanced a batch of events at a time.
#[wasm_bindgen]
pub struct Lattice {
    params: SimParams,
    state: SpatialState,
    rng: TrialRng,
}

impl Lattice {
    pub fn create(model: &str, dim: u32, lambda: f64, r: f64, seed: u64) -> Result<Lattice, String> {
        let model: ModelId = model.parse().map_err(|e: immune_sim::ParamError| e.to_string())?;
        if !(1..=2).contains(&dim) {
            return Err("the demo draws one- or two-dimensional lattices".into());
        }
        let params = SimParams::spatial(model, dim, lambda, r).map_err(|e| e.to_string())?;
        let state = SpatialState::new(&params, false).map_err(|e| e.to_string())?;
        Ok(Lattice {
            params,
            state,
            rng: derive_trial_rng(seed, 0),
        })
    }
}

#[wasm_bindgen]
impl Lattice {
    #[wasm_bindgen(constructor)]
    pub fn new(model: &str, dim: u32, lambda: f64, r: f64, seed: u64) -> Result<Lattice, JsError> {
        Lattice::create(model, dim, lambda, r, seed).map_err(js_err)
    }

    /// Applies up to `events` events; returns whether the population can
    /// still change (alive and under the size cap).
    pub fn advance(&mut self, events: u32) -> bool {
        for _ in 0..events {
            if !self.running() {
                break;
            }
            self.state
                .step(&self.params, &mut self.rng)
                .expect("live lattice always has an event");
        }
        self.running()
    }

    pub fn running(&self) -> bool {
        self.state.population() > 0 && self.state.population() < LATTICE_CAP
    }

    pub fn time(&self) -> f64 {
        self.state.time()
    }

    pub fn population(&self) -> u32 {
        self.state.population() as u32
    }

    pub fn type_count(&self) -> u32 {
        self.state.type_count() as u32
    }

    /// Occupied sites as `[x, y, type, x, y, type, ...]` (`y = 0` in one
    /// dimension). Type ids wrap at 2^31 for colouring only.
    pub fn cells(&self) -> Vec<i32> {
        let mut out = Vec::with_capacity(3 * self.state.population() as usize);
        for (site, ty) in self.state.cells() {
            out.extend([site.0[0], site.0[1], (ty.get() & 0x7fff_ffff) as i32]);
        }
        out
    }
}
