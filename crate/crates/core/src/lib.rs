//! Exact event-driven simulation of pathogen populations facing an immune
//! response that wipes out a whole type at once.
//!
//! Three well-mixed branching models ([`nonspatial`]) and three lattice
//! models on `Z^d` ([`spatial`]) share the parameter types in [`model`] and
//! the seeding contract in [`rng`]. [`analytic`] holds the closed forms that
//! the Monte Carlo harness in [`experiments`] is checked against.

pub mod analytic;
mod engine;
pub mod experiments;
pub mod fenwick;
pub mod model;
pub mod nonspatial;
pub mod outcome;
pub mod rng;
pub mod spatial;
pub mod types;

pub use engine::SimError;
pub use model::{DeathRule, ModelId, ParamError, SimParams, StopRule, TypeId};
pub use outcome::{GenealogyRecord, Outcome, RecordOptions, SeriesPoint, StopReason, TypeRecord, Verdict};
pub use rng::{derive_trial_rng, RngContract, TrialRng};

/// Runs one trajectory with whichever engine the model calls for.
pub fn simulate(params: &SimParams, rng: &mut TrialRng, opts: &RecordOptions) -> Result<Outcome, SimError> {
    if params.model.is_spatial() {
        spatial::run(params, rng, opts)
    } else {
        nonspatial::run(params, rng, opts)
    }
}
