//! Monte Carlo harness: batches of independently seeded trials, survival
//! estimates with Wilson intervals, parameter sweeps, and bisection for
//! critical parameters.
//!
//! Trial `i` of an experiment with master seed `s` always uses
//! `derive_trial_rng(s, i)`, and aggregation only counts verdicts, so results
//! do not depend on how many threads run the trials.

mod bisect;
mod diagnostics;
pub mod stats;
mod sweep;

use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::engine::SimError;
use crate::model::SimParams;
use crate::outcome::{Outcome, RecordOptions};
use crate::rng::derive_trial_rng;

pub use bisect::{bisect_by, bisect_critical, Axis, BisectOptions, BisectionResult, DecisionRule, Probe, ProbeClass};
pub use diagnostics::{
    growth_gamma, linear_growth_diagnostic, root_offspring_sample, root_type_offspring, RootOffspringSample, type_size_tail, GrowthSummary, OffspringHistogram, TailFit,
};
pub use stats::{wilson_interval, z_for_confidence};
pub use sweep::{sweep, SweepResult, SweepRow};

/// Default confidence level of reported intervals.
pub const DEFAULT_CONFIDENCE: f64 = 0.99;
/// Largest fraction of event-capped trials tolerated in one estimate.
pub const MAX_EVENT_CAP_FRACTION: f64 = 0.001;
/// Default trial counts per estimate.
pub const DEFAULT_SPATIAL_TRIALS: u64 = 2_000;
pub const DEFAULT_NONSPATIAL_TRIALS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{} of {} trials hit the event cap", .0.event_caps, .0.trials)]
    EventCapAnomaly(Box<SurvivalEstimate>),
    #[error("bracket invalid: lower end {lo} classified {lo_class}, upper end {hi} classified {hi_class}")]
    BracketInvalid {
        lo: f64,
        hi: f64,
        lo_class: ProbeClass,
        hi_class: ProbeClass,
    },
    #[error("undecidable probe at {value}: interval straddles the decision threshold after escalation")]
    UndecidableProbe { value: f64 },
}

/// Worker-pool size. Results never depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Parallelism(pub usize);

impl Parallelism {
    pub fn sequential() -> Self {
        Parallelism(1)
    }

    pub fn available() -> Self {
        Parallelism(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
    }
}

impl Default for Parallelism {
    fn default() -> Self {
        Self::available()
    }
}

/// Runs trials `0..trials` and maps each outcome through `f`, preserving trial order.
pub fn map_trials<T, F>(
    params: &SimParams,
    trials: u64,
    master_seed: u64,
    record: &RecordOptions,
    parallelism: Parallelism,
    f: F,
) -> Result<Vec<T>, SimError>
where
    T: Send,
    F: Fn(u64, Outcome) -> T + Sync,
{
    params.validate()?;
    map_indices(trials, parallelism, |i| {
        let mut rng = derive_trial_rng(master_seed, i);
        crate::simulate(params, &mut rng, record).map(|o| f(i, o))
    })
}

/// Evaluates `f(0), .., f(n - 1)` on up to `parallelism` threads and collects
/// the results in index order, stopping at the first error.
pub fn map_indices<T, E, F>(n: u64, parallelism: Parallelism, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(u64) -> Result<T, E> + Sync,
{
    #[cfg(feature = "parallel")]
    if parallelism.0 > 1 && n > 1 {
        use rayon::prelude::*;
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(parallelism.0).build() {
            return pool.install(|| (0..n).into_par_iter().map(&f).collect());
        }
    }
    let _ = parallelism;
    (0..n).map(f).collect()
}

/// Runs trials and keeps every outcome.
pub fn run_trials(
    params: &SimParams,
    trials: u64,
    master_seed: u64,
    record: &RecordOptions,
    parallelism: Parallelism,
) -> Result<Vec<Outcome>, SimError> {
    map_trials(params, trials, master_seed, record, parallelism, |_, o| o)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub confidence: f64,
    pub parallelism: Parallelism,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            confidence: DEFAULT_CONFIDENCE,
            parallelism: Parallelism::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalEstimate {
    pub params: SimParams,
    pub trials: u64,
    pub survivors: u64,
    pub event_caps: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
    pub master_seed: u64,
    /// Measured, so excluded from equality-based reproducibility checks.
    pub wall_time_s: f64,
}

impl SurvivalEstimate {
    pub fn from_counts(
        params: SimParams,
        trials: u64,
        survivors: u64,
        event_caps: u64,
        confidence: f64,
        master_seed: u64,
    ) -> Result<Self, ExperimentError> {
        let (ci_low, ci_high) = wilson_interval(survivors, trials, confidence)?;
        Ok(SurvivalEstimate {
            params,
            trials,
            survivors,
            event_caps,
            estimate: survivors as f64 / trials as f64,
            ci_low,
            ci_high,
            confidence,
            master_seed,
            wall_time_s: 0.0,
        })
    }

    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }

    pub fn is_anomalous(&self) -> bool {
        self.event_caps as f64 > MAX_EVENT_CAP_FRACTION * self.trials as f64
    }

    /// Equality ignoring the measured wall time.
    pub fn same_result(&self, other: &SurvivalEstimate) -> bool {
        SurvivalEstimate { wall_time_s: 0.0, ..self.clone() } == SurvivalEstimate { wall_time_s: 0.0, ..other.clone() }
    }
}

/// Fraction of trials that survive (reach the population cap or the time
/// horizon). Event-capped trials count as non-survivors and fail the
/// estimate when they exceed 0.1% of trials.
pub fn estimate_survival(
    params: &SimParams,
    trials: u64,
    master_seed: u64,
    opts: &EstimateOptions,
) -> Result<SurvivalEstimate, ExperimentError> {
    if trials == 0 {
        return Err(ExperimentError::InvalidArgument("trials must be positive".into()));
    }
    let started = Instant::now();
    let verdicts = map_trials(params, trials, master_seed, &RecordOptions::default(), opts.parallelism, |_, o| {
        (o.verdict.is_survivor(), o.verdict.hit_event_cap())
    })?;
    let survivors = verdicts.iter().filter(|v| v.0).count() as u64;
    let event_caps = verdicts.iter().filter(|v| v.1).count() as u64;
    let mut est = SurvivalEstimate::from_counts(*params, trials, survivors, event_caps, opts.confidence, master_seed)?;
    est.wall_time_s = started.elapsed().as_secs_f64();
    if est.is_anomalous() {
        return Err(ExperimentError::EventCapAnomaly(Box::new(est)));
    }
    Ok(est)
}
