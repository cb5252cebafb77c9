//! Trajectory driver shared by the well-mixed and lattice engines.

use rand::Rng;
use rand_distr::Exp1;
use thiserror::Error;

use crate::model::{ParamError, SimParams};
use crate::outcome::{Diagnostics, GenealogyRecord, Outcome, RecordOptions, SeriesPoint, StopReason, Verdict};
use crate::rng::TrialRng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("the population is extinct; no further events")]
    Extinct,
    #[error("invalid initial configuration: {0}")]
    Configuration(String),
}

/// Standard exponential draw divided by `rate`.
#[inline]
pub(crate) fn holding_time<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let e: f64 = rng.sample(Exp1);
    e / rate
}

/// Mutation flag; the degenerate cases consume no randomness.
#[inline]
pub(crate) fn mutates<R: Rng + ?Sized>(rng: &mut R, r: f64) -> bool {
    if r <= 0.0 {
        false
    } else if r >= 1.0 {
        true
    } else {
        rng.random::<f64>() < r
    }
}

/// What the driver needs from an engine state.
pub(crate) trait Dynamics {
    fn time(&self) -> f64;
    fn population(&self) -> u64;
    fn type_count(&self) -> usize;
    fn extent(&self) -> Option<(i64, i64)> {
        None
    }
    /// Draws the next holding time. If the event lands at or before `horizon`
    /// it is applied and `true` returned; otherwise the state is untouched.
    fn advance(&mut self, params: &SimParams, rng: &mut TrialRng, horizon: f64) -> Result<bool, SimError>;
    fn take_genealogy(&mut self) -> Option<GenealogyRecord>;
    fn verify(&self) -> Result<(), String> {
        Ok(())
    }
    fn boundary_bound(&self) -> Option<bool> {
        None
    }
}

struct SeriesRecorder {
    points: Vec<SeriesPoint>,
    stride: Option<f64>,
    every_event: bool,
    next_grid: u64,
}

impl SeriesRecorder {
    fn new(opts: &RecordOptions) -> Option<Self> {
        opts.wants_series().then(|| SeriesRecorder {
            points: Vec::new(),
            stride: opts.series_stride.filter(|s| *s > 0.0),
            every_event: opts.series_every_event,
            next_grid: 0,
        })
    }

    fn push(&mut self, p: SeriesPoint) {
        match self.points.last_mut() {
            Some(last) if p.t <= last.t => *last = SeriesPoint { t: last.t, ..p },
            _ => self.points.push(p),
        }
    }

    /// Emits grid samples in `[.., until)` (or `..= until` if `inclusive`)
    /// using the state that held before `until`.
    fn fill_grid(&mut self, held: SeriesPoint, until: f64, inclusive: bool) {
        let Some(stride) = self.stride else { return };
        loop {
            let g = self.next_grid as f64 * stride;
            if g > until || (!inclusive && g == until) {
                break;
            }
            self.push(SeriesPoint { t: g, ..held });
            self.next_grid += 1;
        }
    }
}

fn snapshot<D: Dynamics>(state: &D) -> SeriesPoint {
    SeriesPoint {
        t: state.time(),
        population: state.population(),
        types: state.type_count() as u64,
        extent: state.extent(),
    }
}

pub(crate) fn run<D: Dynamics>(
    mut state: D,
    params: &SimParams,
    rng: &mut TrialRng,
    opts: &RecordOptions,
) -> Result<Outcome, SimError> {
    params.validate()?;
    let stop = params.stop;
    let mut events = 0u64;
    let mut diag = Diagnostics::default();
    let mut series = SeriesRecorder::new(opts);
    if let Some(rec) = series.as_mut() {
        if rec.every_event {
            rec.push(snapshot(&state));
        }
    }

    let check = |state: &D, events: u64, diag: &mut Diagnostics| {
        if opts.verify_every.is_some_and(|n| n > 0 && events % n == 0) {
            diag.consistency_checks += 1;
            if state.verify().is_err() {
                diag.consistency_violations += 1;
            }
        }
        if opts.boundary_bound_every.is_some_and(|n| n > 0 && events % n == 0) {
            if let Some(ok) = state.boundary_bound() {
                diag.boundary_bound_checks += 1;
                if !ok {
                    diag.boundary_bound_failures += 1;
                }
            }
        }
    };
    check(&state, 0, &mut diag);

    let verdict = loop {
        if state.population() == 0 {
            break Verdict::Extinct { time: state.time() };
        }
        if state.population() >= stop.max_population {
            break Verdict::SurvivedProxy {
                reason: StopReason::PopulationCap,
                time: state.time(),
            };
        }
        if events >= stop.max_events {
            break Verdict::SurvivedProxy {
                reason: StopReason::EventCap,
                time: state.time(),
            };
        }
        let before = snapshot(&state);
        if !state.advance(params, rng, stop.max_time)? {
            if let Some(rec) = series.as_mut() {
                rec.fill_grid(before, stop.max_time, true);
                rec.push(SeriesPoint { t: stop.max_time, ..before });
            }
            break Verdict::SurvivedProxy {
                reason: StopReason::TimeHorizon,
                time: stop.max_time,
            };
        }
        events += 1;
        if let Some(rec) = series.as_mut() {
            rec.fill_grid(before, state.time(), false);
            if rec.every_event {
                rec.push(snapshot(&state));
            }
        }
        check(&state, events, &mut diag);
    };

    if let Some(rec) = series.as_mut() {
        if !matches!(verdict, Verdict::SurvivedProxy { reason: StopReason::TimeHorizon, .. }) {
            rec.push(snapshot(&state));
        }
    }

    Ok(Outcome {
        verdict,
        final_population: state.population(),
        final_type_count: state.type_count() as u64,
        events,
        series: series.map(|s| s.points),
        genealogy: state.take_genealogy(),
        diagnostics: diag,
    })
}
