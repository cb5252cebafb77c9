use std::collections::BTreeMap;

use serde::Serialize;

use super::stats::linear_fit;
use super::{map_indices, ExperimentError, Parallelism};
use crate::model::{ParamError, SimParams, TypeId};
use crate::nonspatial::{NonSpatialState, NsEventKind};
use crate::outcome::{GenealogyRecord, Outcome};
use crate::rng::{derive_trial_rng, TrialRng};
use crate::SimError;

/// Frequencies of mutant-offspring counts over completed types.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OffspringHistogram {
    pub counts: BTreeMap<u64, u64>,
    pub total: u64,
}

impl OffspringHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, offspring: u64) {
        *self.counts.entry(offspring).or_insert(0) += 1;
        self.total += 1;
    }

    /// Adds every type of `record` whose death time is closed.
    pub fn add_record(&mut self, record: &GenealogyRecord) {
        for t in record.closed() {
            self.add(t.mutant_offspring);
        }
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a GenealogyRecord>) -> Self {
        let mut h = Self::new();
        for r in records {
            h.add_record(r);
        }
        h
    }

    pub fn frequency(&self, k: u64) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.counts.get(&k).copied().unwrap_or(0) as f64 / self.total as f64
    }

    pub fn mean(&self) -> Option<f64> {
        (self.total > 0).then(|| {
            self.counts.iter().map(|(&k, &c)| k as f64 * c as f64).sum::<f64>() / self.total as f64
        })
    }

    /// Total-variation distance to a probability mass function on {0, 1, ...}.
    /// Mass of `pmf` outside the observed support is counted in full, which
    /// is exact when `pmf` sums to one.
    pub fn tv_distance(&self, pmf: impl Fn(u64) -> f64) -> f64 {
        let mut diff = 0.0;
        let mut covered = 0.0;
        for &k in self.counts.keys() {
            let p = pmf(k);
            covered += p;
            diff += (self.frequency(k) - p).abs();
        }
        0.5 * (diff + (1.0 - covered).max(0.0))
    }
}

/// Runs one well-mixed trajectory until type 1 is killed and returns the
/// number of mutant births founded by type-1 parents. `None` if the event cap
/// of `params.stop` is reached first.
pub fn root_type_offspring(params: &SimParams, rng: &mut TrialRng) -> Result<Option<u64>, SimError> {
    let mut state = NonSpatialState::new(params, false)?;
    let mut offspring = 0;
    for _ in 0..params.stop.max_events {
        let ev = state.step(params, rng)?;
        match ev.kind {
            NsEventKind::Birth {
                parent_type: TypeId::ROOT,
                is_mutant: true,
                ..
            } => offspring += 1,
            NsEventKind::TypeDeath {
                type_id: TypeId::ROOT, ..
            } => return Ok(Some(offspring)),
            _ => {}
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootOffspringSample {
    pub lifetimes: u64,
    /// Runs that hit the event cap before type 1 died; excluded from the mean.
    pub unfinished: u64,
    pub total_offspring: u64,
    pub mean: Option<f64>,
    pub histogram: OffspringHistogram,
}

/// Type-1 mutant-offspring counts over `lifetimes` independent runs, run `i`
/// seeded with `derive_trial_rng(master_seed, i)`.
pub fn root_offspring_sample(
    params: &SimParams,
    lifetimes: u64,
    master_seed: u64,
    parallelism: Parallelism,
) -> Result<RootOffspringSample, ExperimentError> {
    if params.model.is_spatial() {
        return Err(SimError::from(ParamError::WrongEngine {
            model: params.model,
            engine: "well-mixed",
        })
        .into());
    }
    let counts = map_indices(lifetimes, parallelism, |i| {
        root_type_offspring(params, &mut derive_trial_rng(master_seed, i))
    })?;
    let mut histogram = OffspringHistogram::new();
    let mut unfinished = 0;
    for c in counts {
        match c {
            Some(k) => histogram.add(k),
            None => unfinished += 1,
        }
    }
    let total_offspring = histogram.counts.iter().map(|(&k, &c)| k * c).sum();
    Ok(RootOffspringSample {
        lifetimes,
        unfinished,
        total_offspring,
        mean: histogram.mean(),
        histogram,
    })
}

/// `min(1, lambda / 6)`, the linear growth rate of surviving one-dimensional
/// lattice runs.
pub fn growth_gamma(lambda: f64) -> f64 {
    (lambda / 6.0).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthSummary {
    pub t_probe: f64,
    pub threshold: f64,
    /// Surviving runs considered.
    pub runs: u64,
    /// Survivors that stopped at the population cap before `t_probe`; their
    /// `N(t_probe)` is unobserved and they are excluded from `ratios`.
    pub censored: u64,
    /// `N(t_probe) / t_probe` per observed survivor, in input order.
    pub ratios: Vec<f64>,
    pub above: u64,
    pub fraction_above: Option<f64>,
}

/// Distribution of `N(t_probe) / t_probe` over surviving runs, and the
/// fraction at or above `threshold` (default `gamma / 2`). Runs need a
/// recorded series reaching `t_probe`.
pub fn linear_growth_diagnostic(
    outcomes: &[Outcome],
    lambda: f64,
    t_probe: f64,
    threshold: Option<f64>,
) -> Result<GrowthSummary, ExperimentError> {
    if !(t_probe.is_finite() && t_probe > 0.0) {
        return Err(ExperimentError::InvalidArgument(format!("t_probe must be positive, got {t_probe}")));
    }
    let threshold = threshold.unwrap_or_else(|| growth_gamma(lambda) / 2.0);
    let mut summary = GrowthSummary {
        t_probe,
        threshold,
        runs: 0,
        censored: 0,
        ratios: Vec::new(),
        above: 0,
        fraction_above: None,
    };
    for o in outcomes.iter().filter(|o| o.verdict.is_survivor()) {
        summary.runs += 1;
        match o.population_at(t_probe) {
            Some(n) => {
                let ratio = n as f64 / t_probe;
                summary.above += u64::from(ratio >= threshold);
                summary.ratios.push(ratio);
            }
            None if o.series.is_none() => {
                return Err(ExperimentError::InvalidArgument("runs must record a time series".into()));
            }
            None => summary.censored += 1,
        }
    }
    if !summary.ratios.is_empty() {
        summary.fraction_above = Some(summary.above as f64 / summary.ratios.len() as f64);
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailFit {
    pub samples: u64,
    /// `(a, P(max size > a))` for every `a` with positive empirical mass.
    pub points: Vec<(u64, f64)>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// Whether the empirical survival function strictly decreases between
    /// consecutive distinct observed sizes.
    pub decreasing: bool,
}

/// Empirical tail of per-type maximum sizes and a least-squares line through
/// `ln P(max > a)`. Live types contribute their running maximum.
pub fn type_size_tail<'a>(records: impl IntoIterator<Item = &'a GenealogyRecord>) -> TailFit {
    let mut sizes: Vec<u64> = records
        .into_iter()
        .flat_map(|r| r.types.iter().map(|t| t.max_size))
        .collect();
    sizes.sort_unstable();
    let n = sizes.len();
    let mut points = Vec::new();
    if let Some(&largest) = sizes.last() {
        for a in 1..largest {
            let above = n - sizes.partition_point(|&s| s <= a);
            points.push((a, above as f64 / n as f64));
        }
    }
    // Between consecutive observed sizes the survival function is flat by
    // construction, so strictness is checked only at the observed sizes.
    let mut distinct = sizes.clone();
    distinct.dedup();
    let at = |a: u64| (n - sizes.partition_point(|&s| s <= a)) as f64;
    let decreasing = distinct.windows(2).all(|w| at(w[1]) < at(w[0]));
    let xs: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let fit = linear_fit(&xs, &ys);
    TailFit {
        samples: n as u64,
        points,
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        decreasing,
    }
}
