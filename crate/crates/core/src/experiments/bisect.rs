use std::fmt;

use serde::Serialize;

use super::{estimate_survival, EstimateOptions, ExperimentError, SurvivalEstimate};
use crate::model::SimParams;
use crate::rng::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeClass {
    Subcritical,
    Supercritical,
    Undecidable,
}

impl fmt::Display for ProbeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProbeClass::Subcritical => "subcritical",
            ProbeClass::Supercritical => "supercritical",
            ProbeClass::Undecidable => "undecidable",
        })
    }
}

/// Which parameter the bisection moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Lambda,
    R,
}

impl Axis {
    pub fn apply(self, template: &SimParams, value: f64) -> SimParams {
        match self {
            Axis::Lambda => template.with_lambda(value),
            Axis::R => template.with_r(value),
        }
    }

    /// The parameter held fixed while this axis moves.
    pub fn fixed_value(self, template: &SimParams) -> f64 {
        match self {
            Axis::Lambda => template.r,
            Axis::R => template.lambda,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Lambda => "lambda",
            Axis::R => "r",
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lambda" => Ok(Axis::Lambda),
            "r" => Ok(Axis::R),
            other => Err(ExperimentError::InvalidArgument(format!("unknown axis '{other}'"))),
        }
    }
}

/// Supercritical: at least `max(min_survivors, min_fraction * trials)`
/// survivors and a lower confidence bound above zero. Subcritical: the upper
/// confidence bound is below `threshold`. Anything else is undecidable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecisionRule {
    pub threshold: f64,
    pub min_survivors: u64,
    pub min_fraction: f64,
}

impl Default for DecisionRule {
    fn default() -> Self {
        DecisionRule {
            threshold: 0.01,
            min_survivors: 3,
            min_fraction: 0.005,
        }
    }
}

impl DecisionRule {
    pub fn classify(&self, est: &SurvivalEstimate) -> ProbeClass {
        let needed = self.min_survivors.max((self.min_fraction * est.trials as f64).ceil() as u64);
        if est.survivors >= needed && est.ci_low > 0.0 {
            ProbeClass::Supercritical
        } else if est.ci_high < self.threshold {
            ProbeClass::Subcritical
        } else {
            ProbeClass::Undecidable
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectOptions {
    pub rule: DecisionRule,
    pub estimate: EstimateOptions,
    /// Trial multiplier for the single re-run of an undecidable probe.
    pub escalation: u64,
}

impl Default for BisectOptions {
    fn default() -> Self {
        BisectOptions {
            rule: DecisionRule::default(),
            estimate: EstimateOptions::default(),
            escalation: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Probe {
    pub value: f64,
    pub seed: u64,
    pub class: ProbeClass,
    pub escalated: bool,
    pub estimate: SurvivalEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BisectionResult {
    pub axis: Axis,
    pub fixed_value: f64,
    pub lo: f64,
    pub hi: f64,
    pub decision_threshold: f64,
    pub probes: Vec<Probe>,
}

/// Interval bisection driven by an arbitrary classifier. `lo` must classify
/// subcritical and `hi` supercritical; the returned bracket keeps that
/// property and has width at most `resolution`.
pub fn bisect_by<F>(mut lo: f64, mut hi: f64, resolution: f64, mut classify: F) -> Result<(f64, f64), ExperimentError>
where
    F: FnMut(f64) -> Result<ProbeClass, ExperimentError>,
{
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(ExperimentError::InvalidArgument(format!("need lo < hi, got [{lo}, {hi}]")));
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(ExperimentError::InvalidArgument(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    let lo_class = classify(lo)?;
    let hi_class = classify(hi)?;
    if lo_class != ProbeClass::Subcritical || hi_class != ProbeClass::Supercritical {
        return Err(ExperimentError::BracketInvalid { lo, hi, lo_class, hi_class });
    }
    while hi - lo > resolution {
        let mid = lo + (hi - lo) / 2.0;
        match classify(mid)? {
            ProbeClass::Subcritical => lo = mid,
            ProbeClass::Supercritical => hi = mid,
            ProbeClass::Undecidable => return Err(ExperimentError::UndecidableProbe { value: mid }),
        }
    }
    Ok((lo, hi))
}

/// Monte Carlo bisection for the critical value of `axis`. Probe `k` (in the
/// order probed: lo, hi, then midpoints) uses seed `mix_seed(master_seed, k)`;
/// an undecidable probe is re-run once with `escalation` times the trials
/// under the same seed.
pub fn bisect_critical(
    template: &SimParams,
    axis: Axis,
    lo: f64,
    hi: f64,
    resolution: f64,
    trials_per_probe: u64,
    master_seed: u64,
    opts: &BisectOptions,
) -> Result<BisectionResult, ExperimentError> {
    axis.apply(template, lo).validate().map_err(crate::SimError::from)?;
    axis.apply(template, hi).validate().map_err(crate::SimError::from)?;
    let mut probes = Vec::new();
    let (lo, hi) = bisect_by(lo, hi, resolution, |value| {
        let seed = mix_seed(master_seed, probes.len() as u64);
        let params = axis.apply(template, value);
        let mut est = estimate_survival(&params, trials_per_probe, seed, &opts.estimate)?;
        let mut class = opts.rule.classify(&est);
        let mut escalated = false;
        if class == ProbeClass::Undecidable && opts.escalation > 1 {
            est = estimate_survival(&params, trials_per_probe * opts.escalation, seed, &opts.estimate)?;
            class = opts.rule.classify(&est);
            escalated = true;
        }
        probes.push(Probe {
            value,
            seed,
            class,
            escalated,
            estimate: est,
        });
        Ok(class)
    })?;
    Ok(BisectionResult {
        axis,
        fixed_value: axis.fixed_value(template),
        lo,
        hi,
        decision_threshold: opts.rule.threshold,
        probes,
    })
}
