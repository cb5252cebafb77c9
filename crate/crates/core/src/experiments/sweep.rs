use serde::Serialize;

use super::{estimate_survival, EstimateOptions, ExperimentError, SurvivalEstimate};
use crate::model::SimParams;
use crate::rng::mix_seed;

/// One grid cell. A failed cell keeps its coordinates and seed and records
/// the failure instead of an estimate. Event-cap anomalies keep both.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub r: f64,
    pub cell_seed: u64,
    pub estimate: Option<SurvivalEstimate>,
    pub anomaly: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub grid: Vec<(f64, f64)>,
    pub rows: Vec<SweepRow>,
}

/// Survival estimates over the Cartesian product `lambdas x rs`, row-major
/// with `lambda` outer. Cell `i` is seeded with `mix_seed(master_seed, i)`,
/// so any cell can be recomputed on its own.
pub fn sweep(
    base: &SimParams,
    lambdas: &[f64],
    rs: &[f64],
    trials: u64,
    master_seed: u64,
    opts: &EstimateOptions,
) -> Result<SweepResult, ExperimentError> {
    if lambdas.is_empty() || rs.is_empty() {
        return Err(ExperimentError::InvalidArgument("sweep grids must be non-empty".into()));
    }
    let grid: Vec<(f64, f64)> = lambdas
        .iter()
        .flat_map(|&l| rs.iter().map(move |&r| (l, r)))
        .collect();
    let rows = grid
        .iter()
        .enumerate()
        .map(|(i, &(lambda, r))| {
            let cell_seed = mix_seed(master_seed, i as u64);
            let params = base.with_lambda(lambda).with_r(r);
            let (estimate, anomaly) = match estimate_survival(&params, trials, cell_seed, opts) {
                Ok(est) => (Some(est), None),
                Err(ExperimentError::EventCapAnomaly(est)) => {
                    let msg = format!("{} of {} trials hit the event cap", est.event_caps, est.trials);
                    (Some(*est), Some(msg))
                }
                Err(e) => (None, Some(e.to_string())),
            };
            SweepRow {
                lambda,
                r,
                cell_seed,
                estimate,
                anomaly,
            }
        })
        .collect();
    Ok(SweepResult { grid, rows })
}
