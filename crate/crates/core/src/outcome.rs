//! What a finished trajectory reports.

use serde::{Deserialize, Serialize};

use crate::model::TypeId;

/// Why a trajectory that was still alive was stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    PopulationCap,
    TimeHorizon,
    /// Safety valve. Never counted as survival by the harness.
    EventCap,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::PopulationCap => "population_cap",
            StopReason::TimeHorizon => "time_horizon",
            StopReason::EventCap => "event_cap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Extinct { time: f64 },
    SurvivedProxy { reason: StopReason, time: f64 },
}

impl Verdict {
    pub fn time(&self) -> f64 {
        match *self {
            Verdict::Extinct { time } | Verdict::SurvivedProxy { time, .. } => time,
        }
    }

    pub fn is_extinct(&self) -> bool {
        matches!(self, Verdict::Extinct { .. })
    }

    /// Survived by population cap or time horizon. Event-cap stops are not survival.
    pub fn is_survivor(&self) -> bool {
        matches!(
            self,
            Verdict::SurvivedProxy {
                reason: StopReason::PopulationCap | StopReason::TimeHorizon,
                ..
            }
        )
    }

    pub fn hit_event_cap(&self) -> bool {
        matches!(
            self,
            Verdict::SurvivedProxy {
                reason: StopReason::EventCap,
                ..
            }
        )
    }
}

/// One sample of the population time series. `extent` is `(L, R)` and only
/// present for live one-dimensional lattice states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: f64,
    pub population: u64,
    pub types: u64,
    pub extent: Option<(i64, i64)>,
}

/// Per-type history. `death_time` is `None` while the type is alive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeRecord {
    pub type_id: TypeId,
    pub parent: Option<TypeId>,
    pub birth_time: f64,
    pub death_time: Option<f64>,
    pub mutant_offspring: u64,
    pub max_size: u64,
}

/// The tree of types: a vertex per type, an edge from a type to each type its
/// members founded by mutation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenealogyRecord {
    /// Indexed by `type_id - 1`.
    pub types: Vec<TypeRecord>,
}

impl GenealogyRecord {
    pub(crate) fn with_root() -> Self {
        GenealogyRecord {
            types: vec![TypeRecord {
                type_id: TypeId::ROOT,
                parent: None,
                birth_time: 0.0,
                death_time: None,
                mutant_offspring: 0,
                max_size: 1,
            }],
        }
    }

    pub fn get(&self, id: TypeId) -> Option<&TypeRecord> {
        (id.0 as usize).checked_sub(1).and_then(|i| self.types.get(i))
    }

    fn get_mut(&mut self, id: TypeId) -> &mut TypeRecord {
        &mut self.types[id.0 as usize - 1]
    }

    pub(crate) fn on_clonal_birth(&mut self, id: TypeId, new_size: u64) {
        let rec = self.get_mut(id);
        rec.max_size = rec.max_size.max(new_size);
    }

    pub(crate) fn on_mutant_birth(&mut self, parent: TypeId, child: TypeId, t: f64) {
        self.get_mut(parent).mutant_offspring += 1;
        debug_assert_eq!(child.0 as usize, self.types.len() + 1);
        self.types.push(TypeRecord {
            type_id: child,
            parent: Some(parent),
            birth_time: t,
            death_time: None,
            mutant_offspring: 0,
            max_size: 1,
        });
    }

    pub(crate) fn on_death(&mut self, id: TypeId, t: f64) {
        self.get_mut(id).death_time = Some(t);
    }

    /// Types whose lifetime is complete.
    pub fn closed(&self) -> impl Iterator<Item = &TypeRecord> {
        self.types.iter().filter(|r| r.death_time.is_some())
    }

    /// Checks that parent links form a tree rooted at type 1 and that the
    /// recorded offspring counts match the tree.
    pub fn check_tree(&self) -> Result<(), String> {
        let mut children = vec![0u64; self.types.len()];
        for (i, rec) in self.types.iter().enumerate() {
            if rec.type_id.0 as usize != i + 1 {
                return Err(format!("record {i} carries id {}", rec.type_id));
            }
            match rec.parent {
                None if i == 0 => {}
                None => return Err(format!("type {} has no parent", rec.type_id)),
                Some(p) if i == 0 => return Err(format!("root has parent {p}")),
                Some(p) => {
                    // Parents are always issued before their children.
                    if p.0 == 0 || p.0 as usize > i {
                        return Err(format!("type {} has invalid parent {p}", rec.type_id));
                    }
                    children[p.0 as usize - 1] += 1;
                }
            }
            if let Some(d) = rec.death_time {
                if !(d > rec.birth_time) {
                    return Err(format!("type {} dies at {d} before birth {}", rec.type_id, rec.birth_time));
                }
            }
        }
        for (rec, &c) in self.types.iter().zip(&children) {
            if rec.mutant_offspring != c {
                return Err(format!(
                    "type {} records {} mutant offspring but has {c} children",
                    rec.type_id, rec.mutant_offspring
                ));
            }
        }
        Ok(())
    }
}

/// Counters from optional runtime checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub consistency_checks: u64,
    pub consistency_violations: u64,
    pub boundary_bound_checks: u64,
    pub boundary_bound_failures: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub verdict: Verdict,
    pub final_population: u64,
    pub final_type_count: u64,
    pub events: u64,
    pub series: Option<Vec<SeriesPoint>>,
    pub genealogy: Option<GenealogyRecord>,
    pub diagnostics: Diagnostics,
}

impl Outcome {
    /// Population at time `t`, read from the sampled series: the last sample
    /// at or before `t`. `None` without a series or if `t` lies beyond the run.
    pub fn population_at(&self, t: f64) -> Option<u64> {
        let series = self.series.as_ref()?;
        if t > self.verdict.time() && !self.verdict.is_extinct() {
            return None;
        }
        let idx = series.partition_point(|p| p.t <= t);
        idx.checked_sub(1).map(|i| series[i].population)
    }
}

/// What to record while running. The defaults record nothing extra.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RecordOptions {
    /// Sampling stride for the time series, in simulated time units.
    pub series_stride: Option<f64>,
    /// Record a point after every event instead of on a stride grid.
    pub series_every_event: bool,
    pub genealogy: bool,
    /// Run the from-scratch consistency checker every `n` events (spatial only).
    pub verify_every: Option<u64>,
    /// Check the `sqrt(N)` boundary-site bound every `n` events (spatial, d >= 2).
    pub boundary_bound_every: Option<u64>,
}

impl RecordOptions {
    pub const DEFAULT_STRIDE: f64 = 0.5;

    pub fn with_series(mut self, stride: f64) -> Self {
        self.series_stride = Some(stride);
        self
    }

    pub fn with_genealogy(mut self) -> Self {
        self.genealogy = true;
        self
    }

    pub fn verify_each_event(mut self) -> Self {
        self.verify_every = Some(1);
        self
    }

    pub(crate) fn wants_series(&self) -> bool {
        self.series_stride.is_some() || self.series_every_event
    }
}
