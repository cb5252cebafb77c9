//! Model selection, parameters and stopping rules shared by both engines.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest lattice dimension accepted by validation.
pub const MAX_DIM: u32 = 4;

/// Identifier of a pathogen type. Ids are issued sequentially from 1 and
/// never reused within a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TypeId(pub u64);

impl TypeId {
    pub const ROOT: TypeId = TypeId(1);

    pub fn get(self) -> u64 {
        self.0
    }
}

impl fmt::Display for TypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// The six models: three well-mixed (`M*`) and three on `Z^d` (`S*`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelId {
    M1,
    M2,
    M3,
    S1,
    S2,
    S3,
}

/// How the immune response picks which type to wipe out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeathRule {
    /// One death event at total rate 1; victim type uniform over live types.
    Global,
    /// Every live type dies at rate 1 independently (total rate K).
    PerType,
    /// Every pathogen carries a rate-1 clock that kills its whole type (total rate N).
    PerPathogen,
}

impl DeathRule {
    /// Total rate of death events given `total` pathogens in `types` live types.
    pub fn total_rate(self, total: u64, types: usize) -> f64 {
        match self {
            DeathRule::Global => 1.0,
            DeathRule::PerType => types as f64,
            DeathRule::PerPathogen => total as f64,
        }
    }
}

impl ModelId {
    pub const ALL: [ModelId; 6] = [
        ModelId::M1,
        ModelId::M2,
        ModelId::M3,
        ModelId::S1,
        ModelId::S2,
        ModelId::S3,
    ];

    pub fn is_spatial(self) -> bool {
        matches!(self, ModelId::S1 | ModelId::S2 | ModelId::S3)
    }

    pub fn death_rule(self) -> DeathRule {
        match self {
            ModelId::M1 | ModelId::S1 => DeathRule::Global,
            ModelId::M2 | ModelId::S2 => DeathRule::PerType,
            ModelId::M3 | ModelId::S3 => DeathRule::PerPathogen,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::M1 => "m1",
            ModelId::M2 => "m2",
            ModelId::M3 => "m3",
            ModelId::S1 => "s1",
            ModelId::S2 => "s2",
            ModelId::S3 => "s3",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelId {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "m1" => Ok(ModelId::M1),
            "m2" => Ok(ModelId::M2),
            "m3" => Ok(ModelId::M3),
            "s1" => Ok(ModelId::S1),
            "s2" => Ok(ModelId::S2),
            "s3" => Ok(ModelId::S3),
            other => Err(ParamError::UnknownModel(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("unknown model `{0}` (expected one of m1, m2, m3, s1, s2, s3)")]
    UnknownModel(String),
    #[error("birth rate lambda must be a positive finite number, got {0}")]
    Lambda(f64),
    #[error("mutation probability r must lie in [0, 1], got {0}")]
    Mutation(f64),
    #[error("spatial model {0} requires a lattice dimension")]
    MissingDim(ModelId),
    #[error("non-spatial model {0} does not take a lattice dimension")]
    UnexpectedDim(ModelId),
    #[error("lattice dimension must be in 1..={max}, got {dim}", max = MAX_DIM)]
    Dim { dim: u32 },
    #[error("stop rule: {0}")]
    Stop(&'static str),
    #[error("model {model} is not handled by the {engine} engine")]
    WrongEngine { model: ModelId, engine: &'static str },
}

/// Finite stand-in for "alive at all times": the first bound reached ends
/// the trajectory unless it has already gone extinct.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub max_population: u64,
    pub max_time: f64,
    pub max_events: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            max_population: 10_000,
            max_time: 1_000.0,
            max_events: 100_000_000,
        }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<(), ParamError> {
        if self.max_population == 0 {
            return Err(ParamError::Stop("max_population must be positive"));
        }
        if !(self.max_time > 0.0) || self.max_time.is_nan() {
            return Err(ParamError::Stop("max_time must be positive"));
        }
        if self.max_events == 0 {
            return Err(ParamError::Stop("max_events must be positive"));
        }
        Ok(())
    }
}

/// Full configuration of one experiment point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub model: ModelId,
    pub lambda: f64,
    pub r: f64,
    pub dim: Option<u32>,
    pub stop: StopRule,
}

impl SimParams {
    /// Builds and validates a parameter set with the default stop rule.
    pub fn new(model: ModelId, lambda: f64, r: f64, dim: Option<u32>) -> Result<Self, ParamError> {
        let params = SimParams {
            model,
            lambda,
            r,
            dim,
            stop: StopRule::default(),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn nonspatial(model: ModelId, lambda: f64, r: f64) -> Result<Self, ParamError> {
        Self::new(model, lambda, r, None)
    }

    pub fn spatial(model: ModelId, dim: u32, lambda: f64, r: f64) -> Result<Self, ParamError> {
        Self::new(model, lambda, r, Some(dim))
    }

    pub fn with_stop(mut self, stop: StopRule) -> Self {
        self.stop = stop;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_r(mut self, r: f64) -> Self {
        self.r = r;
        self
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(ParamError::Lambda(self.lambda));
        }
        if !(0.0..=1.0).contains(&self.r) {
            return Err(ParamError::Mutation(self.r));
        }
        match (self.model.is_spatial(), self.dim) {
            (true, None) => return Err(ParamError::MissingDim(self.model)),
            (false, Some(_)) => return Err(ParamError::UnexpectedDim(self.model)),
            (true, Some(d)) if d == 0 || d > MAX_DIM => return Err(ParamError::Dim { dim: d }),
            _ => {}
        }
        self.stop.validate()
    }

    /// Lattice dimension, or 0 for non-spatial models.
    pub fn dim_or_zero(&self) -> u32 {
        self.dim.unwrap_or(0)
    }
}
