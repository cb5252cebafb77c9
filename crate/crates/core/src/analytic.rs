//! Closed forms for the well-mixed models and the Galton-Watson machinery
//! behind them.
//!
//! For Models 2 and 3 the tree of types is a Galton-Watson tree, so the
//! pathogens survive with positive probability exactly when the mean number
//! of mutant types founded by one type exceeds one. Model 1 is handled by
//! comparison with a birth-death chain on the number of live types.

use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

/// Default tolerance for [`gw_extinction`].
pub const DEFAULT_TOL: f64 = 1e-12;
/// Iteration cap for the fixed-point solve.
pub const MAX_ITERATIONS: usize = 1_000_000;
/// Largest support a lazily-defined pmf may be expanded to.
pub const MAX_SUPPORT: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("offspring pmf mass error {mass_error:e} exceeds tolerance {tol:e}")]
    Truncation { mass_error: f64, tol: f64 },
    #[error("fixed-point iteration did not converge in {0} steps")]
    NoConvergence(usize),
}

fn check_lambda_r(lambda: f64, r: f64) -> Result<(), AnalyticError> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(AnalyticError::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    if !(0.0..=1.0).contains(&r) {
        return Err(AnalyticError::InvalidParameter(format!("r must lie in [0, 1], got {r}")));
    }
    Ok(())
}

/// A real number or `+inf`, kept apart so threshold comparisons stay exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn is_infinite(self) -> bool {
        matches!(self, Extended::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(x) => Some(x),
            Extended::Infinite => None,
        }
    }

    /// `self > x`, with infinity above every real.
    pub fn exceeds(self, x: f64) -> bool {
        match self {
            Extended::Finite(v) => v > x,
            Extended::Infinite => true,
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(x) => x.fmt(f),
            Extended::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            Extended::Finite(x) => s.serialize_f64(x),
            Extended::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Offspring distribution on the non-negative integers, either as an explicit
/// finite table or as a mass function expanded on demand.
pub struct OffspringPmf {
    mass: Mass,
    mean: Extended,
}

enum Mass {
    Table(Vec<f64>),
    Lazy(Box<dyn Fn(u64) -> f64 + Send + Sync>),
}

impl fmt::Debug for OffspringPmf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("OffspringPmf");
        match &self.mass {
            Mass::Table(t) => d.field("table", t),
            Mass::Lazy(_) => d.field("table", &"<lazy>"),
        };
        d.field("mean", &self.mean).finish()
    }
}

impl OffspringPmf {
    /// Finite-support law `p_0, p_1, ...`. Masses must lie in `[0, 1]` and sum
    /// to one within `1e-9`.
    pub fn from_masses(masses: Vec<f64>) -> Result<Self, AnalyticError> {
        if masses.is_empty() || masses.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(AnalyticError::InvalidParameter("masses must be non-empty and in [0, 1]".into()));
        }
        let sum: f64 = masses.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(AnalyticError::Truncation {
                mass_error: (sum - 1.0).abs(),
                tol: 1e-9,
            });
        }
        let mean = masses.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        Ok(OffspringPmf {
            mass: Mass::Table(masses),
            mean: Extended::Finite(mean),
        })
    }

    /// Infinite-support law given by its mass function and its mean.
    pub fn from_fn(mass: impl Fn(u64) -> f64 + Send + Sync + 'static, mean: Extended) -> Self {
        OffspringPmf {
            mass: Mass::Lazy(Box::new(mass)),
            mean,
        }
    }

    pub fn prob(&self, k: u64) -> f64 {
        match &self.mass {
            Mass::Table(t) => t.get(k as usize).copied().unwrap_or(0.0),
            Mass::Lazy(f) => f(k),
        }
    }

    pub fn mean(&self) -> Extended {
        self.mean
    }

    /// Masses expanded until the remaining tail is below `tail_tol`.
    fn truncated(&self, tail_tol: f64) -> Result<Vec<f64>, AnalyticError> {
        match &self.mass {
            Mass::Table(t) => Ok(t.clone()),
            Mass::Lazy(f) => {
                let mut out = Vec::new();
                let mut sum = 0.0;
                while out.len() < MAX_SUPPORT {
                    let p = f(out.len() as u64);
                    if !(0.0..=1.0).contains(&p) {
                        return Err(AnalyticError::InvalidParameter(format!(
                            "mass at {} is {p}",
                            out.len()
                        )));
                    }
                    sum += p;
                    out.push(p);
                    if 1.0 - sum < tail_tol {
                        return Ok(out);
                    }
                }
                Err(AnalyticError::Truncation {
                    mass_error: 1.0 - sum,
                    tol: tail_tol,
                })
            }
        }
    }
}

/// `P(X = k)` for the number of mutant types founded by one Model 3 type:
/// `(r lambda)^k / (1 + r lambda)^(k+1)`.
pub fn model3_offspring_pmf(k: u64, lambda: f64, r: f64) -> Result<f64, AnalyticError> {
    check_lambda_r(lambda, r)?;
    let m = r * lambda;
    Ok((m / (1.0 + m)).powf(k as f64) / (1.0 + m))
}

/// The Model 3 offspring law as a pmf (geometric on `{0, 1, ...}` with mean `r lambda`).
pub fn model3_offspring_law(lambda: f64, r: f64) -> Result<OffspringPmf, AnalyticError> {
    check_lambda_r(lambda, r)?;
    let m = r * lambda;
    let ratio = m / (1.0 + m);
    let head = 1.0 / (1.0 + m);
    Ok(OffspringPmf::from_fn(
        move |k| ratio.powf(k as f64) * head,
        Extended::Finite(m),
    ))
}

/// Survival probability, where the model's theory gives one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurvivalProbability {
    Zero,
    Positive(f64),
    /// Positive, but with no closed form.
    UnknownPositive,
}

impl Serialize for SurvivalProbability {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            SurvivalProbability::Zero => s.serialize_f64(0.0),
            SurvivalProbability::Positive(p) => s.serialize_f64(p),
            SurvivalProbability::UnknownPositive => s.serialize_str("unknown-positive"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseVerdict {
    pub survives: bool,
    pub survival_probability: SurvivalProbability,
}

impl PhaseVerdict {
    fn dies() -> Self {
        PhaseVerdict {
            survives: false,
            survival_probability: SurvivalProbability::Zero,
        }
    }
}

/// Model 3 survives iff `r lambda > 1`, with probability `1 - 1/(r lambda)`.
pub fn model3_phase(lambda: f64, r: f64) -> Result<PhaseVerdict, AnalyticError> {
    check_lambda_r(lambda, r)?;
    let m = r * lambda;
    if m > 1.0 {
        Ok(PhaseVerdict {
            survives: true,
            survival_probability: SurvivalProbability::Positive(1.0 - 1.0 / m),
        })
    } else {
        Ok(PhaseVerdict::dies())
    }
}

/// Mean number of mutant types founded by one Model 2 type:
/// `r lambda / (1 - lambda (1 - r))`, infinite once `lambda (1 - r) >= 1`.
pub fn model2_mean_offspring(lambda: f64, r: f64) -> Result<Extended, AnalyticError> {
    check_lambda_r(lambda, r)?;
    if r == 0.0 {
        return Ok(Extended::Finite(0.0));
    }
    let clonal = lambda * (1.0 - r);
    if clonal >= 1.0 {
        Ok(Extended::Infinite)
    } else {
        Ok(Extended::Finite(r * lambda / (1.0 - clonal)))
    }
}

/// Model 2 survives iff `lambda > 1`, whatever the mutation probability. No
/// closed form for the survival probability is available.
pub fn model2_phase(lambda: f64, r: f64) -> Result<PhaseVerdict, AnalyticError> {
    check_lambda_r(lambda, r)?;
    // Without mutation the single type dies at an exponential time.
    if r > 0.0 && lambda > 1.0 {
        Ok(PhaseVerdict {
            survives: true,
            survival_probability: SurvivalProbability::UnknownPositive,
        })
    } else {
        Ok(PhaseVerdict::dies())
    }
}

/// Probability that a nearest-neighbour walk with up-probability `p` started at
/// level `N` never goes below `N`: `(2p - 1)/p` for `p > 1/2`, else 0.
pub fn bd_chain_survival(p: f64) -> Result<f64, AnalyticError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(AnalyticError::InvalidParameter(format!("p must lie in [0, 1], got {p}")));
    }
    Ok(if p > 0.5 { (2.0 * p - 1.0) / p } else { 0.0 })
}

/// Model 1 comparison chain at type level `n`: while at least `n` types are
/// alive new types appear at rate `>= n lambda r` against one death event at
/// rate 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainBound {
    pub level: u64,
    pub up_probability: f64,
    /// Lower bound on staying at or above `level`, once reached.
    pub stay_above: f64,
}

pub fn model1_chain_bound(lambda: f64, r: f64, level: u64) -> Result<ChainBound, AnalyticError> {
    check_lambda_r(lambda, r)?;
    if level == 0 {
        return Err(AnalyticError::InvalidParameter("chain level must be positive".into()));
    }
    let up = level as f64 * lambda * r;
    let p = up / (1.0 + up);
    Ok(ChainBound {
        level,
        up_probability: p,
        stay_above: bd_chain_survival(p)?,
    })
}

/// Smallest level `n` with `n lambda r > 1`, or `None` when `r = 0`.
pub fn model1_min_level(lambda: f64, r: f64) -> Result<Option<u64>, AnalyticError> {
    check_lambda_r(lambda, r)?;
    let rate = lambda * r;
    if rate == 0.0 {
        return Ok(None);
    }
    let mut n = (1.0 / rate).floor().max(1.0) as u64;
    while n as f64 * rate <= 1.0 {
        n += 1;
    }
    Ok(Some(n))
}

/// Extinction probability of a Galton-Watson process: the smallest fixed point
/// of the offspring generating function, by monotone iteration from zero.
pub fn gw_extinction(pmf: &OffspringPmf, tol: f64) -> Result<f64, AnalyticError> {
    if !(tol > 0.0) {
        return Err(AnalyticError::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let masses = pmf.truncated(tol / 10.0)?;
    let mass_error = (1.0 - masses.iter().sum::<f64>()).abs();
    if mass_error > tol {
        return Err(AnalyticError::Truncation { mass_error, tol });
    }
    let p1 = masses.get(1).copied().unwrap_or(0.0);
    if let Extended::Finite(m) = pmf.mean() {
        if m <= 1.0 && p1 < 1.0 {
            return Ok(1.0);
        }
    }
    let pgf = |s: f64| masses.iter().rev().fold(0.0, |acc, &p| acc * s + p);
    let mut s = 0.0;
    for _ in 0..MAX_ITERATIONS {
        let next = pgf(s);
        if (next - s).abs() < tol {
            return Ok(next.min(1.0));
        }
        s = next;
    }
    Err(AnalyticError::NoConvergence(MAX_ITERATIONS))
}
