//! Exact simulation of the three well-mixed models.
//!
//! Every pathogen gives birth at rate `lambda`; a newborn founds a fresh type
//! with probability `r`. The immune response removes whole types:
//!
//! | model | total death rate | victim type |
//! |-------|------------------|-------------|
//! | M1    | 1                | uniform over live types |
//! | M2    | K (live types)   | uniform over live types |
//! | M3    | N (pathogens)    | proportional to type size |
//!
//! In M2 each type carries its own mean-one exponential lifetime. By
//! memorylessness the next type death among `K` such clocks comes at rate `K`
//! and hits a uniformly chosen type, so one aggregate clock is used.

use crate::engine::{self, holding_time, mutates, Dynamics, SimError};
use crate::model::{DeathRule, ParamError, SimParams, TypeId};
use crate::outcome::{GenealogyRecord, Outcome, RecordOptions};
use crate::rng::TrialRng;
use crate::types::TypeIndex;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsEventKind {
    Birth {
        parent_type: TypeId,
        child_type: TypeId,
        is_mutant: bool,
    },
    TypeDeath {
        type_id: TypeId,
        victims: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NsEvent {
    pub kind: NsEventKind,
    pub at: f64,
}

#[derive(Debug, Clone)]
pub struct NonSpatialState {
    time: f64,
    types: TypeIndex,
    next_type_id: u64,
    genealogy: Option<GenealogyRecord>,
}

impl NonSpatialState {
    /// One pathogen of type 1 at time zero.
    pub fn new(params: &SimParams, record_genealogy: bool) -> Result<Self, SimError> {
        params.validate()?;
        if params.model.is_spatial() {
            return Err(ParamError::WrongEngine {
                model: params.model,
                engine: "non-spatial",
            }
            .into());
        }
        let mut types = TypeIndex::new();
        types.insert(TypeId::ROOT, 1);
        Ok(NonSpatialState {
            time: 0.0,
            types,
            next_type_id: 2,
            genealogy: record_genealogy.then(GenealogyRecord::with_root),
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// `N`, the number of live pathogens.
    pub fn population(&self) -> u64 {
        self.types.population()
    }

    /// `K`, the number of live types.
    pub fn type_count(&self) -> usize {
        self.types.len()
    }

    pub fn count_of(&self, id: TypeId) -> Option<u64> {
        self.types.size_of(id)
    }

    /// Live `(type, count)` pairs in slot order.
    pub fn counts(&self) -> impl Iterator<Item = (TypeId, u64)> + '_ {
        self.types.iter()
    }

    /// The id the next mutant type will receive.
    pub fn next_type_id(&self) -> TypeId {
        TypeId(self.next_type_id)
    }

    pub fn genealogy(&self) -> Option<&GenealogyRecord> {
        self.genealogy.as_ref()
    }

    /// `(birth_rate, death_rate)` of the current state.
    pub fn total_rates(&self, params: &SimParams) -> Result<(f64, f64), SimError> {
        let n = self.population();
        if n == 0 {
            return Err(SimError::Extinct);
        }
        let birth = params.lambda * n as f64;
        let death = params.model.death_rule().total_rate(n, self.types.len());
        Ok((birth, death))
    }

    /// Draws a holding time at the current total rate without changing the state.
    pub fn sample_holding_time(&self, params: &SimParams, rng: &mut TrialRng) -> Result<f64, SimError> {
        let (b, d) = self.total_rates(params)?;
        Ok(holding_time(rng, b + d))
    }

    /// Advances to the next event and applies it.
    pub fn step(&mut self, params: &SimParams, rng: &mut TrialRng) -> Result<NsEvent, SimError> {
        self.step_within(params, rng, f64::INFINITY)
            .map(|ev| ev.expect("infinite horizon always yields an event"))
    }

    /// Like [`step`](Self::step), but leaves the state untouched and returns
    /// `None` when the next event would fall after `horizon`.
    pub fn step_within(
        &mut self,
        params: &SimParams,
        rng: &mut TrialRng,
        horizon: f64,
    ) -> Result<Option<NsEvent>, SimError> {
        let (birth, death) = self.total_rates(params)?;
        let total = birth + death;
        let at = self.time + holding_time(rng, total);
        if at > horizon {
            return Ok(None);
        }
        self.time = at;
        let u: f64 = rng.random::<f64>() * total;
        let kind = if u < birth {
            let parent = self.types.sample_by_size(rng);
            if mutates(rng, params.r) {
                let child = TypeId(self.next_type_id);
                self.next_type_id += 1;
                self.types.insert(child, 1);
                if let Some(g) = self.genealogy.as_mut() {
                    g.on_mutant_birth(parent, child, at);
                }
                NsEventKind::Birth {
                    parent_type: parent,
                    child_type: child,
                    is_mutant: true,
                }
            } else {
                let size = self.types.grow(parent);
                if let Some(g) = self.genealogy.as_mut() {
                    g.on_clonal_birth(parent, size);
                }
                NsEventKind::Birth {
                    parent_type: parent,
                    child_type: parent,
                    is_mutant: false,
                }
            }
        } else {
            let victim = match params.model.death_rule() {
                DeathRule::Global | DeathRule::PerType => self.types.sample_uniform(rng),
                DeathRule::PerPathogen => self.types.sample_by_size(rng),
            };
            let victims = self.types.remove(victim);
            if let Some(g) = self.genealogy.as_mut() {
                g.on_death(victim, at);
            }
            NsEventKind::TypeDeath {
                type_id: victim,
                victims,
            }
        };
        Ok(Some(NsEvent { kind, at }))
    }

    /// Structural invariants: positive counts, consistent totals, fresh ids.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut sum = 0;
        for (id, c) in self.types.iter() {
            if c == 0 {
                return Err(format!("type {id} is live with count 0"));
            }
            if id.0 >= self.next_type_id {
                return Err(format!("type {id} not below next id {}", self.next_type_id));
            }
            sum += c;
        }
        if sum != self.population() {
            return Err(format!("counts sum to {sum}, total is {}", self.population()));
        }
        Ok(())
    }
}

impl Dynamics for NonSpatialState {
    fn time(&self) -> f64 {
        self.time
    }

    fn population(&self) -> u64 {
        self.population()
    }

    fn type_count(&self) -> usize {
        self.type_count()
    }

    fn advance(&mut self, params: &SimParams, rng: &mut TrialRng, horizon: f64) -> Result<bool, SimError> {
        Ok(self.step_within(params, rng, horizon)?.is_some())
    }

    fn take_genealogy(&mut self) -> Option<GenealogyRecord> {
        self.genealogy.take()
    }

    fn verify(&self) -> Result<(), String> {
        self.check_invariants()
    }
}

/// Runs one trajectory to extinction or the stop rule.
pub fn run(params: &SimParams, rng: &mut TrialRng, opts: &RecordOptions) -> Result<Outcome, SimError> {
    let state = NonSpatialState::new(params, opts.genealogy)?;
    engine::run(state, params, rng, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelId, StopRule};
    use crate::rng::derive_trial_rng;

    fn params(model: ModelId, lambda: f64, r: f64) -> SimParams {
        SimParams::nonspatial(model, lambda, r).unwrap()
    }

    /// Builds a state with given type sizes by direct insertion.
    fn state_with(sizes: &[u64]) -> NonSpatialState {
        let mut types = TypeIndex::new();
        for (i, &s) in sizes.iter().enumerate() {
            types.insert(TypeId(i as u64 + 1), s);
        }
        NonSpatialState {
            time: 0.0,
            types,
            next_type_id: sizes.len() as u64 + 1,
            genealogy: None,
        }
    }

    #[test]
    fn init_shape() {
        for (m, l, r) in [(ModelId::M1, 1.0, 0.5), (ModelId::M3, 2.0, 0.75)] {
            let s = NonSpatialState::new(&params(m, l, r), false).unwrap();
            assert_eq!(s.population(), 1);
            assert_eq!(s.type_count(), 1);
            assert_eq!(s.count_of(TypeId(1)), Some(1));
            assert_eq!(s.time(), 0.0);
        }
        let spatial = SimParams::spatial(ModelId::S1, 1, 1.0, 0.5).unwrap();
        assert!(matches!(
            NonSpatialState::new(&spatial, false),
            Err(SimError::Param(ParamError::WrongEngine { .. }))
        ));
    }

    #[test]
    fn total_rates_follow_death_rule() {
        let s = state_with(&[2, 1]);
        assert_eq!(s.total_rates(&params(ModelId::M1, 2.0, 0.5)).unwrap(), (6.0, 1.0));
        assert_eq!(s.total_rates(&params(ModelId::M2, 2.0, 0.5)).unwrap(), (6.0, 2.0));
        assert_eq!(s.total_rates(&params(ModelId::M3, 2.0, 0.5)).unwrap(), (6.0, 3.0));
        let empty = state_with(&[]);
        assert_eq!(empty.total_rates(&params(ModelId::M1, 2.0, 0.5)), Err(SimError::Extinct));
    }

    #[test]
    fn step_on_extinct_state_fails() {
        let mut s = state_with(&[]);
        let mut rng = derive_trial_rng(0, 0);
        assert_eq!(s.step(&params(ModelId::M2, 1.0, 0.5), &mut rng), Err(SimError::Extinct));
    }

    #[test]
    fn invariants_hold_after_every_event() {
        for model in [ModelId::M1, ModelId::M2, ModelId::M3] {
            let p = params(model, 1.7, 0.3);
            for trial in 0..20 {
                let mut rng = derive_trial_rng(5, trial);
                let mut s = NonSpatialState::new(&p, true).unwrap();
                let mut issued = 1;
                for _ in 0..2_000 {
                    if s.population() == 0 {
                        break;
                    }
                    let before = s.population();
                    let counts: Vec<_> = s.counts().collect();
                    let ev = s.step(&p, &mut rng).unwrap();
                    match ev.kind {
                        NsEventKind::Birth { child_type, is_mutant, .. } => {
                            assert_eq!(s.population(), before + 1);
                            if is_mutant {
                                issued += 1;
                                assert_eq!(child_type, TypeId(issued));
                            }
                        }
                        NsEventKind::TypeDeath { type_id, victims } => {
                            let had = counts.iter().find(|(id, _)| *id == type_id).unwrap().1;
                            assert_eq!(victims, had);
                            assert_eq!(s.population(), before - victims);
                            assert_eq!(s.count_of(type_id), None);
                        }
                    }
                    s.check_invariants().unwrap();
                }
                s.genealogy().unwrap().check_tree().unwrap();
            }
        }
    }

    #[test]
    fn m3_type_death_before_mutant_birth_is_size_free() {
        // A lone type of size n: the type dies before its next mutant birth
        // with probability 1/(1 + r lambda), whatever n is.
        let (lambda, r) = (2.0, 0.75);
        let p = params(ModelId::M3, lambda, r);
        let expected = 1.0 / (1.0 + r * lambda);
        for n in [1u64, 4, 25] {
            let trials = 20_000;
            let mut died_first = 0;
            for t in 0..trials {
                let mut rng = derive_trial_rng(11 + n, t);
                let mut s = state_with(&[n]);
                loop {
                    let ev = s.step(&p, &mut rng).unwrap();
                    match ev.kind {
                        NsEventKind::TypeDeath { type_id, .. } if type_id == TypeId(1) => {
                            died_first += 1;
                            break;
                        }
                        NsEventKind::Birth { is_mutant: true, parent_type, .. } if parent_type == TypeId(1) => break,
                        _ => {}
                    }
                }
            }
            let phat = died_first as f64 / trials as f64;
            let se = (expected * (1.0 - expected) / trials as f64).sqrt();
            assert!((phat - expected).abs() < 4.0 * se, "n={n}: {phat} vs {expected}");
        }
    }

    #[test]
    fn m1_with_one_type_each_death_empties_the_population() {
        let p = params(ModelId::M1, 1e-6, 1.0);
        let mut rng = derive_trial_rng(1, 0);
        let mut s = NonSpatialState::new(&p, false).unwrap();
        let ev = s.step(&p, &mut rng).unwrap();
        assert!(matches!(ev.kind, NsEventKind::TypeDeath { type_id: TypeId(1), victims: 1 }));
        assert_eq!(s.population(), 0);
    }

    #[test]
    fn m2_first_death_among_two_types_is_fair() {
        let p = params(ModelId::M2, 1e-9, 0.5);
        let trials = 20_000;
        let mut first = 0;
        for t in 0..trials {
            let mut rng = derive_trial_rng(2, t);
            let mut s = state_with(&[3, 1]);
            if let NsEventKind::TypeDeath { type_id, .. } = s.step(&p, &mut rng).unwrap().kind {
                if type_id == TypeId(1) {
                    first += 1;
                }
            }
        }
        let phat = first as f64 / trials as f64;
        assert!((phat - 0.5).abs() < 4.0 * (0.25 / trials as f64).sqrt(), "{phat}");
    }

    #[test]
    fn holding_time_mean_matches_frozen_rate() {
        let p = params(ModelId::M3, 1.3, 0.4);
        let s = state_with(&[3, 5, 2]);
        let (b, d) = s.total_rates(&p).unwrap();
        let rate = b + d;
        let mut rng = derive_trial_rng(7, 0);
        let n = 100_000;
        let mean = (0..n).map(|_| s.sample_holding_time(&p, &mut rng).unwrap()).sum::<f64>() / n as f64;
        // Exponential: standard deviation equals the mean.
        let se = (1.0 / rate) / (n as f64).sqrt();
        assert!((mean - 1.0 / rate).abs() < 3.0 * se, "{mean} vs {}", 1.0 / rate);
    }

    #[test]
    fn r_zero_never_mutates_and_r_one_always_does() {
        let mut rng = derive_trial_rng(9, 9);
        let p0 = params(ModelId::M1, 3.0, 0.0);
        let mut s = NonSpatialState::new(&p0, false).unwrap();
        for _ in 0..200 {
            if s.population() == 0 {
                break;
            }
            if let NsEventKind::Birth { is_mutant, .. } = s.step(&p0, &mut rng).unwrap().kind {
                assert!(!is_mutant);
            }
        }
        let p1 = params(ModelId::M1, 3.0, 1.0);
        let mut s = NonSpatialState::new(&p1, false).unwrap();
        for _ in 0..200 {
            if s.population() == 0 {
                break;
            }
            if let NsEventKind::Birth { is_mutant, .. } = s.step(&p1, &mut rng).unwrap().kind {
                assert!(is_mutant);
            }
        }
    }

    #[test]
    fn run_is_reproducible() {
        let p = params(ModelId::M1, 1.0, 0.5);
        let opts = RecordOptions::default().with_series(0.5).with_genealogy();
        let a = run(&p, &mut derive_trial_rng(42, 3), &opts).unwrap();
        let b = run(&p, &mut derive_trial_rng(42, 3), &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn subcritical_m3_goes_extinct() {
        let p = params(ModelId::M3, 2.0, 0.4);
        for t in 0..200 {
            let o = run(&p, &mut derive_trial_rng(1, t), &RecordOptions::default()).unwrap();
            assert!(o.verdict.is_extinct());
            assert_eq!(o.final_population, 0);
        }
        let p = params(ModelId::M2, 0.5, 0.5);
        for t in 0..200 {
            let o = run(&p, &mut derive_trial_rng(1, t), &RecordOptions::default()).unwrap();
            assert!(o.verdict.is_extinct());
        }
    }

    #[test]
    fn stop_rule_bounds_are_respected() {
        let stop = StopRule { max_population: 500, max_time: 30.0, max_events: 1_000_000 };
        let p = params(ModelId::M1, 1.0, 0.5).with_stop(stop);
        for t in 0..100 {
            let o = run(&p, &mut derive_trial_rng(8, t), &RecordOptions::default().with_series(0.5)).unwrap();
            // Births add one pathogen at a time.
            assert!(o.final_population <= 500);
            assert!(o.verdict.time() <= 30.0);
            let series = o.series.unwrap();
            assert!(series.windows(2).all(|w| w[0].t < w[1].t));
            assert_eq!(series[0].t, 0.0);
            assert_eq!(series[0].population, 1);
            assert_eq!(o.verdict.is_extinct(), o.final_population == 0);
        }
        let capped = params(ModelId::M1, 1.0, 0.5).with_stop(StopRule { max_events: 3, ..StopRule::default() });
        let mut hit = false;
        for t in 0..50 {
            let o = run(&capped, &mut derive_trial_rng(8, t), &RecordOptions::default()).unwrap();
            hit |= o.verdict.hit_event_cap();
            assert!(o.events <= 3);
        }
        assert!(hit);
    }
}
