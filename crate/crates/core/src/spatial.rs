//! Exact simulation of the lattice models S1-S3 on an unbounded `Z^d`.
//!
//! A pathogen on `x` gives birth onto each empty nearest neighbour `y` at rate
//! `lambda`; births onto occupied sites are suppressed. The total birth rate
//! is therefore `lambda` times the number of (occupied, empty-neighbour)
//! pairs, the boundary weight. Each occupied site carries its empty-neighbour
//! count in a Fenwick tree, so one integer draw in `[0, boundary_weight)`
//! selects a pair uniformly. Death rules are those of the well-mixed models.

use std::collections::BTreeSet;

use rand::Rng;
use rustc_hash::FxHashMap;

use crate::engine::{self, holding_time, mutates, Dynamics, SimError};
use crate::fenwick::WeightTree;
use crate::model::{DeathRule, ParamError, SimParams, TypeId, MAX_DIM};
use crate::outcome::{GenealogyRecord, Outcome, RecordOptions};
use crate::rng::TrialRng;
use crate::types::TypeIndex;

/// A lattice site. Coordinates beyond the lattice dimension are zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site(pub [i32; MAX_DIM as usize]);

impl Site {
    pub const ORIGIN: Site = Site([0; MAX_DIM as usize]);

    pub fn line(x: i32) -> Site {
        let mut c = [0; MAX_DIM as usize];
        c[0] = x;
        Site(c)
    }

    pub fn plane(x: i32, y: i32) -> Site {
        let mut c = [0; MAX_DIM as usize];
        c[0] = x;
        c[1] = y;
        Site(c)
    }

    pub fn coords(&self, dim: usize) -> &[i32] {
        &self.0[..dim]
    }

    pub fn l1_distance(&self, other: &Site) -> u64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (*a as i64 - *b as i64).unsigned_abs())
            .sum()
    }
}

/// The `2d` nearest neighbours in a fixed order: `-e_0, +e_0, -e_1, +e_1, ...`.
#[inline]
fn neighbours(site: Site, dim: usize) -> impl Iterator<Item = Site> {
    (0..2 * dim).map(move |k| {
        let mut n = site;
        n.0[k / 2] += if k % 2 == 0 { -1 } else { 1 };
        n
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Occupant {
    type_id: TypeId,
    slot: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpEventKind {
    Birth {
        parent_site: Site,
        child_site: Site,
        child_type: TypeId,
        is_mutant: bool,
    },
    TypeDeath {
        type_id: TypeId,
        victims: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpEvent {
    pub kind: SpEventKind,
    pub at: f64,
}

#[derive(Debug, Clone)]
pub struct SpatialState {
    dim: usize,
    time: f64,
    occupancy: FxHashMap<Site, Occupant>,
    /// Occupied sites in slot order; `empties` is indexed by the same slots.
    sites: Vec<Site>,
    empties: WeightTree,
    type_sites: FxHashMap<TypeId, Vec<Site>>,
    types: TypeIndex,
    next_type_id: u64,
    /// Occupied coordinates, maintained only for `d = 1`.
    line: Option<BTreeSet<i32>>,
    genealogy: Option<GenealogyRecord>,
}

impl SpatialState {
    /// A single type-1 pathogen at the origin.
    pub fn new(params: &SimParams, record_genealogy: bool) -> Result<Self, SimError> {
        let mut state = Self::empty(params)?;
        state.occupy(Site::ORIGIN, TypeId::ROOT);
        state.types.insert(TypeId::ROOT, 1);
        state.type_sites.insert(TypeId::ROOT, vec![Site::ORIGIN]);
        state.next_type_id = 2;
        state.genealogy = record_genealogy.then(GenealogyRecord::with_root);
        Ok(state)
    }

    /// An arbitrary starting configuration, without genealogy. Types with
    /// ids above every listed id are issued to later mutants.
    pub fn from_configuration(params: &SimParams, cells: &[(Site, TypeId)]) -> Result<Self, SimError> {
        let mut state = Self::empty(params)?;
        for &(site, id) in cells {
            if site.0[state.dim..].iter().any(|&c| c != 0) {
                return Err(SimError::Configuration(format!("{site:?} has coordinates beyond d={}", state.dim)));
            }
            if id.0 == 0 {
                return Err(SimError::Configuration("type ids start at 1".into()));
            }
            if state.occupancy.contains_key(&site) {
                return Err(SimError::Configuration(format!("{site:?} listed twice")));
            }
            state.occupy(site, id);
            state.type_sites.entry(id).or_default().push(site);
            if state.types.contains(id) {
                state.types.grow(id);
            } else {
                state.types.insert(id, 1);
            }
            state.next_type_id = state.next_type_id.max(id.0 + 1);
        }
        Ok(state)
    }

    fn empty(params: &SimParams) -> Result<Self, SimError> {
        params.validate()?;
        if !params.model.is_spatial() {
            return Err(ParamError::WrongEngine {
                model: params.model,
                engine: "spatial",
            }
            .into());
        }
        let dim = params.dim.expect("validated spatial params carry a dimension") as usize;
        Ok(SpatialState {
            dim,
            time: 0.0,
            occupancy: FxHashMap::default(),
            sites: Vec::new(),
            empties: WeightTree::new(),
            type_sites: FxHashMap::default(),
            types: TypeIndex::new(),
            next_type_id: 1,
            line: (dim == 1).then(BTreeSet::new),
            genealogy: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn population(&self) -> u64 {
        self.sites.len() as u64
    }

    pub fn type_count(&self) -> usize {
        self.types.len()
    }

    /// Number of (occupied site, empty neighbour) pairs.
    pub fn boundary_weight(&self) -> u64 {
        self.empties.total()
    }

    pub fn type_at(&self, site: &Site) -> Option<TypeId> {
        self.occupancy.get(site).map(|o| o.type_id)
    }

    /// Occupied sites with their types, in slot order.
    pub fn cells(&self) -> impl Iterator<Item = (Site, TypeId)> + '_ {
        self.sites.iter().map(move |s| (*s, self.occupancy[s].type_id))
    }

    pub fn sites_of(&self, id: TypeId) -> Option<&[Site]> {
        self.type_sites.get(&id).map(Vec::as_slice)
    }

    pub fn size_of(&self, id: TypeId) -> Option<u64> {
        self.types.size_of(id)
    }

    /// `(L, R)`, the extreme occupied coordinates, for a live `d = 1` state.
    pub fn extent(&self) -> Option<(i64, i64)> {
        let line = self.line.as_ref()?;
        Some((*line.first()? as i64, *line.last()? as i64))
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
        let birth = params.lambda * self.boundary_weight() as f64;
        let death = params.model.death_rule().total_rate(n, self.types.len());
        Ok((birth, death))
    }

    pub fn step(&mut self, params: &SimParams, rng: &mut TrialRng) -> Result<SpEvent, SimError> {
        self.step_within(params, rng, f64::INFINITY)
            .map(|ev| ev.expect("infinite horizon always yields an event"))
    }

    pub fn step_within(
        &mut self,
        params: &SimParams,
        rng: &mut TrialRng,
        horizon: f64,
    ) -> Result<Option<SpEvent>, SimError> {
        let (birth, death) = self.total_rates(params)?;
        let total = birth + death;
        let at = self.time + holding_time(rng, total);
        if at > horizon {
            return Ok(None);
        }
        self.time = at;
        let u: f64 = rng.random::<f64>() * total;
        let kind = if u < birth && self.boundary_weight() > 0 {
            let (slot, offset) = self.empties.find(rng.random_range(0..self.boundary_weight()));
            let parent_site = self.sites[slot];
            let child_site = neighbours(parent_site, self.dim)
                .filter(|y| !self.occupancy.contains_key(y))
                .nth(offset as usize)
                .expect("empty-neighbour count out of sync");
            let parent = self.occupancy[&parent_site].type_id;
            let is_mutant = mutates(rng, params.r);
            let child_type = if is_mutant {
                let child = TypeId(self.next_type_id);
                self.next_type_id += 1;
                self.types.insert(child, 1);
                self.type_sites.insert(child, vec![child_site]);
                if let Some(g) = self.genealogy.as_mut() {
                    g.on_mutant_birth(parent, child, at);
                }
                child
            } else {
                let size = self.types.grow(parent);
                self.type_sites.get_mut(&parent).expect("live type has sites").push(child_site);
                if let Some(g) = self.genealogy.as_mut() {
                    g.on_clonal_birth(parent, size);
                }
                parent
            };
            self.occupy(child_site, child_type);
            SpEventKind::Birth {
                parent_site,
                child_site,
                child_type,
                is_mutant,
            }
        } else {
            let victim = match params.model.death_rule() {
                DeathRule::Global | DeathRule::PerType => self.types.sample_uniform(rng),
                DeathRule::PerPathogen => self.types.sample_by_size(rng),
            };
            let victims = self.kill_type(victim);
            if let Some(g) = self.genealogy.as_mut() {
                g.on_death(victim, at);
            }
            SpEventKind::TypeDeath {
                type_id: victim,
                victims,
            }
        };
        Ok(Some(SpEvent { kind, at }))
    }

    /// Places a pathogen on an empty site and updates the boundary weights.
    /// Type bookkeeping is left to the caller.
    fn occupy(&mut self, site: Site, type_id: TypeId) {
        let mut empty = 0;
        for y in neighbours(site, self.dim) {
            match self.occupancy.get(&y) {
                Some(o) => self.empties.decrement(o.slot),
                None => empty += 1,
            }
        }
        let slot = self.empties.push(empty);
        self.sites.push(site);
        self.occupancy.insert(site, Occupant { type_id, slot });
        if let Some(line) = self.line.as_mut() {
            line.insert(site.0[0]);
        }
    }

    /// Vacates every site of a type at once. Returns the number of victims.
    fn kill_type(&mut self, id: TypeId) -> u64 {
        let victims = self.type_sites.remove(&id).expect("killing a type that is not alive");
        self.types.remove(id);
        for v in &victims {
            let occ = self.occupancy.remove(v).expect("type site not occupied");
            self.empties.swap_remove(occ.slot);
            self.sites.swap_remove(occ.slot);
            if let Some(moved) = self.sites.get(occ.slot) {
                self.occupancy.get_mut(moved).expect("moved site occupied").slot = occ.slot;
            }
            if let Some(line) = self.line.as_mut() {
                line.remove(&v.0[0]);
            }
        }
        // Only after all victims are gone, so pairs between victims are not counted.
        for v in &victims {
            for y in neighbours(*v, self.dim) {
                if let Some(o) = self.occupancy.get(&y) {
                    self.empties.increment(o.slot);
                }
            }
        }
        victims.len() as u64
    }

    /// Number of occupied sites with at least one empty neighbour.
    pub fn boundary_sites(&self) -> u64 {
        self.empties.weights().iter().filter(|&&w| w > 0).count() as u64
    }

    /// For `d >= 2`, any finite configuration of `N` sites has at least
    /// `ceil(sqrt(N))` sites with an empty neighbour. Returns whether the
    /// current configuration satisfies that bound.
    pub fn boundary_sites_bound_holds(&self) -> bool {
        let n = self.population();
        let mut root = (n as f64).sqrt().ceil() as u64;
        // Correct floating error around perfect squares.
        while root > 0 && (root - 1) * (root - 1) >= n {
            root -= 1;
        }
        while root * root < n {
            root += 1;
        }
        self.boundary_sites() >= root
    }

    /// Recomputes every incrementally maintained quantity from scratch and
    /// compares. Returns a description of the first mismatch.
    pub fn check_consistency(&self) -> Result<(), String> {
        let n = self.sites.len();
        if self.occupancy.len() != n || self.empties.len() != n {
            return Err(format!(
                "size mismatch: occupancy {}, sites {n}, weights {}",
                self.occupancy.len(),
                self.empties.len()
            ));
        }
        let mut boundary = 0u64;
        for (slot, site) in self.sites.iter().enumerate() {
            let occ = self.occupancy.get(site).ok_or_else(|| format!("{site:?} listed but unoccupied"))?;
            if occ.slot != slot {
                return Err(format!("{site:?} at slot {slot} records slot {}", occ.slot));
            }
            let empty = neighbours(*site, self.dim).filter(|y| !self.occupancy.contains_key(y)).count() as u64;
            if self.empties.get(slot) != empty {
                return Err(format!("{site:?} weight {} but {empty} empty neighbours", self.empties.get(slot)));
            }
            if empty > 2 * self.dim as u64 {
                return Err(format!("{site:?} has weight above 2d"));
            }
            boundary += empty;
        }
        if boundary != self.empties.total() || self.empties.prefix_sum(n) != boundary {
            return Err(format!(
                "boundary weight {} (tree prefix {}) but recomputed {boundary}",
                self.empties.total(),
                self.empties.prefix_sum(n)
            ));
        }

        if self.type_sites.len() != self.types.len() {
            return Err(format!(
                "{} site sets for {} live types",
                self.type_sites.len(),
                self.types.len()
            ));
        }
        let mut covered = 0usize;
        for (id, sites) in &self.type_sites {
            if sites.is_empty() {
                return Err(format!("type {id} is live with no sites"));
            }
            if self.types.size_of(*id) != Some(sites.len() as u64) {
                return Err(format!("type {id} size {:?} but {} sites", self.types.size_of(*id), sites.len()));
            }
            if id.0 >= self.next_type_id {
                return Err(format!("type {id} not below next id {}", self.next_type_id));
            }
            for s in sites {
                match self.occupancy.get(s) {
                    Some(o) if o.type_id == *id => {}
                    other => return Err(format!("type {id} lists {s:?} occupied by {other:?}")),
                }
            }
            covered += sites.len();
            if self.dim == 1 {
                let lo = sites.iter().map(|s| s.0[0]).min().unwrap();
                let hi = sites.iter().map(|s| s.0[0]).max().unwrap();
                if (hi - lo) as usize + 1 != sites.len() {
                    return Err(format!("type {id} occupies a non-interval [{lo}, {hi}] with {} sites", sites.len()));
                }
            }
        }
        // Sets are disjoint because each occupied site carries one type and every
        // listed site was matched against it; equal totals make the union complete.
        if covered != n {
            return Err(format!("type site sets cover {covered} sites, {n} occupied"));
        }
        if self.types.population() != n as u64 {
            return Err(format!("type sizes sum to {}, {n} occupied", self.types.population()));
        }

        if let Some(line) = &self.line {
            if line.len() != n || self.sites.iter().any(|s| !line.contains(&s.0[0])) {
                return Err("ordered coordinate set out of sync".into());
            }
            if let Some((l, r)) = self.extent() {
                if (r - l + 1) < n as i64 {
                    return Err(format!("N = {n} exceeds extent [{l}, {r}]"));
                }
            }
        }
        Ok(())
    }
}

impl Dynamics for SpatialState {
    fn time(&self) -> f64 {
        self.time
    }

    fn population(&self) -> u64 {
        self.population()
    }

    fn type_count(&self) -> usize {
        self.type_count()
    }

    fn extent(&self) -> Option<(i64, i64)> {
        self.extent()
    }

    fn advance(&mut self, params: &SimParams, rng: &mut TrialRng, horizon: f64) -> Result<bool, SimError> {
        Ok(self.step_within(params, rng, horizon)?.is_some())
    }

    fn take_genealogy(&mut self) -> Option<GenealogyRecord> {
        self.genealogy.take()
    }

    fn verify(&self) -> Result<(), String> {
        self.check_consistency()
    }

    fn boundary_bound(&self) -> Option<bool> {
        (self.dim >= 2).then(|| self.boundary_sites_bound_holds())
    }
}

/// Runs one lattice trajectory to extinction or the stop rule.
pub fn run(params: &SimParams, rng: &mut TrialRng, opts: &RecordOptions) -> Result<Outcome, SimError> {
    let state = SpatialState::new(params, opts.genealogy)?;
    engine::run(state, params, rng, opts)
}
