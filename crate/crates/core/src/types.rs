//! Index of live types supporting uniform and size-weighted selection.

use rand::Rng;
use rustc_hash::FxHashMap;

use crate::fenwick::WeightTree;
use crate::model::TypeId;

/// Live types packed into dense slots. Removal swaps the last slot into the
/// hole, so uniform selection is a single index draw and size-weighted
/// selection is one Fenwick lookup.
#[derive(Debug, Clone, Default)]
pub struct TypeIndex {
    ids: Vec<TypeId>,
    sizes: WeightTree,
    slot_of: FxHashMap<TypeId, usize>,
}

impl TypeIndex {
    pub fn new() -> Self {
        TypeIndex {
            ids: Vec::new(),
            sizes: WeightTree::new(),
            slot_of: FxHashMap::default(),
        }
    }

    /// Number of live types.
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Total number of pathogens across live types.
    pub fn population(&self) -> u64 {
        self.sizes.total()
    }

    pub fn size_of(&self, id: TypeId) -> Option<u64> {
        self.slot_of.get(&id).map(|&s| self.sizes.get(s))
    }

    pub fn contains(&self, id: TypeId) -> bool {
        self.slot_of.contains_key(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (TypeId, u64)> + '_ {
        self.ids.iter().copied().zip(self.sizes.weights().iter().copied())
    }

    pub fn insert(&mut self, id: TypeId, size: u64) {
        debug_assert!(size > 0);
        let slot = self.sizes.push(size);
        self.ids.push(id);
        let prev = self.slot_of.insert(id, slot);
        debug_assert!(prev.is_none(), "type {id} inserted twice");
    }

    /// Adds one pathogen to a live type and returns its new size.
    pub fn grow(&mut self, id: TypeId) -> u64 {
        let slot = self.slot_of[&id];
        self.sizes.increment(slot);
        self.sizes.get(slot)
    }

    /// Removes a type and returns how many pathogens it had.
    pub fn remove(&mut self, id: TypeId) -> u64 {
        let slot = self.slot_of.remove(&id).expect("removing a type that is not alive");
        let size = self.sizes.swap_remove(slot);
        self.ids.swap_remove(slot);
        if let Some(&moved) = self.ids.get(slot) {
            self.slot_of.insert(moved, slot);
        }
        size
    }

    /// A live type chosen uniformly.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> TypeId {
        self.ids[rng.random_range(0..self.ids.len())]
    }

    /// A live type chosen with probability proportional to its size.
    pub fn sample_by_size<R: Rng + ?Sized>(&self, rng: &mut R) -> TypeId {
        let target = rng.random_range(0..self.sizes.total());
        self.ids[self.sizes.find(target).0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_trial_rng;

    #[test]
    fn insert_grow_remove() {
        let mut idx = TypeIndex::new();
        idx.insert(TypeId(1), 1);
        idx.insert(TypeId(2), 3);
        idx.insert(TypeId(5), 1);
        assert_eq!(idx.grow(TypeId(1)), 2);
        assert_eq!(idx.population(), 6);
        assert_eq!(idx.remove(TypeId(1)), 2);
        assert_eq!(idx.len(), 2);
        assert_eq!(idx.size_of(TypeId(5)), Some(1));
        assert_eq!(idx.size_of(TypeId(1)), None);
        assert_eq!(idx.population(), 4);
        assert_eq!(idx.grow(TypeId(5)), 2);
        let mut ids: Vec<_> = idx.iter().collect();
        ids.sort();
        assert_eq!(ids, vec![(TypeId(2), 3), (TypeId(5), 2)]);
    }

    #[test]
    fn weighted_selection_tracks_sizes() {
        let mut idx = TypeIndex::new();
        idx.insert(TypeId(1), 1);
        idx.insert(TypeId(2), 9);
        let mut rng = derive_trial_rng(1, 0);
        let n = 20_000;
        let hits = (0..n).filter(|_| idx.sample_by_size(&mut rng) == TypeId(2)).count();
        let p = hits as f64 / n as f64;
        assert!((p - 0.9).abs() < 5.0 * (0.09f64 / n as f64).sqrt(), "{p}");
        let uni = (0..n).filter(|_| idx.sample_uniform(&mut rng) == TypeId(2)).count();
        let p = uni as f64 / n as f64;
        assert!((p - 0.5).abs() < 5.0 * (0.25f64 / n as f64).sqrt(), "{p}");
    }
}
