//! Dynamic integer-weighted sampling.
//!
//! A Fenwick tree over non-negative `u64` weights that supports appending,
//! swap-removal, point updates and inverse prefix-sum lookup, all in
//! `O(log n)`. Integer weights keep the totals exact, so sampling never
//! drifts the way floating cumulative sums do.

#[derive(Debug, Clone, Default)]
pub struct WeightTree {
    // 1-based Fenwick array; tree[0] is unused.
    tree: Vec<u64>,
    weights: Vec<u64>,
    total: u64,
}

#[inline]
fn lsb(i: usize) -> usize {
    i & i.wrapping_neg()
}

impl WeightTree {
    pub fn new() -> Self {
        WeightTree {
            tree: vec![0],
            weights: Vec::new(),
            total: 0,
        }
    }

    pub fn with_capacity(n: usize) -> Self {
        let mut tree = Vec::with_capacity(n + 1);
        tree.push(0);
        WeightTree {
            tree,
            weights: Vec::with_capacity(n),
            total: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, index: usize) -> u64 {
        self.weights[index]
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    /// Sum of the weights at positions `< end`.
    pub fn prefix_sum(&self, end: usize) -> u64 {
        let mut i = end;
        let mut sum = 0;
        while i > 0 {
            sum += self.tree[i];
            i -= lsb(i);
        }
        sum
    }

    /// Appends a weight and returns its index.
    pub fn push(&mut self, weight: u64) -> usize {
        let index = self.weights.len();
        let node = index + 1;
        // Node `node` covers (node - lsb(node), node].
        let covered = self.prefix_sum(index) - self.prefix_sum(node - lsb(node));
        self.tree.push(covered + weight);
        self.weights.push(weight);
        self.total += weight;
        index
    }

    fn add_signed(&mut self, index: usize, delta: i64) {
        let mut i = index + 1;
        let n = self.tree.len();
        while i < n {
            self.tree[i] = self.tree[i].wrapping_add_signed(delta);
            i += lsb(i);
        }
        self.total = self.total.wrapping_add_signed(delta);
    }

    pub fn set(&mut self, index: usize, weight: u64) {
        let old = self.weights[index];
        if old != weight {
            self.weights[index] = weight;
            self.add_signed(index, weight as i64 - old as i64);
        }
    }

    pub fn increment(&mut self, index: usize) {
        self.weights[index] += 1;
        self.add_signed(index, 1);
    }

    pub fn decrement(&mut self, index: usize) {
        debug_assert!(self.weights[index] > 0);
        self.weights[index] -= 1;
        self.add_signed(index, -1);
    }

    /// Removes position `index`, moving the last entry into its place.
    /// Returns the removed weight.
    pub fn swap_remove(&mut self, index: usize) -> u64 {
        let last = self.weights.len() - 1;
        let removed = self.weights[index];
        if index != last {
            let moved = self.weights[last];
            self.set(index, moved);
        }
        // Zero the last slot before dropping it so the running total stays right.
        self.set(last, 0);
        self.weights.pop();
        self.tree.pop();
        removed
    }

    /// Finds the position whose cumulative range contains `target`, i.e. the
    /// smallest `i` with `prefix_sum(i + 1) > target`, together with the offset
    /// of `target` inside that position's weight.
    ///
    /// Requires `target < total()`.
    pub fn find(&self, target: u64) -> (usize, u64) {
        assert!(target < self.total, "target {target} out of range {}", self.total);
        let n = self.tree.len() - 1;
        let mut pos = 0usize;
        let mut rem = target;
        let mut step = if n == 0 { 0 } else { 1usize << (usize::BITS - 1 - n.leading_zeros()) };
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= rem {
                rem -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        (pos, rem)
    }
}
