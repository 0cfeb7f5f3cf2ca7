//! Fenwick (binary indexed) tree over integer weights, used to draw an index
//! with probability proportional to its weight while weights change.

use rand::Rng;

#[derive(Clone, Debug)]
pub struct FenwickSampler {
    /// 1-based implicit tree; `tree[0]` unused.
    tree: Vec<u64>,
    weights: Vec<u64>,
    total: u64,
    top_bit: usize,
}

impl FenwickSampler {
    pub fn new(weights: Vec<u64>) -> Self {
        let n = weights.len();
        let mut tree = vec![0u64; n + 1];
        for (i, &w) in weights.iter().enumerate() {
            tree[i + 1] += w;
            let parent = (i + 1) + lowest_bit(i + 1);
            if parent <= n {
                tree[parent] += tree[i + 1];
            }
        }
        let total = weights.iter().sum();
        let top_bit = if n == 0 {
            0
        } else {
            1 << (usize::BITS - 1 - n.leading_zeros())
        };
        Self {
            tree,
            weights,
            total,
            top_bit,
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

    pub fn weight(&self, index: usize) -> u64 {
        self.weights[index]
    }

    pub fn set(&mut self, index: usize, weight: u64) {
        let old = self.weights[index];
        if old == weight {
            return;
        }
        self.weights[index] = weight;
        self.total = self.total - old + weight;
        let mut i = index + 1;
        while i < self.tree.len() {
            self.tree[i] = self.tree[i] - old + weight;
            i += lowest_bit(i);
        }
    }

    /// Sum of weights with index `< end`.
    pub fn prefix_sum(&self, end: usize) -> u64 {
        let mut i = end;
        let mut sum = 0;
        while i > 0 {
            sum += self.tree[i];
            i -= lowest_bit(i);
        }
        sum
    }

    /// Smallest index whose cumulative weight exceeds `target`
    /// (`target < total`).
    pub fn find(&self, mut target: u64) -> usize {
        debug_assert!(target < self.total);
        let mut pos = 0;
        let mut step = self.top_bit;
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }

    /// Index drawn proportionally to the weights, `None` when all are zero.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        if self.total == 0 {
            return None;
        }
        Some(self.find(rng.random_range(0..self.total)))
    }
}

#[inline]
fn lowest_bit(i: usize) -> usize {
    i & i.wrapping_neg()
}
