//! Complete binary tree of priorities supporting prefix-sum sampling and
//! point updates in O(log capacity).

use crate::error::{Error, Result};

pub struct SumTree {
    /// Leaf slots, rounded up to a power of two internally.
    leaf_base: usize,
    /// Logical leaf count exposed to callers.
    size: usize,
    /// 1-indexed heap layout: `tree[1]` is the root, leaves start at
    /// `leaf_base`.
    tree: Vec<f64>,
}

impl SumTree {
    pub fn new(size: usize) -> Self {
        assert!(size > 0);
        let leaf_base = size.next_power_of_two();
        SumTree { leaf_base, size, tree: vec![0.0; 2 * leaf_base] }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn total(&self) -> f64 {
        self.tree[1]
    }

    pub fn get(&self, leaf: usize) -> f64 {
        assert!(leaf < self.size);
        self.tree[self.leaf_base + leaf]
    }

    /// Set a leaf priority and recompute ancestors from their children, so
    /// internal nodes stay exact sums.
    pub fn update(&mut self, leaf: usize, priority: f64) {
        assert!(leaf < self.size, "leaf {leaf} out of range {}", self.size);
        assert!(priority >= 0.0 && priority.is_finite());
        let mut node = self.leaf_base + leaf;
        self.tree[node] = priority;
        while node > 1 {
            node /= 2;
            self.tree[node] = self.tree[2 * node] + self.tree[2 * node + 1];
        }
    }

    /// The unique leaf where the running prefix sum crosses `prefix`.
    pub fn find(&self, prefix: f64) -> Result<usize> {
        let total = self.total();
        if !(0.0..total).contains(&prefix) {
            return Err(Error::PrefixOutOfRange { prefix, total });
        }
        let mut node = 1usize;
        let mut rest = prefix;
        while node < self.leaf_base {
            let left = 2 * node;
            if rest < self.tree[left] {
                node = left;
            } else {
                rest -= self.tree[left];
                node = left + 1;
            }
        }
        Ok(node - self.leaf_base)
    }

    /// Worst relative deviation of any internal node from the sum of its
    /// children (diagnostic for tests).
    pub fn node_sum_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for node in 1..self.leaf_base {
            let sum = self.tree[2 * node] + self.tree[2 * node + 1];
            let denom = sum.abs().max(1e-12);
            worst = worst.max((self.tree[node] - sum).abs() / denom);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_and_finds() {
        let mut t = SumTree::new(4);
        for (i, p) in [3.0, 1.0, 4.0, 2.0].iter().enumerate() {
            t.update(i, *p);
        }
        assert_eq!(t.total(), 10.0);
        assert_eq!(t.find(0.0).unwrap(), 0);
        assert_eq!(t.find(4.5).unwrap(), 2);
        t.update(1, 5.0);
        assert_eq!(t.total(), 14.0);
        assert_eq!(t.find(3.5).unwrap(), 1);
    }

    #[test]
    fn prefix_out_of_range() {
        let mut t = SumTree::new(2);
        t.update(0, 1.0);
        assert!(t.find(1.0).is_err());
        assert!(t.find(-0.1).is_err());
    }

    #[test]
    fn non_power_of_two_size() {
        let mut t = SumTree::new(5);
        for i in 0..5 {
            t.update(i, 1.0);
        }
        assert_eq!(t.total(), 5.0);
        assert_eq!(t.find(4.999).unwrap(), 4);
    }

    #[test]
    fn randomized_ops_match_linear_scan_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let n = 64;
        let mut tree = SumTree::new(n);
        let mut oracle = vec![0.0f64; n];
        for _ in 0..10_000 {
            match rng.gen_range(0..3) {
                0 => {
                    let leaf = rng.gen_range(0..n);
                    let p = rng.gen_range(0.0..10.0f64);
                    tree.update(leaf, p);
                    oracle[leaf] = p;
                }
                1 => {
                    let total: f64 = oracle.iter().sum();
                    let rel = (tree.total() - total).abs() / total.abs().max(1e-12);
                    assert!(rel <= 1e-9, "total drift {rel}");
                }
                _ => {
                    let total: f64 = oracle.iter().sum();
                    if total > 0.0 {
                        let prefix = rng.gen_range(0.0..total).min(tree.total() * 0.999999);
                        let got = tree.find(prefix).unwrap();
                        // linear prefix scan
                        let mut acc = 0.0;
                        let mut want = n - 1;
                        for (i, &p) in oracle.iter().enumerate() {
                            acc += p;
                            if prefix < acc {
                                want = i;
                                break;
                            }
                        }
                        assert_eq!(got, want, "prefix {prefix}");
                    }
                }
            }
            assert!(tree.node_sum_error() <= 1e-9);
        }
    }
}
