//! Bi-objective 0/1 knapsack: maximize packed value, minimize packed weight,
//! stated as the minimization pair `(−Σ value, Σ weight)`.
//!
//! Item values and weights are seeded uniform integers, so instances are
//! portable as `(n, seed)` descriptors, and the exact Pareto front is
//! available by exhaustive enumeration for small `n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::genome::{FixedMask, Genome};
use crate::moea::ObjectiveVector;
use crate::problems::Problem;
use crate::Result;

/// Largest `n` for which the exhaustive `2^n` oracle front is offered.
pub const ORACLE_MAX_DOF: usize = 22;

#[derive(Debug, Clone)]
pub struct Knapsack {
    values: Vec<f64>,
    weights: Vec<f64>,
    mask: FixedMask,
}

impl Knapsack {
    /// Seeded instance with integer values and weights drawn uniformly from
    /// `10..=100`.
    pub fn new(n: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::config(format!(
                "knapsack needs at least 2 items, got {n}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..n).map(|_| rng.gen_range(10..=100) as f64).collect();
        let weights = (0..n).map(|_| rng.gen_range(10..=100) as f64).collect();
        Ok(Knapsack {
            values,
            weights,
            mask: FixedMask::none(n),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn pair_for_mask(&self, bits: u64) -> (f64, f64) {
        let mut value = 0.0;
        let mut weight = 0.0;
        for i in 0..self.values.len() {
            if bits >> i & 1 == 1 {
                value += self.values[i];
                weight += self.weights[i];
            }
        }
        (-value, weight)
    }
}

impl Problem for Knapsack {
    fn name(&self) -> &str {
        "knapsack"
    }

    fn dof(&self) -> usize {
        self.values.len()
    }

    fn objective_count(&self) -> usize {
        2
    }

    fn fixed_mask(&self) -> &FixedMask {
        &self.mask
    }

    fn evaluate(&self, genome: &Genome) -> ObjectiveVector {
        let mut value = 0.0;
        let mut weight = 0.0;
        for i in genome.active_indices() {
            value += self.values[i];
            weight += self.weights[i];
        }
        ObjectiveVector::new(vec![-value, weight])
    }

    fn reference_nadir(&self) -> ObjectiveVector {
        // Worst in each objective: the empty pack carries no value (f1 = 0),
        // the full pack all the weight.
        ObjectiveVector::new(vec![0.0, self.weights.iter().sum()])
    }

    /// Exhaustive front over all `2^n` packs, as unique objective vectors in
    /// ascending `f1` order; `None` beyond [`ORACLE_MAX_DOF`].
    fn oracle_front(&self) -> Option<Vec<ObjectiveVector>> {
        let n = self.values.len();
        if n > ORACLE_MAX_DOF {
            return None;
        }
        let mut points: Vec<(f64, f64)> = (0u64..1 << n).map(|m| self.pair_for_mask(m)).collect();
        // 2-D skyline: after sorting by (f1, f2) ascending, a point is
        // nondominated exactly when its f2 beats all earlier points'.
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut front = Vec::new();
        let mut best_weight = f64::INFINITY;
        for (v, w) in points {
            if w < best_weight {
                best_weight = w;
                front.push(ObjectiveVector::new(vec![v, w]));
            }
        }
        Some(front)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moea::dominates;

    #[test]
    fn extremes_match_hand_arithmetic() {
        let p = Knapsack::new(8, 5).unwrap();
        let total_v: f64 = p.values().iter().sum();
        let total_w: f64 = p.weights().iter().sum();
        let mask = FixedMask::none(8);
        let empty = Genome::empty(mask.clone());
        assert_eq!(p.evaluate(&empty).as_slice(), &[0.0, 0.0]);
        let full = Genome::full(mask);
        assert_eq!(p.evaluate(&full).as_slice(), &[-total_v, total_w]);
    }

    #[test]
    fn items_are_integers_in_range() {
        let p = Knapsack::new(64, 123).unwrap();
        for &x in p.values().iter().chain(p.weights()) {
            assert_eq!(x, x.trunc());
            assert!((10.0..=100.0).contains(&x));
        }
    }

    #[test]
    fn oracle_matches_literal_pairwise_filter_n12() {
        let p = Knapsack::new(12, 777).unwrap();
        let all: Vec<Vec<f64>> = (0u64..1 << 12)
            .map(|m| {
                let (v, w) = p.pair_for_mask(m);
                vec![v, w]
            })
            .collect();
        let mut brute: Vec<Vec<f64>> = all
            .iter()
            .filter(|a| !all.iter().any(|b| dominates(b, a)))
            .cloned()
            .collect();
        brute.sort_by(|a, b| a.partial_cmp(b).unwrap());
        brute.dedup();

        let oracle: Vec<Vec<f64>> = p
            .oracle_front()
            .unwrap()
            .iter()
            .map(|v| v.as_slice().to_vec())
            .collect();
        assert_eq!(oracle, brute);
    }

    #[test]
    fn oracle_front_is_strictly_monotone() {
        let p = Knapsack::new(16, 9).unwrap();
        let front = p.oracle_front().unwrap();
        assert!(front.len() >= 2);
        for pair in front.windows(2) {
            assert!(pair[0][0] < pair[1][0]);
            assert!(pair[0][1] > pair[1][1]);
        }
        // Both extremes are always on the front.
        let total_v: f64 = p.values().iter().sum();
        let total_w: f64 = p.weights().iter().sum();
        assert_eq!(front.first().unwrap().as_slice(), &[-total_v, total_w]);
        assert_eq!(front.last().unwrap().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn evaluate_agrees_with_mask_arithmetic() {
        let p = Knapsack::new(10, 41).unwrap();
        let mask = FixedMask::none(10);
        for m in [0u64, 1, 513, 1023, 680] {
            let bits: String = (0..10)
                .map(|i| if m >> i & 1 == 1 { '1' } else { '0' })
                .collect();
            let g = Genome::from_bit_string(&bits, mask.clone()).unwrap();
            let (v, w) = p.pair_for_mask(m);
            assert_eq!(g.active_count(), m.count_ones() as usize);
            assert_eq!(p.evaluate(&g).as_slice(), &[v, w]);
        }
    }

    #[test]
    fn oracle_unavailable_beyond_cap() {
        let p = Knapsack::new(ORACLE_MAX_DOF + 1, 1).unwrap();
        assert!(p.oracle_front().is_none());
    }
}
