//! Leading-Ones-Trailing-Zeros: the classic bi-objective bit-string
//! benchmark with an analytically known Pareto front.
//!
//! Minimizing `(n − LeadingOnes, n − TrailingZeros)` makes the two counts
//! compete for the same bits: the exact front is the `n + 1` genomes of the
//! form `1^k 0^(n-k)`, with objectives `(n − k, k)`.

use crate::error::Error;
use crate::genome::{FixedMask, Genome};
use crate::moea::ObjectiveVector;
use crate::problems::Problem;
use crate::Result;

#[derive(Debug, Clone)]
pub struct Lotz {
    n: usize,
    mask: FixedMask,
}

impl Lotz {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::config(format!(
                "lotz needs at least 2 bits, got {n}"
            )));
        }
        Ok(Lotz {
            n,
            mask: FixedMask::none(n),
        })
    }

    pub fn leading_ones(genome: &Genome) -> usize {
        (0..genome.len()).take_while(|&i| genome.is_active(i)).count()
    }

    pub fn trailing_zeros(genome: &Genome) -> usize {
        (0..genome.len())
            .rev()
            .take_while(|&i| !genome.is_active(i))
            .count()
    }
}

impl Problem for Lotz {
    fn name(&self) -> &str {
        "lotz"
    }

    fn dof(&self) -> usize {
        self.n
    }

    fn objective_count(&self) -> usize {
        2
    }

    fn fixed_mask(&self) -> &FixedMask {
        &self.mask
    }

    fn evaluate(&self, genome: &Genome) -> ObjectiveVector {
        let n = self.n as f64;
        ObjectiveVector::new(vec![
            n - Self::leading_ones(genome) as f64,
            n - Self::trailing_zeros(genome) as f64,
        ])
    }

    fn reference_nadir(&self) -> ObjectiveVector {
        ObjectiveVector::new(vec![self.n as f64, self.n as f64])
    }

    fn oracle_front(&self) -> Option<Vec<ObjectiveVector>> {
        Some(
            (0..=self.n)
                .map(|k| ObjectiveVector::new(vec![(self.n - k) as f64, k as f64]))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moea::dominates;

    fn eval(bits: &str) -> Vec<f64> {
        let p = Lotz::new(bits.len()).unwrap();
        let g = Genome::from_bit_string(bits, FixedMask::none(bits.len())).unwrap();
        p.evaluate(&g).as_slice().to_vec()
    }

    #[test]
    fn counts_match_hand_examples() {
        assert_eq!(eval("1100"), vec![2.0, 2.0]);
        assert_eq!(eval("1111"), vec![0.0, 4.0]);
        assert_eq!(eval("0000"), vec![4.0, 0.0]);
        assert_eq!(eval("1010"), vec![3.0, 3.0]);
        assert_eq!(eval("0110"), vec![4.0, 3.0]);
    }

    #[test]
    fn oracle_front_matches_exhaustive_enumeration_n4() {
        let p = Lotz::new(4).unwrap();
        let mut all: Vec<Vec<f64>> = (0u32..16)
            .map(|bits| {
                let s: String = (0..4)
                    .map(|i| if bits >> i & 1 == 1 { '1' } else { '0' })
                    .collect();
                let g = Genome::from_bit_string(&s, FixedMask::none(4)).unwrap();
                p.evaluate(&g).as_slice().to_vec()
            })
            .collect();
        let brute: Vec<Vec<f64>> = all
            .iter()
            .filter(|a| !all.iter().any(|b| dominates(b, a)))
            .cloned()
            .collect();
        let mut brute_unique = brute;
        brute_unique.sort_by(|a, b| a.partial_cmp(b).unwrap());
        brute_unique.dedup();
        all.clear();

        let mut oracle: Vec<Vec<f64>> = p
            .oracle_front()
            .unwrap()
            .iter()
            .map(|v| v.as_slice().to_vec())
            .collect();
        oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(oracle, brute_unique);
        assert_eq!(oracle.len(), 5);
    }

    #[test]
    fn front_genomes_are_the_sorted_bit_strings() {
        let p = Lotz::new(6).unwrap();
        for k in 0..=6usize {
            let bits: String = "1".repeat(k) + &"0".repeat(6 - k);
            let g = Genome::from_bit_string(&bits, FixedMask::none(6)).unwrap();
            let f = p.evaluate(&g);
            assert_eq!(f.as_slice(), &[(6 - k) as f64, k as f64]);
        }
    }

    #[test]
    fn front_points_are_mutually_nondominated() {
        let p = Lotz::new(16).unwrap();
        let front = p.oracle_front().unwrap();
        assert_eq!(front.len(), 17);
        for a in &front {
            for b in &front {
                assert!(!dominates(a.as_slice(), b.as_slice()));
            }
        }
    }
}
