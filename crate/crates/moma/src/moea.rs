//! Dominance-based evolutionary machinery shared by all three optimizers:
//! Pareto dominance, fast nondominated sorting, crowding distances, k-point
//! crossover, single-bit mutation, and elitist environmental selection.
//!
//! All objectives are minimized. Ranking and truncation follow the standard
//! two-stage scheme: whole fronts are admitted while they fit, and the first
//! front that does not fit is truncated by descending crowding distance.

use std::ops::Deref;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::genome::Genome;
use crate::weights::WeightVector;
use crate::Result;

/// One point in objective space; all components are minimized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector(Vec<f64>);

impl ObjectiveVector {
    pub fn new(values: Vec<f64>) -> Self {
        ObjectiveVector(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ObjectiveVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ObjectiveVector {
    fn from(v: Vec<f64>) -> Self {
        ObjectiveVector(v)
    }
}

/// Weak Pareto dominance for minimization: `a` dominates `b` when `a` is no
/// worse in every objective and strictly better in at least one.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    debug_assert_eq!(a.len(), b.len());
    let mut strictly_better = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly_better = true;
        }
    }
    strictly_better
}

/// One agent of the population: a genome, its objectives, and the
/// scalarization weight currently responsible for it.
#[derive(Debug, Clone)]
pub struct Individual {
    pub genome: Genome,
    pub objectives: ObjectiveVector,
    pub weight: WeightVector,
    /// Front index after the last nondominated sort (0 = best).
    pub rank: usize,
    /// Crowding distance within the front of the last sort.
    pub crowding: f64,
}

impl Individual {
    pub fn new(genome: Genome, objectives: ObjectiveVector, weight: WeightVector) -> Self {
        Individual {
            genome,
            objectives,
            weight,
            rank: 0,
            crowding: 0.0,
        }
    }
}

/// Partition points into nondominated fronts: front 0 is mutually
/// nondominated, front 1 is nondominated once front 0 is removed, and so on.
/// Returns index lists; the union of all fronts is `0..points.len()`.
pub fn fast_nondominated_sort(points: &[&[f64]]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    let mut fronts: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();

    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(points[i], points[j]) {
                dominated_by[i].push(j);
                domination_count[j] += 1;
            } else if dominates(points[j], points[i]) {
                dominated_by[j].push(i);
                domination_count[i] += 1;
            }
        }
        if domination_count[i] == 0 {
            current.push(i);
        }
    }
    // The first pass can only certify i as nondominated after the full inner
    // loop; collect front 0 in a second sweep to keep index order.
    current = (0..n).filter(|&i| domination_count[i] == 0).collect();

    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::take(&mut current));
        current = next;
    }
    fronts
}

/// Crowding distance of each member of one front. Boundary points along any
/// objective get `f64::INFINITY`; interior points sum the normalized gaps of
/// their sorted neighbors per objective. Objectives with zero range
/// contribute nothing.
pub fn crowding_distance(front: &[&[f64]]) -> Vec<f64> {
    let n = front.len();
    if n == 0 {
        return Vec::new();
    }
    let m = front[0].len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let mut distance = vec![0.0f64; n];
    let mut order: Vec<usize> = (0..n).collect();
    for obj in 0..m {
        order.sort_by(|&a, &b| front[a][obj].partial_cmp(&front[b][obj]).unwrap());
        let lo = front[order[0]][obj];
        let hi = front[order[n - 1]][obj];
        let range = hi - lo;
        distance[order[0]] = f64::INFINITY;
        distance[order[n - 1]] = f64::INFINITY;
        if range <= 0.0 {
            continue;
        }
        for w in 1..n - 1 {
            let gap = front[order[w + 1]][obj] - front[order[w - 1]][obj];
            distance[order[w]] += gap / range;
        }
    }
    distance
}

/// Swap the tails of two genomes at `n_points` random cut positions.
/// Fixed-mask bits are re-asserted on both children, so a cut can never
/// deactivate a locked element.
pub fn crossover<R: Rng>(
    a: &Genome,
    b: &Genome,
    n_points: usize,
    rng: &mut R,
) -> Result<(Genome, Genome)> {
    let n = a.len();
    if b.len() != n {
        return Err(Error::contract(format!(
            "crossover of genomes with different lengths {n} and {}",
            b.len()
        )));
    }
    if n < 2 || n_points == 0 || n_points >= n {
        return Err(Error::contract(format!(
            "crossover needs 1 <= n_points < genome length, got {n_points} for length {n}"
        )));
    }
    // Distinct interior cut positions; `cuts[i] = c` swaps at bit boundary c.
    let mut cuts: Vec<usize> = Vec::with_capacity(n_points);
    while cuts.len() < n_points {
        let c = rng.gen_range(1..n);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    crossover_at(a, b, &cuts)
}

/// Deterministic core of [`crossover`]: swap segments at the given ascending
/// cut boundaries (`cut = c` means positions `c..` switch parent).
pub fn crossover_at(a: &Genome, b: &Genome, cuts: &[usize]) -> Result<(Genome, Genome)> {
    let n = a.len();
    let mut bits_a: Vec<bool> = Vec::with_capacity(n);
    let mut bits_b: Vec<bool> = Vec::with_capacity(n);
    let mut from_a = true;
    let mut cut_iter = cuts.iter().peekable();
    for i in 0..n {
        if cut_iter.peek() == Some(&&i) {
            from_a = !from_a;
            cut_iter.next();
        }
        let (x, y) = if from_a {
            (a.is_active(i), b.is_active(i))
        } else {
            (b.is_active(i), a.is_active(i))
        };
        bits_a.push(x);
        bits_b.push(y);
    }
    // Re-assert locked elements: a swapped segment may have carried a 0 from
    // a parent whose mask differs in no way, but stay defensive.
    let mask = a.mask().clone();
    for i in 0..n {
        if mask.is_fixed(i) {
            bits_a[i] = true;
            bits_b[i] = true;
        }
    }
    Ok((Genome::new(bits_a, mask.clone())?, Genome::new(bits_b, mask)?))
}

/// With probability `p_mutation`, flip exactly one uniformly chosen non-fixed
/// bit. `p_mutation = 1` therefore means "always one flip", not per-bit
/// flipping.
pub fn mutate<R: Rng>(genome: &mut Genome, p_mutation: f64, rng: &mut R) -> Result<()> {
    if !(0.0..=1.0).contains(&p_mutation) {
        return Err(Error::config(format!(
            "p_mutation must lie in [0, 1], got {p_mutation}"
        )));
    }
    if p_mutation < 1.0 && rng.gen_range(0.0..1.0) >= p_mutation {
        return Ok(());
    }
    let free: Vec<usize> = (0..genome.len())
        .filter(|&i| !genome.mask().is_fixed(i))
        .collect();
    if free.is_empty() {
        return Ok(());
    }
    let k = free[rng.gen_range(0..free.len())];
    genome.flip(k);
    Ok(())
}

/// Elitist truncation of `parents ∪ offspring` to `capacity` survivors.
/// Whole fronts are admitted while they fit; the splitting front is truncated
/// by descending crowding distance, ties broken by original index so the
/// outcome is deterministic. Survivors carry updated `rank` and `crowding`.
pub fn environmental_selection(
    parents: Vec<Individual>,
    offspring: Vec<Individual>,
    capacity: usize,
) -> Result<Vec<Individual>> {
    let mut pool: Vec<Individual> = parents;
    pool.extend(offspring);
    if pool.len() < capacity {
        return Err(Error::contract(format!(
            "selection capacity {capacity} exceeds pool size {}",
            pool.len()
        )));
    }

    let points: Vec<&[f64]> = pool.iter().map(|ind| ind.objectives.as_slice()).collect();
    let fronts = fast_nondominated_sort(&points);

    let mut survivors: Vec<Individual> = Vec::with_capacity(capacity);
    let mut keep = vec![false; pool.len()];
    let mut assigned: Vec<(usize, usize, f64)> = Vec::with_capacity(pool.len());

    for (rank, front) in fronts.iter().enumerate() {
        let front_points: Vec<&[f64]> = front.iter().map(|&i| points[i]).collect();
        let crowding = crowding_distance(&front_points);
        let mut members: Vec<(usize, f64)> = front
            .iter()
            .copied()
            .zip(crowding.iter().copied())
            .collect();
        let room = capacity - assigned.len();
        if members.len() > room {
            // Truncate the splitting front: largest crowding first, original
            // index as the deterministic tie-break.
            members.sort_by(|a, b| {
                b.1.partial_cmp(&a.1)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.0.cmp(&b.0))
            });
            members.truncate(room);
            members.sort_by_key(|&(i, _)| i);
        }
        for (i, c) in members {
            assigned.push((i, rank, c));
            keep[i] = true;
        }
        if assigned.len() == capacity {
            break;
        }
    }

    // Rebuild in pool order so the survivor list is stable across runs.
    assigned.sort_by_key(|&(i, _, _)| i);
    let mut meta = assigned.into_iter();
    for (i, ind) in pool.into_iter().enumerate() {
        if keep[i] {
            let (_, rank, crowding) = meta.next().expect("meta aligned with keep flags");
            let mut ind = ind;
            ind.rank = rank;
            ind.crowding = crowding;
            survivors.push(ind);
        }
    }
    Ok(survivors)
}
