//! Scalarization weights and their per-iteration adaptation.
//!
//! Weight vectors live on the unit simplex and are matched to solutions by
//! the *angular distance* between a weight and the solution's normalized
//! objective vector. Around that metric this module builds:
//!
//! * a deterministic simplex-lattice initializer ([`simplex_lattice`]),
//! * neighborhood bookkeeping that decides which weights earn their keep
//!   ([`build_neighborhoods`], [`redistribute_spill`]),
//! * replacement-vector generation inside a cone around a stale weight
//!   ([`generate_wvg`]) and greedy re-selection to the population size
//!   ([`select_final_weights`]),
//! * the one-to-one weight↔solution assignment used before local search
//!   ([`assign_weights`]).
//!
//! [`update_weight_set`] chains the neighborhood/replacement steps into the
//! per-iteration update used by the adaptive-weight optimizer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::moea::ObjectiveVector;
use crate::Result;

/// Tolerance on the simplex constraint `Σ w_i == 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A point on the unit simplex: nonnegative components summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Validate an explicit simplex point.
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.len() < 2 {
            return Err(Error::contract(
                "weight vectors need at least two components",
            ));
        }
        if components.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::contract(format!(
                "weight components must be finite and nonnegative, got {components:?}"
            )));
        }
        let sum: f64 = components.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::contract(format!(
                "weight components must sum to 1 within {WEIGHT_SUM_TOL}, got {sum}"
            )));
        }
        Ok(WeightVector(components))
    }

    /// Project nonnegative components onto the simplex by dividing by their
    /// sum. Used for sampled vectors whose raw sum drifted from one.
    pub fn normalized(components: Vec<f64>) -> Result<Self> {
        if components.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::contract(format!(
                "weight components must be finite and nonnegative, got {components:?}"
            )));
        }
        let sum: f64 = components.iter().sum();
        if sum <= 0.0 {
            return Err(Error::contract("cannot normalize an all-zero weight"));
        }
        WeightVector::new(components.iter().map(|w| w / sum).collect())
    }

    /// Equal weight on every objective.
    pub fn uniform(m: usize) -> Self {
        WeightVector(vec![1.0 / m as f64; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Scalarize an objective vector: the plain dot product `wᵀf`.
    pub fn composite(&self, objectives: &[f64]) -> f64 {
        debug_assert_eq!(self.0.len(), objectives.len());
        self.0.iter().zip(objectives).map(|(w, f)| w * f).sum()
    }
}

/// An ordered collection of weight vectors of one dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    columns: Vec<WeightVector>,
}

impl WeightSet {
    pub fn new(columns: Vec<WeightVector>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::contract("weight sets cannot be empty"));
        }
        let m = columns[0].len();
        if columns.iter().any(|c| c.len() != m) {
            return Err(Error::contract(
                "all weight vectors of a set must share one dimensionality",
            ));
        }
        Ok(WeightSet { columns })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Number of objectives each vector weighs.
    pub fn m(&self) -> usize {
        self.columns[0].len()
    }

    pub fn get(&self, j: usize) -> &WeightVector {
        &self.columns[j]
    }

    pub fn iter(&self) -> impl Iterator<Item = &WeightVector> {
        self.columns.iter()
    }

    pub fn columns(&self) -> &[WeightVector] {
        &self.columns
    }

    /// Write one vector per row (`w1,...,wM`, headerless) — the format used
    /// by the per-iteration weight traces.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for col in &self.columns {
            out.serialize(col.as_slice())?;
        }
        out.flush()?;
        Ok(())
    }

    /// Read a headerless CSV written by [`WeightSet::write_csv`].
    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut input = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
        let mut columns = Vec::new();
        for record in input.deserialize() {
            let row: Vec<f64> = record?;
            columns.push(WeightVector::new(row)?);
        }
        WeightSet::new(columns)
    }
}

fn binomial_at_least(h: u64, m: u64, target: u64) -> bool {
    // C(h + m - 1, m - 1) >= target, with saturation so huge lattices never
    // overflow the check.
    let k = m - 1;
    let mut value: u128 = 1;
    for i in 0..k {
        value = value.saturating_mul((h + i + 1) as u128) / (i + 1) as u128;
        if value >= target as u128 {
            return true;
        }
    }
    value >= target as u128
}

fn compositions(h: u64, m: usize) -> Vec<Vec<u64>> {
    // All m-part compositions of h in lexicographic order of the parts.
    fn rec(h: u64, parts_left: usize, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if parts_left == 1 {
            prefix.push(h);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=h {
            prefix.push(k);
            rec(h - k, parts_left - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(h, m, &mut Vec::new(), &mut out);
    out
}

/// Deterministic structured initial weights: the coarsest simplex lattice
/// holding at least `n` points, greedily thinned to exactly `n` vectors while
/// always retaining the `m` unit vectors.
///
/// Thinning is farthest-point: starting from the unit vectors, repeatedly
/// admit the lattice point with the largest minimum angular distance to the
/// already chosen set (ties broken by lattice index). The result keeps
/// lattice order.
pub fn simplex_lattice(m: usize, n: usize) -> Result<WeightSet> {
    if m < 2 {
        return Err(Error::contract(format!(
            "simplex lattice needs at least 2 objectives, got {m}"
        )));
    }
    if n < m {
        return Err(Error::contract(format!(
            "simplex lattice needs n >= m to retain all unit vectors, got n={n}, m={m}"
        )));
    }
    let mut h = 1u64;
    while !binomial_at_least(h, m as u64, n as u64) {
        h += 1;
    }
    let lattice: Vec<WeightVector> = compositions(h, m)
        .into_iter()
        .map(|parts| {
            WeightVector::new(parts.iter().map(|&k| k as f64 / h as f64).collect())
                .expect("lattice points lie on the simplex")
        })
        .collect();

    if lattice.len() == n {
        return WeightSet::new(lattice);
    }

    // Seed with the unit vectors, then farthest-point selection.
    let mut chosen = vec![false; lattice.len()];
    let mut n_chosen = 0usize;
    for (idx, w) in lattice.iter().enumerate() {
        if w.as_slice().iter().any(|&c| c == 1.0) {
            chosen[idx] = true;
            n_chosen += 1;
        }
    }
    debug_assert_eq!(n_chosen, m);

    // min_dist[i] = smallest angle from lattice[i] to any chosen vector.
    let mut min_dist: Vec<f64> = lattice
        .iter()
        .map(|w| {
            lattice
                .iter()
                .enumerate()
                .filter(|(j, _)| chosen[*j])
                .map(|(_, c)| angular_distance(w.as_slice(), c.as_slice()))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();

    while n_chosen < n {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..lattice.len() {
            if chosen[i] {
                continue;
            }
            match best {
                Some((_, d)) if min_dist[i] <= d => {}
                _ => best = Some((i, min_dist[i])),
            }
        }
        let (pick, _) = best.expect("lattice holds at least n points");
        chosen[pick] = true;
        n_chosen += 1;
        for i in 0..lattice.len() {
            if !chosen[i] {
                let d = angular_distance(lattice[i].as_slice(), lattice[pick].as_slice());
                min_dist[i] = min_dist[i].min(d);
            }
        }
    }

    WeightSet::new(
        lattice
            .into_iter()
            .enumerate()
            .filter(|(i, _)| chosen[*i])
            .map(|(_, w)| w)
            .collect(),
    )
}

/// Objective vectors mapped into `[0, 1)` per objective. Row `i` corresponds
/// to input solution `i`.
#[derive(Debug, Clone)]
pub struct NormalizedObjectives {
    rows: Vec<Vec<f64>>,
}

impl NormalizedObjectives {
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Componentwise min and max over a set of objective vectors.
pub fn objective_bounds(points: &[ObjectiveVector]) -> Result<(Vec<f64>, Vec<f64>)> {
    let first = points
        .first()
        .ok_or_else(|| Error::contract("objective bounds of an empty set"))?;
    let m = first.len();
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for p in points {
        if p.len() != m {
            return Err(Error::contract(
                "objective vectors of mixed dimensionality",
            ));
        }
        for (k, &v) in p.iter().enumerate() {
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    Ok((lo, hi))
}

/// Map objectives into `[0, 1)`: `(f - z_lo) / (z_hi - z_lo + 1)`.
///
/// The `+ 1` keeps the denominator positive even for degenerate objectives
/// whose population range is zero, at the price of never quite reaching 1.
pub fn normalize(
    points: &[ObjectiveVector],
    z_lo: &[f64],
    z_hi: &[f64],
) -> Result<NormalizedObjectives> {
    let m = z_lo.len();
    if z_hi.len() != m {
        return Err(Error::contract("z_lo and z_hi lengths differ"));
    }
    if z_lo.iter().zip(z_hi).any(|(l, h)| l > h) {
        return Err(Error::contract(
            "normalization bounds must satisfy z_lo <= z_hi",
        ));
    }
    let rows = points
        .iter()
        .map(|p| {
            if p.len() != m {
                return Err(Error::contract(
                    "objective vector length does not match bounds",
                ));
            }
            Ok(p.iter()
                .enumerate()
                .map(|(k, &f)| (f - z_lo[k]) / (z_hi[k] - z_lo[k] + 1.0))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(NormalizedObjectives { rows })
}

/// Angle between two vectors, computed on the unit-normalized pair as
/// `2·atan2(‖â − b̂‖, ‖â + b̂‖)`. Unlike the arccos-of-dot form, this is
/// exact at 0 for parallel inputs and loses no precision near either end of
/// `[0, π]`. A zero-norm argument (a solution sitting exactly on the utopian
/// point) is defined to be at distance 0 from everything.
pub fn angular_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let (mut na, mut nb) = (0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let (na, nb) = (na.sqrt(), nb.sqrt());
    let (mut diff, mut sum) = (0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        let (u, v) = (x / na, y / nb);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

/// Half-angle of the replacement cone around a stale weight, as a function of
/// the objective count: `arccos(m^(-1/2)) · (0.0353·m − 0.0322)`.
///
/// The first factor is the angle between a unit vector and the simplex
/// center, i.e. the widest useful cone; the linear factor is an empirical
/// shrink fitted so replacements stay local. Monotone increasing in `m`.
pub fn aperture_angle(m: usize) -> f64 {
    assert!(m >= 2, "aperture angle needs at least 2 objectives");
    let m = m as f64;
    m.powf(-0.5).acos() * (0.0353 * m - 0.0322)
}

/// Which solutions stand closest to each weight, plus the overflow that did
/// not fit anywhere.
#[derive(Debug, Clone)]
pub struct Neighborhoods {
    /// `lists[j]` = solutions hosted by weight `j`, in assignment order.
    lists: Vec<Vec<usize>>,
    /// Solutions whose closest weight was already at capacity.
    spill: Vec<usize>,
}

impl Neighborhoods {
    pub fn lists(&self) -> &[Vec<usize>] {
        &self.lists
    }

    pub fn spill(&self) -> &[usize] {
        &self.spill
    }

    pub fn size_of(&self, j: usize) -> usize {
        self.lists[j].len()
    }

    pub fn empty_weight_indices(&self) -> Vec<usize> {
        (0..self.lists.len())
            .filter(|&j| self.lists[j].is_empty())
            .collect()
    }

    fn empty_fraction(&self) -> f64 {
        self.empty_weight_indices().len() as f64 / self.lists.len() as f64
    }
}

/// Assign each solution (in index order) to the neighborhood of its
/// angularly closest weight; when that weight already hosts `capacity`
/// solutions, the solution goes to the spill set instead.
pub fn build_neighborhoods(
    weights: &WeightSet,
    normalized: &NormalizedObjectives,
    capacity: usize,
) -> Result<Neighborhoods> {
    if capacity == 0 {
        return Err(Error::contract("neighborhood capacity must be positive"));
    }
    let mut lists = vec![Vec::new(); weights.len()];
    let mut spill = Vec::new();
    for (i, row) in normalized.rows().iter().enumerate() {
        if row.len() != weights.m() {
            return Err(Error::contract(
                "normalized objective dimensionality does not match weights",
            ));
        }
        let mut best = 0usize;
        let mut best_angle = f64::INFINITY;
        for (j, w) in weights.iter().enumerate() {
            let angle = angular_distance(row, w.as_slice());
            if angle < best_angle {
                best_angle = angle;
                best = j;
            }
        }
        if lists[best].len() < capacity {
            lists[best].push(i);
        } else {
            spill.push(i);
        }
    }
    Ok(Neighborhoods { lists, spill })
}

/// Drain the spill set. While the fraction of empty neighborhoods exceeds
/// `delta_c`, random spill members fill random empty neighborhoods; each
/// remaining member then joins a random minimal-size neighborhood with
/// probability `delta_r`, or a random non-empty one otherwise. The spill set
/// is empty afterwards.
pub fn redistribute_spill<R: Rng>(
    nb: &mut Neighborhoods,
    delta_r: f64,
    delta_c: f64,
    rng: &mut R,
) -> Result<()> {
    for (name, v) in [("delta_r", delta_r), ("delta_c", delta_c)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::config(format!("{name} must lie in [0, 1], got {v}")));
        }
    }

    while nb.empty_fraction() > delta_c && !nb.spill.is_empty() {
        let pick = rng.gen_range(0..nb.spill.len());
        let solution = nb.spill.remove(pick);
        let empty = nb.empty_weight_indices();
        let target = empty[rng.gen_range(0..empty.len())];
        nb.lists[target].push(solution);
    }

    while let Some(solution) = nb.spill.pop() {
        let non_empty: Vec<usize> = (0..nb.lists.len())
            .filter(|&j| !nb.lists[j].is_empty())
            .collect();
        let minimal = {
            let min_size = nb.lists.iter().map(|l| l.len()).min().unwrap();
            (0..nb.lists.len())
                .filter(|&j| nb.lists[j].len() == min_size)
                .collect::<Vec<_>>()
        };
        let pool = if rng.gen_range(0.0..1.0) < delta_r || non_empty.is_empty() {
            &minimal
        } else {
            &non_empty
        };
        let target = pool[rng.gen_range(0..pool.len())];
        nb.lists[target].push(solution);
    }
    Ok(())
}

/// Sample `count` fresh weight vectors inside the cone of half-angle
/// `aperture` around `center`, uniformly over the simplex via rejection from
/// flat Dirichlet draws; a shrink-to-center fallback keeps tiny apertures
/// from stalling. Every output lies on the simplex within the cone.
pub fn generate_wvg<R: Rng>(
    center: &WeightVector,
    count: usize,
    aperture: f64,
    rng: &mut R,
) -> Result<Vec<WeightVector>> {
    if aperture <= 0.0 || !aperture.is_finite() {
        return Err(Error::contract(format!(
            "aperture must be positive and finite, got {aperture}"
        )));
    }
    let m = center.len();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut accepted: Option<Vec<f64>> = None;
        for _ in 0..64 {
            let d = dirichlet_flat(m, rng);
            if angular_distance(&d, center.as_slice()) <= aperture {
                accepted = Some(d);
                break;
            }
        }
        let components = match accepted {
            Some(d) => d,
            None => {
                // Shrink a fresh draw toward the center: the cone is convex,
                // so the admissible mixing coefficients form [0, s_max].
                let d = dirichlet_flat(m, rng);
                let s_max = max_mix_inside_cone(center.as_slice(), &d, aperture);
                let s = if s_max > 0.0 { rng.gen_range(0.0..s_max) } else { 0.0 };
                center
                    .as_slice()
                    .iter()
                    .zip(&d)
                    .map(|(c, x)| (1.0 - s) * c + s * x)
                    .collect()
            }
        };
        out.push(WeightVector::normalized(components)?);
    }
    Ok(out)
}

fn dirichlet_flat<R: Rng>(m: usize, rng: &mut R) -> Vec<f64> {
    // Flat Dirichlet = normalized unit-rate exponentials.
    let raw: Vec<f64> = (0..m).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|e| e / sum).collect()
}

fn max_mix_inside_cone(center: &[f64], toward: &[f64], aperture: f64) -> f64 {
    let inside = |s: f64| {
        let mixed: Vec<f64> = center
            .iter()
            .zip(toward)
            .map(|(c, x)| (1.0 - s) * c + s * x)
            .collect();
        angular_distance(&mixed, center) <= aperture
    };
    if inside(1.0) {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Refill `current` to `n` vectors by repeatedly moving over the candidate
/// with the largest cumulative angular distance to everything already in
/// `current` (ties broken by candidate index).
pub fn select_final_weights(
    candidates: &WeightSet,
    current: &WeightSet,
    n: usize,
) -> Result<WeightSet> {
    if current.len() > n {
        return Err(Error::contract(format!(
            "current weight set already exceeds target size: {} > {n}",
            current.len()
        )));
    }
    if current.len() + candidates.len() < n {
        return Err(Error::contract(format!(
            "not enough weight vectors to reach size {n}: {} current + {} candidates",
            current.len(),
            candidates.len()
        )));
    }
    let mut chosen: Vec<WeightVector> = current.columns().to_vec();
    let mut remaining: Vec<(usize, WeightVector)> =
        candidates.columns().iter().cloned().enumerate().collect();
    // Cumulative distance of each candidate to the chosen set, maintained
    // incrementally as vectors move over.
    let mut cumulative: Vec<f64> = remaining
        .iter()
        .map(|(_, c)| {
            chosen
                .iter()
                .map(|w| angular_distance(c.as_slice(), w.as_slice()))
                .sum()
        })
        .collect();

    while chosen.len() < n {
        let mut best = 0usize;
        for k in 1..remaining.len() {
            if cumulative[k] > cumulative[best] {
                best = k;
            }
        }
        let (_, picked) = remaining.remove(best);
        cumulative.remove(best);
        for (k, (_, c)) in remaining.iter().enumerate() {
            cumulative[k] += angular_distance(c.as_slice(), picked.as_slice());
        }
        chosen.push(picked);
    }
    WeightSet::new(chosen)
}

/// How raw objectives are oriented before the angular assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssignOrientation {
    /// Normalize minimization objectives directly; rays emanate from the
    /// utopian point (the default).
    #[default]
    UtopianOrigin,
    /// Negate objectives first, so well-performing solutions point *along*
    /// the axes they excel in.
    Negated,
}

/// One-to-one matching of `n` solutions to `n` weights: normalize the
/// objectives, build the full angular distance matrix, then repeatedly pair
/// the globally closest (solution, weight) entry and strike its row and
/// column. Ties take the lowest (solution, weight) index pair.
///
/// Returns `perm` with `perm[i] = j` meaning solution `i` received weight `j`.
pub fn assign_weights(
    objectives: &[ObjectiveVector],
    weights: &WeightSet,
    orientation: AssignOrientation,
) -> Result<Vec<usize>> {
    let oriented: Vec<ObjectiveVector> = match orientation {
        AssignOrientation::UtopianOrigin => objectives.to_vec(),
        AssignOrientation::Negated => objectives
            .iter()
            .map(|p| ObjectiveVector::new(p.iter().map(|&v| -v).collect()))
            .collect(),
    };
    let (lo, hi) = objective_bounds(&oriented)?;
    let normalized = normalize(&oriented, &lo, &hi)?;
    assign_weights_normalized(&normalized, weights)
}

/// Core of [`assign_weights`], operating on pre-normalized objectives.
pub fn assign_weights_normalized(
    normalized: &NormalizedObjectives,
    weights: &WeightSet,
) -> Result<Vec<usize>> {
    let n = normalized.len();
    if n != weights.len() {
        return Err(Error::contract(format!(
            "assignment needs as many weights as solutions, got {n} solutions and {} weights",
            weights.len()
        )));
    }
    let mut angles = vec![vec![0.0f64; n]; n];
    for (i, row) in normalized.rows().iter().enumerate() {
        for (j, w) in weights.iter().enumerate() {
            angles[i][j] = angular_distance(row, w.as_slice());
        }
    }
    let mut perm = vec![usize::MAX; n];
    let mut row_done = vec![false; n];
    let mut col_done = vec![false; n];
    for _ in 0..n {
        let (mut bi, mut bj, mut best) = (usize::MAX, usize::MAX, f64::INFINITY);
        for i in 0..n {
            if row_done[i] {
                continue;
            }
            for j in 0..n {
                if !col_done[j] && angles[i][j] < best {
                    best = angles[i][j];
                    bi = i;
                    bj = j;
                }
            }
        }
        perm[bi] = bj;
        row_done[bi] = true;
        col_done[bj] = true;
    }
    Ok(perm)
}

/// Knobs of the per-iteration weight update.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightUpdateParams {
    /// Max solutions a weight may host before overflow spills.
    pub capacity: usize,
    /// Replacement vectors generated per stale weight.
    pub replacements: usize,
    /// Probability that a spill member joins a minimal-size neighborhood.
    pub delta_r: f64,
    /// Tolerated fraction of empty neighborhoods.
    pub delta_c: f64,
    /// Cone half-angle for replacements; `None` uses [`aperture_angle`].
    pub aperture: Option<f64>,
}

impl Default for WeightUpdateParams {
    fn default() -> Self {
        WeightUpdateParams {
            capacity: 3,
            replacements: 3,
            delta_r: 0.5,
            delta_c: 0.1,
            aperture: None,
        }
    }
}

/// One full weight-adaptation step: host solutions, drain the spill, replace
/// weights whose neighborhood stayed empty with fresh vectors sampled around
/// them, and greedily refill to the original set size. With no empty
/// neighborhoods the input set is returned unchanged.
pub fn update_weight_set<R: Rng>(
    weights: &WeightSet,
    objectives: &[ObjectiveVector],
    params: &WeightUpdateParams,
    rng: &mut R,
) -> Result<WeightSet> {
    let (lo, hi) = objective_bounds(objectives)?;
    let normalized = normalize(objectives, &lo, &hi)?;
    let mut nb = build_neighborhoods(weights, &normalized, params.capacity)?;
    redistribute_spill(&mut nb, params.delta_r, params.delta_c, rng)?;

    let stale = nb.empty_weight_indices();
    if stale.is_empty() {
        return Ok(weights.clone());
    }
    let aperture = params.aperture.unwrap_or_else(|| aperture_angle(weights.m()));
    let mut fresh = Vec::with_capacity(stale.len() * params.replacements);
    for &j in &stale {
        fresh.extend(generate_wvg(weights.get(j), params.replacements, aperture, rng)?);
    }
    let kept: Vec<WeightVector> = weights
        .columns()
        .iter()
        .enumerate()
        .filter(|(j, _)| !stale.contains(j))
        .map(|(_, w)| w.clone())
        .collect();
    let kept = WeightSet::new(kept)?;
    select_final_weights(&WeightSet::new(fresh)?, &kept, weights.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn objs(rows: &[&[f64]]) -> Vec<ObjectiveVector> {
        rows.iter().map(|r| r.to_vec().into()).collect()
    }

    #[test]
    fn weight_vector_validates_simplex_membership() {
        assert!(WeightVector::new(vec![0.5, 0.5]).is_ok());
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![-0.1, 1.1]).is_err());
        assert!(WeightVector::new(vec![1.0]).is_err());
    }

    #[test]
    fn lattice_two_objectives_five_points() {
        let set = simplex_lattice(2, 5).unwrap();
        let expected = [
            [0.0, 1.0],
            [0.25, 0.75],
            [0.5, 0.5],
            [0.75, 0.25],
            [1.0, 0.0],
        ];
        assert_eq!(set.len(), 5);
        for (w, e) in set.iter().zip(expected.iter()) {
            assert_eq!(w.as_slice(), e);
        }
    }

    #[test]
    fn lattice_three_objectives_six_points() {
        let set = simplex_lattice(3, 6).unwrap();
        assert_eq!(set.len(), 6);
        let has = |target: &[f64]| set.iter().any(|w| w.as_slice() == target);
        for unit in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
            assert!(has(&unit), "missing unit vector {unit:?}");
        }
        for mid in [[0.5, 0.5, 0.0], [0.5, 0.0, 0.5], [0.0, 0.5, 0.5]] {
            assert!(has(&mid), "missing midpoint {mid:?}");
        }
    }

    #[test]
    fn lattice_subsamples_keep_unit_vectors_and_count() {
        for (m, n) in [(2usize, 7usize), (3, 64), (3, 66), (4, 20)] {
            let set = simplex_lattice(m, n).unwrap();
            assert_eq!(set.len(), n, "m={m} n={n}");
            for k in 0..m {
                let unit: Vec<f64> = (0..m).map(|i| if i == k { 1.0 } else { 0.0 }).collect();
                assert!(
                    set.iter().any(|w| w.as_slice() == unit.as_slice()),
                    "m={m} n={n}: missing unit vector {k}"
                );
            }
            for w in set.iter() {
                let sum: f64 = w.as_slice().iter().sum();
                assert!((sum - 1.0).abs() <= WEIGHT_SUM_TOL);
            }
            // Distinctness.
            for (a, wa) in set.iter().enumerate() {
                for wb in set.iter().skip(a + 1) {
                    assert_ne!(wa.as_slice(), wb.as_slice());
                }
            }
        }
    }

    #[test]
    fn lattice_rejects_fewer_points_than_objectives() {
        assert!(simplex_lattice(3, 2).is_err());
        assert!(simplex_lattice(1, 5).is_err());
    }

    #[test]
    fn normalization_shifts_and_scales_with_plus_one_guard() {
        let pts = objs(&[&[5.0, 5.0]]);
        let out = normalize(&pts, &[0.0, 0.0], &[10.0, 10.0]).unwrap();
        assert_abs_diff_eq!(out.row(0)[0], 5.0 / 11.0, epsilon = 1e-15);
        // Zero-range objective: the +1 keeps the result finite (and zero).
        let pts = objs(&[&[3.0, 7.0]]);
        let out = normalize(&pts, &[3.0, 7.0], &[3.0, 7.0]).unwrap();
        assert_eq!(out.row(0), &[0.0, 0.0]);
    }

    #[test]
    fn normalized_values_stay_below_one() {
        let pts = objs(&[&[-2.0, 100.0], &[8.0, -50.0], &[3.0, 25.0]]);
        let (lo, hi) = objective_bounds(&pts).unwrap();
        let out = normalize(&pts, &lo, &hi).unwrap();
        for row in out.rows() {
            for &v in row {
                assert!((0.0..1.0).contains(&v), "normalized value {v} outside [0,1)");
            }
        }
    }

    #[test]
    fn angular_distance_basics() {
        assert_abs_diff_eq!(
            angular_distance(&[1.0, 0.0], &[0.0, 1.0]),
            std::f64::consts::FRAC_PI_2,
            epsilon = 1e-15
        );
        assert_eq!(angular_distance(&[1.0, 1.0], &[2.0, 2.0]), 0.0);
        // Zero-norm convention.
        assert_eq!(angular_distance(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Scaling either argument never changes the angle.
        #[test]
        fn angular_distance_is_scale_invariant(
            a in prop::collection::vec(0.01f64..10.0, 3),
            b in prop::collection::vec(0.01f64..10.0, 3),
            s in 0.1f64..100.0
        ) {
            let scaled: Vec<f64> = a.iter().map(|x| x * s).collect();
            let d1 = angular_distance(&a, &b);
            let d2 = angular_distance(&scaled, &b);
            prop_assert!((d1 - d2).abs() < 1e-9);
        }

        /// Sampled replacement vectors stay on the simplex inside the cone.
        #[test]
        fn wvg_outputs_stay_inside_cone(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let center = WeightVector::new(vec![0.2, 0.3, 0.5]).unwrap();
            let aperture = aperture_angle(3);
            for w in generate_wvg(&center, 50, aperture, &mut rng).unwrap() {
                let sum: f64 = w.as_slice().iter().sum();
                prop_assert!((sum - 1.0).abs() <= WEIGHT_SUM_TOL);
                prop_assert!(
                    angular_distance(w.as_slice(), center.as_slice()) <= aperture + 1e-12
                );
            }
        }
    }

    #[test]
    fn aperture_angle_matches_hand_evaluations() {
        // arccos(2^-1/2) * (0.0706 - 0.0322) and arccos(3^-1/2) * (0.1059 - 0.0322)
        assert_abs_diff_eq!(aperture_angle(2), 0.030159, epsilon = 1e-5);
        assert_abs_diff_eq!(aperture_angle(3), 0.070407, epsilon = 1e-5);
        let mut prev = 0.0;
        for m in 2..=10 {
            let a = aperture_angle(m);
            assert!(a > prev, "aperture must increase with m");
            prev = a;
        }
    }

    #[test]
    fn wvg_degenerate_cone_returns_the_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let center = WeightVector::new(vec![0.4, 0.6]).unwrap();
        for w in generate_wvg(&center, 20, 1e-12, &mut rng).unwrap() {
            for (a, b) in w.as_slice().iter().zip(center.as_slice()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn neighborhoods_host_by_closest_weight_with_capacity() {
        let weights = WeightSet::new(vec![
            WeightVector::new(vec![1.0, 0.0]).unwrap(),
            WeightVector::new(vec![0.0, 1.0]).unwrap(),
        ])
        .unwrap();
        // Three solutions hugging the first axis, one on the second.
        let pts = objs(&[&[0.9, 0.1], &[0.8, 0.05], &[0.95, 0.0], &[0.1, 0.9]]);
        let (lo, hi) = (vec![0.0, 0.0], vec![1.0, 1.0]);
        let normalized = normalize(&pts, &lo, &hi).unwrap();
        let nb = build_neighborhoods(&weights, &normalized, 2).unwrap();
        assert_eq!(nb.lists()[0], vec![0, 1]);
        assert_eq!(nb.lists()[1], vec![3]);
        assert_eq!(nb.spill(), &[2]); // third axis-hugger overflowed capacity 2
    }

    #[test]
    fn spill_redistribution_empties_spill_and_respects_delta_c() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for seed in 0..50u64 {
            let mut case_rng = ChaCha8Rng::seed_from_u64(seed);
            use rand::Rng as _;
            let n_weights = case_rng.gen_range(3..10);
            let mut lists = vec![Vec::new(); n_weights];
            let mut next = 0usize;
            for list in lists.iter_mut() {
                if case_rng.gen_bool(0.5) {
                    for _ in 0..case_rng.gen_range(1..3) {
                        list.push(next);
                        next += 1;
                    }
                }
            }
            let spill: Vec<usize> = (next..next + case_rng.gen_range(0..6)).collect();
            let total = next + spill.len();
            let initial_empty = lists.iter().filter(|l| l.is_empty()).count();
            let spill_len = spill.len();
            let mut nb = Neighborhoods { lists, spill };
            redistribute_spill(&mut nb, 0.5, 0.1, &mut rng).unwrap();
            assert!(nb.spill().is_empty(), "spill must drain");
            let placed: usize = nb.lists().iter().map(|l| l.len()).sum();
            assert_eq!(placed, total, "every solution placed exactly once");
            // Placements only ever fill lists, so the empty count cannot
            // grow; and ending above the tolerance means the first phase ran
            // the spill dry, one distinct empty list filled per member.
            let final_empty = nb.lists().iter().filter(|l| l.is_empty()).count();
            assert!(final_empty <= initial_empty);
            if nb.empty_fraction() > 0.1 {
                assert_eq!(final_empty, initial_empty - spill_len);
            }
        }
    }

    #[test]
    fn select_final_picks_most_distant_candidate() {
        let current = WeightSet::new(vec![WeightVector::new(vec![1.0, 0.0]).unwrap()]).unwrap();
        let candidates = WeightSet::new(vec![
            WeightVector::new(vec![0.6, 0.4]).unwrap(),
            WeightVector::new(vec![0.0, 1.0]).unwrap(),
        ])
        .unwrap();
        let out = select_final_weights(&candidates, &current, 2).unwrap();
        assert_eq!(out.get(1).as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn select_final_reports_shortfall() {
        let current = WeightSet::new(vec![WeightVector::uniform(2)]).unwrap();
        let candidates = WeightSet::new(vec![WeightVector::uniform(2)]).unwrap();
        assert!(select_final_weights(&candidates, &current, 5).is_err());
    }

    #[test]
    fn assignment_pairs_aligned_solutions_first() {
        let weights = WeightSet::new(vec![
            WeightVector::new(vec![1.0, 0.0]).unwrap(),
            WeightVector::new(vec![0.0, 1.0]).unwrap(),
        ])
        .unwrap();
        let normalized = NormalizedObjectives {
            rows: vec![vec![1.0, 0.1], vec![0.1, 1.0]],
        };
        let perm = assign_weights_normalized(&normalized, &weights).unwrap();
        assert_eq!(perm, vec![0, 1]);
    }

    #[test]
    fn assignment_requires_matching_counts() {
        let weights = WeightSet::new(vec![WeightVector::uniform(2)]).unwrap();
        let normalized = NormalizedObjectives {
            rows: vec![vec![0.1, 0.1], vec![0.2, 0.2]],
        };
        assert!(assign_weights_normalized(&normalized, &weights).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        /// The assignment is always a bijection whose first extraction
        /// attains the global minimum of the angle matrix.
        #[test]
        fn assignment_is_a_bijection_extracting_the_global_min(seed in 0u64..5000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            use rand::Rng as _;
            let n = 6usize;
            let pts: Vec<ObjectiveVector> = (0..n)
                .map(|_| vec![rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)].into())
                .collect();
            let weights = simplex_lattice(2, n).unwrap();
            let perm = assign_weights(&pts, &weights, AssignOrientation::UtopianOrigin).unwrap();
            let mut seen = vec![false; n];
            for &j in &perm {
                prop_assert!(!seen[j], "weight {} assigned twice", j);
                seen[j] = true;
            }
            // Recompute the matrix; the globally smallest entry must be a
            // matched pair.
            let (lo, hi) = objective_bounds(&pts).unwrap();
            let fhat = normalize(&pts, &lo, &hi).unwrap();
            let (mut bi, mut bj, mut best) = (0usize, 0usize, f64::INFINITY);
            for i in 0..n {
                for j in 0..n {
                    let a = angular_distance(fhat.row(i), weights.get(j).as_slice());
                    if a < best {
                        best = a;
                        bi = i;
                        bj = j;
                    }
                }
            }
            prop_assert_eq!(perm[bi], bj);
        }
    }

    #[test]
    fn update_weight_set_is_identity_when_all_hosted() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let weights = simplex_lattice(2, 4).unwrap();
        // One solution sitting right on each weight ray.
        let pts = objs(&[&[0.0, 1.0], &[0.3, 0.7], &[0.7, 0.3], &[1.0, 0.0]]);
        let updated =
            update_weight_set(&weights, &pts, &WeightUpdateParams::default(), &mut rng).unwrap();
        assert_eq!(updated, weights);
    }

    #[test]
    fn update_weight_set_keeps_size_and_replaces_stale_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let weights = simplex_lattice(2, 8).unwrap();
        // Seven solutions bunched at one extreme plus a lone one at the
        // other. Per-objective rescaling cannot spread the bunch out, so the
        // interior weights host nothing and must be replaced.
        let mut pts: Vec<ObjectiveVector> = (0..7)
            .map(|i| vec![0.001 * i as f64, 1.0 - 0.001 * i as f64].into())
            .collect();
        pts.push(vec![1.0, 0.0].into());
        let params = WeightUpdateParams {
            delta_c: 0.0, // replace every empty neighborhood
            ..WeightUpdateParams::default()
        };
        let updated = update_weight_set(&weights, &pts, &params, &mut rng).unwrap();
        assert_eq!(updated.len(), 8);
        assert_ne!(updated, weights);
        for w in updated.iter() {
            let sum: f64 = w.as_slice().iter().sum();
            assert!((sum - 1.0).abs() <= WEIGHT_SUM_TOL);
        }
    }

    #[test]
    fn weight_set_csv_round_trip() {
        let set = simplex_lattice(3, 10).unwrap();
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        let back = WeightSet::read_csv(buf.as_slice()).unwrap();
        assert_eq!(set, back);
    }
}
