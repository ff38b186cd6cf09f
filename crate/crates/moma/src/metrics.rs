//! Front bookkeeping and quality indicators: nondominated archives,
//! generational distance, and exact or Monte-Carlo hypervolume.
//!
//! All indicators treat objective vectors as minimization points. Fronts
//! travel as CSV — one row per solution, `M` objective columns plus a genome
//! bit-string column — written in sorted order with shortest-round-trip float
//! formatting, so equal fronts produce byte-identical files and every file
//! parses back losslessly.

use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::genome::{FixedMask, Genome};
use crate::moea::{dominates, ObjectiveVector};
use crate::weights::{normalize, objective_bounds};
use crate::Result;

/// Objective-range ratio beyond which generational distance switches to
/// normalized coordinates.
pub const NORMALIZATION_RANGE_RATIO: f64 = 1e3;

/// Sample count for Monte-Carlo hypervolume.
pub const MONTE_CARLO_SAMPLES: usize = 1_000_000;

/// One archived solution: objectives, and the genome when known (fronts read
/// from external files may carry objectives only).
#[derive(Debug, Clone)]
pub struct FrontEntry {
    pub objectives: ObjectiveVector,
    pub genome: Option<Genome>,
}

/// A set of mutually nondominated solutions.
///
/// [`FrontArchive::insert`] keeps the invariant: a candidate dominated by or
/// equal to a member is rejected, and an accepted candidate evicts every
/// member it dominates. The archive therefore holds unique objective vectors.
#[derive(Debug, Clone, Default)]
pub struct FrontArchive {
    entries: Vec<FrontEntry>,
}

impl FrontArchive {
    pub fn new() -> Self {
        FrontArchive::default()
    }

    /// Archive of the nondominated subset of `points` (unique vectors).
    pub fn from_points<I: IntoIterator<Item = ObjectiveVector>>(points: I) -> Self {
        let mut archive = FrontArchive::new();
        for p in points {
            archive.insert(None, p);
        }
        archive
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[FrontEntry] {
        &self.entries
    }

    /// Clone of every stored objective vector.
    pub fn objective_rows(&self) -> Vec<ObjectiveVector> {
        self.entries.iter().map(|e| e.objectives.clone()).collect()
    }

    /// Componentwise (best, worst) over the archive.
    pub fn bounds(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        utopian_nadir(&self.objective_rows())
    }

    /// Offer one solution. Returns whether it was kept.
    pub fn insert(&mut self, genome: Option<Genome>, objectives: ObjectiveVector) -> bool {
        for existing in &self.entries {
            if existing.objectives.as_slice() == objectives.as_slice()
                || dominates(&existing.objectives, &objectives)
            {
                return false;
            }
        }
        self.entries
            .retain(|existing| !dominates(&objectives, &existing.objectives));
        self.entries.push(FrontEntry { objectives, genome });
        true
    }

    pub fn insert_point(&mut self, objectives: ObjectiveVector) -> bool {
        self.insert(None, objectives)
    }

    /// Entry indices in canonical order: lexicographic by objectives, then by
    /// genome string. This is the order CSV output uses.
    fn sorted_indices(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        order.sort_by(|&a, &b| {
            let (ea, eb) = (&self.entries[a], &self.entries[b]);
            let by_objectives = ea
                .objectives
                .iter()
                .zip(eb.objectives.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal);
            by_objectives.then_with(|| {
                let ga = ea.genome.as_ref().map(Genome::to_bit_string);
                let gb = eb.genome.as_ref().map(Genome::to_bit_string);
                ga.cmp(&gb)
            })
        });
        order
    }

    /// Write as CSV: header `f1,…,fM,genome`, one sorted row per solution.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let m = self
            .entries
            .first()
            .map(|e| e.objectives.len())
            .ok_or_else(|| Error::contract("cannot write an empty front"))?;
        let mut out = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=m).map(|k| format!("f{k}")).collect();
        header.push("genome".into());
        out.write_record(&header)?;
        for idx in self.sorted_indices() {
            let entry = &self.entries[idx];
            let mut row: Vec<String> = entry.objectives.iter().map(f64::to_string).collect();
            row.push(
                entry
                    .genome
                    .as_ref()
                    .map(Genome::to_bit_string)
                    .unwrap_or_default(),
            );
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Parse a front CSV written by [`FrontArchive::write_csv`]. Genomes come
    /// back with an all-free fixed mask; an empty genome column yields
    /// `None`.
    pub fn read_csv<R: io::Read>(reader: R) -> Result<Self> {
        let mut input = csv::Reader::from_reader(reader);
        let header = input.headers()?.clone();
        if header.len() < 2 || header.iter().last() != Some("genome") {
            return Err(Error::Parse(
                "front CSV needs objective columns and a trailing genome column".into(),
            ));
        }
        let m = header.len() - 1;
        let mut archive = FrontArchive::new();
        for record in input.records() {
            let record = record?;
            if record.len() != m + 1 {
                return Err(Error::Parse(format!(
                    "front row has {} fields, expected {}",
                    record.len(),
                    m + 1
                )));
            }
            let mut objectives = Vec::with_capacity(m);
            for field in record.iter().take(m) {
                objectives.push(
                    field
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("objective '{field}': {e}")))?,
                );
            }
            let genome_field = record.get(m).unwrap_or_default();
            let genome = if genome_field.is_empty() {
                None
            } else {
                Some(Genome::from_bit_string(
                    genome_field,
                    FixedMask::none(genome_field.len()),
                )?)
            };
            archive.insert(genome, ObjectiveVector::new(objectives));
        }
        Ok(archive)
    }
}

/// Indices of the points not dominated by any other point. Duplicates of a
/// nondominated vector are all retained (equal points never dominate each
/// other), matching the literal pairwise definition.
pub fn nondominated_indices(points: &[ObjectiveVector]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| !points.iter().any(|other| dominates(other, &points[i])))
        .collect()
}

/// Nondominated subset of `points` as an archive of unique vectors;
/// `archive.len()` is the `N_nd` statistic.
pub fn nondominated_filter(points: &[ObjectiveVector]) -> FrontArchive {
    let mut archive = FrontArchive::new();
    for i in nondominated_indices(points) {
        archive.insert_point(points[i].clone());
    }
    archive
}

/// Componentwise best and worst over `points`.
pub fn utopian_nadir(points: &[ObjectiveVector]) -> Result<(Vec<f64>, Vec<f64>)> {
    objective_bounds(points)
}

fn nearest_distance_squared(point: &[f64], truth: &[Vec<f64>]) -> f64 {
    truth
        .iter()
        .map(|t| {
            point
                .iter()
                .zip(t)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Whether the spread of per-objective ranges warrants normalization:
/// the largest range exceeds the smallest *positive* range by more than
/// [`NORMALIZATION_RANGE_RATIO`], or some objective varies while another is
/// constant.
fn ranges_differ_widely(lo: &[f64], hi: &[f64]) -> bool {
    let ranges: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| h - l).collect();
    let max = ranges.iter().cloned().fold(0.0f64, f64::max);
    if max == 0.0 {
        return false;
    }
    let min = ranges.iter().cloned().fold(f64::INFINITY, f64::min);
    min == 0.0 || max / min > NORMALIZATION_RANGE_RATIO
}

/// Generational distance: `(1/|G|)·(Σ_i d_i²)^(1/2)` with `d_i` the Euclidean
/// distance from found point `i` to the nearest true-front point.
///
/// When the per-objective ranges of the union differ by more than three
/// orders of magnitude, both fronts are first normalized with shared bounds
/// so no objective drowns out the rest.
pub fn generational_distance(
    found: &[ObjectiveVector],
    truth: &[ObjectiveVector],
) -> Result<f64> {
    let (found_rows, truth_rows) = gd_coordinates(found, truth)?;
    let total: f64 = found_rows
        .iter()
        .map(|p| nearest_distance_squared(p, &truth_rows))
        .sum();
    Ok(total.sqrt() / found.len() as f64)
}

/// Diagnostic variant that skips the squaring inside the sum:
/// `(1/|G|)·(Σ_i d_i)^(1/2)`. Kept only for comparison against the default —
/// it is not a metric (it fails scale coherence) and nothing selects it
/// implicitly.
pub fn generational_distance_unsquared(
    found: &[ObjectiveVector],
    truth: &[ObjectiveVector],
) -> Result<f64> {
    let (found_rows, truth_rows) = gd_coordinates(found, truth)?;
    let total: f64 = found_rows
        .iter()
        .map(|p| nearest_distance_squared(p, &truth_rows).sqrt())
        .sum();
    Ok(total.sqrt() / found.len() as f64)
}

/// Shared coordinates for the GD family: raw, or normalized with union
/// bounds when the ranges differ widely.
fn gd_coordinates(
    found: &[ObjectiveVector],
    truth: &[ObjectiveVector],
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    if found.is_empty() || truth.is_empty() {
        return Err(Error::contract(
            "generational distance needs non-empty fronts",
        ));
    }
    let m = found[0].len();
    if found.iter().chain(truth).any(|p| p.len() != m) {
        return Err(Error::contract(
            "generational distance needs uniform objective counts",
        ));
    }
    let union: Vec<ObjectiveVector> = found.iter().chain(truth).cloned().collect();
    let (lo, hi) = objective_bounds(&union)?;
    if ranges_differ_widely(&lo, &hi) {
        let rows = normalize(&union, &lo, &hi)?;
        let rows = rows.rows();
        Ok((
            rows[..found.len()].to_vec(),
            rows[found.len()..].to_vec(),
        ))
    } else {
        Ok((
            found.iter().map(|p| p.as_slice().to_vec()).collect(),
            truth.iter().map(|p| p.as_slice().to_vec()).collect(),
        ))
    }
}

/// A hypervolume value, with sampling error when it was estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HvEstimate {
    pub value: f64,
    /// One standard error of the Monte-Carlo estimate; `None` for exact
    /// computations.
    pub standard_error: Option<f64>,
    /// Points dropped for lying beyond the reference.
    pub excluded: usize,
}

/// Hypervolume dominated by `points` up to the reference `nadir`: exact via
/// sweep for two objectives and slicing for three, Monte-Carlo with
/// [`MONTE_CARLO_SAMPLES`] samples otherwise. Points beyond the nadir in any
/// component are excluded with a warning.
pub fn hypervolume(points: &[ObjectiveVector], nadir: &[f64]) -> Result<HvEstimate> {
    let (kept, excluded) = clip_to_nadir(points, nadir)?;
    if kept.is_empty() {
        return Ok(HvEstimate {
            value: 0.0,
            standard_error: None,
            excluded,
        });
    }
    let value = match nadir.len() {
        2 => {
            let pts: Vec<(f64, f64)> = kept.iter().map(|p| (p[0], p[1])).collect();
            hv_2d(pts, nadir[0], nadir[1])
        }
        3 => hv_3d(&kept, nadir),
        _ => {
            let estimate =
                monte_carlo_hv(&kept, nadir, MONTE_CARLO_SAMPLES, MONTE_CARLO_SEED);
            return Ok(HvEstimate {
                value: estimate.0,
                standard_error: Some(estimate.1),
                excluded,
            });
        }
    };
    Ok(HvEstimate {
        value,
        standard_error: None,
        excluded,
    })
}

/// Monte-Carlo hypervolume with explicit sample count and seed; exposed so
/// exact results can be cross-checked at any dimension.
pub fn hypervolume_monte_carlo(
    points: &[ObjectiveVector],
    nadir: &[f64],
    samples: usize,
    seed: u64,
) -> Result<HvEstimate> {
    let (kept, excluded) = clip_to_nadir(points, nadir)?;
    if kept.is_empty() {
        return Ok(HvEstimate {
            value: 0.0,
            standard_error: Some(0.0),
            excluded,
        });
    }
    let (value, standard_error) = monte_carlo_hv(&kept, nadir, samples, seed);
    Ok(HvEstimate {
        value,
        standard_error: Some(standard_error),
        excluded,
    })
}

const MONTE_CARLO_SEED: u64 = 0x9E37_79B9_7F4A_7C15;

fn clip_to_nadir(
    points: &[ObjectiveVector],
    nadir: &[f64],
) -> Result<(Vec<ObjectiveVector>, usize)> {
    let m = nadir.len();
    if m < 2 {
        return Err(Error::contract("hypervolume needs at least two objectives"));
    }
    if points.iter().any(|p| p.len() != m) {
        return Err(Error::contract(
            "hypervolume points must match the reference dimension",
        ));
    }
    let mut kept = Vec::with_capacity(points.len());
    let mut excluded = 0;
    for p in points {
        if p.iter().zip(nadir).all(|(v, n)| v <= n) {
            kept.push(p.clone());
        } else {
            excluded += 1;
        }
    }
    if excluded > 0 {
        log::warn!("hypervolume excluded {excluded} point(s) beyond the reference nadir");
    }
    // The dominated region is a union over the nondominated subset; dropping
    // dominated and duplicate points changes nothing but speeds the sweeps.
    let kept = nondominated_filter(&kept).objective_rows();
    Ok((kept, excluded))
}

/// Union area of `[x_i, nx] × [y_i, ny]` boxes via a left-to-right sweep.
fn hv_2d(mut pts: Vec<(f64, f64)>, nx: f64, ny: f64) -> f64 {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    // Skyline: strictly decreasing y as x grows.
    let mut skyline: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for (x, y) in pts {
        if skyline.last().map_or(true, |&(_, by)| y < by) {
            skyline.push((x, y));
        }
    }
    let mut area = 0.0;
    for (i, &(x, y)) in skyline.iter().enumerate() {
        let next_x = skyline.get(i + 1).map_or(nx, |&(nx2, _)| nx2);
        area += (next_x - x) * (ny - y);
    }
    area
}

/// Exact 3-D hypervolume by slicing along the third objective: between
/// consecutive distinct `f3` values the dominated cross-section is constant,
/// so each slab contributes its 2-D hypervolume times its thickness.
fn hv_3d(points: &[ObjectiveVector], nadir: &[f64]) -> f64 {
    let mut levels: Vec<f64> = points.iter().map(|p| p[2]).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut volume = 0.0;
    for (k, &z) in levels.iter().enumerate() {
        let top = levels.get(k + 1).copied().unwrap_or(nadir[2]);
        let thickness = top - z;
        if thickness <= 0.0 {
            continue;
        }
        let slab: Vec<(f64, f64)> = points
            .iter()
            .filter(|p| p[2] <= z)
            .map(|p| (p[0], p[1]))
            .collect();
        volume += hv_2d(slab, nadir[0], nadir[1]) * thickness;
    }
    volume
}

fn monte_carlo_hv(
    points: &[ObjectiveVector],
    nadir: &[f64],
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    let m = nadir.len();
    let lo: Vec<f64> = (0..m)
        .map(|k| {
            points
                .iter()
                .map(|p| p[k])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let box_volume: f64 = lo.iter().zip(nadir).map(|(l, n)| n - l).product();
    if box_volume <= 0.0 {
        return (0.0, 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    let mut sample = vec![0.0f64; m];
    for _ in 0..samples {
        for k in 0..m {
            sample[k] = rng.gen_range(lo[k]..=nadir[k]);
        }
        if points
            .iter()
            .any(|p| p.iter().zip(&sample).all(|(v, s)| v <= s))
        {
            hits += 1;
        }
    }
    let fraction = hits as f64 / samples as f64;
    let standard_error = box_volume * (fraction * (1.0 - fraction) / samples as f64).sqrt();
    (box_volume * fraction, standard_error)
}
