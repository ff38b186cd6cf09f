//! Bit-vector genomes and the geometry of the shapes they encode.
//!
//! A genome is a string of element on/off switches over a discretized design
//! region. Some elements (driven ports, anchors) are locked active through a
//! [`FixedMask`]; variation operators and local search never touch them.
//!
//! Geometric queries reduce the per-element vertex clouds to a pairwise
//! [`DistanceMatrix`] once per instance; after that, the circumscribing radius
//! of any shape is a max-reduction over active entries, and single-bit flips
//! can be tracked incrementally with [`ShapeRadius`].

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use crate::error::Error;
use crate::Result;

/// Elements that are locked active (a driven port, mechanical anchors, ...).
///
/// Cheap to clone; every genome of an instance shares one allocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedMask(Arc<[bool]>);

impl FixedMask {
    /// Mask with no fixed elements.
    pub fn none(len: usize) -> Self {
        FixedMask(vec![false; len].into())
    }

    /// Mask fixing exactly the given element indices.
    pub fn from_indices(len: usize, fixed: &[usize]) -> Result<Self> {
        let mut mask = vec![false; len];
        for &i in fixed {
            *mask
                .get_mut(i)
                .ok_or_else(|| Error::contract(format!("fixed index {i} out of range 0..{len}")))? = true;
        }
        Ok(FixedMask(mask.into()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Is element `i` locked active?
    pub fn is_fixed(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }
}

/// A candidate shape: one on/off bit per element plus the shared fixed mask.
///
/// Invariants, enforced by every constructor and mutator:
/// * `bits.len() == fixed_mask.len()`
/// * `bits[i]` is active wherever the mask fixes element `i`
///
/// Genomes with *no* active element are representable — several benchmark
/// problems include the empty string in their search space — but geometric
/// queries such as [`circumscribing_radius`] reject them with
/// [`Error::EmptyShape`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Genome {
    bits: Vec<bool>,
    mask: FixedMask,
}

impl Genome {
    /// Build a genome from raw bits, validating the mask invariants.
    pub fn new(bits: Vec<bool>, mask: FixedMask) -> Result<Self> {
        if bits.len() != mask.len() {
            return Err(Error::contract(format!(
                "genome length {} does not match mask length {}",
                bits.len(),
                mask.len()
            )));
        }
        if let Some(i) = (0..bits.len()).find(|&i| mask.is_fixed(i) && !bits[i]) {
            return Err(Error::contract(format!(
                "bit {i} is fixed active but was supplied inactive"
            )));
        }
        Ok(Genome { bits, mask })
    }

    /// All elements inactive except the fixed ones.
    pub fn empty(mask: FixedMask) -> Self {
        let bits = mask.as_slice().to_vec();
        Genome { bits, mask }
    }

    /// All elements active.
    pub fn full(mask: FixedMask) -> Self {
        let bits = vec![true; mask.len()];
        Genome { bits, mask }
    }

    /// Uniform random genome: every free bit is active with probability 1/2.
    pub fn random<R: rand::Rng>(mask: &FixedMask, rng: &mut R) -> Self {
        let bits = (0..mask.len())
            .map(|i| mask.is_fixed(i) || rng.gen_bool(0.5))
            .collect();
        Genome {
            bits,
            mask: mask.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn mask(&self) -> &FixedMask {
        &self.mask
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.bits[i]
    }

    /// Number of active elements.
    pub fn active_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Indices of active elements, ascending.
    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&i| self.bits[i]).collect()
    }

    /// Toggle bit `i`. Panics if the bit is fixed: flipping a locked element
    /// is a programming error, not a runtime condition.
    pub fn flip(&mut self, i: usize) {
        assert!(
            !self.mask.is_fixed(i),
            "attempted to flip fixed element {i}"
        );
        self.bits[i] = !self.bits[i];
    }

    /// The genome as a `0`/`1` string, element 0 first.
    pub fn to_bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    /// Parse a `0`/`1` string produced by [`Genome::to_bit_string`].
    pub fn from_bit_string(s: &str, mask: FixedMask) -> Result<Self> {
        let bits: Vec<bool> = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!(
                    "invalid genome character {other:?}; expected '0' or '1'"
                ))),
            })
            .collect::<Result<_>>()?;
        Genome::new(bits, mask)
    }
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bit_string())
    }
}

/// Vertex clouds of the discretized design region, one cloud per element.
#[derive(Debug, Clone)]
pub struct ElementGeometry {
    vertices: Vec<Vec<[f64; 3]>>,
}

#[derive(Deserialize)]
struct ElementRecord {
    id: usize,
    vertices: Vec<[f64; 3]>,
}

impl ElementGeometry {
    /// Build from per-element vertex lists. Every element needs at least one
    /// vertex and all coordinates must be finite.
    pub fn new(vertices: Vec<Vec<[f64; 3]>>) -> Result<Self> {
        for (i, vs) in vertices.iter().enumerate() {
            if vs.is_empty() {
                return Err(Error::Geometry(format!("element {i} has no vertices")));
            }
            if vs.iter().flatten().any(|c| !c.is_finite()) {
                return Err(Error::Geometry(format!(
                    "element {i} has a non-finite vertex coordinate"
                )));
            }
        }
        Ok(ElementGeometry { vertices })
    }

    /// Axis-aligned grid of `w × h` square pixels with side `pitch` in the
    /// z = 0 plane; element index is `row * w + col`.
    pub fn grid(w: usize, h: usize, pitch: f64) -> Self {
        let mut vertices = Vec::with_capacity(w * h);
        for row in 0..h {
            for col in 0..w {
                let x0 = col as f64 * pitch;
                let y0 = row as f64 * pitch;
                vertices.push(vec![
                    [x0, y0, 0.0],
                    [x0 + pitch, y0, 0.0],
                    [x0, y0 + pitch, 0.0],
                    [x0 + pitch, y0 + pitch, 0.0],
                ]);
            }
        }
        ElementGeometry { vertices }
    }

    /// Load from JSON: a list of `{"id": n, "vertices": [[x,y,z], ...]}`
    /// records. Ids must be exactly `0..n` (any order).
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let records: Vec<ElementRecord> =
            serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_records(records)
    }

    /// Load from CSV with header `element,x,y,z`, one vertex per row; rows of
    /// an element may appear in any order. Ids must be exactly `0..n`.
    pub fn from_csv_file(path: impl AsRef<Path>) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            element: usize,
            x: f64,
            y: f64,
            z: f64,
        }
        let mut by_id: std::collections::BTreeMap<usize, Vec<[f64; 3]>> = Default::default();
        let mut reader = csv::Reader::from_path(path)?;
        for row in reader.deserialize() {
            let row: Row = row?;
            by_id.entry(row.element).or_default().push([row.x, row.y, row.z]);
        }
        let records = by_id
            .into_iter()
            .map(|(id, vertices)| ElementRecord { id, vertices })
            .collect();
        Self::from_records(records)
    }

    fn from_records(mut records: Vec<ElementRecord>) -> Result<Self> {
        records.sort_by_key(|r| r.id);
        for (expect, rec) in records.iter().enumerate() {
            if rec.id != expect {
                return Err(Error::Geometry(format!(
                    "element ids must be contiguous from 0; missing or duplicate id near {expect}"
                )));
            }
        }
        Self::new(records.into_iter().map(|r| r.vertices).collect())
    }

    pub fn n_elements(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self, element: usize) -> &[[f64; 3]] {
        &self.vertices[element]
    }
}

/// Symmetric matrix of pairwise element distances. Entry `(p, q)` is the
/// largest distance between any vertex of `p` and any vertex of `q`; the
/// diagonal holds element diameters.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Build an `n × n` matrix from a symmetric distance function. The upper
    /// triangle is mirrored, so `f` is only called with `p <= q`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = vec![0.0; n * n];
        for p in 0..n {
            for q in p..n {
                let d = f(p, q);
                values[p * n + q] = d;
                values[q * n + p] = d;
            }
        }
        DistanceMatrix { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.values[p * self.n + q]
    }
}

/// Reduce vertex clouds to worst-case pairwise distances: entry `(p, q)` is
/// the maximum Euclidean distance over all vertex pairs of elements `p`
/// and `q`.
pub fn build_distance_matrix(geom: &ElementGeometry) -> DistanceMatrix {
    DistanceMatrix::from_fn(geom.n_elements(), |p, q| {
        let mut worst = 0.0f64;
        for a in geom.vertices(p) {
            for b in geom.vertices(q) {
                let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2))
                    .sqrt();
                worst = worst.max(d);
            }
        }
        worst
    })
}

/// Radius of the smallest origin-free circumscribing sphere estimate used for
/// size objectives: half the largest pairwise distance between active
/// elements (diagonal included, so a lone extended element contributes its
/// own diameter).
pub fn circumscribing_radius(genome: &Genome, distances: &DistanceMatrix) -> Result<f64> {
    if genome.len() != distances.n() {
        return Err(Error::contract(format!(
            "genome length {} does not match distance matrix size {}",
            genome.len(),
            distances.n()
        )));
    }
    let active = genome.active_indices();
    if active.is_empty() {
        return Err(Error::EmptyShape(
            "circumscribing radius of a shape with no active elements".into(),
        ));
    }
    let mut diameter = 0.0f64;
    for (i, &p) in active.iter().enumerate() {
        for &q in &active[i..] {
            diameter = diameter.max(distances.get(p, q));
        }
    }
    Ok(0.5 * diameter)
}

/// Extent of the active shape along one coordinate axis (0 = x, 1 = y,
/// 2 = z): max minus min of that coordinate over all vertices of active
/// elements.
pub fn axis_extent(genome: &Genome, geom: &ElementGeometry, axis: usize) -> Result<f64> {
    if axis > 2 {
        return Err(Error::contract(format!("axis {axis} out of range 0..=2")));
    }
    if genome.len() != geom.n_elements() {
        return Err(Error::contract(format!(
            "genome length {} does not match geometry with {} elements",
            genome.len(),
            geom.n_elements()
        )));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..genome.len() {
        if !genome.is_active(i) {
            continue;
        }
        for v in geom.vertices(i) {
            lo = lo.min(v[axis]);
            hi = hi.max(v[axis]);
        }
    }
    if lo > hi {
        return Err(Error::EmptyShape(
            "axis extent of a shape with no active elements".into(),
        ));
    }
    Ok(hi - lo)
}

/// Incremental circumscribing-radius tracker for single-bit flips.
///
/// Keeps, for every element, the largest distance to any *active* element
/// (a row-max cache). Activation refreshes each row in O(n); deactivation
/// rescans only rows whose maximum was realized at the removed element.
/// Candidate flips can be priced without committing via
/// [`ShapeRadius::radius_after_flip`].
#[derive(Debug, Clone)]
pub struct ShapeRadius {
    matrix: Arc<DistanceMatrix>,
    active: Vec<bool>,
    n_active: usize,
    /// `row_max[p]` = max over active q of `D(p, q)`; 0 when nothing is active.
    row_max: Vec<f64>,
    /// Witness column for `row_max[p]`, meaningful while `n_active > 0`.
    row_arg: Vec<usize>,
}

impl ShapeRadius {
    /// Start tracking the active set of `genome`.
    pub fn new(matrix: Arc<DistanceMatrix>, genome: &Genome) -> Result<Self> {
        if genome.len() != matrix.n() {
            return Err(Error::contract(format!(
                "genome length {} does not match distance matrix size {}",
                genome.len(),
                matrix.n()
            )));
        }
        let n = matrix.n();
        let mut tracker = ShapeRadius {
            matrix,
            active: vec![false; n],
            n_active: 0,
            row_max: vec![0.0; n],
            row_arg: vec![0; n],
        };
        for i in 0..n {
            if genome.is_active(i) {
                tracker.set(i, true);
            }
        }
        Ok(tracker)
    }

    /// Current radius; `Err(EmptyShape)` when nothing is active.
    pub fn radius(&self) -> Result<f64> {
        if self.n_active == 0 {
            return Err(Error::EmptyShape(
                "radius of a shape with no active elements".into(),
            ));
        }
        Ok(0.5 * self.diameter())
    }

    /// Radius after toggling element `i`, without committing the flip.
    /// `None` when the flip would deactivate the last active element.
    pub fn radius_after_flip(&self, i: usize) -> Option<f64> {
        if !self.active[i] {
            // New pairs are (i, q) for active q — already cached — plus (i, i).
            let with_i = self.row_max[i].max(self.matrix.get(i, i));
            Some(0.5 * self.diameter().max(with_i))
        } else {
            if self.n_active == 1 {
                return None;
            }
            let mut diameter = 0.0f64;
            for p in 0..self.active.len() {
                if !self.active[p] || p == i {
                    continue;
                }
                let m = if self.row_arg[p] == i {
                    self.rescan_row(p, Some(i)).0
                } else {
                    self.row_max[p]
                };
                diameter = diameter.max(m);
            }
            Some(0.5 * diameter)
        }
    }

    /// Toggle element `i` and update the caches.
    pub fn flip(&mut self, i: usize) {
        let now_active = !self.active[i];
        self.set(i, now_active);
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.active[i]
    }

    fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for p in 0..self.active.len() {
            if self.active[p] {
                d = d.max(self.row_max[p]);
            }
        }
        d
    }

    fn set(&mut self, i: usize, activate: bool) {
        debug_assert_ne!(self.active[i], activate);
        if activate {
            self.active[i] = true;
            self.n_active += 1;
            for p in 0..self.active.len() {
                let d = self.matrix.get(p, i);
                if self.n_active == 1 || d > self.row_max[p] {
                    self.row_max[p] = d;
                    self.row_arg[p] = i;
                }
            }
        } else {
            self.active[i] = false;
            self.n_active -= 1;
            for p in 0..self.active.len() {
                if self.row_arg[p] == i {
                    let (m, arg) = self.rescan_row(p, None);
                    self.row_max[p] = m;
                    self.row_arg[p] = arg;
                }
            }
        }
    }

    /// Max of row `p` over active columns, optionally pretending `skip` is
    /// inactive. Returns `(0.0, 0)` when no column qualifies.
    fn rescan_row(&self, p: usize, skip: Option<usize>) -> (f64, usize) {
        let mut best = 0.0f64;
        let mut arg = 0usize;
        for q in 0..self.active.len() {
            if !self.active[q] || Some(q) == skip {
                continue;
            }
            let d = self.matrix.get(p, q);
            if d >= best {
                best = d;
                arg = q;
            }
        }
        (best, arg)
    }
}
