//! Pluggable binary minimization problems.
//!
//! Every problem maps a masked bit genome to a finite, minimization-oriented
//! objective vector. Two combinatorial benchmarks ship with exact oracles —
//! [`lotz::Lotz`] (analytic front) and [`knapsack::Knapsack`] (exhaustive
//! front for small `n`) — alongside a synthetic [`resonator::Resonator`]
//! whose evaluation runs through a complex linear system and therefore
//! exercises the incremental-inverse local search path.
//!
//! Instances travel as seeded descriptors ([`ProblemSpec`]): name, seed, and
//! dimensions, never raw matrices, so a run is reproducible from its config
//! echo alone.

pub mod knapsack;
pub mod lotz;
pub mod resonator;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::genome::{FixedMask, Genome};
use crate::localsearch::{FlipEvaluator, PlainFlipEvaluator};
use crate::moea::ObjectiveVector;
use crate::Result;

/// A binary multi-objective minimization problem.
///
/// Implementations must be deterministic pure functions of the genome and
/// must return finite values for every genome honoring [`Problem::fixed_mask`]
/// (numerically infeasible genomes map to a documented worst-case sentinel
/// instead of failing).
pub trait Problem: Send + Sync {
    /// Short instance name (`"lotz"`, `"knapsack"`, ...).
    fn name(&self) -> &str;

    /// Number of binary degrees of freedom.
    fn dof(&self) -> usize;

    /// Number of objectives `M`.
    fn objective_count(&self) -> usize;

    /// Elements every genome must keep active.
    fn fixed_mask(&self) -> &FixedMask;

    /// Objectives of one genome; all components finite, lower is better.
    fn evaluate(&self, genome: &Genome) -> ObjectiveVector;

    /// Componentwise worst objective values used as the hypervolume
    /// reference.
    fn reference_nadir(&self) -> ObjectiveVector;

    /// Exact Pareto front (unique objective vectors) when tractable.
    fn oracle_front(&self) -> Option<Vec<ObjectiveVector>> {
        None
    }

    /// Problem-specific incremental flip evaluator, when one exists; `None`
    /// falls back to flip-and-re-evaluate.
    fn incremental_evaluator<'a>(&'a self, genome: &Genome) -> Option<Box<dyn FlipEvaluator + 'a>> {
        let _ = genome;
        None
    }
}

/// Best available flip evaluator for `problem`: its incremental one when
/// offered, plain re-evaluation otherwise.
pub fn flip_evaluator<'a>(problem: &'a dyn Problem, genome: Genome) -> Box<dyn FlipEvaluator + 'a> {
    match problem.incremental_evaluator(&genome) {
        Some(eval) => eval,
        None => Box::new(PlainFlipEvaluator::new(problem, genome)),
    }
}

/// Portable, seeded instance descriptor.
///
/// `dims` is problem-specific: `[n]` for the bit-string benchmarks, grid
/// `[width, height]` for the resonator family. An empty `dims` picks the
/// problem's documented default size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dims: Vec<usize>,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec::lotz(16)
    }
}

impl ProblemSpec {
    pub fn lotz(n: usize) -> Self {
        ProblemSpec {
            name: "lotz".into(),
            seed: 0,
            dims: vec![n],
        }
    }

    pub fn knapsack(n: usize, seed: u64) -> Self {
        ProblemSpec {
            name: "knapsack".into(),
            seed,
            dims: vec![n],
        }
    }

    /// Three-objective synthetic resonator on a `width × height` pixel grid.
    pub fn resonator(width: usize, height: usize, seed: u64) -> Self {
        ProblemSpec {
            name: "resonator".into(),
            seed,
            dims: vec![width, height],
        }
    }

    /// Two-objective variant trading quality factor against occupied radius.
    pub fn resonator_size(width: usize, height: usize, seed: u64) -> Self {
        ProblemSpec {
            name: "resonator-size".into(),
            seed,
            dims: vec![width, height],
        }
    }

    /// Build the instance this descriptor names. The same descriptor always
    /// produces a bit-identical instance.
    pub fn make_instance(&self) -> Result<ProblemInstance> {
        let inner: Arc<dyn Problem> = match self.name.as_str() {
            "lotz" => {
                let n = self.one_dim(16)?;
                Arc::new(lotz::Lotz::new(n)?)
            }
            "knapsack" => {
                let n = self.one_dim(20)?;
                Arc::new(knapsack::Knapsack::new(n, self.seed)?)
            }
            "resonator" => {
                let (w, h) = self.grid_dims(16, 8)?;
                Arc::new(resonator::Resonator::new(
                    w,
                    h,
                    self.seed,
                    resonator::ResonatorObjectives::QualityMatchingRegularity,
                )?)
            }
            "resonator-size" => {
                let (w, h) = self.grid_dims(16, 8)?;
                Arc::new(resonator::Resonator::new(
                    w,
                    h,
                    self.seed,
                    resonator::ResonatorObjectives::QualitySize,
                )?)
            }
            other => {
                return Err(Error::config(format!(
                    "unknown problem '{other}'; expected one of lotz, knapsack, resonator, resonator-size"
                )))
            }
        };
        Ok(ProblemInstance {
            spec: self.clone(),
            inner,
        })
    }

    /// JSON descriptor export — the reproducible interchange format.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("descriptor serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("problem descriptor: {e}")))
    }

    fn one_dim(&self, default: usize) -> Result<usize> {
        match self.dims.as_slice() {
            [] => Ok(default),
            [n] => Ok(*n),
            other => Err(Error::config(format!(
                "problem '{}' takes dims [n], got {other:?}",
                self.name
            ))),
        }
    }

    fn grid_dims(&self, default_w: usize, default_h: usize) -> Result<(usize, usize)> {
        match self.dims.as_slice() {
            [] => Ok((default_w, default_h)),
            [w, h] => Ok((*w, *h)),
            other => Err(Error::config(format!(
                "problem '{}' takes dims [width, height], got {other:?}",
                self.name
            ))),
        }
    }
}

/// A constructed problem together with the descriptor that names it.
#[derive(Clone)]
pub struct ProblemInstance {
    spec: ProblemSpec,
    inner: Arc<dyn Problem>,
}

impl ProblemInstance {
    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn problem(&self) -> &dyn Problem {
        self.inner.as_ref()
    }
}

impl std::ops::Deref for ProblemInstance {
    type Target = dyn Problem;

    fn deref(&self) -> &Self::Target {
        self.inner.as_ref()
    }
}

impl std::fmt::Debug for ProblemInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemInstance")
            .field("spec", &self.spec)
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_round_trips_through_json() {
        let spec = ProblemSpec::resonator(16, 8, 42);
        let back = ProblemSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn unknown_problem_name_is_a_config_error() {
        let spec = ProblemSpec {
            name: "warp-drive".into(),
            seed: 0,
            dims: vec![],
        };
        let err = spec.make_instance().unwrap_err();
        assert!(matches!(err, Error::Config(_)), "got {err:?}");
        assert!(err.to_string().contains("warp-drive"));
    }

    #[test]
    fn wrong_dims_shape_is_rejected() {
        let spec = ProblemSpec {
            name: "lotz".into(),
            seed: 0,
            dims: vec![4, 4],
        };
        assert!(spec.make_instance().is_err());
    }

    #[test]
    fn empty_dims_use_documented_defaults() {
        let lotz = ProblemSpec {
            name: "lotz".into(),
            seed: 0,
            dims: vec![],
        };
        assert_eq!(lotz.make_instance().unwrap().dof(), 16);
        let resonator = ProblemSpec {
            name: "resonator".into(),
            seed: 1,
            dims: vec![],
        };
        assert_eq!(resonator.make_instance().unwrap().dof(), 16 * 8);
    }

    #[test]
    fn same_descriptor_builds_identical_instances() {
        let spec = ProblemSpec::knapsack(12, 7);
        let a = spec.make_instance().unwrap();
        let b = spec.make_instance().unwrap();
        let mask = a.fixed_mask().clone();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        for _ in 0..32 {
            let g = Genome::random(&mask, &mut rng);
            assert_eq!(a.evaluate(&g).as_slice(), b.evaluate(&g).as_slice());
        }
    }
}
