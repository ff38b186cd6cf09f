//! Multi-objective memetic optimization over binary design variables.
//!
//! This crate implements a hybrid of dominance-based evolutionary search and
//! steepest-descent local refinement for problems whose decision variables are
//! bit vectors (element on/off switches of a discretized design region). Three
//! optimizers share one set of variation operators:
//!
//! * [`engine::run_moma_aw`] — the memetic algorithm with **adaptive weights**:
//!   every agent carries its own scalarization weight vector, the weight set is
//!   re-fitted to the population each iteration, and every offspring is refined
//!   by an exhaustive single-bit-flip descent on its personal composite
//!   objective.
//! * [`engine::run_soga_fw`] — a **fixed-weight sweep**: `K` independent
//!   single-objective memetic runs over a uniform simplex grid of weights,
//!   merged into one nondominated front afterwards.
//! * [`engine::run_nsga2`] — the plain dominance-based baseline (same loop with
//!   the weight machinery and the local step disabled).
//!
//! # Module map
//!
//! | module | contents |
//! |--------|----------|
//! | [`genome`] | bit-vector genomes, element geometry, circumscribing radii |
//! | [`weights`] | simplex-lattice weights, angular matching, neighborhood-driven weight adaptation |
//! | [`moea`] | dominance, nondominated sorting, crowding, crossover/mutation, environmental selection |
//! | [`localsearch`] | composite objectives, 1-flip steepest descent, precision tapering, incremental inverse updates |
//! | [`problems`] | LOTZ, bi-objective knapsack, synthetic resonator instances |
//! | [`metrics`] | nondominated archives, generational distance, hypervolume |
//! | [`engine`] | run orchestration, seeding, batching, traces |
//! | [`cli`] | configuration files and the `run`/`compare`/`metrics` subcommands |
//!
//! # A complete minimal run
//!
//! ```
//! use moma::engine::{run_moma_aw, RunConfig};
//! use moma::problems::ProblemSpec;
//!
//! let mut cfg = RunConfig::default();
//! cfg.problem = ProblemSpec::lotz(8);
//! cfg.agents = 16;
//! cfg.iterations = 5;
//! cfg.seed = 7;
//!
//! let result = run_moma_aw(&cfg).unwrap();
//! // The archive is the mutually nondominated set of every locally
//! // optimized solution the run produced plus its final generation.
//! assert!(result.archive.len() >= 2);
//! assert_eq!(result.trace.len(), 5);
//! ```
//!
//! Determinism is a hard guarantee: a `(configuration, master seed)` pair
//! reproduces the same archive bit-for-bit regardless of how many worker
//! threads evaluate candidates, because all randomized decisions run on the
//! orchestrator thread and parallel work is merged in agent index order.

pub mod cli;
pub mod engine;
pub mod error;
pub mod genome;
pub mod localsearch;
pub mod metrics;
pub mod moea;
pub mod problems;
pub mod weights;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
