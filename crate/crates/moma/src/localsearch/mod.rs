//! Scalarized steepest descent over single-bit flips.
//!
//! Each offspring is refined against its personal composite objective
//! `f̃ = wᵀf`: all single-bit flips of non-fixed elements are priced, the
//! strictly best one is taken, and the walk stops when the best available
//! relative improvement drops below a precision threshold `ε_loc`, when no
//! flip improves, or when the flip budget runs out. The threshold follows a
//! [`taper_schedule`]: generous early (broad exploration at low cost),
//! geometric tightening toward high precision as the archive matures.
//!
//! Problems whose evaluation reduces to a linear solve plug in an
//! incremental-inverse evaluator built on [`rank1::InverseState`]; everything
//! else uses plain re-evaluation through [`PlainFlipEvaluator`].

pub mod rank1;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::genome::Genome;
use crate::moea::ObjectiveVector;
use crate::problems::Problem;
use crate::weights::WeightVector;
use crate::Result;

/// Floor applied to `|f̃|` in relative-improvement denominators.
pub const RELATIVE_IMPROVEMENT_FLOOR: f64 = 1e-30;

/// A scalarizing view of a multi-objective problem: the weighted sum of the
/// (optionally rescaled) objective components.
#[derive(Debug, Clone)]
pub struct CompositeObjective {
    pub weight: WeightVector,
    /// Per-objective scale references divided out before weighting; `None`
    /// uses the raw objectives (the benchmark problems already emit
    /// magnitude-normalized values).
    pub scales: Option<Vec<f64>>,
}

impl CompositeObjective {
    pub fn new(weight: WeightVector) -> Self {
        CompositeObjective {
            weight,
            scales: None,
        }
    }

    /// `f̃ = Σ_k w_k · f_k / s_k`.
    pub fn value(&self, objectives: &[f64]) -> f64 {
        match &self.scales {
            None => self.weight.composite(objectives),
            Some(scales) => self
                .weight
                .as_slice()
                .iter()
                .zip(objectives)
                .zip(scales)
                .map(|((w, f), s)| w * f / s)
                .sum(),
        }
    }
}

/// Precision threshold for iteration `t` (1-based): `eps_hi` before
/// `t_start`, geometric interpolation down to `eps_lo` at `t_end`, `eps_lo`
/// afterwards.
pub fn taper_schedule(t: u32, t_start: u32, t_end: u32, eps_hi: f64, eps_lo: f64) -> f64 {
    assert!(t >= 1, "iterations are 1-based");
    assert!(
        (1..=t_end).contains(&t_start),
        "need 1 <= t_start <= t_end, got t_start={t_start}, t_end={t_end}"
    );
    assert!(
        eps_hi >= eps_lo && eps_lo > 0.0,
        "need eps_hi >= eps_lo > 0, got eps_hi={eps_hi}, eps_lo={eps_lo}"
    );
    if t < t_start {
        eps_hi
    } else if t >= t_end {
        eps_lo
    } else {
        let frac = (t - t_start) as f64 / (t_end - t_start) as f64;
        eps_hi * (eps_lo / eps_hi).powf(frac)
    }
}

/// How `ε_loc` evolves over the outer iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum EpsSchedule {
    /// One fixed threshold for the whole run.
    Constant { eps: f64 },
    /// [`taper_schedule`] with the given knee points.
    Taper {
        eps_hi: f64,
        eps_lo: f64,
        t_start: u32,
        t_end: u32,
    },
}

impl EpsSchedule {
    pub fn at(&self, t: u32) -> f64 {
        match *self {
            EpsSchedule::Constant { eps } => eps,
            EpsSchedule::Taper {
                eps_hi,
                eps_lo,
                t_start,
                t_end,
            } => taper_schedule(t, t_start, t_end, eps_hi, eps_lo),
        }
    }
}

impl Default for EpsSchedule {
    fn default() -> Self {
        EpsSchedule::Taper {
            eps_hi: 1e-3,
            eps_lo: 1e-6,
            t_start: 10,
            t_end: 30,
        }
    }
}

/// Stopping parameters of one descent.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LocalSearchBudget {
    /// Terminate when the best relative improvement falls below this.
    pub eps_loc: f64,
    /// Hard cap on accepted flips.
    pub max_flips: usize,
}

impl Default for LocalSearchBudget {
    fn default() -> Self {
        LocalSearchBudget {
            eps_loc: 1e-3,
            max_flips: 100_000,
        }
    }
}

/// Why a descent stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// No single-bit flip strictly improved the composite.
    LocalOptimum,
    /// The best available improvement fell below `eps_loc`.
    BelowEpsilon,
    /// The accepted-flip budget ran out.
    MaxFlips,
}

/// Prices candidate single-bit flips of one genome against one problem.
///
/// `flip_objectives` must leave the state unchanged; `commit` applies a flip
/// permanently. Implementations may keep arbitrary incremental state (e.g.
/// a tracked inverse); [`PlainFlipEvaluator`] simply re-evaluates.
pub trait FlipEvaluator {
    /// Genome currently represented by this evaluator.
    fn genome(&self) -> &Genome;

    /// Objectives of the current genome.
    fn objectives(&self) -> &ObjectiveVector;

    /// Objectives of the current genome with bit `k` flipped, without
    /// committing. An `Err` marks the flip numerically infeasible; the
    /// descent skips it.
    fn flip_objectives(&mut self, k: usize) -> Result<ObjectiveVector>;

    /// Apply flip `k`. After this, [`FlipEvaluator::objectives`] reflects the
    /// flipped genome.
    fn commit(&mut self, k: usize) -> Result<()>;
}

/// Fallback evaluator: flip, re-evaluate, flip back.
pub struct PlainFlipEvaluator<'a> {
    problem: &'a dyn Problem,
    genome: Genome,
    current: ObjectiveVector,
}

impl<'a> PlainFlipEvaluator<'a> {
    pub fn new(problem: &'a dyn Problem, genome: Genome) -> Self {
        let current = problem.evaluate(&genome);
        PlainFlipEvaluator {
            problem,
            genome,
            current,
        }
    }
}

impl FlipEvaluator for PlainFlipEvaluator<'_> {
    fn genome(&self) -> &Genome {
        &self.genome
    }

    fn objectives(&self) -> &ObjectiveVector {
        &self.current
    }

    fn flip_objectives(&mut self, k: usize) -> Result<ObjectiveVector> {
        self.genome.flip(k);
        let out = self.problem.evaluate(&self.genome);
        self.genome.flip(k);
        Ok(out)
    }

    fn commit(&mut self, k: usize) -> Result<()> {
        self.genome.flip(k);
        self.current = self.problem.evaluate(&self.genome);
        Ok(())
    }
}

/// One accepted flip of a descent.
#[derive(Debug, Clone)]
pub struct DescentStep {
    pub flip: usize,
    pub genome: Genome,
    pub objectives: ObjectiveVector,
    pub composite: f64,
}

/// Everything a descent produced: the refined genome, the walk that led
/// there, and its cost counters.
#[derive(Debug, Clone)]
pub struct DescentReport {
    pub genome: Genome,
    pub objectives: ObjectiveVector,
    pub composite: f64,
    /// Accepted activations.
    pub n_add: u64,
    /// Accepted deactivations.
    pub n_rem: u64,
    /// Candidate pricing calls, including numerically infeasible ones.
    pub candidate_evaluations: u64,
    /// Accepted flips in order; `steps.last()` matches `genome`.
    pub steps: Vec<DescentStep>,
    pub termination: Termination,
    /// The `eps_loc` in force when the walk stopped.
    pub eps_at_termination: f64,
}

/// Exhaustive 1-flip steepest descent on `f̃`.
///
/// Every iteration prices all non-fixed flips, takes the strictly best one
/// (ties to the lowest flip index), and stops per [`LocalSearchBudget`]:
/// a flip below the relative-improvement threshold is *not* taken, so the
/// composite trajectory decreases by at least `eps_loc · |f̃|` per step.
pub fn local_descent(
    evaluator: &mut dyn FlipEvaluator,
    composite: &CompositeObjective,
    budget: &LocalSearchBudget,
) -> Result<DescentReport> {
    if budget.eps_loc < 0.0 || !budget.eps_loc.is_finite() {
        return Err(Error::config(format!(
            "eps_loc must be finite and nonnegative, got {}",
            budget.eps_loc
        )));
    }
    let n = evaluator.genome().len();
    let mask = evaluator.genome().mask().clone();
    let mut current_value = composite.value(evaluator.objectives());
    let mut report = DescentReport {
        genome: evaluator.genome().clone(),
        objectives: evaluator.objectives().clone(),
        composite: current_value,
        n_add: 0,
        n_rem: 0,
        candidate_evaluations: 0,
        steps: Vec::new(),
        termination: Termination::LocalOptimum,
        eps_at_termination: budget.eps_loc,
    };

    loop {
        if report.steps.len() >= budget.max_flips {
            report.termination = Termination::MaxFlips;
            break;
        }
        let mut best: Option<(usize, ObjectiveVector, f64)> = None;
        for k in 0..n {
            if mask.is_fixed(k) {
                continue;
            }
            report.candidate_evaluations += 1;
            let objectives = match evaluator.flip_objectives(k) {
                Ok(o) => o,
                Err(e) => {
                    log::debug!("flip {k} skipped as infeasible: {e}");
                    continue;
                }
            };
            let value = composite.value(&objectives);
            // Strict improvement only; the first (lowest-index) minimizer wins.
            if value < current_value && best.as_ref().map_or(true, |(_, _, bv)| value < *bv) {
                best = Some((k, objectives, value));
            }
        }
        let Some((k, objectives, value)) = best else {
            report.termination = Termination::LocalOptimum;
            break;
        };
        let relative = (current_value - value) / current_value.abs().max(RELATIVE_IMPROVEMENT_FLOOR);
        if relative < budget.eps_loc {
            report.termination = Termination::BelowEpsilon;
            break;
        }
        let was_active = evaluator.genome().is_active(k);
        evaluator.commit(k)?;
        if was_active {
            report.n_rem += 1;
        } else {
            report.n_add += 1;
        }
        current_value = value;
        report.steps.push(DescentStep {
            flip: k,
            genome: evaluator.genome().clone(),
            objectives: objectives.clone(),
            composite: value,
        });
        report.genome = evaluator.genome().clone();
        report.objectives = objectives;
        report.composite = value;
    }
    Ok(report)
}
