//! Run orchestration: the weight-adaptive memetic optimizer, its
//! single-objective sweep and non-memetic baselines, deterministic parallel
//! evaluation, budget accounting, and batch experiments.
//!
//! Determinism contract: every random decision is drawn from one master
//! generator on the orchestrator thread, in a fixed order. Worker threads
//! only run pure functions (objective evaluations and local descents) whose
//! results are collected in agent-index order, so a run's outputs depend on
//! `seed` and the configuration — never on the worker count.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::genome::Genome;
use crate::localsearch::{
    local_descent, CompositeObjective, DescentReport, EpsSchedule, LocalSearchBudget, Termination,
};
use crate::metrics::{hypervolume, nondominated_filter, FrontArchive};
use crate::moea::{crossover, environmental_selection, mutate, Individual, ObjectiveVector};
use crate::problems::{flip_evaluator, ProblemInstance, ProblemSpec};
use crate::weights::{
    assign_weights, simplex_lattice, update_weight_set, AssignOrientation, WeightUpdateParams,
    WeightVector,
};
use crate::Result;

/// Which optimizer a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Weight-adaptive memetic multi-objective search (the full machine).
    #[default]
    MomaAw,
    /// Single-objective memetic runs swept over a fixed weight lattice.
    SogaFw,
    /// The evolutionary layer alone: no weights, no local search.
    Nsga2,
}

impl Algorithm {
    /// Stable lowercase identifier, also used in file names.
    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::MomaAw => "moma-aw",
            Algorithm::SogaFw => "soga-fw",
            Algorithm::Nsga2 => "nsga2",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moma-aw" => Ok(Algorithm::MomaAw),
            "soga-fw" => Ok(Algorithm::SogaFw),
            "nsga2" => Ok(Algorithm::Nsga2),
            other => Err(Error::config(format!(
                "unknown algorithm '{other}'; expected moma-aw, soga-fw, or nsga2"
            ))),
        }
    }
}

/// What the perturbation counter counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CounterMode {
    /// Accepted flips only (the default).
    #[default]
    Accepted,
    /// Every candidate flip priced during descent scans.
    Candidates,
}

/// How `max_evaluations` / `max_perturbations` apply to a weight sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SogaBudget {
    /// Every sweep point receives the full budget (the default).
    #[default]
    FullPerPoint,
    /// The budget is split evenly across the sweep points.
    SharedAcrossSweep,
}

/// Complete description of one optimization run.
///
/// Defaults reproduce the standard setting: 64 agents, 40 iterations,
/// single-point crossover at rate 0.9, one guaranteed bit flip per offspring,
/// and a geometric descent-tolerance taper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub problem: ProblemSpec,
    /// Population size `N_A`.
    pub agents: usize,
    /// Outer iterations `N_I`.
    pub iterations: u32,
    /// Per-offspring probability of the single-bit mutation.
    pub mutation_probability: f64,
    /// Per-pair probability of applying crossover.
    pub crossover_probability: f64,
    /// Cut points per crossover.
    pub crossover_points: usize,
    /// Probability that a spilled solution joins a minimal neighborhood.
    pub delta_r: f64,
    /// Tolerated fraction of empty weight neighborhoods.
    pub delta_c: f64,
    /// Solutions a weight may host before spilling.
    pub neighborhood_capacity: usize,
    /// Replacement vectors sampled per stale weight.
    pub wvg_replacements: usize,
    /// Objective orientation used by the weight assignment.
    pub orientation: AssignOrientation,
    /// Descent tolerance schedule.
    pub eps: EpsSchedule,
    /// Hard cap on accepted flips per descent.
    pub max_flips: usize,
    pub counter_mode: CounterMode,
    /// Reuse descent results for identical (genome, weight) starts.
    pub memoize_descents: bool,
    /// Sweep points `K` for the single-objective baseline.
    pub soga_sweep: usize,
    pub soga_budget: SogaBudget,
    /// Stop before an iteration once this many objective evaluations ran.
    pub max_evaluations: Option<u64>,
    /// Stop before an iteration once the perturbation counter reaches this;
    /// descent waves prorate the remainder across agents.
    pub max_perturbations: Option<u64>,
    pub seed: u64,
    /// Worker threads; 0 uses the machine default. Results do not depend on
    /// this.
    pub threads: usize,
    /// Keep one record per executed descent in the result.
    pub record_descents: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            algorithm: Algorithm::MomaAw,
            problem: ProblemSpec::default(),
            agents: 64,
            iterations: 40,
            mutation_probability: 1.0,
            crossover_probability: 0.9,
            crossover_points: 1,
            delta_r: 0.5,
            delta_c: 0.1,
            neighborhood_capacity: 3,
            wvg_replacements: 3,
            orientation: AssignOrientation::default(),
            eps: EpsSchedule::default(),
            max_flips: 100_000,
            counter_mode: CounterMode::default(),
            memoize_descents: false,
            soga_sweep: 8,
            soga_budget: SogaBudget::default(),
            max_evaluations: None,
            max_perturbations: None,
            seed: 0,
            threads: 0,
            record_descents: false,
        }
    }
}

impl RunConfig {
    /// Instance-independent sanity checks; each failure names the offending
    /// key and its accepted range.
    pub fn validate(&self) -> Result<()> {
        fn probability(key: &str, v: f64) -> Result<()> {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!(
                    "{key} must lie in [0, 1], got {v}"
                )));
            }
            Ok(())
        }
        probability("mutation_probability", self.mutation_probability)?;
        probability("crossover_probability", self.crossover_probability)?;
        probability("delta_r", self.delta_r)?;
        probability("delta_c", self.delta_c)?;
        if self.agents < 2 {
            return Err(Error::config(format!(
                "agents must be at least 2, got {}",
                self.agents
            )));
        }
        if self.crossover_points < 1 {
            return Err(Error::config("crossover_points must be at least 1"));
        }
        if self.neighborhood_capacity < 1 {
            return Err(Error::config(
                "neighborhood_capacity must be at least 1",
            ));
        }
        if self.wvg_replacements < 1 {
            return Err(Error::config("wvg_replacements must be at least 1"));
        }
        if self.soga_sweep < 2 {
            return Err(Error::config(format!(
                "soga_sweep must be at least 2, got {}",
                self.soga_sweep
            )));
        }
        match self.eps {
            EpsSchedule::Constant { eps } => {
                if !(eps.is_finite() && eps >= 0.0) {
                    return Err(Error::config(format!(
                        "eps.eps must be finite and nonnegative, got {eps}"
                    )));
                }
            }
            EpsSchedule::Taper {
                eps_hi,
                eps_lo,
                t_start,
                t_end,
            } => {
                if !(eps_lo > 0.0 && eps_hi >= eps_lo && eps_hi.is_finite()) {
                    return Err(Error::config(format!(
                        "taper needs eps_hi >= eps_lo > 0, got eps_hi={eps_hi}, eps_lo={eps_lo}"
                    )));
                }
                if t_start < 1 || t_end < t_start {
                    return Err(Error::config(format!(
                        "taper needs 1 <= t_start <= t_end, got t_start={t_start}, t_end={t_end}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn validate_against(&self, instance: &ProblemInstance, needs_weights: bool) -> Result<()> {
        let dof = instance.dof();
        if self.crossover_points >= dof {
            return Err(Error::config(format!(
                "crossover_points must be below the genome length {dof}, got {}",
                self.crossover_points
            )));
        }
        let m = instance.objective_count();
        if needs_weights && self.agents < m {
            return Err(Error::config(format!(
                "agents must be at least the objective count {m} to seed the weight lattice, got {}",
                self.agents
            )));
        }
        if self.algorithm == Algorithm::SogaFw && self.soga_sweep < m {
            return Err(Error::config(format!(
                "soga_sweep must be at least the objective count {m}, got {}",
                self.soga_sweep
            )));
        }
        Ok(())
    }

    fn weight_params(&self) -> WeightUpdateParams {
        WeightUpdateParams {
            capacity: self.neighborhood_capacity,
            replacements: self.wvg_replacements,
            delta_r: self.delta_r,
            delta_c: self.delta_c,
            aperture: None,
        }
    }
}

/// One per-iteration snapshot of a run. Wall time is deliberately absent so
/// trace files are reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: u32,
    /// Hypervolume of the tracked front — the accumulated archive for
    /// memetic runs, the current population front for the plain baseline —
    /// against the instance reference point.
    pub hypervolume: f64,
    /// Unique nondominated solutions in the tracked front.
    pub n_nd: usize,
    pub evaluations: u64,
    pub perturbations: u64,
    /// Descent tolerance in force; 0 when local search is disabled.
    pub epsilon: f64,
}

/// One executed descent, for the optional per-descent log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentRecord {
    /// Outer iteration; 0 is the wave that refines the initial population.
    pub iteration: u32,
    /// Index of the first agent that requested this descent.
    pub agent: usize,
    pub epsilon: f64,
    pub start_composite: f64,
    pub final_composite: f64,
    pub accepted_flips: u64,
    pub candidate_evaluations: u64,
    pub termination: Termination,
}

/// Everything one run produced.
#[derive(Debug)]
pub struct RunResult {
    /// Nondominated filter over the final generation plus every locally
    /// optimized solution the run encountered: each descent endpoint and
    /// every accepted descent step competes for membership. Runs without a
    /// local step therefore return their final population's front.
    pub archive: FrontArchive,
    pub trace: Vec<TracePoint>,
    /// Per-descent log; empty unless `record_descents` was set.
    pub descents: Vec<DescentRecord>,
    pub wall: Duration,
    pub seed: u64,
    pub evaluations: u64,
    pub perturbations: u64,
    pub iterations_executed: u32,
}

#[derive(Debug, Default, Clone, Copy)]
struct Counters {
    evaluations: u64,
    perturbations: u64,
}

/// Run the configured algorithm.
pub fn run(cfg: &RunConfig) -> Result<RunResult> {
    match cfg.algorithm {
        Algorithm::MomaAw => run_moma_aw(cfg),
        Algorithm::SogaFw => run_soga_fw(cfg),
        Algorithm::Nsga2 => run_nsga2(cfg),
    }
}

/// The full machine: adaptive weights plus per-agent local descents.
pub fn run_moma_aw(cfg: &RunConfig) -> Result<RunResult> {
    run_core(cfg, true, true)
}

/// The evolutionary layer alone. Weight adaptation and local search are
/// switched off; everything else — operators, selection, archiving,
/// accounting — is shared code.
pub fn run_nsga2(cfg: &RunConfig) -> Result<RunResult> {
    run_core(cfg, false, false)
}

fn build_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))
}

fn evaluate_batch(
    pool: &rayon::ThreadPool,
    instance: &ProblemInstance,
    genomes: &[Genome],
    counters: &mut Counters,
) -> Vec<ObjectiveVector> {
    let objectives =
        pool.install(|| genomes.par_iter().map(|g| instance.evaluate(g)).collect());
    counters.evaluations += genomes.len() as u64;
    objectives
}

/// `agents` children from uniformly drawn parent pairs: crossover with the
/// configured probability, then the mutation operator on every child.
fn make_offspring(
    population: &[Individual],
    cfg: &RunConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Genome>> {
    let mut children = Vec::with_capacity(cfg.agents);
    while children.len() < cfg.agents {
        let a = rng.gen_range(0..population.len());
        let b = rng.gen_range(0..population.len());
        let (mut first, second) = if rng.gen_range(0.0..1.0) < cfg.crossover_probability {
            crossover(
                &population[a].genome,
                &population[b].genome,
                cfg.crossover_points,
                rng,
            )?
        } else {
            (population[a].genome.clone(), population[b].genome.clone())
        };
        mutate(&mut first, cfg.mutation_probability, rng)?;
        children.push(first);
        if children.len() < cfg.agents {
            let mut second = second;
            mutate(&mut second, cfg.mutation_probability, rng)?;
            children.push(second);
        }
    }
    Ok(children)
}

#[derive(Hash, PartialEq, Eq, Clone)]
struct DescentKey {
    genome: String,
    weight_bits: Vec<u64>,
    eps_bits: u64,
    max_flips: usize,
}

impl DescentKey {
    fn new(genome: &Genome, weight: &WeightVector, budget: &LocalSearchBudget) -> Self {
        DescentKey {
            genome: genome.to_bit_string(),
            weight_bits: weight.as_slice().iter().map(|w| w.to_bits()).collect(),
            eps_bits: budget.eps_loc.to_bits(),
            max_flips: budget.max_flips,
        }
    }
}

/// Per-descent flip allowance for one wave; `None` skips the wave because
/// the perturbation budget is already spent.
fn wave_flip_cap(
    cfg: &RunConfig,
    counters: &Counters,
    n_descents: usize,
    dof: usize,
) -> Option<usize> {
    let Some(cap) = cfg.max_perturbations else {
        return Some(cfg.max_flips);
    };
    let remaining = cap.saturating_sub(counters.perturbations);
    if remaining == 0 {
        return None;
    }
    let share = remaining.div_ceil(n_descents.max(1) as u64);
    let flips = match cfg.counter_mode {
        CounterMode::Accepted => share,
        // A scan prices every free bit once per accepted flip, so candidate
        // allowances translate to roughly `share / dof` flips.
        CounterMode::Candidates => share / dof.max(1) as u64,
    };
    Some((flips.min(usize::MAX as u64) as usize).min(cfg.max_flips))
}

/// Descend every individual in place. Work runs on the pool; bookkeeping —
/// counters, the archive, memoization, the log — happens on the orchestrator
/// thread in agent order.
#[allow(clippy::too_many_arguments)]
fn descend_wave(
    pool: &rayon::ThreadPool,
    instance: &ProblemInstance,
    individuals: &mut [Individual],
    epsilon: f64,
    iteration: u32,
    cfg: &RunConfig,
    counters: &mut Counters,
    archive: &mut FrontArchive,
    memo: &mut HashMap<DescentKey, Arc<DescentReport>>,
    log: &mut Vec<DescentRecord>,
) -> Result<()> {
    let Some(max_flips) = wave_flip_cap(cfg, counters, individuals.len(), instance.dof()) else {
        return Ok(());
    };
    let budget = LocalSearchBudget {
        eps_loc: epsilon,
        max_flips,
    };

    // Plan: either a fresh job index or a memoized report per individual.
    enum Plan {
        Job(usize),
        Cached(Arc<DescentReport>),
    }
    let mut jobs: Vec<(usize, Genome, CompositeObjective)> = Vec::new();
    let mut job_for_key: HashMap<DescentKey, usize> = HashMap::new();
    let mut plans = Vec::with_capacity(individuals.len());
    for (agent, ind) in individuals.iter().enumerate() {
        let key = DescentKey::new(&ind.genome, &ind.weight, &budget);
        if cfg.memoize_descents {
            if let Some(report) = memo.get(&key) {
                plans.push(Plan::Cached(Arc::clone(report)));
                continue;
            }
            if let Some(&job) = job_for_key.get(&key) {
                plans.push(Plan::Job(job));
                continue;
            }
            job_for_key.insert(key, jobs.len());
        }
        plans.push(Plan::Job(jobs.len()));
        jobs.push((
            agent,
            ind.genome.clone(),
            CompositeObjective::new(ind.weight.clone()),
        ));
    }

    let reports: Vec<Result<DescentReport>> = pool.install(|| {
        jobs.par_iter()
            .map(|(_, genome, composite)| {
                let mut evaluator = flip_evaluator(&**instance, genome.clone());
                local_descent(evaluator.as_mut(), composite, &budget)
            })
            .collect()
    });

    let mut finished: Vec<Arc<DescentReport>> = Vec::with_capacity(reports.len());
    for ((agent, genome, composite), report) in jobs.iter().zip(reports) {
        let report = Arc::new(report?);
        counters.evaluations += report.candidate_evaluations;
        counters.perturbations += match cfg.counter_mode {
            CounterMode::Accepted => report.steps.len() as u64,
            CounterMode::Candidates => report.candidate_evaluations,
        };
        for step in &report.steps {
            archive.insert(Some(step.genome.clone()), step.objectives.clone());
        }
        // The endpoint is a locally optimal solution even when the descent
        // accepted no steps at all.
        archive.insert(Some(report.genome.clone()), report.objectives.clone());
        if cfg.record_descents {
            log.push(DescentRecord {
                iteration,
                agent: *agent,
                epsilon,
                start_composite: composite.value(&individuals[*agent].objectives),
                final_composite: report.composite,
                accepted_flips: report.steps.len() as u64,
                candidate_evaluations: report.candidate_evaluations,
                termination: report.termination,
            });
        }
        if cfg.memoize_descents {
            let key = DescentKey::new(genome, &individuals[*agent].weight, &budget);
            memo.insert(key, Arc::clone(&report));
        }
        finished.push(report);
    }

    for (ind, plan) in individuals.iter_mut().zip(plans) {
        let report = match plan {
            Plan::Job(j) => &finished[j],
            Plan::Cached(ref r) => r,
        };
        ind.genome = report.genome.clone();
        ind.objectives = report.objectives.clone();
    }
    Ok(())
}

fn budget_exhausted(cfg: &RunConfig, counters: &Counters) -> bool {
    if let Some(cap) = cfg.max_evaluations {
        if counters.evaluations >= cap {
            return true;
        }
    }
    if let Some(cap) = cfg.max_perturbations {
        if counters.perturbations >= cap {
            return true;
        }
    }
    false
}

/// The mutually nondominated objective vectors of a population snapshot.
fn population_front(population: &[Individual]) -> Vec<ObjectiveVector> {
    let objectives: Vec<ObjectiveVector> =
        population.iter().map(|i| i.objectives.clone()).collect();
    nondominated_filter(&objectives).objective_rows()
}

fn push_trace(
    trace: &mut Vec<TracePoint>,
    iteration: u32,
    rows: &[ObjectiveVector],
    nadir: &[f64],
    counters: &Counters,
    epsilon: f64,
) -> Result<()> {
    let hv = hypervolume(rows, nadir)?;
    trace.push(TracePoint {
        iteration,
        hypervolume: hv.value,
        n_nd: rows.len(),
        evaluations: counters.evaluations,
        perturbations: counters.perturbations,
        epsilon,
    });
    Ok(())
}

fn run_core(cfg: &RunConfig, enable_weights: bool, enable_local: bool) -> Result<RunResult> {
    let started = Instant::now();
    cfg.validate()?;
    let instance = cfg.problem.make_instance()?;
    cfg.validate_against(&instance, enable_weights)?;
    let m = instance.objective_count();
    let nadir = instance.reference_nadir();
    let pool = build_pool(cfg.threads)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut counters = Counters::default();
    let mut archive = FrontArchive::new();
    let mut memo = HashMap::new();
    let mut descents = Vec::new();

    // Initial population.
    let mask = instance.fixed_mask().clone();
    let genomes: Vec<Genome> = (0..cfg.agents)
        .map(|_| Genome::random(&mask, &mut rng))
        .collect();
    let objectives = evaluate_batch(&pool, &instance, &genomes, &mut counters);

    let mut weight_set = if enable_weights {
        Some(simplex_lattice(m, cfg.agents)?)
    } else {
        None
    };
    let mut population: Vec<Individual> = match &weight_set {
        Some(set) => {
            let perm = assign_weights(&objectives, set, cfg.orientation)?;
            genomes
                .into_iter()
                .zip(objectives)
                .enumerate()
                .map(|(i, (g, o))| Individual::new(g, o, set.get(perm[i]).clone()))
                .collect()
        }
        None => genomes
            .into_iter()
            .zip(objectives)
            .map(|(g, o)| Individual::new(g, o, WeightVector::uniform(m)))
            .collect(),
    };

    if enable_local {
        descend_wave(
            &pool,
            &instance,
            &mut population,
            cfg.eps.at(1),
            0,
            cfg,
            &mut counters,
            &mut archive,
            &mut memo,
            &mut descents,
        )?;
    }

    let mut trace = Vec::new();
    let mut iterations_executed = 0;
    for t in 1..=cfg.iterations {
        if budget_exhausted(cfg, &counters) {
            break;
        }
        if let Some(set) = &weight_set {
            let current: Vec<ObjectiveVector> =
                population.iter().map(|i| i.objectives.clone()).collect();
            weight_set = Some(update_weight_set(
                set,
                &current,
                &cfg.weight_params(),
                &mut rng,
            )?);
        }

        let children = make_offspring(&population, cfg, &mut rng)?;
        let child_objectives = evaluate_batch(&pool, &instance, &children, &mut counters);

        let mut offspring: Vec<Individual> = match &weight_set {
            Some(set) => {
                let perm = assign_weights(&child_objectives, set, cfg.orientation)?;
                children
                    .into_iter()
                    .zip(child_objectives)
                    .enumerate()
                    .map(|(i, (g, o))| Individual::new(g, o, set.get(perm[i]).clone()))
                    .collect()
            }
            None => children
                .into_iter()
                .zip(child_objectives)
                .map(|(g, o)| Individual::new(g, o, WeightVector::uniform(m)))
                .collect(),
        };

        let epsilon = if enable_local {
            let eps = cfg.eps.at(t);
            descend_wave(
                &pool,
                &instance,
                &mut offspring,
                eps,
                t,
                cfg,
                &mut counters,
                &mut archive,
                &mut memo,
                &mut descents,
            )?;
            eps
        } else {
            0.0
        };

        population = environmental_selection(population, offspring, cfg.agents)?;
        iterations_executed = t;
        // Memetic runs track the accumulated archive; the plain baseline has
        // nothing archived mid-run, so its trace follows the population front.
        let rows = if enable_local {
            archive.objective_rows()
        } else {
            population_front(&population)
        };
        push_trace(&mut trace, t, &rows, &nadir, &counters, epsilon)?;
    }

    for ind in &population {
        archive.insert(Some(ind.genome.clone()), ind.objectives.clone());
    }

    Ok(RunResult {
        archive,
        trace,
        descents,
        wall: started.elapsed(),
        seed: cfg.seed,
        evaluations: counters.evaluations,
        perturbations: counters.perturbations,
        iterations_executed,
    })
}

/// Fixed-weight single-objective baseline: `soga_sweep` lattice weights,
/// each optimized by an elitist memetic GA on the scalarized objective. The
/// result archives every locally optimized solution across the sweep plus
/// each sweep point's final population; traces from the sweep points are
/// concatenated.
pub fn run_soga_fw(cfg: &RunConfig) -> Result<RunResult> {
    let started = Instant::now();
    cfg.validate()?;
    let instance = cfg.problem.make_instance()?;
    cfg.validate_against(&instance, false)?;
    let m = instance.objective_count();
    let nadir = instance.reference_nadir();
    let pool = build_pool(cfg.threads)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sweep = simplex_lattice(m, cfg.soga_sweep)?;

    let divisor = match cfg.soga_budget {
        SogaBudget::FullPerPoint => 1,
        SogaBudget::SharedAcrossSweep => cfg.soga_sweep as u64,
    };
    let point_cfg = RunConfig {
        max_evaluations: cfg.max_evaluations.map(|c| c / divisor),
        max_perturbations: cfg.max_perturbations.map(|c| c / divisor),
        ..cfg.clone()
    };

    let mut archive = FrontArchive::new();
    let mut trace = Vec::new();
    let mut descents = Vec::new();
    let mut total = Counters::default();
    let mut iterations_executed = 0;
    let mask = instance.fixed_mask().clone();

    for j in 0..sweep.len() {
        let weight = sweep.get(j).clone();
        let mut counters = Counters::default();
        let mut memo = HashMap::new();

        let genomes: Vec<Genome> = (0..cfg.agents)
            .map(|_| Genome::random(&mask, &mut rng))
            .collect();
        let objectives = evaluate_batch(&pool, &instance, &genomes, &mut counters);
        let mut population: Vec<Individual> = genomes
            .into_iter()
            .zip(objectives)
            .map(|(g, o)| Individual::new(g, o, weight.clone()))
            .collect();
        descend_wave(
            &pool,
            &instance,
            &mut population,
            point_cfg.eps.at(1),
            0,
            &point_cfg,
            &mut counters,
            &mut archive,
            &mut memo,
            &mut descents,
        )?;

        for t in 1..=cfg.iterations {
            if budget_exhausted(&point_cfg, &counters) {
                break;
            }
            let children = make_offspring(&population, cfg, &mut rng)?;
            let child_objectives = evaluate_batch(&pool, &instance, &children, &mut counters);
            let mut offspring: Vec<Individual> = children
                .into_iter()
                .zip(child_objectives)
                .map(|(g, o)| Individual::new(g, o, weight.clone()))
                .collect();
            let eps = point_cfg.eps.at(t);
            descend_wave(
                &pool,
                &instance,
                &mut offspring,
                eps,
                t,
                &point_cfg,
                &mut counters,
                &mut archive,
                &mut memo,
                &mut descents,
            )?;

            // Elitist scalar selection: best `agents` of parents ∪ offspring
            // by composite value; the stable sort keeps parents on ties.
            population.extend(offspring);
            population.sort_by(|a, b| {
                weight
                    .composite(&a.objectives)
                    .total_cmp(&weight.composite(&b.objectives))
            });
            population.truncate(cfg.agents);

            iterations_executed += 1;
            let accumulated = Counters {
                evaluations: total.evaluations + counters.evaluations,
                perturbations: total.perturbations + counters.perturbations,
            };
            push_trace(
                &mut trace,
                iterations_executed,
                &archive.objective_rows(),
                &nadir,
                &accumulated,
                eps,
            )?;
        }

        for ind in &population {
            archive.insert(Some(ind.genome.clone()), ind.objectives.clone());
        }
        total.evaluations += counters.evaluations;
        total.perturbations += counters.perturbations;
    }

    Ok(RunResult {
        archive,
        trace,
        descents,
        wall: started.elapsed(),
        seed: cfg.seed,
        evaluations: total.evaluations,
        perturbations: total.perturbations,
        iterations_executed,
    })
}

/// Serialize a trace as CSV (one row per [`TracePoint`]).
pub fn write_trace_csv<W: std::io::Write>(trace: &[TracePoint], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for point in trace {
        out.serialize(point)?;
    }
    out.flush()?;
    Ok(())
}

/// Serialize a descent log as CSV (one row per [`DescentRecord`]).
pub fn write_descents_csv<W: std::io::Write>(log: &[DescentRecord], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for record in log {
        out.serialize(record)?;
    }
    out.flush()?;
    Ok(())
}

/// Min, lower quartile, median, upper quartile, max (linear interpolation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let position = q * (sorted.len() - 1) as f64;
    let lower = position.floor() as usize;
    let upper = position.ceil() as usize;
    sorted[lower] + (sorted[upper] - sorted[lower]) * (position - lower as f64)
}

/// Mean plus five-number summary of one statistic across repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub mean: f64,
    pub five: FiveNumber,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract(
                "aggregates need at least one finite value",
            ));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Aggregate {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            five: FiveNumber {
                min: sorted[0],
                q1: quantile(&sorted, 0.25),
                median: quantile(&sorted, 0.5),
                q3: quantile(&sorted, 0.75),
                max: sorted[sorted.len() - 1],
            },
        })
    }
}

/// Per-repetition statistics of a batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchRow {
    pub rep: usize,
    pub seed: u64,
    pub hypervolume: f64,
    /// Unique nondominated solutions found.
    pub n_nd: usize,
    /// Distance to the oracle front, when one is known.
    pub gd: Option<f64>,
    pub evaluations: u64,
    pub perturbations: u64,
    pub iterations: u32,
    pub wall_seconds: f64,
}

/// A batch of repetitions plus its aggregates.
#[derive(Debug)]
pub struct BatchReport {
    pub algorithm: Algorithm,
    pub rows: Vec<BatchRow>,
    pub results: Vec<RunResult>,
    pub hypervolume: Aggregate,
    pub n_nd: Aggregate,
    pub evaluations: Aggregate,
    pub gd: Option<Aggregate>,
}

/// Run `reps` repetitions with seeds `cfg.seed + r`, scoring each against
/// the instance reference nadir and — when available — `oracle` (or the
/// instance's own exact front).
pub fn run_batch(
    cfg: &RunConfig,
    reps: usize,
    oracle: Option<&[ObjectiveVector]>,
) -> Result<BatchReport> {
    if reps == 0 {
        return Err(Error::config("reps must be at least 1"));
    }
    let instance = cfg.problem.make_instance()?;
    let nadir = instance.reference_nadir();
    let own_oracle = instance.oracle_front();
    let truth: Option<Vec<ObjectiveVector>> =
        oracle.map(|o| o.to_vec()).or(own_oracle);

    let mut rows = Vec::with_capacity(reps);
    let mut results = Vec::with_capacity(reps);
    for rep in 0..reps {
        let mut rep_cfg = cfg.clone();
        rep_cfg.seed = cfg.seed.wrapping_add(rep as u64);
        let result = run(&rep_cfg)?;
        let hv = hypervolume(&result.archive.objective_rows(), &nadir)?;
        let gd = match &truth {
            Some(front) => Some(crate::metrics::generational_distance(
                &result.archive.objective_rows(),
                front,
            )?),
            None => None,
        };
        rows.push(BatchRow {
            rep,
            seed: rep_cfg.seed,
            hypervolume: hv.value,
            n_nd: result.archive.len(),
            gd,
            evaluations: result.evaluations,
            perturbations: result.perturbations,
            iterations: result.iterations_executed,
            wall_seconds: result.wall.as_secs_f64(),
        });
        results.push(result);
    }

    let collect = |f: &dyn Fn(&BatchRow) -> f64| -> Vec<f64> { rows.iter().map(f).collect() };
    let gd = if rows.iter().all(|r| r.gd.is_some()) {
        Some(Aggregate::of(&collect(&|r| r.gd.unwrap()))?)
    } else {
        None
    };
    Ok(BatchReport {
        algorithm: cfg.algorithm,
        hypervolume: Aggregate::of(&collect(&|r| r.hypervolume))?,
        n_nd: Aggregate::of(&collect(&|r| r.n_nd as f64))?,
        evaluations: Aggregate::of(&collect(&|r| r.evaluations as f64))?,
        gd,
        rows,
        results,
    })
}

/// Serialize batch rows as CSV.
pub fn write_batch_csv<W: std::io::Write>(rows: &[BatchRow], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(algorithm: Algorithm) -> RunConfig {
        RunConfig {
            algorithm,
            problem: ProblemSpec::lotz(8),
            agents: 16,
            iterations: 8,
            threads: 1,
            seed: 42,
            ..RunConfig::default()
        }
    }

    fn archive_bytes(result: &RunResult) -> Vec<u8> {
        let mut buffer = Vec::new();
        result.archive.write_csv(&mut buffer).unwrap();
        buffer
    }

    #[test]
    fn baseline_does_no_descent_work_and_counts_exactly() {
        let cfg = small(Algorithm::Nsga2);
        let result = run(&cfg).unwrap();
        assert_eq!(result.perturbations, 0);
        assert_eq!(
            result.evaluations,
            (cfg.agents as u64) * (1 + cfg.iterations as u64)
        );
        assert_eq!(result.trace.len(), cfg.iterations as usize);
        assert!(result.trace.iter().all(|p| p.epsilon == 0.0));
    }

    #[test]
    fn same_seed_same_result_regardless_of_threads() {
        let mut cfg = small(Algorithm::MomaAw);
        let one = run(&cfg).unwrap();
        cfg.threads = 4;
        let four = run(&cfg).unwrap();
        assert_eq!(archive_bytes(&one), archive_bytes(&four));
        assert_eq!(one.trace, four.trace);
        assert_eq!(one.evaluations, four.evaluations);
        assert_eq!(one.perturbations, four.perturbations);
        // And a plain repeat is also identical.
        let again = run(&cfg).unwrap();
        assert_eq!(archive_bytes(&four), archive_bytes(&again));
    }

    #[test]
    fn zero_iterations_still_refines_the_initial_population() {
        let mut cfg = small(Algorithm::MomaAw);
        cfg.iterations = 0;
        let result = run(&cfg).unwrap();
        assert!(result.trace.is_empty());
        assert_eq!(result.iterations_executed, 0);
        assert!(!result.archive.is_empty());
        assert!(result.perturbations > 0, "initial descents must run");
    }

    #[test]
    fn full_machine_recovers_the_complete_small_front() {
        let mut cfg = small(Algorithm::MomaAw);
        cfg.agents = 32;
        cfg.iterations = 10;
        cfg.seed = 3;
        let result = run(&cfg).unwrap();
        let oracle = ProblemSpec::lotz(8)
            .make_instance()
            .unwrap()
            .oracle_front()
            .unwrap();
        assert_eq!(result.archive.len(), oracle.len());
        let gd = crate::metrics::generational_distance(
            &result.archive.objective_rows(),
            &oracle,
        )
        .unwrap();
        assert_eq!(gd, 0.0);
    }

    #[test]
    fn archive_hypervolume_trace_never_decreases() {
        let result = run(&small(Algorithm::MomaAw)).unwrap();
        for window in result.trace.windows(2) {
            assert!(window[1].hypervolume >= window[0].hypervolume);
            assert!(window[1].evaluations >= window[0].evaluations);
        }
    }

    #[test]
    fn fixed_bits_stay_active_through_a_whole_run() {
        let mut cfg = small(Algorithm::MomaAw);
        cfg.problem = ProblemSpec::resonator(4, 2, 5);
        cfg.agents = 8;
        cfg.iterations = 3;
        let result = run(&cfg).unwrap();
        let instance = cfg.problem.make_instance().unwrap();
        let mask = instance.fixed_mask();
        let fixed: Vec<usize> = (0..instance.dof()).filter(|&i| mask.is_fixed(i)).collect();
        assert_eq!(fixed.len(), 1);
        for entry in result.archive.entries() {
            let genome = entry.genome.as_ref().expect("engine archives genomes");
            for &i in &fixed {
                assert!(genome.is_active(i));
            }
        }
    }

    #[test]
    fn two_point_sweep_reaches_both_extremes() {
        let mut cfg = small(Algorithm::SogaFw);
        cfg.soga_sweep = 2;
        cfg.iterations = 6;
        let result = run(&cfg).unwrap();
        let rows = result.archive.objective_rows();
        assert!(rows.iter().any(|p| p[0] == 0.0), "all-ones extreme");
        assert!(rows.iter().any(|p| p[1] == 0.0), "all-zeros extreme");
    }

    #[test]
    fn evaluation_cap_stops_runs_early() {
        let mut cfg = small(Algorithm::MomaAw);
        cfg.iterations = 50;
        cfg.max_evaluations = Some(200);
        let result = run(&cfg).unwrap();
        assert!(result.iterations_executed < 50);
        assert_eq!(result.trace.len(), result.iterations_executed as usize);
        assert!(result.evaluations >= 200, "cap applies at iteration edges");
    }

    #[test]
    fn perturbation_cap_limits_descent_work() {
        let mut cfg = small(Algorithm::MomaAw);
        cfg.iterations = 30;
        cfg.max_perturbations = Some(40);
        let result = run(&cfg).unwrap();
        // Waves prorate the remainder, so the overshoot stays below one
        // flip per agent.
        assert!(result.perturbations < 40 + cfg.agents as u64);
    }

    #[test]
    fn memoization_changes_cost_but_not_results() {
        let mut cfg = small(Algorithm::MomaAw);
        let plain = run(&cfg).unwrap();
        cfg.memoize_descents = true;
        let memoized = run(&cfg).unwrap();
        assert_eq!(archive_bytes(&plain), archive_bytes(&memoized));
        assert!(memoized.evaluations <= plain.evaluations);
    }

    #[test]
    fn descent_log_is_opt_in_and_complete() {
        let mut cfg = small(Algorithm::MomaAw);
        let silent = run(&cfg).unwrap();
        assert!(silent.descents.is_empty());
        cfg.record_descents = true;
        let logged = run(&cfg).unwrap();
        // One record per executed descent: the initial wave plus one wave
        // per iteration, 16 agents each.
        assert_eq!(
            logged.descents.len(),
            cfg.agents * (1 + cfg.iterations as usize)
        );
        assert!(logged
            .descents
            .iter()
            .all(|d| d.final_composite <= d.start_composite));
        let mut buffer = Vec::new();
        write_descents_csv(&logged.descents, &mut buffer).unwrap();
        assert!(String::from_utf8(buffer).unwrap().starts_with("iteration,"));
    }

    #[test]
    fn config_validation_names_the_offending_key() {
        let mut cfg = small(Algorithm::MomaAw);
        cfg.mutation_probability = 1.5;
        let err = run(&cfg).unwrap_err().to_string();
        assert!(err.contains("mutation_probability"), "{err}");

        let mut cfg = small(Algorithm::MomaAw);
        cfg.crossover_points = 8; // genome length for lotz(8)
        let err = run(&cfg).unwrap_err().to_string();
        assert!(err.contains("crossover_points"), "{err}");

        let mut cfg = small(Algorithm::MomaAw);
        cfg.problem = ProblemSpec::resonator(4, 2, 1);
        cfg.agents = 2;
        let err = run(&cfg).unwrap_err().to_string();
        assert!(err.contains("agents"), "{err}");
    }

    #[test]
    fn batch_aggregates_cover_every_rep() {
        let mut cfg = small(Algorithm::MomaAw);
        cfg.agents = 16;
        cfg.iterations = 5;
        let report = run_batch(&cfg, 3, None).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert_eq!(report.results.len(), 3);
        let seeds: Vec<u64> = report.rows.iter().map(|r| r.seed).collect();
        assert_eq!(seeds, vec![42, 43, 44]);
        let gd = report.gd.expect("the 8-bit problem has an exact front");
        assert!(gd.mean >= 0.0);
        assert!(report.hypervolume.five.min <= report.hypervolume.five.max);
        let mut buffer = Vec::new();
        write_batch_csv(&report.rows, &mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert_eq!(text.lines().count(), 4, "header plus one row per rep");
    }

    #[test]
    fn aggregate_five_number_matches_hand_computation() {
        let agg = Aggregate::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(agg.mean, 2.5);
        assert_eq!(agg.five.min, 1.0);
        assert_eq!(agg.five.q1, 1.75);
        assert_eq!(agg.five.median, 2.5);
        assert_eq!(agg.five.q3, 3.25);
        assert_eq!(agg.five.max, 4.0);
    }

    #[test]
    fn algorithm_labels_round_trip() {
        for algorithm in [Algorithm::MomaAw, Algorithm::SogaFw, Algorithm::Nsga2] {
            let parsed: Algorithm = algorithm.label().parse().unwrap();
            assert_eq!(parsed, algorithm);
        }
        assert!("nsga-iii".parse::<Algorithm>().is_err());
    }
}
