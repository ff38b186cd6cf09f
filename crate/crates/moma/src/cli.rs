//! Command-line front end: experiment files, flag resolution, and the
//! `run` / `compare` / `metrics` subcommands.
//!
//! Resolution order for every setting: built-in defaults, then the
//! experiment file, then environment (`MOMA_THREADS`, thread count only),
//! then command-line flags. The resolved experiment is echoed next to the
//! results as both TOML and JSON, and the echo parses back to the exact
//! configuration that ran.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::engine::{
    run_batch, write_batch_csv, write_descents_csv, write_trace_csv, Algorithm, BatchReport,
    RunConfig,
};
use crate::error::Error;
use crate::metrics::{
    generational_distance, hypervolume, nondominated_filter, FrontArchive,
};
use crate::moea::ObjectiveVector;
use crate::Result;

/// Name of the environment variable supplying the default worker count.
pub const THREADS_ENV: &str = "MOMA_THREADS";

/// A complete experiment: how many repetitions of which algorithms, where
/// the outputs go, and the full run configuration under `[run]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Repetitions per algorithm; repetition `r` runs with `seed + r`.
    pub reps: usize,
    /// Output directory.
    pub out: PathBuf,
    /// Optional oracle front CSV used for generational distance.
    pub oracle: Option<PathBuf>,
    /// Algorithms for `compare`; `run` uses `run.algorithm`.
    pub algorithms: Vec<Algorithm>,
    pub run: RunConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            reps: 1,
            out: PathBuf::from("moma-out"),
            oracle: None,
            algorithms: vec![Algorithm::MomaAw, Algorithm::SogaFw, Algorithm::Nsga2],
            run: RunConfig::default(),
        }
    }
}

impl ExperimentSpec {
    /// Parse a TOML experiment. Missing keys take defaults, so the empty
    /// string resolves to the standard setting; unknown keys are rejected.
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec =
            toml::from_str(text).map_err(|e| Error::config(format!("experiment file: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Serialize so that [`ExperimentSpec::from_toml`] reproduces `self`.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config(format!("echoing config: {e}")))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::config(format!("echoing config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::config("reps must be at least 1"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::config(
                "algorithms must name at least one algorithm",
            ));
        }
        self.run.validate()
    }
}

/// Flags shared by `run` and `compare`. Every flag overrides the
/// corresponding experiment-file key.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML experiment file; missing keys take built-in defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Algorithm to run (moma-aw, soga-fw, nsga2).
    #[arg(long)]
    pub algorithm: Option<Algorithm>,
    /// Base seed; repetition `r` uses `seed + r`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Repetitions per algorithm.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 means the machine default.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Print the fully resolved experiment and exit without running or
    /// writing anything.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Front CSV to score (as written by `run`).
    #[arg(long)]
    pub front: PathBuf,
    /// Oracle front CSV; enables generational distance.
    #[arg(long)]
    pub oracle: Option<PathBuf>,
    /// Hypervolume reference as comma-separated values, e.g. `16,16`.
    #[arg(long)]
    pub nadir: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute one algorithm and write fronts, traces, and config echoes.
    Run(CommonArgs),
    /// Run several algorithms with shared seeds and summarize side by side.
    Compare(CommonArgs),
    /// Score an existing front CSV.
    Metrics(MetricsArgs),
}

/// Multi-objective memetic optimization on binary genomes.
#[derive(Debug, Parser)]
#[command(name = "moma", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Merge defaults, the experiment file, the environment-supplied thread
/// count, and flags — in that order of increasing precedence.
pub fn resolve(args: &CommonArgs, env_threads: Option<usize>) -> Result<ExperimentSpec> {
    let mut spec = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::config(format!("reading {}: {e}", path.display()))
            })?;
            ExperimentSpec::from_toml(&text)?
        }
        None => ExperimentSpec::default(),
    };
    // threads = 0 means "use the default", and the environment defines the
    // session default; an explicit nonzero file value wins over it.
    if spec.run.threads == 0 {
        if let Some(n) = env_threads {
            spec.run.threads = n;
        }
    }
    if let Some(a) = args.algorithm {
        spec.run.algorithm = a;
        spec.algorithms = vec![a];
    }
    if let Some(seed) = args.seed {
        spec.run.seed = seed;
    }
    if let Some(reps) = args.reps {
        spec.reps = reps;
    }
    if let Some(out) = &args.out {
        spec.out = out.clone();
    }
    if let Some(threads) = args.threads {
        spec.run.threads = threads;
    }
    spec.validate()?;
    Ok(spec)
}

fn env_threads() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(value) => value
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::config(format!("{THREADS_ENV} must be an integer, got '{value}'"))),
        Err(_) => Ok(None),
    }
}

fn load_oracle(spec: &ExperimentSpec) -> Result<Option<Vec<ObjectiveVector>>> {
    match &spec.oracle {
        Some(path) => {
            let file = fs::File::open(path)
                .map_err(|e| Error::config(format!("reading {}: {e}", path.display())))?;
            Ok(Some(FrontArchive::read_csv(file)?.objective_rows()))
        }
        None => Ok(None),
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, bytes)?;
    Ok(path)
}

fn echo_config(spec: &ExperimentSpec, dir: &Path) -> Result<()> {
    write_file(dir, "config_echo.toml", spec.to_toml()?.as_bytes())?;
    write_file(dir, "config_echo.json", spec.to_json()?.as_bytes())?;
    Ok(())
}

fn write_batch_outputs(
    report: &BatchReport,
    spec: &ExperimentSpec,
    dir: &Path,
    prefix: &str,
    stdout: &mut dyn Write,
) -> Result<()> {
    for (rep, result) in report.results.iter().enumerate() {
        let mut front = Vec::new();
        result.archive.write_csv(&mut front)?;
        write_file(dir, &format!("{prefix}front_run{rep}.csv"), &front)?;
        let mut trace = Vec::new();
        write_trace_csv(&result.trace, &mut trace)?;
        write_file(dir, &format!("{prefix}trace_run{rep}.csv"), &trace)?;
        if spec.run.record_descents {
            let mut log = Vec::new();
            write_descents_csv(&result.descents, &mut log)?;
            write_file(dir, &format!("{prefix}descents_run{rep}.csv"), &log)?;
        }
    }
    let mut batch = Vec::new();
    write_batch_csv(&report.rows, &mut batch)?;
    write_file(dir, &format!("{prefix}batch.csv"), &batch)?;

    for row in &report.rows {
        let gd = row
            .gd
            .map(|g| format!(", gd={g}"))
            .unwrap_or_default();
        writeln!(
            stdout,
            "{} rep {} (seed {}): hypervolume={}, n_nd={}, evaluations={}{gd}",
            report.algorithm, row.rep, row.seed, row.hypervolume, row.n_nd, row.evaluations
        )?;
    }
    let gd = report
        .gd
        .as_ref()
        .map(|g| format!(", mean gd={}", g.mean))
        .unwrap_or_default();
    writeln!(
        stdout,
        "{}: mean hypervolume={} (best {}), mean n_nd={}, mean evaluations={}{gd}",
        report.algorithm,
        report.hypervolume.mean,
        report.hypervolume.five.max,
        report.n_nd.mean,
        report.evaluations.mean
    )?;
    Ok(())
}

/// `moma run`: one algorithm, `reps` repetitions.
pub fn cmd_run(args: &CommonArgs, stdout: &mut dyn Write) -> Result<()> {
    let spec = resolve(args, env_threads()?)?;
    if args.dry_run {
        writeln!(stdout, "{}", spec.to_toml()?)?;
        return Ok(());
    }
    fs::create_dir_all(&spec.out)?;
    echo_config(&spec, &spec.out)?;
    let oracle = load_oracle(&spec)?;
    let report = run_batch(&spec.run, spec.reps, oracle.as_deref())?;
    write_batch_outputs(&report, &spec, &spec.out, "", stdout)?;
    writeln!(stdout, "wrote results to {}", spec.out.display())?;
    Ok(())
}

/// `moma compare`: every algorithm in the experiment, identical seeds.
pub fn cmd_compare(args: &CommonArgs, stdout: &mut dyn Write) -> Result<()> {
    let spec = resolve(args, env_threads()?)?;
    if args.dry_run {
        writeln!(stdout, "{}", spec.to_toml()?)?;
        return Ok(());
    }
    fs::create_dir_all(&spec.out)?;
    echo_config(&spec, &spec.out)?;
    let oracle = load_oracle(&spec)?;

    #[derive(Serialize)]
    struct CompareRow {
        algorithm: &'static str,
        mean_hypervolume: f64,
        best_hypervolume: f64,
        mean_n_nd: f64,
        mean_gd: Option<f64>,
        mean_evaluations: f64,
    }
    let mut summary = Vec::new();
    for &algorithm in &spec.algorithms {
        let mut cfg = spec.run.clone();
        cfg.algorithm = algorithm;
        let report = run_batch(&cfg, spec.reps, oracle.as_deref())?;
        let prefix = format!("{}_", algorithm.label());
        write_batch_outputs(&report, &spec, &spec.out, &prefix, stdout)?;
        summary.push(CompareRow {
            algorithm: algorithm.label(),
            mean_hypervolume: report.hypervolume.mean,
            best_hypervolume: report.hypervolume.five.max,
            mean_n_nd: report.n_nd.mean,
            mean_gd: report.gd.as_ref().map(|g| g.mean),
            mean_evaluations: report.evaluations.mean,
        });
    }
    let mut out = csv::Writer::from_writer(Vec::new());
    for row in &summary {
        out.serialize(row)?;
    }
    let bytes = out
        .into_inner()
        .map_err(|e| Error::config(format!("summary: {e}")))?;
    write_file(&spec.out, "compare_summary.csv", &bytes)?;
    writeln!(stdout, "wrote comparison to {}", spec.out.display())?;
    Ok(())
}

/// `moma metrics`: score a front CSV without running anything.
pub fn cmd_metrics(args: &MetricsArgs, stdout: &mut dyn Write) -> Result<()> {
    let file = fs::File::open(&args.front)
        .map_err(|e| Error::config(format!("reading {}: {e}", args.front.display())))?;
    let front = FrontArchive::read_csv(file)?;
    let rows = front.objective_rows();
    let filtered = nondominated_filter(&rows);
    writeln!(stdout, "points={}", rows.len())?;
    writeln!(stdout, "n_nd={}", filtered.len())?;
    let (lo, hi) = filtered.bounds()?;
    writeln!(stdout, "utopian={lo:?}")?;
    writeln!(stdout, "nadir={hi:?}")?;

    if let Some(path) = &args.oracle {
        let file = fs::File::open(path)
            .map_err(|e| Error::config(format!("reading {}: {e}", path.display())))?;
        let oracle = FrontArchive::read_csv(file)?.objective_rows();
        let gd = generational_distance(&rows, &oracle)?;
        writeln!(stdout, "gd={gd}")?;
    }
    if let Some(nadir) = &args.nadir {
        let reference: Vec<f64> = nadir
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::config(format!("nadir component '{s}': {e}")))
            })
            .collect::<Result<_>>()?;
        let hv = hypervolume(&rows, &reference)?;
        writeln!(stdout, "hypervolume={}", hv.value)?;
        if hv.excluded > 0 {
            writeln!(stdout, "excluded={}", hv.excluded)?;
        }
    }
    Ok(())
}

/// Entry point for the binary: parse, dispatch, map errors to exit code 1.
pub fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout();
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args, &mut stdout),
        Command::Compare(args) => cmd_compare(args, &mut stdout),
        Command::Metrics(args) => cmd_metrics(args, &mut stdout),
    };
    match outcome {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::ProblemSpec;

    #[test]
    fn empty_experiment_is_the_standard_setting() {
        let spec = ExperimentSpec::from_toml("").unwrap();
        assert_eq!(spec, ExperimentSpec::default());
        assert_eq!(spec.run.agents, 64);
        assert_eq!(spec.run.iterations, 40);
        assert_eq!(spec.run.mutation_probability, 1.0);
        assert_eq!(spec.run.crossover_probability, 0.9);
    }

    #[test]
    fn echo_round_trips_exactly() {
        let mut spec = ExperimentSpec::default();
        spec.reps = 5;
        spec.run.problem = ProblemSpec::knapsack(20, 7);
        spec.run.agents = 32;
        spec.run.max_evaluations = Some(10_000);
        spec.run.eps = crate::localsearch::EpsSchedule::Constant { eps: 1e-4 };
        spec.oracle = Some(PathBuf::from("oracle.csv"));
        let echoed = spec.to_toml().unwrap();
        let back = ExperimentSpec::from_toml(&echoed).unwrap();
        assert_eq!(back, spec);
        let twice = back.to_toml().unwrap();
        assert_eq!(echoed, twice);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let err = ExperimentSpec::from_toml("turbo = true").unwrap_err().to_string();
        assert!(err.contains("turbo"), "{err}");
        let err = ExperimentSpec::from_toml("[run]\nwarp_factor = 9")
            .unwrap_err()
            .to_string();
        assert!(err.contains("warp_factor"), "{err}");
    }

    #[test]
    fn out_of_range_values_name_key_and_range() {
        let err = ExperimentSpec::from_toml("[run]\nmutation_probability = 2.0")
            .unwrap_err()
            .to_string();
        assert!(err.contains("mutation_probability") && err.contains("[0, 1]"), "{err}");
    }

    #[test]
    fn flags_override_file_which_overrides_environment() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        fs::write(&path, "reps = 2\n[run]\nseed = 5\n").unwrap();
        let args = CommonArgs {
            config: Some(path.clone()),
            seed: Some(9),
            reps: None,
            ..CommonArgs::default()
        };
        let spec = resolve(&args, Some(4)).unwrap();
        assert_eq!(spec.run.seed, 9, "flag beats file");
        assert_eq!(spec.reps, 2, "file beats default");
        assert_eq!(spec.run.threads, 4, "environment fills the default");

        fs::write(&path, "[run]\nthreads = 2\n").unwrap();
        let args = CommonArgs {
            config: Some(path.clone()),
            ..CommonArgs::default()
        };
        assert_eq!(resolve(&args, Some(4)).unwrap().run.threads, 2, "file beats env");
        let args = CommonArgs {
            config: Some(path),
            threads: Some(8),
            ..CommonArgs::default()
        };
        assert_eq!(resolve(&args, Some(4)).unwrap().run.threads, 8, "flag beats all");
    }

    #[test]
    fn algorithm_flag_narrows_compare() {
        let args = CommonArgs {
            algorithm: Some(Algorithm::Nsga2),
            ..CommonArgs::default()
        };
        let spec = resolve(&args, None).unwrap();
        assert_eq!(spec.algorithms, vec![Algorithm::Nsga2]);
        assert_eq!(spec.run.algorithm, Algorithm::Nsga2);
    }

    #[test]
    fn dry_run_prints_the_resolved_config_and_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("results");
        let args = CommonArgs {
            out: Some(out.clone()),
            dry_run: true,
            ..CommonArgs::default()
        };
        let mut stdout = Vec::new();
        cmd_run(&args, &mut stdout).unwrap();
        assert!(!out.exists(), "dry run must not create the out dir");
        let text = String::from_utf8(stdout).unwrap();
        assert!(text.contains("[run]"));
        let echoed = ExperimentSpec::from_toml(&text).unwrap();
        assert_eq!(echoed.out, out);
    }

    #[test]
    fn run_writes_fronts_traces_batch_and_echoes() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("results");
        let path = dir.path().join("exp.toml");
        fs::write(
            &path,
            "reps = 2\n[run]\nagents = 16\niterations = 3\nthreads = 1\n[run.problem]\nname = \"lotz\"\ndims = [8]\n",
        )
        .unwrap();
        let args = CommonArgs {
            config: Some(path),
            out: Some(out.clone()),
            ..CommonArgs::default()
        };
        let mut stdout = Vec::new();
        cmd_run(&args, &mut stdout).unwrap();
        for name in [
            "config_echo.toml",
            "config_echo.json",
            "front_run0.csv",
            "front_run1.csv",
            "trace_run0.csv",
            "trace_run1.csv",
            "batch.csv",
        ] {
            assert!(out.join(name).exists(), "missing {name}");
        }
        let front =
            FrontArchive::read_csv(fs::File::open(out.join("front_run0.csv")).unwrap()).unwrap();
        assert!(!front.is_empty());
        let echoed =
            ExperimentSpec::from_toml(&fs::read_to_string(out.join("config_echo.toml")).unwrap())
                .unwrap();
        assert_eq!(echoed.run.agents, 16);
        let text = String::from_utf8(stdout).unwrap();
        assert!(text.contains("gd=0"), "the 8-bit front is reachable: {text}");
    }

    #[test]
    fn compare_writes_one_summary_row_per_algorithm() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("results");
        let path = dir.path().join("exp.toml");
        fs::write(
            &path,
            "reps = 1\nalgorithms = [\"moma-aw\", \"nsga2\"]\n[run]\nagents = 16\niterations = 3\nthreads = 1\n[run.problem]\nname = \"lotz\"\ndims = [8]\n",
        )
        .unwrap();
        let args = CommonArgs {
            config: Some(path),
            out: Some(out.clone()),
            ..CommonArgs::default()
        };
        let mut stdout = Vec::new();
        cmd_compare(&args, &mut stdout).unwrap();
        let summary = fs::read_to_string(out.join("compare_summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 3, "header + two algorithms");
        assert!(summary.contains("moma-aw") && summary.contains("nsga2"));
        assert!(out.join("moma-aw_front_run0.csv").exists());
        assert!(out.join("nsga2_front_run0.csv").exists());
    }

    #[test]
    fn metrics_scores_a_front_against_itself() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("front.csv");
        let mut archive = FrontArchive::new();
        archive.insert_point(vec![0.0, 8.0].into());
        archive.insert_point(vec![8.0, 0.0].into());
        archive.insert_point(vec![4.0, 4.0].into());
        let mut bytes = Vec::new();
        archive.write_csv(&mut bytes).unwrap();
        fs::write(&path, &bytes).unwrap();
        let args = MetricsArgs {
            front: path.clone(),
            oracle: Some(path),
            nadir: Some("9,9".into()),
        };
        let mut stdout = Vec::new();
        cmd_metrics(&args, &mut stdout).unwrap();
        let text = String::from_utf8(stdout).unwrap();
        assert!(text.contains("n_nd=3"), "{text}");
        assert!(text.contains("gd=0"), "{text}");
        assert!(text.contains("hypervolume="), "{text}");
    }
}
