//! The `ctt` command line: `solve`, `train` and `report`.
//!
//! Exit codes: 0 success, 1 input error, 2 infeasible best effort, 64 usage.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{DatasetHeader, DatasetLog, DatasetWriter};
use crate::evaluation::Label;
use crate::ga::{self, EvaluationSink, GaConfig, NullSink};
use crate::instance::Instance;
use crate::metrics::{self, Mode, ProtocolConfig};
use crate::surrogate::Task;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Usage(_) => EXIT_USAGE,
        }
    }
}

fn input(context: impl std::fmt::Display, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{context}: {e}"))
}

#[derive(Debug, Parser)]
#[command(
    name = "ctt",
    version,
    about = "Course timetabling by genetic algorithm, with surrogate evaluators"
)]
pub struct Cli {
    /// TOML file with [ga] and [protocol] tables; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for fitness evaluation.
    #[arg(long, global = true, env = "TT_THREADS")]
    pub threads: Option<usize>,
    /// Where to write the run manifest.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Increase log verbosity.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve an instance and log every soft-stage evaluation.
    Solve(SolveArgs),
    /// Run the batch protocol on a dataset and save the final model.
    Train(TrainArgs),
    /// Merge report files into one table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub lambda: Option<usize>,
    #[arg(long)]
    pub cxpb: Option<f64>,
    #[arg(long)]
    pub mutpb: Option<f64>,
    #[arg(long)]
    pub tournament: Option<usize>,
    #[arg(long = "max-evals")]
    pub max_evals: Option<u64>,
    #[arg(long)]
    pub target: Option<u64>,
    /// Stagnant generations before switching move type.
    #[arg(long)]
    pub switch: Option<usize>,
    /// Stagnant generations before stopping.
    #[arg(long)]
    pub stop: Option<usize>,
    #[arg(long = "out-solution")]
    pub out_solution: PathBuf,
    /// Dataset CSV; gzip-compressed when the name ends in .gz.
    #[arg(long = "out-dataset")]
    pub out_dataset: Option<PathBuf>,
    #[arg(long = "out-trace")]
    pub out_trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaskArg {
    Regression,
    Classification,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Regression => Task::Regression,
            TaskArg::Classification => Task::Classification,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Traditional,
    Incremental,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Traditional => Mode::Traditional,
            ModeArg::Incremental => Mode::Incremental,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub task: TaskArg,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    #[arg(long = "batch-size")]
    pub batch_size: Option<usize>,
    /// Training fraction of each batch.
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub eta0: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "out-model")]
    pub out_model: PathBuf,
    #[arg(long = "out-report")]
    pub out_report: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    ga: GaConfig,
    protocol: ProtocolConfig,
    threads: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub inputs: Vec<Artifact>,
    pub seed: Option<u64>,
    pub seed_source: String,
    pub config: serde_json::Value,
    pub overrides: serde_json::Map<String, serde_json::Value>,
    pub threads: usize,
    pub outputs: Vec<Artifact>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub exit_code: i32,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn artifact(path: &Path) -> Result<Artifact, CliError> {
    let bytes = fs::read(path).map_err(|e| input(path.display(), e))?;
    Ok(Artifact {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
        bytes: bytes.len() as u64,
    })
}

fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| input("manifest", e))?;
    fs::write(path, text + "\n").map_err(|e| input(path.display(), e))
}

fn manifest_path(explicit: &Option<PathBuf>, primary: &Path) -> PathBuf {
    explicit.clone().unwrap_or_else(|| {
        let mut name = primary.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    })
}

struct Loaded {
    file: FileConfig,
    seed_in_file: bool,
    input: Option<Artifact>,
}

fn load_config(path: &Option<PathBuf>) -> Result<Loaded, CliError> {
    let Some(path) = path else {
        return Ok(Loaded {
            file: FileConfig::default(),
            seed_in_file: false,
            input: None,
        });
    };
    let text = fs::read_to_string(path).map_err(|e| input(path.display(), e))?;
    let table: toml::Table = text.parse().map_err(|e| input(path.display(), e))?;
    let seed_in_file = table.get("ga").and_then(|g| g.get("rng_seed")).is_some();
    let file: FileConfig = toml::from_str(&text).map_err(|e| input(path.display(), e))?;
    Ok(Loaded {
        file,
        seed_in_file,
        input: Some(artifact(path)?),
    })
}

fn auto_seed() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0)
}

struct Overrides(serde_json::Map<String, serde_json::Value>);

impl Overrides {
    fn apply<T: Copy + Into<serde_json::Value>>(
        &mut self,
        name: &str,
        flag: Option<T>,
        target: &mut T,
    ) {
        if let Some(v) = flag {
            *target = v;
            self.0.insert(name.to_owned(), v.into());
        }
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(&cli, a),
        Command::Train(a) => cmd_train(&cli, a),
        Command::Report(a) => cmd_report(&cli, a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

enum Sink {
    File(DatasetWriter<crate::dataset::FileSink>),
    None(NullSink),
}

impl EvaluationSink for Sink {
    fn record(
        &mut self,
        stage: crate::evaluation::Stage,
        genes: &[usize],
        fitness: u64,
        label: Label,
    ) -> Result<(), crate::dataset::DatasetError> {
        match self {
            Sink::File(w) => w.record(stage, genes, fitness, label),
            Sink::None(n) => n.record(stage, genes, fitness, label),
        }
    }
}

pub fn cmd_solve(cli: &Cli, args: &SolveArgs) -> Result<i32, CliError> {
    let started = now();
    let loaded = load_config(&cli.config)?;
    let text = fs::read_to_string(&args.instance).map_err(|e| input(args.instance.display(), e))?;
    let instance = Instance::parse(&text).map_err(|e| input(args.instance.display(), e))?;

    let mut config = loaded.file.ga;
    let mut o = Overrides(serde_json::Map::new());
    o.apply(
        "population_size",
        args.population,
        &mut config.population_size,
    );
    o.apply("offspring_count", args.lambda, &mut config.offspring_count);
    o.apply(
        "crossover_probability",
        args.cxpb,
        &mut config.crossover_probability,
    );
    o.apply(
        "mutation_probability",
        args.mutpb,
        &mut config.mutation_probability,
    );
    o.apply(
        "tournament_size",
        args.tournament,
        &mut config.tournament_size,
    );
    o.apply(
        "max_evaluations",
        args.max_evals,
        &mut config.max_evaluations,
    );
    o.apply(
        "non_improving_switch",
        args.switch,
        &mut config.non_improving_switch,
    );
    o.apply(
        "stop_non_improving",
        args.stop,
        &mut config.stop_non_improving,
    );
    if let Some(t) = args.target {
        config.target_fitness = Some(t);
        o.0.insert("target_fitness".into(), t.into());
    }
    let seed_source = if args.seed.is_some() {
        "flag"
    } else if loaded.seed_in_file {
        "config"
    } else {
        config.rng_seed = auto_seed();
        "generated"
    };
    o.apply("rng_seed", args.seed, &mut config.rng_seed);
    config.threads = cli.threads.or(loaded.file.threads).unwrap_or(1);
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let mut sink = match &args.out_dataset {
        Some(path) => {
            let header = DatasetHeader {
                instance: instance.name().to_owned(),
                n_features: instance.num_events(),
                n_alleles: Some(instance.num_room_period_pairs()),
            };
            Sink::File(DatasetWriter::create(path, header).map_err(|e| input(path.display(), e))?)
        }
        None => Sink::None(NullSink),
    };
    let solution =
        ga::solve(&instance, &config, &mut sink).map_err(|e| input(args.instance.display(), e))?;

    let mut outputs = Vec::new();
    fs::write(
        &args.out_solution,
        solution.timetable.to_solution_text(&instance),
    )
    .map_err(|e| input(args.out_solution.display(), e))?;
    outputs.push(artifact(&args.out_solution)?);
    if let Sink::File(w) = sink {
        let path = args.out_dataset.as_ref().expect("file sink has a path");
        w.close().map_err(|e| input(path.display(), e))?;
        outputs.push(artifact(path)?);
    }
    if let Some(path) = &args.out_trace {
        fs::write(path, solution.trace.to_csv()).map_err(|e| input(path.display(), e))?;
        outputs.push(artifact(path)?);
    }

    let r = &solution.report;
    println!(
        "{} fitness={} hard={} soft={} evaluations={}",
        solution.label,
        solution.fitness,
        r.hard_total(),
        r.soft_total(),
        solution.evaluations
    );
    let code = if solution.label == Label::Feasible {
        EXIT_OK
    } else {
        EXIT_INFEASIBLE
    };
    let mut inputs = vec![artifact(&args.instance)?];
    inputs.extend(loaded.input);
    let manifest = RunManifest {
        command: "solve".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        inputs,
        seed: Some(config.rng_seed),
        seed_source: seed_source.into(),
        config: serde_json::to_value(&config).map_err(|e| input("config", e))?,
        overrides: o.0,
        threads: config.threads,
        outputs,
        started_unix: started,
        finished_unix: now(),
        exit_code: code,
    };
    write_manifest(&manifest_path(&cli.manifest, &args.out_solution), &manifest)?;
    Ok(code)
}

pub fn cmd_train(cli: &Cli, args: &TrainArgs) -> Result<i32, CliError> {
    let started = now();
    let loaded = load_config(&cli.config)?;
    let log = DatasetLog::load(&args.dataset).map_err(|e| input(args.dataset.display(), e))?;
    if log.is_empty() {
        return Err(input(args.dataset.display(), "dataset has no examples"));
    }

    let mut config = loaded.file.protocol;
    let mut o = Overrides(serde_json::Map::new());
    o.apply("batch_size", args.batch_size, &mut config.batch_size);
    o.apply("train_fraction", args.split, &mut config.train_fraction);
    o.apply("eta0", args.eta0, &mut config.hyper.eta0);
    o.apply("alpha", args.alpha, &mut config.hyper.alpha);
    o.apply("epochs", args.epochs, &mut config.hyper.epochs);
    o.apply("epsilon", args.epsilon, &mut config.hyper.epsilon);
    if let Some(seed) = args.seed {
        config.split_seed = seed;
        config.hyper.seed = seed;
        o.0.insert("seed".into(), seed.into());
    }
    if config.batch_size == 0 {
        return Err(CliError::Usage("batch size must be positive".into()));
    }
    if !(config.train_fraction > 0.0 && config.train_fraction < 1.0) {
        return Err(CliError::Usage(
            "split must lie strictly between 0 and 1".into(),
        ));
    }
    config
        .hyper
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let task = Task::from(args.task);
    let mode = Mode::from(args.mode);
    let outcome = metrics::batch_protocol(&log, mode, task, &config)
        .map_err(|e| input(args.dataset.display(), e))?;
    outcome
        .model
        .save(&args.out_model)
        .map_err(|e| input(args.out_model.display(), e))?;
    let row = outcome.row(log.instance_name());
    fs::write(
        &args.out_report,
        metrics::report_csv(std::slice::from_ref(&row)),
    )
    .map_err(|e| input(args.out_report.display(), e))?;
    println!(
        "{} {} {} batches={} [{:.4}, {:.4}, {:.4}]",
        row.dataset, task, mode, row.batches, row.values[0], row.values[1], row.values[2]
    );

    let mut inputs = vec![artifact(&args.dataset)?];
    inputs.extend(loaded.input);
    let manifest = RunManifest {
        command: "train".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        inputs,
        seed: Some(config.hyper.seed),
        seed_source: if args.seed.is_some() {
            "flag"
        } else {
            "config"
        }
        .into(),
        config: serde_json::json!({ "task": task, "mode": mode, "protocol": config }),
        overrides: o.0,
        threads: 1,
        outputs: vec![artifact(&args.out_model)?, artifact(&args.out_report)?],
        started_unix: started,
        finished_unix: now(),
        exit_code: EXIT_OK,
    };
    write_manifest(&manifest_path(&cli.manifest, &args.out_model), &manifest)?;
    Ok(EXIT_OK)
}

pub fn cmd_report(cli: &Cli, args: &ReportArgs) -> Result<i32, CliError> {
    let started = now();
    let mut reports = Vec::new();
    let mut inputs = Vec::new();
    for path in &args.reports {
        let text = fs::read_to_string(path).map_err(|e| input(path.display(), e))?;
        reports.push(metrics::parse_report(&text).map_err(|e| input(path.display(), e))?);
        inputs.push(artifact(path)?);
    }
    let table = metrics::merge_reports(&reports).map_err(|e| CliError::Input(e.to_string()))?;
    let mut stdout = std::io::stdout().lock();
    stdout
        .write_all(table.as_bytes())
        .and_then(|_| stdout.flush())
        .map_err(|e| input("stdout", e))?;
    if let Some(path) = &cli.manifest {
        let manifest = RunManifest {
            command: "report".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            inputs,
            seed: None,
            seed_source: "none".into(),
            config: serde_json::Value::Null,
            overrides: serde_json::Map::new(),
            threads: 1,
            outputs: Vec::new(),
            started_unix: started,
            finished_unix: now(),
            exit_code: EXIT_OK,
        };
        write_manifest(path, &manifest)?;
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_64() {
        assert_eq!(run(["ctt", "train", "--task", "ranking"]), EXIT_USAGE);
        assert_eq!(run(["ctt", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["ctt"]), EXIT_USAGE);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run(["ctt", "--help"]), EXIT_OK);
        assert_eq!(run(["ctt", "--version"]), EXIT_OK);
    }

    #[test]
    fn config_file_is_validated() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.toml");
        fs::write(&cfg, "[ga]\npopulation_size = 7\nrng_seed = 3\n").unwrap();
        let loaded = load_config(&Some(cfg.clone())).unwrap();
        assert_eq!(loaded.file.ga.population_size, 7);
        assert!(loaded.seed_in_file);
        fs::write(&cfg, "[ga]\npopulaton_size = 7\n").unwrap();
        assert!(load_config(&Some(cfg)).is_err());
    }
}
