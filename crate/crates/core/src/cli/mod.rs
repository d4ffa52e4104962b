//! Command-line front end: `gen`, `train`, `eval` and `report`.
//!
//! Every command writes its artifacts plus a `run.json` manifest into one
//! output directory. The manifest echoes the resolved configuration and
//! lists each artifact with its SHA-256 hash.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::dataset::{self, generate_dataset, load_dataset, save_dataset, sha256_hex, split, Dataset, GenConfig};
use crate::error::{Error, Result};
use crate::net::{checkpoint, load_checkpoint, save_checkpoint, Checkpoint};
use crate::road::RoadClass;
use crate::training::{
    self, evaluate, export, robustness_report, EvalReport, Model, Objective, Precision, SplitName, TrainConfig,
    TrainObserver,
};

pub const RUN_MANIFEST: &str = "run.json";
pub const THREADS_ENV: &str = "QCM_SYSID_THREADS";

#[derive(Debug, Parser)]
#[command(name = "qcm-sysid", version, about = "Quarter-car parameter identification with a 1D CNN")]
pub struct Cli {
    /// Worker threads for generation and evaluation.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate and store a dataset.
    Gen(GenArgs),
    /// Train a network on a stored dataset.
    Train(TrainArgs),
    /// Evaluate a checkpoint.
    Eval(EvalArgs),
    /// Compare a labelled and an unlabelled checkpoint under noise.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    #[arg(long, default_value_t = 100)]
    pub roads: usize,
    #[arg(long, default_value_t = 100)]
    pub masses: usize,
    #[arg(long, default_value_t = 80)]
    pub train_roads: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Samples per trace.
    #[arg(short = 'n', long = "samples", default_value_t = crate::sim::DEFAULT_STEPS)]
    pub n: usize,
    /// Integration step width (s).
    #[arg(long, default_value_t = crate::sim::DEFAULT_STEP)]
    pub step: f64,
    #[arg(long, default_value_t = crate::road::DEFAULT_FREQUENCIES)]
    pub frequencies: usize,
    /// Vehicle speed (m/s).
    #[arg(long, default_value_t = crate::road::DEFAULT_VELOCITY)]
    pub velocity: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveArg {
    Labelled,
    Unlabelled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecisionArg {
    F32,
    F64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Dataset directory written by `gen`.
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Labelled)]
    pub objective: ObjectiveArg,
    #[arg(long, default_value_t = 500_000)]
    pub steps: u64,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.001)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 100_000)]
    pub eval_every: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub eval_seed: u64,
    #[arg(long, default_value_t = 0.01)]
    pub noise_sigma_eval: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma_train: f64,
    #[arg(long)]
    pub normalize_inputs: bool,
    #[arg(long, value_enum, default_value_t = PrecisionArg::F32)]
    pub precision: PrecisionArg,
    /// Save an intermediate checkpoint every this many steps.
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    /// Continue from the checkpoint already in the output directory.
    #[arg(long)]
    pub resume: bool,
    /// Log the running loss every this many steps.
    #[arg(long, default_value_t = 1000)]
    pub log_every: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitArg {
    Train,
    Test,
    Both,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Checkpoint directory written by `train`.
    pub checkpoint: PathBuf,
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub eval_seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Checkpoint trained with the labelled objective.
    pub labelled: PathBuf,
    /// Checkpoint trained with the unlabelled objective.
    pub unlabelled: PathBuf,
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub eval_seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance record written next to every command's artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seeds: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<Artifact>,
    pub started_unix: f64,
    pub finished_unix: f64,
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn hash_file(path: &Path) -> Result<Artifact> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Artifact { path: path.to_path_buf(), sha256: sha256_hex(&bytes) })
}

fn write_text(path: &Path, text: &str) -> Result<PathBuf> {
    dataset::write_file(path, text.as_bytes())?;
    Ok(path.to_path_buf())
}

struct Run {
    command: &'static str,
    config: serde_json::Value,
    seeds: serde_json::Value,
    inputs: Vec<PathBuf>,
    started: f64,
}

impl Run {
    /// `resolved` is the library-level configuration the flags map to.
    fn new(
        command: &'static str,
        args: &impl Serialize,
        resolved: &impl Serialize,
        seeds: serde_json::Value,
        inputs: Vec<PathBuf>,
    ) -> Self {
        let config = json!({ "flags": args, "resolved": resolved });
        Run { command, config, seeds, inputs, started: unix_now() }
    }

    /// Hashes every written artifact and writes `run.json` into `dir`.
    fn finish(self, dir: &Path, written: &[PathBuf]) -> Result<RunManifest> {
        let outputs = written.iter().map(|p| hash_file(p)).collect::<Result<Vec<_>>>()?;
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command.to_string(),
            argv: std::env::args().collect(),
            config: self.config,
            seeds: self.seeds,
            inputs: self.inputs,
            outputs,
            started_unix: self.started,
            finished_unix: unix_now(),
        };
        let path = dir.join(RUN_MANIFEST);
        let json = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Manifest { path: path.clone(), source: e })?;
        dataset::write_file(&path, &json)?;
        Ok(manifest)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Runs one command and returns its manifest.
pub fn run(cli: Cli) -> Result<RunManifest> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::invalid("--threads must be at least 1"));
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

pub fn gen_config(a: &GenArgs) -> GenConfig {
    GenConfig {
        roads: a.roads,
        masses: a.masses,
        n: a.n,
        h: a.step,
        frequencies: a.frequencies,
        velocity: a.velocity,
        train_roads: a.train_roads,
        master_seed: a.seed,
    }
}

pub fn cmd_gen(a: &GenArgs) -> Result<RunManifest> {
    let config = gen_config(a);
    config.validate()?;
    if config.train_roads == 0 || config.train_roads >= config.roads {
        return Err(Error::invalid(format!("--train-roads must lie in 1..{}, got {}", config.roads, config.train_roads)));
    }
    let run = Run::new("gen", a, &config, json!({ "master_seed": a.seed }), Vec::new());
    let ds = generate_dataset(&config)?;
    let sp = split(&ds, config.train_roads)?;
    let written = save_dataset(&ds, &a.output)?;
    let classes: std::collections::BTreeSet<RoadClass> = ds.roads.iter().map(|r| r.class).collect();
    println!(
        "{} samples ({} train / {} test, {} train roads); road classes {}",
        ds.samples.len(),
        sp.train.len(),
        sp.test.len(),
        config.train_roads,
        classes.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
    );
    run.finish(&a.output, &written)
}

pub fn train_config(a: &TrainArgs) -> TrainConfig {
    TrainConfig {
        objective: match a.objective {
            ObjectiveArg::Labelled => Objective::Labelled,
            ObjectiveArg::Unlabelled => Objective::Unlabelled,
        },
        steps: a.steps,
        batch_size: a.batch_size,
        learning_rate: a.learning_rate,
        eval_every: a.eval_every,
        seed: a.seed,
        eval_seed: a.eval_seed,
        noise_sigma_eval: a.noise_sigma_eval,
        noise_sigma_train: a.noise_sigma_train,
        normalize_inputs: a.normalize_inputs,
        precision: match a.precision {
            PrecisionArg::F32 => Precision::F32,
            PrecisionArg::F64 => Precision::F64,
        },
        ..TrainConfig::default()
    }
}

struct CliObserver {
    dir: PathBuf,
    every: Option<u64>,
    log_every: u64,
    loss_sum: f64,
    count: u64,
}

impl TrainObserver for CliObserver {
    fn on_step(&mut self, step: u64, loss: f64) {
        self.loss_sum += loss;
        self.count += 1;
        if self.log_every > 0 && step.is_multiple_of(self.log_every) {
            log::info!("step {step}: mean loss {:.6e}", self.loss_sum / self.count as f64);
            self.loss_sum = 0.0;
            self.count = 0;
        }
    }

    fn on_eval(&mut self, r: &EvalReport) {
        log::info!(
            "step {} {} sigma={}: p1 mu={:.4} sd={:.4}, p2 mu={:.4} sd={:.4}",
            r.step,
            r.split,
            r.noise_sigma,
            r.p1.mu,
            r.p1.sigma,
            r.p2.mu,
            r.p2.sigma
        );
    }

    fn checkpoint_interval(&self) -> Option<u64> {
        self.every
    }

    fn on_checkpoint(&mut self, ckpt: &Checkpoint) -> Result<()> {
        save_checkpoint(ckpt, &self.dir)?;
        log::info!("saved intermediate checkpoint at step {}", ckpt.step);
        Ok(())
    }
}

pub fn cmd_train(a: &TrainArgs) -> Result<RunManifest> {
    let config = train_config(a);
    config.validate()?;
    let ds = load_dataset(&a.dataset)?;
    let sp = split(&ds, ds.config.train_roads)?;
    let ckpt_dir = a.output.join("checkpoint");
    let resume = if a.resume && ckpt_dir.join(checkpoint::CHECKPOINT_FILE).exists() {
        Some(load_checkpoint(&ckpt_dir)?)
    } else {
        None
    };
    let run = Run::new(
        "train",
        a,
        &config,
        json!({ "init_and_batch_seed": a.seed, "eval_seed": a.eval_seed, "dataset_master_seed": ds.config.master_seed }),
        vec![a.dataset.clone()],
    );
    create_dir(&a.output)?;
    let mut observer = CliObserver { dir: ckpt_dir.clone(), every: a.checkpoint_every, log_every: a.log_every, loss_sum: 0.0, count: 0 };
    let outcome = training::train(&sp.train_view(&ds), &sp.test_view(&ds), &config, resume.as_ref(), &mut observer)?;
    let mut written = save_checkpoint(&outcome.checkpoint, &ckpt_dir)?;
    written.push(write_text(&a.output.join("history.csv"), &export::history_csv(config.objective, &outcome.history))?);
    println!("trained {} steps ({}); checkpoint in {}", outcome.checkpoint.step, config.objective, ckpt_dir.display());
    run.finish(&a.output, &written)
}

fn load_model(dir: &Path) -> Result<(Model, Objective)> {
    let ckpt = load_checkpoint(dir)?;
    let objective = ckpt
        .extra
        .get("config")
        .and_then(|c| c.get("objective"))
        .and_then(|o| serde_json::from_value(o.clone()).ok())
        .ok_or_else(|| Error::Corrupt { path: dir.to_path_buf(), reason: "checkpoint does not record its objective".into() })?;
    Ok((Model::from_checkpoint(&ckpt)?, objective))
}

fn load_split(dir: &Path) -> Result<(Dataset, dataset::Split)> {
    let ds = load_dataset(dir)?;
    let sp = split(&ds, ds.config.train_roads)?;
    Ok((ds, sp))
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("--noise-sigma must be non-negative, got {sigma}")));
    }
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs) -> Result<RunManifest> {
    check_sigma(a.noise_sigma)?;
    // Everything is loaded before the output directory is touched.
    let (model, objective) = load_model(&a.checkpoint)?;
    let (ds, sp) = load_split(&a.dataset)?;
    let run = Run::new("eval", a, &json!({ "noise_sigma": a.noise_sigma, "eval_seed": a.eval_seed }), json!({ "eval_seed": a.eval_seed }), vec![a.checkpoint.clone(), a.dataset.clone()]);
    let splits: &[SplitName] = match a.split {
        SplitArg::Train => &[SplitName::Train],
        SplitArg::Test => &[SplitName::Test],
        SplitArg::Both => &[SplitName::Train, SplitName::Test],
    };
    let step = load_checkpoint_step(&a.checkpoint)?;
    let mut reports = Vec::new();
    for &s in splits {
        let view = match s {
            SplitName::Train => sp.train_view(&ds),
            SplitName::Test => sp.test_view(&ds),
        };
        let mut r = evaluate(&model, &view, s, a.noise_sigma, a.eval_seed)?;
        r.step = step;
        println!("{} sigma={}: p1 mu={:.4} sd={:.4}, p2 mu={:.4} sd={:.4}", s, a.noise_sigma, r.p1.mu, r.p1.sigma, r.p2.mu, r.p2.sigma);
        reports.push(r);
    }
    create_dir(&a.output)?;
    let written = vec![write_text(&a.output.join("eval.csv"), &export::history_csv(objective, &reports))?];
    run.finish(&a.output, &written)
}

fn load_checkpoint_step(dir: &Path) -> Result<u64> {
    Ok(checkpoint::load_checkpoint_manifest(dir)?.step)
}

pub fn cmd_report(a: &ReportArgs) -> Result<RunManifest> {
    check_sigma(a.noise_sigma)?;
    let (labelled, lo) = load_model(&a.labelled)?;
    let (unlabelled, uo) = load_model(&a.unlabelled)?;
    if lo != Objective::Labelled || uo != Objective::Unlabelled {
        return Err(Error::invalid(format!(
            "expected a labelled then an unlabelled checkpoint, got {lo} and {uo}"
        )));
    }
    let (ds, sp) = load_split(&a.dataset)?;
    let run = Run::new(
        "report",
        a,
        &json!({ "noise_sigma": a.noise_sigma, "eval_seed": a.eval_seed }),
        json!({ "eval_seed": a.eval_seed }),
        vec![a.labelled.clone(), a.unlabelled.clone(), a.dataset.clone()],
    );
    let report = robustness_report(&labelled, &unlabelled, &sp.test_view(&ds), a.noise_sigma, a.eval_seed)?;
    let summary = export::robustness_summary(&report);
    print!("{summary}");
    create_dir(&a.output)?;
    let written = vec![
        write_text(&a.output.join("report.csv"), &export::robustness_csv(&report))?,
        write_text(&a.output.join("report.txt"), &summary)?,
    ];
    run.finish(&a.output, &written)
}
