//! The `alforge` command line: `generate`, `run`, `sweep`, `diagnose` and `verify`.
//!
//! Settings come from defaults, then an optional `key = value` config file,
//! then `--set key=value` pairs, then the dedicated flags. `run`, `sweep`
//! and `diagnose` write a manifest holding the fully resolved configuration;
//! `run --manifest` replays it.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::al::{records_csv, run_trials};
use crate::coldstart::{mean_by_size, pearson, start_size_rule, sweep_csv, sweep_start_sizes};
use crate::config::{DatasetKind, DatasetSpec, ExperimentConfig};
use crate::data::Dataset;
use crate::diagnostics::{build_report, DEFAULT_THRESHOLDS, DEFAULT_TOP_FRAC};
use crate::error::{Error, Result};
use crate::io::{load_model, save_model, summary_json, RunManifest};
use crate::pool::PoolState;
use crate::selection::{score_pool, select_topk, Strategy};
use crate::verify::{render_table, run_all, VerifyOptions};

/// Environment variable capping the worker threads used across trials and sweep points.
pub const THREADS_ENV: &str = "ALFORGE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "alforge",
    version,
    about = "Consistency-based semi-supervised active learning"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset as CSV plus a metadata JSON.
    Generate(GenerateArgs),
    /// Run active-learning trials.
    Run(RunArgs),
    /// Sweep start-set sizes and recommend one.
    Sweep(SweepArgs),
    /// Analyze what a strategy selects from a saved model and pool.
    Diagnose(DiagnoseArgs),
    /// Run the built-in oracle checks.
    Verify(VerifyArgs),
}

fn positive_usize(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".to_string()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn non_negative(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be a finite value >= 0, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn key_value(s: &str) -> std::result::Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))?;
    let k = k.trim();
    if !ExperimentConfig::is_key(k) {
        return Err(format!("unknown config key `{k}`"));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

fn generator_kind(s: &str) -> std::result::Result<DatasetKind, String> {
    match s.parse::<DatasetKind>() {
        Ok(DatasetKind::Csv) => Err("csv is not a generator".to_string()),
        Ok(k) => Ok(k),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// two_moons, blobs or grid_patterns.
    #[arg(long, value_parser = generator_kind)]
    pub kind: DatasetKind,
    #[arg(long, value_parser = positive_usize)]
    pub n: usize,
    /// Noise level (moons: coordinate sigma; grid patterns: pixel sigma).
    #[arg(long, default_value_t = 0.1, value_parser = non_negative)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of classes (blobs and grid patterns).
    #[arg(long, default_value_t = 4, value_parser = positive_usize)]
    pub classes: usize,
    #[arg(long, default_value_t = 7)]
    pub centers_seed: u64,
    #[arg(long, default_value_t = 1.0, value_parser = non_negative)]
    pub spread: f64,
    #[arg(long, default_value_t = 8, value_parser = positive_usize)]
    pub grid_dim: usize,
    /// Standardize features to zero mean and unit variance.
    #[arg(long)]
    pub standardize: bool,
    /// CSV path; the metadata goes next to it with a `.json` extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Plain-text config file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = key_value)]
    pub set: Vec<(String, String)>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        c.apply(&self.set)?;
        if let Some(seed) = self.seed {
            c.al.seed = seed;
        }
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// uniform, entropy, kcenter, consistency, or `all`.
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long, value_parser = positive_usize)]
    pub trials: Option<usize>,
    /// Replay a manifest written by an earlier run.
    #[arg(long, conflicts_with_all = ["config", "set", "seed", "strategy", "trials"])]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value = "alforge-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Increasing start-set sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "4,10,20,40,100")]
    pub sizes: Vec<usize>,
    /// Stop once the measure changes by at most this much between sizes.
    #[arg(long, required = true, value_parser = non_negative)]
    pub epsilon: f64,
    /// Number of seeds, starting at the configured seed.
    #[arg(long, default_value_t = 5, value_parser = positive_usize)]
    pub seeds: usize,
    /// Train without the consistency term.
    #[arg(long)]
    pub supervised: bool,
    #[arg(long, default_value = "alforge-sweep")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Take dataset and settings from a run manifest instead of a config.
    #[arg(long, conflicts_with_all = ["config", "set"])]
    pub manifest: Option<PathBuf>,
    /// Model snapshot (`ALFG` binary).
    #[arg(long)]
    pub model: PathBuf,
    /// Pool snapshot (JSON).
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[arg(long, default_value_t = DEFAULT_TOP_FRAC)]
    pub top_frac: f64,
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    /// Size of the batch compared against per-class error and marked in the PCA view.
    #[arg(long, value_parser = positive_usize)]
    pub batch_size: Option<usize>,
    #[arg(long, default_value = "alforge-diagnostics")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, hide = true)]
    pub corrupt_gradient: bool,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Caps the global thread pool from [`THREADS_ENV`] when it is set.
pub fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::invalid(format!(
            "{THREADS_ENV} must be a positive integer, got `{v}`"
        ))
    })?;
    // A pool built earlier in the process wins; that only happens in tests.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn dispatch(cmd: Command) -> Result<i32> {
    init_threads()?;
    match cmd {
        Command::Generate(a) => cmd_generate(&a).map(|()| 0),
        Command::Run(a) => cmd_run(&a).map(|()| 0),
        Command::Sweep(a) => cmd_sweep(&a).map(|()| 0),
        Command::Diagnose(a) => cmd_diagnose(&a).map(|()| 0),
        Command::Verify(a) => Ok(cmd_verify(&a)),
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

pub fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let spec = DatasetSpec {
        kind: a.kind,
        n_train: a.n,
        noise: a.noise,
        classes: if a.kind == DatasetKind::TwoMoons {
            2
        } else {
            a.classes
        },
        centers_seed: a.centers_seed,
        spread: a.spread,
        grid_dim: a.grid_dim,
        data_seed: a.seed,
        ..DatasetSpec::default()
    };
    let v = spec.violations();
    if !v.is_empty() {
        return Err(Error::Config(v));
    }
    let ds = match a.kind {
        DatasetKind::Blobs => {
            crate::data::gen_blobs(a.n, spec.classes, a.centers_seed, a.spread, a.seed)?
        }
        _ => spec.generate(a.n)?,
    };
    let ds = if a.standardize { ds.standardized() } else { ds };
    let csv = a
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", a.kind.name())));
    if let Some(dir) = csv.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    ds.write_csv(&csv)?;
    let meta = json!({
        "kind": a.kind.name(),
        "n": a.n,
        "noise": a.noise,
        "seed": a.seed,
        "classes": ds.classes(),
        "centers_seed": a.centers_seed,
        "spread": a.spread,
        "grid_dim": a.grid_dim,
        "standardized": a.standardize,
        "input_dim": ds.input_dim(),
        "fingerprint": ds.fingerprint(),
        "version": crate::io::VERSION,
    });
    write_json(&csv.with_extension("json"), &meta)?;
    println!("wrote {} ({} rows)", csv.display(), ds.len());
    Ok(())
}

fn build_data(c: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    c.validate()?;
    let (train, test) = c.dataset.build()?;
    let v = c.al.violations_for(train.len(), train.classes());
    if !v.is_empty() {
        return Err(Error::Config(v));
    }
    Ok((train, test))
}

/// Runs every requested strategy with shared seeds and writes its outputs into `out`.
fn execute_runs(
    configs: &[ExperimentConfig],
    out: &Path,
    check: Option<&RunManifest>,
) -> Result<()> {
    std::fs::create_dir_all(out)?;
    for c in configs {
        let (train, test) = build_data(c)?;
        if let Some(m) = check {
            m.check_fingerprints(&train.fingerprint(), &test.fingerprint())?;
        }
        let name = c.al.strategy.name();
        let trials = run_trials(&train, &test, &c.al, c.trials)?;
        std::fs::write(
            out.join(format!("records_{name}.csv")),
            records_csv(&trials.runs),
        )?;
        write_json(
            &out.join(format!("summary_{name}.json")),
            &summary_json(name, &trials),
        )?;
        let first = &trials.runs[0];
        save_model(&first.final_params, &out.join(format!("model_{name}.bin")))?;
        first
            .final_pool
            .save(&out.join(format!("pool_{name}.json")))?;
        RunManifest::new("run", c, train.fingerprint(), test.fingerprint(), out)
            .save(&out.join(format!("manifest_{name}.json")))?;
        let last = trials.summary.last().expect("at least one cycle");
        println!(
            "{name}: {} trials, final accuracy {:.4} +/- {:.4} at {} labels",
            c.trials, last.acc_mean, last.acc_std, last.labeled_mean
        );
    }
    Ok(())
}

pub fn cmd_run(a: &RunArgs) -> Result<()> {
    if let Some(path) = &a.manifest {
        let m = RunManifest::load(path)?;
        return execute_runs(&[m.experiment_config()?], &a.out, Some(&m));
    }
    let mut base = a.cfg.resolve()?;
    if let Some(t) = a.trials {
        base.trials = t;
    }
    let strategies = match a.strategy.as_deref() {
        Some("all") => Strategy::ALL.to_vec(),
        Some(s) => vec![s.parse()?],
        None => vec![base.al.strategy],
    };
    let configs: Vec<ExperimentConfig> = strategies
        .into_iter()
        .map(|s| {
            let mut c = base.clone();
            c.al.strategy = s;
            c
        })
        .collect();
    for c in &configs {
        c.validate()?;
    }
    std::fs::create_dir_all(&a.out)?;
    std::fs::write(a.out.join("config.txt"), base.to_text())?;
    execute_runs(&configs, &a.out, None)
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    if a.sizes.len() < 2 {
        return Err(Error::invalid("the start-size rule needs at least 2 sizes"));
    }
    let mut c = a.cfg.resolve()?;
    if a.supervised {
        c.al.loss.unsup_weight = 0.0;
    }
    let mut probe = c.clone();
    probe.al.start_size = *a.sizes.iter().max().expect("nonempty");
    probe.al.cycles = 0;
    let (train, test) = build_data(&probe)?;
    let mut records = Vec::new();
    for s in 0..a.seeds as u64 {
        let mut cfg = c.al.clone();
        cfg.seed = c.al.seed + s;
        records.extend(sweep_start_sizes(&train, &a.sizes, &cfg)?);
    }
    let means = mean_by_size(&records);
    let rec = start_size_rule(&means, a.epsilon)?;
    let h: Vec<f64> = means.iter().map(|r| r.measure_h).collect();
    let loss: Vec<f64> = means.iter().map(|r| r.target_loss).collect();
    std::fs::create_dir_all(&a.out)?;
    std::fs::write(a.out.join("sweep.csv"), sweep_csv(&records))?;
    write_json(
        &a.out.join("recommendation.json"),
        &json!({
            "epsilon": a.epsilon,
            "size": rec.size,
            "converged": rec.converged,
            "delta_h": rec.deltas,
            "sizes": means.iter().map(|r| r.labeled_count).collect::<Vec<_>>(),
            "mean_measure_H": h,
            "mean_target_loss": loss,
            "pearson": pearson(&h, &loss),
            "seeds": a.seeds,
            "mode": if c.al.loss.unsup_weight > 0.0 { "ssl" } else { "supervised" },
        }),
    )?;
    RunManifest::new("sweep", &c, train.fingerprint(), test.fingerprint(), &a.out)
        .save(&a.out.join("manifest.json"))?;
    println!(
        "recommended start size {} ({}), pearson {}",
        rec.size,
        if rec.converged {
            "converged"
        } else {
            "not converged"
        },
        pearson(&h, &loss).map_or("undefined".to_string(), |r| format!("{r:.4}"))
    );
    Ok(())
}

pub fn cmd_diagnose(a: &DiagnoseArgs) -> Result<()> {
    let c = match &a.manifest {
        Some(path) => RunManifest::load(path)?.experiment_config()?,
        None => a.cfg.resolve()?,
    };
    let params = load_model(&a.model)?;
    let pool = PoolState::load(&a.pool)?;
    let (train, test) = c.dataset.build()?;
    pool.check(&train)?;
    if params.input_dim() != train.input_dim() || params.classes() != train.classes() {
        return Err(Error::invalid(format!(
            "model shape {}->{} does not match dataset {}->{}",
            params.input_dim(),
            params.classes(),
            train.input_dim(),
            train.classes()
        )));
    }
    let strategy = a.strategy.unwrap_or(c.al.strategy);
    let seed = a.cfg.seed.unwrap_or(c.al.seed);
    let ranked = score_pool(strategy, &params, &train, &pool, &c.al.augment, seed)?;
    let k = a.batch_size.unwrap_or(c.al.batch_size).min(ranked.len());
    let selected = select_topk(&ranked, k)?;
    let thresholds = a
        .thresholds
        .clone()
        .unwrap_or_else(|| DEFAULT_THRESHOLDS.to_vec());
    let report = build_report(
        &params,
        &train,
        &test,
        &ranked,
        &selected,
        a.top_frac,
        &thresholds,
    )?;
    report.write(&a.out)?;
    std::fs::write(a.out.join("scores.csv"), ranked.to_csv())?;
    println!(
        "{}: top {}% mean pairwise distance {:.4}; wrote {}",
        strategy,
        a.top_frac * 100.0,
        report.top_frac_avg_dist,
        a.out.display()
    );
    Ok(())
}

pub fn cmd_verify(a: &VerifyArgs) -> i32 {
    let results = run_all(VerifyOptions {
        seed: a.seed,
        corrupt_gradient: a.corrupt_gradient,
    });
    print!("{}", render_table(&results));
    let mut code = 0;
    for r in results.iter().filter(|r| !r.passed) {
        code = 1;
        eprintln!(
            "{} failed; instance for replay:\n{}",
            r.name,
            serde_json::to_string(&r.failing_instance).unwrap_or_default()
        );
    }
    code
}
