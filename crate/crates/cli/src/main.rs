//! `popart` command-line interface.
//!
//! Exit codes: 0 on success, 1 on I/O failures, 2 on invalid input.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use popart::checkpoint::Checkpoint;
use popart::config::{RunConfig, Variant};
use popart::experiment::{
    aggregate, compute_references, evaluate_checkpoint, make_agent_config, results, run_pbt,
    Aggregate, PbtSettings, ScoreRecord, DEFAULT_REFERENCE_EPISODES,
};
use popart::metrics::MetricsWriter;
use popart::runtime::{initial_state, run_training, Learner, StepMetrics};
use popart::taskworld::{read_oracle_csv, write_oracle_csv, OracleRow, Suite};

/// Environment variable that relocates relative output directories.
const OUT_ROOT_VAR: &str = "POPART_OUT_ROOT";
/// Seed of the random-policy references, shared by every run.
const REFERENCE_SEED: u64 = 0;

#[derive(Parser)]
#[command(name = "popart", version, about = "Multi-task actor-critic with adaptive return normalization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and score it.
    Train(TrainArgs),
    /// Score a checkpoint with a frozen policy.
    Eval(EvalArgs),
    /// Population-based training.
    Pbt(PbtArgs),
    /// Summarize results tables.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Base configuration file (key = value).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in suite (scale6, clipped6, pbt2) or suite file.
    #[arg(long)]
    suite: Option<String>,
    /// popart, multihead or baseline.
    #[arg(long)]
    variant: Option<Variant>,
    /// Environment frames summed across tasks.
    #[arg(long)]
    frames: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` settings, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Episodes behind each random-policy reference.
    #[arg(long, default_value_t = DEFAULT_REFERENCE_EPISODES)]
    reference_episodes: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Defaults to the suite recorded in the checkpoint.
    #[arg(long)]
    suite: Option<String>,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Breakdown CSV; defaults to breakdown.csv next to the checkpoint.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_REFERENCE_EPISODES)]
    reference_episodes: usize,
}

#[derive(Args)]
struct PbtArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value_t = 4)]
    population: usize,
    #[arg(long, default_value_t = 3)]
    intervals: usize,
    /// Frames each member trains per interval.
    #[arg(long, default_value_t = 100_000)]
    interval_frames: u64,
    #[arg(long, default_value_t = 0.25)]
    exploit_fraction: f64,
}

#[derive(Args)]
struct ReportArgs {
    /// results.csv files or directories searched for them.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// Also write the table to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// An input problem rather than an I/O one.
#[derive(Debug)]
struct Invalid(String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Invalid>() {
            return 2;
        }
        if cause.is::<std::io::Error>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<popart::Error>() {
            return match e {
                popart::Error::Io(_) | popart::Error::Checkpoint(_) => 1,
                _ => 2,
            };
        }
    }
    1
}

fn resolve_out(out: &Path) -> PathBuf {
    match std::env::var_os(OUT_ROOT_VAR) {
        Some(root) if out.is_relative() => PathBuf::from(root).join(out),
        _ => out.to_path_buf(),
    }
}

fn resolve_config(args: &RunArgs, default_suite: Option<&str>) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)
            .with_context(|| format!("reading config {}", path.display()))?,
        None => RunConfig::default(),
    };
    if let (None, Some(suite)) = (&args.config, default_suite) {
        cfg.suite = suite.to_string();
    }
    if let Some(s) = &args.suite {
        cfg.suite = s.clone();
    }
    if let Some(v) = args.variant {
        cfg.variant = v;
    }
    if let Some(f) = args.frames {
        cfg.frames = f;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    cfg.apply_overrides(&args.overrides)?;
    cfg.out = resolve_out(&cfg.out);
    cfg.validate()?;
    Ok(cfg)
}

/// Loads cached references from `dir` or computes and caches them.
fn references(dir: &Path, suite: &Suite, episodes: usize) -> Result<Vec<OracleRow>> {
    let path = dir.join("references.csv");
    if path.exists() {
        let rows = read_oracle_csv(&path)?;
        if rows.len() == suite.len() {
            return Ok(rows);
        }
    }
    let rows = compute_references(suite, episodes, REFERENCE_SEED)?;
    write_oracle_csv(&path, &rows)?;
    Ok(rows)
}

fn print_scores(records: &[ScoreRecord], agg: &Aggregate) {
    println!("task  raw_return      random     optimal  normalized");
    for r in records {
        println!(
            "{:>4} {:>11.4} {:>11.4} {:>11.4} {:>11.3}",
            r.task_id, r.raw_return, r.random_ref, r.optimal_ref, r.normalized
        );
    }
    println!(
        "median_normalized={:.4} mean_capped={:.4}",
        agg.median_normalized, agg.mean_capped
    );
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let cfg = resolve_config(&args.run, None)?;
    let suite = Suite::resolve(&cfg.suite)?;
    std::fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating {}", cfg.out.display()))?;
    std::fs::write(cfg.out.join("config.txt"), cfg.to_config_string())?;
    std::fs::write(cfg.out.join("suite.txt"), suite.to_config_string())?;

    let agent = make_agent_config(cfg.variant);
    let checkpoint = |learner_state, steps, frames| Checkpoint {
        variant: cfg.variant,
        suite: cfg.suite.clone(),
        steps,
        frames,
        state: learner_state,
    };
    let init = initial_state(&cfg, &suite, &agent);
    if cfg.frames == 0 {
        checkpoint(init.clone(), 0, 0).write(&cfg.out.join("final.ckpt"))?;
    }

    let mut metrics = MetricsWriter::create(&cfg.out.join("metrics.csv"), suite.len())?;
    let mut next_checkpoint = cfg.checkpoint_interval;
    let mut observer = |m: &StepMetrics, learner: &Learner| -> popart::Result<()> {
        metrics.write(m)?;
        if cfg.checkpoint_interval > 0 && m.frames_total >= next_checkpoint {
            let path = cfg.out.join(format!("ckpt-{}.ckpt", m.frames_total));
            checkpoint(learner.state.clone(), learner.steps(), learner.frames()).write(&path)?;
            metrics.flush()?;
            while next_checkpoint <= m.frames_total {
                next_checkpoint += cfg.checkpoint_interval;
            }
        }
        Ok(())
    };
    let outcome = run_training(&cfg, &suite, agent, Some(init), &mut observer)?;
    metrics.flush()?;
    let learner = outcome.learner;
    let final_ckpt = checkpoint(learner.state.clone(), learner.steps(), learner.frames());
    final_ckpt.write(&cfg.out.join("final.ckpt"))?;
    info!(
        "{} steps, {} frames, rollouts enqueued {} consumed {} discarded {}",
        learner.steps(),
        learner.frames(),
        outcome.accounting.enqueued,
        outcome.accounting.consumed,
        outcome.accounting.discarded
    );

    let refs = references(&cfg.out, &suite, args.run.reference_episodes)?;
    let records = evaluate_checkpoint(&final_ckpt, &suite, &refs, cfg.eval_episodes, cfg.seed)?;
    let agg = aggregate(&records)?;
    results::write_breakdown(&cfg.out.join("breakdown.csv"), &records)?;
    results::append_results(
        &cfg.out.join("results.csv"),
        &[results::ResultRow {
            variant: cfg.variant.to_string(),
            suite: suite.name.clone(),
            median_normalized: agg.median_normalized,
            mean_capped: agg.mean_capped,
        }],
    )?;
    print_scores(&records, &agg);
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    if args.episodes == 0 {
        return Err(Invalid("--episodes must be at least 1".into()).into());
    }
    let checkpoint = Checkpoint::read(&args.checkpoint)
        .with_context(|| format!("reading checkpoint {}", args.checkpoint.display()))?;
    let suite = Suite::resolve(args.suite.as_deref().unwrap_or(&checkpoint.suite))?;
    let dir = args
        .checkpoint
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let refs = references(&dir, &suite, args.reference_episodes)?;
    let records = evaluate_checkpoint(&checkpoint, &suite, &refs, args.episodes, args.seed)?;
    let agg = aggregate(&records)?;
    let out = args.out.unwrap_or_else(|| dir.join("breakdown.csv"));
    results::write_breakdown(&out, &records)?;
    print_scores(&records, &agg);
    Ok(())
}

fn cmd_pbt(args: PbtArgs) -> Result<()> {
    let cfg = resolve_config(&args.run, Some("pbt2"))?;
    let settings = PbtSettings {
        population: args.population,
        intervals: args.intervals,
        interval_frames: args.interval_frames,
        exploit_fraction: args.exploit_fraction,
        eval_episodes: cfg.eval_episodes,
        ..PbtSettings::default()
    };
    settings.validate()?;
    let suite = Suite::resolve(&cfg.suite)?;
    std::fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating {}", cfg.out.display()))?;
    std::fs::write(cfg.out.join("config.txt"), cfg.to_config_string())?;
    std::fs::write(cfg.out.join("suite.txt"), suite.to_config_string())?;
    let refs = references(&cfg.out, &suite, args.run.reference_episodes)?;
    let outcome = run_pbt(&cfg, &suite, &settings, &refs)?;
    results::write_fitness_history(&cfg.out.join("fitness.csv"), &outcome.history)?;
    for m in &outcome.members {
        m.checkpoint
            .write(&cfg.out.join(format!("member-{}.ckpt", m.member_id)))?;
    }
    let best = outcome.max_fitness_per_interval();
    println!(
        "max fitness per interval: {}",
        best.iter().map(|f| format!("{f:.4}")).collect::<Vec<_>>().join(" ")
    );
    Ok(())
}

fn collect_results(path: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    if path.is_dir() {
        let mut entries: Vec<_> = std::fs::read_dir(path)?.collect::<std::io::Result<_>>()?;
        entries.sort_by_key(|e| e.path());
        for e in entries {
            let p = e.path();
            if p.is_dir() {
                collect_results(&p, found)?;
            } else if p.file_name().is_some_and(|n| n == "results.csv") {
                found.push(p);
            }
        }
    } else if path.exists() {
        found.push(path.to_path_buf());
    } else {
        return Err(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} does not exist", path.display()),
        )
        .into());
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let mut files = Vec::new();
    for p in &args.paths {
        collect_results(p, &mut files)?;
    }
    let mut rows = Vec::new();
    for f in &files {
        rows.extend(results::read_results(f)?);
    }
    if rows.is_empty() {
        bail!(Invalid("no results found".into()));
    }
    let table = results::render_table(&results::summarize(&rows));
    print!("{table}");
    if let Some(out) = args.out {
        std::fs::write(out, table)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Pbt(a) => cmd_pbt(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
