//! `welfarist`: run, sweep, verify and figure-data commands.
//!
//! Exit codes: 0 success, 2 config error, 3 runtime error, 4 verification
//! failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use welfarist_core::figures::{self, FiguresConfig};
use welfarist_core::harness::write_atomic;
use welfarist_core::theorycheck::{self, VerifyConfig};
use welfarist_core::{sweep, write_table, ExperimentConfig, HarnessError};

const SEED_ENV: &str = "WELFARIST_SEED";

#[derive(Parser)]
#[command(
    name = "welfarist",
    version,
    about = "Fairness-aware bandit experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the first (policy, p, horizon) cell of a config.
    Run(CommonArgs),
    /// Run every cell of a config and write the regret table.
    Sweep(CommonArgs),
    /// Run the lemma verification suite.
    Verify(CommonArgs),
    /// Write the six panel datasets into a directory.
    Figures(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config field; KEY may be dotted, VALUE is JSON or a bare string.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output file (run, sweep, verify) or directory (figures).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, short)]
    verbose: bool,
}

/// An error paired with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn config(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 2,
            error: error.into(),
        }
    }

    fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 3,
            error: error.into(),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) | HarnessError::Instance(_) => Self::config(e),
            HarnessError::Policy(welfarist_core::policies::PolicyError::InvalidConfig(_)) => {
                Self::config(e)
            }
            _ => Self::runtime(e),
        }
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = match &cli.command {
        Command::Run(a) | Command::Sweep(a) | Command::Verify(a) | Command::Figures(a) => a,
    };
    env_logger::Builder::new()
        .filter_level(if args.verbose {
            log::LevelFilter::Debug
        } else {
            log::LevelFilter::Warn
        })
        .parse_default_env()
        .init();

    match execute(&cli.command, args) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn execute(command: &Command, args: &CommonArgs) -> Outcome {
    let work = || match command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Figures(a) => cmd_figures(a),
    };
    match args.workers {
        Some(0) => Err(Failure::config(anyhow!("--workers must be at least 1"))),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(Failure::runtime)?
            .install(work),
        None => work(),
    }
}

fn cmd_run(args: &CommonArgs) -> Outcome {
    let mut config: ExperimentConfig = load(args, None)?;
    let (Some(policy), Some(p), Some(horizon)) = (
        config.policy_specs.first().cloned(),
        config.p_values.first().copied(),
        config.horizon_grid.first().copied(),
    ) else {
        return Err(Failure::config(anyhow!(
            "run needs at least one policy, p value and horizon"
        )));
    };
    config.policy_specs = vec![policy];
    config.p_values = vec![p];
    config.horizon_grid = vec![horizon];
    let table = sweep(&config)?;
    print!("{}", String::from_utf8_lossy(&table.to_csv_bytes()));
    write_table(&table, &output(args, &config))?;
    Ok(0)
}

fn cmd_sweep(args: &CommonArgs) -> Outcome {
    let config: ExperimentConfig = load(args, None)?;
    let table = sweep(&config)?;
    let path = output(args, &config);
    write_table(&table, &path)?;
    log::info!("wrote {} rows to {}", table.rows.len(), path.display());
    Ok(0)
}

fn cmd_verify(args: &CommonArgs) -> Outcome {
    let config: VerifyConfig = load(args, Some(VerifyConfig::default()))?;
    let report = theorycheck::verify(&config)?;
    let json = serde_json::to_string_pretty(&report).map_err(Failure::runtime)?;
    println!("{json}");
    if let Some(path) = &args.out {
        write_atomic(path, format!("{json}\n").as_bytes())?;
    }
    if !report.statistical_ok() {
        log::warn!("statistical checks outside their bands (does not affect exit status)");
    }
    Ok(if report.deterministic_violations() > 0 {
        4
    } else {
        0
    })
}

fn cmd_figures(args: &CommonArgs) -> Outcome {
    let config: FiguresConfig = load(args, Some(FiguresConfig::default()))?;
    let dir = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(Failure::runtime)?;
    for (panel, path, table) in figures::generate(&config, &dir)? {
        println!(
            "panel {panel}: {} rows -> {}",
            table.rows.len(),
            path.display()
        );
    }
    Ok(0)
}

fn output(args: &CommonArgs, config: &ExperimentConfig) -> PathBuf {
    args.out
        .clone()
        .unwrap_or_else(|| config.output_path.clone())
}

/// Config file (or `default`), then `WELFARIST_SEED`, then `--set` overrides.
fn load<T: Serialize + DeserializeOwned>(
    args: &CommonArgs,
    default: Option<T>,
) -> Result<T, Failure> {
    let mut value = match (&args.config, default) {
        (Some(path), _) => read_json(path)?,
        (None, Some(d)) => serde_json::to_value(d).map_err(Failure::runtime)?,
        (None, None) => return Err(Failure::config(anyhow!("--config is required"))),
    };
    if let Ok(seed) = std::env::var(SEED_ENV) {
        let seed: u64 = seed.trim().parse().map_err(|_| {
            Failure::config(anyhow!("{SEED_ENV}={seed:?} is not an unsigned integer"))
        })?;
        set_path(&mut value, "base_seed", Value::from(seed))?;
    }
    for item in &args.overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| Failure::config(anyhow!("--set expects KEY=VALUE, got {item:?}")))?;
        let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
        set_path(&mut value, key, parsed)?;
    }
    serde_json::from_value(value).map_err(|e| Failure::config(anyhow!("invalid config: {e}")))
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))
        .map_err(Failure::config)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))
        .map_err(Failure::config)
}

/// Assign `value` at a dotted `key`. Every segment must already exist,
/// except the last one of an object whose schema knows it but omitted it.
fn set_path(root: &mut Value, key: &str, value: Value) -> Result<(), Failure> {
    let unknown = || Failure::config(anyhow!("unknown override key `{key}`"));
    let mut segments = key.split('.').peekable();
    let mut node = root;
    while let Some(seg) = segments.next() {
        let obj = node.as_object_mut().ok_or_else(unknown)?;
        if segments.peek().is_none() {
            if !obj.contains_key(seg) && !OPTIONAL_KEYS.contains(&seg) {
                return Err(unknown());
            }
            obj.insert(seg.to_owned(), value);
            return Ok(());
        }
        node = obj.get_mut(seg).ok_or_else(unknown)?;
    }
    Err(unknown())
}

/// Fields that may be absent from a config yet are still valid targets.
const OPTIONAL_KEYS: &[&str] = &[
    "output_path",
    "instance_mode",
    "std",
    "sigma_override",
    "policy",
    "width_scale",
    "phase1_constant",
    "ncb_prefix_rounds",
    "ncb_constant",
    "explore_rounds_per_arm",
];
