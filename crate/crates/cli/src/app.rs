//! Command-line front end, kept in the library so exit codes are testable.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use crate::config::{ExperimentConfig, RawConfig};
use crate::experiment::{run_experiment, Mode};
use crate::overlay::{scalar, write_curve, TheoryName};
use crate::validate::{criterion_ids, validate_suite_with, ValidateOptions};
use crate::CliError;
use clap::{Args, Parser, Subcommand};

/// Boolean delay equation simulator for damage spreading on production networks.
#[derive(Parser)]
#[command(name = "bdenet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Theory curve or scalar; repeatable.
    #[arg(long = "overlay")]
    overlays: Vec<String>,
    /// Extra `key=value` setting, applied after the file; repeatable.
    #[arg(long = "set")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Single run: trajectory, cycle detection, overlays.
    Simulate(Common),
    /// N_s replicas with freshly drawn disorder.
    Ensemble(Common),
    /// Component analysis of one sampled network.
    Components(Common),
    /// Print predictions as `t_days,value` CSV or `key=value` lines.
    Theory(Common),
    /// Run the acceptance criteria.
    Validate {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        /// Directory for `validation.json`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Criterion ids to run, comma-separated.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        /// `ID=FACTOR` multiplier on one criterion's tolerances; repeatable.
        #[arg(long = "tolerance-scale")]
        tolerance_scale: Vec<String>,
    },
}

fn load(common: &Common, curves_only: bool) -> Result<ExperimentConfig, CliError> {
    let mut raw = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config("--config", format!("{}: {e}", path.display())))?;
            RawConfig::parse(&text)?
        }
        None => RawConfig::default(),
    };
    for pair in &common.sets {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::config("--set", format!("expected key=value, got `{pair}`")))?;
        raw.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = common.seed {
        raw.set("seed", seed.to_string())?;
    }
    if let Some(w) = common.workers {
        raw.set("workers", w.to_string())?;
    }
    if let Some(out) = &common.out {
        raw.set("out", out.display().to_string())?;
    }
    if curves_only && !common.overlays.is_empty() {
        raw.set("overlay", common.overlays.join(","))?;
    }
    ExperimentConfig::from_raw(&raw)
}

fn experiment(common: &Common, mode: Mode) -> Result<(), CliError> {
    let config = load(common, true)?;
    let manifest = run_experiment(&config, mode)?;
    for entry in &manifest.files {
        println!("{}  {}", entry.sha256, config.out.join(&entry.path).display());
    }
    Ok(())
}

fn theory(common: &Common) -> Result<(), CliError> {
    let config = load(common, false)?;
    if common.overlays.is_empty() {
        return Err(CliError::config("--overlay", "name at least one prediction"));
    }
    for name in &common.overlays {
        match TheoryName::from_name(name)? {
            TheoryName::Curve(curve) => {
                let mut buf = Vec::new();
                write_curve(&curve.curve(&config)?, &mut buf)?;
                print!("{}", String::from_utf8_lossy(&buf));
            }
            TheoryName::Scalar(which) => {
                for (k, v) in scalar(which, &config)? {
                    println!("{k}={v}");
                }
            }
        }
    }
    Ok(())
}

fn validate(
    seed: Option<u64>,
    workers: Option<usize>,
    out: Option<PathBuf>,
    only: Vec<String>,
    scales: Vec<String>,
) -> Result<(), CliError> {
    let mut options = ValidateOptions {
        workers,
        ..ValidateOptions::default()
    };
    if let Some(seed) = seed {
        options.seed = seed;
    }
    let ids = criterion_ids();
    for id in &only {
        if !ids.contains(&id.as_str()) {
            return Err(CliError::config("--only", format!("no criterion `{id}`")));
        }
    }
    if !only.is_empty() {
        options.only = Some(only);
    }
    let mut tolerance_scale = BTreeMap::new();
    for pair in scales {
        let parsed = pair
            .split_once('=')
            .and_then(|(id, f)| f.parse::<f64>().ok().map(|f| (id.to_string(), f)))
            .filter(|(id, f)| ids.contains(&id.as_str()) && *f >= 0.0);
        let (id, f) =
            parsed.ok_or_else(|| CliError::config("--tolerance-scale", format!("expected ID=FACTOR, got `{pair}`")))?;
        tolerance_scale.insert(id, f);
    }
    options.tolerance_scale = tolerance_scale;

    let report = validate_suite_with(&options, |c| {
        println!("{}", c.headline());
        print!("{}", c.details());
    });
    let passed = report.criteria.iter().filter(|c| c.passed).count();
    println!("{passed}/{} criteria passed", report.criteria.len());
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir)?;
        let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
        std::fs::write(dir.join("validation.json"), text + "\n")?;
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate(c) => experiment(&c, Mode::Simulate),
        Command::Ensemble(c) => experiment(&c, Mode::Ensemble),
        Command::Components(c) => experiment(&c, Mode::Components),
        Command::Theory(c) => theory(&c),
        Command::Validate {
            seed,
            workers,
            out,
            only,
            tolerance_scale,
        } => validate(seed, workers, out, only, tolerance_scale),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("bdenet: {e}");
            e.exit_code()
        }
    }
}
