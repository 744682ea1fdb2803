//! Command-line front end: `run`, `validate` and `plot`.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{DissError, Result};
use crate::plot::{plot_files, render_svg};
use crate::runner::{
    aggregate, build_environment, curve_rows, interpretability_sweep, run_experiment, write_curves_csv, CurveRow, Method,
};

#[derive(Debug, Parser)]
#[command(name = "diss", version, about = "Budgeted querying of black-box decision-makers")]
pub struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every configured strategy and seed, then write curves, buffers,
    /// a manifest and a chart.
    Run {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Added to every configured seed.
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
    },
    /// Check a config and print it with all defaults filled in.
    Validate { config: PathBuf },
    /// Chart one or more curves.csv files.
    Plot {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub output_dir: Option<PathBuf>,
    pub seed_offset: u64,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub name: String,
    pub version: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub seed_offset: u64,
    pub strategies: Vec<String>,
    pub checkpoints: Vec<usize>,
    pub failed_seeds: Vec<FailedSeed>,
    pub files: Vec<String>,
    pub config: String,
}

#[derive(Debug, Serialize)]
pub struct FailedSeed {
    pub strategy: String,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub rows: Vec<CurveRow>,
    pub manifest: Manifest,
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| DissError::io(path, e))
}

/// Validates, runs and writes all artifacts. Nothing is written when the
/// config is invalid.
pub fn cmd_run(config_path: &Path, opts: &RunOptions) -> Result<RunSummary> {
    let (cfg, base) = ExperimentConfig::load(config_path)?;
    run_config(&cfg, &base, opts)
}

/// Runs an already parsed config. Relative data and output paths in the
/// config resolve against `base`; an explicit `opts.output_dir` is used as is.
pub fn run_config(cfg: &ExperimentConfig, base: &Path, opts: &RunOptions) -> Result<RunSummary> {
    cfg.validate(base)?;
    let methods = cfg.methods()?;
    let seeds: Vec<u64> = cfg.seeds.iter().map(|s| s + opts.seed_offset).collect();
    let env = build_environment(&cfg.dataset, &cfg.environment, cfg.reward.to_spec(), base)?;
    let acq = cfg.acquisition.to_config();

    let out = opts.output_dir.clone().unwrap_or_else(|| base.join(&cfg.output_dir));
    let buffers = out.join("buffers");
    std::fs::create_dir_all(&buffers).map_err(|e| DissError::io(&buffers, e))?;

    let mut files = Vec::new();
    let mut curves = Vec::new();
    let mut failed = Vec::new();
    for &m in &methods {
        let outcome = run_experiment(&env, &acq, m, &seeds)?;
        for r in &outcome.runs {
            let name = format!("buffers/{}_seed{}.ndjson", m.key(), r.seed);
            r.buffer.save(&out.join(&name))?;
            files.push(name);
        }
        failed.extend(outcome.failed.iter().map(|(s, e)| FailedSeed { strategy: m.label().into(), seed: *s, error: e.to_string() }));
        curves.extend(outcome.curves());
    }
    let rows = curve_rows(&curves);
    write_curves_csv(&out.join("curves.csv"), &rows)?;
    files.push("curves.csv".into());
    write(&out.join("curves.svg"), render_svg(&aggregate(&rows)?)?)?;
    files.push("curves.svg".into());

    if let Some(sweep) = &cfg.sweep {
        let method = Method::parse(&sweep.strategy).expect("validated");
        let table = interpretability_sweep(&env, &sweep.lambdas, &acq, method, &seeds)?;
        let path = out.join("sweep.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| DissError::Schema(e.to_string()))?;
        for row in &table {
            w.serialize(row).map_err(|e| DissError::Schema(e.to_string()))?;
        }
        w.flush().map_err(|e| DissError::io(&path, e))?;
        files.push("sweep.csv".into());
    }

    let manifest = Manifest {
        name: cfg.name.clone(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        config_sha256: cfg.hash()?,
        seeds,
        seed_offset: opts.seed_offset,
        strategies: methods.iter().map(|m| m.label().to_owned()).collect(),
        checkpoints: acq.checkpoints(),
        failed_seeds: failed,
        files,
        config: cfg.to_toml()?,
    };
    write(&out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(RunSummary { output_dir: out, rows, manifest })
}

/// Returns the resolved config as TOML.
pub fn cmd_validate(config_path: &Path) -> Result<String> {
    let (cfg, _) = ExperimentConfig::load(config_path)?;
    cfg.to_toml()
}

pub fn cmd_plot(inputs: &[PathBuf], output: &Path) -> Result<()> {
    plot_files(inputs, output)
}

fn exit_code(e: &DissError) -> i32 {
    match e {
        DissError::InvalidConfig { .. } => 2,
        _ => 1,
    }
}

/// Parses arguments, dispatches, and maps errors to exit codes.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let pool = match cli.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return 1;
        }
    };
    let result = pool.install(|| match &cli.command {
        Command::Run { config, output_dir, seed_offset } => {
            let opts = RunOptions { output_dir: output_dir.clone(), seed_offset: *seed_offset };
            cmd_run(config, &opts).map(|s| {
                println!("wrote {} curve rows to {}", s.rows.len(), s.output_dir.display());
            })
        }
        Command::Validate { config } => cmd_validate(config).map(|t| print!("{t}")),
        Command::Plot { inputs, output } => cmd_plot(inputs, output).map(|_| println!("wrote {}", output.display())),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
