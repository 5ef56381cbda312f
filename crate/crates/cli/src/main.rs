//! Command-line runner for the experiment suites.
//!
//! Exit codes: 0 when every check passes, 1 on input or I/O errors, 2 when the
//! suite ran but at least one check failed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mfteam::config::{default_config, ExperimentConfig, Suite};
use mfteam::suites::run_suite;

#[derive(Debug, Parser)]
#[command(name = "mfteam", version, about = "Run a mean-field team experiment suite")]
struct Args {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Suite name. Without --config the shipped default for the suite is used;
    /// with --config it must match the file's suite.
    #[arg(long)]
    suite: Option<String>,
    /// Override the Monte Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the Monte Carlo sample count.
    #[arg(long)]
    samples: Option<usize>,
    /// Output directory; defaults to the config's output_path, then `results`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(args: &Args) -> mfteam::Result<ExperimentConfig> {
    let suite = args.suite.as_deref().map(str::parse::<Suite>).transpose()?;
    let mut cfg = match (&args.config, suite) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(suite)) => default_config(suite),
        (None, None) => {
            return Err(mfteam::Error::Config(format!(
                "pass --config or --suite; valid suites: {}",
                Suite::valid_names()
            )))
        }
    };
    if let Some(suite) = suite {
        if suite != cfg.suite() {
            return Err(mfteam::Error::Config(format!(
                "--suite {suite} does not match the config's suite {}",
                cfg.suite()
            )));
        }
    }
    if let Some(seed) = args.seed {
        cfg.set_seed(seed);
    }
    if let Some(samples) = args.samples {
        cfg.set_samples(samples);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("MFTEAM_THREADS") else {
        return Ok(());
    };
    let threads: usize =
        value.parse().map_err(|_| format!("MFTEAM_THREADS must be a positive integer, got '{value}'"))?;
    if threads == 0 {
        return Err("MFTEAM_THREADS must be ≥ 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let cfg = match load(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let report = match run_suite(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let dir = args.out.clone().or_else(|| cfg.output_path().cloned()).unwrap_or_else(|| PathBuf::from("results"));
    match report.write(&dir) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
