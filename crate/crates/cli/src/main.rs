use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ensel_core::copula::fit_copula_report;
use ensel_core::harness::{
    copula_validation_files, curve_files, load_data, run_copula_validation, run_error_curve_on,
    run_saturation, write_outputs, DataSource,
};
use ensel_core::{Error, ExperimentConfig};

#[derive(Parser)]
#[command(name = "ensel", version, about = "Budgeted ensemble selection for correlated binary classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test error versus ensemble size for each method and aggregator
    Curve(Common),
    /// Fit a copula to the data and compare it with a synthetic sample
    ValidateCopula(Common),
    /// Majority-vote error of growing equicorrelated ensembles
    Saturate(Common),
    /// Fit a copula model to the data and write it as JSON
    FitCopula(Common),
    /// Write a synthetic prediction CSV from the configured generator
    Sample(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf), Error> {
        let mut config = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        let out = self
            .out
            .clone()
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("ensel-out"));
        Ok((config, out))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::InvalidArgument(_) | Error::Parse { .. } | Error::Io { .. } | Error::Json(_) => 3,
        Error::ResourceLimit(_) => 4,
        Error::Internal(_) => 1,
    }
}

fn run(command: &Command) -> Result<(), Error> {
    let start = Instant::now();
    match command {
        Command::Curve(c) => {
            let (config, out) = c.load()?;
            let data = load_data(&config)?;
            let report = run_error_curve_on(&data, &config)?;
            let files = curve_files(&report);
            finish(&out, "curve", &config, &files, &report.warnings, start)?;
            for s in &report.summary {
                println!("{} {} k={} mean={:.4} std={:.4}", s.method, s.aggregator, s.k, s.mean, s.std);
            }
        }
        Command::ValidateCopula(c) => {
            let (config, out) = c.load()?;
            let data = load_data(&config)?;
            let (fit, diag) = run_copula_validation(&data, config.n_synth, config.seed)?;
            let warnings = clamp_warnings(&fit.clamped_pairs);
            finish(&out, "validate-copula", &config, &copula_validation_files(&fit, &diag)?, &warnings, start)?;
            println!(
                "{} models, {} pairs, mean off-diagonal rho {:.4}",
                fit.model.n_models(),
                diag.pairs.len(),
                diag.mean_offdiag_rho
            );
        }
        Command::Saturate(c) => {
            let (config, out) = c.load()?;
            let sat = config
                .saturation
                .as_ref()
                .ok_or_else(|| Error::Config("`saturate` needs a `saturation` section".into()))?;
            let table = run_saturation(sat, config.seed)?;
            finish(&out, "saturate", &config, &[("saturation.csv", table.to_csv())], &[], start)?;
            for r in &table.rows {
                println!("m={} error={:.4} (se {:.4}) floor={:.4}", r.m, r.error, r.std_error, table.floor);
            }
        }
        Command::FitCopula(c) => {
            let (config, out) = c.load()?;
            let data = load_data(&config)?;
            let fit = fit_copula_report(&data)?;
            let warnings = clamp_warnings(&fit.clamped_pairs);
            finish(&out, "fit-copula", &config, &[("copula_model.json", fit.model.to_json()?)], &warnings, start)?;
            println!("fitted {} models", fit.model.n_models());
        }
        Command::Sample(c) => {
            let (config, out) = c.load()?;
            if let DataSource::Csv { .. } = config.data {
                return Err(Error::Config("`sample` needs a synthetic data source".into()));
            }
            let data = load_data(&config)?;
            finish(&out, "sample", &config, &[("samples.csv", data.to_csv_string())], &[], start)?;
            println!("wrote {} rows x {} models", data.n_rows(), data.n_models());
        }
    }
    Ok(())
}

fn clamp_warnings(pairs: &[(usize, usize)]) -> Vec<String> {
    pairs
        .iter()
        .map(|(i, j)| format!("tetrachoric correlation clamped for pair ({i}, {j})"))
        .collect()
}

fn finish(
    out: &Path,
    command: &str,
    config: &ExperimentConfig,
    files: &[(&str, String)],
    warnings: &[String],
    start: Instant,
) -> Result<(), Error> {
    write_outputs(out, command, config, files, warnings, start.elapsed().as_secs_f64())?;
    log::info!("wrote {} files to {}", files.len() + 1, out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
