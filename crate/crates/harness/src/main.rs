use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use safelimit::config::{ExperimentConfig, Preset};
use safelimit::{experiment, records, verify};

#[derive(Parser)]
#[command(name = "safelimit", version, about = "Torque-limited safe policy transfer experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pre-train, then fine-tune every job of the configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the preset named in the configuration.
        #[arg(long)]
        preset: Option<Preset>,
        /// Comma-separated seeds, overriding the configuration.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Rewrite iterations.csv per run and the aggregate summary.csv.
    EmitCsv {
        #[arg(long)]
        run: PathBuf,
    },
    /// Audit logged runs against the damage budget.
    Verify {
        #[arg(long)]
        run: PathBuf,
        /// Budget to audit against; defaults to each run's own.
        #[arg(long)]
        d_safe: Option<f64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Run {
            config,
            preset,
            seeds,
            out,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if preset.is_some() {
                cfg.preset = preset;
            }
            if let Some(seeds) = seeds {
                cfg.seeds = seeds;
            }
            let outcomes = experiment::run(&cfg, &out).with_context(|| format!("running into {}", out.display()))?;
            println!("{} run(s) written to {}", outcomes.len(), out.display());
        }
        Command::EmitCsv { run } => {
            for path in records::emit_csv(&run)? {
                println!("{}", path.display());
            }
        }
        Command::Verify { run, d_safe } => {
            if let Some(d) = d_safe {
                if !(d > 0.0 && d.is_finite()) {
                    bail!("--d-safe must be positive, got {d}");
                }
            }
            let audits = verify::verify(&run, d_safe)?;
            for a in &audits {
                println!("{a}");
            }
            let failed = audits.iter().filter(|a| !a.passes()).count();
            println!("{} run(s) audited, {failed} failed", audits.len());
            if failed > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
