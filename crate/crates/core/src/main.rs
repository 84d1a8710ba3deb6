// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qubit_ident::error::{Error, Result};
use qubit_ident::experiments::{self, ExperimentConfig};

const EXIT_AMBIGUOUS: u8 = 4;

#[derive(Parser)]
#[command(name = "qubit-ident", version, about = "Qubit parameter identification experiments")]
struct Cli {
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Protocol times, their validity checks and the shot bound.
    Design,
    /// One simulated experiment with its confidence region.
    RunOnce,
    /// RMSE per parameter over repeated trials.
    Rmse,
    /// RMSE against shot count.
    Convergence,
    /// Confidence-region polylines at two pulse amplitudes.
    Regions,
    /// Branch disambiguation over randomised repeats.
    Adaptive,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Design => "design",
            Command::RunOnce => "run-once",
            Command::Rmse => "rmse",
            Command::Convergence => "convergence",
            Command::Regions => "regions",
            Command::Adaptive => "adaptive",
        }
    }
}

fn emit(out: Option<&Path>, file: &str, text: &str) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(file), text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn run(cli: &Cli) -> Result<u8> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let name = cli.command.name();
    let out = cli.out.as_deref();
    let file = |ext: &str| format!("{name}.{ext}");
    let csv = cli.format == Format::Csv;

    match cli.command {
        Command::Design => {
            let d = experiments::cmd_design(&cfg)?;
            let text = if csv { d.to_csv(&cfg) } else { json(&d)? };
            emit(out, &file(if csv { "csv" } else { "json" }), &text)?;
            if !d.diagnostics.all_pass() {
                return Err(Error::InvalidArgument(format!(
                    "design checks failed: {}",
                    d.diagnostics.failures().join("; ")
                )));
            }
        }
        Command::RunOnce => {
            // the report is structured; CSV output flattens only the estimate
            let r = experiments::cmd_run_once(&cfg)?;
            let text = if csv {
                let t = &r.theta_hat;
                format!(
                    "# {} run-once seed={}\ngamma1,kappa,gamma2,omega,n,chi2_threshold,bias_gamma1,bias_kappa,bias_gamma2,bias_omega\n{},{},{},{},{},{},{},{},{},{}\n",
                    r.version, cfg.seed, t.gamma1, t.kappa, t.gamma2, t.omega, r.n, r.chi2_threshold,
                    r.bias_box[0], r.bias_box[1], r.bias_box[2], r.bias_box[3]
                )
            } else {
                json(&r)?
            };
            emit(out, &file(if csv { "csv" } else { "json" }), &text)?;
        }
        Command::Rmse => {
            let t = experiments::cmd_rmse(&cfg)?;
            let text = if csv { t.to_csv(&cfg) } else { json(&t)? };
            emit(out, &file(if csv { "csv" } else { "json" }), &text)?;
        }
        Command::Convergence => {
            let t = experiments::cmd_convergence(&cfg)?;
            let text = if csv { t.to_csv(&cfg) } else { json(&t)? };
            emit(out, &file(if csv { "csv" } else { "json" }), &text)?;
        }
        Command::Regions => {
            let r = experiments::cmd_regions(&cfg)?;
            let text = if csv { r.to_csv(&cfg) } else { json(&r)? };
            emit(out, &file(if csv { "csv" } else { "json" }), &text)?;
        }
        Command::Adaptive => {
            let a = experiments::cmd_adaptive(&cfg)?;
            if csv {
                emit(out, "adaptive.csv", &a.to_csv(&cfg))?;
                if out.is_some() {
                    emit(out, "adaptive_rounds.csv", &a.rounds_csv(&cfg))?;
                }
            } else {
                emit(out, "adaptive.json", &json(&a)?)?;
            }
            if a.ambiguous {
                eprintln!("ambiguous: {} candidates survive after {} rounds", a.survivors.len(), a.rounds.len());
                return Ok(EXIT_AMBIGUOUS);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
