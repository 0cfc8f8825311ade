//! `fsopoint`: channel characterization, controller synthesis, closed-loop
//! simulation and link metrics from one configuration file.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{MetricsMethod, RunConfig, DEFAULT_PRESET};
use error::{CliError, ErrorReport};
use output::SCHEMA_VERSION;

#[derive(Debug, Parser)]
#[command(
    name = "fsopoint",
    version,
    about = "FSO pointing: channel, H-infinity synthesis, verification, link metrics"
)]
struct Cli {
    /// Configuration file (TOML).
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Channel scintillation index.
    #[arg(long, global = true)]
    sigma2: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the open channel and fit the lognormal law.
    Characterize {
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Synthesize the state-feedback gain and certify it.
    Synthesize {
        /// Also synthesize under the printed output and noise matrices.
        #[arg(long)]
        paper_variants: bool,
        /// Largest attenuation level tried.
        #[arg(long)]
        eps_cap: Option<f64>,
    },
    /// Matched-noise open/closed-loop ensembles for a gain.
    Simulate {
        /// Gain file: a synthesis report or `{"k": [k1, k2]}`.
        #[arg(long)]
        gain: Option<PathBuf>,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Outage and BER curves for the open/closed scintillation pair.
    Metrics {
        #[arg(long, value_enum)]
        method: Option<MetricsMethod>,
        #[arg(long)]
        sigma2_open: Option<f64>,
        #[arg(long)]
        sigma2_closed: Option<f64>,
        #[arg(long)]
        mc_bits: Option<usize>,
    },
    /// Print the resolved configuration.
    ShowConfig,
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => RunConfig::preset(DEFAULT_PRESET)?,
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = cli.sigma2 {
        cfg.channel.sigma2 = s;
    }
    match &cli.command {
        Command::Characterize { steps } => {
            if let Some(n) = steps {
                cfg.channel.steps = *n;
            }
        }
        Command::Synthesize {
            paper_variants,
            eps_cap,
        } => {
            cfg.paper_variants |= *paper_variants;
            if let Some(c) = eps_cap {
                cfg.synthesis.eps_cap = *c;
            }
        }
        Command::Simulate { seeds, steps, .. } => {
            if let Some(n) = seeds {
                cfg.simulate.seeds = *n;
            }
            if let Some(n) = steps {
                cfg.simulate.steps = *n;
            }
        }
        Command::Metrics {
            method,
            sigma2_open,
            sigma2_closed,
            mc_bits,
        } => {
            if let Some(m) = method {
                cfg.metrics.method = *m;
            }
            if let Some(s) = sigma2_open {
                cfg.metrics.sigma2_open = *s;
            }
            if let Some(s) = sigma2_closed {
                cfg.metrics.sigma2_closed = *s;
            }
            if let Some(n) = mc_bits {
                cfg.metrics.mc_bits = *n;
            }
        }
        Command::ShowConfig => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Option<commands::Summary>, CliError> {
    let cfg = resolve(cli)?;
    Ok(Some(match &cli.command {
        Command::Characterize { .. } => commands::characterize(&cfg)?,
        Command::Synthesize { .. } => commands::synthesize(&cfg)?,
        Command::Simulate { gain, .. } => commands::simulate(&cfg, gain.as_deref())?,
        Command::Metrics { .. } => commands::metrics(&cfg)?,
        Command::ShowConfig => {
            print!("{}", cfg.to_toml());
            return Ok(None);
        }
    }))
}

fn fail(e: &CliError) -> ExitCode {
    let code = e.exit_code();
    let msg = e.to_string();
    let report = ErrorReport {
        schema_version: SCHEMA_VERSION,
        error: &msg,
        kind: e.kind(),
        exit_code: code,
    };
    eprintln!(
        "{}",
        serde_json::to_string(&report).expect("error report serializes")
    );
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            e.exit()
        }
        Err(e) => return fail(&CliError::Validation(e.to_string().trim().to_string())),
    };
    match run(&cli) {
        Ok(Some(summary)) => {
            println!(
                "{}",
                serde_json::to_string(&summary).expect("summary serializes")
            );
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
