//! `isac-lab`: synthesize and evaluate secure ISAC transmit designs.
//!
//! Subcommands:
//!   beamform  point-target secure design: design record + beampattern
//!   robust    robust design under angle/channel uncertainty, with audits
//!   ci        symbol-level precoding of a PSK frame
//!   sweep     secrecy-rate-versus-power sweep against the oblivious baseline
//!
//! Exit codes: 0 success, 1 usage/config error, 2 infeasible scenario.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod run;

#[derive(Parser)]
#[command(name = "isac-lab", version, about = "Secure ISAC transmit design simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Scenario configuration file.
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Cap the worker thread count.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Secure beamforming design for the nominal (point-target) scenario.
    Beamform {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Robust design over the configured uncertainty, with Monte-Carlo audit.
    Robust {
        #[command(flatten)]
        common: CommonArgs,
        /// Channel-error audit draw count (default: 10000).
        #[arg(long)]
        audit_draws: Option<usize>,
    },
    /// Symbol-level constructive/destructive-interference precoding.
    Ci {
        #[command(flatten)]
        common: CommonArgs,
        /// Input frame CSV (columns slot,stream,symbol_index); otherwise a
        /// random frame of `[run].trials` slots is generated.
        #[arg(long)]
        frame: Option<PathBuf>,
    },
    /// Secrecy-rate sweep over transmit powers.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated power points in dBm, ascending.
        #[arg(long, default_value = "10,12.5,15,17.5,20")]
        powers_dbm: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Beamform { common } => run::with_setup(&common.config, common.threads, |cfg| {
            run::beamform(cfg, &common.out)
        }),
        Command::Robust {
            common,
            audit_draws,
        } => run::with_setup(&common.config, common.threads, |cfg| {
            run::robust(cfg, &common.out, audit_draws)
        }),
        Command::Ci { common, frame } => run::with_setup(&common.config, common.threads, |cfg| {
            run::ci(cfg, &common.out, frame.as_deref())
        }),
        Command::Sweep { common, powers_dbm } => {
            run::with_setup(&common.config, common.threads, |cfg| {
                run::sweep(cfg, &common.out, &powers_dbm)
            })
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            match e {
                isac_core::Error::Infeasible(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
