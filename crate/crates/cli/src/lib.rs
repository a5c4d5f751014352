//! Command-line front end for `geopulse`.
//!
//! ```text
//! geopulse <simulate|sweep|compare|heatmap|optimize|export-awg|verify>
//!          [--config FILE] [--gate G|all] [--preset op1|op2] [--t1-us T]
//!          [--seed N] [--out-dir DIR] [--points N]
//! ```

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod verify;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use geopulse::presets::Preset;

use crate::commands::{effective_config, run, Command, Overrides};
use crate::config::GateChoice;
pub use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "geopulse",
    version,
    about = "Robust geometric-gate pulse design and analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,

    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Gate: sigmax, sigmay, sigmaz, hadamard or all.
    #[arg(long, global = true)]
    pub gate: Option<GateChoice>,

    /// Coefficient preset, replacing the configured source.
    #[arg(long, global = true, value_parser = parse_preset)]
    pub preset: Option<Preset>,

    /// Gate-pair duration in µs.
    #[arg(long = "t1-us", global = true)]
    pub t1_us: Option<f64>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long = "out-dir", global = true, default_value = "out")]
    pub out_dir: PathBuf,

    /// Detuning point count for the chosen command.
    #[arg(long, global = true)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Cmd {
    /// Population trace and pulse envelopes at one detuning.
    Simulate,
    /// Fidelity against detuning.
    Sweep,
    /// Optimized envelope against Gaussian and square baselines.
    Compare,
    /// Fidelity over (a₂ variation, detuning) with the F = 0.99 contour.
    Heatmap,
    /// Minimax search over the free coefficients.
    Optimize,
    /// Two-tone AWG waveform.
    ExportAwg,
    /// Check a preset coefficient row.
    Verify,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Simulate => Command::Simulate,
            Cmd::Sweep => Command::Sweep,
            Cmd::Compare => Command::Compare,
            Cmd::Heatmap => Command::Heatmap,
            Cmd::Optimize => Command::Optimize,
            Cmd::ExportAwg => Command::ExportAwg,
            Cmd::Verify => Command::Verify,
        }
    }
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: geopulse::Error| e.to_string())
}

/// Runs the CLI on `args` and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let cmd = Command::from(cli.command);
    let ov = Overrides {
        gate: cli.gate,
        preset: cli.preset,
        t1_us: cli.t1_us,
        seed: cli.seed,
        points: cli.points,
    };
    let result = effective_config(cli.config.as_deref(), cmd, &ov)
        .and_then(|cfg| run(cmd, &cfg, &cli.out_dir));
    match result {
        Ok(outcome) => outcome.exit_code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
