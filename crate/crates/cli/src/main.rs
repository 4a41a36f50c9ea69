//! `cpwkit`: synthesis, simulation, TRL calibration and spec checking for
//! coplanar-waveguide couplers and hybrids.
//!
//! Exit status: 0 success, 1 spec not met, 2 usage error, 3 data error.

mod commands;
mod error;
mod io;
mod manifest;
mod netlist;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::analyze::{CheckArgs, MetricsArgs, OptimizeArgs, SimulateArgs};
use commands::calibrate::{TrlCalArgs, VirtualStationArgs};
use commands::synth::SynthCmd;
use commands::Outcome;
use error::{CliError, CliResult};

/// Worker threads for parallel sweeps; defaults to one per core.
const THREADS_ENV: &str = "CPWKIT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "cpwkit", version, about = "CPW coupler and hybrid design, simulation and TRL calibration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a device and write its S-parameters.
    #[command(subcommand)]
    Synth(SynthCmd),
    /// Simulate a JSON netlist.
    Simulate(SimulateArgs),
    /// Calibrate raw measurements with Thru-Reflect-Line and de-embed the device.
    TrlCal(TrlCalArgs),
    /// Generate a synthetic raw measurement set for a known device.
    VirtualStation(VirtualStationArgs),
    /// Figures of merit of a 4-port as CSV.
    Metrics(MetricsArgs),
    /// Check a 4-port against a design spec.
    Check(CheckArgs),
    /// Tune netlist parameters until a design spec is met.
    Optimize(OptimizeArgs),
}

fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::usage(format!("{THREADS_ENV}={v} must be a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::usage(format!("{THREADS_ENV}: {e}")))
}

fn run(cli: &Cli) -> CliResult<Outcome> {
    configure_threads()?;
    match &cli.command {
        Command::Synth(c) => commands::synth::run(c),
        Command::Simulate(a) => commands::analyze::simulate(a),
        Command::TrlCal(a) => commands::calibrate::trl_cal(a),
        Command::VirtualStation(a) => commands::calibrate::virtual_station_cmd(a),
        Command::Metrics(a) => commands::analyze::metrics(a),
        Command::Check(a) => commands::analyze::check(a),
        Command::Optimize(a) => commands::analyze::optimize(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::SpecFail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
