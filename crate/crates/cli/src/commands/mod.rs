pub mod analyze;
pub mod calibrate;
pub mod synth;

use clap::Args;
use cpwkit::netcore::make_sweep;
use cpwkit::{FrequencySweep, Network, SMatrix};

use crate::error::{CliError, CliResult};

/// Result of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    SpecFail,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct SweepArgs {
    /// First frequency (Hz) [default: f0 / 2].
    #[arg(long)]
    pub start: Option<f64>,
    /// Last frequency (Hz) [default: 3 f0 / 2].
    #[arg(long)]
    pub stop: Option<f64>,
    /// Number of frequency points.
    #[arg(long, default_value_t = 201)]
    pub points: usize,
}

impl SweepArgs {
    pub fn resolve(&self, f0: f64) -> CliResult<FrequencySweep> {
        let start = self.start.unwrap_or(0.5 * f0);
        let stop = self.stop.unwrap_or(1.5 * f0);
        make_sweep(start, stop, self.points).map_err(|e| CliError::usage(format!("bad sweep: {e}")))
    }
}

/// Removes the points at `drop` (sorted indices), e.g. ones holding NaN.
pub fn without_points(net: &Network, drop: &[usize]) -> CliResult<Network> {
    if drop.is_empty() {
        return Ok(net.clone());
    }
    let keep: Vec<usize> = (0..net.sweep().len()).filter(|k| drop.binary_search(k).is_err()).collect();
    if keep.is_empty() {
        return Err(CliError::data("no usable frequency points remain"));
    }
    let sweep = FrequencySweep::new(keep.iter().map(|&k| net.frequencies()[k]).collect())?;
    let mats: Vec<SMatrix> = keep.iter().map(|&k| net.s(k).clone()).collect();
    Ok(Network::new(sweep, net.z0(), mats, net.labels().to_vec())?)
}

/// Indices of points with any non-finite entry.
pub fn non_finite_points(net: &Network) -> Vec<usize> {
    net.matrices()
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_finite())
        .map(|(k, _)| k)
        .collect()
}

pub fn fmt_hz(f: f64) -> String {
    format!("{:.6} GHz", f / 1e9)
}
