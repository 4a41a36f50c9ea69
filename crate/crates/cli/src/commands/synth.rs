use std::path::PathBuf;

use clap::{Args, Subcommand};
use cpwkit::devices::{build_hybrid_8part, hybrid_center_frequency, synth_coupler, CouplerSpec, HybridSpec, DEFAULT_EPS_EFF};
use cpwkit::metrics::{compute_metrics, MetricRow};
use cpwkit::{FrequencySweep, DEFAULT_Z0};

use super::{fmt_hz, Outcome, SweepArgs};
use crate::error::{CliError, CliResult};
use crate::io::{self, TouchstoneOut};
use crate::netlist::{Element, Netlist, SweepDef, SCHEMA_VERSION};

#[derive(Debug, Subcommand)]
pub enum SynthCmd {
    /// Quarter-wave edge-coupled directional coupler.
    Coupler(CouplerArgs),
    /// Branch-line quadrature hybrid built from junctions and line sections.
    Hybrid(HybridArgs),
}

#[derive(Debug, Args)]
pub struct CouplerArgs {
    /// Design frequency (Hz).
    #[arg(long)]
    pub f0: f64,
    /// Coupling magnitude (dB, positive).
    #[arg(long)]
    pub coupling_db: f64,
    /// System impedance (ohm).
    #[arg(long, default_value_t = DEFAULT_Z0)]
    pub z0: f64,
    /// Fractional even/odd phase-velocity difference.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub velocity_mismatch: f64,
    /// Mean effective permittivity of the two modes.
    #[arg(long, default_value_t = DEFAULT_EPS_EFF)]
    pub eps_eff: f64,
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Output .s4p file.
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub out: TouchstoneOut,
}

#[derive(Debug, Args)]
pub struct HybridArgs {
    /// Design frequency (Hz).
    #[arg(long)]
    pub f0: f64,
    /// System impedance (ohm).
    #[arg(long, default_value_t = DEFAULT_Z0)]
    pub z0: f64,
    /// Through-arm impedance [default: z0 / sqrt 2].
    #[arg(long)]
    pub through_z: Option<f64>,
    /// Branch-arm impedance [default: z0].
    #[arg(long)]
    pub branch_z: Option<f64>,
    /// Shunt capacitance at each junction (F).
    #[arg(long, default_value_t = 0.0)]
    pub c_shunt: f64,
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Output .s4p file.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Also write the equivalent netlist (JSON).
    #[arg(long)]
    pub netlist_out: Option<PathBuf>,
    #[command(flatten)]
    pub out: TouchstoneOut,
}

pub fn run(cmd: &SynthCmd) -> CliResult<Outcome> {
    match cmd {
        SynthCmd::Coupler(a) => coupler(a),
        SynthCmd::Hybrid(a) => hybrid(a),
    }
}

fn metrics_at(net: &cpwkit::Network) -> CliResult<MetricRow> {
    Ok(compute_metrics(net, 1)?.rows[0])
}

fn coupler(a: &CouplerArgs) -> CliResult<Outcome> {
    let spec = CouplerSpec {
        f0: a.f0,
        coupling_db: a.coupling_db,
        z0: a.z0,
        velocity_mismatch: a.velocity_mismatch,
        eps_eff: a.eps_eff,
    };
    spec.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let sweep = a.sweep.resolve(a.f0)?;
    let design = synth_coupler(&spec, &sweep)?;
    let p = &design.params;
    let note = format!(
        "coupler f0 = {} Hz, coupling {} dB, z0e = {:.6} ohm, z0o = {:.6} ohm, length = {:.6e} m",
        a.f0, a.coupling_db, p.z0e, p.z0o, design.length
    );
    a.out.write(&a.output, &design.network, &[note])?;

    let at_f0 = synth_coupler(&spec, &FrequencySweep::single(a.f0)?)?;
    let m = metrics_at(&at_f0.network)?;
    println!("coupler at {}", fmt_hz(a.f0));
    println!("  even-mode impedance   {:.4} ohm", p.z0e);
    println!("  odd-mode impedance    {:.4} ohm", p.z0o);
    println!("  eps_eff even / odd    {:.4} / {:.4}", p.eps_e, p.eps_o);
    println!("  length                {:.2} um", design.length * 1e6);
    println!("  coupling at f0        {:.3} dB", m.coupling_db);
    println!("  through at f0         {:.3} dB", m.through_db);
    println!("  isolation at f0       {:.2} dB", m.isolation_db);
    println!("wrote {}", a.output.display());
    Ok(Outcome::Ok)
}

fn hybrid_spec(a: &HybridArgs) -> HybridSpec {
    let mut spec = HybridSpec::new(a.f0, a.z0).with_c_shunt(a.c_shunt);
    if let Some(z) = a.through_z {
        spec.through_z = z;
    }
    if let Some(z) = a.branch_z {
        spec.branch_z = z;
    }
    spec
}

fn hybrid(a: &HybridArgs) -> CliResult<Outcome> {
    let spec = hybrid_spec(a);
    spec.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let sweep = a.sweep.resolve(a.f0)?;
    let net = build_hybrid_8part(&spec, &sweep)?;
    let note = format!(
        "branch-line hybrid f0 = {} Hz, through arms {:.6} ohm, branch arms {:.6} ohm, junction C = {:e} F",
        a.f0, spec.through_z, spec.branch_z, spec.t_junction.c_shunt
    );
    a.out.write(&a.output, &net, &[note])?;
    if let Some(path) = &a.netlist_out {
        let def = SweepDef {
            start_hz: sweep.start(),
            stop_hz: sweep.stop(),
            points: sweep.len(),
        };
        io::write_text(path, &hybrid_netlist(&spec, def).to_json())?;
    }

    let m = metrics_at(&build_hybrid_8part(&spec, &FrequencySweep::single(a.f0)?)?)?;
    let fc = hybrid_center_frequency(&spec)?;
    println!("branch-line hybrid at {}", fmt_hz(a.f0));
    println!("  through arms          {:.4} ohm", spec.through_z);
    println!("  branch arms           {:.4} ohm", spec.branch_z);
    println!("  through at f0         {:.3} dB", m.through_db);
    println!("  coupling at f0        {:.3} dB", m.coupling_db);
    println!("  return loss at f0     {:.2} dB", m.return_loss_db);
    println!("  isolation at f0       {:.2} dB", m.isolation_db);
    println!("  center frequency      {}", fmt_hz(fc));
    println!("wrote {}", a.output.display());
    Ok(Outcome::Ok)
}

/// Netlist of the eight-part hybrid: a junction at each corner, through
/// arms input-through and isolated-coupled, branch arms input-isolated and
/// through-coupled.
pub fn hybrid_netlist(spec: &HybridSpec, sweep: SweepDef) -> Netlist {
    let junction = |name: &str, nodes: [&str; 3]| Element::Junction {
        name: name.into(),
        nodes: nodes.iter().map(|s| s.to_string()).collect(),
        c_shunt_f: spec.t_junction.c_shunt,
    };
    let arm = |name: &str, nodes: [&str; 2], z0: f64, deg: f64| Element::ElectricalLine {
        name: name.into(),
        nodes: nodes.iter().map(|s| s.to_string()).collect(),
        z0,
        electrical_deg: deg,
        f_ref_hz: spec.f0,
    };
    let (tz, td, bz, bd) = (spec.through_z, spec.through_deg, spec.branch_z, spec.branch_deg);
    Netlist {
        version: SCHEMA_VERSION,
        z0: spec.z0,
        sweep,
        elements: vec![
            junction("JA", ["input", "a_t1", "a_b1"]),
            arm("T1", ["a_t1", "b_t1"], tz, td),
            junction("JB", ["through", "b_t1", "b_b2"]),
            arm("B2", ["b_b2", "c_b2"], bz, bd),
            junction("JC", ["coupled", "c_b2", "c_t2"]),
            arm("T2", ["d_t2", "c_t2"], tz, td),
            junction("JD", ["isolated", "d_t2", "d_b1"]),
            arm("B1", ["a_b1", "d_b1"], bz, bd),
        ],
        ports: ["input", "through", "coupled", "isolated"].iter().map(|s| s.to_string()).collect(),
    }
}
