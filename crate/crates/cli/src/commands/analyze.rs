use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use cpwkit::metrics::{check_spec, compute_metrics, hinge_cost, DesignSpec, SpecCheck};
use cpwkit::optim::{nelder_mead, NelderMeadOptions, Step};

use super::{fmt_hz, non_finite_points, without_points, Outcome};
use crate::error::{CliError, CliResult};
use crate::io::{self, TouchstoneOut};
use crate::netlist::{Netlist, ParamRef};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Netlist (JSON).
    pub netlist: PathBuf,
    /// Output .sNp file.
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub out: TouchstoneOut,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Four-port .s4p file.
    pub file: PathBuf,
    /// Port driven as the input (1-4).
    #[arg(long, default_value_t = 1)]
    pub input_port: usize,
    /// Write the CSV here instead of standard output.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Four-port .s4p file.
    pub file: PathBuf,
    /// Design spec (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Override the spec's input port.
    #[arg(long)]
    pub input_port: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Netlist to tune (JSON).
    #[arg(long)]
    pub netlist: PathBuf,
    /// Design spec (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Parameters to vary, comma separated. Each is ELEMENT.field, or several
    /// joined by '+' to share one value.
    #[arg(long, value_delimiter = ',', required = true)]
    pub vary: Vec<String>,
    /// Tuned netlist output.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Convergence log (CSV) [default: standard output].
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub max_iterations: usize,
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn read_netlist(path: &Path) -> CliResult<(Netlist, String)> {
    let text = io::read_text(path)?;
    let nl: Netlist = io::parse_json(&text, path)?;
    nl.validate().map_err(|e| CliError::at(path, e))?;
    Ok((nl, text))
}

fn read_spec(path: &Path) -> CliResult<DesignSpec> {
    let spec: DesignSpec = io::read_json(path)?;
    spec.validate().map_err(|e| CliError::at(path, e))?;
    Ok(spec)
}

pub fn simulate(a: &SimulateArgs) -> CliResult<Outcome> {
    let (nl, _) = read_netlist(&a.netlist)?;
    let net = nl.simulate(base_dir(&a.netlist))?;
    for d in net.diagnostics() {
        eprintln!("warning: {d}");
    }
    let bad = non_finite_points(&net);
    let mut notes = vec![format!("simulated from {}", file_name(&a.netlist))];
    for &k in &bad {
        let msg = format!("omitted {}: singular connection", fmt_hz(net.frequencies()[k]));
        eprintln!("warning: {msg}");
        notes.push(msg);
    }
    a.out.write(&a.output, &without_points(&net, &bad)?, &notes)?;
    Ok(Outcome::Ok)
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

pub fn metrics(a: &MetricsArgs) -> CliResult<Outcome> {
    let net = io::read_network_ports(&a.file, 4)?;
    let report = compute_metrics(&net, a.input_port).map_err(|e| CliError::usage(e.to_string()))?;
    match &a.output {
        Some(p) => io::write_text(p, &report.to_csv())?,
        None => print!("{}", report.to_csv()),
    }
    Ok(Outcome::Ok)
}

fn print_check(check: &SpecCheck) {
    println!("{:<24} {:>10} {:>10} {:>12} {:>16}  result", "metric", "min", "max", "margin_db", "worst_at");
    let lim = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x}"));
    for c in &check.checks {
        println!(
            "{:<24} {:>10} {:>10} {:>12.4} {:>16}  {}",
            c.target.metric.name(),
            lim(c.target.bound.min),
            lim(c.target.bound.max),
            c.worst_margin_db,
            fmt_hz(c.worst_frequency),
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    println!("{}", if check.pass { "spec met" } else { "spec not met" });
}

pub fn check(a: &CheckArgs) -> CliResult<Outcome> {
    let net = io::read_network_ports(&a.file, 4)?;
    let mut spec = read_spec(&a.spec)?;
    if let Some(p) = a.input_port {
        spec.input_port = p;
    }
    let report = compute_metrics(&net, spec.input_port)?;
    let check = check_spec(&report, &spec)?;
    print_check(&check);
    Ok(if check.pass { Outcome::Ok } else { Outcome::SpecFail })
}

fn step_name(s: Step) -> &'static str {
    match s {
        Step::Start => "start",
        Step::Reflect => "reflect",
        Step::Expand => "expand",
        Step::ContractOutside => "contract_outside",
        Step::ContractInside => "contract_inside",
        Step::Shrink => "shrink",
    }
}

pub fn optimize(a: &OptimizeArgs) -> CliResult<Outcome> {
    let (base, original_text) = read_netlist(&a.netlist)?;
    let spec = read_spec(&a.spec)?;
    let refs = a
        .vary
        .iter()
        .map(|v| ParamRef::parse(v, &base))
        .collect::<CliResult<Vec<_>>>()?;
    let dir = base_dir(&a.netlist);
    let with = |x: &[f64]| {
        let mut nl = base.clone();
        for (r, v) in refs.iter().zip(x) {
            r.set(&mut nl, *v);
        }
        nl
    };
    let cost_of = |nl: &Netlist| -> CliResult<f64> {
        let net = nl.simulate(dir)?;
        Ok(hinge_cost(&compute_metrics(&net, spec.input_port)?, &spec)?)
    };

    let x0: Vec<f64> = refs.iter().map(|r| r.get(&base)).collect();
    let c0 = cost_of(&base)?;
    let labels: Vec<String> = refs.iter().map(ParamRef::label).collect();
    let mut log = format!("iteration,step,cost,{}\n", labels.join(","));

    let (tuned_text, cost) = if c0 <= 0.0 {
        writeln!(log, "0,start,0,{}", join(&x0)).unwrap();
        (original_text, 0.0)
    } else {
        let steps: Vec<f64> = x0.iter().map(|v| if *v == 0.0 { 0.05 } else { 0.05 * v }).collect();
        let opts = NelderMeadOptions {
            max_iterations: a.max_iterations,
            ..NelderMeadOptions::default()
        };
        let r = nelder_mead(|x| cost_of(&with(x)).unwrap_or(f64::INFINITY), &x0, &steps, &opts)?;
        for h in &r.history {
            writeln!(log, "{},{},{},{}", h.iteration, step_name(h.step), h.best_cost, join(&h.best_x)).unwrap();
        }
        (with(&r.x).to_json(), r.cost)
    };

    io::write_text(&a.output, &tuned_text)?;
    match &a.log {
        Some(p) => io::write_text(p, &log)?,
        None => print!("{log}"),
    }
    let tuned: Netlist = io::parse_json(&tuned_text, &a.output)?;
    for (r, l) in refs.iter().zip(&labels) {
        eprintln!("{l} = {}", r.get(&tuned));
    }
    if cost > 0.0 {
        eprintln!("spec not met: residual cost {cost:e}");
        return Ok(Outcome::SpecFail);
    }
    eprintln!("spec met");
    Ok(Outcome::Ok)
}

fn join(x: &[f64]) -> String {
    x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}
