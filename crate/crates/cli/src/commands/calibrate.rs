use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use cpwkit::cpw::LineParams;
use cpwkit::devices::DEFAULT_EPS_EFF;
use cpwkit::elements::line2p;
use cpwkit::trl::{
    add_noise, assemble_4port, deembed, embed, pair_boxes, random_error_box, synthesize_kit, trl_solve,
    virtual_station, PairMeasurement, ReflectKind, TrlKit, TrlSolution, MEASURED_PAIRS,
};
use cpwkit::{Network, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{fmt_hz, non_finite_points, without_points, Outcome};
use crate::error::{CliError, CliResult};
use crate::io::{self, TouchstoneOut};
use crate::manifest::{Entry, Manifest, PairFiles, ReflectChoice, Role};

#[derive(Debug, Args)]
pub struct TrlCalArgs {
    /// Raw Thru (.s2p).
    #[arg(long, conflicts_with = "manifest")]
    pub thru: Option<PathBuf>,
    /// Raw Reflect (.s2p, reflections in S11 and S22).
    #[arg(long, conflicts_with = "manifest")]
    pub reflect: Option<PathBuf>,
    /// Raw Line (.s2p).
    #[arg(long, conflicts_with = "manifest")]
    pub line: Option<PathBuf>,
    /// Raw device measurement (.s2p).
    #[arg(long, conflicts_with = "manifest")]
    pub dut: Option<PathBuf>,
    /// Measurement set description (TOML) instead of individual files.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Excess physical length of the Line over the Thru (m).
    #[arg(long)]
    pub line_delta: Option<f64>,
    /// Nominal reflect standard [default: short].
    #[arg(long, value_enum)]
    pub reflect_kind: Option<ReflectChoice>,
    /// Expected effective permittivity of the Line, seeds root selection.
    #[arg(long)]
    pub eps_eff_estimate: Option<f64>,
    /// Output .s2p, or a directory when the set covers several port pairs.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Four-port model supplying the entries no probe pair can measure.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Propagation-constant report (CSV).
    #[arg(long)]
    pub gamma_csv: Option<PathBuf>,
    #[command(flatten)]
    pub out: TouchstoneOut,
}

#[derive(Debug, Args)]
pub struct VirtualStationArgs {
    /// Device under test (.s2p or .s4p).
    #[arg(long)]
    pub dut: PathBuf,
    /// Directory for the raw files and manifest.toml.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Excess length of the Line standard (m).
    #[arg(long, default_value_t = 1e-3)]
    pub line_delta: f64,
    /// Effective permittivity of the Line standard.
    #[arg(long, default_value_t = DEFAULT_EPS_EFF)]
    pub eps_eff: f64,
    /// Return loss of the terminations on unprobed device ports (dB)
    /// [default: perfect match].
    #[arg(long)]
    pub termination_rl_db: Option<f64>,
    /// Largest probe reflection magnitude.
    #[arg(long, default_value_t = 0.3)]
    pub max_reflection: f64,
    /// Largest probe insertion loss (dB).
    #[arg(long, default_value_t = 1.0)]
    pub max_loss_db: f64,
    /// Standard deviation of additive noise on raw data.
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    #[arg(long, value_enum, default_value_t = ReflectChoice::Short)]
    pub reflect_kind: ReflectChoice,
    #[command(flatten)]
    pub out: TouchstoneOut,
}

struct Settings {
    line_delta: f64,
    reflect_kind: ReflectKind,
    eps_eff_estimate: Option<f64>,
}

type PairSet = BTreeMap<(usize, usize), PairFiles>;

fn gather(a: &TrlCalArgs) -> CliResult<(PairSet, Settings)> {
    let (pairs, m_delta, m_kind, m_eps) = match &a.manifest {
        Some(path) => {
            let m = Manifest::read(path)?;
            let dir = path.parent().unwrap_or(Path::new("."));
            (m.pairs(dir)?, m.line_delta_m, m.reflect_kind, m.eps_eff_estimate)
        }
        None => {
            let named = [("--thru", &a.thru), ("--reflect", &a.reflect), ("--line", &a.line), ("--dut", &a.dut)];
            let missing: Vec<&str> = named.iter().filter(|(_, p)| p.is_none()).map(|(n, _)| *n).collect();
            if !missing.is_empty() {
                return Err(CliError::usage(format!("missing {} (or pass --manifest)", missing.join(", "))));
            }
            let files = PairFiles {
                thru: a.thru.clone().unwrap(),
                reflect: a.reflect.clone().unwrap(),
                line: a.line.clone().unwrap(),
                dut: a.dut.clone().unwrap(),
            };
            (BTreeMap::from([((1, 2), files)]), None, ReflectChoice::Short, None)
        }
    };
    let line_delta = a.line_delta.or(m_delta).ok_or_else(|| {
        CliError::usage("--line-delta is required: the Line's excess length over the Thru in metres")
    })?;
    let settings = Settings {
        line_delta,
        reflect_kind: a.reflect_kind.unwrap_or(m_kind).into(),
        eps_eff_estimate: a.eps_eff_estimate.or(m_eps),
    };
    Ok((pairs, settings))
}

struct Calibrated {
    solution: TrlSolution,
    dut: Network,
    notes: Vec<String>,
}

fn calibrate_pair(pair: (usize, usize), files: &PairFiles, s: &Settings) -> CliResult<Calibrated> {
    let thru = io::read_network_ports(&files.thru, 2)?;
    let reflect = io::read_network_ports(&files.reflect, 2)?;
    let line = io::read_network_ports(&files.line, 2)?;
    let raw = io::read_network_ports(&files.dut, 2)?;
    let kit = TrlKit::new(thru, line, reflect, s.line_delta, s.reflect_kind, s.eps_eff_estimate)?;
    let solution = trl_solve(&kit)?;
    let dut = deembed(&solution.boxes, &raw)?;
    let mut notes = Vec::new();
    for d in &solution.diagnostics {
        eprintln!("warning: ports {},{}: {d}", pair.0, pair.1);
        notes.push(d.to_string());
    }
    Ok(Calibrated { solution, dut, notes })
}

fn gamma_csv(sol: &TrlSolution, line_delta: f64) -> String {
    let mut out = String::from("frequency_hz,alpha_np_per_m,beta_rad_per_m,line_phase_deg,eps_eff,calibrated\n");
    let phase = sol.gamma.line_phase_deg(line_delta);
    let eps = sol.gamma.eps_eff();
    for (k, f) in sol.gamma.frequencies.iter().enumerate() {
        let g = sol.gamma.gamma[k];
        let ok = !sol.excluded.contains(&k);
        writeln!(out, "{f},{},{},{},{},{}", g.re, g.im, phase[k], eps[k], ok as u8).unwrap();
    }
    out
}

fn summary(pair: (usize, usize), c: &Calibrated) {
    let n = c.dut.sweep().len();
    let good = n - non_finite_points(&c.dut).len();
    let mut eps: Vec<f64> = c
        .solution
        .gamma
        .eps_eff()
        .into_iter()
        .enumerate()
        .filter(|(k, e)| e.is_finite() && !c.solution.excluded.contains(k))
        .map(|(_, e)| e)
        .collect();
    eps.sort_by(f64::total_cmp);
    let median = eps.get(eps.len() / 2).copied().unwrap_or(f64::NAN);
    println!(
        "ports {},{}: {good} of {n} points calibrated, line eps_eff median {median:.4}",
        pair.0, pair.1
    );
}

pub fn trl_cal(a: &TrlCalArgs) -> CliResult<Outcome> {
    let (pairs, settings) = gather(a)?;
    let mut done = BTreeMap::new();
    for (&pair, files) in &pairs {
        let c = calibrate_pair(pair, files, &settings)?;
        summary(pair, &c);
        done.insert(pair, c);
    }

    if done.len() == 1 {
        let c = done.values().next().unwrap();
        let drop = non_finite_points(&c.dut);
        a.out.write(&a.output, &without_points(&c.dut, &drop)?, &c.notes)?;
        if let Some(p) = &a.gamma_csv {
            io::write_text(p, &gamma_csv(&c.solution, settings.line_delta))?;
        }
        if a.model.is_some() {
            eprintln!("warning: --model ignored for a single port pair");
        }
        return Ok(Outcome::Ok);
    }

    fs::create_dir_all(&a.output).map_err(|e| CliError::at(&a.output, e))?;
    for (pair, c) in &done {
        let stem = format!("{}_{}", pair.0, pair.1);
        let drop = non_finite_points(&c.dut);
        a.out.write(&a.output.join(format!("dut_{stem}.s2p")), &without_points(&c.dut, &drop)?, &c.notes)?;
        io::write_text(
            &a.output.join(format!("gamma_{stem}.csv")),
            &gamma_csv(&c.solution, settings.line_delta),
        )?;
    }
    if !MEASURED_PAIRS.iter().all(|p| done.contains_key(p)) {
        return Ok(Outcome::Ok);
    }
    let Some(model_path) = &a.model else {
        eprintln!("note: same-side entries are never measured; pass --model to write an assembled 4-port");
        return Ok(Outcome::Ok);
    };
    let model = io::read_network_ports(model_path, 4)?;
    let measurements: Vec<PairMeasurement> = done
        .iter()
        .map(|(&ports, c)| PairMeasurement {
            ports,
            raw: c.dut.clone(),
        })
        .collect();
    let (net, coverage) = assemble_4port(&measurements, Some(&model), 1e-3)?;
    let mut notes: Vec<String> = coverage
        .unmeasured
        .iter()
        .map(|(i, j)| format!("S{}{} not measured, taken from {}", i + 1, j + 1, model_path.display()))
        .collect();
    for w in &coverage.warnings {
        eprintln!("warning: {w}");
        notes.push(w.clone());
    }
    let drop = non_finite_points(&net);
    for &k in &drop {
        notes.push(format!("omitted {}: not calibrated in every pair", fmt_hz(net.frequencies()[k])));
    }
    a.out.write(&a.output.join("assembled.s4p"), &without_points(&net, &drop)?, &notes)?;
    Ok(Outcome::Ok)
}

fn write_entry(
    a: &VirtualStationArgs,
    entries: &mut Vec<Entry>,
    role: Role,
    pair: (usize, usize),
    net: &Network,
    noise_seed: u64,
) -> CliResult<()> {
    let name = format!("{}_{}_{}.s2p", format!("{role:?}").to_lowercase(), pair.0, pair.1);
    let net = if a.noise_sigma > 0.0 {
        add_noise(net, a.noise_sigma, noise_seed)?
    } else {
        net.clone()
    };
    a.out.write(&a.out_dir.join(&name), &net, &[])?;
    entries.push(Entry {
        role,
        ports: format!("{},{}", pair.0, pair.1),
        file: name,
    });
    Ok(())
}

pub fn virtual_station_cmd(a: &VirtualStationArgs) -> CliResult<Outcome> {
    let dut = io::read_network(&a.dut)?;
    if dut.ports() != 2 && dut.ports() != 4 {
        return Err(CliError::data(format!("{}: need a 2- or 4-port device", a.dut.display())));
    }
    let gamma_t = match a.termination_rl_db {
        Some(rl) if rl.is_finite() && rl > 0.0 => C64::new(10f64.powf(-rl / 20.0), 0.0),
        Some(rl) => return Err(CliError::usage(format!("termination return loss {rl} dB must be positive"))),
        None => C64::new(0.0, 0.0),
    };
    let sweep = dut.sweep().clone();
    let z0 = dut.z0();
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let probes = (0..4)
        .map(|_| random_error_box(&mut rng, &sweep, z0, a.max_reflection, a.max_loss_db))
        .collect::<cpwkit::Result<Vec<_>>>()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let probes: [Network; 4] = probes.try_into().expect("four probes");
    let line = line2p(&LineParams::new(z0, a.eps_eff)?, a.line_delta, &sweep, z0)?;
    let kind: ReflectKind = a.reflect_kind.into();

    let raws: Vec<PairMeasurement> = if dut.ports() == 2 {
        let dut2 = dut.clone().with_labels(["1", "2"])?;
        vec![PairMeasurement {
            ports: (1, 2),
            raw: embed(&pair_boxes(&probes, (1, 2))?, &dut2)?,
        }]
    } else {
        virtual_station(&dut, &probes, gamma_t)?
    };

    fs::create_dir_all(&a.out_dir).map_err(|e| CliError::at(&a.out_dir, e))?;
    let mut entries = Vec::new();
    let mut noise_seed = a.seed.wrapping_mul(1000);
    for m in &raws {
        let boxes = pair_boxes(&probes, m.ports)?;
        let kit = synthesize_kit(&boxes, &line, a.line_delta, kind.nominal(), kind, Some(a.eps_eff))?;
        for (role, net) in [(Role::Thru, &kit.thru), (Role::Reflect, &kit.reflect), (Role::Line, &kit.line), (Role::Dut, &m.raw)] {
            noise_seed += 1;
            write_entry(a, &mut entries, role, m.ports, net, noise_seed)?;
        }
    }
    for (k, p) in probes.iter().enumerate() {
        a.out.write(&a.out_dir.join(format!("probe_{}.s2p", k + 1)), p, &["probe error box, port 1 on the analyser".into()])?;
    }
    let manifest = Manifest {
        line_delta_m: Some(a.line_delta),
        reflect_kind: a.reflect_kind,
        eps_eff_estimate: Some(a.eps_eff),
        measurements: entries,
    };
    io::write_text(&a.out_dir.join("manifest.toml"), &manifest.to_toml())?;
    println!("wrote {} raw measurement sets to {}", raws.len(), a.out_dir.display());
    Ok(Outcome::Ok)
}
