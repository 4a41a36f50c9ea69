//! JSON circuit description: elements wired together by named nodes.
//!
//! ```json
//! {
//!   "version": 1,
//!   "z0": 50.0,
//!   "sweep": { "start_hz": 5e9, "stop_hz": 9e9, "points": 201 },
//!   "elements": [
//!     { "kind": "electrical_line", "name": "T1", "nodes": ["a", "b"],
//!       "z0": 35.36, "electrical_deg": 90.0, "f_ref_hz": 7e9 }
//!   ],
//!   "ports": ["a", "b"]
//! }
//! ```
//!
//! A node named in `ports` must appear on exactly one element terminal;
//! every other node on exactly two.

use std::collections::BTreeMap;
use std::path::Path;

use cpwkit::cpw::{CoupledLineParams, LineParams};
use cpwkit::elements::{
    coupled_line4p, line2p, line2p_electrical, oneport, tjunction3p, ElectricalLength, OnePortKind, TJunctionSpec,
};
use cpwkit::netcore::{innerconnect, make_sweep, self_connect};
use cpwkit::{FrequencySweep, Network, SMatrix, C64};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io;

pub const SCHEMA_VERSION: u32 = 1;

fn default_z0() -> f64 {
    cpwkit::DEFAULT_Z0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Netlist {
    pub version: u32,
    /// Reference impedance of every terminal (ohm).
    #[serde(default = "default_z0")]
    pub z0: f64,
    pub sweep: SweepDef,
    pub elements: Vec<Element>,
    pub ports: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDef {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub points: usize,
}

impl SweepDef {
    pub fn build(&self) -> CliResult<FrequencySweep> {
        Ok(make_sweep(self.start_hz, self.stop_hz, self.points)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Element {
    /// Physical line.
    Line {
        name: String,
        nodes: Vec<String>,
        z0: f64,
        eps_eff: f64,
        length_m: f64,
        #[serde(default)]
        loss_np_per_m: f64,
    },
    /// Lossless line given by its electrical length at a reference frequency.
    ElectricalLine {
        name: String,
        nodes: Vec<String>,
        z0: f64,
        electrical_deg: f64,
        f_ref_hz: f64,
    },
    /// Nodes: input, through, coupled, isolated.
    CoupledLine {
        name: String,
        nodes: Vec<String>,
        z0e: f64,
        z0o: f64,
        eps_eff_even: f64,
        eps_eff_odd: f64,
        length_m: f64,
    },
    Junction {
        name: String,
        nodes: Vec<String>,
        #[serde(default)]
        c_shunt_f: f64,
    },
    Load {
        name: String,
        nodes: Vec<String>,
        /// Reflection coefficient as `[re, im]`.
        gamma: [f64; 2],
    },
    Short {
        name: String,
        nodes: Vec<String>,
    },
    Open {
        name: String,
        nodes: Vec<String>,
    },
    /// Measured or exported data; the path is relative to the netlist.
    Touchstone {
        name: String,
        nodes: Vec<String>,
        file: String,
    },
}

impl Element {
    pub fn name(&self) -> &str {
        match self {
            Element::Line { name, .. }
            | Element::ElectricalLine { name, .. }
            | Element::CoupledLine { name, .. }
            | Element::Junction { name, .. }
            | Element::Load { name, .. }
            | Element::Short { name, .. }
            | Element::Open { name, .. }
            | Element::Touchstone { name, .. } => name,
        }
    }

    pub fn nodes(&self) -> &[String] {
        match self {
            Element::Line { nodes, .. }
            | Element::ElectricalLine { nodes, .. }
            | Element::CoupledLine { nodes, .. }
            | Element::Junction { nodes, .. }
            | Element::Load { nodes, .. }
            | Element::Short { nodes, .. }
            | Element::Open { nodes, .. }
            | Element::Touchstone { nodes, .. } => nodes,
        }
    }

    fn terminal_count(&self) -> Option<usize> {
        match self {
            Element::Line { .. } | Element::ElectricalLine { .. } => Some(2),
            Element::CoupledLine { .. } => Some(4),
            Element::Junction { .. } => Some(3),
            Element::Load { .. } | Element::Short { .. } | Element::Open { .. } => Some(1),
            Element::Touchstone { .. } => None,
        }
    }

    /// Tunable numeric fields, in declaration order.
    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            Element::Line { .. } => &["z0", "eps_eff", "length_m", "loss_np_per_m"],
            Element::ElectricalLine { .. } => &["z0", "electrical_deg", "f_ref_hz"],
            Element::CoupledLine { .. } => &["z0e", "z0o", "eps_eff_even", "eps_eff_odd", "length_m"],
            Element::Junction { .. } => &["c_shunt_f"],
            Element::Load { .. } => &["gamma_re", "gamma_im"],
            Element::Short { .. } | Element::Open { .. } | Element::Touchstone { .. } => &[],
        }
    }

    pub fn param_mut(&mut self, field: &str) -> Option<&mut f64> {
        match (self, field) {
            (Element::Line { z0, .. }, "z0") => Some(z0),
            (Element::Line { eps_eff, .. }, "eps_eff") => Some(eps_eff),
            (Element::Line { length_m, .. }, "length_m") => Some(length_m),
            (Element::Line { loss_np_per_m, .. }, "loss_np_per_m") => Some(loss_np_per_m),
            (Element::ElectricalLine { z0, .. }, "z0") => Some(z0),
            (Element::ElectricalLine { electrical_deg, .. }, "electrical_deg") => Some(electrical_deg),
            (Element::ElectricalLine { f_ref_hz, .. }, "f_ref_hz") => Some(f_ref_hz),
            (Element::CoupledLine { z0e, .. }, "z0e") => Some(z0e),
            (Element::CoupledLine { z0o, .. }, "z0o") => Some(z0o),
            (Element::CoupledLine { eps_eff_even, .. }, "eps_eff_even") => Some(eps_eff_even),
            (Element::CoupledLine { eps_eff_odd, .. }, "eps_eff_odd") => Some(eps_eff_odd),
            (Element::CoupledLine { length_m, .. }, "length_m") => Some(length_m),
            (Element::Junction { c_shunt_f, .. }, "c_shunt_f") => Some(c_shunt_f),
            (Element::Load { gamma, .. }, "gamma_re") => Some(&mut gamma[0]),
            (Element::Load { gamma, .. }, "gamma_im") => Some(&mut gamma[1]),
            _ => None,
        }
    }

    fn build(&self, sweep: &FrequencySweep, z0: f64, base_dir: &Path) -> CliResult<Network> {
        let net = match self {
            Element::Line {
                z0: zl,
                eps_eff,
                length_m,
                loss_np_per_m,
                ..
            } => LineParams::lossy(*zl, *eps_eff, *loss_np_per_m).and_then(|lp| line2p(&lp, *length_m, sweep, z0)),
            Element::ElectricalLine {
                z0: zl,
                electrical_deg,
                f_ref_hz,
                ..
            } => {
                if !(*f_ref_hz > 0.0 && f_ref_hz.is_finite()) {
                    return Err(self.fail(format!("reference frequency {f_ref_hz} must be positive")));
                }
                line2p_electrical(*zl, ElectricalLength::from_degrees(*electrical_deg, *f_ref_hz), sweep, z0)
            }
            Element::CoupledLine {
                z0e,
                z0o,
                eps_eff_even,
                eps_eff_odd,
                length_m,
                ..
            } => CoupledLineParams::new(*z0e, *z0o, *eps_eff_even, *eps_eff_odd)
                .and_then(|p| coupled_line4p(&p, *length_m, sweep, z0)),
            Element::Junction { c_shunt_f, .. } => tjunction3p(
                &TJunctionSpec {
                    z0,
                    c_shunt: *c_shunt_f,
                },
                sweep,
            ),
            Element::Load { gamma, .. } => oneport(OnePortKind::Load(C64::new(gamma[0], gamma[1])), sweep, z0),
            Element::Short { .. } => oneport(OnePortKind::Short, sweep, z0),
            Element::Open { .. } => oneport(OnePortKind::Open, sweep, z0),
            Element::Touchstone { file, .. } => return self.load_file(&base_dir.join(file), sweep, z0),
        };
        let net = net.map_err(|e| self.fail(e))?;
        net.with_labels(self.nodes().iter().cloned()).map_err(|e| self.fail(e))
    }

    fn load_file(&self, path: &Path, sweep: &FrequencySweep, z0: f64) -> CliResult<Network> {
        let net = io::read_network(path)?;
        if net.ports() != self.nodes().len() {
            return Err(self.fail(format!(
                "{} has {} ports but {} nodes are given",
                path.display(),
                net.ports(),
                self.nodes().len()
            )));
        }
        if net.z0() != z0 {
            return Err(self.fail(format!("{} uses reference {} ohm, netlist uses {z0}", path.display(), net.z0())));
        }
        if !same_grid(&net, sweep) {
            return Err(self.fail(format!("{} does not share the netlist sweep", path.display())));
        }
        let mats: Vec<SMatrix> = net.matrices().to_vec();
        Network::new(sweep.clone(), z0, mats, self.nodes().to_vec()).map_err(|e| self.fail(e))
    }

    fn fail(&self, e: impl std::fmt::Display) -> CliError {
        CliError::data(format!("element '{}': {e}", self.name()))
    }
}

/// Same points up to the rounding of a written frequency column.
fn same_grid(net: &Network, sweep: &FrequencySweep) -> bool {
    net.sweep().len() == sweep.len()
        && net
            .frequencies()
            .iter()
            .zip(sweep.points())
            .all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs())
}

impl Netlist {
    /// Structural checks: version, names and node usage.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::data(m));
        if self.version != SCHEMA_VERSION {
            return bad(format!("unsupported netlist version {} (expected {SCHEMA_VERSION})", self.version));
        }
        if !(self.z0 > 0.0 && self.z0.is_finite()) {
            return bad(format!("z0 {} must be positive", self.z0));
        }
        if self.elements.is_empty() {
            return bad("netlist has no elements".into());
        }
        if self.ports.is_empty() {
            return bad("netlist has no external ports".into());
        }
        let mut names = BTreeMap::new();
        let mut uses: BTreeMap<&str, usize> = BTreeMap::new();
        for (k, el) in self.elements.iter().enumerate() {
            if el.name().is_empty() {
                return bad(format!("elements[{k}] has an empty name"));
            }
            if let Some(prev) = names.insert(el.name(), k) {
                return bad(format!("element name '{}' used by elements[{prev}] and elements[{k}]", el.name()));
            }
            if let Some(n) = el.terminal_count() {
                if el.nodes().len() != n {
                    return bad(format!(
                        "element '{}' needs {n} nodes, {} given",
                        el.name(),
                        el.nodes().len()
                    ));
                }
            } else if el.nodes().is_empty() {
                return bad(format!("element '{}' has no nodes", el.name()));
            }
            for node in el.nodes() {
                if node.is_empty() {
                    return bad(format!("element '{}' has an empty node name", el.name()));
                }
                *uses.entry(node).or_default() += 1;
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for p in &self.ports {
            if !seen.insert(p.as_str()) {
                return bad(format!("port node '{p}' listed twice"));
            }
            match uses.get(p.as_str()) {
                None => return bad(format!("port node '{p}' is not connected to any element")),
                Some(1) => {}
                Some(n) => return bad(format!("port node '{p}' is used {n} times; a port node must be used once")),
            }
        }
        for (node, n) in &uses {
            if seen.contains(node) {
                continue;
            }
            match n {
                2 => {}
                1 => return bad(format!("dangling node '{node}': used once and not an external port")),
                n => return bad(format!("node '{node}' is used {n} times; internal nodes join exactly two terminals")),
            }
        }
        Ok(())
    }

    /// Assembles the circuit, element by element, into one network whose
    /// ports follow `ports`.
    pub fn simulate(&self, base_dir: &Path) -> CliResult<Network> {
        self.validate()?;
        let sweep = self.sweep.build()?;
        let mut acc: Option<Network> = None;
        for el in &self.elements {
            let part = el.build(&sweep, self.z0, base_dir)?;
            let joined = match acc {
                None => part,
                Some(prev) => attach(&prev, &part)?,
            };
            acc = Some(close_loops(joined)?);
        }
        let net = acc.expect("validated netlist has elements");
        let order: Vec<&str> = self.ports.iter().map(String::as_str).collect();
        Ok(net.reorder_by_labels(&order)?)
    }

    pub fn element_mut(&mut self, name: &str) -> Option<&mut Element> {
        self.elements.iter_mut().find(|e| e.name() == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("netlist serializes");
        s.push('\n');
        s
    }
}

fn attach(acc: &Network, part: &Network) -> CliResult<Network> {
    let shared = part
        .labels()
        .iter()
        .enumerate()
        .find_map(|(j, l)| acc.port_index(l).map(|i| (i, j)));
    Ok(match shared {
        Some((i, j)) => innerconnect(acc, i, part, j)?,
        None => acc.block_diag(part)?,
    })
}

/// Joins every pair of ports that carry the same node name.
fn close_loops(mut net: Network) -> CliResult<Network> {
    loop {
        let labels = net.labels();
        let pair = (0..labels.len()).find_map(|p| ((p + 1)..labels.len()).find(|&q| labels[q] == labels[p]).map(|q| (p, q)));
        match pair {
            Some((p, q)) => net = self_connect(&net, p, q)?,
            None => return Ok(net),
        }
    }
}

/// A `NAME.field` reference, or several joined by `+` that share one value.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamRef {
    pub targets: Vec<(String, String)>,
}

impl ParamRef {
    pub fn parse(text: &str, netlist: &Netlist) -> CliResult<Self> {
        let mut targets = Vec::new();
        for part in text.split('+') {
            let (el, field) = part
                .trim()
                .split_once('.')
                .ok_or_else(|| CliError::usage(format!("parameter '{part}' must look like ELEMENT.field")))?;
            let element = netlist
                .elements
                .iter()
                .find(|e| e.name() == el)
                .ok_or_else(|| CliError::usage(format!("unknown element '{el}' in parameter '{part}'")))?;
            if !element.param_names().contains(&field) {
                return Err(CliError::usage(format!(
                    "element '{el}' has no tunable parameter '{field}' (has: {})",
                    element.param_names().join(", ")
                )));
            }
            targets.push((el.to_string(), field.to_string()));
        }
        Ok(Self { targets })
    }

    pub fn get(&self, netlist: &Netlist) -> f64 {
        let (el, field) = &self.targets[0];
        let mut e = netlist.elements.iter().find(|e| e.name() == el).expect("checked at parse").clone();
        *e.param_mut(field).expect("checked at parse")
    }

    pub fn set(&self, netlist: &mut Netlist, v: f64) {
        for (el, field) in &self.targets {
            *netlist.element_mut(el).and_then(|e| e.param_mut(field)).expect("checked at parse") = v;
        }
    }

    pub fn label(&self) -> String {
        self.targets
            .iter()
            .map(|(e, f)| format!("{e}.{f}"))
            .collect::<Vec<_>>()
            .join("+")
    }
}
