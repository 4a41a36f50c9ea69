//! TOML description of a raw measurement set.
//!
//! ```toml
//! line_delta_m = 0.001
//! reflect_kind = "short"
//! eps_eff_estimate = 6.45
//!
//! [[measurement]]
//! role = "thru"
//! ports = "1,2"
//! file = "thru_1_2.s2p"
//! ```
//!
//! Every port pair needs one thru, reflect, line and dut entry. The reflect
//! file is a 2-port holding the two reflections in S11 and S22.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cpwkit::trl::ReflectKind;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReflectChoice {
    #[default]
    Short,
    Open,
}

impl From<ReflectChoice> for ReflectKind {
    fn from(r: ReflectChoice) -> Self {
        match r {
            ReflectChoice::Short => ReflectKind::Short,
            ReflectChoice::Open => ReflectKind::Open,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Thru,
    Reflect,
    Line,
    Dut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub role: Role,
    #[serde(default = "default_ports")]
    pub ports: String,
    pub file: String,
}

fn default_ports() -> String {
    "1,2".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_delta_m: Option<f64>,
    #[serde(default)]
    pub reflect_kind: ReflectChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_eff_estimate: Option<f64>,
    #[serde(rename = "measurement", default)]
    pub measurements: Vec<Entry>,
}

/// Files of one port pair, resolved against the manifest directory.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFiles {
    pub thru: PathBuf,
    pub reflect: PathBuf,
    pub line: PathBuf,
    pub dut: PathBuf,
}

pub fn parse_ports(text: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::data(format!("ports '{text}' must be two distinct port numbers like \"1,2\""));
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || b == 0 || a == b {
        return Err(bad());
    }
    Ok((a, b))
}

impl Manifest {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = crate::io::read_text(path)?;
        toml::from_str(&text).map_err(|e| CliError::at(path, e))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    /// Groups entries by port pair, checking that each pair is complete.
    pub fn pairs(&self, base_dir: &Path) -> CliResult<BTreeMap<(usize, usize), PairFiles>> {
        if self.measurements.is_empty() {
            return Err(CliError::data("manifest lists no measurements"));
        }
        let mut by_pair: BTreeMap<(usize, usize), BTreeMap<Role, PathBuf>> = BTreeMap::new();
        for e in &self.measurements {
            let pair = parse_ports(&e.ports)?;
            let slot = by_pair.entry(pair).or_default();
            if slot.insert(e.role, base_dir.join(&e.file)).is_some() {
                return Err(CliError::data(format!("ports {}: more than one {:?} entry", e.ports, e.role)));
            }
        }
        by_pair
            .into_iter()
            .map(|(pair, mut roles)| {
                let mut take = |r: Role| {
                    roles.remove(&r).ok_or_else(|| {
                        CliError::data(format!("ports {},{}: no {} measurement", pair.0, pair.1, format!("{r:?}").to_lowercase()))
                    })
                };
                Ok((
                    pair,
                    PairFiles {
                        thru: take(Role::Thru)?,
                        reflect: take(Role::Reflect)?,
                        line: take(Role::Line)?,
                        dut: take(Role::Dut)?,
                    },
                ))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
line_delta_m = 0.001
reflect_kind = "open"

[[measurement]]
role = "thru"
file = "t.s2p"

[[measurement]]
role = "reflect"
file = "r.s2p"

[[measurement]]
role = "line"
file = "l.s2p"

[[measurement]]
role = "dut"
file = "d.s2p"
"#;

    #[test]
    fn parses_and_groups() {
        let m: Manifest = toml::from_str(TEXT).unwrap();
        assert_eq!(m.reflect_kind, ReflectChoice::Open);
        assert_eq!(m.line_delta_m, Some(0.001));
        let pairs = m.pairs(Path::new("kit")).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[&(1, 2)].dut, Path::new("kit/d.s2p"));
    }

    #[test]
    fn incomplete_pair() {
        let m: Manifest = toml::from_str(&TEXT.replace("role = \"line\"", "role = \"dut\"")).unwrap();
        assert!(m.pairs(Path::new(".")).is_err());
    }

    #[test]
    fn round_trip() {
        let m: Manifest = toml::from_str(TEXT).unwrap();
        let back: Manifest = toml::from_str(&m.to_toml()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn ports_syntax() {
        assert_eq!(parse_ports("4, 3").unwrap(), (4, 3));
        assert!(parse_ports("1").is_err());
        assert!(parse_ports("2,2").is_err());
        assert!(parse_ports("0,1").is_err());
    }
}
