use std::fs;
use std::path::Path;

use clap::{Args, ValueEnum};
use cpwkit::tsio::{parse_touchstone, port_count_from_path, write_touchstone, DataFormat, FreqUnit};
use cpwkit::Network;
use serde::de::DeserializeOwned;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Ri,
    Ma,
    Db,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Unit {
    Hz,
    Khz,
    Mhz,
    Ghz,
}

/// Touchstone output style shared by every command that writes networks.
#[derive(Debug, Clone, Copy, Args)]
pub struct TouchstoneOut {
    /// Data format of written Touchstone files.
    #[arg(long, value_enum, default_value_t = Format::Ri)]
    pub format: Format,
    /// Frequency unit of written Touchstone files.
    #[arg(long, value_enum, default_value_t = Unit::Ghz)]
    pub unit: Unit,
}

impl TouchstoneOut {
    fn data_format(&self) -> DataFormat {
        match self.format {
            Format::Ri => DataFormat::RI,
            Format::Ma => DataFormat::MA,
            Format::Db => DataFormat::DB,
        }
    }

    fn freq_unit(&self) -> FreqUnit {
        match self.unit {
            Unit::Hz => FreqUnit::Hz,
            Unit::Khz => FreqUnit::KHz,
            Unit::Mhz => FreqUnit::MHz,
            Unit::Ghz => FreqUnit::GHz,
        }
    }

    /// Renders `net` with `comments` as leading `!` lines.
    pub fn render(&self, net: &Network, comments: &[String]) -> CliResult<String> {
        let body = write_touchstone(net, self.freq_unit(), self.data_format()).map_err(|e| CliError::data(e.to_string()))?;
        let mut out = String::new();
        for c in comments {
            for line in c.lines() {
                out.push_str("! ");
                out.push_str(line);
                out.push('\n');
            }
        }
        out.push_str(&body);
        Ok(out)
    }

    pub fn write(&self, path: &Path, net: &Network, comments: &[String]) -> CliResult<()> {
        let expected = port_count_from_path(&path.to_string_lossy());
        if expected.is_some_and(|n| n != net.ports()) {
            return Err(CliError::usage(format!(
                "{}: extension does not match a {}-port network (use .s{}p)",
                path.display(),
                net.ports(),
                net.ports()
            )));
        }
        write_text(path, &self.render(net, comments)?)
    }
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::at(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::at(path, e))
}

/// Reads an `.sNp` file, taking the port count from its extension.
pub fn read_network(path: &Path) -> CliResult<Network> {
    let n = port_count_from_path(&path.to_string_lossy()).ok_or_else(|| {
        CliError::usage(format!("{}: cannot tell the port count; name the file .s<N>p", path.display()))
    })?;
    parse_touchstone(&read_text(path)?, n).map_err(|e| CliError::at(path, e))
}

pub fn read_network_ports(path: &Path, ports: usize) -> CliResult<Network> {
    let net = read_network(path)?;
    if net.ports() != ports {
        return Err(CliError::data(format!(
            "{}: expected a {ports}-port, found {} ports",
            path.display(),
            net.ports()
        )));
    }
    Ok(net)
}

/// Parses JSON, reporting the location of schema errors as a path into the
/// document.
pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &Path) -> CliResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            CliError::at(origin, inner)
        } else {
            CliError::at(origin, format!("at {path}: {inner}"))
        }
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    parse_json(&read_text(path)?, path)
}
