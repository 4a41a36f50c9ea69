//! Strict Touchstone v1 (`.sNp`) reader and writer.
//!
//! Accepted grammar:
//!
//! * `!` starts a comment anywhere on a line.
//! * At most one option line `# <unit> S <format> R <ref>`, in any order and
//!   case, before the first data line. Missing fields default to
//!   `GHZ S MA R 50`.
//! * 1- and 2-ports: one line per frequency. 2-port columns are ordered
//!   S11 S21 S12 S22.
//! * 3-ports and up: each frequency starts a new line and each matrix row
//!   starts a new line, with at most four value pairs per line.
//! * Frequencies positive and strictly increasing.
//!
//! Version-2 keywords (`[Version]` etc.) and 2-port noise blocks are rejected
//! rather than skipped. A comment line of the form `! ports: a b c` carries
//! port labels; the writer emits one.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::netcore::{CMatrix, FrequencySweep, Network, SMatrix, C64};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TouchstoneError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unsupported Touchstone feature: {message}")]
    Unsupported { line: usize, message: String },
    #[error("cannot write Touchstone: {0}")]
    Write(String),
}

impl TouchstoneError {
    /// Line the error refers to, when it came from parsing.
    pub fn line(&self) -> Option<usize> {
        match self {
            TouchstoneError::Parse { line, .. } | TouchstoneError::Unsupported { line, .. } => Some(*line),
            TouchstoneError::Write(_) => None,
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> TouchstoneError {
    TouchstoneError::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreqUnit {
    Hz,
    KHz,
    MHz,
    GHz,
}

impl FreqUnit {
    pub fn scale(&self) -> f64 {
        match self {
            FreqUnit::Hz => 1.0,
            FreqUnit::KHz => 1e3,
            FreqUnit::MHz => 1e6,
            FreqUnit::GHz => 1e9,
        }
    }

    fn parse(token: &str) -> Option<Self> {
        match token.to_ascii_uppercase().as_str() {
            "HZ" => Some(FreqUnit::Hz),
            "KHZ" => Some(FreqUnit::KHz),
            "MHZ" => Some(FreqUnit::MHz),
            "GHZ" => Some(FreqUnit::GHz),
            _ => None,
        }
    }
}

impl fmt::Display for FreqUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FreqUnit::Hz => "HZ",
            FreqUnit::KHz => "KHZ",
            FreqUnit::MHz => "MHZ",
            FreqUnit::GHz => "GHZ",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    /// Real and imaginary parts.
    RI,
    /// Linear magnitude and angle in degrees.
    MA,
    /// Magnitude in dB and angle in degrees.
    DB,
}

impl DataFormat {
    fn parse(token: &str) -> Option<Self> {
        match token.to_ascii_uppercase().as_str() {
            "RI" => Some(DataFormat::RI),
            "MA" => Some(DataFormat::MA),
            "DB" => Some(DataFormat::DB),
            _ => None,
        }
    }

    fn decode(&self, a: f64, b: f64) -> C64 {
        match self {
            DataFormat::RI => C64::new(a, b),
            DataFormat::MA => C64::from_polar(a, b.to_radians()),
            DataFormat::DB => C64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
        }
    }

    fn encode(&self, z: C64) -> (f64, f64) {
        match self {
            DataFormat::RI => (z.re, z.im),
            DataFormat::MA => (z.norm(), z.im.atan2(z.re) * 180.0 / PI),
            DataFormat::DB => (
                (20.0 * z.norm().log10()).max(MIN_DB),
                z.im.atan2(z.re) * 180.0 / PI,
            ),
        }
    }
}

impl fmt::Display for DataFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataFormat::RI => "RI",
            DataFormat::MA => "MA",
            DataFormat::DB => "DB",
        })
    }
}

/// Floor for zero magnitudes in dB output.
const MIN_DB: f64 = -400.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TouchstoneOptions {
    pub freq_unit: FreqUnit,
    pub format: DataFormat,
    /// Reference impedance (ohm).
    pub reference: f64,
}

impl Default for TouchstoneOptions {
    fn default() -> Self {
        Self {
            freq_unit: FreqUnit::GHz,
            format: DataFormat::MA,
            reference: 50.0,
        }
    }
}

fn parse_options(body: &str, line: usize) -> Result<TouchstoneOptions, TouchstoneError> {
    let mut opts = TouchstoneOptions::default();
    let mut tokens = body.split_whitespace();
    let (mut unit_seen, mut fmt_seen, mut param_seen, mut ref_seen) = (false, false, false, false);
    while let Some(tok) = tokens.next() {
        let dup = |seen: &mut bool, what: &str| {
            if std::mem::replace(seen, true) {
                Err(parse_err(line, format!("option line repeats the {what}")))
            } else {
                Ok(())
            }
        };
        if let Some(u) = FreqUnit::parse(tok) {
            dup(&mut unit_seen, "frequency unit")?;
            opts.freq_unit = u;
        } else if let Some(f) = DataFormat::parse(tok) {
            dup(&mut fmt_seen, "data format")?;
            opts.format = f;
        } else if tok.eq_ignore_ascii_case("S") {
            dup(&mut param_seen, "parameter type")?;
        } else if ["Y", "Z", "G", "H"].iter().any(|p| tok.eq_ignore_ascii_case(p)) {
            return Err(TouchstoneError::Unsupported {
                line,
                message: format!("{} parameters (only S is supported)", tok.to_ascii_uppercase()),
            });
        } else if tok.eq_ignore_ascii_case("R") {
            dup(&mut ref_seen, "reference impedance")?;
            let v = tokens
                .next()
                .ok_or_else(|| parse_err(line, "option R needs a reference impedance"))?;
            let r: f64 = v
                .parse()
                .map_err(|_| parse_err(line, format!("bad reference impedance '{v}'")))?;
            if !(r > 0.0 && r.is_finite()) {
                return Err(parse_err(line, format!("reference impedance {r} must be positive")));
            }
            opts.reference = r;
        } else {
            return Err(parse_err(line, format!("unknown option '{tok}'")));
        }
    }
    Ok(opts)
}

fn parse_number(tok: &str, line: usize) -> Result<f64, TouchstoneError> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(parse_err(line, format!("non-finite value '{tok}'"))),
        Err(_) => Err(parse_err(line, format!("bad number '{tok}'"))),
    }
}

/// Number of ports named by an `.sNp` file name, if any.
pub fn port_count_from_path(path: &str) -> Option<usize> {
    let ext = path.rsplit_once('.')?.1.to_ascii_lowercase();
    let digits = ext.strip_prefix('s')?.strip_suffix('p')?;
    digits.parse().ok().filter(|n| *n > 0)
}

/// Record under construction while scanning data lines.
struct Record {
    freq: f64,
    line: usize,
    values: Vec<C64>,
}

/// Parses an `n_ports`-port Touchstone document.
pub fn parse_touchstone(text: &str, n_ports: usize) -> Result<Network, TouchstoneError> {
    parse_touchstone_with_options(text, n_ports).map(|(net, _)| net)
}

/// Like [`parse_touchstone`], also returning the option line in effect.
pub fn parse_touchstone_with_options(
    text: &str,
    n_ports: usize,
) -> Result<(Network, TouchstoneOptions), TouchstoneError> {
    if n_ports == 0 {
        return Err(parse_err(0, "port count must be at least 1"));
    }
    let per_freq = n_ports * n_ports;
    let mut opts: Option<TouchstoneOptions> = None;
    let mut labels: Option<Vec<String>> = None;
    let mut freqs: Vec<f64> = Vec::new();
    let mut mats: Vec<SMatrix> = Vec::new();
    let mut current: Option<Record> = None;
    let mut last_line = 0;

    let finish = |rec: Record, freqs: &mut Vec<f64>, mats: &mut Vec<SMatrix>, unit: f64| -> Result<(), TouchstoneError> {
        let f = rec.freq * unit;
        if let Some(prev) = freqs.last() {
            if f <= *prev {
                return Err(parse_err(
                    rec.line,
                    format!("frequency {} is not above the previous {}", rec.freq, prev / unit),
                ));
            }
        }
        let n = n_ports;
        let m = if n == 2 {
            let v = &rec.values;
            CMatrix::from_row_slice(2, 2, &[v[0], v[2], v[1], v[3]])
        } else {
            CMatrix::from_row_slice(n, n, &rec.values)
        };
        freqs.push(f);
        mats.push(SMatrix::new(m).map_err(|e| parse_err(rec.line, e.to_string()))?);
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let (content, comment) = match raw.split_once('!') {
            Some((c, rest)) => (c, Some(rest)),
            None => (raw, None),
        };
        if let Some(rest) = comment {
            if content.trim().is_empty() {
                if let Some(names) = rest.trim().strip_prefix("ports:") {
                    let names: Vec<String> = names.split_whitespace().map(str::to_string).collect();
                    if names.len() == n_ports {
                        labels = Some(names);
                    }
                }
            }
        }
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            return Err(TouchstoneError::Unsupported {
                line,
                message: format!("version-2 keyword {}", content.split_whitespace().next().unwrap_or("")),
            });
        }
        if let Some(body) = content.strip_prefix('#') {
            if opts.is_some() {
                return Err(parse_err(line, "second option line"));
            }
            if !freqs.is_empty() || current.is_some() {
                return Err(parse_err(line, "option line after data"));
            }
            opts = Some(parse_options(body, line)?);
            continue;
        }
        let o = *opts.get_or_insert_with(TouchstoneOptions::default);
        let tokens: Vec<&str> = content.split_whitespace().collect();

        if n_ports <= 2 {
            let want = 1 + 2 * per_freq;
            if n_ports == 2 && tokens.len() == 5 {
                let f = parse_number(tokens[0], line)? * o.freq_unit.scale();
                if freqs.last().is_some_and(|p| f <= *p) {
                    return Err(TouchstoneError::Unsupported {
                        line,
                        message: "noise parameter data".into(),
                    });
                }
            }
            if tokens.len() != want {
                return Err(parse_err(
                    line,
                    format!("expected {want} values for a {n_ports}-port frequency point, found {}", tokens.len()),
                ));
            }
            let nums = tokens
                .iter()
                .map(|t| parse_number(t, line))
                .collect::<Result<Vec<_>, _>>()?;
            let rec = Record {
                freq: check_freq(nums[0], line)?,
                line,
                values: nums[1..].chunks(2).map(|p| o.format.decode(p[0], p[1])).collect(),
            };
            finish(rec, &mut freqs, &mut mats, o.freq_unit.scale())?;
            continue;
        }

        // Three or more ports: rows may wrap, but never across row boundaries.
        let mut nums = tokens
            .iter()
            .map(|t| parse_number(t, line))
            .collect::<Result<Vec<_>, _>>()?;
        if current.is_none() {
            let f = check_freq(nums.remove(0), line)?;
            current = Some(Record {
                freq: f,
                line,
                values: Vec::with_capacity(per_freq),
            });
        }
        let rec = current.as_mut().unwrap();
        if nums.len() % 2 != 0 {
            return Err(parse_err(line, "values must come in real/imaginary or magnitude/angle pairs"));
        }
        let pairs = nums.len() / 2;
        let in_row = rec.values.len() % n_ports;
        let room = n_ports - in_row;
        if pairs == 0 || pairs > 4 || pairs > room {
            return Err(parse_err(
                line,
                format!(
                    "found {pairs} value pairs where 1..={} are allowed (rows wrap at 4 pairs and end their line)",
                    room.min(4)
                ),
            ));
        }
        if pairs < room && pairs < 4 {
            return Err(parse_err(line, format!("row ends early: {pairs} pairs where {} are expected", room.min(4))));
        }
        rec.values
            .extend(nums.chunks(2).map(|p| o.format.decode(p[0], p[1])));
        if rec.values.len() == per_freq {
            let done = current.take().unwrap();
            finish(done, &mut freqs, &mut mats, o.freq_unit.scale())?;
        }
    }
    if let Some(rec) = current {
        return Err(parse_err(
            last_line,
            format!(
                "frequency point starting on line {} is incomplete: {} of {per_freq} values",
                rec.line,
                rec.values.len()
            ),
        ));
    }
    if freqs.is_empty() {
        return Err(parse_err(last_line, "no frequency points"));
    }
    let o = opts.unwrap_or_default();
    let sweep = FrequencySweep::new(freqs).map_err(|e| parse_err(last_line, e.to_string()))?;
    let labels = labels.unwrap_or_else(|| (1..=n_ports).map(|i| i.to_string()).collect());
    let net = Network::new(sweep, o.reference, mats, labels).map_err(|e| parse_err(last_line, e.to_string()))?;
    Ok((net, o))
}

fn check_freq(f: f64, line: usize) -> Result<f64, TouchstoneError> {
    if f > 0.0 {
        Ok(f)
    } else {
        Err(parse_err(line, format!("frequency {f} must be positive")))
    }
}

/// Canonical text: a labels comment, one option line, then data with
/// every number in 17-significant-digit scientific notation.
pub fn write_touchstone(net: &Network, unit: FreqUnit, format: DataFormat) -> Result<String, TouchstoneError> {
    let n = net.ports();
    if net.matrices().iter().any(|m| !m.is_finite()) {
        return Err(TouchstoneError::Write("network contains non-finite S-parameters".into()));
    }
    if net.labels().iter().any(|l| l.is_empty() || l.contains(char::is_whitespace)) {
        return Err(TouchstoneError::Write("port labels must be non-empty and free of whitespace".into()));
    }
    let mut out = String::new();
    writeln!(out, "! ports: {}", net.labels().join(" ")).unwrap();
    writeln!(out, "# {unit} S {format} R {}", net.z0()).unwrap();
    let pair = |out: &mut String, z: C64| {
        let (a, b) = format.encode(z);
        write!(out, " {a:.16e} {b:.16e}").unwrap();
    };
    for (f, s) in net.frequencies().iter().zip(net.matrices()) {
        write!(out, "{:.16e}", f / unit.scale()).unwrap();
        match n {
            1 => pair(&mut out, s.get(0, 0)),
            2 => {
                for (i, j) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    pair(&mut out, s.get(i, j));
                }
            }
            _ => {
                for i in 0..n {
                    for (k, j) in (0..n).enumerate() {
                        if k > 0 && k % 4 == 0 {
                            out.push_str("\n ");
                        }
                        pair(&mut out, s.get(i, j));
                    }
                    out.push('\n');
                    if i + 1 < n {
                        out.push(' ');
                    }
                }
                continue;
            }
        }
        out.push('\n');
    }
    Ok(out)
}
