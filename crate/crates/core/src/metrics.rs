//! Figures of merit for four-port couplers and hybrids.
//!
//! With ports numbered input 1, through 2, coupled 3 and isolated 4:
//!
//! | metric                | definition                               |
//! |-----------------------|------------------------------------------|
//! | return loss           | `-20 log10 |S11|`                        |
//! | through transmission  | `20 log10 |S21|`                         |
//! | coupling              | `20 log10 |S31|`                         |
//! | isolation             | `-20 log10 |S41|`                        |
//! | insertion loss (sum)  | `-20 log10 (|S21| + |S31|)`              |
//! | insertion loss (power)| `-10 log10 (|S21|^2 + |S31|^2)`          |
//!
//! The amplitude-sum form is negative for an ideal lossless hybrid
//! (-3.01 dB), so spec checks use the power form unless a target asks for
//! `insertion_loss_sum` explicitly. Exact zeros produce infinite dB values
//! rather than clipped numbers.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::netcore::Network;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ReturnLoss,
    Through,
    Coupling,
    Isolation,
    InsertionLossSum,
    #[serde(alias = "insertion_loss")]
    InsertionLossPower,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::ReturnLoss,
        Metric::Through,
        Metric::Coupling,
        Metric::Isolation,
        Metric::InsertionLossSum,
        Metric::InsertionLossPower,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::ReturnLoss => "return_loss",
            Metric::Through => "through",
            Metric::Coupling => "coupling",
            Metric::Isolation => "isolation",
            Metric::InsertionLossSum => "insertion_loss_sum",
            Metric::InsertionLossPower => "insertion_loss_power",
        }
    }

    /// Insertion losses improve downwards, everything else upwards.
    pub fn higher_is_better(&self) -> bool {
        !matches!(self, Metric::InsertionLossSum | Metric::InsertionLossPower)
    }
}

/// All six figures of merit at one frequency (dB).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub return_loss_db: f64,
    pub through_db: f64,
    pub coupling_db: f64,
    pub isolation_db: f64,
    pub insertion_loss_sum_db: f64,
    pub insertion_loss_power_db: f64,
}

impl MetricRow {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::ReturnLoss => self.return_loss_db,
            Metric::Through => self.through_db,
            Metric::Coupling => self.coupling_db,
            Metric::Isolation => self.isolation_db,
            Metric::InsertionLossSum => self.insertion_loss_sum_db,
            Metric::InsertionLossPower => self.insertion_loss_power_db,
        }
    }

    pub fn from_magnitudes(refl: f64, through: f64, coupled: f64, isolated: f64) -> Self {
        Self {
            return_loss_db: -20.0 * refl.log10(),
            through_db: 20.0 * through.log10(),
            coupling_db: 20.0 * coupled.log10(),
            isolation_db: -20.0 * isolated.log10(),
            insertion_loss_sum_db: -20.0 * (through + coupled).log10(),
            insertion_loss_power_db: -10.0 * (through * through + coupled * coupled).log10(),
        }
    }
}

/// Zero-based port indices playing each role for one choice of input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PortRoles {
    pub input: usize,
    pub through: usize,
    pub coupled: usize,
    pub isolated: usize,
}

/// Roles of the other ports for each driven port, in 1-based numbering.
/// Both devices share this double-mirror symmetry.
const ROLE_TABLE: [[usize; 4]; 4] = [[1, 2, 3, 4], [2, 1, 4, 3], [3, 4, 1, 2], [4, 3, 2, 1]];

const ROLE_NAMES: [&str; 4] = ["input", "through", "coupled", "isolated"];

impl PortRoles {
    /// Resolves device port numbers (1..=4) to matrix indices. Ports are
    /// found by label ("input", "through", ... or "1".."4") when the network
    /// carries such labels, otherwise by position.
    pub fn resolve(net: &Network, input_port: usize) -> Result<Self> {
        if net.ports() != 4 {
            return Err(Error::invalid(format!(
                "metrics need a 4-port network, got {} ports",
                net.ports()
            )));
        }
        if !(1..=4).contains(&input_port) {
            return Err(Error::InvalidPort {
                port: input_port,
                count: 4,
            });
        }
        let locate = |number: usize| -> usize {
            net.port_index(ROLE_NAMES[number - 1])
                .or_else(|| net.port_index(&number.to_string()))
                .unwrap_or(number - 1)
        };
        let mut idx = [0usize; 4];
        for (slot, number) in idx.iter_mut().zip(ROLE_TABLE[input_port - 1]) {
            *slot = locate(number);
        }
        let mut sorted = idx;
        sorted.sort_unstable();
        if sorted != [0, 1, 2, 3] {
            return Err(Error::invalid(format!(
                "port labels {:?} do not identify four distinct ports",
                net.labels()
            )));
        }
        Ok(Self {
            input: idx[0],
            through: idx[1],
            coupled: idx[2],
            isolated: idx[3],
        })
    }
}

/// Contiguous intervals where one metric meets a threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct BandRecord {
    pub metric: Metric,
    pub threshold: f64,
    pub intervals: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub frequencies: Vec<f64>,
    pub rows: Vec<MetricRow>,
    /// Grid frequency of best isolation (lowest `|S41|`).
    pub center_frequency: f64,
    pub bands: Vec<BandRecord>,
}

impl MetricReport {
    pub fn values(&self, metric: Metric) -> Vec<f64> {
        self.rows.iter().map(|r| r.get(metric)).collect()
    }

    pub fn annotate_band(&mut self, metric: Metric, threshold: f64) {
        let intervals = find_band(self, metric, threshold);
        self.bands.push(BandRecord {
            metric,
            threshold,
            intervals,
        });
    }

    /// One row per frequency, one column per metric.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frequency_hz");
        for m in Metric::ALL {
            out.push(',');
            out.push_str(m.name());
            out.push_str("_db");
        }
        out.push('\n');
        for (f, row) in self.frequencies.iter().zip(&self.rows) {
            write!(out, "{f}").unwrap();
            for m in Metric::ALL {
                write!(out, ",{}", row.get(m)).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Evaluates every metric with `input_port` (1..=4) driven.
pub fn compute_metrics(net: &Network, input_port: usize) -> Result<MetricReport> {
    let roles = PortRoles::resolve(net, input_port)?;
    let i = roles.input;
    let rows: Vec<MetricRow> = net
        .matrices()
        .iter()
        .map(|s| {
            MetricRow::from_magnitudes(
                s.get(i, i).norm(),
                s.get(roles.through, i).norm(),
                s.get(roles.coupled, i).norm(),
                s.get(roles.isolated, i).norm(),
            )
        })
        .collect();
    let mut best = 0;
    for (k, s) in net.matrices().iter().enumerate() {
        if s.get(roles.isolated, i).norm() < net.s(best).get(roles.isolated, i).norm() {
            best = k;
        }
    }
    Ok(MetricReport {
        frequencies: net.frequencies().to_vec(),
        center_frequency: net.frequencies()[best],
        rows,
        bands: Vec::new(),
    })
}

fn meets(metric: Metric, value: f64, threshold: f64) -> bool {
    if metric.higher_is_better() {
        value >= threshold
    } else {
        value <= threshold
    }
}

/// Frequency where the straight line between two grid samples crosses
/// `threshold`; falls back to the passing sample when either is infinite.
fn crossing(f_fail: f64, v_fail: f64, f_pass: f64, v_pass: f64, threshold: f64) -> f64 {
    if !(v_fail.is_finite() && v_pass.is_finite()) || v_pass == v_fail {
        return f_pass;
    }
    let t = (threshold - v_fail) / (v_pass - v_fail);
    f_fail + t.clamp(0.0, 1.0) * (f_pass - f_fail)
}

/// Maximal contiguous intervals where `metric` meets `threshold`, with edges
/// interpolated linearly in dB between grid points.
pub fn find_band(report: &MetricReport, metric: Metric, threshold: f64) -> Vec<(f64, f64)> {
    let f = &report.frequencies;
    let v = report.values(metric);
    let n = f.len();
    let mut bands = Vec::new();
    let mut k = 0;
    while k < n {
        if !meets(metric, v[k], threshold) {
            k += 1;
            continue;
        }
        let start = k;
        while k + 1 < n && meets(metric, v[k + 1], threshold) {
            k += 1;
        }
        let end = k;
        let lo = if start == 0 {
            f[0]
        } else {
            crossing(f[start - 1], v[start - 1], f[start], v[start], threshold)
        };
        let hi = if end + 1 == n {
            f[n - 1]
        } else {
            crossing(f[end + 1], v[end + 1], f[end], v[end], threshold)
        };
        bands.push((lo, hi));
        k += 1;
    }
    bands
}

/// Lower and/or upper limit on a metric (dB).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

impl Bound {
    pub fn at_least(min: f64) -> Self {
        Self { min: Some(min), max: None }
    }

    pub fn at_most(max: f64) -> Self {
        Self { min: None, max: Some(max) }
    }

    pub fn within(center: f64, tol: f64) -> Self {
        Self {
            min: Some(center - tol),
            max: Some(center + tol),
        }
    }

    /// Distance inside the bound (negative when violated).
    pub fn margin(&self, value: f64) -> f64 {
        if value.is_nan() {
            return f64::NEG_INFINITY;
        }
        let lo = self.min.map_or(f64::INFINITY, |m| value - m);
        let hi = self.max.map_or(f64::INFINITY, |m| m - value);
        lo.min(hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub metric: Metric,
    #[serde(flatten)]
    pub bound: Bound,
}

/// Targets that must hold over a frequency band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub band_hz: (f64, f64),
    #[serde(default = "default_input_port")]
    pub input_port: usize,
    #[serde(default)]
    pub targets: Vec<Target>,
}

fn default_input_port() -> usize {
    1
}

impl DesignSpec {
    pub fn new(band_hz: (f64, f64), targets: Vec<Target>) -> Result<Self> {
        let s = Self {
            band_hz,
            input_port: 1,
            targets,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.band_hz;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("spec band {lo}..{hi} Hz is not increasing")));
        }
        for t in &self.targets {
            let finite = |b: Option<f64>| b.is_none_or(f64::is_finite);
            if !(finite(t.bound.min) && finite(t.bound.max)) || (t.bound.min.is_none() && t.bound.max.is_none()) {
                return Err(Error::invalid(format!(
                    "target on {} needs finite min and/or max",
                    t.metric.name()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetCheck {
    pub target: Target,
    /// Smallest margin over the band (dB); negative means violated.
    pub worst_margin_db: f64,
    pub worst_frequency: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpecCheck {
    pub checks: Vec<TargetCheck>,
    pub pass: bool,
}

/// Per-target samples of the band: grid points inside it plus values
/// interpolated at the band edges.
fn band_samples(report: &MetricReport, spec: &DesignSpec, metric: Metric) -> Result<Vec<(f64, f64)>> {
    spec.validate()?;
    let f = &report.frequencies;
    let (lo, hi) = spec.band_hz;
    let span = f[f.len() - 1] - f[0];
    let slack = 1e-9 * span.max(f[0]);
    if lo < f[0] - slack || hi > f[f.len() - 1] + slack {
        return Err(Error::invalid(format!(
            "spec band {lo}..{hi} Hz lies outside the sweep {}..{} Hz",
            f[0],
            f[f.len() - 1]
        )));
    }
    let v = report.values(metric);
    let mut out: Vec<(f64, f64)> = f
        .iter()
        .zip(&v)
        .filter(|(fk, _)| **fk >= lo && **fk <= hi)
        .map(|(a, b)| (*a, *b))
        .collect();
    for edge in [lo, hi] {
        if let Some(k) = f.windows(2).position(|w| w[0] < edge && edge < w[1]) {
            let t = (edge - f[k]) / (f[k + 1] - f[k]);
            let (a, b) = (v[k], v[k + 1]);
            if a.is_finite() && b.is_finite() {
                out.push((edge, a + t * (b - a)));
            } else {
                out.push((f[k], a));
                out.push((f[k + 1], b));
            }
        }
    }
    Ok(out)
}

/// Worst-case margin of every target over the spec band.
pub fn check_spec(report: &MetricReport, spec: &DesignSpec) -> Result<SpecCheck> {
    let mut checks = Vec::with_capacity(spec.targets.len());
    spec.validate()?;
    // Validates the band even when there are no targets.
    band_samples(report, spec, Metric::ReturnLoss)?;
    for t in &spec.targets {
        let (mut worst, mut at) = (f64::INFINITY, spec.band_hz.0);
        for (f, v) in band_samples(report, spec, t.metric)? {
            let m = t.bound.margin(v);
            if m < worst {
                worst = m;
                at = f;
            }
        }
        checks.push(TargetCheck {
            target: *t,
            worst_margin_db: worst,
            worst_frequency: at,
            pass: worst >= 0.0,
        });
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(SpecCheck { checks, pass })
}

/// Sum over band samples and targets of squared violations (0 when the
/// spec is met everywhere).
pub fn hinge_cost(report: &MetricReport, spec: &DesignSpec) -> Result<f64> {
    let mut cost = 0.0;
    for t in &spec.targets {
        for (_, v) in band_samples(report, spec, t.metric)? {
            let m = t.bound.margin(v);
            if m < 0.0 {
                cost += if m.is_finite() { m * m } else { 1e12 };
            }
        }
    }
    Ok(cost)
}
