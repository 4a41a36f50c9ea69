//! Frequency sweeps, N-port scattering matrices and network algebra.
//!
//! Every [`Network`] carries a single real reference impedance shared by all
//! ports and frequencies. Connection operations never fail mid-sweep on a
//! resonant denominator: the affected frequencies are filled with NaN and
//! recorded as [`Diagnostic::SingularConnection`] so that the remaining
//! points are still usable.
//!
//! Port ordering after [`innerconnect`] is the remaining ports of `a` (in
//! their original order) followed by the remaining ports of `b`.
//! [`self_connect`] keeps the remaining ports in their original order.

use std::fmt;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Tolerances separating algebraic identities from model round-off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Structural identities (reciprocity, round trips).
    pub structural: f64,
    /// Physical properties of element models (unitarity, passivity).
    pub physical: f64,
    /// Connection denominators below this magnitude are treated as singular.
    pub singular: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            structural: 1e-12,
            physical: 1e-9,
            singular: 1e-12,
        }
    }
}

/// An ordered set of strictly increasing, positive frequencies (Hz).
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySweep {
    points: Vec<f64>,
}

impl FrequencySweep {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("frequency sweep needs at least one point"));
        }
        if let Some(bad) = points.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
            return Err(Error::invalid(format!(
                "frequency {bad} is not a positive finite value"
            )));
        }
        if let Some(w) = points.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!(
                "frequencies must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { points })
    }

    pub fn single(freq_hz: f64) -> Result<Self> {
        Self::new(vec![freq_hz])
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.points[0]
    }

    pub fn stop(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().copied()
    }
}

/// `n` uniformly spaced points from `start` to `stop` inclusive.
pub fn make_sweep(start: f64, stop: f64, n: usize) -> Result<FrequencySweep> {
    if !(start.is_finite() && stop.is_finite()) || start <= 0.0 {
        return Err(Error::invalid(format!(
            "sweep bounds must be positive and finite (start = {start}, stop = {stop})"
        )));
    }
    match n {
        0 => Err(Error::invalid("sweep needs at least one point")),
        1 if start == stop => FrequencySweep::new(vec![start]),
        1 => Err(Error::invalid("a single-point sweep requires start == stop")),
        _ if stop <= start => Err(Error::invalid(format!(
            "sweep stop {stop} must exceed start {start}"
        ))),
        _ => {
            let step = (stop - start) / (n - 1) as f64;
            let mut points: Vec<f64> = (0..n).map(|i| start + step * i as f64).collect();
            points[n - 1] = stop;
            FrequencySweep::new(points)
        }
    }
}

/// A square scattering matrix at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SMatrix(CMatrix);

impl SMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::invalid(format!(
                "S-matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[&[C64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("S-matrix rows must all have length N"));
        }
        Ok(Self(CMatrix::from_fn(n, n, |i, j| rows[i][j])))
    }

    pub fn identity_through() -> Self {
        Self(CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    /// Zero-based entry `S[i][j]`.
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Largest `|S_ij - S_ji|`.
    pub fn reciprocity_error(&self) -> f64 {
        let n = self.order();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)]).norm());
            }
        }
        worst
    }

    /// Largest entry of `|S^H S - I|`.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.order();
        let g = self.0.adjoint() * &self.0;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((g[(i, j)] - target).norm());
            }
        }
        worst
    }

    pub fn singular_values(&self) -> Vec<f64> {
        if self.order() == 0 {
            return Vec::new();
        }
        let svd = self.0.clone().svd(false, false);
        let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }

    pub fn max_singular_value(&self) -> f64 {
        self.singular_values().first().copied().unwrap_or(0.0)
    }

    pub fn is_passive(&self, tol: f64) -> bool {
        self.max_singular_value() <= 1.0 + tol
    }

    /// Largest elementwise difference to another matrix of the same order.
    pub fn max_abs_diff(&self, other: &SMatrix) -> f64 {
        assert_eq!(self.order(), other.order(), "order mismatch");
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Non-fatal events recorded on a [`Network`] while it was built.
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    /// A connection denominator vanished; the point holds NaN.
    SingularConnection {
        index: usize,
        freq_hz: f64,
        denominator: f64,
    },
    /// A termination with `|gamma| > 1` was applied.
    ActiveTermination { port: usize, magnitude: f64 },
    /// A transfer-matrix conversion or de-embedding failed at this point.
    SingularTransfer { index: usize, freq_hz: f64 },
    /// Free-form warning.
    Warning(String),
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::SingularConnection {
                index,
                freq_hz,
                denominator,
            } => write!(
                f,
                "singular connection at point {index} ({freq_hz} Hz), |denominator| = {denominator:.3e}"
            ),
            Diagnostic::ActiveTermination { port, magnitude } => write!(
                f,
                "termination on port {} has |gamma| = {magnitude} > 1",
                port + 1
            ),
            Diagnostic::SingularTransfer { index, freq_hz } => {
                write!(f, "singular transfer matrix at point {index} ({freq_hz} Hz)")
            }
            Diagnostic::Warning(msg) => f.write_str(msg),
        }
    }
}

/// An N-port scattering description sampled over a frequency sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    sweep: FrequencySweep,
    z0: f64,
    mats: Vec<SMatrix>,
    labels: Vec<String>,
    diagnostics: Vec<Diagnostic>,
}

impl Network {
    pub fn new(
        sweep: FrequencySweep,
        z0: f64,
        mats: Vec<SMatrix>,
        labels: Vec<String>,
    ) -> Result<Self> {
        if !(z0.is_finite() && z0 > 0.0) {
            return Err(Error::invalid(format!("reference impedance {z0} must be positive")));
        }
        if mats.len() != sweep.len() {
            return Err(Error::invalid(format!(
                "{} matrices for {} frequency points",
                mats.len(),
                sweep.len()
            )));
        }
        let n = mats[0].order();
        if mats.iter().any(|m| m.order() != n) {
            return Err(Error::invalid("all S-matrices of a network must share one order"));
        }
        if labels.len() != n {
            return Err(Error::invalid(format!(
                "{} port labels for a {n}-port network",
                labels.len()
            )));
        }
        Ok(Self {
            sweep,
            z0,
            mats,
            labels,
            diagnostics: Vec::new(),
        })
    }

    /// Builds a network by evaluating `f` at every frequency (in parallel).
    pub fn from_fn<F>(sweep: &FrequencySweep, z0: f64, labels: Vec<String>, f: F) -> Result<Self>
    where
        F: Fn(f64) -> CMatrix + Sync,
    {
        let mats = sweep
            .points()
            .par_iter()
            .map(|&freq| SMatrix::new(f(freq)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(sweep.clone(), z0, mats, labels)
    }

    pub fn ports(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ports() == 0
    }

    pub fn sweep(&self) -> &FrequencySweep {
        &self.sweep
    }

    pub fn frequencies(&self) -> &[f64] {
        self.sweep.points()
    }

    pub fn z0(&self) -> f64 {
        self.z0
    }

    pub fn matrices(&self) -> &[SMatrix] {
        &self.mats
    }

    pub fn s(&self, index: usize) -> &SMatrix {
        &self.mats[index]
    }

    /// Zero-based entry `S[i][j]` at frequency index `k`.
    pub fn entry(&self, k: usize, i: usize, j: usize) -> C64 {
        self.mats[k].get(i, j)
    }

    /// Trace of one entry across the sweep.
    pub fn trace(&self, i: usize, j: usize) -> Vec<C64> {
        self.mats.iter().map(|m| m.get(i, j)).collect()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn with_labels<S: Into<String>>(mut self, labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() != self.ports() {
            return Err(Error::invalid(format!(
                "{} labels for a {}-port network",
                labels.len(),
                self.ports()
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn port_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn diagnostics(&self) -> &[Diagnostic] {
        &self.diagnostics
    }

    pub fn push_diagnostic(&mut self, d: Diagnostic) {
        self.diagnostics.push(d);
    }

    /// Frequency indices flagged singular by any connection or conversion.
    pub fn flagged_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = self
            .diagnostics
            .iter()
            .filter_map(|d| match d {
                Diagnostic::SingularConnection { index, .. }
                | Diagnostic::SingularTransfer { index, .. } => Some(*index),
                _ => None,
            })
            .collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    }

    pub fn check_port(&self, port: usize) -> Result<()> {
        if port >= self.ports() {
            return Err(Error::InvalidPort {
                port,
                count: self.ports(),
            });
        }
        Ok(())
    }

    /// Largest elementwise difference over the whole sweep.
    pub fn max_abs_diff(&self, other: &Network) -> Result<f64> {
        ensure_compatible(self, other)?;
        if self.ports() != other.ports() {
            return Err(Error::IncompatibleNetworks(format!(
                "{}-port vs {}-port",
                self.ports(),
                other.ports()
            )));
        }
        Ok(self
            .mats
            .iter()
            .zip(&other.mats)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max))
    }

    /// Reorders ports so that new port `i` is old port `order[i]`.
    pub fn reorder(&self, order: &[usize]) -> Result<Network> {
        let n = self.ports();
        let mut seen = vec![false; n];
        if order.len() != n {
            return Err(Error::invalid(format!("permutation of length {} for {n} ports", order.len())));
        }
        for &p in order {
            self.check_port(p)?;
            if std::mem::replace(&mut seen[p], true) {
                return Err(Error::invalid(format!("port {} repeated in permutation", p + 1)));
            }
        }
        let mats = self
            .mats
            .iter()
            .map(|m| SMatrix(CMatrix::from_fn(n, n, |i, j| m.get(order[i], order[j]))))
            .collect();
        let labels = order.iter().map(|&p| self.labels[p].clone()).collect();
        Ok(Network {
            sweep: self.sweep.clone(),
            z0: self.z0,
            mats,
            labels,
            diagnostics: self.diagnostics.clone(),
        })
    }

    /// Reorders ports by label.
    pub fn reorder_by_labels(&self, labels: &[&str]) -> Result<Network> {
        let order = labels
            .iter()
            .map(|l| {
                self.port_index(l)
                    .ok_or_else(|| Error::invalid(format!("no port labelled '{l}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.reorder(&order)
    }

    /// Swaps the two ports of a 2-port.
    pub fn flipped(&self) -> Result<Network> {
        if self.ports() != 2 {
            return Err(Error::invalid("only 2-port networks can be flipped"));
        }
        self.reorder(&[1, 0])
    }

    /// Keeps only the listed ports; the others are left matched (deleted rows/columns).
    pub fn subnetwork(&self, ports: &[usize]) -> Result<Network> {
        for &p in ports {
            self.check_port(p)?;
        }
        let n = ports.len();
        let mats = self
            .mats
            .iter()
            .map(|m| SMatrix(CMatrix::from_fn(n, n, |i, j| m.get(ports[i], ports[j]))))
            .collect();
        Ok(Network {
            sweep: self.sweep.clone(),
            z0: self.z0,
            mats,
            labels: ports.iter().map(|&p| self.labels[p].clone()).collect(),
            diagnostics: self.diagnostics.clone(),
        })
    }

    /// Block-diagonal combination: ports of `self` followed by ports of `other`.
    pub fn block_diag(&self, other: &Network) -> Result<Network> {
        ensure_compatible(self, other)?;
        let na = self.ports();
        let n = na + other.ports();
        let mats = self
            .mats
            .iter()
            .zip(&other.mats)
            .map(|(a, b)| {
                let mut m = CMatrix::zeros(n, n);
                m.view_mut((0, 0), (na, na)).copy_from(a.matrix());
                m.view_mut((na, na), (n - na, n - na)).copy_from(b.matrix());
                SMatrix(m)
            })
            .collect();
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        let mut diagnostics = self.diagnostics.clone();
        diagnostics.extend(other.diagnostics.iter().cloned());
        Ok(Network {
            sweep: self.sweep.clone(),
            z0: self.z0,
            mats,
            labels,
            diagnostics,
        })
    }

    pub fn max_reciprocity_error(&self) -> f64 {
        self.mats.iter().map(SMatrix::reciprocity_error).fold(0.0, f64::max)
    }

    pub fn max_unitarity_error(&self) -> f64 {
        self.mats.iter().map(SMatrix::unitarity_error).fold(0.0, f64::max)
    }

    pub fn max_singular_value(&self) -> f64 {
        self.mats.iter().map(SMatrix::max_singular_value).fold(0.0, f64::max)
    }
}

pub(crate) fn ensure_compatible(a: &Network, b: &Network) -> Result<()> {
    if a.sweep != b.sweep {
        return Err(Error::IncompatibleNetworks(format!(
            "sweeps differ ({} points {}..{} Hz vs {} points {}..{} Hz)",
            a.sweep.len(),
            a.sweep.start(),
            a.sweep.stop(),
            b.sweep.len(),
            b.sweep.start(),
            b.sweep.stop()
        )));
    }
    if a.z0 != b.z0 {
        return Err(Error::IncompatibleNetworks(format!(
            "reference impedances differ ({} vs {} ohm)",
            a.z0, b.z0
        )));
    }
    Ok(())
}

fn ensure_two_port(n: &Network, what: &str) -> Result<()> {
    if n.ports() != 2 {
        return Err(Error::invalid(format!(
            "{what} must be a 2-port, got {} ports",
            n.ports()
        )));
    }
    Ok(())
}

/// Wave-cascading matrix of a 2-port, defined by `[b1, a1]^T = T [a2, b2]^T`,
/// so that cascaded 2-ports multiply left to right.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix(pub Matrix2<C64>);

impl TransferMatrix {
    pub fn identity() -> Self {
        Self(Matrix2::identity())
    }

    pub fn det(&self) -> C64 {
        self.0.determinant()
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d.norm() == 0.0 || !d.is_finite() {
            return None;
        }
        let m = &self.0;
        Some(Self(Matrix2::new(m[(1, 1)] / d, -m[(0, 1)] / d, -m[(1, 0)] / d, m[(0, 0)] / d)))
    }

    pub fn mul(&self, other: &TransferMatrix) -> TransferMatrix {
        TransferMatrix(self.0 * other.0)
    }
}

/// Converts a 2-port S-matrix to its transfer matrix. Requires `S21 != 0`.
pub fn s_to_t(s: &SMatrix, freq_hz: f64) -> Result<TransferMatrix> {
    if s.order() != 2 {
        return Err(Error::invalid("transfer matrices exist only for 2-ports"));
    }
    let (s11, s12, s21, s22) = (s.get(0, 0), s.get(0, 1), s.get(1, 0), s.get(1, 1));
    if s21.norm() == 0.0 || !s21.is_finite() {
        return Err(Error::DegenerateNetwork {
            freq_hz,
            reason: "S21 = 0, no transfer matrix".into(),
        });
    }
    let det = s11 * s22 - s12 * s21;
    Ok(TransferMatrix(Matrix2::new(-det / s21, s11 / s21, -s22 / s21, ONE / s21)))
}

/// Inverse of [`s_to_t`]. Requires `T22 != 0`.
pub fn t_to_s(t: &TransferMatrix, freq_hz: f64) -> Result<SMatrix> {
    let m = &t.0;
    let t22 = m[(1, 1)];
    if t22.norm() == 0.0 || !t22.is_finite() {
        return Err(Error::DegenerateNetwork {
            freq_hz,
            reason: "T22 = 0, no scattering matrix".into(),
        });
    }
    let det = t.det();
    Ok(SMatrix(CMatrix::from_row_slice(
        2,
        2,
        &[m[(0, 1)] / t22, det / t22, ONE / t22, -m[(1, 0)] / t22],
    )))
}

/// Transfer matrices of a 2-port network at every frequency.
pub fn to_transfer(n: &Network) -> Result<Vec<TransferMatrix>> {
    ensure_two_port(n, "network")?;
    n.mats
        .iter()
        .zip(n.sweep.iter())
        .map(|(s, f)| s_to_t(s, f))
        .collect()
}

/// Builds a 2-port network from per-frequency transfer matrices.
pub fn from_transfer(
    sweep: &FrequencySweep,
    z0: f64,
    ts: &[TransferMatrix],
    labels: Vec<String>,
) -> Result<Network> {
    let mats = ts
        .iter()
        .zip(sweep.iter())
        .map(|(t, f)| t_to_s(t, f))
        .collect::<Result<Vec<_>>>()?;
    Network::new(sweep.clone(), z0, mats, labels)
}

/// Cascades two 2-ports: port 2 of `a` feeds port 1 of `b`.
pub fn cascade(a: &Network, b: &Network) -> Result<Network> {
    ensure_compatible(a, b)?;
    ensure_two_port(a, "cascade operand a")?;
    ensure_two_port(b, "cascade operand b")?;
    let ta = to_transfer(a)?;
    let tb = to_transfer(b)?;
    let ts: Vec<TransferMatrix> = ta.iter().zip(&tb).map(|(x, y)| x.mul(y)).collect();
    let mut out = from_transfer(
        &a.sweep,
        a.z0,
        &ts,
        vec![a.labels[0].clone(), b.labels[1].clone()],
    )?;
    out.diagnostics = a.diagnostics.iter().chain(&b.diagnostics).cloned().collect();
    Ok(out)
}

/// Connects port `pa` of `a` to port `pb` of `b`. The result has the
/// remaining ports of `a` followed by the remaining ports of `b`.
pub fn innerconnect(a: &Network, pa: usize, b: &Network, pb: usize) -> Result<Network> {
    a.check_port(pa)?;
    b.check_port(pb)?;
    let joined = a.block_diag(b)?;
    self_connect_with(&joined, pa, a.ports() + pb, Tolerances::default())
}

/// Joins ports `p` and `q` of one network, yielding an (N-2)-port.
pub fn self_connect(a: &Network, p: usize, q: usize) -> Result<Network> {
    self_connect_with(a, p, q, Tolerances::default())
}

pub fn self_connect_with(a: &Network, p: usize, q: usize, tol: Tolerances) -> Result<Network> {
    a.check_port(p)?;
    a.check_port(q)?;
    if p == q {
        return Err(Error::invalid("cannot connect a port to itself"));
    }
    let n = a.ports();
    let keep: Vec<usize> = (0..n).filter(|&i| i != p && i != q).collect();
    let m = keep.len();

    let results: Vec<(SMatrix, Option<f64>)> = a
        .mats
        .par_iter()
        .map(|s| {
            let s = s.matrix();
            let (skk, sll, skl, slk) = (s[(p, p)], s[(q, q)], s[(p, q)], s[(q, p)]);
            let den = (ONE - skl) * (ONE - slk) - skk * sll;
            if den.norm() < tol.singular || !den.is_finite() {
                let nan = C64::new(f64::NAN, f64::NAN);
                return (SMatrix(CMatrix::from_element(m, m, nan)), Some(den.norm()));
            }
            let out = CMatrix::from_fn(m, m, |r, c| {
                let (i, j) = (keep[r], keep[c]);
                let num = s[(p, j)] * s[(i, q)] * (ONE - slk)
                    + s[(q, j)] * s[(i, p)] * (ONE - skl)
                    + s[(p, j)] * sll * s[(i, p)]
                    + s[(q, j)] * skk * s[(i, q)];
                s[(i, j)] + num / den
            });
            (SMatrix(out), None)
        })
        .collect();

    let mut diagnostics = a.diagnostics.clone();
    let mut mats = Vec::with_capacity(results.len());
    for (k, (mat, singular)) in results.into_iter().enumerate() {
        if let Some(den) = singular {
            diagnostics.push(Diagnostic::SingularConnection {
                index: k,
                freq_hz: a.sweep.points[k],
                denominator: den,
            });
        }
        mats.push(mat);
    }
    Ok(Network {
        sweep: a.sweep.clone(),
        z0: a.z0,
        mats,
        labels: keep.iter().map(|&i| a.labels[i].clone()).collect(),
        diagnostics,
    })
}

/// Terminates port `p` in a constant reflection `gamma`.
///
/// `|gamma| > 1` is allowed but recorded as [`Diagnostic::ActiveTermination`].
pub fn terminate_port(a: &Network, p: usize, gamma: C64) -> Result<Network> {
    a.check_port(p)?;
    let tol = Tolerances::default();
    let n = a.ports();
    let keep: Vec<usize> = (0..n).filter(|&i| i != p).collect();
    let m = keep.len();
    let mut diagnostics = a.diagnostics.clone();
    if gamma.norm() > 1.0 {
        diagnostics.push(Diagnostic::ActiveTermination {
            port: p,
            magnitude: gamma.norm(),
        });
    }
    let mut mats = Vec::with_capacity(a.mats.len());
    for (k, s) in a.mats.iter().enumerate() {
        let s = s.matrix();
        let den = ONE - gamma * s[(p, p)];
        if den.norm() < tol.singular {
            diagnostics.push(Diagnostic::SingularConnection {
                index: k,
                freq_hz: a.sweep.points[k],
                denominator: den.norm(),
            });
            mats.push(SMatrix(CMatrix::from_element(m, m, C64::new(f64::NAN, f64::NAN))));
            continue;
        }
        let g = gamma / den;
        mats.push(SMatrix(CMatrix::from_fn(m, m, |r, c| {
            let (i, j) = (keep[r], keep[c]);
            s[(i, j)] + s[(i, p)] * g * s[(p, j)]
        })));
    }
    Ok(Network {
        sweep: a.sweep.clone(),
        z0: a.z0,
        mats,
        labels: keep.iter().map(|&i| a.labels[i].clone()).collect(),
        diagnostics,
    })
}

/// Terminates port `p` of `a` in the frequency-dependent reflection of a 1-port.
pub fn terminate_with(a: &Network, p: usize, load: &Network) -> Result<Network> {
    if load.ports() != 1 {
        return Err(Error::invalid("terminating load must be a 1-port"));
    }
    innerconnect(a, p, load, 0)
}
