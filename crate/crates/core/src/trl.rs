//! Thru-Reflect-Line calibration and a virtual four-port probe station.
//!
//! Error model: a raw 2-port measurement is `T_raw = X T_dut Y` in transfer
//! form, with box `x` between analyser port 1 and the device (its port 1 on
//! the analyser side) and box `y` between the device and analyser port 2
//! (its port 1 on the device side). The Thru has zero length, so the
//! reference planes sit at its symmetry plane.
//!
//! [`trl_solve`] runs in three phases:
//!
//! 1. per frequency, in parallel: `M = T_line T_thru^-1` and its eigenvalues;
//! 2. one sequential scan assigning the eigenvalue pair to `e^(-gl)`,
//!    `e^(+gl)` by phase continuity, seeded from the nominal line length;
//! 3. per frequency, in parallel: error boxes from the eigenvectors, the
//!    Thru and the Reflect.
//!
//! Points whose line phase falls within [`GUARD_BAND_DEG`] of 0 or 180
//! degrees (mod 180) are excluded: their boxes hold NaN and they are listed
//! in the solution's diagnostics.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::elements::FOUR_PORT_ROLES;
use crate::netcore::{
    innerconnect, s_to_t, t_to_s, terminate_port, CMatrix, Diagnostic, FrequencySweep, Network, SMatrix,
    TransferMatrix, C64,
};
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Line phases closer than this to 0 or 180 degrees are not calibrated.
pub const GUARD_BAND_DEG: f64 = 20.0;

/// Recovered reflect phase at or beyond this distance from nominal is
/// reported as ambiguous.
pub const REFLECT_AMBIGUITY_DEG: f64 = 90.0;

const ONE: C64 = C64::new(1.0, 0.0);
const NAN: C64 = C64::new(f64::NAN, f64::NAN);
const DEGENERATE: f64 = 1e-12;

/// Source-side box `x` and load-side box `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBoxPair {
    pub x: Network,
    pub y: Network,
}

impl ErrorBoxPair {
    pub fn new(x: Network, y: Network) -> Result<Self> {
        if x.ports() != 2 || y.ports() != 2 {
            return Err(Error::invalid("error boxes must be 2-ports"));
        }
        if x.sweep() != y.sweep() || x.z0() != y.z0() {
            return Err(Error::IncompatibleNetworks("error boxes must share sweep and reference".into()));
        }
        Ok(Self { x, y })
    }

    pub fn identity(sweep: &FrequencySweep, z0: f64) -> Result<Self> {
        let thru = Network::from_fn(sweep, z0, vec!["1".into(), "2".into()], |_| {
            SMatrix::identity_through().into_matrix()
        })?;
        Self::new(thru.clone(), thru)
    }
}

fn transfer(s: &SMatrix, f: f64) -> Option<TransferMatrix> {
    s_to_t(s, f).ok().filter(|t| t.0.iter().all(|z| z.is_finite()))
}

/// Evaluates `op` on the transfer matrices of `nets` point by point. Points
/// where a conversion fails hold NaN and are flagged.
fn per_point<F>(nets: &[&Network], labels: Vec<String>, op: F) -> Result<Network>
where
    F: Fn(&[TransferMatrix]) -> Option<TransferMatrix> + Sync,
{
    let base = nets[0];
    for n in nets {
        if n.ports() != 2 {
            return Err(Error::invalid("transfer-form operations need 2-ports"));
        }
        if n.sweep() != base.sweep() || n.z0() != base.z0() {
            return Err(Error::IncompatibleNetworks("sweeps or references differ".into()));
        }
    }
    let freqs = base.frequencies();
    let results: Vec<Option<SMatrix>> = (0..freqs.len())
        .into_par_iter()
        .map(|k| {
            let ts: Option<Vec<TransferMatrix>> = nets.iter().map(|n| transfer(n.s(k), freqs[k])).collect();
            let t = op(&ts?)?;
            t_to_s(&t, freqs[k]).ok().filter(SMatrix::is_finite)
        })
        .collect();
    let mut diags = Vec::new();
    let mats = results
        .into_iter()
        .enumerate()
        .map(|(k, m)| {
            m.unwrap_or_else(|| {
                diags.push(Diagnostic::SingularTransfer {
                    index: k,
                    freq_hz: freqs[k],
                });
                SMatrix::new(CMatrix::from_element(2, 2, NAN)).unwrap()
            })
        })
        .collect();
    let mut out = Network::new(base.sweep().clone(), base.z0(), mats, labels)?;
    for n in nets {
        for d in n.diagnostics() {
            out.push_diagnostic(d.clone());
        }
    }
    for d in diags {
        out.push_diagnostic(d);
    }
    Ok(out)
}

/// Raw measurement of `dut` through `boxes`: `T_x T_dut T_y`.
pub fn embed(boxes: &ErrorBoxPair, dut: &Network) -> Result<Network> {
    per_point(&[&boxes.x, dut, &boxes.y], dut.labels().to_vec(), |t| {
        Some(t[0].mul(&t[1]).mul(&t[2]))
    })
}

/// Device seen between the reference planes: `T_x^-1 T_raw T_y^-1`.
pub fn deembed(boxes: &ErrorBoxPair, raw: &Network) -> Result<Network> {
    per_point(&[&boxes.x, raw, &boxes.y], raw.labels().to_vec(), |t| {
        Some(t[0].inverse()?.mul(&t[1]).mul(&t[2].inverse()?))
    })
}

/// Nominal kind of the reflect standard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReflectKind {
    Short,
    Open,
}

impl ReflectKind {
    pub fn nominal(&self) -> C64 {
        match self {
            ReflectKind::Short => -ONE,
            ReflectKind::Open => ONE,
        }
    }
}

/// Raw measurements of the three standards.
#[derive(Debug, Clone)]
pub struct TrlKit {
    pub thru: Network,
    pub line: Network,
    /// Reflect at both ports, stored as a 2-port with `S11 = Gamma_1`,
    /// `S22 = Gamma_2` (transmission entries ignored).
    pub reflect: Network,
    /// Physical excess length of the Line over the Thru (m).
    pub line_delta: f64,
    pub reflect_kind: ReflectKind,
    /// Expected effective permittivity of the Line, used to seed root
    /// selection. Without it the first point assumes a phase nearest 90 deg.
    pub eps_eff_estimate: Option<f64>,
}

impl TrlKit {
    pub fn new(
        thru: Network,
        line: Network,
        reflect: Network,
        line_delta: f64,
        reflect_kind: ReflectKind,
        eps_eff_estimate: Option<f64>,
    ) -> Result<Self> {
        let kit = Self {
            thru,
            line,
            reflect,
            line_delta,
            reflect_kind,
            eps_eff_estimate,
        };
        kit.validate()?;
        Ok(kit)
    }

    /// Packs two 1-port reflect measurements into the 2-port form.
    pub fn reflect_pair(port1: &Network, port2: &Network) -> Result<Network> {
        if port1.ports() != 1 || port2.ports() != 1 {
            return Err(Error::invalid("reflect measurements must be 1-ports"));
        }
        if port1.sweep() != port2.sweep() || port1.z0() != port2.z0() {
            return Err(Error::IncompatibleNetworks("reflect sweeps differ".into()));
        }
        let mats = port1
            .matrices()
            .iter()
            .zip(port2.matrices())
            .map(|(a, b)| {
                SMatrix::new(CMatrix::from_row_slice(2, 2, &[a.get(0, 0), C64::default(), C64::default(), b.get(0, 0)]))
            })
            .collect::<Result<Vec<_>>>()?;
        Network::new(port1.sweep().clone(), port1.z0(), mats, vec!["1".into(), "2".into()])
    }

    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("thru", &self.thru), ("line", &self.line), ("reflect", &self.reflect)] {
            if n.ports() != 2 {
                return Err(Error::invalid(format!("{name} measurement must be a 2-port")));
            }
            if n.sweep() != self.thru.sweep() || n.z0() != self.thru.z0() {
                return Err(Error::IncompatibleNetworks(format!(
                    "{name} measurement does not share the thru's sweep and reference"
                )));
            }
        }
        if !(self.line_delta > 0.0 && self.line_delta.is_finite()) {
            return Err(Error::invalid(format!("line delta {} must be positive", self.line_delta)));
        }
        if let Some(e) = self.eps_eff_estimate {
            if !(e >= 1.0 && e.is_finite()) {
                return Err(Error::invalid(format!("effective permittivity estimate {e} must be >= 1")));
            }
        }
        Ok(())
    }

    pub fn sweep(&self) -> &FrequencySweep {
        self.thru.sweep()
    }
}

/// Propagation constant of the Line standard per frequency (1/m).
#[derive(Debug, Clone, PartialEq)]
pub struct GammaProfile {
    pub frequencies: Vec<f64>,
    pub gamma: Vec<C64>,
}

impl GammaProfile {
    /// Line phase `Im(gamma) * l` in degrees.
    pub fn line_phase_deg(&self, line_delta: f64) -> Vec<f64> {
        self.gamma.iter().map(|g| (g.im * line_delta).to_degrees()).collect()
    }

    /// `(beta c / 2 pi f)^2`.
    pub fn eps_eff(&self) -> Vec<f64> {
        self.gamma
            .iter()
            .zip(&self.frequencies)
            .map(|(g, f)| (g.im * SPEED_OF_LIGHT / (2.0 * PI * f)).powi(2))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrlSolution {
    pub boxes: ErrorBoxPair,
    pub gamma: GammaProfile,
    /// Reflect coefficient recovered through the `x` and `y` boxes.
    pub reflect_x: Vec<C64>,
    pub reflect_y: Vec<C64>,
    /// Product of the assigned eigenvalues (1 for consistent data).
    pub eigen_products: Vec<C64>,
    /// Indices left uncalibrated.
    pub excluded: Vec<usize>,
    pub diagnostics: Vec<Diagnostic>,
}

fn eigenvalues(m: &TransferMatrix) -> (C64, C64) {
    let tr = m.0[(0, 0)] + m.0[(1, 1)];
    let det = m.det();
    let disc = (tr * tr - 4.0 * det).sqrt();
    // Avoid cancellation in the smaller root.
    let big = if (tr + disc).norm() >= (tr - disc).norm() {
        (tr + disc) / 2.0
    } else {
        (tr - disc) / 2.0
    };
    let small = if big.norm() == 0.0 { C64::default() } else { det / big };
    (big, small)
}

/// Picks the ratio with the larger denominator.
fn ratio(n1: C64, d1: C64, n2: C64, d2: C64) -> C64 {
    if d1.norm() >= d2.norm() {
        n1 / d1
    } else {
        n2 / d2
    }
}

fn wrap_deg(d: f64) -> f64 {
    let r = d.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

struct PointBoxes {
    x: [C64; 4],
    y: [C64; 4],
    reflect_x: C64,
    reflect_y: C64,
}

enum PointOutcome {
    Solved(PointBoxes),
    Degenerate(String),
}

/// Solves one frequency given the ordered eigenvalues.
#[allow(clippy::too_many_arguments)]
fn solve_point(
    t_t: &TransferMatrix,
    m: &TransferMatrix,
    l1: C64,
    l2: C64,
    g1: C64,
    g2: C64,
    kind: ReflectKind,
    freq: f64,
) -> Result<PointOutcome> {
    let mm = &m.0;
    let (m11, m12, m21, m22) = (mm[(0, 0)], mm[(0, 1)], mm[(1, 0)], mm[(1, 1)]);
    let u = ratio(l1 - m11, m12, m21, l1 - m22);
    let b = ratio(m12, l2 - m11, l2 - m22, m21);
    let t = &t_t.0;
    let (t11, t12, t21, t22) = (t[(0, 0)], t[(0, 1)], t[(1, 0)], t[(1, 1)]);
    let one_bu = ONE - b * u;
    let den_k = t22 - u * t12;
    let den_w = t11 - b * t21;
    if one_bu.norm() < DEGENERATE || den_k.norm() < DEGENERATE || den_w.norm() < DEGENERATE {
        return Ok(PointOutcome::Degenerate("thru and line do not determine the boxes".into()));
    }
    let k = den_k / one_bu;
    let gy = (t21 - u * t11) / den_k;
    let w = (t12 - b * t22) / den_w;
    let p = den_w / den_k;

    let d1 = g1 * u - ONE;
    let d2 = ONE + g2 * w;
    if d1.norm() < DEGENERATE || d2.norm() < DEGENERATE {
        return Ok(PointOutcome::Degenerate("reflect measurement is singular".into()));
    }
    let q1 = (b - g1) / d1;
    let q2 = (g2 + gy) / d2;
    if q2.norm() < DEGENERATE || q1.norm() < DEGENERATE {
        return Ok(PointOutcome::Degenerate("reflect standard reads as matched".into()));
    }
    let mut a = (p * q1 / q2).sqrt();
    let nominal = kind.nominal();
    let dist = |a: C64| wrap_deg(((q1 / a) / nominal).arg().to_degrees()).abs();
    if dist(-a) < dist(a) {
        a = -a;
    }
    let phase = dist(a);
    if phase >= REFLECT_AMBIGUITY_DEG - 1e-9 {
        return Err(Error::ReflectAmbiguity {
            freq_hz: freq,
            phase_deg: phase,
        });
    }
    let alpha = p / a;
    let reflect_x = q1 / a;
    let reflect_y = q2 / alpha;

    let e00 = b;
    let e11 = -u * a;
    let e10 = (a * one_bu).sqrt();
    let e01 = e10;
    let x22 = ONE / e10;
    let y22 = k / x22;
    let f21 = ONE / y22;
    let f11 = alpha * w;
    let f22 = -gy;
    let f12 = alpha * (ONE - w * gy) / f21;
    Ok(PointOutcome::Solved(PointBoxes {
        x: [e00, e01, e10, e11],
        y: [f11, f12, f21, f22],
        reflect_x,
        reflect_y,
    }))
}

/// Classic TRL solution: error boxes, line propagation constant and
/// recovered reflect, per frequency.
pub fn trl_solve(kit: &TrlKit) -> Result<TrlSolution> {
    kit.validate()?;
    let sweep = kit.sweep().clone();
    let freqs = sweep.points();
    let n = freqs.len();
    let l = kit.line_delta;

    // Phase 1: eigen-solves.
    let eig: Vec<Option<(TransferMatrix, TransferMatrix, C64, C64)>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let tt = transfer(kit.thru.s(k), freqs[k])?;
            let tl = transfer(kit.line.s(k), freqs[k])?;
            let m = tl.mul(&tt.inverse()?);
            let (e1, e2) = eigenvalues(&m);
            (e1.norm() > 0.0 && e2.norm() > 0.0 && e1.is_finite() && e2.is_finite()).then_some((tt, m, e1, e2))
        })
        .collect();

    // Phase 2: root assignment by phase continuity.
    let mut seed = kit
        .eps_eff_estimate
        .map(|e| (2.0 * PI * freqs[0] * e.sqrt() * l / SPEED_OF_LIGHT, freqs[0]));
    let mut gamma = vec![NAN; n];
    let mut order: Vec<Option<(C64, C64)>> = vec![None; n];
    for k in 0..n {
        let Some((_, _, e1, e2)) = eig[k] else { continue };
        let target = match seed {
            Some((theta, f)) => theta * freqs[k] / f,
            None => PI / 2.0,
        };
        let mut best: Option<(f64, f64, C64, C64, C64)> = None;
        for (la, lb) in [(e1, e2), (e2, e1)] {
            let z = -la.ln();
            let turns = ((target - z.im) / (2.0 * PI)).round();
            let theta = z.im + 2.0 * PI * turns;
            let d = (theta - target).abs();
            let cand = (d, z.re, C64::new(z.re, theta), la, lb);
            best = match best {
                Some(bst) if bst.0 < d - 1e-9 || ((bst.0 - d).abs() <= 1e-9 && bst.1 >= z.re) => Some(bst),
                _ => Some(cand),
            };
        }
        let (_, _, gl, la, lb) = best.unwrap();
        gamma[k] = gl / l;
        order[k] = Some((la, lb));
        seed = Some((gl.im, freqs[k]));
    }

    // Phase 3: error boxes.
    let mut excluded = Vec::new();
    let mut diagnostics = Vec::new();
    let outcomes: Vec<Result<Option<PointOutcome>>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let (Some((tt, m, _, _)), Some((la, lb))) = (eig[k], order[k]) else {
                return Ok(None);
            };
            let phase = (gamma[k].im * l).to_degrees().rem_euclid(180.0);
            if !(GUARD_BAND_DEG..=180.0 - GUARD_BAND_DEG).contains(&phase) {
                return Ok(None);
            }
            let (g1, g2) = (kit.reflect.entry(k, 0, 0), kit.reflect.entry(k, 1, 1));
            solve_point(&tt, &m, la, lb, g1, g2, kit.reflect_kind, freqs[k]).map(Some)
        })
        .collect();

    let nan4 = [NAN; 4];
    let mut xs = vec![nan4; n];
    let mut ys = vec![nan4; n];
    let mut reflect_x = vec![NAN; n];
    let mut reflect_y = vec![NAN; n];
    let mut eigen_products = vec![NAN; n];
    let mut prev_e10: Option<C64> = None;
    for (k, out) in outcomes.into_iter().enumerate() {
        if let Some((la, lb)) = order[k] {
            eigen_products[k] = la * lb;
        }
        match out? {
            Some(PointOutcome::Solved(mut pb)) => {
                // Square-root branch of e10 = e01 follows the previous point.
                if prev_e10.is_some_and(|p| (pb.x[2] + p).norm() < (pb.x[2] - p).norm()) {
                    pb.x[1] = -pb.x[1];
                    pb.x[2] = -pb.x[2];
                    pb.y[1] = -pb.y[1];
                    pb.y[2] = -pb.y[2];
                }
                prev_e10 = Some(pb.x[2]);
                xs[k] = pb.x;
                ys[k] = pb.y;
                reflect_x[k] = pb.reflect_x;
                reflect_y[k] = pb.reflect_y;
            }
            Some(PointOutcome::Degenerate(why)) => {
                excluded.push(k);
                diagnostics.push(Diagnostic::Warning(format!(
                    "point {k} ({} Hz) not calibrated: {why}",
                    freqs[k]
                )));
            }
            None => {
                excluded.push(k);
                let why = if order[k].is_none() {
                    "thru or line has no transfer matrix".to_string()
                } else {
                    format!(
                        "line phase {:.3} deg is within {GUARD_BAND_DEG} deg of 0/180",
                        (gamma[k].im * l).to_degrees()
                    )
                };
                diagnostics.push(Diagnostic::Warning(format!(
                    "point {k} ({} Hz) not calibrated: {why}",
                    freqs[k]
                )));
            }
        }
    }
    let to_net = |v: &[[C64; 4]]| -> Result<Network> {
        let mats = v
            .iter()
            .map(|e| SMatrix::new(CMatrix::from_row_slice(2, 2, e)))
            .collect::<Result<Vec<_>>>()?;
        Network::new(sweep.clone(), kit.thru.z0(), mats, vec!["1".into(), "2".into()])
    };
    let mut x = to_net(&xs)?;
    let mut y = to_net(&ys)?;
    for d in &diagnostics {
        x.push_diagnostic(d.clone());
        y.push_diagnostic(d.clone());
    }
    Ok(TrlSolution {
        boxes: ErrorBoxPair::new(x, y)?,
        gamma: GammaProfile {
            frequencies: freqs.to_vec(),
            gamma,
        },
        reflect_x,
        reflect_y,
        eigen_products,
        excluded,
        diagnostics,
    })
}

/// Raw Thru, Line and Reflect measurements seen through `boxes`.
/// `line` is the Line standard itself (a 2-port of excess length
/// `line_delta`).
pub fn synthesize_kit(
    boxes: &ErrorBoxPair,
    line: &Network,
    line_delta: f64,
    reflect_gamma: C64,
    reflect_kind: ReflectKind,
    eps_eff_estimate: Option<f64>,
) -> Result<TrlKit> {
    let sweep = boxes.x.sweep();
    let ideal_thru = ErrorBoxPair::identity(sweep, boxes.x.z0())?.x;
    let thru = embed(boxes, &ideal_thru)?;
    let line_meas = embed(boxes, line)?;
    let r1 = terminate_port(&boxes.x, 1, reflect_gamma)?;
    let r2 = terminate_port(&boxes.y, 0, reflect_gamma)?;
    let reflect = TrlKit::reflect_pair(&r1, &r2)?;
    TrlKit::new(thru, line_meas, reflect, line_delta, reflect_kind, eps_eff_estimate)
}

/// Adds complex Gaussian noise with standard deviation `sigma` on each of
/// the real and imaginary parts of every S-parameter. Reproducible for a
/// given `seed`.
pub fn add_noise(net: &Network, sigma: f64, seed: u64) -> Result<Network> {
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(format!("noise sigma {sigma}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mats = net
        .matrices()
        .iter()
        .map(|m| {
            let mut m = m.matrix().clone();
            for z in m.iter_mut() {
                *z += C64::new(normal.sample(&mut rng), normal.sample(&mut rng));
            }
            SMatrix::new(m)
        })
        .collect::<Result<Vec<_>>>()?;
    Network::new(net.sweep().clone(), net.z0(), mats, net.labels().to_vec())
}

/// Random smooth, reciprocal, passive 2-port: `|S11|, |S22| <= max_reflection`
/// and transmission loss at most `max_loss_db`.
///
/// Built as a lossless reciprocal matrix with reflection `rho` scaled by a
/// constant loss factor, with phases that advance linearly in frequency.
pub fn random_error_box<R: Rng>(
    rng: &mut R,
    sweep: &FrequencySweep,
    z0: f64,
    max_reflection: f64,
    max_loss_db: f64,
) -> Result<Network> {
    if !(0.0..1.0).contains(&max_reflection) || !(max_loss_db >= 0.0) {
        return Err(Error::invalid("reflection must be in [0, 1) and loss non-negative"));
    }
    let rho_max = max_reflection;
    // Loss from mismatch at full reflection, the rest from attenuation.
    let mismatch_db = -10.0 * (1.0 - rho_max * rho_max).log10();
    let atten_budget = (max_loss_db - mismatch_db).max(0.0);
    let rho0 = rng.gen_range(0.2..1.0) * rho_max;
    let ripple = rng.gen_range(0.0..0.2) * rho0;
    let atten_db = rng.gen_range(0.0..=1.0) * atten_budget;
    let kappa = 10f64.powf(-atten_db / 20.0);
    let tau_t = rng.gen_range(20e-12..120e-12);
    let tau_r = rng.gen_range(-80e-12..80e-12);
    let tau_p = rng.gen_range(50e-12..300e-12);
    let (phi0, psi0) = (rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
    Network::from_fn(sweep, z0, vec!["1".into(), "2".into()], move |f| {
        let rho = (rho0 - ripple * (2.0 * PI * f * tau_p).sin()).clamp(0.0, rho_max);
        let psi = psi0 - 2.0 * PI * f * tau_t;
        let phi1 = phi0 - 2.0 * PI * f * tau_r;
        let phi2 = 2.0 * psi - phi1 + PI;
        let s11 = C64::from_polar(kappa * rho, phi1);
        let s22 = C64::from_polar(kappa * rho, phi2);
        let s21 = C64::from_polar(kappa * (1.0 - rho * rho).sqrt(), psi);
        CMatrix::from_row_slice(2, 2, &[s11, s21, s21, s22])
    })
}

/// Port pairs (1-based) reachable by probes on opposite sides.
pub const MEASURED_PAIRS: [(usize, usize); 4] = [(1, 2), (1, 3), (4, 2), (4, 3)];

/// One pairwise raw measurement.
#[derive(Debug, Clone)]
pub struct PairMeasurement {
    /// Device ports (1-based) on analyser ports 1 and 2.
    pub ports: (usize, usize),
    pub raw: Network,
}

/// Error boxes for one pair: probe `i` as `x`, probe `j` reversed as `y`.
pub fn pair_boxes(probes: &[Network; 4], pair: (usize, usize)) -> Result<ErrorBoxPair> {
    let (i, j) = pair;
    if !(1..=4).contains(&i) || !(1..=4).contains(&j) || i == j {
        return Err(Error::invalid(format!("bad port pair ({i}, {j})")));
    }
    ErrorBoxPair::new(probes[i - 1].clone(), probes[j - 1].flipped()?)
}

/// The device with every port except `i` and `j` loaded by its probe, the
/// probe's analyser side terminated in `termination_gamma`.
pub fn terminated_pair(dut: &Network, probes: &[Network; 4], pair: (usize, usize), termination_gamma: C64) -> Result<Network> {
    if dut.ports() != 4 {
        return Err(Error::invalid(format!("virtual station needs a 4-port, got {}", dut.ports())));
    }
    let (i, j) = pair;
    let names = ["p1", "p2", "p3", "p4"];
    let mut net = dut.clone().with_labels(names)?;
    for m in 1..=4 {
        if m == i || m == j {
            continue;
        }
        let probe = probes[m - 1].clone().with_labels(["vna", "dut"])?;
        let p = net.port_index(names[m - 1]).unwrap();
        net = innerconnect(&net, p, &probe, 1)?;
        let v = net.port_index("vna").unwrap();
        net = terminate_port(&net, v, termination_gamma)?;
    }
    net.reorder_by_labels(&[names[i - 1], names[j - 1]])?
        .with_labels([i.to_string(), j.to_string()])
}

/// Pairwise raw measurements of a 4-port through per-port probes
/// (`probes[k]` has its port 1 on the analyser and port 2 on device port
/// `k+1`). Same-side pairs are not measured.
pub fn virtual_station(dut: &Network, probes: &[Network; 4], termination_gamma: C64) -> Result<Vec<PairMeasurement>> {
    for p in probes {
        if p.ports() != 2 {
            return Err(Error::invalid("probes must be 2-ports"));
        }
    }
    MEASURED_PAIRS
        .iter()
        .map(|&pair| {
            let sub = terminated_pair(dut, probes, pair, termination_gamma)?;
            let raw = embed(&pair_boxes(probes, pair)?, &sub)?;
            Ok(PairMeasurement { ports: pair, raw })
        })
        .collect()
}

/// Which entries of an assembled 4-port came from measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    /// `measured[i][j]` for 0-based entry `(i, j)`.
    pub measured: [[bool; 4]; 4],
    /// Entries never measured (0-based).
    pub unmeasured: Vec<(usize, usize)>,
    /// Whether unmeasured entries were taken from a model instead of NaN.
    pub filled_from_model: bool,
    pub warnings: Vec<String>,
}

/// Assembles a 4x4 matrix from the opposite-side pair measurements
/// (already de-embedded). Reflections measured in two pairs are averaged;
/// same-side transmissions are NaN, or copied from `model` when given.
pub fn assemble_4port(
    pairs: &[PairMeasurement],
    model: Option<&Network>,
    tolerance: f64,
) -> Result<(Network, CoverageReport)> {
    let find = |pair: (usize, usize)| {
        pairs
            .iter()
            .find(|m| m.ports == pair)
            .ok_or_else(|| Error::invalid(format!("missing measurement of ports {pair:?}")))
    };
    let meas: Vec<&PairMeasurement> = MEASURED_PAIRS.iter().map(|&p| find(p)).collect::<Result<_>>()?;
    let base = &meas[0].raw;
    for m in &meas {
        if m.raw.ports() != 2 || m.raw.sweep() != base.sweep() || m.raw.z0() != base.z0() {
            return Err(Error::IncompatibleNetworks("pair measurements must be 2-ports on one sweep".into()));
        }
    }
    if let Some(model) = model {
        if model.ports() != 4 || model.sweep() != base.sweep() {
            return Err(Error::IncompatibleNetworks("fill model must be a 4-port on the same sweep".into()));
        }
    }
    let mut measured = [[false; 4]; 4];
    let mut warnings = Vec::new();
    let n = base.sweep().len();
    let mut mats = Vec::with_capacity(n);
    let mut worst_diag = [0.0f64; 4];
    let mut worst_recip: Vec<((usize, usize), f64)> = Vec::new();
    for k in 0..n {
        let mut s = CMatrix::from_element(4, 4, NAN);
        let mut refl: [Vec<C64>; 4] = Default::default();
        for m in &meas {
            let (i, j) = (m.ports.0 - 1, m.ports.1 - 1);
            let sm = m.raw.s(k);
            refl[i].push(sm.get(0, 0));
            refl[j].push(sm.get(1, 1));
            s[(j, i)] = sm.get(1, 0);
            s[(i, j)] = sm.get(0, 1);
            measured[i][i] = true;
            measured[j][j] = true;
            measured[i][j] = true;
            measured[j][i] = true;
            let d = (sm.get(1, 0) - sm.get(0, 1)).norm();
            if d > tolerance {
                match worst_recip.iter_mut().find(|(p, _)| *p == m.ports) {
                    Some(entry) => entry.1 = entry.1.max(d),
                    None => worst_recip.push((m.ports, d)),
                }
            }
        }
        for p in 0..4 {
            let v = &refl[p];
            s[(p, p)] = v.iter().sum::<C64>() / v.len() as f64;
            for a in v {
                worst_diag[p] = worst_diag[p].max((a - s[(p, p)]).norm() * 2.0);
            }
        }
        if let Some(model) = model {
            for (i, j) in unmeasured_entries() {
                s[(i, j)] = model.entry(k, i, j);
            }
        }
        mats.push(SMatrix::new(s)?);
    }
    for (p, d) in worst_diag.iter().enumerate() {
        if *d > tolerance {
            warnings.push(format!(
                "S{0}{0} differs between its two measurements by up to {d:.3e}",
                p + 1
            ));
        }
    }
    for ((i, j), d) in worst_recip {
        warnings.push(format!("S{j}{i} and S{i}{j} differ by up to {d:.3e} (non-reciprocal or inconsistent)"));
    }
    let net = Network::new(
        base.sweep().clone(),
        base.z0(),
        mats,
        FOUR_PORT_ROLES.iter().map(|s| s.to_string()).collect(),
    )?;
    Ok((
        net,
        CoverageReport {
            measured,
            unmeasured: unmeasured_entries().to_vec(),
            filled_from_model: model.is_some(),
            warnings,
        },
    ))
}

fn unmeasured_entries() -> [(usize, usize); 4] {
    [(0, 3), (3, 0), (1, 2), (2, 1)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpw::LineParams;
    use crate::elements::{line2p, line2p_electrical, ElectricalLength};
    use crate::netcore::{cascade, make_sweep};

    fn matched_line(deg: f64, sweep: &FrequencySweep) -> Network {
        line2p_electrical(50.0, ElectricalLength::from_degrees(deg, 7e9), sweep, 50.0).unwrap()
    }

    #[test]
    fn identity_boxes_change_nothing() {
        let sweep = make_sweep(1e9, 2e9, 5).unwrap();
        let dut = line2p_electrical(30.0, ElectricalLength::from_degrees(40.0, 1e9), &sweep, 50.0).unwrap();
        let id = ErrorBoxPair::identity(&sweep, 50.0).unwrap();
        assert!(embed(&id, &dut).unwrap().max_abs_diff(&dut).unwrap() < 1e-15);
    }

    #[test]
    fn line_boxes_add_phase() {
        let sweep = FrequencySweep::single(7e9).unwrap();
        let boxes = ErrorBoxPair::new(matched_line(30.0, &sweep), matched_line(30.0, &sweep)).unwrap();
        let dut = matched_line(10.0, &sweep);
        let raw = embed(&boxes, &dut).unwrap();
        let s21 = raw.entry(0, 1, 0);
        assert!((s21.norm() - 1.0).abs() < 1e-14);
        assert!((s21.arg().to_degrees() + 70.0).abs() < 1e-10);
    }

    #[test]
    fn embed_deembed_inverse() {
        let sweep = make_sweep(2e9, 12e9, 31).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let boxes = ErrorBoxPair::new(
            random_error_box(&mut rng, &sweep, 50.0, 0.3, 1.0).unwrap(),
            random_error_box(&mut rng, &sweep, 50.0, 0.3, 1.0).unwrap(),
        )
        .unwrap();
        let dut = line2p_electrical(35.0, ElectricalLength::from_degrees(60.0, 7e9), &sweep, 50.0).unwrap();
        let back = deembed(&boxes, &embed(&boxes, &dut).unwrap()).unwrap();
        assert!(back.max_abs_diff(&dut).unwrap() < 1e-13);
    }

    #[test]
    fn random_boxes_are_passive_and_bounded() {
        let sweep = make_sweep(1e9, 20e9, 101).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let b = random_error_box(&mut rng, &sweep, 50.0, 0.3, 1.0).unwrap();
            assert!(b.max_singular_value() <= 1.0 + 1e-12);
            for k in 0..sweep.len() {
                assert!(b.entry(k, 0, 0).norm() <= 0.3 + 1e-12);
                assert!(b.entry(k, 1, 1).norm() <= 0.3 + 1e-12);
                assert!(-20.0 * b.entry(k, 1, 0).norm().log10() <= 1.0 + 1e-9);
            }
            assert!(b.max_reciprocity_error() < 1e-15);
        }
    }

    fn kit_for(boxes: &ErrorBoxPair, sweep: &FrequencySweep, gamma: C64) -> TrlKit {
        let lp = LineParams::lossy(50.0, 6.45, 0.5).unwrap();
        let delta = SPEED_OF_LIGHT / (4.0 * 7e9 * 6.45f64.sqrt());
        let line = line2p(&lp, delta, sweep, 50.0).unwrap();
        synthesize_kit(boxes, &line, delta, gamma, ReflectKind::Short, Some(6.45)).unwrap()
    }

    #[test]
    fn identity_boxes_solve_to_identity() {
        let sweep = make_sweep(3e9, 11e9, 17).unwrap();
        let id = ErrorBoxPair::identity(&sweep, 50.0).unwrap();
        let sol = trl_solve(&kit_for(&id, &sweep, -ONE)).unwrap();
        assert!(sol.excluded.is_empty());
        assert!(sol.boxes.x.max_abs_diff(&id.x).unwrap() < 1e-12);
        assert!(sol.boxes.y.max_abs_diff(&id.y).unwrap() < 1e-12);
    }

    #[test]
    fn solved_boxes_recover_gamma_and_dut() {
        let sweep = make_sweep(1e9, 14e9, 131).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let boxes = ErrorBoxPair::new(
            random_error_box(&mut rng, &sweep, 50.0, 0.3, 1.0).unwrap(),
            random_error_box(&mut rng, &sweep, 50.0, 0.3, 1.0).unwrap(),
        )
        .unwrap();
        let kit = kit_for(&boxes, &sweep, C64::new(-0.98, 0.05));
        let sol = trl_solve(&kit).unwrap();
        let lp = LineParams::lossy(50.0, 6.45, 0.5).unwrap();
        let dut = cascade(
            &line2p_electrical(30.0, ElectricalLength::from_degrees(50.0, 7e9), &sweep, 50.0).unwrap(),
            &line2p_electrical(70.0, ElectricalLength::from_degrees(20.0, 7e9), &sweep, 50.0).unwrap(),
        )
        .unwrap();
        let back = deembed(&sol.boxes, &embed(&boxes, &dut).unwrap()).unwrap();
        let thru = deembed(&sol.boxes, &kit.thru).unwrap();
        for k in 0..sweep.len() {
            let f = sweep.points()[k];
            let truth = lp.gamma(f);
            if sol.excluded.contains(&k) {
                continue;
            }
            assert!((sol.gamma.gamma[k] - truth).norm() / truth.norm() < 1e-9);
            assert!((sol.eigen_products[k] - ONE).norm() < 1e-10);
            assert!(back.s(k).max_abs_diff(dut.s(k)) < 1e-9);
            assert!(thru.s(k).max_abs_diff(&SMatrix::identity_through()) < 1e-9);
            assert!((sol.reflect_x[k] - sol.reflect_y[k]).norm() < 1e-9);
            assert!((sol.reflect_x[k] - C64::new(-0.98, 0.05)).norm() < 1e-9);
        }
        // Quarter wave at 7 GHz: 20..160 deg spans about 1.56..12.44 GHz.
        let used: Vec<f64> = (0..sweep.len()).filter(|k| !sol.excluded.contains(k)).map(|k| sweep.points()[k]).collect();
        assert!((used[0] - 1.6e9).abs() < 0.11e9, "{}", used[0]);
        assert!((used[used.len() - 1] - 12.4e9).abs() < 0.11e9);
        assert!(sol.boxes.x.entry(0, 0, 0).is_nan());
    }

    #[test]
    fn quadrature_reflect_is_ambiguous() {
        let sweep = make_sweep(5e9, 9e9, 5).unwrap();
        let id = ErrorBoxPair::identity(&sweep, 50.0).unwrap();
        let err = trl_solve(&kit_for(&id, &sweep, C64::new(0.0, 1.0))).unwrap_err();
        assert!(matches!(err, Error::ReflectAmbiguity { .. }));
    }

    #[test]
    fn kit_validation() {
        let sweep = make_sweep(5e9, 9e9, 5).unwrap();
        let id = ErrorBoxPair::identity(&sweep, 50.0).unwrap();
        let kit = kit_for(&id, &sweep, -ONE);
        let other = make_sweep(5e9, 9e9, 6).unwrap();
        let thru = ErrorBoxPair::identity(&other, 50.0).unwrap().x;
        assert!(TrlKit::new(thru, kit.line.clone(), kit.reflect.clone(), 1e-3, ReflectKind::Short, None).is_err());
        assert!(TrlKit::new(kit.thru.clone(), kit.line.clone(), kit.reflect.clone(), 0.0, ReflectKind::Short, None).is_err());
    }

    #[test]
    fn noise_is_reproducible() {
        let sweep = make_sweep(5e9, 9e9, 5).unwrap();
        let n = matched_line(90.0, &sweep);
        let a = add_noise(&n, 1e-3, 9).unwrap();
        assert_eq!(a, add_noise(&n, 1e-3, 9).unwrap());
        assert_ne!(a, add_noise(&n, 1e-3, 10).unwrap());
        let d = a.max_abs_diff(&n).unwrap();
        assert!(d > 0.0 && d < 1e-2);
    }
}
