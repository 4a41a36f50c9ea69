//! The two devices: a backward-wave coupled-line coupler and a branch-line
//! quadrature hybrid assembled from eight elements, plus T-junction fitting
//! and the simplex design-tuning loop.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::cpw::CoupledLineParams;
use crate::elements::{coupled_line4p, line2p_electrical, tjunction3p, ElectricalLength, TJunctionSpec, FOUR_PORT_ROLES};
use crate::metrics::{compute_metrics, hinge_cost, DesignSpec};
use crate::netcore::{innerconnect, self_connect, FrequencySweep, Network};
use crate::optim::{nelder_mead, IterationRecord, NelderMeadOptions};
use crate::{Error, Result, DEFAULT_Z0, SPEED_OF_LIGHT};

/// Effective permittivity of CPW on silicon, `(11.9 + 1) / 2`.
pub const DEFAULT_EPS_EFF: f64 = 6.45;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplerSpec {
    pub f0: f64,
    /// Coupling magnitude in dB (positive, 20 for a 20 dB coupler).
    pub coupling_db: f64,
    pub z0: f64,
    /// Fractional even/odd phase-velocity difference `(v_e - v_o) / v`.
    pub velocity_mismatch: f64,
    /// Mean effective permittivity of the two modes.
    pub eps_eff: f64,
}

impl CouplerSpec {
    pub fn new(f0: f64, coupling_db: f64) -> Self {
        Self {
            f0,
            coupling_db,
            z0: DEFAULT_Z0,
            velocity_mismatch: 0.0,
            eps_eff: DEFAULT_EPS_EFF,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0 && self.f0.is_finite()) {
            return Err(Error::invalid(format!("design frequency {} must be positive", self.f0)));
        }
        if !(self.coupling_db > 0.0 && self.coupling_db.is_finite()) {
            return Err(Error::invalid(format!(
                "coupling {} dB must be positive; 0 dB would need total coupling",
                self.coupling_db
            )));
        }
        if !(self.z0 > 0.0 && self.z0.is_finite()) {
            return Err(Error::invalid(format!("system impedance {} must be positive", self.z0)));
        }
        if !(self.eps_eff >= 1.0 && self.eps_eff.is_finite()) {
            return Err(Error::invalid(format!("effective permittivity {} must be >= 1", self.eps_eff)));
        }
        if !(self.velocity_mismatch.abs() < 1.0) {
            return Err(Error::invalid(format!(
                "velocity mismatch {} must be a fraction below 1",
                self.velocity_mismatch
            )));
        }
        Ok(())
    }

    /// Voltage coupling factor `C = 10^(-dB/20)`.
    pub fn voltage_coupling(&self) -> f64 {
        10f64.powf(-self.coupling_db / 20.0)
    }
}

/// Even/odd line parameters, physical length and the assembled 4-port.
#[derive(Debug, Clone)]
pub struct CouplerDesign {
    pub params: CoupledLineParams,
    pub length: f64,
    pub network: Network,
}

pub fn synth_coupler(spec: &CouplerSpec, sweep: &FrequencySweep) -> Result<CouplerDesign> {
    spec.validate()?;
    let c = spec.voltage_coupling();
    let z0e = spec.z0 * ((1.0 + c) / (1.0 - c)).sqrt();
    let z0o = spec.z0 * ((1.0 - c) / (1.0 + c)).sqrt();
    let v = SPEED_OF_LIGHT / spec.eps_eff.sqrt();
    let d = spec.velocity_mismatch;
    let eps = |vm: f64| (SPEED_OF_LIGHT / vm).powi(2);
    let params = CoupledLineParams::new(z0e, z0o, eps(v * (1.0 + d / 2.0)), eps(v * (1.0 - d / 2.0)))?;
    let length = v / (4.0 * spec.f0);
    let network = coupled_line4p(&params, length, sweep, spec.z0)?;
    Ok(CouplerDesign { params, length, network })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridSpec {
    pub f0: f64,
    pub z0: f64,
    /// Arms joining input-through and isolated-coupled.
    pub through_z: f64,
    /// Arms joining input-isolated and through-coupled.
    pub branch_z: f64,
    /// Corner junction model; its `z0` must equal the system impedance.
    pub t_junction: TJunctionSpec,
    /// Arm electrical lengths at `f0` (degrees).
    pub through_deg: f64,
    pub branch_deg: f64,
}

impl HybridSpec {
    /// `z0/sqrt(2)` through arms and `z0` branch arms, all a quarter wave.
    pub fn new(f0: f64, z0: f64) -> Self {
        Self {
            f0,
            z0,
            through_z: z0 * FRAC_1_SQRT_2,
            branch_z: z0,
            t_junction: TJunctionSpec::ideal(z0),
            through_deg: 90.0,
            branch_deg: 90.0,
        }
    }

    pub fn with_c_shunt(mut self, c_shunt: f64) -> Self {
        self.t_junction.c_shunt = c_shunt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("design frequency", self.f0),
            ("system impedance", self.z0),
            ("through-arm impedance", self.through_z),
            ("branch-arm impedance", self.branch_z),
            ("through-arm length", self.through_deg),
            ("branch-arm length", self.branch_deg),
        ];
        for (what, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{what} {v} must be positive")));
            }
        }
        self.t_junction.validate()?;
        if self.t_junction.z0 != self.z0 {
            return Err(Error::invalid(format!(
                "junction reference {} ohm differs from system impedance {} ohm",
                self.t_junction.z0, self.z0
            )));
        }
        Ok(())
    }
}

fn relabel(net: Network, names: &[&str]) -> Result<Network> {
    net.with_labels(names.iter().copied())
}

fn join(a: &Network, la: &str, b: &Network, lb: &str) -> Result<Network> {
    let pa = a.port_index(la).ok_or_else(|| Error::invalid(format!("no port {la}")))?;
    let pb = b.port_index(lb).ok_or_else(|| Error::invalid(format!("no port {lb}")))?;
    innerconnect(a, pa, b, pb)
}

/// Branch-line hybrid built from four T-junctions, two through arms and two
/// branch arms. Corners A (input), B (through), C (coupled), D (isolated)
/// form the ring A-B-C-D with through arms A-B, D-C and branch arms A-D, B-C.
pub fn build_hybrid_8part(spec: &HybridSpec, sweep: &FrequencySweep) -> Result<Network> {
    spec.validate()?;
    let junction = tjunction3p(&spec.t_junction, sweep)?;
    let corner = |name: &str| {
        let (a, b) = (format!("{name}.a"), format!("{name}.b"));
        relabel(junction.clone(), &[name, &a, &b])
    };
    let arm = |name: &str, z: f64, deg: f64| -> Result<Network> {
        let line = line2p_electrical(z, ElectricalLength::from_degrees(deg, spec.f0), sweep, spec.z0)?;
        relabel(line, &[&format!("{name}.1"), &format!("{name}.2")])
    };
    let t1 = arm("T1", spec.through_z, spec.through_deg)?;
    let t2 = arm("T2", spec.through_z, spec.through_deg)?;
    let b1 = arm("B1", spec.branch_z, spec.branch_deg)?;
    let b2 = arm("B2", spec.branch_z, spec.branch_deg)?;

    let mut n = join(&corner("A")?, "A.a", &t1, "T1.1")?;
    n = join(&n, "T1.2", &corner("B")?, "B.a")?;
    n = join(&n, "B.b", &b2, "B2.1")?;
    n = join(&n, "B2.2", &corner("C")?, "C.a")?;
    n = join(&n, "C.b", &t2, "T2.2")?;
    n = join(&n, "T2.1", &corner("D")?, "D.a")?;
    n = join(&n, "D.b", &b1, "B1.2")?;
    let (p, q) = (n.port_index("B1.1").unwrap(), n.port_index("A.b").unwrap());
    n = self_connect(&n, p, q)?;
    relabel(n.reorder_by_labels(&["A", "B", "C", "D"])?, &FOUR_PORT_ROLES)
}

/// Frequency of minimum `|S41|` within `[0.5 f0, 1.5 f0]`: a 401-point grid
/// scan refined by golden-section search to about 1 kHz.
pub fn hybrid_center_frequency(spec: &HybridSpec) -> Result<f64> {
    spec.validate()?;
    let (lo, hi) = (0.5 * spec.f0, 1.5 * spec.f0);
    let n = 401;
    let grid = crate::netcore::make_sweep(lo, hi, n)?;
    let net = build_hybrid_8part(spec, &grid)?;
    let iso = |k: usize| net.entry(k, 3, 0).norm();
    let mut best = 0;
    for k in 1..n {
        if iso(k) < iso(best) {
            best = k;
        }
    }
    let f = grid.points();
    let (mut a, mut b) = (f[best.saturating_sub(1)], f[(best + 1).min(n - 1)]);
    let eval = |freq: f64| -> Result<f64> {
        let net = build_hybrid_8part(spec, &FrequencySweep::single(freq)?)?;
        Ok(net.entry(0, 3, 0).norm())
    };
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (eval(x1)?, eval(x2)?);
    while b - a > 1e3 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = eval(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = eval(x2)?;
        }
    }
    let mid = 0.5 * (a + b);
    // Keep the grid point if refinement wandered onto a worse value.
    if eval(mid)? <= iso(best) {
        Ok(mid)
    } else {
        Ok(f[best])
    }
}

/// Downward shift of the hybrid centre frequency from `f0`.
pub fn center_shift(spec: &HybridSpec) -> Result<f64> {
    Ok(spec.f0 - hybrid_center_frequency(spec)?)
}

/// Upper end of the junction capacitance searched by [`fit_tjunction_shift`].
pub const MAX_JUNCTION_CAPACITANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TJunctionFit {
    pub c_shunt: f64,
    pub achieved_shift: f64,
    pub iterations: usize,
}

/// Bisects the junction shunt capacitance so the centre frequency falls
/// `target_shift` Hz below `spec.f0`, to within 1 MHz.
pub fn fit_tjunction_shift(target_shift: f64, spec: &HybridSpec) -> Result<TJunctionFit> {
    spec.validate()?;
    if !(target_shift >= 0.0 && target_shift < spec.f0 / 2.0) {
        return Err(Error::invalid(format!(
            "target shift {target_shift} Hz must lie in [0, f0/2)"
        )));
    }
    let tol = 1e6;
    let shift_at = |c: f64| center_shift(&spec.with_c_shunt(c));
    if target_shift == 0.0 {
        return Ok(TJunctionFit {
            c_shunt: 0.0,
            achieved_shift: shift_at(0.0)?,
            iterations: 0,
        });
    }
    let (mut lo, mut hi) = (0.0, MAX_JUNCTION_CAPACITANCE);
    let top = shift_at(hi)?;
    if top < target_shift - tol {
        return Err(Error::NoSolution(format!(
            "a {target_shift} Hz shift needs more than {MAX_JUNCTION_CAPACITANCE} F (reached {top} Hz)"
        )));
    }
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let s = shift_at(mid)?;
        // Aim well inside the tolerance so re-evaluation stays within it.
        if (s - target_shift).abs() < 0.1 * tol || iterations >= 200 {
            return Ok(TJunctionFit {
                c_shunt: mid,
                achieved_shift: s,
                iterations,
            });
        }
        if s < target_shift {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Tunable hybrid quantities for [`hybrid_builder`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HybridParam {
    ThroughZ,
    BranchZ,
    ThroughDeg,
    BranchDeg,
    CShunt,
}

impl HybridParam {
    pub fn get(&self, s: &HybridSpec) -> f64 {
        match self {
            HybridParam::ThroughZ => s.through_z,
            HybridParam::BranchZ => s.branch_z,
            HybridParam::ThroughDeg => s.through_deg,
            HybridParam::BranchDeg => s.branch_deg,
            HybridParam::CShunt => s.t_junction.c_shunt,
        }
    }

    pub fn set(&self, s: &mut HybridSpec, v: f64) {
        match self {
            HybridParam::ThroughZ => s.through_z = v,
            HybridParam::BranchZ => s.branch_z = v,
            HybridParam::ThroughDeg => s.through_deg = v,
            HybridParam::BranchDeg => s.branch_deg = v,
            HybridParam::CShunt => s.t_junction.c_shunt = v,
        }
    }
}

/// Maps a parameter vector onto `base` and assembles the hybrid.
pub fn hybrid_builder<'a>(
    base: HybridSpec,
    vary: &'a [HybridParam],
    sweep: &'a FrequencySweep,
) -> impl Fn(&[f64]) -> Result<Network> + Sync + 'a {
    move |x: &[f64]| {
        let mut s = base;
        for (p, v) in vary.iter().zip(x) {
            p.set(&mut s, *v);
        }
        build_hybrid_8part(&s, sweep)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignOutcome {
    pub params: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
}

/// Spec-violation cost of one candidate: sum of squared hinge violations
/// over the band. Failed builds cost +inf.
pub fn design_cost<B>(builder: &B, spec: &DesignSpec, x: &[f64]) -> f64
where
    B: Fn(&[f64]) -> Result<Network>,
{
    builder(x)
        .and_then(|net| compute_metrics(&net, spec.input_port))
        .and_then(|rep| hinge_cost(&rep, spec))
        .unwrap_or(f64::INFINITY)
}

/// Simplex search for parameters meeting `spec`. Initial simplex offsets
/// are 5% of each parameter (0.05 for zeros) unless `steps` is given.
pub fn optimize_design<B>(
    initial: &[f64],
    spec: &DesignSpec,
    builder: B,
    steps: Option<&[f64]>,
    opts: &NelderMeadOptions,
) -> Result<DesignOutcome>
where
    B: Fn(&[f64]) -> Result<Network> + Sync,
{
    spec.validate()?;
    // Surfaces builder and band errors instead of hiding them as +inf.
    let net = builder(initial)?;
    hinge_cost(&compute_metrics(&net, spec.input_port)?, spec)?;
    let default_steps: Vec<f64> = initial
        .iter()
        .map(|v| if *v == 0.0 { 0.05 } else { 0.05 * v })
        .collect();
    let steps = steps.unwrap_or(&default_steps);
    let r = nelder_mead(|x| design_cost(&builder, spec, x), initial, steps, opts)?;
    Ok(DesignOutcome {
        params: r.x,
        cost: r.cost,
        iterations: r.iterations,
        converged: r.converged,
        history: r.history,
    })
}
