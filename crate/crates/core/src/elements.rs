//! Closed-form S-parameter models of the primitive elements.
//!
//! Every element is renormalised analytically to the caller's reference
//! impedance, so assembled networks never mix references.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::cpw::{CoupledLineParams, LineParams};
use crate::netcore::{CMatrix, Diagnostic, FrequencySweep, Network, C64};
use crate::{Error, Result, SPEED_OF_LIGHT};

const ONE: C64 = C64::new(1.0, 0.0);

/// Port labels of four-port devices, in input/through/coupled/isolated order.
pub const FOUR_PORT_ROLES: [&str; 4] = ["input", "through", "coupled", "isolated"];

fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Phase accumulated along a line: `theta(f) = 2 pi f sqrt(eps_eff) l / c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectricalLength {
    rad_per_hz: f64,
}

impl ElectricalLength {
    pub fn new(eps_eff: f64, length: f64) -> Self {
        Self {
            rad_per_hz: 2.0 * PI * eps_eff.sqrt() * length / SPEED_OF_LIGHT,
        }
    }

    /// A line that is `degrees` long at `f_ref`.
    pub fn from_degrees(degrees: f64, f_ref: f64) -> Self {
        Self {
            rad_per_hz: degrees.to_radians() / f_ref,
        }
    }

    pub fn at(&self, freq_hz: f64) -> f64 {
        self.rad_per_hz * freq_hz
    }

    pub fn degrees_at(&self, freq_hz: f64) -> f64 {
        self.at(freq_hz).to_degrees()
    }
}

/// S-matrix of a uniform line of impedance `z` and complex electrical length
/// `gl = gamma * length`, seen from reference `r`.
pub(crate) fn line_matrix(z: f64, gl: C64, r: f64) -> CMatrix {
    let (sh, ch) = (gl.sinh(), gl.cosh());
    let den = 2.0 * z * r * ch + (z * z + r * r) * sh;
    let s11 = (z * z - r * r) * sh / den;
    let s21 = 2.0 * z * r / den;
    CMatrix::from_row_slice(2, 2, &[s11, s21, s21, s11])
}

/// S-matrix of a 2-port ABCD matrix in reference `r`.
fn abcd_to_s(a: C64, b: C64, c: C64, d: C64, r: f64) -> [C64; 4] {
    let den = a + b / r + c * r + d;
    [
        (a + b / r - c * r - d) / den,
        2.0 * (a * d - b * c) / den,
        2.0 / den,
        (-a + b / r - c * r + d) / den,
    ]
}

fn check_length(length: f64) -> Result<()> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::invalid(format!("line length {length} must be positive")));
    }
    Ok(())
}

/// Transmission line of impedance `lp.z0` and physical `length`.
pub fn line2p(lp: &LineParams, length: f64, sweep: &FrequencySweep, z_ref: f64) -> Result<Network> {
    check_length(length)?;
    let lp = *lp;
    Network::from_fn(sweep, z_ref, labels(&["1", "2"]), move |f| {
        line_matrix(lp.z0, lp.gamma(f) * length, z_ref)
    })
}

/// Lossless line described by its electrical length rather than its length.
pub fn line2p_electrical(z0: f64, theta: ElectricalLength, sweep: &FrequencySweep, z_ref: f64) -> Result<Network> {
    if !(z0 > 0.0) {
        return Err(Error::invalid(format!("line impedance {z0} must be positive")));
    }
    Network::from_fn(sweep, z_ref, labels(&["1", "2"]), move |f| {
        line_matrix(z0, C64::new(0.0, theta.at(f)), z_ref)
    })
}

/// Symmetric coupled-line section by even/odd-mode superposition.
///
/// Port order: 1 input (line A, near end), 2 through (line A, far end),
/// 3 coupled (line B, near end), 4 isolated (line B, far end).
pub fn coupled_line4p(clp: &CoupledLineParams, length: f64, sweep: &FrequencySweep, z_ref: f64) -> Result<Network> {
    check_length(length)?;
    let (even, odd) = (clp.even(), clp.odd());
    Network::from_fn(sweep, z_ref, labels(&FOUR_PORT_ROLES), move |f| {
        let se = line_matrix(even.z0, even.gamma(f) * length, z_ref);
        let so = line_matrix(odd.z0, odd.gamma(f) * length, z_ref);
        let (e11, e21) = (se[(0, 0)], se[(1, 0)]);
        let (o11, o21) = (so[(0, 0)], so[(1, 0)]);
        let (r_same, t_same) = ((e11 + o11) / 2.0, (e21 + o21) / 2.0);
        let (r_cross, t_cross) = ((e11 - o11) / 2.0, (e21 - o21) / 2.0);
        CMatrix::from_row_slice(
            4,
            4,
            &[
                r_same, t_same, r_cross, t_cross, //
                t_same, r_same, t_cross, r_cross, //
                r_cross, t_cross, r_same, t_same, //
                t_cross, r_cross, t_same, r_same,
            ],
        )
    })
}

/// Three-way shunt node with an optional parasitic capacitance to ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TJunctionSpec {
    /// Port reference impedance (ohm).
    pub z0: f64,
    /// Shunt capacitance at the node (F).
    pub c_shunt: f64,
}

impl TJunctionSpec {
    pub fn ideal(z0: f64) -> Self {
        Self { z0, c_shunt: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.z0 > 0.0 && self.z0.is_finite()) {
            return Err(Error::invalid(format!("junction impedance {} must be positive", self.z0)));
        }
        if !(self.c_shunt >= 0.0 && self.c_shunt.is_finite()) {
            return Err(Error::invalid(format!("junction capacitance {} must be >= 0", self.c_shunt)));
        }
        Ok(())
    }
}

/// `S = 2 / (N + Y z0) * J - I` for `N` ports meeting at a node with shunt
/// admittance `Y`.
pub fn tjunction3p(spec: &TJunctionSpec, sweep: &FrequencySweep) -> Result<Network> {
    spec.validate()?;
    let spec = *spec;
    Network::from_fn(sweep, spec.z0, labels(&["1", "2", "3"]), move |f| {
        let y = C64::new(0.0, 2.0 * PI * f * spec.c_shunt);
        let t = 2.0 / (3.0 + y * spec.z0);
        CMatrix::from_fn(3, 3, |i, j| if i == j { t - ONE } else { t })
    })
}

/// Constant-reflection one-port standards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OnePortKind {
    Short,
    Open,
    Load(C64),
}

impl OnePortKind {
    pub fn gamma(&self) -> C64 {
        match self {
            OnePortKind::Short => C64::new(-1.0, 0.0),
            OnePortKind::Open => ONE,
            OnePortKind::Load(g) => *g,
        }
    }
}

pub fn oneport(kind: OnePortKind, sweep: &FrequencySweep, z_ref: f64) -> Result<Network> {
    let g = kind.gamma();
    if !g.is_finite() {
        return Err(Error::invalid("one-port reflection must be finite"));
    }
    Network::from_fn(sweep, z_ref, labels(&["1"]), move |_| CMatrix::from_element(1, 1, g))
}

/// Closed-form branch-line hybrid description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchlineParams {
    pub f0: f64,
    /// Impedance of the arms joining input-through and isolated-coupled.
    pub through_z: f64,
    /// Impedance of the arms joining input-isolated and through-coupled.
    pub branch_z: f64,
    /// Electrical lengths at `f0` (degrees).
    pub through_deg: f64,
    pub branch_deg: f64,
    /// Shunt capacitance at each corner node (F).
    pub c_shunt: f64,
}

impl BranchlineParams {
    pub fn textbook(f0: f64, z0: f64) -> Self {
        Self {
            f0,
            through_z: z0 * FRAC_1_SQRT_2,
            branch_z: z0,
            through_deg: 90.0,
            branch_deg: 90.0,
            c_shunt: 0.0,
        }
    }
}

/// Branch-line hybrid by even/odd-mode analysis about the plane bisecting
/// the two branch arms.
///
/// Each mode reduces to stub - through arm - stub, with the half-branch
/// stubs open (even) or shorted (odd). Port labels follow
/// input/through/coupled/isolated; input and isolated share a branch arm.
pub fn branchline_closed_form(p: &BranchlineParams, sweep: &FrequencySweep, z_ref: f64) -> Result<Network> {
    if !(p.f0 > 0.0 && p.through_z > 0.0 && p.branch_z > 0.0) {
        return Err(Error::invalid("branch-line frequency and impedances must be positive"));
    }
    let p = *p;
    let mut net = Network::from_fn(sweep, z_ref, labels(&FOUR_PORT_ROLES), move |f| {
        let th_t = (p.through_deg * f / p.f0).to_radians();
        let half_b = 0.5 * (p.branch_deg * f / p.f0).to_radians();
        let y_node = C64::new(0.0, 2.0 * PI * f * p.c_shunt);
        let (a_t, b_t) = (C64::new(th_t.cos(), 0.0), C64::new(0.0, p.through_z * th_t.sin()));
        let c_t = C64::new(0.0, th_t.sin() / p.through_z);
        let mode = |y_stub: C64| {
            let y = y_stub + y_node;
            // [[1,0],[y,1]] [[a,b],[c,a]] [[1,0],[y,1]]
            let a = a_t + b_t * y;
            let d = a_t + b_t * y;
            let c = c_t + 2.0 * a_t * y + b_t * y * y;
            abcd_to_s(a, b_t, c, d, z_ref)
        };
        let even = mode(C64::new(0.0, half_b.tan() / p.branch_z));
        let odd = mode(C64::new(0.0, -1.0 / (half_b.tan() * p.branch_z)));
        let (e11, e21) = (even[0], even[2]);
        let (o11, o21) = (odd[0], odd[2]);
        let (r, t) = ((e11 + o11) / 2.0, (e21 + o21) / 2.0);
        let (iso, cpl) = ((e11 - o11) / 2.0, (e21 - o21) / 2.0);
        // Ports: 0 input, 1 through, 2 coupled, 3 isolated.
        CMatrix::from_row_slice(
            4,
            4,
            &[
                r, t, cpl, iso, //
                t, r, iso, cpl, //
                cpl, iso, r, t, //
                iso, cpl, t, r,
            ],
        )
    })?;
    if p.f0 < sweep.start() || p.f0 > sweep.stop() {
        net.push_diagnostic(Diagnostic::Warning(format!(
            "design frequency {} Hz lies outside the sweep {}..{} Hz",
            p.f0,
            sweep.start(),
            sweep.stop()
        )));
    }
    Ok(net)
}

/// Textbook hybrid: `z0/sqrt(2)` through arms, `z0` branch arms, all a
/// quarter wave at `f0`.
pub fn ideal_branchline(f0: f64, z0: f64, sweep: &FrequencySweep) -> Result<Network> {
    branchline_closed_form(&BranchlineParams::textbook(f0, z0), sweep, z0)
}
