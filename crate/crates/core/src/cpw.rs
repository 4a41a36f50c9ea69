//! Quasi-static coplanar-waveguide models.
//!
//! All formulas assume zero-thickness perfect conductors on an infinitely
//! thick substrate, so the effective permittivity of every mode is
//! `(eps_r + 1) / 2` and only the ratio `K(k)/K(k')` of complete elliptic
//! integrals depends on the lateral geometry.
//!
//! Capacitances come from one half-plane kernel: with conductors on the
//! real axis at `(-inf, x1]`, `[x2, x3]` and `[x4, inf)`, the capacitance per
//! unit length between the middle strip and the outer conductors (upper
//! half-space, vacuum) is `eps0 * K(k)/K(k')` with
//! `k^2 = (x3 - x2)(x4 - x1) / ((x4 - x2)(x3 - x1))`.

use std::f64::consts::PI;

use crate::netcore::C64;
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Substrate permittivity of high-resistivity silicon.
pub const SILICON_EPS_R: f64 = 11.9;

/// Lateral extent above which the infinitely-thick-substrate assumption is
/// questionable for a typical 500 um wafer.
pub const SUBSTRATE_EXTENT_LIMIT: f64 = 500e-6;

fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        if (a - b).abs() <= f64::EPSILON * a.abs() {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    0.5 * (a + b)
}

/// Complete elliptic integral of the first kind, `K(k)` with modulus `k`.
pub fn ellipk(k: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::invalid(format!("elliptic modulus {k} outside [0, 1)")));
    }
    let kp = ((1.0 - k) * (1.0 + k)).sqrt();
    Ok(PI / (2.0 * agm(1.0, kp)))
}

/// `K(k)/K(k')` from the squared modulus and its complement.
///
/// Taking both squares separately keeps precision when `k` is close to 1.
fn ratio_from_squares(k2: f64, kp2: f64) -> f64 {
    // K(k) = pi / (2 agm(1, k')), K(k') = pi / (2 agm(1, k))
    agm(1.0, k2.sqrt()) / agm(1.0, kp2.sqrt())
}

/// `K(k)/K(k')` with `k' = sqrt(1 - k^2)`, via the arithmetic-geometric mean.
pub fn ellipk_ratio(k: f64) -> Result<f64> {
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::invalid(format!("modulus {k} outside (0, 1)")));
    }
    Ok(ratio_from_squares(k * k, (1.0 - k) * (1.0 + k)))
}

/// `K(k)/K(k')` for the strip `[x2, x3]` against outer conductors
/// `(-inf, x1] U [x4, inf)`. `x1 = -inf` is allowed.
fn half_plane_ratio(x1: f64, x2: f64, x3: f64, x4: f64) -> f64 {
    let (k2, kp2) = if x1 == f64::NEG_INFINITY {
        ((x3 - x2) / (x4 - x2), (x4 - x3) / (x4 - x2))
    } else {
        let den = (x4 - x2) * (x3 - x1);
        ((x3 - x2) * (x4 - x1) / den, (x2 - x1) * (x4 - x3) / den)
    };
    ratio_from_squares(k2, kp2)
}

fn quasi_static_eps_eff(eps_r: f64) -> f64 {
    (eps_r + 1.0) / 2.0
}

/// Impedance of a strip whose total capacitance per unit length in vacuum is
/// `n * eps0 * ratio` (`n` counts half-spaces times symmetric halves).
fn impedance_from_ratio(ratio: f64, eps_eff: f64, halves: f64) -> f64 {
    // Z = 1 / (c * C_air * sqrt(eps_eff)), C_air = halves * eps0 * ratio,
    // and 1 / (c * eps0) = 120 pi.
    120.0 * PI / (halves * ratio * eps_eff.sqrt())
}

/// Cross-section of a single CPW: centre strip between two equal gaps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpwGeometry {
    /// Centre-conductor width (m).
    pub width: f64,
    /// Gap from the centre conductor to each ground plane (m).
    pub gap: f64,
    pub eps_r: f64,
}

impl CpwGeometry {
    pub fn new(width: f64, gap: f64, eps_r: f64) -> Result<Self> {
        let g = Self { width, gap, eps_r };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.gap > 0.0 && self.width.is_finite() && self.gap.is_finite()) {
            return Err(Error::invalid(format!(
                "CPW width {} and gap {} must be positive",
                self.width, self.gap
            )));
        }
        if !(self.eps_r >= 1.0 && self.eps_r.is_finite()) {
            return Err(Error::invalid(format!("eps_r {} must be >= 1", self.eps_r)));
        }
        Ok(())
    }

    /// `k = w / (w + 2g)`.
    pub fn modulus(&self) -> f64 {
        self.width / (self.width + 2.0 * self.gap)
    }
}

/// Electrical description of a single TEM-like line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineParams {
    /// Characteristic impedance (ohm).
    pub z0: f64,
    pub eps_eff: f64,
    /// Attenuation (Np/m).
    pub alpha: f64,
}

impl LineParams {
    pub fn new(z0: f64, eps_eff: f64) -> Result<Self> {
        Self::lossy(z0, eps_eff, 0.0)
    }

    pub fn lossy(z0: f64, eps_eff: f64, alpha: f64) -> Result<Self> {
        if !(z0 > 0.0 && z0.is_finite()) {
            return Err(Error::invalid(format!("line impedance {z0} must be positive")));
        }
        if !(eps_eff >= 1.0 && eps_eff.is_finite()) {
            return Err(Error::invalid(format!("eps_eff {eps_eff} must be >= 1")));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("attenuation {alpha} must be >= 0")));
        }
        Ok(Self { z0, eps_eff, alpha })
    }

    /// Propagation constant `alpha + j 2 pi f sqrt(eps_eff) / c` (1/m).
    pub fn gamma(&self, freq_hz: f64) -> C64 {
        C64::new(self.alpha, self.beta(freq_hz))
    }

    /// Phase constant (rad/m).
    pub fn beta(&self, freq_hz: f64) -> f64 {
        2.0 * PI * freq_hz * self.eps_eff.sqrt() / SPEED_OF_LIGHT
    }

    pub fn phase_velocity(&self) -> f64 {
        SPEED_OF_LIGHT / self.eps_eff.sqrt()
    }
}

/// Even/odd-mode description of a symmetric coupled pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledLineParams {
    pub z0e: f64,
    pub z0o: f64,
    pub eps_e: f64,
    pub eps_o: f64,
}

impl CoupledLineParams {
    /// Direct specification. `z0e == z0o` describes two uncoupled lines.
    pub fn new(z0e: f64, z0o: f64, eps_e: f64, eps_o: f64) -> Result<Self> {
        if !(z0o > 0.0 && z0e >= z0o && z0e.is_finite()) {
            return Err(Error::invalid(format!(
                "mode impedances must satisfy z0e >= z0o > 0 (z0e = {z0e}, z0o = {z0o})"
            )));
        }
        if !(eps_e >= 1.0 && eps_o >= 1.0 && eps_e.is_finite() && eps_o.is_finite()) {
            return Err(Error::invalid(format!(
                "mode permittivities must be >= 1 (eps_e = {eps_e}, eps_o = {eps_o})"
            )));
        }
        Ok(Self { z0e, z0o, eps_e, eps_o })
    }

    /// Voltage coupling coefficient `(z0e - z0o) / (z0e + z0o)`.
    pub fn coupling(&self) -> f64 {
        (self.z0e - self.z0o) / (self.z0e + self.z0o)
    }

    /// `sqrt(z0e * z0o)`, the impedance the coupler is matched to.
    pub fn match_impedance(&self) -> f64 {
        (self.z0e * self.z0o).sqrt()
    }

    /// `|v_e - v_o| / v_e`.
    pub fn velocity_mismatch(&self) -> f64 {
        (self.eps_e.sqrt() - self.eps_o.sqrt()).abs() / self.eps_o.sqrt()
    }

    pub fn even(&self) -> LineParams {
        LineParams { z0: self.z0e, eps_eff: self.eps_e, alpha: 0.0 }
    }

    pub fn odd(&self) -> LineParams {
        LineParams { z0: self.z0o, eps_eff: self.eps_o, alpha: 0.0 }
    }
}

/// Edge-coupled CPW: two strips side by side with no ground between them,
/// each with a slot to its outer ground plane.
///
/// ```text
///  ground | slot | strip | separation | strip | slot | ground
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledCpwGeometry {
    /// Width of each strip (m).
    pub strip: f64,
    /// Outer slot between each strip and its ground plane (m).
    pub slot: f64,
    /// Edge-to-edge spacing between the two strips (m).
    pub separation: f64,
    pub eps_r: f64,
}

impl CoupledCpwGeometry {
    pub fn new(strip: f64, slot: f64, separation: f64, eps_r: f64) -> Result<Self> {
        let g = Self { strip, slot, separation, eps_r };
        g.validate()?;
        Ok(g)
    }

    /// The fabricated 20 dB coupler: S = 65 um strips, W = 15 um slots,
    /// D = 200 um between the strips, on silicon.
    pub fn fabricated_coupler() -> Self {
        Self {
            strip: 65e-6,
            slot: 15e-6,
            separation: 200e-6,
            eps_r: SILICON_EPS_R,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.strip, self.slot, self.separation];
        if dims.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::invalid(format!(
                "coupled CPW dimensions must be positive (strip {}, slot {}, separation {})",
                self.strip, self.slot, self.separation
            )));
        }
        if !(self.eps_r >= 1.0 && self.eps_r.is_finite()) {
            return Err(Error::invalid(format!("eps_r {} must be >= 1", self.eps_r)));
        }
        Ok(())
    }

    pub fn lateral_extent(&self) -> f64 {
        2.0 * (self.strip + self.slot) + self.separation
    }
}

/// Conditions under which the coupled-line closed forms lose accuracy.
#[derive(Debug, Clone, PartialEq)]
pub enum GeometryWarning {
    /// The cross-section is wide compared with a typical wafer thickness.
    ThickSubstrateAssumption { extent: f64 },
    /// Dimensions differ by more than three orders of magnitude.
    ExtremeAspectRatio { ratio: f64 },
    /// Coupling this tight makes zero-thickness fringing errors significant.
    TightCoupling { coupling: f64 },
}

/// Impedance and permittivity of a single CPW.
pub fn cpw_params(geom: &CpwGeometry) -> Result<LineParams> {
    geom.validate()?;
    let eps_eff = quasi_static_eps_eff(geom.eps_r);
    let k = geom.modulus();
    // Full strip sees ground on both sides: C_air = 4 eps0 K(k)/K(k').
    let z0 = impedance_from_ratio(ellipk_ratio(k)?, eps_eff, 4.0);
    LineParams::new(z0, eps_eff)
}

/// A strip of width `strip` with a ground plane on one side only, at
/// distance `slot`. This is each line of an edge-coupled pair in the limit
/// of infinite separation.
pub fn single_sided_cpw_params(strip: f64, slot: f64, eps_r: f64) -> Result<LineParams> {
    CoupledCpwGeometry::new(strip, slot, 1.0, eps_r)?;
    let eps_eff = quasi_static_eps_eff(eps_r);
    let ratio = half_plane_ratio(f64::NEG_INFINITY, 0.0, strip, strip + slot);
    LineParams::new(impedance_from_ratio(ratio, eps_eff, 2.0), eps_eff)
}

/// Even/odd-mode parameters of an edge-coupled CPW pair.
///
/// The symmetry plane between the strips is an electric wall (odd mode)
/// or a magnetic wall (even mode); the map `z -> z^2` folds each half onto
/// a half-plane problem solved by the kernel in the module docs.
pub fn coupled_cpw_params(geom: &CoupledCpwGeometry) -> Result<(CoupledLineParams, Vec<GeometryWarning>)> {
    geom.validate()?;
    let eps_eff = quasi_static_eps_eff(geom.eps_r);
    let a = geom.separation / 2.0;
    let b = a + geom.strip;
    let c = b + geom.slot;
    let (a2, b2, c2) = (a * a, b * b, c * c);

    // Odd: the wall folds onto (-inf, 0] and acts as ground.
    let odd_ratio = half_plane_ratio(0.0, a2, b2, c2);
    // Even: the wall and the inner gap merge into one magnetic boundary.
    let even_ratio = half_plane_ratio(f64::NEG_INFINITY, a2, b2, c2);

    let z0o = impedance_from_ratio(odd_ratio, eps_eff, 2.0);
    let z0e = impedance_from_ratio(even_ratio, eps_eff, 2.0);
    let params = CoupledLineParams::new(z0e, z0o, eps_eff, eps_eff)?;

    let mut warnings = Vec::new();
    if geom.lateral_extent() > SUBSTRATE_EXTENT_LIMIT {
        warnings.push(GeometryWarning::ThickSubstrateAssumption {
            extent: geom.lateral_extent(),
        });
    }
    let dims = [geom.strip, geom.slot, geom.separation];
    let (lo, hi) = dims
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(*d), hi.max(*d)));
    if hi / lo > 1e3 {
        warnings.push(GeometryWarning::ExtremeAspectRatio { ratio: hi / lo });
    }
    if params.coupling() > 0.5 {
        warnings.push(GeometryWarning::TightCoupling {
            coupling: params.coupling(),
        });
    }
    Ok((params, warnings))
}

/// Physical length of a quarter wavelength at `f0` (m).
pub fn quarter_wave_length(lp: &LineParams, f0: f64) -> Result<f64> {
    if !(f0 > 0.0 && f0.is_finite()) {
        return Err(Error::invalid(format!("design frequency {f0} must be positive")));
    }
    Ok(SPEED_OF_LIGHT / (4.0 * f0 * lp.eps_eff.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Adaptive Simpson quadrature, independent of the AGM path.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            let m = 0.5 * (a + b);
            (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
        }
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (l, r) = (simpson(f, a, m), simpson(f, m, b));
            if depth == 0 || (l + r - whole).abs() <= 15.0 * tol {
                return l + r + (l + r - whole) / 15.0;
            }
            rec(f, a, m, l, tol / 2.0, depth - 1) + rec(f, m, b, r, tol / 2.0, depth - 1)
        }
        rec(f, a, b, simpson(f, a, b), tol, 50)
    }

    fn k_by_quadrature(k: f64) -> f64 {
        let f = move |t: f64| 1.0 / (1.0 - k * k * t.sin().powi(2)).sqrt();
        adaptive_simpson(&f, 0.0, PI / 2.0, 1e-14)
    }

    #[test]
    fn ratio_is_one_at_symmetric_modulus() {
        assert_eq!(ellipk_ratio(std::f64::consts::FRAC_1_SQRT_2).unwrap(), 1.0);
    }

    #[test]
    fn ratio_matches_quadrature_at_half() {
        let k = 0.5f64;
        let kp = (1.0 - k * k).sqrt();
        let oracle = k_by_quadrature(k) / k_by_quadrature(kp);
        assert!((ellipk_ratio(k).unwrap() - oracle).abs() < 1e-10);
        assert!((ellipk(k).unwrap() - k_by_quadrature(k)).abs() < 1e-12);
    }

    #[test]
    fn small_modulus_asymptote() {
        // K(k) -> pi/2 and K(k') -> ln(4/k) as k -> 0.
        let k = 1e-3f64;
        let asym = PI / (2.0 * (4.0 / k).ln());
        let r = ellipk_ratio(k).unwrap();
        assert!(((r - asym) / asym).abs() < 1e-3);
    }

    #[test]
    fn ratio_rejects_out_of_range() {
        for k in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(ellipk_ratio(k).is_err(), "k = {k}");
        }
    }

    #[test]
    fn ratio_reciprocal_symmetry() {
        for k in [1e-6, 0.01, 0.2, 0.5, 0.9, 0.999_999] {
            let (k2, kp2) = (k * k, (1.0 - k) * (1.0f64 + k));
            let prod = ratio_from_squares(k2, kp2) * ratio_from_squares(kp2, k2);
            assert!((prod - 1.0).abs() < 1e-12, "k = {k}: {prod}");
        }
    }

    #[test]
    fn air_cpw_at_symmetric_modulus() {
        // k = 1/sqrt(2): w/(w+2g) = 1/sqrt(2)
        let w = 1.0;
        let g = (w * std::f64::consts::SQRT_2 - w) / 2.0;
        let lp = cpw_params(&CpwGeometry::new(w, g, 1.0).unwrap()).unwrap();
        assert!((lp.z0 - 30.0 * PI).abs() < 1e-10);
        assert_eq!(lp.eps_eff, 1.0);
    }

    #[test]
    fn half_plane_kernel_reproduces_cpw() {
        let geom = CpwGeometry::new(14e-6, 8e-6, SILICON_EPS_R).unwrap();
        let direct = cpw_params(&geom).unwrap().z0;
        let h = geom.width / 2.0;
        let kernel = half_plane_ratio(-(h + geom.gap), -h, h, h + geom.gap);
        let via_kernel = impedance_from_ratio(kernel, quasi_static_eps_eff(SILICON_EPS_R), 2.0);
        assert!((direct - via_kernel).abs() < 1e-10);
    }

    #[test]
    fn impedance_decreases_with_modulus() {
        let mut last = f64::INFINITY;
        for i in 1..200 {
            let w = i as f64 * 1e-6;
            let z = cpw_params(&CpwGeometry::new(w, 20e-6, SILICON_EPS_R).unwrap()).unwrap().z0;
            assert!(z < last);
            last = z;
        }
    }

    #[test]
    fn eps_eff_ignores_lateral_geometry() {
        let a = cpw_params(&CpwGeometry::new(3e-6, 50e-6, 11.9).unwrap()).unwrap();
        let b = cpw_params(&CpwGeometry::new(300e-6, 2e-6, 11.9).unwrap()).unwrap();
        assert_eq!(a.eps_eff, 6.45);
        assert_eq!(b.eps_eff, 6.45);
    }

    #[test]
    fn invalid_geometries() {
        assert!(CpwGeometry::new(0.0, 1e-6, 11.9).is_err());
        assert!(CpwGeometry::new(1e-6, -1e-6, 11.9).is_err());
        assert!(CpwGeometry::new(1e-6, 1e-6, 0.5).is_err());
        assert!(CoupledCpwGeometry::new(1e-6, 1e-6, 0.0, 11.9).is_err());
        assert!(CoupledLineParams::new(40.0, 50.0, 6.45, 6.45).is_err());
    }

    #[test]
    fn decoupled_limit() {
        let single = single_sided_cpw_params(65e-6, 15e-6, SILICON_EPS_R).unwrap();
        let geom = CoupledCpwGeometry::new(65e-6, 15e-6, 1.0, SILICON_EPS_R).unwrap();
        let (p, _) = coupled_cpw_params(&geom).unwrap();
        assert!((p.z0e - single.z0).abs() / single.z0 < 0.01);
        assert!((p.z0o - single.z0).abs() / single.z0 < 0.01);
        assert!(p.coupling() < 1e-3);
    }

    #[test]
    fn coupling_grows_as_strips_approach() {
        let mut last = 0.0;
        for sep in [400e-6, 200e-6, 100e-6, 50e-6, 20e-6] {
            let (p, _) = coupled_cpw_params(&CoupledCpwGeometry::new(65e-6, 15e-6, sep, 11.9).unwrap()).unwrap();
            assert!(p.coupling() > last);
            last = p.coupling();
        }
    }

    #[test]
    fn warnings_for_questionable_geometry() {
        let (_, w) = coupled_cpw_params(&CoupledCpwGeometry::new(300e-6, 15e-6, 200e-6, 11.9).unwrap()).unwrap();
        assert!(w.iter().any(|w| matches!(w, GeometryWarning::ThickSubstrateAssumption { .. })));
        let (_, w) = coupled_cpw_params(&CoupledCpwGeometry::new(65e-6, 15e-6, 1e-9, 11.9).unwrap()).unwrap();
        assert!(w.iter().any(|w| matches!(w, GeometryWarning::ExtremeAspectRatio { .. })));
        assert!(w.iter().any(|w| matches!(w, GeometryWarning::TightCoupling { .. })));
        let (_, w) = coupled_cpw_params(&CoupledCpwGeometry::fabricated_coupler()).unwrap();
        assert!(w.is_empty());
    }

    #[test]
    fn direct_specification_is_identity() {
        let c = 0.1f64;
        let z0e = 50.0 * ((1.0 + c) / (1.0 - c)).sqrt();
        let z0o = 50.0 * ((1.0 - c) / (1.0 + c)).sqrt();
        let p = CoupledLineParams::new(z0e, z0o, 6.45, 6.45).unwrap();
        assert_eq!((p.z0e, p.z0o), (z0e, z0o));
        assert!((p.coupling() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn quarter_wave_examples() {
        let air = LineParams::new(50.0, 1.0).unwrap();
        let l = quarter_wave_length(&air, 7.5e9).unwrap();
        assert!((l - SPEED_OF_LIGHT / 3e10).abs() < 1e-15);
        assert!((l - 0.01).abs() < 1e-5);
        let l2 = quarter_wave_length(&air, 15e9).unwrap();
        assert!((l - 2.0 * l2).abs() < 1e-18);
        assert!(quarter_wave_length(&air, 0.0).is_err());
    }
}
