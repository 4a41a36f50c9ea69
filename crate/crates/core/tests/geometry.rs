//! Fabricated cross-sections checked against Hilberg's closed-form
//! approximation of K(k)/K(k'), which is accurate to a few parts per million.

use std::f64::consts::PI;

use cpwkit::cpw::{coupled_cpw_params, cpw_params, quarter_wave_length, CoupledCpwGeometry, CpwGeometry, SILICON_EPS_R};

fn hilberg_ratio(k: f64) -> f64 {
    let kp = (1.0 - k * k).sqrt();
    if k <= std::f64::consts::FRAC_1_SQRT_2 {
        PI / (2.0 * (1.0 + kp.sqrt()) / (1.0 - kp.sqrt())).ln()
    } else {
        (2.0 * (1.0 + k.sqrt()) / (1.0 - k.sqrt())).ln() / PI
    }
}

fn eps_eff() -> f64 {
    (SILICON_EPS_R + 1.0) / 2.0
}

fn cpw_oracle(strip: f64, gap: f64) -> f64 {
    30.0 * PI / (eps_eff().sqrt() * hilberg_ratio(strip / (strip + 2.0 * gap)))
}

#[test]
fn hybrid_branch_arm_near_50_ohm() {
    let lp = cpw_params(&CpwGeometry::new(14e-6, 8e-6, SILICON_EPS_R).unwrap()).unwrap();
    let oracle = cpw_oracle(14e-6, 8e-6);
    assert!((lp.z0 - oracle).abs() / oracle < 1e-5, "{} vs {oracle}", lp.z0);
    assert!((lp.z0 - 50.0).abs() / 50.0 < 0.10, "{}", lp.z0);
}

#[test]
fn hybrid_through_arm_near_35_ohm() {
    let lp = cpw_params(&CpwGeometry::new(23e-6, 3.5e-6, SILICON_EPS_R).unwrap()).unwrap();
    let oracle = cpw_oracle(23e-6, 3.5e-6);
    assert!((lp.z0 - oracle).abs() / oracle < 1e-5);
    assert!((lp.z0 - 35.0).abs() / 35.0 < 0.10, "{}", lp.z0);
}

#[test]
fn fabricated_coupler_matches_oracle() {
    let g = CoupledCpwGeometry::fabricated_coupler();
    let (p, _) = coupled_cpw_params(&g).unwrap();
    let a = g.separation / 2.0;
    let b = a + g.strip;
    let c = b + g.slot;
    // Complementary moduli of the folded odd and even problems.
    let ko_p = (a / b) * ((c * c - b * b) / (c * c - a * a)).sqrt();
    let ke_p = ((c * c - b * b) / (c * c - a * a)).sqrt();
    let ko = (1.0 - ko_p * ko_p).sqrt();
    let ke = (1.0 - ke_p * ke_p).sqrt();
    let z = |k: f64| 60.0 * PI / (eps_eff().sqrt() * hilberg_ratio(k));
    assert!((p.z0o - z(ko)).abs() / p.z0o < 1e-5, "{} vs {}", p.z0o, z(ko));
    assert!((p.z0e - z(ke)).abs() / p.z0e < 1e-5, "{} vs {}", p.z0e, z(ke));
    let zm = (p.z0e * p.z0o).sqrt();
    assert!((zm - 50.0).abs() / 50.0 < 0.10, "{zm}");
    // Quasi-static coupling comes out near -18.6 dB for this cross-section.
    let c_db = 20.0 * p.coupling().log10();
    assert!(c_db > -20.0 && c_db < -17.0, "{c_db}");
}

#[test]
fn quarter_wave_on_silicon() {
    let lp = cpw_params(&CpwGeometry::new(14e-6, 8e-6, SILICON_EPS_R).unwrap()).unwrap();
    let l = quarter_wave_length(&lp, 7e9).unwrap();
    let direct = 299_792_458.0 / (4.0 * 7e9 * 6.45f64.sqrt());
    assert!((l - direct).abs() < 1e-12);
    assert!((l - 4150e-6).abs() / 4150e-6 < 0.05);
}
