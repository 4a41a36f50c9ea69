use cpwkit::cpw::LineParams;
use cpwkit::devices::{
    build_hybrid_8part, fit_tjunction_shift, hybrid_builder, hybrid_center_frequency, optimize_design, synth_coupler,
    CouplerSpec, HybridParam, HybridSpec,
};
use cpwkit::elements::{line2p, line2p_electrical, ElectricalLength};
use cpwkit::metrics::{check_spec, compute_metrics, Bound, DesignSpec, Metric, Target};
use cpwkit::netcore::{make_sweep, terminate_port, FrequencySweep};
use cpwkit::optim::NelderMeadOptions;
use cpwkit::trl::{
    add_noise, assemble_4port, deembed, pair_boxes, random_error_box, synthesize_kit, terminated_pair, trl_solve,
    virtual_station, ErrorBoxPair, PairMeasurement, ReflectKind,
};
use cpwkit::{Network, C64, SPEED_OF_LIGHT};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 6.45;

fn quarter_wave() -> f64 {
    SPEED_OF_LIGHT / (4.0 * 7e9 * EPS.sqrt())
}

fn random_probes(sweep: &FrequencySweep, seed: u64) -> [Network; 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::array::from_fn(|_| random_error_box(&mut rng, sweep, 50.0, 0.3, 1.0).unwrap())
}

fn calibrate_all(probes: &[Network; 4], meas: &[PairMeasurement], sweep: &FrequencySweep) -> Vec<PairMeasurement> {
    let line = line2p(&LineParams::new(50.0, EPS).unwrap(), quarter_wave(), sweep, 50.0).unwrap();
    meas.iter()
        .map(|m| {
            let boxes = pair_boxes(probes, m.ports).unwrap();
            let kit = synthesize_kit(&boxes, &line, quarter_wave(), C64::new(-1.0, 0.0), ReflectKind::Short, Some(EPS)).unwrap();
            let sol = trl_solve(&kit).unwrap();
            assert!(sol.excluded.is_empty());
            PairMeasurement {
                ports: m.ports,
                raw: deembed(&sol.boxes, &m.raw).unwrap(),
            }
        })
        .collect()
}

#[test]
fn station_with_matched_terminations_recovers_measurable_blocks() {
    let sweep = make_sweep(5e9, 9e9, 41).unwrap();
    let dut = build_hybrid_8part(&HybridSpec::new(7e9, 50.0).with_c_shunt(40e-15), &sweep).unwrap();
    let probes = random_probes(&sweep, 3);
    let meas = virtual_station(&dut, &probes, C64::new(0.0, 0.0)).unwrap();
    assert_eq!(meas.len(), 4);
    let cal = calibrate_all(&probes, &meas, &sweep);
    // Unused ports see their probe's mismatch, so compare against that loading.
    for m in &cal {
        let truth = terminated_pair(&dut, &probes, m.ports, C64::new(0.0, 0.0)).unwrap();
        assert!(m.raw.max_abs_diff(&truth).unwrap() < 1e-9);
    }
}

#[test]
fn ideal_station_assembles_exact_measured_entries() {
    let sweep = make_sweep(6e9, 8e9, 21).unwrap();
    let dut = synth_coupler(&CouplerSpec::new(7e9, 20.0), &sweep).unwrap().network;
    let id = ErrorBoxPair::identity(&sweep, 50.0).unwrap().x;
    let probes = [id.clone(), id.clone(), id.clone(), id];
    let meas = virtual_station(&dut, &probes, C64::new(0.0, 0.0)).unwrap();
    let (net, cov) = assemble_4port(&meas, None, 1e-12).unwrap();
    assert!(cov.warnings.is_empty(), "{:?}", cov.warnings);
    assert_eq!(cov.unmeasured, vec![(0, 3), (3, 0), (1, 2), (2, 1)]);
    for k in 0..sweep.len() {
        for i in 0..4 {
            for j in 0..4 {
                if cov.measured[i][j] {
                    assert!((net.entry(k, i, j) - dut.entry(k, i, j)).norm() < 1e-14);
                } else {
                    assert!(net.entry(k, i, j).is_nan());
                }
            }
        }
    }
    let filled = assemble_4port(&meas, Some(&dut), 1e-12).unwrap().0;
    assert!(filled.max_abs_diff(&dut).unwrap() < 1e-14);
}

#[test]
fn pair_transmissions_are_reciprocal() {
    let sweep = make_sweep(6e9, 8e9, 11).unwrap();
    let dut = synth_coupler(&CouplerSpec::new(7e9, 20.0), &sweep).unwrap().network;
    let id = ErrorBoxPair::identity(&sweep, 50.0).unwrap().x;
    let probes = [id.clone(), id.clone(), id.clone(), id];
    for m in virtual_station(&dut, &probes, C64::new(0.0, 0.0)).unwrap() {
        for k in 0..sweep.len() {
            assert!((m.raw.entry(k, 1, 0) - m.raw.entry(k, 0, 1)).norm() < 1e-12);
        }
    }
}

#[test]
fn imperfect_terminations_match_brute_force() {
    let sweep = make_sweep(6e9, 8e9, 21).unwrap();
    let dut = synth_coupler(&CouplerSpec::new(7e9, 20.0), &sweep).unwrap().network;
    let id = ErrorBoxPair::identity(&sweep, 50.0).unwrap().x;
    let probes = [id.clone(), id.clone(), id.clone(), id];
    let g = C64::new(0.0316, 0.0);
    let meas = virtual_station(&dut, &probes, g).unwrap();
    let (net, cov) = assemble_4port(&meas, None, 1e-9).unwrap();
    assert!(!cov.warnings.is_empty());
    // Brute force for pair (1,3): load ports 2 and 4 directly.
    let brute = terminate_port(&terminate_port(&dut, 3, g).unwrap(), 1, g).unwrap();
    let m13 = meas.iter().find(|m| m.ports == (1, 3)).unwrap();
    assert!(m13.raw.max_abs_diff(&brute).unwrap() < 1e-14);
    // Deviation of assembled entries scales like |gamma| times the coupling path.
    for k in 0..sweep.len() {
        let dev = (net.entry(k, 2, 0) - dut.entry(k, 2, 0)).norm();
        assert!(dev < 2.0 * g.norm() * 0.2, "{dev}");
        assert!(dev > 0.0);
    }
}

#[test]
fn raw_thru_deembeds_to_identity() {
    let sweep = make_sweep(2e9, 12e9, 51).unwrap();
    let probes = random_probes(&sweep, 11);
    let boxes = pair_boxes(&probes, (1, 2)).unwrap();
    let line = line2p(&LineParams::new(50.0, EPS).unwrap(), quarter_wave(), &sweep, 50.0).unwrap();
    let kit = synthesize_kit(&boxes, &line, quarter_wave(), C64::new(-1.0, 0.0), ReflectKind::Short, Some(EPS)).unwrap();
    let sol = trl_solve(&kit).unwrap();
    let thru = deembed(&sol.boxes, &kit.thru).unwrap();
    for k in 0..sweep.len() {
        if !sol.excluded.contains(&k) {
            assert!(thru.s(k).max_abs_diff(&cpwkit::SMatrix::identity_through()) < 1e-9);
        }
    }
}

#[test]
fn solved_boxes_differ_from_truth_but_deembed_the_same() {
    let sweep = make_sweep(3e9, 11e9, 33).unwrap();
    let probes = random_probes(&sweep, 5);
    let boxes = pair_boxes(&probes, (4, 3)).unwrap();
    let line = line2p(&LineParams::new(50.0, EPS).unwrap(), quarter_wave(), &sweep, 50.0).unwrap();
    let kit = synthesize_kit(&boxes, &line, quarter_wave(), C64::new(-0.95, 0.1), ReflectKind::Short, None).unwrap();
    let sol = trl_solve(&kit).unwrap();
    let dut = line2p_electrical(22.0, ElectricalLength::from_degrees(70.0, 7e9), &sweep, 50.0).unwrap();
    let raw = cpwkit::trl::embed(&boxes, &dut).unwrap();
    let a = deembed(&sol.boxes, &raw).unwrap();
    let b = deembed(&boxes, &raw).unwrap();
    assert!(a.max_abs_diff(&b).unwrap() < 1e-9);
}

#[test]
fn noisy_calibration_degrades_gracefully() {
    let sweep = make_sweep(4e9, 10e9, 31).unwrap();
    let probes = random_probes(&sweep, 8);
    let boxes = pair_boxes(&probes, (1, 2)).unwrap();
    let line = line2p(&LineParams::new(50.0, EPS).unwrap(), quarter_wave(), &sweep, 50.0).unwrap();
    let mut kit = synthesize_kit(&boxes, &line, quarter_wave(), C64::new(-1.0, 0.0), ReflectKind::Short, Some(EPS)).unwrap();
    kit.thru = add_noise(&kit.thru, 1e-4, 1).unwrap();
    kit.line = add_noise(&kit.line, 1e-4, 2).unwrap();
    let sol = trl_solve(&kit).unwrap();
    let dut = line2p_electrical(35.0, ElectricalLength::from_degrees(90.0, 7e9), &sweep, 50.0).unwrap();
    let back = deembed(&sol.boxes, &cpwkit::trl::embed(&boxes, &dut).unwrap()).unwrap();
    let d = back.max_abs_diff(&dut).unwrap();
    assert!(d < 1e-2, "{d}");
}

#[test]
fn fitted_shift_moves_the_passing_band() {
    let sweep = make_sweep(5.5e9, 8e9, 501).unwrap();
    let spec = HybridSpec::new(7e9, 50.0);
    let fit = fit_tjunction_shift(500e6, &spec).unwrap();
    let shifted = spec.with_c_shunt(fit.c_shunt);
    let fc = hybrid_center_frequency(&shifted).unwrap();
    assert!((fc - 6.5e9).abs() <= 1e6);
    let rep = compute_metrics(&build_hybrid_8part(&shifted, &sweep).unwrap(), 1).unwrap();
    let balance = |lo: f64, hi: f64| {
        DesignSpec::new(
            (lo, hi),
            vec![
                Target { metric: Metric::Through, bound: Bound::within(-3.0, 0.3) },
                Target { metric: Metric::Coupling, bound: Bound::within(-3.0, 0.3) },
            ],
        )
        .unwrap()
    };
    assert!(!check_spec(&rep, &balance(6.65e9, 7.35e9)).unwrap().pass);
    let recentered = check_spec(&rep, &balance(6.15e9, 6.85e9)).unwrap();
    assert!(recentered.pass, "{recentered:?}");
}

#[test]
fn larger_shift_needs_more_capacitance() {
    let spec = HybridSpec::new(7e9, 50.0);
    let a = fit_tjunction_shift(200e6, &spec).unwrap();
    let b = fit_tjunction_shift(500e6, &spec).unwrap();
    assert!(b.c_shunt > a.c_shunt && a.c_shunt > 0.0);
    assert!(b.c_shunt < 1e-12);
}

#[test]
fn unattainable_shift_is_reported() {
    let spec = HybridSpec::new(7e9, 50.0);
    assert!(matches!(
        fit_tjunction_shift(3.0e9, &spec),
        Err(cpwkit::Error::NoSolution(_))
    ));
}

#[test]
fn optimizer_is_deterministic_and_monotone() {
    let sweep = make_sweep(6.5e9, 7.5e9, 51).unwrap();
    let spec = DesignSpec::new(
        (6.65e9, 7.35e9),
        vec![
            Target { metric: Metric::Through, bound: Bound::within(-3.0, 0.3) },
            Target { metric: Metric::Coupling, bound: Bound::within(-3.0, 0.3) },
            Target { metric: Metric::ReturnLoss, bound: Bound::at_least(20.0) },
            Target { metric: Metric::Isolation, bound: Bound::at_least(20.0) },
        ],
    )
    .unwrap();
    let mut base = HybridSpec::new(7e9, 50.0);
    base.through_z = 42.0;
    base.branch_deg = 80.0;
    let vary = [HybridParam::ThroughZ, HybridParam::BranchZ, HybridParam::BranchDeg];
    let x0 = [42.0, 50.0, 80.0];
    let run = || optimize_design(&x0, &spec, hybrid_builder(base, &vary, &sweep), None, &NelderMeadOptions::default()).unwrap();
    let a = run();
    let b = run();
    assert_eq!(a, b);
    assert_eq!(a.cost, 0.0);
    for w in a.history.windows(2) {
        assert!(w[1].best_cost <= w[0].best_cost);
    }
}

#[test]
fn optimizer_flags_iteration_cap() {
    let sweep = make_sweep(6.5e9, 7.5e9, 21).unwrap();
    let spec = DesignSpec::new((6.5e9, 7.5e9), vec![Target { metric: Metric::Isolation, bound: Bound::at_least(200.0) }]).unwrap();
    let base = HybridSpec::new(7e9, 50.0);
    let vary = [HybridParam::ThroughZ];
    let opts = NelderMeadOptions { max_iterations: 5, ..Default::default() };
    let out = optimize_design(&[35.0], &spec, hybrid_builder(base, &vary, &sweep), None, &opts).unwrap();
    assert!(!out.converged);
    assert_eq!(out.iterations, 5);
    assert!(out.cost > 0.0);
}
