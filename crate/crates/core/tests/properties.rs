use cpwkit::cpw::{CoupledLineParams, LineParams};
use cpwkit::devices::{synth_coupler, CouplerSpec};
use cpwkit::elements::{
    branchline_closed_form, coupled_line4p, line2p, line2p_electrical, tjunction3p, BranchlineParams, ElectricalLength,
    TJunctionSpec,
};
use cpwkit::metrics::{compute_metrics, find_band, Metric};
use cpwkit::netcore::{cascade, innerconnect, make_sweep, s_to_t, t_to_s, terminate_port, Network};
use cpwkit::tsio::{parse_touchstone, write_touchstone, DataFormat, FreqUnit};
use cpwkit::{SMatrix, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn sweep() -> cpwkit::FrequencySweep {
    make_sweep(1e9, 13e9, 7).unwrap()
}

fn close(a: &Network, b: &Network) -> f64 {
    a.max_abs_diff(b).unwrap()
}

fn cplx() -> impl Strategy<Value = C64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| C64::new(re, im))
}

fn branchline() -> impl Strategy<Value = BranchlineParams> {
    (20.0f64..80.0, 20.0f64..80.0, 60.0f64..120.0, 60.0f64..120.0, 0.0f64..300e-15).prop_map(
        |(tz, bz, td, bd, c)| BranchlineParams {
            f0: 7e9,
            through_z: tz,
            branch_z: bz,
            through_deg: td,
            branch_deg: bd,
            c_shunt: c,
        },
    )
}

proptest! {
    #![proptest_config(cfg(1000))]

    #[test]
    fn lossless_line_is_unitary_and_reciprocal(z in 10.0f64..150.0, eps in 1.0f64..12.0, len in 1e-6f64..0.02) {
        let net = line2p(&LineParams::new(z, eps).unwrap(), len, &sweep(), 50.0).unwrap();
        prop_assert!(net.max_unitarity_error() < 1e-12);
        prop_assert!(net.max_reciprocity_error() < 1e-14);
    }

    #[test]
    fn matched_line_phases_add(d1 in 1.0f64..400.0, d2 in 1.0f64..400.0) {
        let sw = sweep();
        let a = line2p_electrical(50.0, ElectricalLength::from_degrees(d1, 7e9), &sw, 50.0).unwrap();
        let b = line2p_electrical(50.0, ElectricalLength::from_degrees(d2, 7e9), &sw, 50.0).unwrap();
        let ab = line2p_electrical(50.0, ElectricalLength::from_degrees(d1 + d2, 7e9), &sw, 50.0).unwrap();
        prop_assert!(close(&cascade(&a, &b).unwrap(), &ab) < 1e-12);
    }

    #[test]
    fn innerconnect_agrees_with_cascade(
        z1 in 10.0f64..150.0, z2 in 10.0f64..150.0, l1 in 1e-4f64..0.01, l2 in 1e-4f64..0.01,
    ) {
        let sw = sweep();
        let a = line2p(&LineParams::lossy(z1, 6.45, 3.0).unwrap(), l1, &sw, 50.0).unwrap();
        let b = line2p(&LineParams::new(z2, 4.0).unwrap(), l2, &sw, 50.0).unwrap();
        let joined = innerconnect(&a, 1, &b, 0).unwrap();
        prop_assert!(close(&joined, &cascade(&a, &b).unwrap()) < 1e-12);
    }

    #[test]
    fn matched_termination_drops_the_port(p in branchline(), port in 0usize..4) {
        let net = branchline_closed_form(&p, &sweep(), 50.0).unwrap();
        let keep: Vec<usize> = (0..4).filter(|&i| i != port).collect();
        let t = terminate_port(&net, port, C64::new(0.0, 0.0)).unwrap();
        prop_assert!(close(&t, &net.subnetwork(&keep).unwrap()) < 1e-15);
    }

    #[test]
    fn coupled_line_is_lossless(
        zo in 15.0f64..60.0, dz in 0.0f64..60.0, ee in 1.0f64..10.0, eo in 1.0f64..10.0, len in 1e-4f64..0.01,
    ) {
        let clp = CoupledLineParams::new(zo + dz, zo, ee, eo).unwrap();
        let net = coupled_line4p(&clp, len, &sweep(), 50.0).unwrap();
        prop_assert!(net.max_unitarity_error() < 1e-12);
        prop_assert!(net.max_singular_value() <= 1.0 + 1e-12);
        prop_assert!(net.max_reciprocity_error() < 1e-14);
    }

    #[test]
    fn reactive_junction_is_lossless(z in 10.0f64..150.0, c in 0.0f64..1e-12) {
        let net = tjunction3p(&TJunctionSpec { z0: z, c_shunt: c }, &sweep()).unwrap();
        prop_assert!(net.max_unitarity_error() < 1e-12);
        prop_assert!(net.max_reciprocity_error() < 1e-15);
    }

    #[test]
    fn branchline_has_fourfold_symmetry(p in branchline()) {
        let net = branchline_closed_form(&p, &sweep(), 50.0).unwrap();
        for s in net.matrices() {
            for i in 1..4 {
                prop_assert!((s.get(i, i) - s.get(0, 0)).norm() < 1e-12);
            }
            // Input and isolated mirror through and coupled.
            prop_assert!((s.get(1, 0) - s.get(2, 3)).norm() < 1e-12);
            prop_assert!((s.get(2, 0) - s.get(1, 3)).norm() < 1e-12);
        }
        prop_assert!(net.max_reciprocity_error() < 1e-12);
        prop_assert!(net.max_unitarity_error() < 1e-10);
    }

    #[test]
    fn synthesized_coupler_is_matched_on_geometric_mean(db in 3.0f64..40.0, z0 in 20.0f64..100.0, d in -0.2f64..0.2) {
        let mut spec = CouplerSpec::new(7e9, db);
        spec.z0 = z0;
        spec.velocity_mismatch = d;
        let design = synth_coupler(&spec, &sweep()).unwrap();
        let zm = (design.params.z0e * design.params.z0o).sqrt();
        prop_assert!((zm - z0).abs() < 1e-10 * z0);
        let c = (design.params.z0e - design.params.z0o) / (design.params.z0e + design.params.z0o);
        prop_assert!((20.0 * c.log10() + db).abs() < 1e-9);
    }

    #[test]
    fn s_t_round_trip(s11 in cplx(), s12 in cplx(), s22 in cplx(), mag in 0.05f64..1.0, ph in -3.1f64..3.1) {
        let s21 = C64::from_polar(mag, ph);
        let s = SMatrix::new(DMatrix::from_row_slice(2, 2, &[s11, s12, s21, s22])).unwrap();
        let back = t_to_s(&s_to_t(&s, 1e9).unwrap(), 1e9).unwrap();
        prop_assert!(back.max_abs_diff(&s) < 1e-12 / mag);
    }

    #[test]
    fn metrics_follow_labels_not_positions(p in branchline(), perm in Just([0usize, 1, 2, 3]).prop_shuffle()) {
        let net = branchline_closed_form(&p, &sweep(), 50.0).unwrap();
        let shuffled = net.reorder(&perm).unwrap();
        let a = compute_metrics(&net, 1).unwrap();
        let b = compute_metrics(&shuffled, 1).unwrap();
        prop_assert_eq!(a.rows, b.rows);
    }

    #[test]
    fn power_insertion_loss_is_nonnegative_when_passive(p in branchline(), alpha in 0.0f64..20.0, len in 1e-4f64..0.01) {
        let sw = sweep();
        let hyb = branchline_closed_form(&p, &sw, 50.0).unwrap();
        let feed = line2p(&LineParams::lossy(50.0, 6.45, alpha).unwrap(), len, &sw, 50.0).unwrap();
        let net = innerconnect(&feed, 1, &hyb, 0).unwrap().with_labels(["input", "through", "coupled", "isolated"]).unwrap();
        let report = compute_metrics(&net, 1).unwrap();
        for v in report.values(Metric::InsertionLossPower) {
            prop_assert!(v >= -1e-9, "{v}");
        }
    }
}

proptest! {
    #![proptest_config(cfg(300))]

    #[test]
    fn touchstone_round_trip(p in branchline(), fmt in prop_oneof![Just(DataFormat::RI), Just(DataFormat::MA), Just(DataFormat::DB)],
        unit in prop_oneof![Just(FreqUnit::Hz), Just(FreqUnit::KHz), Just(FreqUnit::MHz), Just(FreqUnit::GHz)]) {
        let net = branchline_closed_form(&p, &sweep(), 50.0).unwrap();
        let text = write_touchstone(&net, unit, fmt).unwrap();
        let back = parse_touchstone(&text, 4).unwrap();
        prop_assert!(close(&net, &back) < 1e-12);
        prop_assert_eq!(back.labels(), net.labels());
        for (x, y) in net.frequencies().iter().zip(back.frequencies()) {
            prop_assert!((x - y).abs() <= 1e-15 * x);
        }
    }

    #[test]
    fn bands_are_sorted_disjoint_and_inside_the_sweep(p in branchline(), thr in 5.0f64..40.0, pick in 0usize..6) {
        let sw = make_sweep(4e9, 10e9, 121).unwrap();
        let net = branchline_closed_form(&p, &sw, 50.0).unwrap();
        let report = compute_metrics(&net, 1).unwrap();
        let metric = Metric::ALL[pick];
        let threshold = if metric.higher_is_better() { thr } else { thr / 10.0 };
        let bands = find_band(&report, metric, threshold);
        let mut prev = f64::NEG_INFINITY;
        for (lo, hi) in bands {
            prop_assert!(lo <= hi);
            prop_assert!(lo > prev);
            prop_assert!(lo >= sw.start() && hi <= sw.stop());
            prev = hi;
        }
    }
}
