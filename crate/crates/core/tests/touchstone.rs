use cpwkit::elements::ideal_branchline;
use cpwkit::netcore::make_sweep;
use cpwkit::tsio::{
    parse_touchstone, parse_touchstone_with_options, port_count_from_path, write_touchstone, DataFormat, FreqUnit,
    TouchstoneError,
};
use cpwkit::C64;

#[test]
fn two_port_column_order() {
    let net = parse_touchstone("# GHz S RI R 50\n7.0 0 0 1 0 1 0 0 0\n", 2).unwrap();
    assert_eq!(net.frequencies(), &[7e9]);
    assert_eq!(net.entry(0, 0, 0), C64::new(0.0, 0.0));
    assert_eq!(net.entry(0, 1, 0), C64::new(1.0, 0.0));
    assert_eq!(net.entry(0, 0, 1), C64::new(1.0, 0.0));
    assert_eq!(net.entry(0, 1, 1), C64::new(0.0, 0.0));

    // S21 and S12 distinguishable.
    let net = parse_touchstone("# Hz S RI R 50\n1 0 0 0.2 0 0.7 0 0 0\n", 2).unwrap();
    assert_eq!(net.entry(0, 1, 0).re, 0.2);
    assert_eq!(net.entry(0, 0, 1).re, 0.7);
}

#[test]
fn magnitude_angle_polar() {
    let net = parse_touchstone("# GHz S MA R 50\n7 0 0 1 -90 1 -90 0 0\n", 2).unwrap();
    assert!((net.entry(0, 1, 0) - C64::new(0.0, -1.0)).norm() < 1e-15);
}

#[test]
fn db_angle() {
    let net = parse_touchstone("# MHz S DB R 50\n100 -6.020599913279624 0 -20 180 -20 180 0 90\n", 2).unwrap();
    assert!((net.entry(0, 0, 0) - C64::new(0.5, 0.0)).norm() < 1e-12);
    assert!((net.entry(0, 1, 0) - C64::new(-0.1, 0.0)).norm() < 1e-12);
    assert!((net.entry(0, 1, 1) - C64::new(0.0, 1.0)).norm() < 1e-12);
}

#[test]
fn defaults_without_option_line() {
    let (net, opts) = parse_touchstone_with_options("! no options\n7 1 0 0 0 0 0 1 0\n", 2).unwrap();
    assert_eq!(opts.freq_unit, FreqUnit::GHz);
    assert_eq!(opts.format, DataFormat::MA);
    assert_eq!(opts.reference, 50.0);
    assert_eq!(net.frequencies(), &[7e9]);
}

#[test]
fn option_line_is_case_insensitive() {
    let (net, opts) = parse_touchstone_with_options("# ghz s ri r 75\n1 0 0 1 0 1 0 0 0\n", 2).unwrap();
    assert_eq!(opts.format, DataFormat::RI);
    assert_eq!(net.z0(), 75.0);
}

#[test]
fn four_port_wrapped_rows() {
    let text = "# GHz S RI R 50
! comment between header and data
1.0 0 0 0.1 0 0.2 0 0.3 0
    0.1 0 0 0 0 0 0 0
    0.2 0 0 0 0 0 0 0
    0.3 0 0 0 0 0 0 0 ! trailing comment
2.0 0 0 0 0 0 0 0 0
    0 0 0 0 0 0 0 0
    0 0 0 0 0 0 0 0
    0 0 0 0 0 0 0 0
";
    let net = parse_touchstone(text, 4).unwrap();
    assert_eq!(net.frequencies(), &[1e9, 2e9]);
    assert_eq!(net.entry(0, 0, 3).re, 0.3);
    assert_eq!(net.entry(0, 3, 0).re, 0.3);
}

#[test]
fn port_count_from_extension() {
    assert_eq!(port_count_from_path("dut.s2p"), Some(2));
    assert_eq!(port_count_from_path("dir/hybrid.S4P"), Some(4));
    assert_eq!(port_count_from_path("notes.txt"), None);
    assert_eq!(port_count_from_path("x.s0p"), None);
}

#[test]
fn writer_is_deterministic_and_wraps_four_ports() {
    let sweep = make_sweep(6e9, 8e9, 5).unwrap();
    let net = ideal_branchline(7e9, 50.0, &sweep).unwrap();
    let a = write_touchstone(&net, FreqUnit::GHz, DataFormat::RI).unwrap();
    let b = write_touchstone(&net, FreqUnit::GHz, DataFormat::RI).unwrap();
    assert_eq!(a, b);
    let data: Vec<&str> = a
        .lines()
        .filter(|l| !l.trim_start().starts_with('!') && !l.trim_start().starts_with('#'))
        .collect();
    assert_eq!(data.len(), 4 * sweep.len());
    assert_eq!(a.lines().filter(|l| l.starts_with('#')).count(), 1);
    // 17 significant digits.
    let first = data[0].split_whitespace().nth(1).unwrap();
    let mantissa = first.trim_start_matches('-').split('e').next().unwrap();
    assert_eq!(mantissa.replace('.', "").len(), 17);
}

#[test]
fn writer_rejects_non_finite() {
    let sweep = make_sweep(6e9, 8e9, 3).unwrap();
    let net = ideal_branchline(7e9, 50.0, &sweep).unwrap();
    let mats: Vec<_> = net
        .matrices()
        .iter()
        .map(|s| {
            let mut m = s.matrix().clone();
            m[(0, 0)] = C64::new(f64::NAN, 0.0);
            m
        })
        .collect();
    let bad = cpwkit::Network::new(
        sweep.clone(),
        50.0,
        mats.into_iter().map(|m| cpwkit::SMatrix::new(m).unwrap()).collect(),
        net.labels().to_vec(),
    )
    .unwrap();
    assert!(matches!(write_touchstone(&bad, FreqUnit::GHz, DataFormat::MA), Err(TouchstoneError::Write(_))));
}

/// (description, text, port count, offending line)
const BAD_FILES: &[(&str, &str, usize, usize)] = &[
    ("decreasing frequency", "# GHz S RI R 50\n2 0 0 1 0 1 0 0 0\n1 0 0 1 0 1 0 0 0\n", 2, 3),
    ("repeated frequency", "# GHz S RI R 50\n1 0 0 1 0 1 0 0 0\n1 0 0 1 0 1 0 0 0\n", 2, 3),
    ("short record", "# GHz S RI R 50\n1 0 0 1 0 1 0 0\n", 2, 2),
    ("extra token", "# GHz S RI R 50\n1 0 0 1 0 1 0 0 0 0\n", 2, 2),
    ("bad unit", "# THz S RI R 50\n1 0 0 1 0 1 0 0 0\n", 2, 1),
    ("bad format", "# GHz S XY R 50\n1 0 0 1 0 1 0 0 0\n", 2, 1),
    ("missing reference", "# GHz S RI R\n1 0 0 1 0 1 0 0 0\n", 2, 1),
    ("negative reference", "# GHz S RI R -50\n1 0 0 1 0 1 0 0 0\n", 2, 1),
    ("duplicate format", "# GHz S RI MA R 50\n1 0 0 1 0 1 0 0 0\n", 2, 1),
    ("second option line", "# GHz S RI R 50\n\n# GHz S RI R 50\n1 0 0 1 0 1 0 0 0\n", 2, 3),
    ("z parameters", "# GHz Z RI R 50\n1 0 0 1 0 1 0 0 0\n", 2, 1),
    ("v2 keyword", "[Version] 2.0\n# GHz S RI R 50\n", 2, 1),
    ("garbage number", "# GHz S RI R 50\n1 0 0 1 0 x 0 0 0\n", 2, 2),
    ("nan value", "# GHz S RI R 50\n1 0 0 NaN 0 1 0 0 0\n", 2, 2),
    ("negative frequency", "# GHz S RI R 50\n-1 0 0 1 0 1 0 0 0\n", 2, 2),
    ("noise block", "# GHz S RI R 50\n2 0 0 1 0 1 0 0 0\n1 0.5 0.1 0 0.3\n", 2, 3),
    (
        "four-port truncated",
        "# GHz S RI R 50\n1 0 0 0 0 0 0 0 0\n0 0 0 0 0 0 0 0\n0 0 0 0 0 0 0 0\n",
        4,
        4,
    ),
    (
        "four-port row split mid-way",
        "# GHz S RI R 50\n1 0 0 0 0 0 0 0 0\n0 0 0 0\n0 0 0 0 0 0 0 0 0 0 0 0\n0 0 0 0 0 0 0 0\n0 0 0 0 0 0 0 0\n",
        4,
        3,
    ),
];

#[test]
fn malformed_files_report_their_line() {
    for (what, text, n, line) in BAD_FILES {
        match parse_touchstone(text, *n) {
            Ok(_) => panic!("{what}: accepted"),
            Err(e) => assert_eq!(e.line(), Some(*line), "{what}: {e}"),
        }
    }
}

#[test]
fn unsupported_features_are_named() {
    let e = parse_touchstone("[Version] 2.0\n", 2).unwrap_err();
    assert!(matches!(e, TouchstoneError::Unsupported { .. }), "{e}");
    let e = parse_touchstone("# GHz Y RI R 50\n1 0 0 1 0 1 0 0 0\n", 2).unwrap_err();
    assert!(e.to_string().contains("Y parameters"), "{e}");
}

#[test]
fn empty_document_is_rejected() {
    assert!(parse_touchstone("", 2).is_err());
    assert!(parse_touchstone("! only a comment\n# GHz S RI R 50\n", 2).is_err());
}
