use chemoscale::harness::{
    emit_csv, emit_svg, fit_loglog, fit_scaling, read_csv, run_sweep, Axis, Response, SweepConfig, SweepRecord,
    CSV_HEADER,
};

fn small_config() -> SweepConfig {
    let mut cfg = SweepConfig::new(vec![4.0, 5.0], vec![16.0, 24.0], vec![0.1], vec![10.0]);
    cfg.grid.n_core = 128;
    cfg.checks = false;
    cfg.baseline = false;
    cfg.workers = Some(2);
    cfg
}

fn synthetic(l: f64, gamma: f64, tau_c: f64) -> SweepRecord {
    SweepRecord {
        run_id: format!("syn-{l}-{gamma}"),
        l,
        gamma,
        eps: 0.1,
        m0: 10.0 * gamma / 0.1,
        theta: 8.0,
        chi: gamma / 8.0,
        tau_c: Some(tau_c),
        tau_c_quarter: None,
        tau_d: None,
        tau_d_lb: None,
        t3_fitted: None,
        passthrough_c: None,
        masscmp_ok: None,
        grid_n: 0,
        r_max: 0.0,
        status: "ok".into(),
    }
}

#[test]
fn sweep_is_deterministic_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config();
    let a = run_sweep(&cfg).unwrap();
    let b = run_sweep(&cfg).unwrap();
    assert_eq!(a.len(), 4);
    let (pa, pb) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    emit_csv(&a, &pa).unwrap();
    emit_csv(&b, &pb).unwrap();
    assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
    let ids: Vec<&str> = a.iter().map(|r| r.run_id.as_str()).collect();
    assert_eq!(ids, ["run-0000", "run-0001", "run-0002", "run-0003"]);
    assert_eq!((a[0].l, a[0].gamma), (4.0, 16.0));
    assert_eq!((a[1].l, a[1].gamma), (4.0, 24.0));
    for r in &a {
        assert_eq!(r.status, "ok", "{r:?}");
        assert!(r.tau_c.unwrap() > 0.0);
        assert!(r.tau_d.is_none());
    }
    assert_eq!(read_csv(&pa).unwrap(), a);
}

#[test]
fn seeds_control_the_jitter() {
    let mut cfg = small_config();
    cfg.l = vec![4.0];
    cfg.gamma = vec![16.0];
    cfg.jitter = 0.2;
    cfg.seed = 7;
    let a = run_sweep(&cfg).unwrap();
    let b = run_sweep(&cfg).unwrap();
    assert_eq!(a, b);
    cfg.seed = 8;
    let c = run_sweep(&cfg).unwrap();
    assert_ne!(a[0].tau_c, c[0].tau_c);
}

#[test]
fn empty_sweep_writes_the_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.csv");
    emit_csv(&[], &p).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.trim_end(), CSV_HEADER.join(","));
    assert!(read_csv(&p).unwrap().is_empty());
}

#[test]
fn config_errors_are_reported() {
    let bad = r#"{"schema_version": 1, "L": [10], "gamma": [32], "eps": [0.1], "m0_eps_over_gamma": [10], "bogus": 1}"#;
    assert!(SweepConfig::from_json(bad).is_err());
    let both = r#"{"schema_version": 1, "L": [10], "gamma": [32], "eps": [0.1], "M0": [1], "m0_eps_over_gamma": [10]}"#;
    assert!(SweepConfig::from_json(both).is_err());
    let version = r#"{"schema_version": 9, "L": [10], "gamma": [32], "eps": [0.1], "M0": [1]}"#;
    assert!(SweepConfig::from_json(version).is_err());
    let ok = r#"{"schema_version": 1, "L": [10, 20], "gamma": [32], "eps": [0.1], "M0": [1e4], "max_runs": 2}"#;
    let cfg = SweepConfig::from_json(ok).unwrap();
    assert_eq!(cfg.len(), 2);
    let mut big = cfg.clone();
    big.max_runs = 1;
    assert!(big.validate().is_err());
}

#[test]
fn fits_recover_known_exponents() {
    let recs: Vec<SweepRecord> =
        [10.0, 20.0, 40.0].iter().map(|&l| synthetic(l, 32.0, 7.0 * l * l / 32.0 + 32f64.ln())).collect();
    let f = fit_scaling(&recs, Response::TauC, Axis::L).unwrap();
    assert!(f.slope > 1.9 && f.slope < 2.0, "{}", f.slope);
    let recs: Vec<SweepRecord> = [16.0, 32.0, 64.0].iter().map(|&g| synthetic(20.0, g, 5.0 * 400.0 / g)).collect();
    let f = fit_scaling(&recs, Response::TauC, Axis::Gamma).unwrap();
    assert!((f.slope + 1.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
    assert!((f.spread() - 4.0).abs() < 1e-12);
    // mixed L and gamma cannot be fitted along gamma
    let mut mixed = recs.clone();
    mixed[0].l = 10.0;
    assert!(fit_scaling(&mixed, Response::TauC, Axis::Gamma).is_err());
    assert!(fit_loglog(&[1.0], &[1.0]).is_err());
}

#[test]
fn svg_is_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let recs: Vec<SweepRecord> = [10.0, 20.0, 40.0].iter().map(|&l| synthetic(l, 32.0, l * l)).collect();
    let f = fit_scaling(&recs, Response::TauC, Axis::L).unwrap();
    let p = dir.path().join("plots/fit.svg");
    emit_svg(&f, &p).unwrap();
    let s = std::fs::read_to_string(&p).unwrap();
    assert!(s.starts_with("<?xml"));
    assert!(s.trim_end().ends_with("</svg>"));
    assert_eq!(s.matches("<circle").count(), 3);
    assert_eq!(s.matches('<').count(), s.matches('>').count());
}
