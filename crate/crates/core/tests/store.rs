use chemoscale::reaction::{initial_attractant, initial_shell, CoupledOptions, GridPolicy};
use chemoscale::store::{load_frame, read_manifest, save_coupled, save_fp, STORE_SCHEMA};
use chemoscale::{annulus_potential, build_graded_grid, coupled_solve, fp_solve, FpOptions, Params, ProfileKind, RadialProfile};

fn run(p: &Params, t_end: f64) -> chemoscale::reaction::CoupledTrajectory {
    let grid = GridPolicy { n_core: 64, ..GridPolicy::default() }.build(p).unwrap();
    let rho1 = initial_shell(grid.clone(), p.l, p.m0).unwrap();
    let rho2 = initial_attractant(grid, p.theta).unwrap();
    coupled_solve(p, &rho1, &rho2, &CoupledOptions::new(t_end, 0.1, 0.02)).unwrap()
}

#[test]
fn coupled_store_round_trip_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let p = Params::from_gamma(16.0, 8.0, 0.1, 4.0, 10.0).unwrap();
    let short = run(&p, 0.3);
    let m = save_coupled(dir.path(), &short, Default::default()).unwrap();
    assert_eq!(m.schema_version, STORE_SCHEMA);
    assert_eq!(m.frames.len(), short.frames.len());
    let cols = load_frame(dir.path(), &m.frames[2]).unwrap();
    assert_eq!(cols.len(), 4);
    assert_eq!(cols[1], short.frames[2].rho1);
    assert_eq!(cols[2], short.frames[2].rho2);

    // a longer run of the same configuration only appends
    let long = run(&p, 0.6);
    let mut fitted = serde_json::Map::new();
    fitted.insert("tau_C".into(), serde_json::json!(1.25));
    let m2 = save_coupled(dir.path(), &long, fitted).unwrap();
    assert_eq!(m2.frames.len(), long.frames.len());
    assert_eq!(m2.frames[..m.frames.len()], m.frames[..]);
    let back = read_manifest(dir.path()).unwrap().unwrap();
    assert_eq!(back.fitted["tau_C"], 1.25);
    assert_eq!(back.last_time(), Some(long.t_end()));

    // a different run refuses to share the directory
    let other = run(&Params::from_gamma(24.0, 8.0, 0.1, 4.0, 10.0).unwrap(), 0.2);
    assert!(save_coupled(dir.path(), &other, Default::default()).is_err());
}

#[test]
fn fp_store_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    assert!(read_manifest(dir.path()).unwrap().is_none());
    let grid = build_graded_grid(10.0, 64, 64, 16.0).unwrap();
    let rho0 = RadialProfile::cell_averages(grid, ProfileKind::Density, |r| (-r * r).exp()).unwrap();
    let tr = fp_solve(&rho0, &annulus_potential(16.0).unwrap(), &FpOptions::uniform(0.5, 5, 0.01)).unwrap();
    let m = save_fp(dir.path(), &tr, Default::default()).unwrap();
    assert_eq!(m.gamma, 16.0);
    for (e, f) in m.frames.iter().zip(&tr.frames) {
        let cols = load_frame(dir.path(), e).unwrap();
        assert_eq!(cols[1], f.values);
        assert_eq!(cols[0], tr.grid.centers());
    }
}
