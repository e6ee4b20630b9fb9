use std::f64::consts::PI;

use chemoscale::grid::{from_mass_function, integrate, to_mass_function, STANDARD_BREAKPOINTS};
use chemoscale::{build_graded_grid, Error, GridSpec, ProfileKind, RadialGrid, RadialProfile};

#[test]
fn volumes_tile_the_disc() {
    for (r_max, gamma) in [(10.0, 16.0), (60.0, 128.0), (225.0, 32.0)] {
        let g = build_graded_grid(r_max, 256, 400, gamma).unwrap();
        let total: f64 = g.volumes().iter().sum();
        assert!((total - PI * r_max * r_max).abs() < 1e-10 * total);
        assert!(g.max_spacing_ratio() < 2.0 + 1e-9);
    }
}

#[test]
fn cell_averages_integrate_polynomials_exactly() {
    let g = build_graded_grid(12.0, 128, 200, 32.0).unwrap();
    // int_{B_R} r^2 dx = pi R^4 / 2
    let p = RadialProfile::cell_averages(g.clone(), ProfileKind::Density, |r| r * r).unwrap();
    let exact = PI * 12f64.powi(4) / 2.0;
    assert!((integrate(&p).unwrap() - exact).abs() < 1e-11 * exact);
}

#[test]
fn mass_function_round_trip() {
    let g = build_graded_grid(30.0, 64, 128, 16.0).unwrap();
    let rho = RadialProfile::cell_averages(g, ProfileKind::Density, |r| (-(r - 3.0) * (r - 3.0)).exp()).unwrap();
    let m = to_mass_function(&rho).unwrap();
    assert_eq!(m.values().len(), rho.values().len() + 1);
    assert_eq!(m.values()[0], 0.0);
    assert!(m.values().windows(2).all(|w| w[1] >= w[0]));
    let back = from_mass_function(&m).unwrap();
    for (a, b) in back.values().iter().zip(rho.values()) {
        assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
    }
}

#[test]
fn breakpoints_survive_every_resolution() {
    for n_core in [16, 64, 256, 1024] {
        let g = GridSpec::new(40.0, n_core, 64, 64.0).with_breakpoints(&[5.0 / 7.0, 20.0]).build().unwrap();
        for b in STANDARD_BREAKPOINTS.iter().chain(&[5.0 / 7.0, 20.0]) {
            assert!(g.require_edge(*b).is_ok(), "n_core={n_core} b={b}");
        }
    }
}

#[test]
fn profile_validation() {
    let g = std::sync::Arc::new(RadialGrid::uniform(1.0, 4).unwrap());
    assert!(matches!(
        RadialProfile::new(g.clone(), ProfileKind::Density, vec![0.0; 3]),
        Err(Error::LengthMismatch { .. })
    ));
    assert!(RadialProfile::new(g.clone(), ProfileKind::MassFunction, vec![0.0; 5]).is_ok());
    let mf = RadialProfile::new(g.clone(), ProfileKind::MassFunction, vec![0.0, 1.0, 0.5, 2.0, 3.0]);
    assert!(matches!(mf, Err(Error::DecreasingMassFunction { index: 2, .. })));
    let p = RadialProfile::new(g, ProfileKind::Density, vec![1.0; 4]).unwrap();
    assert!(matches!(to_mass_function(&p.scaled(2.0).unwrap()), Ok(_)));
    assert!(RadialGrid::from_edges(vec![0.0, 1.0, 1.0]).is_err());
    assert!(RadialGrid::from_edges(vec![0.5, 1.0]).is_err());
}

#[test]
fn interpolation_reproduces_linear_data() {
    let g = build_graded_grid(20.0, 64, 64, 16.0).unwrap();
    let vals: Vec<f64> = g.centers().iter().map(|r| 3.0 * r - 1.0).collect();
    for r in [0.3, 0.9, 1.7, 5.5, 14.2] {
        assert!((g.interpolate_centers(&vals, r) - (3.0 * r - 1.0)).abs() < 1e-10);
    }
    for r in [0.0, 0.5, 3.0, 19.99] {
        let i = g.cell_of(r);
        assert!(g.edges()[i] <= r && r < g.edges()[i + 1]);
    }
}
