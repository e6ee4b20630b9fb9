use chemoscale::fokker_planck::{bernoulli, Direction, FpOperator};
use chemoscale::fp_diagnostics::duality_invariant;
use chemoscale::grid::integrate;
use chemoscale::potential::ZeroPotential;
use chemoscale::tridiag::Tridiagonal;
use chemoscale::{
    annulus_potential, build_graded_grid, dual_solve, fp_solve, stationary_state, z_and_w, FpOptions, ProfileKind,
    RadialProfile,
};

#[test]
fn heat_flow_matches_gaussian_solution() {
    // e^{t Lap} e^{-r^2} = e^{-r^2/(1+4t)} / (1+4t)
    let grid = build_graded_grid(20.0, 512, 600, 64.0).unwrap();
    let rho0 = RadialProfile::cell_averages(grid.clone(), ProfileKind::Density, |r| (-r * r).exp()).unwrap();
    let tr = fp_solve(&rho0, &ZeroPotential, &FpOptions::at(vec![0.25, 1.0], 1e-3)).unwrap();
    for fr in &tr.frames[1..] {
        let s = 1.0 + 4.0 * fr.t;
        for (i, &r) in grid.centers().iter().enumerate().step_by(41) {
            let exact = (-r * r / s).exp() / s;
            assert!((fr.values[i] - exact).abs() < 2e-3, "t={} r={r}", fr.t);
        }
    }
}

#[test]
fn mass_positivity_and_dissipation() {
    let gamma = 48.0;
    let grid = build_graded_grid(30.0, 256, 400, gamma).unwrap();
    let pot = annulus_potential(gamma).unwrap();
    let rho0 = RadialProfile::cell_averages(grid.clone(), ProfileKind::Density, |r| {
        if (4.0..6.0).contains(&r) {
            1.0
        } else {
            0.0
        }
    })
    .unwrap();
    let m0 = integrate(&rho0).unwrap();
    let tr = fp_solve(&rho0, &pot, &FpOptions::uniform(2.0, 40, 0.01)).unwrap();
    assert!(tr.conservation_drift() < 1e-12);
    for fr in &tr.frames {
        assert!((fr.conserved - m0).abs() < 1e-11 * m0);
        assert!(fr.values.iter().all(|&v| v >= -1e-14));
    }
    // Z along the flow is nonincreasing
    let zs: Vec<f64> = tr.frames.iter().map(|f| f.z).collect();
    assert!(zs.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), "{zs:?}");
}

#[test]
fn stationary_state_is_fixed() {
    let gamma = 32.0;
    let grid = build_graded_grid(25.0, 256, 300, gamma).unwrap();
    let pot = annulus_potential(gamma).unwrap();
    let rs = stationary_state(3.0, &pot, grid.clone()).unwrap();
    assert!((integrate(&rs).unwrap() - 3.0).abs() < 1e-12);
    let tr = fp_solve(&rs, &pot, &FpOptions::uniform(1.0, 5, 0.01)).unwrap();
    let last = &tr.frames.last().unwrap().values;
    let sup = rs.sup();
    for (a, b) in last.iter().zip(rs.values()) {
        assert!((a - b).abs() < 1e-12 * sup);
    }
    // the dual flow fixes constants
    let ones = RadialProfile::new(grid, ProfileKind::Field, vec![1.0; rs.values().len()]).unwrap();
    let d = dual_solve(&ones, &pot, &FpOptions::uniform(1.0, 5, 0.01)).unwrap();
    assert!(d.frames.last().unwrap().values.iter().all(|v| (v - 1.0).abs() < 1e-12));
}

#[test]
fn forward_operator_is_adjoint_of_dual() {
    // the dual matrix is the transpose of the forward one
    let gamma = 20.0;
    let grid = build_graded_grid(15.0, 128, 200, gamma).unwrap();
    let pot = annulus_potential(gamma).unwrap();
    let op = FpOperator::from_potential(grid.clone(), &pot).unwrap();
    let n = grid.n_cells();
    let (mut a, mut b) = (Tridiagonal::zeros(n), Tridiagonal::zeros(n));
    op.assemble(Direction::Forward, 0.01, None, &mut a);
    op.assemble(Direction::Dual, 0.01, None, &mut b);
    let x: Vec<f64> = (0..n).map(|i| (0.37 * i as f64).sin()).collect();
    let y: Vec<f64> = (0..n).map(|i| (0.11 * i as f64).cos() + 0.5).collect();
    let (mut ax, mut by) = (vec![0.0; n], vec![0.0; n]);
    a.apply(&x, &mut ax);
    b.apply(&y, &mut by);
    let lhs: f64 = (0..n).map(|i| ax[i] * y[i]).sum();
    let rhs: f64 = (0..n).map(|i| x[i] * by[i]).sum();
    let scale: f64 = (0..n).map(|i| (ax[i] * y[i]).abs()).sum();
    assert!((lhs - rhs).abs() < 1e-11 * scale, "{lhs} vs {rhs}");
}

#[test]
fn duality_pairing_is_conserved() {
    let gamma = 32.0;
    let grid = build_graded_grid(30.0, 256, 300, gamma).unwrap();
    let pot = annulus_potential(gamma).unwrap();
    let rho0 = RadialProfile::cell_averages(grid.clone(), ProfileKind::Density, |r| (-(r - 4.0) * (r - 4.0)).exp()).unwrap();
    let f0 = RadialProfile::cell_averages(grid, ProfileKind::Field, |r| (-r / 3.0).exp()).unwrap();
    let opts = FpOptions::uniform(1.0, 20, 0.01);
    let rt = fp_solve(&rho0, &pot, &opts).unwrap();
    let ft = dual_solve(&f0, &pot, &opts).unwrap();
    assert!(duality_invariant(&rt, &ft, 1.0).unwrap() < 1e-9);
}

#[test]
fn zw_of_constant_vanish() {
    let gamma = 16.0;
    let grid = build_graded_grid(10.0, 64, 64, gamma).unwrap();
    let pot = annulus_potential(gamma).unwrap();
    let c = RadialProfile::new(grid.clone(), ProfileKind::Field, vec![2.5; grid.n_cells()]).unwrap();
    let (z, w) = z_and_w(&c, &pot).unwrap();
    assert!(z.abs() < 1e-20 && w == 0.0);
    let f = RadialProfile::cell_averages(grid, ProfileKind::Field, |r| r).unwrap();
    let (z, w) = z_and_w(&f, &pot).unwrap();
    assert!(z > 0.0 && w > 0.0);
}

#[test]
fn bernoulli_is_stable_near_zero_and_large() {
    assert!((bernoulli(0.0) - 1.0).abs() < 1e-15);
    for x in [1e-12, 1e-6, 0.3, 5.0, 40.0, 700.0] {
        // B(-x) - B(x) = x
        assert!((bernoulli(-x) - bernoulli(x) - x).abs() < 1e-12 * x.max(1.0));
        assert!(bernoulli(x) > 0.0);
    }
    assert!(bernoulli(-1000.0).is_finite());
}
