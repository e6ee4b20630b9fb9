use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use chemoscale::grid::integrate;
use chemoscale::potential::InducedPotential;
use chemoscale::potential::ZeroPotential;
use chemoscale::reaction::{
    initial_attractant, initial_shell, invert_e1, subsolution_half_time, subsolution_oracle, tau_d_rhs, CoupledOptions,
    GridPolicy,
};
use chemoscale::{
    coupled_solve, diffusion_baseline_solve, fp_solve, half_time, tau_d_lower_bound, FpOptions, Params, ProfileKind,
    RadialGrid, RadialProfile,
};

fn small_setup(p: &Params) -> (Arc<RadialGrid>, RadialProfile, RadialProfile) {
    let grid = GridPolicy { n_core: 128, h_far: 0.1, r_max_factor: 2.5, r_max_pad: 10.0 }.build(p).unwrap();
    let rho1 = initial_shell(grid.clone(), p.l, p.m0).unwrap();
    let rho2 = initial_attractant(grid.clone(), p.theta).unwrap();
    (grid, rho1, rho2)
}

#[test]
fn without_reaction_rho1_follows_the_frozen_drift() {
    let p = Params::new(2.0, 0.0, 8.0, 4.0, 50.0).unwrap();
    let (_, rho1, rho2) = small_setup(&p);
    let opts = CoupledOptions::new(1.0, 0.1, 0.01);
    let tr = coupled_solve(&p, &rho1, &rho2, &opts).unwrap();
    let pot = InducedPotential::new(&rho2, p.chi).unwrap();
    let times: Vec<f64> = (1..=10).map(|k| k as f64 * 0.1).collect();
    let fp = fp_solve(&rho1, &pot, &FpOptions::at(times, 0.01)).unwrap();
    let sup = rho1.sup();
    for (a, b) in tr.frames.iter().zip(&fp.frames) {
        assert!((a.t - b.t).abs() < 1e-12);
        for (x, y) in a.rho1.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-8 * sup);
        }
        assert_eq!(a.rho2, rho2.values());
    }
}

#[test]
fn uniform_data_follow_the_reaction_ode() {
    // u' = v' = -eps u v with u - v = A - B:
    // v(t) = (A - B) B / (A e^{(A-B) eps t} - B)
    let grid = Arc::new(RadialGrid::uniform(2.0, 40).unwrap());
    let (a, b, eps) = (3.0, 1.0, 0.5);
    // theta chosen so that pi theta is the initial attractant mass
    let p = Params::new(0.0, eps, b * 4.0, 1.0, a * 4.0 * PI).unwrap();
    let rho1 = RadialProfile::new(grid.clone(), ProfileKind::Density, vec![a; 40]).unwrap();
    let rho2 = RadialProfile::new(grid, ProfileKind::Density, vec![b; 40]).unwrap();
    let tr = diffusion_baseline_solve(&p, &rho1, &rho2, &CoupledOptions::new(2.0, 0.05, 1e-3)).unwrap();
    let k = (a - b) * eps;
    for fr in &tr.frames {
        let v = (a - b) * b / (a * (k * fr.t).exp() - b);
        for x in &fr.rho2 {
            assert!((x - v).abs() < 1e-6, "t={} {x} vs {v}", fr.t);
        }
        for x in &fr.rho1 {
            assert!((x - (v + a - b)).abs() < 1e-6);
        }
    }
    let tau = half_time(&tr, 0.5).tau.unwrap();
    let exact = ((2.0 * a - b) / a).ln() / k;
    assert!((tau - exact).abs() < 1e-5, "{tau} vs {exact}");
    // the small-attractant limit is ln 2 / (eps A)
    assert!((exact - LN_2 / (eps * a)).abs() < 0.2 * exact);
}

#[test]
fn budget_and_exponential_identities() {
    let p = Params::from_gamma(32.0, 8.0, 0.1, 6.0, 10.0).unwrap();
    let (_, rho1, rho2) = small_setup(&p);
    let mut opts = CoupledOptions::new(3.0, 0.05, 0.02);
    opts.stop_after_half_time = Some((0.5, 0.2));
    let tr = coupled_solve(&p, &rho1, &rho2, &opts).unwrap();
    assert!(tr.max_budget_mismatch < 1e-8, "{}", tr.max_budget_mismatch);
    assert!(tr.max_exponential_mismatch < 1e-10);
    let m0 = tr.mass_series[0];
    for w in tr.mass_series.windows(2) {
        assert!(w[1].2 <= w[0].2 * (1.0 + 1e-14));
        assert!(w[1].1 <= w[0].1 * (1.0 + 1e-14));
    }
    for &(_, m1, m2) in &tr.mass_series {
        assert!(((m1 - m0.1) - (m2 - m0.2)).abs() < 1e-8 * m0.2);
    }
    let tau = half_time(&tr, 0.5).tau.unwrap();
    assert!(tr.t_end() >= tau + 0.2 - 1e-9 && tr.t_end() < tau + 0.2 + 0.05 + 1e-9);
    for f in tr.frames.iter().flat_map(|f| f.rho1.iter().chain(&f.rho2)) {
        assert!(*f >= 0.0);
    }
}

#[test]
fn half_time_is_monotone_in_fraction() {
    let p = Params::from_gamma(16.0, 8.0, 0.1, 5.0, 10.0).unwrap();
    let (_, rho1, rho2) = small_setup(&p);
    let tr = coupled_solve(&p, &rho1, &rho2, &CoupledOptions::new(4.0, 0.05, 0.02)).unwrap();
    let mut prev = 0.0;
    for f in [0.1, 0.25, 0.5, 0.75] {
        let t = half_time(&tr, f).tau.unwrap();
        assert!(t > prev, "fraction {f}");
        prev = t;
    }
    assert_eq!(half_time(&tr, 0.0).tau, Some(0.0));
    assert!(half_time(&tr, 1.5).tau.is_none());
}

#[test]
fn chemotaxis_speeds_up_consumption() {
    let p = Params::from_gamma(32.0, 8.0, 0.1, 6.0, 10.0).unwrap();
    let (_, rho1, rho2) = small_setup(&p);
    let mut opts = CoupledOptions::new(80.0, 0.1, 0.05);
    opts.stop_after_half_time = Some((0.5, 0.0));
    let c = coupled_solve(&p, &rho1, &rho2, &opts).unwrap();
    let d = diffusion_baseline_solve(&p, &rho1, &rho2, &opts).unwrap();
    let (tc, td) = (half_time(&c, 0.5).tau.unwrap(), half_time(&d, 0.5).tau.unwrap());
    assert!(tc < td, "{tc} vs {td}");
}

#[test]
fn subsolution_heat_flow_matches_the_solver() {
    let p = Params::new(0.0, 0.1, 8.0, 4.0, 100.0).unwrap();
    let (_, rho1, rho2) = small_setup(&p);
    let times = [0.5, 1.0, 2.0];
    let sub = subsolution_oracle(&p, &rho1, &rho2, &times).unwrap();
    assert!(sub.support_ok);
    let heat = fp_solve(&rho1, &ZeroPotential, &FpOptions::at(times.to_vec(), 1e-3)).unwrap();
    let m0 = integrate(&rho1).unwrap();
    for (k, g1) in sub.g1.iter().enumerate() {
        let g = RadialProfile::new(sub.grid.clone(), ProfileKind::Density, g1.clone()).unwrap();
        assert!((integrate(&g).unwrap() - m0).abs() < 1e-4 * m0, "t={}", times[k]);
        let sup = heat.frames[k + 1].sup;
        for (x, y) in g1.iter().zip(&heat.frames[k + 1].values) {
            assert!((x - y).abs() < 5e-3 * sup);
        }
    }
}

#[test]
fn baseline_dominates_the_subsolution() {
    let p = Params::new(0.0, 0.1, 8.0, 4.0, 400.0).unwrap();
    let (_, rho1, rho2) = small_setup(&p);
    let times: Vec<f64> = (1..=8).map(|k| k as f64 * 0.5).collect();
    let sub = subsolution_oracle(&p, &rho1, &rho2, &times).unwrap();
    let tr = diffusion_baseline_solve(&p, &rho1, &rho2, &CoupledOptions::new(4.0, 0.5, 0.005)).unwrap();
    for (k, g2) in sub.g2.iter().enumerate() {
        let fr = &tr.frames[k + 1];
        assert!((fr.t - times[k]).abs() < 1e-12);
        for (x, y) in fr.rho2.iter().zip(g2) {
            assert!(*x >= y - 1e-3 * p.theta, "t={} {x} < {y}", fr.t);
        }
        assert!(fr.mass2 >= sub.mass2[k].1 - 1e-3 * PI * p.theta);
    }
    let m2_0 = integrate(&rho2).unwrap();
    let (tb, ts) = (half_time(&tr, 0.25).tau, subsolution_half_time(&sub, p.theta, 0.25, m2_0));
    if let (Some(tb), Some(ts)) = (tb, ts) {
        assert!(tb >= ts - 0.05);
    }
}

#[test]
fn tau_d_bound_closed_form() {
    // E1(1) = 0.219383934395520..., so M0 eps = 4 pi ln 2 / E1(1) gives x* = 1
    let e1_one = 0.219_383_934_395_520_27;
    let m0_eps = 4.0 * PI * LN_2 / e1_one;
    let p = Params::new(1.0, 0.1, 8.0, 7.0, m0_eps / 0.1).unwrap();
    assert!((tau_d_rhs(p.m0, p.eps) - e1_one).abs() < 1e-14);
    for c in [0.5, 1.0, 3.0] {
        let b = tau_d_lower_bound(&p, c).unwrap();
        assert!((b.x_star - 1.0).abs() < 1e-12);
        assert!((b.tau - c * 49.0).abs() < 1e-9);
    }
    // E1 is decreasing, so a larger M0 eps means a larger x* and a shorter bound
    let q = Params { m0: p.m0 * 100.0, ..p };
    assert!(tau_d_lower_bound(&q, 1.0).unwrap().tau < 49.0);
    assert!(invert_e1(0.0).is_err());
    assert!(tau_d_lower_bound(&Params { eps: 0.0, ..p }, 1.0).is_err());
}

#[test]
fn parameter_maps() {
    let p = Params::from_gamma(64.0, 8.0, 0.1, 20.0, 100.0).unwrap();
    assert!((p.gamma() - 64.0).abs() < 1e-12);
    assert!((p.m0 * p.eps / p.gamma() - 100.0).abs() < 1e-9);
    let r = p.regime(100.0);
    assert!(r.m0_eps_over_gamma && !r.gamma && r.m0_over_theta && !r.all());
    assert!(Params::from_gamma(128.0, 8.0, 0.1, 20.0, 100.0).unwrap().regime(100.0).all());
    assert!(Params::new(1.0, 0.1, 0.0, 1.0, 1.0).is_err());
    assert!(Params::new(-1.0, 0.1, 1.0, 1.0, 1.0).is_err());
}
