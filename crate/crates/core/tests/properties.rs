use std::sync::Arc;

use proptest::prelude::*;

use chemoscale::fokker_planck::bernoulli;
use chemoscale::grid::{from_mass_function, integrate, to_mass_function};
use chemoscale::harness::fit_loglog;
use chemoscale::quadrature::exp_integral_e1;
use chemoscale::reaction::invert_e1;
use chemoscale::tridiag::Tridiagonal;
use chemoscale::{annulus_potential, fp_solve, FpOptions, ProfileKind, RadialGrid, RadialProfile};

fn grid() -> Arc<RadialGrid> {
    chemoscale::build_graded_grid(12.0, 64, 64, 16.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn thomas_solves_dominant_systems(
        rows in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 3..60)
    ) {
        let n = rows.len();
        let mut m = Tridiagonal::zeros(n);
        for (i, &(l, u, b)) in rows.iter().enumerate() {
            if i > 0 { m.lower[i - 1] = l; }
            if i + 1 < n { m.upper[i] = u; }
            m.diag[i] = 2.5 + b;
        }
        let rhs: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let mut x = vec![0.0; n];
        let mut work = m.clone();
        work.solve(&rhs, &mut x);
        let mut ax = vec![0.0; n];
        m.apply(&x, &mut ax);
        for (a, b) in ax.iter().zip(&rhs) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_flow_keeps_mass_and_sign(
        amps in prop::collection::vec(0.0f64..5.0, 6),
        gamma in 4.0f64..80.0,
    ) {
        let g = grid();
        let rho0 = RadialProfile::cell_averages(g, ProfileKind::Density, |r| {
            let k = (r / 1.5) as usize;
            if k < amps.len() { amps[k] } else { 0.0 }
        }).unwrap();
        prop_assume!(integrate(&rho0).unwrap() > 1e-3);
        let tr = fp_solve(&rho0, &annulus_potential(gamma).unwrap(), &FpOptions::uniform(0.5, 4, 0.02)).unwrap();
        prop_assert!(tr.conservation_drift() < 1e-12);
        for f in &tr.frames {
            prop_assert!(f.values.iter().all(|&v| v >= -1e-13 * rho0.sup()));
        }
    }

    #[test]
    fn mass_function_inverts(vals in prop::collection::vec(0.0f64..10.0, 1..40)) {
        let edges: Vec<f64> = (0..=vals.len()).map(|k| (k as f64).powf(1.3)).collect();
        let g = Arc::new(RadialGrid::from_edges(edges).unwrap());
        let rho = RadialProfile::new(g, ProfileKind::Density, vals.clone()).unwrap();
        let back = from_mass_function(&to_mass_function(&rho).unwrap()).unwrap();
        for (a, b) in back.values().iter().zip(&vals) {
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + b));
        }
    }

    #[test]
    fn power_laws_are_recovered(p in -3.0f64..3.0, c in 0.01f64..100.0) {
        let xs = [2.0, 5.0, 11.0, 40.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| c * x.powf(p)).collect();
        let (slope, intercept, r2) = fit_loglog(&xs, &ys).unwrap();
        prop_assert!((slope - p).abs() < 1e-10);
        prop_assert!((intercept - c.ln()).abs() < 1e-9);
        prop_assert!(r2 > 1.0 - 1e-10 || p.abs() < 1e-6);
    }

    #[test]
    fn e1_inversion_round_trips(ly in -12.0f64..3.0) {
        let y = ly.exp();
        let x = invert_e1(y).unwrap();
        prop_assert!((exp_integral_e1(x).unwrap() - y).abs() < 1e-12 * y.max(1e-3) + 1e-14);
    }

    #[test]
    fn bernoulli_reflection(x in -300.0f64..300.0) {
        prop_assert!((bernoulli(-x) - bernoulli(x) - x).abs() < 1e-12 * x.abs().max(1.0));
    }
}
