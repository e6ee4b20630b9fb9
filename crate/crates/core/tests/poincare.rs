use std::f64::consts::PI;

use chemoscale::poincare::{
    best_constant, block_constants, mode_functionals, poincare_suite, standard_battery, Centering, ModeProfile, Parity,
    PoincareWorkbench, RadialShape, Region,
};
use chemoscale::{ground_state_weight, WeightSpec};

fn bench(gamma: f64, extra: &[f64]) -> (WeightSpec, PoincareWorkbench) {
    let w = ground_state_weight(gamma).unwrap();
    (w, PoincareWorkbench::with_default_grid(w, extra).unwrap())
}

/// `int g(r, phi) w(r) dx` by tensor quadrature in `(r, phi)`.
fn plane_integral(w: &WeightSpec, r_max: f64, g: impl Fn(f64, f64) -> f64) -> f64 {
    let (nr, nphi) = (40_000, 32);
    let dr = r_max / nr as f64;
    let dphi = 2.0 * PI / nphi as f64;
    let mut sum = 0.0;
    for i in 0..nr {
        let r = (i as f64 + 0.5) * dr;
        let wr = w.log_weight(r).exp();
        for j in 0..nphi {
            sum += g(r, j as f64 * dphi) * wr * r * dr * dphi;
        }
    }
    sum
}

#[test]
fn angular_modes_follow_parseval() {
    let (w, b) = bench(16.0, &[]);
    let a = RadialShape::Regularized { n: 2, inner: Box::new(RadialShape::Gaussian { center: 1.0, width: 0.5 }) };
    let f = mode_functionals(&b, &ModeProfile::new(2, Parity::Sin, a.clone()), None).unwrap();
    let i_direct = plane_integral(&w, 8.0, |r, phi| (a.eval(r).0 * (2.0 * phi).sin()).powi(2));
    let j_direct = plane_integral(&w, 8.0, |r, phi| {
        let (v, d) = a.eval(r);
        let gr = d * (2.0 * phi).sin();
        let gphi = 2.0 * v * (2.0 * phi).cos() / r;
        (gr * gr + gphi * gphi) * (1.0 + r * r)
    });
    assert!((f.i_bar - i_direct).abs() < 1e-5 * i_direct, "{} vs {i_direct}", f.i_bar);
    assert!((f.j_bl - j_direct).abs() < 1e-5 * j_direct, "{} vs {j_direct}", f.j_bl);

    let c = RadialShape::Gaussian { center: 0.5, width: 1.0 };
    let f0 = mode_functionals(&b, &ModeProfile::radial(c.clone()), None).unwrap();
    // the weight decays like r^{-4}, so the mean needs the whole workbench
    let mass = plane_integral(&w, 60.0, |_, _| 1.0);
    let mean = plane_integral(&w, 60.0, |r, _| c.eval(r).0) / mass;
    let var = plane_integral(&w, 60.0, |r, _| (c.eval(r).0 - mean).powi(2));
    assert!((f0.i_bar - var).abs() < 1e-5 * var);
}

#[test]
fn modes_of_different_order_are_orthogonal() {
    let (_, b) = bench(32.0, &[]);
    let m1 = ModeProfile::new(1, Parity::Cos, RadialShape::Regularized { n: 1, inner: Box::new(RadialShape::Gaussian { center: 1.0, width: 1.0 }) });
    let m0 = ModeProfile::radial(RadialShape::Sinusoid { k: 2.0, decay: 0.25, cosine: true });
    let a = b.functionals(&[m0.clone()], None).unwrap();
    let c = b.functionals(&[m1.clone()], None).unwrap();
    let ac = b.functionals(&[m0, m1], None).unwrap();
    for (x, y, z) in [(a.i(), c.i(), ac.i()), (a.j1 + a.j2 + a.j3, c.j1 + c.j2 + c.j3, ac.j1 + ac.j2 + ac.j3)] {
        assert!((x + y - z).abs() < 1e-12 * z);
    }
}

#[test]
fn constants_are_scale_and_shift_invariant() {
    let (w, b) = bench(24.0, &[]);
    let base = RadialShape::Annulus { inner: 0.5, outer: 2.0, width: 0.1 };
    let f = mode_functionals(&b, &ModeProfile::radial(base.clone()), None).unwrap();
    let scaled = RadialShape::Scaled { scale: 3.0, inner: Box::new(base.clone()) };
    let g = mode_functionals(&b, &ModeProfile::radial(scaled), None).unwrap();
    assert!((g.i() - 9.0 * f.i()).abs() < 1e-12 * g.i());
    let (cf, cg) = (block_constants(&f, w.gamma), block_constants(&g, w.gamma));
    for (x, y) in [(cf.c1, cg.c1), (cf.c2, cg.c2), (cf.c3, cg.c3)] {
        assert!((x - y).abs() < 1e-10 * x.abs().max(1e-300));
    }
    // adding a constant leaves every radial functional unchanged
    let shifted = b
        .functionals(&[ModeProfile::radial(base), ModeProfile::radial(RadialShape::Constant(5.0))], None)
        .unwrap();
    assert!((shifted.i() - f.i()).abs() < 1e-6 * f.i());
    assert!((shifted.i_bar - f.i_bar).abs() < 1e-6 * f.i_bar);
}

#[test]
fn truncation_is_monotone_in_radius() {
    let radii = [1.5, 2.0, 3.0, 5.0, 10.0];
    let (_, b) = bench(16.0, &radii);
    let m = ModeProfile::radial(RadialShape::Gaussian { center: 2.0, width: 1.0 });
    let full = mode_functionals(&b, &m, None).unwrap();
    let mut prev = (0.0, 0.0);
    for r in radii {
        let t = mode_functionals(&b, &m, Some(r)).unwrap().truncated.unwrap();
        assert!(t.i3 >= prev.0 && t.j3 >= prev.1);
        assert!(t.i3 <= full.i3 * (1.0 + 1e-12) && t.j3 <= full.j3 * (1.0 + 1e-12));
        prev = (t.i3, t.j3);
    }
    assert!(b.functionals(&[m], Some(0.5)).is_err());
}

#[test]
fn battery_never_beats_the_extremal_quotient() {
    for gamma in [16.0, 64.0] {
        let (w, b) = bench(gamma, &[]);
        let sup1 = best_constant(&w, Region::Core, Centering::Endpoint, 0).unwrap().value;
        let sup3 = best_constant(&w, Region::Far, Centering::Endpoint, 0).unwrap().value;
        for item in standard_battery().iter().filter(|it| it.modes.iter().all(|m| m.n == 0)) {
            let f = b.functionals(&item.modes, None).unwrap();
            assert!(f.i1 <= sup1 * f.j1 * (1.0 + 1e-6) + 1e-300, "{} core", item.id);
        }
        // ramps that vanish on [0, r2] are admissible for the far quotient
        for a in [0.05, 0.25, 1.0, 4.0] {
            let ramp = RadialShape::Tabulated { r: vec![0.0, w.r2, w.r2 + a, 50.0], v: vec![0.0, 0.0, 1.0, 1.0] };
            let f = mode_functionals(&b, &ModeProfile::radial(ramp), None).unwrap();
            assert!(f.i3 <= sup3 * f.j3 * (1.0 + 1e-3), "ramp {a}: {} > {}", f.i3 / f.j3, sup3);
        }
        assert!(sup1 > 0.0 && sup3 > 0.0);
    }
}

#[test]
fn suite_reports_every_inequality() {
    let rows = poincare_suite(&[16.0], 3.0, true).unwrap();
    let ids: Vec<&str> = rows.iter().map(|r| r.inequality_id.as_str()).collect();
    for id in ["block1", "block2", "block3", "combined", "combined_mean", "truncated_block3", "truncated_combined", "power", "power_bl"] {
        assert!(ids.contains(&id), "missing {id}");
    }
    for r in &rows {
        assert!(r.fitted_c.is_finite() && r.fitted_c > 0.0, "{r:?}");
        if let Some(e) = r.extremal_ratio {
            // angular items are not admissible for the radial quotient
            if r.inequality_id == "block1" && r.battery_id.ends_with("-n0") {
                assert!(r.fitted_c <= e * (1.0 + 1e-6));
            }
        }
    }
}
