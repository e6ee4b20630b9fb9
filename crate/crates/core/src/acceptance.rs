//! The ten acceptance criteria, each runnable on its own.
//!
//! Every check returns an [`Outcome`] with a one-line summary and a JSON
//! blob of the measured numbers.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::fokker_planck::{dual_solve, fp_solve, stationary_state, FpOptions};
use crate::fp_diagnostics::{duality_invariant, transport_front, verify_linfty};
use crate::grid::{build_graded_grid, integrate, GridSpec, ProfileKind, RadialGrid, RadialProfile};
use crate::harness::{baseline_options, fit_scaling, run_one, Axis, Response, SweepConfig, SweepRecord};
use crate::poincare::{best_constant, poincare_suite, Centering, Region};
use crate::potential::{ground_state_weight, AnnulusPotential};
use crate::reaction::{
    coupled_solve, diffusion_baseline_solve, half_time, initial_attractant, initial_shell, tau_d_lower_bound, verify_mass_comparison,
    CoupledOptions, GridPolicy, Params,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Outcome {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub summary: String,
    pub details: serde_json::Value,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} [{}]: {} ({})",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.summary
        )
    }
}

pub const CRITERIA: [(u8, &str); 10] = [
    (1, "scheme-exactness"),
    (2, "dissipation-identity"),
    (3, "duality-invariant"),
    (4, "poincare-suite"),
    (5, "sharpness-witness"),
    (6, "linfty-bound"),
    (7, "transport-front"),
    (8, "mass-comparison"),
    (9, "pass-through"),
    (10, "half-time-scalings"),
];

/// Accepts `7`, `c7` or the criterion name.
pub fn parse_id(s: &str) -> Option<u8> {
    let t = s.trim().trim_start_matches(['c', 'C']);
    if let Ok(k) = t.parse::<u8>() {
        return CRITERIA.iter().find(|c| c.0 == k).map(|c| c.0);
    }
    CRITERIA.iter().find(|c| c.1 == s.trim()).map(|c| c.0)
}

pub fn run(id: u8) -> Result<Outcome> {
    match id {
        1 => scheme_exactness(),
        2 => dissipation_identity(),
        3 => duality(),
        4 => poincare(),
        5 => sharpness(),
        6 => linfty(),
        7 => front(),
        8 => mass_comparison(),
        9 => pass_through(),
        10 => half_times(),
        _ => Err(Error::Config(format!("unknown criterion {id}"))),
    }
}

/// Runs every criterion; a criterion that errors counts as failed.
pub fn run_all() -> Vec<Outcome> {
    CRITERIA
        .iter()
        .map(|&(id, name)| {
            run(id).unwrap_or_else(|e| Outcome {
                id,
                name: name.into(),
                passed: false,
                summary: format!("error: {e}"),
                details: serde_json::Value::Null,
            })
        })
        .collect()
}

fn outcome(id: u8, passed: bool, summary: String, details: serde_json::Value) -> Outcome {
    let name = CRITERIA.iter().find(|c| c.0 == id).map(|c| c.1).unwrap_or("?");
    Outcome { id, name: name.into(), passed, summary, details }
}

fn spread(values: impl IntoIterator<Item = f64>) -> f64 {
    let (lo, hi) = values.into_iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

fn smooth_bump(center: f64, half_width: f64) -> impl Fn(f64) -> f64 {
    move |r: f64| {
        let s = (r - center) / half_width;
        if s.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - s * s)).exp()
        }
    }
}

fn density_bump(grid: Arc<RadialGrid>, center: f64, half_width: f64, mass: f64) -> Result<RadialProfile> {
    let p = RadialProfile::cell_averages(grid, ProfileKind::Density, smooth_bump(center, half_width))?;
    let m = integrate(&p)?;
    p.scaled(mass / m)
}

fn scheme_exactness() -> Result<Outcome> {
    let mut worst_step = 0.0f64;
    let mut worst_mass = 0.0f64;
    let mut rows = Vec::new();
    for gamma in [16.0, 64.0] {
        let grid = build_graded_grid(20.0, 256, 200, gamma)?;
        let pot = AnnulusPotential::new(gamma)?;
        let rho_s = stationary_state(1.0, &pot, grid.clone())?;
        let dt = 1e-3;
        let times: Vec<f64> = (1..=200).map(|k| k as f64 * dt).collect();
        let tr = fp_solve(&rho_s, &pot, &FpOptions::at(times, dt))?;
        let scale = rho_s.sup();
        let mut step_dev = 0.0f64;
        for w in tr.frames.windows(2) {
            let d = w[0].values.iter().zip(&w[1].values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            step_dev = step_dev.max(d / scale / (tr.steps as f64 / 200.0));
        }
        let bump = density_bump(grid.clone(), 5.0, 1.0, 1.0)?;
        let tb = fp_solve(&bump, &pot, &FpOptions::uniform(10.0, 100, 0.01))?;
        let drift = tb.conservation_drift();
        worst_step = worst_step.max(step_dev);
        worst_mass = worst_mass.max(drift);
        rows.push(json!({"gamma": gamma, "stationary_change_per_step": step_dev, "mass_drift_per_time": drift}));
    }
    let passed = worst_step <= 1e-12 && worst_mass <= 1e-10;
    Ok(outcome(
        1,
        passed,
        format!("stationary change/step {worst_step:.2e} <= 1e-12, mass drift/time {worst_mass:.2e} <= 1e-10"),
        json!(rows),
    ))
}

/// Largest `|dZ/dt + 2W| / W` over consecutive frames, one step apart.
fn dissipation_error(dt: f64, t_end: f64) -> Result<(f64, f64)> {
    let gamma = 32.0;
    let grid = build_graded_grid(30.0, 256, 300, gamma)?;
    let pot = AnnulusPotential::new(gamma)?;
    let f0 = RadialProfile::cell_averages(grid.clone(), ProfileKind::Field, smooth_bump(5.0, 1.0))?;
    let n = (t_end / dt).round() as usize;
    let times: Vec<f64> = (1..=n).map(|k| k as f64 * dt).collect();
    let tr = dual_solve(&f0, &pot, &FpOptions::at(times, dt))?;
    let mut worst = 0.0f64;
    for w in tr.frames.windows(2) {
        let dzdt = (w[1].z - w[0].z) / (w[1].t - w[0].t);
        worst = worst.max((dzdt + 2.0 * w[1].w).abs() / w[1].w);
    }
    let dt_eff = tr.dt_used.iter().cloned().fold(0.0, f64::max);
    Ok((worst, dt_eff))
}

fn dissipation_identity() -> Result<Outcome> {
    let t_end = 0.5;
    let (e_ref, dt_ref) = dissipation_error(2e-4, t_end)?;
    let (e_fine, dt_fine) = dissipation_error(1e-4, t_end)?;
    let ratio = e_fine / e_ref;
    let passed = e_ref <= 0.02 && ratio <= 0.6;
    Ok(outcome(
        2,
        passed,
        format!("max |dZ/dt + 2W|/W = {e_ref:.3e} at dt {dt_ref:.1e}, {e_fine:.3e} at dt {dt_fine:.1e} (ratio {ratio:.3})"),
        json!({"reference": e_ref, "refined": e_fine, "ratio": ratio, "dt": [dt_ref, dt_fine]}),
    ))
}

fn duality_deviation(n_core: usize, n_far: usize, dt: f64) -> Result<f64> {
    let gamma = 32.0;
    let grid = build_graded_grid(30.0, n_core, n_far, gamma)?;
    let pot = AnnulusPotential::new(gamma)?;
    let rho0 = density_bump(grid.clone(), 3.0, 1.0, 1.0)?;
    let f0 = RadialProfile::cell_averages(grid, ProfileKind::Field, |r| (-(r - 2.0).powi(2)).exp())?;
    let t = 2.0;
    let times: Vec<f64> = (1..=40).map(|k| k as f64 * t / 40.0).collect();
    let fwd = fp_solve(&rho0, &pot, &FpOptions::at(times.clone(), dt))?;
    let dual = dual_solve(&f0, &pot, &FpOptions::at(times, dt))?;
    duality_invariant(&fwd, &dual, t)
}

fn duality() -> Result<Outcome> {
    let d_ref = duality_deviation(256, 300, 0.01)?;
    let d_fine = duality_deviation(512, 600, 0.005)?;
    let order = (d_ref / d_fine).log2();
    let roundoff = d_ref <= 1e-9 && d_fine <= 1e-9;
    let passed = d_ref <= 1e-3 && (order >= 1.0 || roundoff);
    Ok(outcome(
        3,
        passed,
        format!(
            "deviation {d_ref:.2e} (ref), {d_fine:.2e} (refined); order {order:.2}{}",
            if roundoff { ", at roundoff" } else { "" }
        ),
        json!({"reference": d_ref, "refined": d_fine, "order": order, "roundoff": roundoff}),
    ))
}

pub const POINCARE_GAMMAS: [f64; 4] = [16.0, 32.0, 64.0, 128.0];

fn poincare() -> Result<Outcome> {
    let rows = poincare_suite(&POINCARE_GAMMAS, 3.0, false)?;
    let mut ids: Vec<(String, String)> = rows.iter().map(|r| (r.weight_kind.clone(), r.inequality_id.clone())).collect();
    ids.sort();
    ids.dedup();
    let mut failing = Vec::new();
    let mut table = Vec::new();
    for (kind, id) in &ids {
        let cs: Vec<f64> =
            rows.iter().filter(|r| &r.weight_kind == kind && &r.inequality_id == id).map(|r| r.fitted_c).collect();
        let s = spread(cs.iter().cloned());
        if !(s < 2.0) {
            failing.push(format!("{id} x{s:.1}"));
        }
        table.push(json!({"weight": kind, "inequality": id, "constants": cs, "spread": s}));
    }
    let passed = failing.is_empty();
    let summary = if passed {
        format!("{} inequalities, all constants stable within x2", ids.len())
    } else {
        format!("{} of {} vary by >= x2: {}", failing.len(), ids.len(), failing.join(", "))
    };
    Ok(outcome(4, passed, summary, json!(table)))
}

fn sharpness() -> Result<Outcome> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for g in POINCARE_GAMMAS {
        let w = ground_state_weight(g)?;
        let radial = best_constant(&w, Region::Far, Centering::Endpoint, 0)?;
        xs.push(g);
        ys.push(radial.value);
    }
    let (slope, _, r2) = crate::harness::fit_loglog(&xs, &ys)?;
    let passed = (slope + 2.0).abs() <= 0.3;
    Ok(outcome(
        5,
        passed,
        format!("far-field extremal ratio slope {slope:.3} in [-2.3, -1.7], R2 {r2:.4}"),
        json!({"gamma": xs, "sup_I3_over_J3": ys, "slope": slope, "r2": r2}),
    ))
}

fn linfty() -> Result<Outcome> {
    let mut cs = Vec::new();
    let mut rows = Vec::new();
    for gamma in [16.0, 64.0] {
        let grid = build_graded_grid(40.0, 256, 300, gamma)?;
        let pot = AnnulusPotential::new(gamma)?;
        let rho0 = density_bump(grid.clone(), 0.0, 0.05, 1.0)?;
        let times: Vec<f64> = (0..=60).map(|k| 0.01 * 1000f64.powf(k as f64 / 60.0)).collect();
        let tr = fp_solve(&rho0, &pot, &FpOptions::at(times, 2e-4))?;
        let rep = verify_linfty(&tr, 0.01, 10.0)?;
        cs.push(rep.c_fit);
        rows.push(json!({"gamma": gamma, "c_fit": rep.c_fit, "laplacian_min_over_gamma": rep.laplacian_min_over_gamma}));
    }
    let s = spread(cs.iter().cloned());
    let passed = s < 2.0;
    Ok(outcome(
        6,
        passed,
        format!("fitted C = {:.4} (gamma 16), {:.4} (gamma 64); spread x{s:.2} < x2", cs[0], cs[1]),
        json!(rows),
    ))
}

pub const FRONT_STATION: f64 = 5.0 / 7.0;
pub const FRONT_LEVEL: f64 = 0.25;

/// Plateau datum: 1 on `r <= 6/7`, smooth decay to 0 at `0.95`.
pub fn front_datum(r: f64) -> f64 {
    let (a, b) = (6.0 / 7.0, 0.95);
    if r <= a {
        1.0
    } else if r >= b {
        0.0
    } else {
        let s = (r - a) / (b - a);
        let u = (-1.0 / (1.0 - s)).exp();
        let v = (-1.0 / s).exp();
        u / (u + v)
    }
}

fn front() -> Result<Outcome> {
    let mut all = Vec::new();
    let mut station_min = f64::INFINITY;
    let mut rows = Vec::new();
    for gamma in [32.0, 64.0, 128.0] {
        let grid = GridSpec::new(120.0, 256, 1200, gamma).with_breakpoints(&[FRONT_STATION, 6.0 / 7.0]).build()?;
        let pot = AnnulusPotential::new(gamma)?;
        let f0 = RadialProfile::from_fn(grid, ProfileKind::Field, front_datum)?;
        let mut times: Vec<f64> = (1..10).map(|k| 0.1 * k as f64).collect();
        times.extend((1..=50).map(|k| k as f64));
        let tr = dual_solve(&f0, &pot, &FpOptions::at(times, 0.01))?;
        let rep = transport_front(&tr, FRONT_LEVEL, FRONT_STATION, (1.0, 50.0))?;
        station_min = station_min.min(rep.station_min);
        all.extend(rep.samples.iter().map(|s| s.2));
        rows.push(json!({"gamma": gamma, "c_radius": rep.c_radius, "spread": rep.spread, "station_min": rep.station_min}));
    }
    let s = spread(all.iter().cloned());
    let c_radius = all.iter().cloned().fold(f64::INFINITY, f64::min);
    let passed = s < 2.0 && station_min >= 0.48;
    Ok(outcome(
        7,
        passed,
        format!(
            "c_level {FRONT_LEVEL}, c_radius {c_radius:.4}, R/sqrt(1+gamma t) spread x{s:.2} < x2; station min {station_min:.4} >= 0.48"
        ),
        json!({"per_gamma": rows, "spread": s, "station_min": station_min}),
    ))
}

/// The reference coupled run.
pub fn reference_params() -> Params {
    Params { chi: 8.0, eps: 0.1, theta: 8.0, l: 10.0, m0: 1e4 }
}

fn mass_comparison() -> Result<Outcome> {
    let p = reference_params();
    let policy = GridPolicy::default();
    let run = |policy: &GridPolicy| -> Result<(crate::reaction::CoupledTrajectory, f64)> {
        let grid = policy.build(&p)?;
        let rho1 = initial_shell(grid.clone(), p.l, p.m0)?;
        let rho2 = initial_attractant(grid.clone(), p.theta)?;
        let mut opts = CoupledOptions::new(10.0, 0.01, 0.05);
        opts.stop_after_half_time = Some((0.5, 0.0));
        let tr = coupled_solve(&p, &rho1, &rho2, &opts)?;
        let tau = half_time(&tr, 0.5).tau.unwrap_or(f64::NAN);
        Ok((tr, tau))
    };
    let (tr, tau) = run(&policy)?;
    let rep = verify_mass_comparison(&tr, 0.01)?;
    let doubled = GridPolicy { r_max_factor: 2.0 * policy.r_max_factor, r_max_pad: 2.0 * policy.r_max_pad, ..policy };
    let (_, tau_wide) = run(&doubled)?;
    let sensitivity = (tau_wide - tau).abs() / tau;
    let passed = rep.violations == 0 && tr.max_budget_mismatch <= 1e-8;
    Ok(outcome(
        8,
        passed,
        format!(
            "{} violations over {} frames (worst margin {:.3e}, tol {:.0e}); budget mismatch {:.1e}; tau_C shift {:.1e} with doubled r_max",
            rep.violations, rep.frames_checked, rep.worst_margin, rep.tolerance, tr.max_budget_mismatch, sensitivity
        ),
        json!({"report": rep, "budget_mismatch": tr.max_budget_mismatch, "tau_c": tau, "tau_c_doubled_rmax": tau_wide}),
    ))
}

fn sweep_records(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    let tuples = cfg.tuples()?;
    Ok(tuples.iter().enumerate().map(|(k, p)| run_one(cfg, k, p).record).collect())
}

fn pass_through() -> Result<Outcome> {
    let mut cfg = SweepConfig::new(vec![10.0], vec![32.0, 64.0, 128.0], vec![0.1], vec![10.0]);
    cfg.baseline = false;
    let recs = sweep_records(&cfg)?;
    let cs: Vec<f64> = recs.iter().map(|r| r.passthrough_c.unwrap_or(f64::NAN)).collect();
    let s = spread(cs.iter().cloned());
    let positive = cs.iter().all(|c| *c > 0.0);
    let passed = positive && s < 2.0;
    Ok(outcome(
        9,
        passed,
        format!(
            "fitted c = {} over gamma 32/64/128; spread x{s:.2} (needs < x2)",
            cs.iter().map(|c| format!("{c:.3}")).collect::<Vec<_>>().join("/")
        ),
        json!({"records": recs}),
    ))
}

/// `E1` from its power series (`x <= 1`) or continued fraction.
pub fn e1_series_cf(x: f64) -> f64 {
    const EULER: f64 = 0.577_215_664_901_532_9;
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
        -EULER - x.ln() - sum
    } else {
        // modified Lentz on e^{-x} / (x + 1 - 1/(x + 3 - 4/(x + 5 - ...)))
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

pub const SWEEP_L: [f64; 3] = [10.0, 20.0, 40.0];
pub const SWEEP_GAMMA: [f64; 3] = [32.0, 64.0, 128.0];

fn half_times() -> Result<Outcome> {
    let b = 100.0;
    let mut cfg = SweepConfig::new(SWEEP_L.to_vec(), SWEEP_GAMMA.to_vec(), vec![0.1], vec![10.0]);
    cfg.checks = false;
    let recs = sweep_records(&cfg)?;
    let mut notes = Vec::new();
    let mut ok = true;

    // (a) slope in L at each gamma
    let mut slopes_l = Vec::new();
    for g in SWEEP_GAMMA {
        let sub: Vec<SweepRecord> = recs.iter().filter(|r| r.gamma == g).cloned().collect();
        let fit = fit_scaling(&sub, Response::TauC, Axis::L)?;
        ok &= (1.7..=2.3).contains(&fit.slope);
        slopes_l.push(fit.slope);
    }
    notes.push(format!(
        "(a) L-slopes {}",
        slopes_l.iter().map(|s| format!("{s:.2}")).collect::<Vec<_>>().join("/")
    ));

    // (b) slope in gamma at L = 40
    let sub: Vec<SweepRecord> = recs.iter().filter(|r| r.l == 40.0).cloned().collect();
    let fit_g = fit_scaling(&sub, Response::TauC, Axis::Gamma)?;
    ok &= (-1.3..=-0.7).contains(&fit_g.slope);
    notes.push(format!("(b) gamma-slope {:.2}", fit_g.slope));

    // (c) baseline tau_D log(M0 eps) / L^2 across M0 eps
    let mut worst_c = 0.0f64;
    let mut baseline_rows = Vec::new();
    for l in SWEEP_L {
        let mut vals = Vec::new();
        for m0eps in [1e2, 1e3, 1e4] {
            let p = Params::new(8.0, 0.1, 8.0, l, m0eps / 0.1)?;
            let grid = GridPolicy::default().build(&p)?;
            let rho1 = initial_shell(grid.clone(), l, p.m0)?;
            let rho2 = initial_attractant(grid, p.theta)?;
            let tr = diffusion_baseline_solve(&p, &rho1, &rho2, &baseline_options(&p, &cfg.time))?;
            let tau = half_time(&tr, 0.5).tau.ok_or_else(|| Error::TrajectoryTooShort(format!("tau_D at L={l}")))?;
            let v = tau * m0eps.ln() / (l * l);
            vals.push(v);
            baseline_rows.push(json!({"L": l, "M0eps": m0eps, "tau_D": tau, "normalized": v}));
        }
        worst_c = worst_c.max(spread(vals));
    }
    ok &= worst_c < 3.0;
    notes.push(format!("(c) spread x{worst_c:.2}"));

    // (d) tau_C < tau_D / 5 in the regime
    let mut regime_cfg = SweepConfig::new(SWEEP_L.to_vec(), vec![128.0], vec![0.1], vec![100.0]);
    regime_cfg.checks = false;
    let mut pool: Vec<SweepRecord> = recs.clone();
    pool.extend(sweep_records(&regime_cfg)?);
    let in_regime: Vec<&SweepRecord> = pool.iter().filter(|r| r.in_regime(b)).collect();
    let mut worst_d = 0.0f64;
    for r in &in_regime {
        match (r.tau_c, r.tau_d) {
            (Some(c), Some(d)) => worst_d = worst_d.max(c / d),
            _ => worst_d = f64::INFINITY,
        }
    }
    ok &= !in_regime.is_empty() && worst_d < 0.2;
    notes.push(format!("(d) {} tuples in regime, max tau_C/tau_D {worst_d:.3}", in_regime.len()));

    // analytic bound inversion against an independent E1
    let mut worst_inv = 0.0f64;
    for m0eps in [1e2, 1e3, 1e4, 1e6] {
        let p = Params::new(8.0, 0.1, 8.0, 20.0, m0eps / 0.1)?;
        let bound = tau_d_lower_bound(&p, 1.0)?;
        let x = bound.c * p.l * p.l / bound.tau;
        worst_inv = worst_inv.max((e1_series_cf(x) - bound.rhs).abs() / bound.rhs);
    }
    ok &= worst_inv <= 1e-6;
    notes.push(format!("E1 inversion rel. error {worst_inv:.1e}"));

    Ok(outcome(
        10,
        ok,
        notes.join("; "),
        json!({"records": pool, "baseline": baseline_rows, "slopes_L": slopes_l, "slope_gamma": fit_g.slope}),
    ))
}
