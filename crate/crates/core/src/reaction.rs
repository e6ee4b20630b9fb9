//! The coupled chemotaxis-reaction system in radial symmetry
//!
//! ```text
//! rho1_t = Lap rho1 - chi div(rho1 grad (-Lap)^{-1} rho2) - eps rho1 rho2
//! rho2_t = -eps rho1 rho2
//! ```
//!
//! and its diffusion-only baseline (`chi = 0`).

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fokker_planck::{fp_solve, substeps, Direction, FpOperator, FpOptions};
use crate::grid::{dot_volume, GridSpec, ProfileKind, RadialGrid, RadialProfile};
use crate::potential::{annulus_source, concentration_compare, AnnulusPotential, Concentration, InducedPotential};
use crate::quadrature::{exp_integral_e1, integrate_adaptive, GaussRule};
use crate::special::bessel_i0_scaled;
use crate::tridiag::Tridiagonal;

/// Normalised parameters (`kappa = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub chi: f64,
    pub eps: f64,
    pub theta: f64,
    /// Initial radius of the shell.
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "M0")]
    pub m0: f64,
}

/// Thresholds of the large-parameter regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeFlags {
    pub threshold: f64,
    pub m0_eps_over_gamma: bool,
    pub gamma: bool,
    pub m0_over_theta: bool,
}

impl RegimeFlags {
    pub fn all(&self) -> bool {
        self.m0_eps_over_gamma && self.gamma && self.m0_over_theta
    }
}

impl Params {
    pub fn new(chi: f64, eps: f64, theta: f64, l: f64, m0: f64) -> Result<Self> {
        let p = Self { chi, eps, theta, l, m0 };
        p.validate()?;
        Ok(p)
    }

    /// Parameters with prescribed `gamma` and `M0 eps / gamma`.
    pub fn from_gamma(gamma: f64, theta: f64, eps: f64, l: f64, m0_eps_over_gamma: f64) -> Result<Self> {
        Self::new(gamma / theta, eps, theta, l, m0_eps_over_gamma * gamma / eps)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("chi", self.chi), ("eps", self.eps), ("theta", self.theta), ("L", self.l), ("M0", self.m0)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be nonnegative and finite, got {v}")));
            }
        }
        for (name, v) in [("theta", self.theta), ("L", self.l), ("M0", self.m0)] {
            if v <= 0.0 {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        self.chi * self.theta
    }

    pub fn regime(&self, b: f64) -> RegimeFlags {
        let g = self.gamma();
        RegimeFlags {
            threshold: b,
            m0_eps_over_gamma: g > 0.0 && self.m0 * self.eps / g >= b,
            gamma: g >= b,
            m0_over_theta: self.m0 / self.theta >= b,
        }
    }

    pub fn without_chemotaxis(&self) -> Self {
        Self { chi: 0.0, ..*self }
    }
}

/// Dimensional parameters, mapped to [`Params`] by `x' = x/R`,
/// `t' = t kappa / R^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub kappa: f64,
    pub chi: f64,
    pub eps: f64,
    pub theta: f64,
    pub m0: f64,
    pub l: f64,
    /// Radius of the attractant patch.
    pub r: f64,
}

impl RawParams {
    pub fn normalize(&self) -> Result<Params> {
        if !(self.kappa > 0.0 && self.r > 0.0) {
            return Err(invalid("kappa and R must be positive"));
        }
        let s = self.r * self.r / self.kappa;
        Params::new(self.chi * s, self.eps * s, self.theta, self.l / self.r, self.m0 / (self.r * self.r))
    }

    /// Normalised time corresponding to a dimensional time.
    pub fn to_normalized_time(&self, t: f64) -> f64 {
        t * self.kappa / (self.r * self.r)
    }
}

/// Width of the mollification layer of the attractant patch.
pub const ETA_MOLLIFIER: f64 = 1.0 / 64.0;

fn smooth_step_down(s: f64) -> f64 {
    // 1 at s <= 0, 0 at s >= 1, C-infinity in between
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        let a = (-1.0 / (1.0 - s)).exp();
        let b = (-1.0 / s).exp();
        a / (a + b)
    }
}

/// `theta eta` with `eta = 1` on `B_1`, decaying to 0 over `ETA_MOLLIFIER`.
pub fn initial_attractant(grid: Arc<RadialGrid>, theta: f64) -> Result<RadialProfile> {
    RadialProfile::cell_averages(grid, ProfileKind::Density, |r| theta * smooth_step_down((r - 1.0) / ETA_MOLLIFIER))
}

/// Smooth shell of unit width centred at `radius`, normalised to `mass`.
pub fn initial_shell(grid: Arc<RadialGrid>, radius: f64, mass: f64) -> Result<RadialProfile> {
    if !(radius >= 1.0) {
        return Err(invalid("shell radius must be at least 1"));
    }
    if radius + 0.5 > grid.r_max() {
        return Err(invalid("shell does not fit inside the grid"));
    }
    let bump = |r: f64| {
        let s = 2.0 * (r - radius);
        if s.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - s * s)).exp()
        }
    };
    let p = RadialProfile::cell_averages(grid, ProfileKind::Density, bump)?;
    let m = crate::grid::integrate(&p)?;
    p.scaled(mass / m)
}

/// Grid used for coupled runs at the given parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridPolicy {
    pub n_core: usize,
    /// Target far-field spacing.
    pub h_far: f64,
    /// `r_max = r_max_factor * L + r_max_pad`.
    pub r_max_factor: f64,
    pub r_max_pad: f64,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self { n_core: 256, h_far: 0.1, r_max_factor: 2.5, r_max_pad: 20.0 }
    }
}

impl GridPolicy {
    pub fn r_max(&self, l: f64) -> f64 {
        self.r_max_factor * l + self.r_max_pad
    }

    pub fn build(&self, p: &Params) -> Result<Arc<RadialGrid>> {
        let r_max = self.r_max(p.l);
        let n_far = (((r_max - 2.0) / self.h_far).ceil() as usize).max(16);
        GridSpec::new(r_max, self.n_core, n_far, p.gamma().max(1.0)).build()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunMode {
    Chemotaxis,
    DiffusionOnly,
    SubsolutionOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledOptions {
    pub t_end: f64,
    /// Spacing of stored frames.
    pub frame_dt: f64,
    pub dt_max: f64,
    pub tol_neg: f64,
    /// Stop once `mass2` has dropped by `fraction * pi * theta` and a
    /// further `extra` time has elapsed.
    pub stop_after_half_time: Option<(f64, f64)>,
    /// Also evolve the no-reaction companion with the same drift history.
    pub track_no_reaction: bool,
}

impl CoupledOptions {
    pub fn new(t_end: f64, frame_dt: f64, dt_max: f64) -> Self {
        Self { t_end, frame_dt, dt_max, tol_neg: 1e-12, stop_after_half_time: None, track_no_reaction: false }
    }

    fn output_times(&self) -> Vec<f64> {
        let n = (self.t_end / self.frame_dt - 1e-9).ceil().max(1.0) as usize;
        (1..=n).map(|k| (k as f64 * self.frame_dt).min(self.t_end)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledFrame {
    pub t: f64,
    pub rho1: Vec<f64>,
    pub rho2: Vec<f64>,
    /// `int_0^t rho1 ds` per cell.
    pub cum_rho1: Vec<f64>,
    pub no_reaction: Option<Vec<f64>>,
    pub mass1: f64,
    pub mass2: f64,
}

#[derive(Debug, Clone)]
pub struct CoupledTrajectory {
    pub params: Params,
    pub mode: RunMode,
    pub grid: Arc<RadialGrid>,
    pub frames: Vec<CoupledFrame>,
    /// `(t, mass1, mass2)` after every step.
    pub mass_series: Vec<(f64, f64, f64)>,
    /// Largest `|(m1 - m1(0)) - (m2 - m2(0))| / m2(0)` seen.
    pub max_budget_mismatch: f64,
    /// Largest `|rho2 - rho2(0) exp(-eps cum)| / theta` at frames.
    pub max_exponential_mismatch: f64,
    pub steps: usize,
}

impl CoupledTrajectory {
    pub fn t_end(&self) -> f64 {
        self.frames.last().map(|f| f.t).unwrap_or(0.0)
    }

    pub fn frame_index_at(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        self.frames.iter().position(|f| (f.t - t).abs() <= tol)
    }

    /// `cum_rho1` at time `t`, linear in time between frames.
    pub fn cum_at(&self, t: f64) -> Result<Vec<f64>> {
        if t > self.t_end() * (1.0 + 1e-12) {
            return Err(Error::TrajectoryTooShort(format!("run ends at {} < {t}", self.t_end())));
        }
        let k = self.frames.partition_point(|f| f.t < t).min(self.frames.len() - 1);
        if k == 0 || (self.frames[k].t - t).abs() < 1e-12 {
            return Ok(self.frames[k].cum_rho1.clone());
        }
        let (a, b) = (&self.frames[k - 1], &self.frames[k]);
        let s = (t - a.t) / (b.t - a.t);
        Ok(a.cum_rho1.iter().zip(&b.cum_rho1).map(|(x, y)| x + s * (y - x)).collect())
    }
}

const NEWTON_MAX_ITERS: usize = 30;

struct ReactionStepper {
    vol: Vec<f64>,
    a: Tridiagonal,
    jac: Tridiagonal,
    rhs: Vec<f64>,
    res: Vec<f64>,
    delta: Vec<f64>,
}

impl ReactionStepper {
    /// Solve `A x + V rho2 (1 - exp(-c (rho1 + x))) = V rho1` for `x`,
    /// `c = eps dt / 2`, with `A` already assembled in `self.a`.
    fn solve(&mut self, rho1: &[f64], rho2: &[f64], c: f64, x: &mut [f64]) -> Result<()> {
        let n = rho1.len();
        for i in 0..n {
            self.rhs[i] = self.vol[i] * rho1[i];
        }
        if c == 0.0 {
            self.a.solve(&self.rhs, x);
            return Ok(());
        }
        // linearised start: sink 2 c rho2 treated implicitly
        self.jac.lower.copy_from_slice(&self.a.lower);
        self.jac.upper.copy_from_slice(&self.a.upper);
        for i in 0..n {
            self.jac.diag[i] = self.a.diag[i] + self.vol[i] * 2.0 * c * rho2[i];
        }
        self.jac.solve(&self.rhs, x);
        let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        // the sink vanishes beyond the support of rho2
        let active = rho2.iter().rposition(|&v| v > 0.0).map_or(0, |k| k + 1);
        self.jac.diag[active..].copy_from_slice(&self.a.diag[active..]);
        let mut prev = f64::INFINITY;
        for it in 0..NEWTON_MAX_ITERS {
            self.a.apply(x, &mut self.res);
            for i in 0..active {
                let y = c * (rho1[i] + x[i]);
                let loss = -(-y).exp_m1();
                self.res[i] += self.vol[i] * rho2[i] * loss - self.rhs[i];
                self.jac.diag[i] = self.a.diag[i] + self.vol[i] * rho2[i] * c * (1.0 - loss);
            }
            for i in active..n {
                self.res[i] -= self.rhs[i];
            }
            self.jac.solve(&self.res, &mut self.delta);
            let mut dmax = 0.0f64;
            for i in 0..n {
                x[i] -= self.delta[i];
                dmax = dmax.max(self.delta[i].abs());
            }
            // converged, or stalled at roundoff after quadratic convergence
            if dmax <= 1e-14 * scale || (it >= 2 && dmax <= 1e-10 * scale && dmax > 0.25 * prev) {
                return Ok(());
            }
            prev = dmax;
        }
        Err(Error::NoConvergence { residual: prev / scale, iterations: NEWTON_MAX_ITERS })
    }
}

/// Coupled run from given initial data.
pub fn coupled_solve(
    params: &Params,
    rho1_0: &RadialProfile,
    rho2_0: &RadialProfile,
    opts: &CoupledOptions,
) -> Result<CoupledTrajectory> {
    run_coupled(params, rho1_0, rho2_0, opts, RunMode::Chemotaxis)
}

/// Same pipeline without chemotaxis.
pub fn diffusion_baseline_solve(
    params: &Params,
    rho1_0: &RadialProfile,
    rho2_0: &RadialProfile,
    opts: &CoupledOptions,
) -> Result<CoupledTrajectory> {
    run_coupled(&params.without_chemotaxis(), rho1_0, rho2_0, opts, RunMode::DiffusionOnly)
}

fn run_coupled(
    params: &Params,
    rho1_0: &RadialProfile,
    rho2_0: &RadialProfile,
    opts: &CoupledOptions,
    mode: RunMode,
) -> Result<CoupledTrajectory> {
    params.validate()?;
    rho1_0.expect_kind(ProfileKind::Density)?;
    rho2_0.expect_kind(ProfileKind::Density)?;
    rho1_0.same_grid(rho2_0)?;
    if !(opts.t_end > 0.0 && opts.frame_dt > 0.0 && opts.dt_max > 0.0) {
        return Err(invalid("t_end, frame_dt and dt_max must be positive"));
    }
    let grid = rho1_0.grid().clone();
    let n = grid.n_cells();
    let vol = grid.volumes().to_vec();
    let mut rho1 = rho1_0.values().to_vec();
    let mut rho2 = rho2_0.values().to_vec();
    let rho2_init = rho2.clone();
    let mut cum = vec![0.0; n];
    let mut tilde = opts.track_no_reaction.then(|| rho1.clone());

    let mut pot = InducedPotential::from_parts(grid.clone(), params.chi, rho2.clone());
    let mut h = vec![0.0; n];
    if params.chi != 0.0 {
        pot.sample_into(&mut h);
    }
    let mut op = FpOperator::new(grid.clone(), h.clone())?;
    let mut stepper = ReactionStepper {
        vol: vol.clone(),
        a: Tridiagonal::zeros(n),
        jac: Tridiagonal::zeros(n),
        rhs: vec![0.0; n],
        res: vec![0.0; n],
        delta: vec![0.0; n],
    };
    let m1_0 = dot_volume(&vol, &rho1);
    let m2_0 = dot_volume(&vol, &rho2);
    let threshold = opts.stop_after_half_time.map(|(f, extra)| (f * PI * params.theta, extra));
    let mut half_reached: Option<f64> = None;

    let snapshot = |t: f64, rho1: &[f64], rho2: &[f64], cum: &[f64], tilde: &Option<Vec<f64>>| CoupledFrame {
        t,
        rho1: rho1.to_vec(),
        rho2: rho2.to_vec(),
        cum_rho1: cum.to_vec(),
        no_reaction: tilde.clone(),
        mass1: dot_volume(&vol, rho1),
        mass2: dot_volume(&vol, rho2),
    };
    let mut frames = vec![snapshot(0.0, &rho1, &rho2, &cum, &tilde)];
    let mut mass_series = vec![(0.0, m1_0, m2_0)];
    let mut max_budget = 0.0f64;
    let mut max_exp = 0.0f64;
    let mut next = vec![0.0; n];
    let mut tilde_next = vec![0.0; n];
    let mut t = 0.0;
    let mut steps = 0usize;
    let scale0 = rho1.iter().fold(0.0f64, |m, v| m.max(*v));

    'outer: for t_out in opts.output_times() {
        let (nsub, dt) = substeps(t, t_out, opts.dt_max.min(op.dt_cfl()))?;
        let c = 0.5 * params.eps * dt;
        for _ in 0..nsub {
            if params.chi != 0.0 && steps > 0 {
                pot.update_source(&rho2);
                pot.sample_into(&mut h);
                op.set_potential(&h);
            }
            op.assemble(Direction::Forward, dt, None, &mut stepper.a);
            stepper.solve(&rho1, &rho2, c, &mut next)?;
            if let Some(tl) = tilde.as_mut() {
                for i in 0..n {
                    stepper.rhs[i] = vol[i] * tl[i];
                }
                stepper.a.solve(&stepper.rhs, &mut tilde_next);
                tl.copy_from_slice(&tilde_next);
            }
            for i in 0..n {
                let y = c * (rho1[i] + next[i]);
                rho2[i] -= rho2[i] * (-(-y).exp_m1());
                cum[i] += 0.5 * dt * (rho1[i] + next[i]);
            }
            std::mem::swap(&mut rho1, &mut next);
            t += dt;
            steps += 1;
            if let Some((i, &v)) = rho1.iter().enumerate().find(|(_, &v)| v < -opts.tol_neg * scale0) {
                return Err(Error::NegativeDensity { value: v, radius: grid.centers()[i], t });
            }
            let m1 = dot_volume(&vol, &rho1);
            let m2 = dot_volume(&vol, &rho2);
            let mismatch = ((m1 - m1_0) - (m2 - m2_0)).abs() / m2_0;
            max_budget = max_budget.max(mismatch);
            if mismatch > 1e-6 {
                return Err(Error::MassBudget { mismatch, t });
            }
            mass_series.push((t, m1, m2));
            if let Some((thr, _)) = threshold {
                if half_reached.is_none() && m2_0 - m2 >= thr {
                    half_reached = Some(t);
                }
            }
        }
        t = t_out;
        for i in 0..n {
            let pred = rho2_init[i] * (-params.eps * cum[i]).exp();
            max_exp = max_exp.max((rho2[i] - pred).abs() / params.theta);
        }
        frames.push(snapshot(t, &rho1, &rho2, &cum, &tilde));
        if let (Some((_, extra)), Some(th)) = (threshold, half_reached) {
            if t >= th + extra {
                break 'outer;
            }
        }
    }
    Ok(CoupledTrajectory {
        params: *params,
        mode,
        grid,
        frames,
        mass_series,
        max_budget_mismatch: max_budget,
        max_exponential_mismatch: max_exp,
        steps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfTimeReport {
    /// `None` when the threshold was not reached before `t_end`.
    pub tau: Option<f64>,
    pub fraction: f64,
    pub mode: RunMode,
    pub t_end: f64,
}

/// First time at which `mass2` has dropped by `fraction * pi * theta`.
pub fn half_time(traj: &CoupledTrajectory, fraction: f64) -> HalfTimeReport {
    let thr = fraction * PI * traj.params.theta;
    let series = &traj.mass_series;
    let m2_0 = series[0].2;
    let mut tau = None;
    if thr <= 0.0 {
        tau = Some(0.0);
    } else {
        for w in series.windows(2) {
            let (d0, d1) = (m2_0 - w[0].2, m2_0 - w[1].2);
            if d1 >= thr {
                let s = if d1 > d0 { (thr - d0) / (d1 - d0) } else { 1.0 };
                tau = Some(w[0].0 + s.clamp(0.0, 1.0) * (w[1].0 - w[0].0));
                break;
            }
        }
    }
    HalfTimeReport { tau, fraction, mode: traj.mode, t_end: traj.t_end() }
}

/// Pure heat flow `g1` and the exact attractant response `g2`.
#[derive(Debug, Clone)]
pub struct SubsolutionTrajectory {
    pub grid: Arc<RadialGrid>,
    pub times: Vec<f64>,
    pub g1: Vec<Vec<f64>>,
    pub g2: Vec<Vec<f64>>,
    /// `(t, int g2)` at the same times.
    pub mass2: Vec<(f64, f64)>,
    /// `rho1_0` vanishes on `B_{L/2}`.
    pub support_ok: bool,
}

/// Point masses approximating a radial density: Gauss nodes in every
/// cell that carries mass.
fn ring_sources(rho: &RadialProfile) -> Vec<(f64, f64)> {
    let grid = rho.grid();
    let rule = GaussRule::new(4);
    let e = grid.edges();
    let mut out = Vec::new();
    for (i, &v) in rho.values().iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        for (r, w) in rule.on(e[i], e[i + 1]) {
            out.push((r, 2.0 * PI * r * w * v));
        }
    }
    out
}

/// Radial 2D heat kernel of a unit ring at radius `s`, evaluated at `r`.
fn ring_kernel(r: f64, s: f64, t: f64) -> f64 {
    (-(r - s) * (r - s) / (4.0 * t)).exp() * bessel_i0_scaled(r * s / (2.0 * t)) / (4.0 * PI * t)
}

fn heat_value(sources: &[(f64, f64)], r: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    sources.iter().map(|&(s, m)| m * ring_kernel(r, s, t)).sum()
}

/// `g1 = e^{t Lap} rho1_0`, `g2 = rho2_0 exp(-eps int_0^t g1)`.
pub fn subsolution_oracle(
    params: &Params,
    rho1_0: &RadialProfile,
    rho2_0: &RadialProfile,
    times: &[f64],
) -> Result<SubsolutionTrajectory> {
    rho1_0.same_grid(rho2_0)?;
    let grid = rho1_0.grid().clone();
    let c = grid.centers();
    let e = grid.edges();
    let support_ok = rho1_0.values().iter().zip(e.iter().skip(1)).all(|(&v, &re)| v == 0.0 || re > 0.5 * params.l);
    if !support_ok {
        log::warn!("rho1_0 is not supported in r >= L/2; the tau_D bound is not proven for these data");
    }
    let sources = ring_sources(rho1_0);
    let support: Vec<usize> = (0..grid.n_cells()).filter(|&i| rho2_0.values()[i] > 0.0).collect();
    let mut integral = vec![0.0; grid.n_cells()];
    let mut g1 = Vec::new();
    let mut g2 = Vec::new();
    let mut mass2 = Vec::new();
    let mut t_prev = 0.0;
    for &t in times {
        for &i in &support {
            let r = c[i];
            let piece = integrate_adaptive(|s| heat_value(&sources, r, s), t_prev, t, 0.0, 1e-11)?;
            integral[i] += piece;
        }
        t_prev = t;
        let frame1: Vec<f64> = c.iter().map(|&r| heat_value(&sources, r, t)).collect();
        let frame2: Vec<f64> = (0..grid.n_cells())
            .map(|i| rho2_0.values()[i] * (-params.eps * integral[i]).exp())
            .collect();
        mass2.push((t, dot_volume(grid.volumes(), &frame2)));
        g1.push(frame1);
        g2.push(frame2);
    }
    Ok(SubsolutionTrajectory { grid, times: times.to_vec(), g1, g2, mass2, support_ok })
}

/// Half-time of the subsolution attractant.
pub fn subsolution_half_time(sub: &SubsolutionTrajectory, theta: f64, fraction: f64, m2_0: f64) -> Option<f64> {
    let thr = fraction * PI * theta;
    let mut prev = (0.0, m2_0);
    for &(t, m) in &sub.mass2 {
        if m2_0 - m >= thr {
            let (d0, d1) = (m2_0 - prev.1, m2_0 - m);
            let s = if d1 > d0 { (thr - d0) / (d1 - d0) } else { 1.0 };
            return Some(prev.0 + s * (t - prev.0));
        }
        prev = (t, m);
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauBound {
    pub tau: f64,
    /// Root `x*` of `E1(x) = rhs`.
    pub x_star: f64,
    pub rhs: f64,
    pub c: f64,
}

/// Right-hand side `4 pi ln 2 / (M0 eps)`.
pub fn tau_d_rhs(m0: f64, eps: f64) -> f64 {
    4.0 * PI * std::f64::consts::LN_2 / (m0 * eps)
}

/// Solves `E1(C L^2 / tau) = 4 pi ln 2 / (M0 eps)` for `tau`.
pub fn tau_d_lower_bound(params: &Params, c: f64) -> Result<TauBound> {
    if !(params.m0 > 0.0 && params.eps > 0.0 && params.l > 0.0 && c > 0.0) {
        return Err(invalid("M0, eps, L and C must be positive"));
    }
    let rhs = tau_d_rhs(params.m0, params.eps);
    let x_star = invert_e1(rhs)?;
    Ok(TauBound { tau: c * params.l * params.l / x_star, x_star, rhs, c })
}

/// Bisection in `ln x` for `E1(x) = y`.
pub fn invert_e1(y: f64) -> Result<f64> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::Bracket(format!("E1 target must be positive, got {y}")));
    }
    let (mut lo, mut hi) = ((1e-300f64).ln(), (700.0f64).ln());
    let f = |lx: f64| -> Result<f64> { Ok(exp_integral_e1(lx.exp())? - y) };
    if f(lo)? < 0.0 || f(hi)? > 0.0 {
        return Err(Error::Bracket(format!("E1(x) = {y} has no root in [1e-300, 700]")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassComparisonReport {
    pub frames_checked: usize,
    pub violations: usize,
    /// `min (M1 - M + int rho2(0)/2)` over edges and frames.
    pub worst_margin: f64,
    pub tolerance: f64,
    pub tau_c: Option<f64>,
    /// `rho2(t)` more concentrated than the worst-case annulus at every checked frame.
    pub attractant_concentrated: bool,
}

/// `int_{B_r} rho1(t) >= int_{B_r} rho(t) - int rho2(0)/2` for the frozen
/// worst-case flow `rho`, at every edge and frame up to `tau_C`.
pub fn verify_mass_comparison(traj: &CoupledTrajectory, dt_max: f64) -> Result<MassComparisonReport> {
    let p = traj.params;
    let gamma = p.gamma();
    let tau_c = half_time(traj, 0.5).tau;
    let t_stop = tau_c.unwrap_or(traj.t_end());
    let frames: Vec<&CoupledFrame> = traj.frames.iter().filter(|f| f.t <= t_stop + 1e-12).collect();
    let times: Vec<f64> = frames.iter().skip(1).map(|f| f.t).collect();
    let grid = traj.grid.clone();
    let rho1_0 = RadialProfile::new(grid.clone(), ProfileKind::Density, traj.frames[0].rho1.clone())?;
    let pot = AnnulusPotential::new(gamma)?;
    let fp = if times.is_empty() {
        None
    } else {
        Some(fp_solve(&rho1_0, &pot, &FpOptions::at(times, dt_max))?)
    };
    let vol = grid.volumes();
    let half = 0.5 * dot_volume(vol, &traj.frames[0].rho2);
    let tolerance = 1e-6 * p.m0;
    let worst_case = annulus_source(grid.clone(), p.theta)?;
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    let mut concentrated = true;
    for (k, fr) in frames.iter().enumerate() {
        let reference: &[f64] = match &fp {
            Some(tr) if k > 0 => &tr.frames[k].values,
            _ => &traj.frames[0].rho1,
        };
        let mut m1 = 0.0;
        let mut m = 0.0;
        for i in 0..grid.n_cells() {
            m1 += vol[i] * fr.rho1[i];
            m += vol[i] * reference[i];
            let margin = m1 - m + half;
            worst = worst.min(margin);
            if margin < -tolerance {
                violations += 1;
            }
        }
        let r2 = RadialProfile::new(grid.clone(), ProfileKind::Density, fr.rho2.clone())?;
        if concentration_compare(&r2, &worst_case)?.ordering != Concentration::MoreConcentrated {
            concentrated = false;
        }
    }
    Ok(MassComparisonReport {
        frames_checked: frames.len(),
        violations,
        worst_margin: worst,
        tolerance,
        tau_c,
        attractant_concentrated: concentrated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassThroughReport {
    pub t_end: f64,
    /// `gamma / M0 * min_{r in (1/2, 1)} int_0^{t_end} rho1`.
    pub c_fit: f64,
    /// Same with averages over windows of length `1/gamma`.
    pub c_window: f64,
    /// `max_{r in (1/2,1)} rho2(r, t_end)/rho2(r, 0) <= exp(-eps c M0/gamma)`.
    pub depletion_consistent: bool,
}

pub fn verify_pass_through(traj: &CoupledTrajectory, t_end: f64) -> Result<PassThroughReport> {
    let p = traj.params;
    let gamma = p.gamma();
    if gamma <= 0.0 {
        return Err(invalid("pass-through needs gamma > 0"));
    }
    let cum = traj.cum_at(t_end)?;
    let c = traj.grid.centers();
    let idx: Vec<usize> = (0..c.len()).filter(|&i| c[i] > 0.5 && c[i] < 1.0).collect();
    if idx.is_empty() {
        return Err(invalid("grid has no cells in (1/2, 1)"));
    }
    let min_cum = idx.iter().map(|&i| cum[i]).fold(f64::INFINITY, f64::min);
    let c_fit = min_cum * gamma / p.m0;
    // sliding windows of length 1/gamma
    let width = 1.0 / gamma;
    let e = traj.grid.edges();
    let mut best = f64::INFINITY;
    let mut a = 0.5;
    let step = width / 8.0;
    while a + width <= 1.0 + 1e-12 {
        let b = a + width;
        let (mut num, mut den) = (0.0, 0.0);
        for &i in &idx {
            let overlap = (e[i + 1].min(b) - e[i].max(a)).max(0.0);
            num += overlap * cum[i];
            den += overlap;
        }
        if den > 0.0 {
            best = best.min(num / den);
        }
        a += step;
    }
    let c_window = best * gamma / p.m0;
    // rho2 at t_end from the exponential representation
    let rho2_0 = &traj.frames[0].rho2;
    let bound = (-p.eps * c_fit * p.m0 / gamma).exp();
    let depletion_consistent = idx
        .iter()
        .filter(|&&i| rho2_0[i] > 0.0)
        .all(|&i| (-p.eps * cum[i]).exp() <= bound * (1.0 + 1e-12));
    Ok(PassThroughReport { t_end, c_fit, c_window, depletion_consistent })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalisation_map() {
        let raw = RawParams { kappa: 2.0, chi: 3.0, eps: 0.5, theta: 4.0, m0: 100.0, l: 30.0, r: 3.0 };
        let p = raw.normalize().unwrap();
        assert!((p.chi - 3.0 * 9.0 / 2.0).abs() < 1e-12);
        assert!((p.eps - 0.5 * 9.0 / 2.0).abs() < 1e-12);
        assert!((p.l - 10.0).abs() < 1e-12);
        assert!((p.m0 - 100.0 / 9.0).abs() < 1e-12);
        assert!((raw.to_normalized_time(9.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn e1_inversion_at_one() {
        let y = exp_integral_e1(1.0).unwrap();
        assert!((invert_e1(y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn attractant_dominates_indicator() {
        let grid = GridSpec::new(4.0, 64, 64, 16.0).build().unwrap();
        let eta = initial_attractant(grid.clone(), 1.0).unwrap();
        for (r, v) in grid.centers().iter().zip(eta.values()) {
            if *r < 1.0 {
                assert!((v - 1.0).abs() < 1e-14);
            }
            if *r > 1.0 + ETA_MOLLIFIER + 0.05 {
                assert_eq!(*v, 0.0);
            }
        }
    }
}
