//! Convergence diagnostics along Fokker-Planck trajectories.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fokker_planck::{stationary_values, Direction, FpTrajectory};
use crate::grid::{dot_volume, ProfileKind, RadialGrid, RadialProfile};
use crate::potential::{AnnulusPotential, RadialPotential};

fn require(tr: &FpTrajectory, dir: Direction) -> Result<()> {
    if tr.direction != dir {
        return Err(invalid(format!("expected a {dir:?} trajectory")));
    }
    Ok(())
}

/// `max_s |U(s) - U(0)| / |U(0)|` for
/// `U(s) = int (rho(s) - rho_s)(f(t - s) - fbar)` over the frames where
/// both `s` and `t - s` were stored.
pub fn duality_invariant(rho_traj: &FpTrajectory, f_traj: &FpTrajectory, t: f64) -> Result<f64> {
    require(rho_traj, Direction::Forward)?;
    require(f_traj, Direction::Dual)?;
    if *rho_traj.grid != *f_traj.grid {
        return Err(Error::GridMismatch);
    }
    if rho_traj.h.iter().zip(&f_traj.h).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0)) {
        return Err(invalid("trajectories use different potentials"));
    }
    if rho_traj.frame_at(t).is_none() || f_traj.frame_at(t).is_none() {
        return Err(Error::TrajectoryTooShort(format!("no frame at t = {t} in both trajectories")));
    }
    let grid = &rho_traj.grid;
    let vol = grid.volumes();
    let mass = rho_traj.frames[0].conserved;
    let rho_s = stationary_values(grid, &rho_traj.h, mass);
    let eh: Vec<f64> = f_traj.h.iter().map(|v| v.exp()).collect();
    let ve: Vec<f64> = vol.iter().zip(&eh).map(|(a, b)| a * b).collect();
    let fbar = dot_volume(&ve, &f_traj.frames[0].values) / ve.iter().sum::<f64>();

    let pairing = |s: f64| -> f64 {
        let rho = &rho_traj.frame_at(s).unwrap().values;
        let f = &f_traj.frame_at(t - s).unwrap().values;
        let prod: Vec<f64> = (0..rho.len()).map(|i| (rho[i] - rho_s[i]) * (f[i] - fbar)).collect();
        dot_volume(vol, &prod)
    };
    let u0 = pairing(0.0);
    let denom = if u0.abs() > 1e-300 { u0.abs() } else { 1.0 };
    let mut dev = 0.0f64;
    let mut count = 0;
    for fr in &rho_traj.frames {
        let s = fr.t;
        if s > t + 1e-12 || f_traj.frame_at(t - s).is_none() {
            continue;
        }
        dev = dev.max((pairing(s) - u0).abs() / denom);
        count += 1;
    }
    if count < 2 {
        return Err(Error::TrajectoryTooShort("fewer than two matching frame pairs".into()));
    }
    Ok(dev)
}

/// Universal constants entering the milestone formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MilestoneConstants {
    pub c_t1: f64,
    pub c_t2: f64,
    pub c_t3: f64,
    pub c_q: f64,
}

impl Default for MilestoneConstants {
    fn default() -> Self {
        Self { c_t1: 1.0, c_t2: 1.0, c_t3: 1.0, c_q: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MilestoneTimes {
    pub sigma: f64,
    pub gamma: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub z_sigma: f64,
    pub q1: f64,
    pub q2: f64,
    /// `|rho0 e^{-H}|_inf`.
    pub f0_sup: f64,
    pub mass: f64,
    pub constants: MilestoneConstants,
}

pub fn milestone_times(
    rho0: &RadialProfile,
    pot: &AnnulusPotential,
    sigma: f64,
    constants: MilestoneConstants,
) -> Result<MilestoneTimes> {
    rho0.expect_kind(ProfileKind::Density)?;
    let gamma = pot.gamma();
    if gamma <= 8.0 {
        return Err(invalid(format!("milestones need gamma > 8, got {gamma}")));
    }
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(invalid(format!("sigma must lie in (0, 1), got {sigma}")));
    }
    let grid = rho0.grid();
    let mass = crate::grid::integrate(rho0)?;
    if !(mass > 0.0) {
        return Err(invalid("initial mass must be positive"));
    }
    let h = pot.sample(grid);
    let f0_sup = rho0.values().iter().zip(&h).map(|(r, hv)| r * (-hv).exp()).fold(0.0, f64::max);
    let MilestoneConstants { c_t1, c_t2, c_t3, c_q } = constants;
    let t1 = c_t1 * (1.0 + (1.0 / sigma).ln() + gamma.ln());
    let ln_ratio2 = f0_sup.ln() - (sigma.sqrt() * mass).ln();
    let t2 = t1 + c_t2 / gamma * (16.0 / (gamma - 8.0) * ln_ratio2).exp();
    let ln_ratio3 = f0_sup.ln() - (sigma * mass).ln();
    let t3 = c_t3 * (t1 + 1.0 / gamma * (8.0 / (gamma - 8.0) * ln_ratio3).exp());
    let h0 = pot.value(0.0);
    let hr2 = pot.value(0.75);
    Ok(MilestoneTimes {
        sigma,
        gamma,
        t1,
        t2,
        t3,
        z_sigma: sigma * (-h0).exp() * mass * mass,
        q1: c_q * gamma * gamma * mass * mass * (-h0).exp(),
        q2: c_q * gamma * gamma * mass * mass * (-hr2).exp(),
        f0_sup,
        mass,
        constants,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    /// Largest `c` for which the algebraic decay bound holds at every
    /// frame past `t1`; infinite when no frame constrains it.
    pub c_fit: f64,
    pub constraining_frames: usize,
    pub z_nonincreasing: bool,
    /// First frame time with `Z <= Z^sigma`.
    pub reached_z_sigma: Option<f64>,
}

/// Checks `Z(t) <= max{Z^sigma, (c gamma (t - t1))^{-(gamma-8)/8} |f0|_inf^2}`.
pub fn verify_decay_bound(f_traj: &FpTrajectory, ms: &MilestoneTimes) -> Result<DecayReport> {
    require(f_traj, Direction::Dual)?;
    let gamma = ms.gamma;
    let mut c_fit = f64::INFINITY;
    let mut used = 0;
    let mut reached = None;
    let ln_f2 = 2.0 * ms.f0_sup.ln();
    for fr in &f_traj.frames {
        if reached.is_none() && fr.z <= ms.z_sigma {
            reached = Some(fr.t);
        }
        if fr.t <= ms.t1 || fr.z <= ms.z_sigma {
            continue;
        }
        let c = (8.0 / (gamma - 8.0) * (ln_f2 - fr.z.ln())).exp() / (gamma * (fr.t - ms.t1));
        c_fit = c_fit.min(c);
        used += 1;
    }
    let z_nonincreasing = f_traj
        .frames
        .windows(2)
        .all(|w| w[1].z <= w[0].z * (1.0 + 1e-12) + 1e-300);
    Ok(DecayReport { c_fit, constraining_frames: used, z_nonincreasing, reached_z_sigma: reached })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinftyReport {
    /// Smallest `C` with `|rho(t)|_inf <= C max{1/t, gamma} |rho0|_1` on the window.
    pub c_fit: f64,
    pub ratios: Vec<(f64, f64)>,
    /// Minimum of the discrete Laplacian of `H` divided by `gamma`.
    pub laplacian_min_over_gamma: f64,
}

pub fn verify_linfty(traj: &FpTrajectory, t_min: f64, t_max: f64) -> Result<LinftyReport> {
    require(traj, Direction::Forward)?;
    let mass = traj.frames[0].conserved;
    let mut ratios = Vec::new();
    for fr in traj.frames.iter().filter(|f| f.t >= t_min * (1.0 - 1e-12) && f.t <= t_max * (1.0 + 1e-12) && f.t > 0.0) {
        let scale = (1.0 / fr.t).max(traj.gamma);
        ratios.push((fr.t, fr.sup / (scale * mass)));
    }
    if ratios.is_empty() {
        return Err(Error::TrajectoryTooShort(format!("no frames in [{t_min}, {t_max}]")));
    }
    let c_fit = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(LinftyReport { c_fit, ratios, laplacian_min_over_gamma: discrete_laplacian_min(&traj.grid, &traj.h, traj.gamma) })
}

fn discrete_laplacian_min(grid: &RadialGrid, h: &[f64], gamma: f64) -> f64 {
    if gamma <= 0.0 {
        return 0.0;
    }
    let c = grid.centers();
    let e = grid.edges();
    let v = grid.volumes();
    let n = c.len();
    let mut min = f64::INFINITY;
    for i in 0..n {
        let mut flux = 0.0;
        if i + 1 < n {
            flux += 2.0 * PI * e[i + 1] * (h[i + 1] - h[i]) / (c[i + 1] - c[i]);
        }
        if i > 0 {
            flux -= 2.0 * PI * e[i] * (h[i] - h[i - 1]) / (c[i] - c[i - 1]);
        }
        min = min.min(flux / v[i]);
    }
    min / gamma
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontReport {
    pub c_level: f64,
    /// `min_t R(t)/sqrt(1 + gamma t)` over the window.
    pub c_radius: f64,
    /// `max/min` of `R(t)/sqrt(1 + gamma t)` over the window.
    pub spread: f64,
    /// `(t, R(t), R(t)/sqrt(1 + gamma t))` per frame in the window.
    pub samples: Vec<(f64, f64, f64)>,
    /// `min_t f(d0, t)` over all frames.
    pub station_min: f64,
    /// Radius of the plateau `f0 = 1` of the initial data.
    pub d1: f64,
}

/// Radius up to which `f >= level` (linear interpolation between centres).
pub fn level_radius(grid: &RadialGrid, f: &[f64], level: f64) -> f64 {
    let c = grid.centers();
    if f[0] < level {
        return 0.0;
    }
    for i in 1..f.len() {
        if f[i] < level {
            let s = (f[i - 1] - level) / (f[i - 1] - f[i]);
            return c[i - 1] + s * (c[i] - c[i - 1]);
        }
    }
    grid.r_max()
}

/// Front of the dual flow started from a plateau datum.
pub fn transport_front(f_traj: &FpTrajectory, c_level: f64, d0: f64, window: (f64, f64)) -> Result<FrontReport> {
    require(f_traj, Direction::Dual)?;
    if !(c_level > 0.0 && c_level < 1.0) {
        return Err(invalid("c_level must lie in (0, 1)"));
    }
    let grid = &f_traj.grid;
    let f0 = &f_traj.frames[0].values;
    let tol = 1e-12;
    if f0.iter().any(|&v| v < -tol || v > 1.0 + tol) {
        return Err(Error::Precondition("f0 must take values in [0, 1]".into()));
    }
    if f0.windows(2).any(|w| w[1] > w[0] + tol) {
        return Err(Error::Precondition("f0 must be radially nonincreasing".into()));
    }
    let k = f0.iter().position(|&v| v < 1.0 - tol).unwrap_or(f0.len());
    let d1 = grid.edges()[k];
    if !(d1 > FRAC_1_SQRT_2) {
        return Err(Error::Precondition(format!("f0 plateau radius {d1} must exceed 1/sqrt(2)")));
    }
    let gamma = f_traj.gamma;
    let mut samples = Vec::new();
    let mut station_min = f64::INFINITY;
    for fr in &f_traj.frames {
        station_min = station_min.min(grid.interpolate_centers(&fr.values, d0));
        if fr.t >= window.0 * (1.0 - 1e-12) && fr.t <= window.1 * (1.0 + 1e-12) {
            let r = level_radius(grid, &fr.values, c_level);
            samples.push((fr.t, r, r / (1.0 + gamma * fr.t).sqrt()));
        }
    }
    if samples.is_empty() {
        return Err(Error::TrajectoryTooShort("no frames in the front window".into()));
    }
    let lo = samples.iter().map(|s| s.2).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.2).fold(0.0, f64::max);
    Ok(FrontReport { c_level, c_radius: lo, spread: hi / lo, samples, station_min, d1 })
}

/// Splits `G` into the part with `|G| < 2 alpha e^H` and the rest.
pub fn threshold_decompose(
    g: &RadialProfile,
    pot: &dyn RadialPotential,
    alpha: f64,
) -> Result<(RadialProfile, RadialProfile)> {
    if !(alpha > 0.0) {
        return Err(invalid("alpha must be positive"));
    }
    if g.kind().on_edges() {
        return Err(invalid("threshold_decompose needs a cell-centred profile"));
    }
    let h = pot.sample(g.grid());
    let mut g1 = Vec::with_capacity(h.len());
    let mut g2 = Vec::with_capacity(h.len());
    for (&v, &hv) in g.values().iter().zip(&h) {
        if v.abs() >= 2.0 * alpha * hv.exp() {
            g1.push(0.0);
            g2.push(v);
        } else {
            g1.push(v);
            g2.push(0.0);
        }
    }
    Ok((
        RadialProfile::new(g.grid().clone(), ProfileKind::Field, g1)?,
        RadialProfile::new(g.grid().clone(), ProfileKind::Field, g2)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassInBallReport {
    /// `Z <= A Z^sigma` held, so the bounds apply.
    pub applicable: bool,
    pub z: f64,
    pub z_sigma: f64,
    pub deviation: f64,
    pub deviation_bound: f64,
    pub mass_in_ball: f64,
    pub mass_lower_bound: f64,
    /// Mass fraction of the stationary state outside `B_{r1}`.
    pub tail_fraction: f64,
    pub holds: bool,
}

/// Mass in `B_r` implied by a small weighted distance to equilibrium.
pub fn mass_in_ball_from_z(
    rho: &RadialProfile,
    pot: &dyn RadialPotential,
    r: f64,
    sigma: f64,
    a: f64,
) -> Result<MassInBallReport> {
    rho.expect_kind(ProfileKind::Density)?;
    if r > FRAC_1_SQRT_2 + 1e-12 {
        return Err(invalid("radius must not exceed 1/sqrt(2)"));
    }
    let grid = rho.grid();
    let k = grid.require_edge(r)?;
    let k1 = grid.require_edge(FRAC_1_SQRT_2)?;
    let h = pot.sample(grid);
    let mass = crate::grid::integrate(rho)?;
    let rho_s = stationary_values(grid, &h, mass);
    let vol = grid.volumes();
    let eh: Vec<f64> = h.iter().map(|v| v.exp()).collect();
    let ve: Vec<f64> = vol.iter().zip(&eh).map(|(a, b)| a * b).collect();
    let fbar = mass / ve.iter().sum::<f64>();
    let z: f64 = (0..h.len()).map(|i| ve[i] * (rho.values()[i] / eh[i] - fbar).powi(2)).sum();
    let z_sigma = sigma * (-pot.value(0.0)).exp() * mass * mass;
    let deviation: f64 = (0..k).map(|i| vol[i] * (rho.values()[i] - rho_s[i]).abs()).sum();
    let mass_in_ball: f64 = (0..k).map(|i| vol[i] * rho.values()[i]).sum();
    let inner: f64 = (0..k1).map(|i| vol[i] * rho_s[i]).sum();
    let tail_fraction = 1.0 - inner / mass;
    let root = (PI * sigma * a).sqrt();
    let deviation_bound = root * r * mass;
    let mass_lower_bound = (2.0 * r * r - tail_fraction - r * root) * mass;
    let applicable = z <= a * z_sigma;
    let holds = !applicable || (deviation <= deviation_bound && mass_in_ball >= mass_lower_bound);
    Ok(MassInBallReport {
        applicable,
        z,
        z_sigma,
        deviation,
        deviation_bound,
        mass_in_ball,
        mass_lower_bound,
        tail_fraction,
        holds,
    })
}
