//! Linear Fokker-Planck flow `rho_t = div(grad rho - rho grad H)` with a
//! frozen potential, its dual `f_t = Lap f + grad H . grad f`, and the
//! weighted quantities `Z` and `W`.
//!
//! Space: finite volumes with Scharfetter-Gummel (exponential fitting) face
//! fluxes, so that the cell-sampled `e^H` is an exact discrete equilibrium.
//! Time: backward Euler, one tridiagonal solve per step.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{dot_volume, ProfileKind, RadialGrid, RadialProfile};
use crate::potential::RadialPotential;
use crate::tridiag::Tridiagonal;

/// Smallest time step accepted before declaring the potential too stiff.
pub const DT_FLOOR: f64 = 1e-12;

/// `B(x) = x / (e^x - 1)`.
pub fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - 0.5 * x
    } else {
        x / x.exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Dual,
}

/// Face coefficients of the discrete operator for a fixed potential.
///
/// For the face between cells `k` and `k+1`, with `a = 2 pi r_f / d` and
/// `D = H_{k+1} - H_k`, the outward flux is
/// `a [B(-D) rho_k - B(D) rho_{k+1}]`.
#[derive(Debug, Clone)]
pub struct FpOperator {
    grid: Arc<RadialGrid>,
    h: Vec<f64>,
    /// `a B(-D)`: weight of the inner cell.
    out_w: Vec<f64>,
    /// `a B(D)`: weight of the outer cell.
    in_w: Vec<f64>,
    dt_cfl: f64,
}

impl FpOperator {
    pub fn new(grid: Arc<RadialGrid>, h: Vec<f64>) -> Result<Self> {
        if h.len() != grid.n_cells() {
            return Err(Error::LengthMismatch { expected: grid.n_cells(), found: h.len() });
        }
        let n = grid.n_cells();
        let mut op = Self {
            grid,
            h: vec![0.0; n],
            out_w: vec![0.0; n.saturating_sub(1)],
            in_w: vec![0.0; n.saturating_sub(1)],
            dt_cfl: f64::INFINITY,
        };
        op.set_potential(&h);
        Ok(op)
    }

    pub fn from_potential(grid: Arc<RadialGrid>, pot: &dyn RadialPotential) -> Result<Self> {
        let h = pot.sample(&grid);
        Self::new(grid, h)
    }

    /// Replace the potential, keeping the grid.
    pub fn set_potential(&mut self, h: &[f64]) {
        self.h.copy_from_slice(h);
        let c = self.grid.centers();
        let e = self.grid.edges();
        let mut dt_cfl = f64::INFINITY;
        for k in 0..self.out_w.len() {
            let d = c[k + 1] - c[k];
            let a = 2.0 * std::f64::consts::PI * e[k + 1] / d;
            let dh = h[k + 1] - h[k];
            // B(-x) = B(x) + x; evaluate B at |x| to avoid cancellation
            let small = bernoulli(dh.abs());
            let large = small + dh.abs();
            let (bo, bi) = if dh >= 0.0 { (large, small) } else { (small, large) };
            self.out_w[k] = a * bo;
            self.in_w[k] = a * bi;
            if dh != 0.0 {
                dt_cfl = dt_cfl.min(d * d / dh.abs());
            }
        }
        self.dt_cfl = dt_cfl;
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn potential(&self) -> &[f64] {
        &self.h
    }

    /// Accuracy limit `min d / |dH/dr|` over faces.
    pub fn dt_cfl(&self) -> f64 {
        self.dt_cfl
    }

    /// Fill `m` with `V + dt K` (forward) or `V + dt K^T` (dual), plus an
    /// optional extra diagonal `dt * V * sink`.
    pub fn assemble(&self, direction: Direction, dt: f64, sink: Option<&[f64]>, m: &mut Tridiagonal) {
        let vol = self.grid.volumes();
        let n = vol.len();
        for i in 0..n {
            m.diag[i] = vol[i];
            if let Some(s) = sink {
                m.diag[i] += dt * vol[i] * s[i];
            }
        }
        for k in 0..n - 1 {
            let (p, q) = (self.out_w[k], self.in_w[k]);
            m.diag[k] += dt * p;
            m.diag[k + 1] += dt * q;
            match direction {
                Direction::Forward => {
                    m.upper[k] = -dt * q;
                    m.lower[k] = -dt * p;
                }
                Direction::Dual => {
                    m.upper[k] = -dt * p;
                    m.lower[k] = -dt * q;
                }
            }
        }
    }

    /// `kappa_f = a B(D) e^{H_{k+1}}`, the face weight of the Dirichlet form.
    pub fn face_conductance(&self) -> Vec<f64> {
        self.in_w.iter().enumerate().map(|(k, q)| q * self.h[k + 1].exp()).collect()
    }

    /// Net outward flux through each interior face for a density.
    pub fn fluxes(&self, rho: &[f64]) -> Vec<f64> {
        (0..self.out_w.len())
            .map(|k| self.out_w[k] * rho[k] - self.in_w[k] * rho[k + 1])
            .collect()
    }
}

/// Output schedule and step policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpOptions {
    /// Strictly increasing positive output times; `t = 0` is always stored.
    pub output_times: Vec<f64>,
    pub dt_max: f64,
    /// Relative negativity tolerance for forward runs.
    pub tol_neg: f64,
}

impl FpOptions {
    pub fn uniform(t_end: f64, n_frames: usize, dt_max: f64) -> Self {
        let n = n_frames.max(1);
        Self {
            output_times: (1..=n).map(|k| t_end * k as f64 / n as f64).collect(),
            dt_max,
            tol_neg: 1e-12,
        }
    }

    pub fn at(times: Vec<f64>, dt_max: f64) -> Self {
        Self { output_times: times, dt_max, tol_neg: 1e-12 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt_max > 0.0) {
            return Err(invalid("dt_max must be positive"));
        }
        let mut prev = 0.0;
        for &t in &self.output_times {
            if !(t > prev) || !t.is_finite() {
                return Err(invalid("output times must be positive and strictly increasing"));
            }
            prev = t;
        }
        Ok(())
    }
}

/// Equal substeps covering `[t0, t1]` with step at most `dt_allowed`.
pub(crate) fn substeps(t0: f64, t1: f64, dt_allowed: f64) -> Result<(usize, f64)> {
    if dt_allowed < DT_FLOOR {
        return Err(Error::TimeStepUnderflow { dt: dt_allowed, t: t0 });
    }
    let n = ((t1 - t0) / dt_allowed * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    Ok((n, (t1 - t0) / n as f64))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FpFrame {
    pub t: f64,
    pub values: Vec<f64>,
    /// `int rho` (forward) or `int f e^H` (dual).
    pub conserved: f64,
    pub sup: f64,
    pub z: f64,
    pub w: f64,
}

#[derive(Debug, Clone)]
pub struct FpTrajectory {
    pub direction: Direction,
    pub grid: Arc<RadialGrid>,
    pub h: Vec<f64>,
    pub gamma: f64,
    pub frames: Vec<FpFrame>,
    pub steps: usize,
    pub dt_used: Vec<f64>,
}

impl FpTrajectory {
    pub fn frame_at(&self, t: f64) -> Option<&FpFrame> {
        let tol = 1e-9 * t.abs().max(1.0);
        self.frames.iter().find(|f| (f.t - t).abs() <= tol)
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.t).collect()
    }

    /// Frame values as a profile (Density for forward, Field for dual).
    pub fn profile(&self, k: usize) -> Result<RadialProfile> {
        let kind = match self.direction {
            Direction::Forward => ProfileKind::Density,
            Direction::Dual => ProfileKind::Field,
        };
        let vals = self.frames[k].values.iter().map(|&v| if kind == ProfileKind::Density { v.max(0.0) } else { v }).collect();
        RadialProfile::new(self.grid.clone(), kind, vals)
    }

    /// Largest `|m(t) - m(0)| / (|m(0)| max(t, 1))` over frames.
    pub fn conservation_drift(&self) -> f64 {
        let m0 = self.frames[0].conserved;
        let scale = m0.abs().max(f64::MIN_POSITIVE);
        self.frames
            .iter()
            .map(|f| (f.conserved - m0).abs() / scale / f.t.max(1.0))
            .fold(0.0, f64::max)
    }
}

fn run(
    direction: Direction,
    init: &RadialProfile,
    pot: &dyn RadialPotential,
    opts: &FpOptions,
) -> Result<FpTrajectory> {
    opts.validate()?;
    let grid = init.grid().clone();
    let op = FpOperator::from_potential(grid.clone(), pot)?;
    evolve(direction, &op, init.values().to_vec(), pot.gamma(), opts)
}

/// Evolve `x0` with a prepared operator.
pub fn evolve(
    direction: Direction,
    op: &FpOperator,
    x0: Vec<f64>,
    gamma: f64,
    opts: &FpOptions,
) -> Result<FpTrajectory> {
    opts.validate()?;
    let grid = op.grid().clone();
    let n = grid.n_cells();
    if x0.len() != n {
        return Err(Error::LengthMismatch { expected: n, found: x0.len() });
    }
    let h = op.potential().to_vec();
    let kappa = op.face_conductance();
    let eh: Vec<f64> = h.iter().map(|v| v.exp()).collect();
    let frame = |t: f64, x: &[f64]| -> FpFrame {
        let f: Vec<f64> = match direction {
            Direction::Forward => x.iter().zip(&eh).map(|(r, e)| r / e).collect(),
            Direction::Dual => x.to_vec(),
        };
        let (z, w) = zw_with(&grid, &eh, &kappa, &f, 0);
        let conserved = match direction {
            Direction::Forward => dot_volume(grid.volumes(), x),
            Direction::Dual => {
                let fe: Vec<f64> = x.iter().zip(&eh).map(|(a, b)| a * b).collect();
                dot_volume(grid.volumes(), &fe)
            }
        };
        FpFrame { t, values: x.to_vec(), conserved, sup: x.iter().fold(0.0f64, |m, v| m.max(v.abs())), z, w }
    };

    let mut x = x0;
    let mut frames = vec![frame(0.0, &x)];
    let mut m = Tridiagonal::zeros(n);
    let mut rhs = vec![0.0; n];
    let mut next = vec![0.0; n];
    let vol = grid.volumes();
    let dt_allowed = opts.dt_max.min(op.dt_cfl());
    let scale0 = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut t = 0.0;
    let mut steps = 0;
    let mut dt_used = Vec::with_capacity(opts.output_times.len());
    let mut last_dt = f64::NAN;
    for &t_out in &opts.output_times {
        let (nsub, dt) = substeps(t, t_out, dt_allowed)?;
        if dt != last_dt {
            op.assemble(direction, dt, None, &mut m);
            last_dt = dt;
        }
        for _ in 0..nsub {
            for i in 0..n {
                rhs[i] = vol[i] * x[i];
            }
            m.solve(&rhs, &mut next);
            std::mem::swap(&mut x, &mut next);
            steps += 1;
        }
        t = t_out;
        dt_used.push(dt);
        if direction == Direction::Forward {
            if let Some((i, &v)) = x.iter().enumerate().find(|(_, &v)| v < -opts.tol_neg * scale0) {
                return Err(Error::NegativeDensity { value: v, radius: grid.centers()[i], t });
            }
        }
        frames.push(frame(t, &x));
    }
    Ok(FpTrajectory { direction, grid, h, gamma, frames, steps, dt_used })
}

/// Forward flow from a density.
pub fn fp_solve(rho0: &RadialProfile, pot: &dyn RadialPotential, opts: &FpOptions) -> Result<FpTrajectory> {
    rho0.expect_kind(ProfileKind::Density)?;
    run(Direction::Forward, rho0, pot, opts)
}

/// Dual flow from an arbitrary cell-centred profile.
pub fn dual_solve(f0: &RadialProfile, pot: &dyn RadialPotential, opts: &FpOptions) -> Result<FpTrajectory> {
    if f0.kind().on_edges() {
        return Err(Error::KindMismatch { expected: ProfileKind::Field, found: f0.kind() });
    }
    run(Direction::Dual, f0, pot, opts)
}

/// `e^H` normalised to `total_mass` on the grid.
pub fn stationary_state(total_mass: f64, pot: &dyn RadialPotential, grid: Arc<RadialGrid>) -> Result<RadialProfile> {
    if !(total_mass > 0.0 && total_mass.is_finite()) {
        return Err(invalid(format!("total mass must be positive, got {total_mass}")));
    }
    let h = pot.sample(&grid);
    Ok(RadialProfile::new(grid.clone(), ProfileKind::Density, stationary_values(&grid, &h, total_mass))?)
}

pub(crate) fn stationary_values(grid: &RadialGrid, h: &[f64], total_mass: f64) -> Vec<f64> {
    let hmax = h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let shape: Vec<f64> = h.iter().map(|v| (v - hmax).exp()).collect();
    let z = dot_volume(grid.volumes(), &shape);
    shape.iter().map(|s| s * total_mass / z).collect()
}

/// `Z = int (f - fbar)^2 e^H`, `W = int |grad f|^2 e^H` (+ `n^2/r^2` term
/// for angular mode `n`), with the discrete weights of the scheme.
pub fn z_and_w(f: &RadialProfile, pot: &dyn RadialPotential) -> Result<(f64, f64)> {
    z_and_w_mode(f, pot, 0)
}

pub fn z_and_w_mode(f: &RadialProfile, pot: &dyn RadialPotential, n: u32) -> Result<(f64, f64)> {
    if f.kind().on_edges() {
        return Err(invalid("z_and_w needs a cell-centred profile"));
    }
    let grid = f.grid().clone();
    let op = FpOperator::from_potential(grid.clone(), pot)?;
    let eh: Vec<f64> = op.potential().iter().map(|v| v.exp()).collect();
    Ok(zw_with(&grid, &eh, &op.face_conductance(), f.values(), n))
}

pub(crate) fn zw_with(grid: &RadialGrid, eh: &[f64], kappa: &[f64], f: &[f64], n: u32) -> (f64, f64) {
    let vol = grid.volumes();
    let we: Vec<f64> = vol.iter().zip(eh).map(|(v, e)| v * e).collect();
    let mass: f64 = we.iter().sum();
    let fbar = if n == 0 { we.iter().zip(f).map(|(a, b)| a * b).sum::<f64>() / mass } else { 0.0 };
    let z: f64 = we.iter().zip(f).map(|(a, b)| a * (b - fbar) * (b - fbar)).sum();
    let mut w: f64 = kappa.iter().enumerate().map(|(k, c)| c * (f[k + 1] - f[k]).powi(2)).sum();
    if n > 0 {
        let n2 = (n * n) as f64;
        let c = grid.centers();
        w += we.iter().zip(f).zip(c).map(|((a, b), r)| a * n2 / (r * r) * b * b).sum::<f64>();
    }
    (z, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_graded_grid;
    use crate::potential::{annulus_potential, ZeroPotential};

    #[test]
    fn bernoulli_identity() {
        for x in [-30.0, -1.0, -1e-9, 0.0, 1e-9, 0.3, 5.0, 40.0] {
            let lhs = bernoulli(-x);
            let rhs = x.exp() * bernoulli(x);
            assert!((lhs - rhs).abs() <= 1e-13 * lhs.abs().max(1.0), "x={x}");
        }
    }

    #[test]
    fn constants_are_dual_fixed_points() {
        let grid = build_graded_grid(20.0, 64, 64, 32.0).unwrap();
        let pot = annulus_potential(32.0).unwrap();
        let f0 = RadialProfile::from_fn(grid, ProfileKind::Field, |_| 2.5).unwrap();
        let tr = dual_solve(&f0, &pot, &FpOptions::uniform(1.0, 4, 1e-2)).unwrap();
        for fr in &tr.frames {
            for v in &fr.values {
                assert!((v - 2.5).abs() < 1e-12);
            }
            assert!(fr.z.abs() < 1e-20 && fr.w.abs() < 1e-20);
        }
    }

    #[test]
    fn zero_potential_conserves_mass() {
        let grid = build_graded_grid(10.0, 64, 64, 1.0).unwrap();
        let rho0 = RadialProfile::from_fn(grid, ProfileKind::Density, |r| (-r * r).exp()).unwrap();
        let tr = fp_solve(&rho0, &ZeroPotential, &FpOptions::uniform(1.0, 5, 1e-2)).unwrap();
        assert!(tr.conservation_drift() < 1e-13);
    }
}
