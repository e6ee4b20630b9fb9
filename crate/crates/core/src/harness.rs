//! Parameter sweeps over the coupled system, log-log scaling fits and
//! CSV/SVG output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::fp_diagnostics::{milestone_times, MilestoneConstants};
use crate::grid::{integrate, ProfileKind, RadialGrid, RadialProfile};
use crate::potential::AnnulusPotential;
use crate::reaction::{
    coupled_solve, diffusion_baseline_solve, half_time, initial_attractant, initial_shell, tau_d_lower_bound,
    verify_mass_comparison, verify_pass_through, CoupledOptions, CoupledTrajectory, GridPolicy, Params,
};
use std::sync::Arc;

pub const SWEEP_SCHEMA: u32 = 1;
pub const DEFAULT_MAX_RUNS: usize = 512;

fn default_theta() -> f64 {
    8.0
}
fn default_max_runs() -> usize {
    DEFAULT_MAX_RUNS
}
fn default_tc_factor() -> f64 {
    4.0
}
fn default_td_factor() -> f64 {
    2.0
}
fn default_extra() -> f64 {
    1.0
}
fn default_frames() -> f64 {
    100.0
}
fn default_dt_max() -> f64 {
    0.05
}
fn default_tau_d_c() -> f64 {
    1.0
}
fn default_sigma() -> f64 {
    0.5
}
fn default_b() -> f64 {
    100.0
}
fn default_true() -> bool {
    true
}

/// Time-horizon and resolution policy of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimePolicy {
    /// Coupled horizon `factor * L^2 / gamma + 2`.
    #[serde(default = "default_tc_factor")]
    pub coupled_factor: f64,
    /// Baseline horizon `factor * L^2 + 10`.
    #[serde(default = "default_td_factor")]
    pub baseline_factor: f64,
    /// Time simulated past the coupled half-time.
    #[serde(default = "default_extra")]
    pub extra: f64,
    /// Frames per `L^2 / gamma`.
    #[serde(default = "default_frames")]
    pub frames_per_unit: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
}

impl Default for TimePolicy {
    fn default() -> Self {
        Self {
            coupled_factor: default_tc_factor(),
            baseline_factor: default_td_factor(),
            extra: default_extra(),
            frames_per_unit: default_frames(),
            dt_max: default_dt_max(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub schema_version: u32,
    #[serde(rename = "L")]
    pub l: Vec<f64>,
    pub gamma: Vec<f64>,
    pub eps: Vec<f64>,
    /// Either absolute masses or `M0 eps / gamma` ratios.
    #[serde(rename = "M0", default)]
    pub m0: Vec<f64>,
    #[serde(default)]
    pub m0_eps_over_gamma: Vec<f64>,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub grid: GridPolicy,
    #[serde(default)]
    pub time: TimePolicy,
    #[serde(default)]
    pub seed: u64,
    /// Relative amplitude of multiplicative noise on the initial shell.
    #[serde(default)]
    pub jitter: f64,
    #[serde(default = "default_max_runs")]
    pub max_runs: usize,
    /// Worker threads; `None` uses the global pool.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_true")]
    pub baseline: bool,
    #[serde(default = "default_true")]
    pub checks: bool,
    /// Constant `C` of the analytic baseline bound.
    #[serde(default = "default_tau_d_c")]
    pub tau_d_c: f64,
    #[serde(default)]
    pub milestone_constants: MilestoneConstants,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Regime threshold `B`.
    #[serde(default = "default_b")]
    pub regime_b: f64,
}

impl SweepConfig {
    pub fn new(l: Vec<f64>, gamma: Vec<f64>, eps: Vec<f64>, m0_eps_over_gamma: Vec<f64>) -> Self {
        Self {
            schema_version: SWEEP_SCHEMA,
            l,
            gamma,
            eps,
            m0: Vec::new(),
            m0_eps_over_gamma,
            theta: default_theta(),
            grid: GridPolicy::default(),
            time: TimePolicy::default(),
            seed: 0,
            jitter: 0.0,
            max_runs: DEFAULT_MAX_RUNS,
            workers: None,
            baseline: true,
            checks: true,
            tau_d_c: default_tau_d_c(),
            milestone_constants: MilestoneConstants::default(),
            sigma: default_sigma(),
            regime_b: default_b(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json(j) => Error::Config(format!("{}: {j}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SWEEP_SCHEMA {
            return Err(Error::Config(format!("unsupported schema_version {}", self.schema_version)));
        }
        let mass_axis = match (self.m0.is_empty(), self.m0_eps_over_gamma.is_empty()) {
            (false, true) => &self.m0,
            (true, false) => &self.m0_eps_over_gamma,
            _ => return Err(Error::Config("give exactly one of M0 and m0_eps_over_gamma".into())),
        };
        for (name, axis) in [("L", &self.l), ("gamma", &self.gamma), ("eps", &self.eps), ("mass", mass_axis)] {
            if axis.is_empty() {
                return Err(Error::Config(format!("axis {name} is empty")));
            }
            if let Some(v) = axis.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(Error::Config(format!("axis {name} has non-positive value {v}")));
            }
        }
        if !(self.theta > 0.0) || !(self.jitter >= 0.0 && self.jitter < 1.0) {
            return Err(Error::Config("theta must be positive and jitter in [0, 1)".into()));
        }
        if self.l.iter().any(|&l| l < 2.0) {
            return Err(Error::Config("L must be at least 2".into()));
        }
        let n = self.len();
        if n > self.max_runs {
            return Err(Error::Config(format!("{n} runs exceed the cap of {}", self.max_runs)));
        }
        Ok(())
    }

    /// Number of parameter tuples.
    pub fn len(&self) -> usize {
        self.l.len() * self.gamma.len() * self.eps.len() * self.m0.len().max(self.m0_eps_over_gamma.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parameter tuples in a fixed order (L slowest, mass fastest).
    pub fn tuples(&self) -> Result<Vec<Params>> {
        let mut out = Vec::with_capacity(self.len());
        for &l in &self.l {
            for &g in &self.gamma {
                for &eps in &self.eps {
                    if self.m0.is_empty() {
                        for &ratio in &self.m0_eps_over_gamma {
                            out.push(Params::from_gamma(g, self.theta, eps, l, ratio)?);
                        }
                    } else {
                        for &m0 in &self.m0 {
                            out.push(Params::new(g / self.theta, eps, self.theta, l, m0)?);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// A single coupled run; shares every policy with [`SweepConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub schema_version: u32,
    #[serde(rename = "L")]
    pub l: f64,
    pub gamma: f64,
    pub eps: f64,
    #[serde(rename = "M0", default)]
    pub m0: Option<f64>,
    #[serde(default)]
    pub m0_eps_over_gamma: Option<f64>,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub grid: GridPolicy,
    #[serde(default)]
    pub time: TimePolicy,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub jitter: f64,
    #[serde(default = "default_true")]
    pub baseline: bool,
    #[serde(default = "default_true")]
    pub checks: bool,
    #[serde(default = "default_tau_d_c")]
    pub tau_d_c: f64,
    #[serde(default)]
    pub milestone_constants: MilestoneConstants,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

impl SimulateConfig {
    /// The equivalent one-tuple sweep.
    pub fn to_sweep(&self) -> SweepConfig {
        let mut cfg = SweepConfig::new(vec![self.l], vec![self.gamma], vec![self.eps], Vec::new());
        match (self.m0, self.m0_eps_over_gamma) {
            (Some(m), _) => cfg.m0 = vec![m],
            (None, Some(r)) => cfg.m0_eps_over_gamma = vec![r],
            (None, None) => {}
        }
        cfg.theta = self.theta;
        cfg.grid = self.grid;
        cfg.time = self.time.clone();
        cfg.seed = self.seed;
        cfg.jitter = self.jitter;
        cfg.baseline = self.baseline;
        cfg.checks = self.checks;
        cfg.tau_d_c = self.tau_d_c;
        cfg.milestone_constants = self.milestone_constants;
        cfg.sigma = self.sigma;
        cfg.max_runs = 1;
        cfg
    }
}

/// One row of the sweep CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub run_id: String,
    #[serde(rename = "L")]
    pub l: f64,
    pub gamma: f64,
    pub eps: f64,
    #[serde(rename = "M0")]
    pub m0: f64,
    pub theta: f64,
    pub chi: f64,
    #[serde(rename = "tau_C")]
    pub tau_c: Option<f64>,
    #[serde(rename = "tau_C_quarter")]
    pub tau_c_quarter: Option<f64>,
    #[serde(rename = "tau_D")]
    pub tau_d: Option<f64>,
    #[serde(rename = "tau_D_lb")]
    pub tau_d_lb: Option<f64>,
    pub t3_fitted: Option<f64>,
    pub passthrough_c: Option<f64>,
    pub masscmp_ok: Option<bool>,
    pub grid_n: usize,
    pub r_max: f64,
    pub status: String,
}

impl SweepRecord {
    pub fn params(&self) -> Result<Params> {
        Params::new(self.chi, self.eps, self.theta, self.l, self.m0)
    }

    pub fn in_regime(&self, b: f64) -> bool {
        self.params().map(|p| p.regime(b).all()).unwrap_or(false)
    }
}

/// Output of one tuple, with the trajectories kept for inspection.
pub struct RunOutput {
    pub record: SweepRecord,
    pub coupled: Option<CoupledTrajectory>,
    pub baseline: Option<CoupledTrajectory>,
}

/// Smooth shell with optional multiplicative noise, renormalised to `M0`.
pub fn jittered_shell(grid: Arc<RadialGrid>, p: &Params, jitter: f64, seed: u64) -> Result<RadialProfile> {
    let shell = initial_shell(grid.clone(), p.l, p.m0)?;
    if jitter == 0.0 {
        return Ok(shell);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals: Vec<f64> = shell.values().iter().map(|&v| v * (1.0 + jitter * rng.gen_range(-1.0..1.0))).collect();
    let noisy = RadialProfile::new(grid, ProfileKind::Density, vals)?;
    let m = integrate(&noisy)?;
    noisy.scaled(p.m0 / m)
}

fn run_id(k: usize) -> String {
    format!("run-{k:04}")
}

/// Coupled options for a tuple under a policy.
pub fn coupled_options(p: &Params, time: &TimePolicy) -> CoupledOptions {
    let unit = p.l * p.l / p.gamma().max(1.0);
    let mut o = CoupledOptions::new(time.coupled_factor * unit + 2.0, unit / time.frames_per_unit, time.dt_max);
    o.stop_after_half_time = Some((0.5, time.extra));
    o
}

/// Baseline options for a tuple under a policy.
pub fn baseline_options(p: &Params, time: &TimePolicy) -> CoupledOptions {
    let horizon = time.baseline_factor * p.l * p.l + 10.0;
    let mut o = CoupledOptions::new(horizon, horizon / 400.0, (10.0 * time.dt_max).max(horizon / 4000.0));
    o.stop_after_half_time = Some((0.5, 0.0));
    o
}

/// Run one parameter tuple. Failures are recorded in `status`.
pub fn run_one(cfg: &SweepConfig, index: usize, p: &Params) -> RunOutput {
    let grid = match cfg.grid.build(p) {
        Ok(g) => g,
        Err(e) => return failed(index, p, 0, 0.0, e),
    };
    let mut record = SweepRecord {
        run_id: run_id(index),
        l: p.l,
        gamma: p.gamma(),
        eps: p.eps,
        m0: p.m0,
        theta: p.theta,
        chi: p.chi,
        tau_c: None,
        tau_c_quarter: None,
        tau_d: None,
        tau_d_lb: tau_d_lower_bound(p, cfg.tau_d_c).ok().map(|b| b.tau),
        t3_fitted: None,
        passthrough_c: None,
        masscmp_ok: None,
        grid_n: grid.n_cells(),
        r_max: grid.r_max(),
        status: "ok".into(),
    };
    let result = (|| -> Result<(CoupledTrajectory, Option<CoupledTrajectory>)> {
        let rho1 = jittered_shell(grid.clone(), p, cfg.jitter, cfg.seed.wrapping_add(index as u64))?;
        let rho2 = initial_attractant(grid.clone(), p.theta)?;
        if p.gamma() > 8.0 {
            let pot = AnnulusPotential::new(p.gamma())?;
            record.t3_fitted = Some(milestone_times(&rho1, &pot, cfg.sigma, cfg.milestone_constants)?.t3);
        }
        let opts = coupled_options(p, &cfg.time);
        let traj = coupled_solve(p, &rho1, &rho2, &opts)?;
        record.tau_c = half_time(&traj, 0.5).tau;
        record.tau_c_quarter = half_time(&traj, 0.25).tau;
        if cfg.checks && p.gamma() > 0.0 {
            if let Some(tc) = record.tau_c {
                let t_end = (tc + cfg.time.extra).min(traj.t_end());
                record.passthrough_c = Some(verify_pass_through(&traj, t_end)?.c_fit);
            }
            let mc = verify_mass_comparison(&traj, cfg.time.dt_max)?;
            record.masscmp_ok = Some(mc.violations == 0);
        }
        let base = if cfg.baseline {
            let b = diffusion_baseline_solve(p, &rho1, &rho2, &baseline_options(p, &cfg.time))?;
            record.tau_d = half_time(&b, 0.5).tau;
            Some(b)
        } else {
            None
        };
        Ok((traj, base))
    })();
    match result {
        Ok((traj, base)) => {
            let mut missing = Vec::new();
            if record.tau_c.is_none() {
                missing.push("tau_C not reached");
            }
            if cfg.baseline && record.tau_d.is_none() {
                missing.push("tau_D not reached");
            }
            if !missing.is_empty() {
                record.status = missing.join("; ");
            }
            RunOutput { record, coupled: Some(traj), baseline: base }
        }
        Err(e) => {
            record.status = format!("error: {e}");
            RunOutput { record, coupled: None, baseline: None }
        }
    }
}

fn failed(index: usize, p: &Params, grid_n: usize, r_max: f64, e: Error) -> RunOutput {
    RunOutput {
        record: SweepRecord {
            run_id: run_id(index),
            l: p.l,
            gamma: p.gamma(),
            eps: p.eps,
            m0: p.m0,
            theta: p.theta,
            chi: p.chi,
            tau_c: None,
            tau_c_quarter: None,
            tau_d: None,
            tau_d_lb: None,
            t3_fitted: None,
            passthrough_c: None,
            masscmp_ok: None,
            grid_n,
            r_max,
            status: format!("error: {e}"),
        },
        coupled: None,
        baseline: None,
    }
}

/// Run every tuple of the config; rows come back in tuple order.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let tuples = cfg.tuples()?;
    let job = || -> Vec<SweepRecord> {
        tuples.par_iter().enumerate().map(|(k, p)| run_one(cfg, k, p).record).collect()
    };
    match cfg.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
        None => Ok(job()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Response {
    TauC,
    TauCQuarter,
    TauD,
    /// `tau_D log(M0 eps) / L^2`.
    TauDNormalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    L,
    Gamma,
    /// `M0 eps` (fitted on a log scale like the others).
    M0Eps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub axis: Axis,
    pub response: Response,
    /// `(x, y)` pairs used in the fit.
    pub points: Vec<(f64, f64)>,
}

impl ScalingFit {
    /// `max y / min y` over the fitted points.
    pub fn spread(&self) -> f64 {
        let (lo, hi) = self.points.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &(_, y)| (lo.min(y), hi.max(y)));
        hi / lo
    }
}

/// Least squares of `ln y` on `ln x`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch { expected: xs.len(), found: ys.len() });
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientData(xs.len()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Precondition("log-log fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx <= 1e-24 * n {
        return Err(Error::Precondition("degenerate spread on the fit axis".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok((slope, intercept, r2))
}

fn axis_value(r: &SweepRecord, axis: Axis) -> f64 {
    match axis {
        Axis::L => r.l,
        Axis::Gamma => r.gamma,
        Axis::M0Eps => r.m0 * r.eps,
    }
}

fn response_value(r: &SweepRecord, response: Response) -> Option<f64> {
    match response {
        Response::TauC => r.tau_c,
        Response::TauCQuarter => r.tau_c_quarter,
        Response::TauD => r.tau_d,
        Response::TauDNormalized => r.tau_d.map(|t| t * (r.m0 * r.eps).ln() / (r.l * r.l)),
    }
}

/// Fit `response` against `axis`. The other sweep axes must be constant
/// over `records`; rows without the response are skipped.
pub fn fit_scaling(records: &[SweepRecord], response: Response, axis: Axis) -> Result<ScalingFit> {
    let rows: Vec<&SweepRecord> = records.iter().filter(|r| response_value(r, response).is_some()).collect();
    let fixed: Vec<Axis> = [Axis::L, Axis::Gamma].into_iter().filter(|a| *a != axis).collect();
    for a in fixed {
        if let Some(first) = rows.first() {
            let v0 = axis_value(first, a);
            if rows.iter().any(|r| (axis_value(r, a) - v0).abs() > 1e-12 * v0.abs()) {
                return Err(Error::Precondition(format!("axis {a:?} is not fixed across the records")));
            }
        }
    }
    let mut points: Vec<(f64, f64)> =
        rows.iter().map(|r| (axis_value(r, axis), response_value(r, response).unwrap_or(f64::NAN))).collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (slope, intercept, r2) = fit_loglog(&xs, &ys)?;
    Ok(ScalingFit { slope, intercept, r2, axis, response, points })
}

pub fn emit_csv(records: &[SweepRecord], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))
}

pub const CSV_HEADER: [&str; 17] = [
    "run_id",
    "L",
    "gamma",
    "eps",
    "M0",
    "theta",
    "chi",
    "tau_C",
    "tau_C_quarter",
    "tau_D",
    "tau_D_lb",
    "t3_fitted",
    "passthrough_c",
    "masscmp_ok",
    "grid_n",
    "r_max",
    "status",
];

pub fn read_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::Reader::from_reader(file);
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Log-log scatter of the fitted points with the fitted line.
pub fn emit_svg(fit: &ScalingFit, path: &Path) -> Result<()> {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const PAD: f64 = 50.0;
    let lx: Vec<f64> = fit.points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = fit.points.iter().map(|p| p.1.ln()).collect();
    let span = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let pad = ((hi - lo) * 0.1).max(0.1);
        (lo - pad, hi + pad)
    };
    let (x0, x1) = span(&lx);
    let line_y: Vec<f64> = [x0, x1].iter().map(|x| fit.intercept + fit.slope * x).collect();
    let (y0, y1) = span(&[ly.clone(), line_y.clone()].concat());
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(
        s,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="steelblue" stroke-width="2"/>"#,
        sx(x0),
        sy(line_y[0]),
        sx(x1),
        sy(line_y[1])
    );
    for (x, y) in lx.iter().zip(&ly) {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="crimson"/>"#, sx(*x), sy(*y));
    }
    let label = format!("{:?} vs {:?}: slope {:.3}, R2 {:.4}", fit.response, fit.axis, fit.slope, fit.r2);
    let _ = writeln!(s, r#"<text x="{PAD}" y="{}" font-family="sans-serif" font-size="14">{}</text>"#, PAD - 15.0, xml_escape(&label));
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">log {:?}</text>"#,
        W / 2.0,
        H - 15.0,
        fit.axis
    );
    let _ = writeln!(s, "</svg>");
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, s).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let xs = [10.0, 20.0, 40.0];
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let (s, _, r2) = fit_loglog(&xs, &ys).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tuple_order_is_fixed() {
        let cfg = SweepConfig::new(vec![10.0, 20.0], vec![32.0, 64.0], vec![0.1], vec![10.0]);
        let t = cfg.tuples().unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!((t[1].l, t[1].gamma()), (10.0, 64.0));
        assert_eq!((t[2].l, t[2].gamma()), (20.0, 32.0));
    }
}
