//! Weighted Poincare inequalities in radial coordinates.
//!
//! A test function is a finite Fourier sum `f~(r) + sum_n psi_n(r) cos(n phi)
//! + xi_n(r) sin(n phi)`; every functional reduces to one-dimensional
//! integrals against `u(r) = r w(r)` evaluated with composite Gauss-Legendre
//! on the cells of a grid that resolves the weight breakpoints.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{GridSpec, RadialGrid};
use crate::potential::{ground_state_weight, power_weight, WeightKind, WeightSpec};
use crate::quadrature::GaussRule;
use crate::tridiag::{pencil_count_below, Tridiagonal};

/// Radial coefficient with analytic value and derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RadialShape {
    Constant(f64),
    /// `r^p`.
    Power(i32),
    /// `exp(-((r - center)/width)^2)`.
    Gaussian { center: f64, width: f64 },
    /// Smoothed indicator of `[inner, outer]` with transition width `width`.
    Annulus { inner: f64, outer: f64, width: f64 },
    /// `cos(k r) e^{-decay r}` or `sin(k r) e^{-decay r}`.
    Sinusoid { k: f64, decay: f64, cosine: bool },
    /// `(r / sqrt(1 + r^2))^n` times the inner shape; vanishes like `r^n`.
    Regularized { n: u32, inner: Box<RadialShape> },
    /// `scale` times the inner shape.
    Scaled { scale: f64, inner: Box<RadialShape> },
    /// Piecewise-linear interpolation of samples.
    Tabulated { r: Vec<f64>, v: Vec<f64> },
}

impl RadialShape {
    /// `(value, derivative)` at `r`.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        match self {
            RadialShape::Constant(c) => (*c, 0.0),
            RadialShape::Power(p) => {
                if *p == 0 {
                    (1.0, 0.0)
                } else {
                    (r.powi(*p), *p as f64 * r.powi(p - 1))
                }
            }
            RadialShape::Gaussian { center, width } => {
                let s = (r - center) / width;
                let g = (-s * s).exp();
                (g, -2.0 * s / width * g)
            }
            RadialShape::Annulus { inner, outer, width } => {
                let a = ((r - inner) / width).tanh();
                let b = ((r - outer) / width).tanh();
                (0.5 * (a - b), 0.5 * ((1.0 - a * a) - (1.0 - b * b)) / width)
            }
            RadialShape::Sinusoid { k, decay, cosine } => {
                let e = (-decay * r).exp();
                let (s, c) = (k * r).sin_cos();
                if *cosine {
                    (c * e, (-k * s - decay * c) * e)
                } else {
                    (s * e, (k * c - decay * s) * e)
                }
            }
            RadialShape::Regularized { n, inner } => {
                let (v, d) = inner.eval(r);
                let q = 1.0 + r * r;
                let m = r / q.sqrt();
                let nn = *n as i32;
                let mn = m.powi(nn);
                let dm = if nn == 0 { 0.0 } else { nn as f64 * m.powi(nn - 1) / (q * q.sqrt()) };
                (mn * v, dm * v + mn * d)
            }
            RadialShape::Scaled { scale, inner } => {
                let (v, d) = inner.eval(r);
                (scale * v, scale * d)
            }
            RadialShape::Tabulated { r: xs, v } => {
                if xs.is_empty() {
                    return (0.0, 0.0);
                }
                if r <= xs[0] {
                    return (v[0], 0.0);
                }
                if r >= xs[xs.len() - 1] {
                    return (v[v.len() - 1], 0.0);
                }
                let k = xs.partition_point(|&x| x <= r);
                let s = (v[k] - v[k - 1]) / (xs[k] - xs[k - 1]);
                (v[k - 1] + s * (r - xs[k - 1]), s)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Parity {
    Cos,
    Sin,
}

/// One Fourier component of a test function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeProfile {
    pub n: u32,
    pub parity: Parity,
    pub coeff: RadialShape,
}

impl ModeProfile {
    pub fn radial(coeff: RadialShape) -> Self {
        Self { n: 0, parity: Parity::Cos, coeff }
    }

    pub fn new(n: u32, parity: Parity, coeff: RadialShape) -> Self {
        Self { n, parity: if n == 0 { Parity::Cos } else { parity }, coeff }
    }
}

/// Block integrals of a test function against a weight.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockFunctionals {
    /// `int_{B_{r1}} (f - f~(r1))^2 w`.
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    /// `int_{B_{r1}} |grad f|^2 w`.
    pub j1: f64,
    pub j2: f64,
    /// `int_{B_{r2}^c} |grad f|^2 r^2 w`.
    pub j3: f64,
    /// `int (f - fbar)^2 w` with the `w`-mean `fbar`.
    pub i_bar: f64,
    /// `int_{B_{r2}^c} |grad f|^2 (1 + r^2) w`.
    pub j_far: f64,
    /// `int |grad f|^2 (1 + r^2) w` over the whole plane.
    pub j_bl: f64,
    pub truncated: Option<Truncated>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncated {
    pub r: f64,
    pub i3: f64,
    pub j3: f64,
}

impl BlockFunctionals {
    pub fn i(&self) -> f64 {
        self.i1 + self.i2 + self.i3
    }

    pub fn i_r(&self) -> Option<f64> {
        self.truncated.map(|t| self.i1 + self.i2 + t.i3)
    }

    fn add(&mut self, o: &BlockFunctionals) {
        self.i1 += o.i1;
        self.i2 += o.i2;
        self.i3 += o.i3;
        self.j1 += o.j1;
        self.j2 += o.j2;
        self.j3 += o.j3;
        self.i_bar += o.i_bar;
        self.j_far += o.j_far;
        self.j_bl += o.j_bl;
        match (&mut self.truncated, o.truncated) {
            (Some(a), Some(b)) => {
                a.i3 += b.i3;
                a.j3 += b.j3;
            }
            (None, Some(b)) => self.truncated = Some(b),
            _ => {}
        }
    }
}

/// Sum of `exp(l_k) q_k` carried as `(shift, scaled sum)` so that weights
/// spanning hundreds of orders of magnitude neither overflow nor underflow.
#[derive(Debug, Clone, Copy)]
struct LogAcc {
    shift: f64,
    sum: f64,
}

impl LogAcc {
    fn new(shift: f64) -> Self {
        Self { shift, sum: 0.0 }
    }
    fn add(&mut self, log_w: f64, q: f64) {
        self.sum += (log_w - self.shift).exp() * q;
    }
    fn value(&self) -> f64 {
        if self.sum == 0.0 {
            0.0
        } else {
            self.sum * self.shift.exp()
        }
    }
}

/// Grid and quadrature for one weight.
#[derive(Debug, Clone)]
pub struct PoincareWorkbench {
    pub weight: WeightSpec,
    pub grid: Arc<RadialGrid>,
    rule: GaussRule,
}

/// Outer radius of the default workbench grid.
pub const WORKBENCH_R_MAX: f64 = 60.0;

impl PoincareWorkbench {
    pub fn new(weight: WeightSpec, grid: Arc<RadialGrid>) -> Result<Self> {
        grid.require_edge(weight.r1)?;
        grid.require_edge(weight.r2)?;
        Ok(Self { weight, grid, rule: GaussRule::new(10) })
    }

    /// Default grid: graded, resolving `r1`, `r2` and the requested extra radii.
    pub fn with_default_grid(weight: WeightSpec, extra: &[f64]) -> Result<Self> {
        let mut bps = vec![weight.r1, weight.r2];
        bps.extend_from_slice(extra);
        let grid = GridSpec::new(WORKBENCH_R_MAX, 256, 1200, weight.gamma.max(16.0))
            .with_breakpoints(&bps)
            .build()?;
        Self::new(weight, grid)
    }

    fn log_u(&self, r: f64) -> f64 {
        r.ln() + self.weight.log_weight(r)
    }

    /// Block functionals of a single component (`n`, coefficient).
    fn component(&self, n: u32, shape: &RadialShape, fbar: f64, centre: f64, r_trunc: Option<f64>) -> BlockFunctionals {
        let w = &self.weight;
        let e = self.grid.edges();
        // radial mode carries 2 pi, angular modes pi (Parseval)
        let ang = if n == 0 { 2.0 * PI } else { PI };
        let n2 = (n * n) as f64;
        let shift = self.weight.log_weight(0.0).max(self.weight.log_weight(w.r1));
        let mut acc: [LogAcc; 11] = [LogAcc::new(shift); 11];
        for k in 0..self.grid.n_cells() {
            let (a, b) = (e[k], e[k + 1]);
            let mid = 0.5 * (a + b);
            let block = if mid < w.r1 {
                1
            } else if mid < w.r2 {
                2
            } else {
                3
            };
            let inside_r = r_trunc.is_some_and(|rt| mid < rt);
            for (r, wt) in self.rule.on(a, b) {
                let lu = self.log_u(r);
                let (v, d) = shape.eval(r);
                let grad2 = d * d + if n > 0 { n2 * v * v / (r * r) } else { 0.0 };
                let dev = if n == 0 { (v - centre).powi(2) } else { v * v };
                let var = if n == 0 { (v - fbar).powi(2) } else { v * v };
                let q = wt * ang;
                match block {
                    1 => {
                        acc[0].add(lu, q * dev);
                        acc[3].add(lu, q * grad2);
                    }
                    2 => {
                        acc[1].add(lu, q * dev);
                        acc[4].add(lu, q * grad2);
                    }
                    _ => {
                        acc[2].add(lu, q * dev);
                        acc[5].add(lu, q * grad2 * r * r);
                        acc[7].add(lu, q * grad2 * (1.0 + r * r));
                        if inside_r {
                            acc[9].add(lu, q * dev);
                            acc[10].add(lu, q * grad2 * r * r);
                        }
                    }
                }
                acc[6].add(lu, q * var);
                acc[8].add(lu, q * grad2 * (1.0 + r * r));
            }
        }
        BlockFunctionals {
            i1: acc[0].value(),
            i2: acc[1].value(),
            i3: acc[2].value(),
            j1: acc[3].value(),
            j2: acc[4].value(),
            j3: acc[5].value(),
            i_bar: acc[6].value(),
            j_far: acc[7].value(),
            j_bl: acc[8].value(),
            truncated: r_trunc.map(|r| Truncated { r, i3: acc[9].value(), j3: acc[10].value() }),
        }
    }

    /// `int f~ w / int w` for a radial coefficient.
    fn weighted_mean(&self, shape: &RadialShape) -> f64 {
        let e = self.grid.edges();
        let shift = self.weight.log_weight(0.0);
        let mut num = LogAcc::new(shift);
        let mut den = LogAcc::new(shift);
        for k in 0..self.grid.n_cells() {
            for (r, wt) in self.rule.on(e[k], e[k + 1]) {
                let lu = self.log_u(r);
                num.add(lu, wt * shape.eval(r).0);
                den.add(lu, wt);
            }
        }
        num.value() / den.value()
    }

    /// Block functionals of the sum of the given modes.
    pub fn functionals(&self, modes: &[ModeProfile], r_trunc: Option<f64>) -> Result<BlockFunctionals> {
        if let Some(rt) = r_trunc {
            if rt <= self.weight.r2 {
                return Err(invalid(format!("truncation radius {rt} must exceed r2 = {}", self.weight.r2)));
            }
            self.grid.require_edge(rt)?;
        }
        // modes with equal (n, parity) add up before squaring
        let mut groups: BTreeMap<(u32, Parity), Vec<RadialShape>> = BTreeMap::new();
        for m in modes {
            groups.entry((m.n, m.parity)).or_default().push(m.coeff.clone());
        }
        let mut total = BlockFunctionals::default();
        if r_trunc.is_some() {
            total.truncated = Some(Truncated { r: r_trunc.unwrap(), i3: 0.0, j3: 0.0 });
        }
        for ((n, _), shapes) in groups {
            let shape = if shapes.len() == 1 {
                shapes.into_iter().next().unwrap()
            } else {
                sum_shape(shapes)
            };
            let (fbar, centre) = if n == 0 {
                (self.weighted_mean(&shape), shape.eval(self.weight.r1).0)
            } else {
                (0.0, 0.0)
            };
            let part = self.component(n, &shape, fbar, centre, r_trunc);
            total.add(&part);
        }
        Ok(total)
    }
}

fn sum_shape(shapes: Vec<RadialShape>) -> RadialShape {
    // tabulate on a fine mesh; only used when a battery item repeats a mode
    let n = 20_000;
    let r: Vec<f64> = (0..=n).map(|k| WORKBENCH_R_MAX * (k as f64 / n as f64).powi(2)).collect();
    let v = r.iter().map(|&x| shapes.iter().map(|s| s.eval(x).0).sum()).collect();
    RadialShape::Tabulated { r, v }
}

/// `mode_functionals` for a single mode.
pub fn mode_functionals(bench: &PoincareWorkbench, m: &ModeProfile, r_trunc: Option<f64>) -> Result<BlockFunctionals> {
    bench.functionals(std::slice::from_ref(m), r_trunc)
}

fn ratio(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        0.0
    } else if den <= 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Smallest constants making the three block inequalities hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockConstants {
    /// `I1 <= C J1`.
    pub c1: f64,
    /// `I2 <= (C/gamma)(J1 + J2) + I1/4`.
    pub c2: f64,
    /// `I3 <= (C/gamma^2)(J2 + J3) + I2/4`.
    pub c3: f64,
}

pub fn block_constants(b: &BlockFunctionals, gamma: f64) -> BlockConstants {
    BlockConstants {
        c1: ratio(b.i1, b.j1),
        c2: gamma * ratio(b.i2 - 0.25 * b.i1, b.j1 + b.j2),
        c3: gamma * gamma * ratio(b.i3 - 0.25 * b.i2, b.j2 + b.j3),
    }
}

pub fn verify_block_inequalities(bench: &PoincareWorkbench, modes: &[ModeProfile]) -> Result<BlockConstants> {
    let b = bench.functionals(modes, None)?;
    Ok(block_constants(&b, bench.weight.gamma))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinedConstants {
    /// `int (f - f~(r1))^2 w <= C (J1 + J2/gamma + J3/gamma^2)`.
    pub c: f64,
    /// Same with the `w`-mean centring.
    pub c_bar: f64,
    /// Mean centring never exceeds `f~(r1)` centring.
    pub centring_ordered: bool,
}

fn combined_from(b: &BlockFunctionals, gamma: f64, i: f64, j3: f64) -> CombinedConstants {
    let den = b.j1 + b.j2 / gamma + j3 / (gamma * gamma);
    CombinedConstants {
        c: ratio(i, den),
        c_bar: ratio(b.i_bar, den),
        centring_ordered: b.i_bar <= b.i() * (1.0 + 1e-10) + 1e-300,
    }
}

pub fn verify_combined(bench: &PoincareWorkbench, modes: &[ModeProfile]) -> Result<CombinedConstants> {
    let b = bench.functionals(modes, None)?;
    Ok(combined_from(&b, bench.weight.gamma, b.i(), b.j3))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedConstants {
    pub r: f64,
    pub c3: f64,
    pub combined: f64,
}

pub fn verify_truncated(bench: &PoincareWorkbench, modes: &[ModeProfile], r: f64) -> Result<TruncatedConstants> {
    let b = bench.functionals(modes, Some(r))?;
    let t = b.truncated.unwrap();
    let g = bench.weight.gamma;
    Ok(TruncatedConstants {
        r,
        c3: g * g * ratio(t.i3 - 0.25 * b.i2, b.j2 + t.j3),
        combined: ratio(b.i1 + b.i2 + t.i3, b.j1 + b.j2 / g + t.j3 / (g * g)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerConstants {
    /// `int (f - fbar)^2 v <= (C/gamma) int_{B1} |grad f|^2 v + (C/gamma^2) int_{B1^c} |grad f|^2 (1+r^2) v`.
    pub c: f64,
    /// `int (f - fbar)^2 v <= (C/gamma) int |grad f|^2 (1+r^2) v`.
    pub c_bl: f64,
}

pub fn verify_power_weight(bench: &PoincareWorkbench, modes: &[ModeProfile]) -> Result<PowerConstants> {
    if bench.weight.kind != WeightKind::Power {
        return Err(invalid("verify_power_weight needs the power weight"));
    }
    let b = bench.functionals(modes, None)?;
    let g = bench.weight.gamma;
    Ok(PowerConstants {
        c: ratio(b.i_bar, (b.j1 + b.j2) / g + b.j_far / (g * g)),
        c_bl: ratio(b.i_bar, b.j_bl / g),
    })
}

/// Battery label.
pub const BATTERY_VERSION: &str = "battery-v1";

/// A named test function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryItem {
    pub id: String,
    pub modes: Vec<ModeProfile>,
}

/// Gaussians (4 centres x 3 widths), smoothed annuli and damped
/// sinusoids, each in modes `n = 0, 1, 2`.
pub fn standard_battery() -> Vec<BatteryItem> {
    let mut items = Vec::new();
    let wrap = |n: u32, s: RadialShape| -> ModeProfile {
        if n == 0 {
            ModeProfile::radial(s)
        } else {
            ModeProfile::new(n, Parity::Cos, RadialShape::Regularized { n, inner: Box::new(s) })
        }
    };
    for n in 0..=2u32 {
        for c in [0.0, 1.0, 2.0, 4.0] {
            for w in [0.25, 0.5, 1.0] {
                items.push(BatteryItem {
                    id: format!("gauss-c{c}-w{w}-n{n}"),
                    modes: vec![wrap(n, RadialShape::Gaussian { center: c, width: w })],
                });
            }
        }
        for (a, b) in [(0.5, 1.0), (1.0, 2.0), (2.0, 4.0)] {
            items.push(BatteryItem {
                id: format!("annulus-{a}-{b}-n{n}"),
                modes: vec![wrap(n, RadialShape::Annulus { inner: a, outer: b, width: 0.05 })],
            });
        }
        for k in [1.0, 2.0, 4.0] {
            for cosine in [true, false] {
                items.push(BatteryItem {
                    id: format!("{}-k{k}-n{n}", if cosine { "cos" } else { "sin" }),
                    modes: vec![wrap(n, RadialShape::Sinusoid { k, decay: 0.25, cosine })],
                });
            }
        }
    }
    items
}

/// One row of the Poincare report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareRow {
    pub weight_kind: String,
    pub gamma: f64,
    pub inequality_id: String,
    pub fitted_c: f64,
    pub extremal_ratio: Option<f64>,
    pub battery_id: String,
}

/// Largest fitted constant over the battery, per weight, `gamma` and
/// inequality, together with the extremal Rayleigh quotients where defined.
pub fn poincare_suite(gammas: &[f64], truncation_radius: f64, with_extremals: bool) -> Result<Vec<PoincareRow>> {
    let battery = standard_battery();
    let jobs: Vec<(WeightKind, f64)> = gammas
        .iter()
        .flat_map(|&g| [(WeightKind::GroundState, g), (WeightKind::Power, g)])
        .collect();
    let results: Vec<Result<Vec<PoincareRow>>> = jobs
        .par_iter()
        .map(|&(kind, gamma)| suite_for(kind, gamma, &battery, truncation_radius, with_extremals))
        .collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}

fn suite_for(
    kind: WeightKind,
    gamma: f64,
    battery: &[BatteryItem],
    r_trunc: f64,
    with_extremals: bool,
) -> Result<Vec<PoincareRow>> {
    let weight = match kind {
        WeightKind::GroundState => ground_state_weight(gamma)?,
        WeightKind::Power => power_weight(gamma)?,
    };
    let bench = PoincareWorkbench::with_default_grid(weight, &[r_trunc])?;
    let label = match kind {
        WeightKind::GroundState => "ground_state",
        WeightKind::Power => "power",
    };
    let mut best: BTreeMap<&'static str, (f64, String)> = BTreeMap::new();
    let mut bump = |id: &'static str, c: f64, item: &str| {
        let e = best.entry(id).or_insert((f64::NEG_INFINITY, String::new()));
        if c > e.0 {
            *e = (c, item.to_string());
        }
    };
    for item in battery {
        let b = bench.functionals(&item.modes, Some(r_trunc))?;
        let t = b.truncated.unwrap();
        match kind {
            WeightKind::GroundState => {
                let bc = block_constants(&b, gamma);
                bump("block1", bc.c1, &item.id);
                bump("block2", bc.c2, &item.id);
                bump("block3", bc.c3, &item.id);
                let cc = combined_from(&b, gamma, b.i(), b.j3);
                bump("combined", cc.c, &item.id);
                bump("combined_mean", cc.c_bar, &item.id);
                let tc = combined_from(&b, gamma, b.i1 + b.i2 + t.i3, t.j3);
                bump("truncated_block3", gamma * gamma * ratio(t.i3 - 0.25 * b.i2, b.j2 + t.j3), &item.id);
                bump("truncated_combined", tc.c, &item.id);
            }
            WeightKind::Power => {
                bump("power", ratio(b.i_bar, (b.j1 + b.j2) / gamma + b.j_far / (gamma * gamma)), &item.id);
                bump("power_bl", ratio(b.i_bar, b.j_bl / gamma), &item.id);
            }
        }
    }
    let extremal = |id: &str| -> Result<Option<f64>> {
        if !with_extremals {
            return Ok(None);
        }
        let v = match (kind, id) {
            (WeightKind::GroundState, "block1") => Some(best_constant(&weight, Region::Core, Centering::Endpoint, 0)?.value),
            (WeightKind::GroundState, "block3") => Some(gamma * gamma * best_constant(&weight, Region::Far, Centering::Endpoint, 0)?.value),
            _ => None,
        };
        Ok(v)
    };
    let mut rows = Vec::new();
    for (id, (c, item)) in best {
        rows.push(PoincareRow {
            weight_kind: label.into(),
            gamma,
            inequality_id: id.into(),
            fitted_c: c,
            extremal_ratio: extremal(id)?,
            battery_id: format!("{BATTERY_VERSION}/{item}"),
        });
    }
    Ok(rows)
}

/// Support constraint for [`best_constant`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// `[0, r1]`, form `I1/J1`.
    Core,
    /// `[r2, inf)`, form `I3/J3` (with the `r^2` factor in `J3`).
    Far,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Centering {
    /// `f` vanishes at the block's interface radius (`r1` or `r2`).
    Endpoint,
    /// `f` has zero weighted mean; constants deflated.
    Mean,
}

/// Largest Rayleigh quotient and its maximiser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayleighResult {
    pub value: f64,
    pub nodes: Vec<f64>,
    pub extremizer: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Generic one-dimensional pencil `sup int f^2 m / int (f'^2 + n^2 f^2/r^2) k`
/// on `[a, b]` with P1 elements.
#[derive(Debug, Clone)]
pub struct RayleighProblem<FM, FK> {
    pub nodes: Vec<f64>,
    /// Log of the `I`-density.
    pub log_m: FM,
    /// Log of the `J`-density.
    pub log_k: FK,
    pub n: u32,
    pub dirichlet_left: bool,
    pub dirichlet_right: bool,
    pub deflate_constants: bool,
    pub max_iters: usize,
}

impl<FM: Fn(f64) -> f64, FK: Fn(f64) -> f64> RayleighProblem<FM, FK> {
    pub fn solve(&self) -> Result<RayleighResult> {
        let x = &self.nodes;
        if x.len() < 3 {
            return Err(invalid("need at least three nodes"));
        }
        let rule = GaussRule::new(6);
        let ne = x.len() - 1;
        // shifts so that weights stay representable
        let mut sm = f64::NEG_INFINITY;
        let mut sk = f64::NEG_INFINITY;
        for e in 0..ne {
            for (r, _) in rule.on(x[e], x[e + 1]) {
                sm = sm.max((self.log_m)(r));
                sk = sk.max((self.log_k)(r));
            }
        }
        let nn = x.len();
        let mut kmat = Tridiagonal::zeros(nn);
        let mut mmat = Tridiagonal::zeros(nn);
        let n2 = (self.n * self.n) as f64;
        for e in 0..ne {
            let (a, b) = (x[e], x[e + 1]);
            let h = b - a;
            for (r, w) in rule.on(a, b) {
                let phi = [(b - r) / h, (r - a) / h];
                let dphi = [-1.0 / h, 1.0 / h];
                let wm = w * ((self.log_m)(r) - sm).exp();
                let wk = w * ((self.log_k)(r) - sk).exp();
                let pot = if self.n > 0 { n2 / (r * r) } else { 0.0 };
                for i in 0..2 {
                    for j in 0..2 {
                        let kv = wk * (dphi[i] * dphi[j] + pot * phi[i] * phi[j]);
                        let mv = wm * phi[i] * phi[j];
                        let (gi, gj) = (e + i, e + j);
                        if gi == gj {
                            kmat.diag[gi] += kv;
                            mmat.diag[gi] += mv;
                        } else if gj == gi + 1 {
                            kmat.upper[gi] += kv;
                            mmat.upper[gi] += mv;
                        } else {
                            kmat.lower[gj] += kv;
                            mmat.lower[gj] += mv;
                        }
                    }
                }
            }
        }
        // Dirichlet nodes are removed
        let lo = usize::from(self.dirichlet_left);
        let hi = nn - usize::from(self.dirichlet_right);
        let sub = |t: &Tridiagonal| -> Tridiagonal {
            let m = hi - lo;
            let mut s = Tridiagonal::zeros(m);
            s.diag.copy_from_slice(&t.diag[lo..hi]);
            s.upper.copy_from_slice(&t.upper[lo..hi - 1]);
            s.lower.copy_from_slice(&t.lower[lo..hi - 1]);
            s
        };
        let k = sub(&kmat);
        let m = sub(&mmat);
        let target = if self.deflate_constants { 2 } else { 1 };
        let (lam, vec, iterations, residual) = smallest_pencil_eigen(&k, &m, target, self.deflate_constants, self.max_iters)?;
        let mut full = vec![0.0; nn];
        full[lo..hi].copy_from_slice(&vec);
        let scale = full.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if scale > 0.0 {
            full.iter_mut().for_each(|v| *v /= scale);
        }
        // undo the representability shifts: ratio scales by e^{sm - sk}
        Ok(RayleighResult { value: (sm - sk).exp() / lam, nodes: x.clone(), extremizer: full, iterations, residual })
    }
}

/// `target`-th smallest eigenpair of `K x = lambda M x` via inertia bisection
/// to a bracket, then shifted inverse iteration.
fn smallest_pencil_eigen(
    k: &Tridiagonal,
    m: &Tridiagonal,
    target: usize,
    deflate: bool,
    max_iters: usize,
) -> Result<(f64, Vec<f64>, usize, f64)> {
    let n = k.len();
    let mut hi = 1.0;
    let mut guard = 0;
    while pencil_count_below(k, m, hi) < target {
        hi *= 4.0;
        guard += 1;
        if guard > 400 {
            return Err(Error::NoConvergence { residual: f64::INFINITY, iterations: guard });
        }
    }
    let mut lo = 0.0;
    if deflate {
        // the zero eigenvalue (constants) is counted at any positive shift
        lo = f64::MIN_POSITIVE;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if pencil_count_below(k, m, mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-6 * hi {
            break;
        }
    }
    let ones = vec![1.0; n];
    let mut m1 = vec![0.0; n];
    m.apply(&ones, &mut m1);
    let one_m_one: f64 = m1.iter().sum();
    let project = |x: &mut [f64]| {
        if deflate {
            let c: f64 = x.iter().zip(&m1).map(|(a, b)| a * b).sum::<f64>() / one_m_one;
            x.iter_mut().for_each(|v| *v -= c);
        }
    };
    let mut shifted = Tridiagonal::zeros(n);
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.37).sin() * 0.1 + i as f64 / n as f64).collect();
    project(&mut x);
    let mut mx = vec![0.0; n];
    let mut kx = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut sigma = lo;
    let mut lam;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iters {
        for i in 0..n {
            shifted.diag[i] = k.diag[i] - sigma * m.diag[i];
        }
        for i in 0..n - 1 {
            shifted.upper[i] = k.upper[i] - sigma * m.upper[i];
            shifted.lower[i] = k.lower[i] - sigma * m.lower[i];
        }
        m.apply(&x, &mut mx);
        shifted.solve(&mx, &mut y);
        project(&mut y);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NoConvergence { residual, iterations: it });
        }
        y.iter_mut().for_each(|v| *v /= norm);
        std::mem::swap(&mut x, &mut y);
        k.apply(&x, &mut kx);
        m.apply(&x, &mut mx);
        let xkx: f64 = x.iter().zip(&kx).map(|(a, b)| a * b).sum();
        let xmx: f64 = x.iter().zip(&mx).map(|(a, b)| a * b).sum();
        lam = xkx / xmx;
        let r2: f64 = kx.iter().zip(&mx).map(|(a, b)| (a - lam * b).powi(2)).sum();
        let s2: f64 = mx.iter().map(|b| (lam * b).powi(2)).sum();
        residual = (r2 / s2).sqrt();
        if residual < 1e-9 {
            // confirm we converged to the requested eigenvalue
            let below = pencil_count_below(k, m, lam * (1.0 - 1e-7));
            if below == target - 1 {
                return Ok((lam, x, it, residual));
            }
            return Err(Error::NoConvergence { residual, iterations: it });
        }
        // keep the shift inside the bracket, below the target eigenvalue
        if it > 3 && lam > lo && lam < hi {
            sigma = lo.max(lam * (1.0 - 1e-3));
        }
    }
    Err(Error::NoConvergence { residual, iterations: max_iters })
}

/// Graded nodes on `[a, b]`, fine near `a`.
pub fn graded_nodes(a: f64, b: f64, count: usize, first: f64) -> Vec<f64> {
    let len = b - a;
    let uniform = len / count as f64;
    if first >= uniform {
        return (0..=count).map(|k| a + len * k as f64 / count as f64).collect();
    }
    // beta / (e^beta - 1) = first * count / len
    let target = first * count as f64 / len;
    let (mut lo, mut hi) = (1e-9, 200.0);
    for _ in 0..200 {
        let mid: f64 = 0.5 * (lo + hi);
        if mid / mid.exp_m1() > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = 0.5 * (lo + hi);
    let mut nodes: Vec<f64> = (0..=count)
        .map(|k| a + len * (beta * k as f64 / count as f64).exp_m1() / beta.exp_m1())
        .collect();
    nodes[count] = b;
    nodes
}

/// Sharpest constant of the core or far block for mode `n`.
pub fn best_constant(w: &WeightSpec, region: Region, centering: Centering, n: u32) -> Result<RayleighResult> {
    let log_u = move |r: f64| r.ln() + w.log_weight(r);
    match region {
        Region::Core => {
            let nodes = graded_nodes(0.0, w.r1, 2000, w.r1 / 2000.0);
            let prob = RayleighProblem {
                nodes,
                log_m: log_u,
                log_k: log_u,
                n,
                dirichlet_left: n > 0,
                dirichlet_right: centering == Centering::Endpoint && n == 0,
                deflate_constants: centering == Centering::Mean && n == 0,
                max_iters: 500,
            };
            prob.solve()
        }
        Region::Far => {
            // cut the tail where u has dropped by e^{-60}
            let l2 = log_u(w.r2);
            let mut b = w.r2 * 1.5;
            while log_u(b) - l2 > -60.0 && b < 1e4 {
                b *= 1.25;
            }
            let nodes = graded_nodes(w.r2, b, 4000, (w.r2 / w.gamma) * 1e-2);
            let prob = RayleighProblem {
                nodes,
                log_m: log_u,
                log_k: move |r: f64| log_u(r) + 2.0 * r.ln(),
                n,
                dirichlet_left: centering == Centering::Endpoint,
                dirichlet_right: false,
                deflate_constants: centering == Centering::Mean,
                max_iters: 500,
            };
            prob.solve()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_have_consistent_derivatives() {
        let shapes = [
            RadialShape::Gaussian { center: 1.0, width: 0.5 },
            RadialShape::Annulus { inner: 1.0, outer: 2.0, width: 0.1 },
            RadialShape::Sinusoid { k: 2.0, decay: 0.25, cosine: false },
            RadialShape::Regularized { n: 2, inner: Box::new(RadialShape::Gaussian { center: 0.0, width: 1.0 }) },
            RadialShape::Power(3),
        ];
        for s in &shapes {
            for r in [0.3, 0.9, 1.7, 3.1] {
                let h = 1e-6;
                let fd = (s.eval(r + h).0 - s.eval(r - h).0) / (2.0 * h);
                assert!((fd - s.eval(r).1).abs() < 1e-6 * (1.0 + fd.abs()), "{s:?} at {r}");
            }
        }
    }

    #[test]
    fn line_poincare_constant() {
        // w = 1 on [0, 1] as a line measure: mean-zero gives (1/pi)^2,
        // vanishing at the right end gives (2/pi)^2
        let nodes: Vec<f64> = (0..=2000).map(|k| k as f64 / 2000.0).collect();
        let mean = RayleighProblem {
            nodes: nodes.clone(),
            log_m: |_| 0.0,
            log_k: |_| 0.0,
            n: 0,
            dirichlet_left: false,
            dirichlet_right: false,
            deflate_constants: true,
            max_iters: 200,
        }
        .solve()
        .unwrap();
        assert!((mean.value / (1.0 / PI).powi(2) - 1.0).abs() < 1e-3);
        let end = RayleighProblem {
            nodes,
            log_m: |_| 0.0,
            log_k: |_| 0.0,
            n: 0,
            dirichlet_left: false,
            dirichlet_right: true,
            deflate_constants: false,
            max_iters: 200,
        }
        .solve()
        .unwrap();
        assert!((end.value / (2.0 / PI).powi(2) - 1.0).abs() < 1e-3);
    }
}
