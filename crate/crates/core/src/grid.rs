//! Radial grids on `[0, r_max]` and profiles living on them.
//!
//! Cell-centred kinds (`Density`, `Potential`, `Field`) carry one value per
//! cell and are read as cell averages. Edge kinds (`MassFunction`, `Drift`)
//! carry one value per edge, starting at `r = 0`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::GaussRule;

/// Breakpoints that every graded grid resolves exactly.
pub const STANDARD_BREAKPOINTS: [f64; 3] = [std::f64::consts::FRAC_1_SQRT_2, 0.75, 1.0];

/// Radius of the uniformly refined core.
pub const CORE_RADIUS: f64 = 2.0;

/// Maximal ratio between neighbouring spacings in the far field.
pub const FAR_GROWTH: f64 = 1.04;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    edges: Vec<f64>,
    centers: Vec<f64>,
    volumes: Vec<f64>,
}

impl RadialGrid {
    pub fn from_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(invalid("a grid needs at least one cell"));
        }
        if edges[0] != 0.0 {
            return Err(invalid("grid must start at r = 0"));
        }
        for w in edges.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(invalid(format!("grid edges not strictly increasing near r = {}", w[0])));
            }
        }
        let centers = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let volumes = edges.windows(2).map(|w| PI * (w[1] * w[1] - w[0] * w[0])).collect();
        Ok(Self { edges, centers, volumes })
    }

    /// `n` equal cells on `[0, r_max]`.
    pub fn uniform(r_max: f64, n: usize) -> Result<Self> {
        if !(r_max > 0.0) || n == 0 {
            return Err(invalid("uniform grid needs r_max > 0 and n > 0"));
        }
        let h = r_max / n as f64;
        let mut edges: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        edges[n] = r_max;
        Self::from_edges(edges)
    }

    pub fn n_cells(&self) -> usize {
        self.centers.len()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Area of each annular cell, `pi (r_{i+1}^2 - r_i^2)`.
    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn r_max(&self) -> f64 {
        *self.edges.last().unwrap()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }

    /// Index of `r` among the edges, if it is one (to relative 1e-12).
    pub fn edge_index(&self, r: f64) -> Option<usize> {
        let tol = 1e-12 * r.abs().max(1.0);
        let k = self.edges.partition_point(|&e| e < r - tol);
        (k < self.edges.len() && (self.edges[k] - r).abs() <= tol).then_some(k)
    }

    pub fn require_edge(&self, r: f64) -> Result<usize> {
        self.edge_index(r).ok_or(Error::MissingBreakpoint(r))
    }

    /// Index of the cell containing `r` (clamped to the grid).
    pub fn cell_of(&self, r: f64) -> usize {
        let k = self.edges.partition_point(|&e| e <= r);
        k.saturating_sub(1).min(self.n_cells() - 1)
    }

    /// Linear interpolation of cell-centred values at radius `r`.
    pub fn interpolate_centers(&self, values: &[f64], r: f64) -> f64 {
        let c = &self.centers;
        if r <= c[0] {
            return values[0];
        }
        if r >= c[c.len() - 1] {
            return values[c.len() - 1];
        }
        let k = c.partition_point(|&x| x <= r);
        let (a, b) = (c[k - 1], c[k]);
        let s = (r - a) / (b - a);
        values[k - 1] * (1.0 - s) + values[k] * s
    }

    /// Largest ratio between neighbouring spacings.
    pub fn max_spacing_ratio(&self) -> f64 {
        let h: Vec<f64> = (0..self.n_cells()).map(|i| self.width(i)).collect();
        h.windows(2)
            .map(|w| (w[1] / w[0]).max(w[0] / w[1]))
            .fold(1.0, f64::max)
    }
}

/// Options for [`build_graded_grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_max: f64,
    pub n_core: usize,
    pub n_far: usize,
    pub gamma: f64,
    /// Additional radii that must be grid edges.
    #[serde(default)]
    pub extra_breakpoints: Vec<f64>,
}

impl GridSpec {
    pub fn new(r_max: f64, n_core: usize, n_far: usize, gamma: f64) -> Self {
        Self { r_max, n_core, n_far, gamma, extra_breakpoints: Vec::new() }
    }

    pub fn with_breakpoints(mut self, extra: &[f64]) -> Self {
        self.extra_breakpoints.extend_from_slice(extra);
        self
    }

    /// Spacing used in the core `[0, 2]`.
    pub fn core_spacing(&self) -> f64 {
        (CORE_RADIUS / self.n_core as f64).min(1.0 / (4.0 * self.gamma)).min(1.0 / 64.0)
    }

    pub fn build(&self) -> Result<Arc<RadialGrid>> {
        build_graded_grid_with(self)
    }
}

/// Graded grid: piecewise uniform on `[0, 2]` with exact edges at
/// `1/sqrt(2)`, `3/4`, `1`, geometric growth on `[2, r_max]`.
pub fn build_graded_grid(r_max: f64, n_core: usize, n_far: usize, gamma: f64) -> Result<Arc<RadialGrid>> {
    GridSpec::new(r_max, n_core, n_far, gamma).build()
}

fn build_graded_grid_with(spec: &GridSpec) -> Result<Arc<RadialGrid>> {
    let GridSpec { r_max, n_core, n_far, gamma, .. } = *spec;
    if !(r_max.is_finite() && r_max >= CORE_RADIUS) {
        return Err(invalid(format!("r_max must be at least {CORE_RADIUS}, got {r_max}")));
    }
    if n_core < 16 || n_far < 16 {
        return Err(invalid("n_core and n_far must be at least 16"));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(invalid(format!("gamma must be positive, got {gamma}")));
    }
    for &b in &spec.extra_breakpoints {
        if !(b > 0.0 && b < r_max) {
            return Err(invalid(format!("breakpoint {b} outside (0, r_max)")));
        }
    }
    let h = spec.core_spacing();

    let mut core_bps: Vec<f64> = STANDARD_BREAKPOINTS.to_vec();
    core_bps.extend(spec.extra_breakpoints.iter().copied().filter(|&b| b < CORE_RADIUS));
    core_bps.push(0.0);
    core_bps.push(CORE_RADIUS.min(r_max));
    core_bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    core_bps.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut edges = vec![0.0];
    for w in core_bps.windows(2) {
        let (a, b) = (w[0], w[1]);
        let m = ((b - a) / h - 1e-9).ceil().max(1.0) as usize;
        for k in 1..=m {
            edges.push(if k == m { b } else { a + (b - a) * k as f64 / m as f64 });
        }
    }

    if r_max > CORE_RADIUS {
        let far = far_edges(CORE_RADIUS, r_max, h, n_far);
        edges.extend_from_slice(&far[1..]);
        let last = edges.len() - 1;
        edges[last] = r_max;
        for &b in spec.extra_breakpoints.iter().filter(|&&b| b > CORE_RADIUS) {
            snap_edge(&mut edges, b);
        }
    }
    Ok(Arc::new(RadialGrid::from_edges(edges)?))
}

/// Far-field edges on `[a, b]`, starting at spacing `h0` and growing by at
/// most `FAR_GROWTH` per cell up to a cap chosen so that roughly `n` cells
/// are used.
fn far_edges(a: f64, b: f64, h0: f64, n: usize) -> Vec<f64> {
    let len = b - a;
    let count = |cap: f64| -> f64 {
        // number of cells for spacing s(r) = min(h0 + (q-1)(r-a), cap)
        let q1 = FAR_GROWTH - 1.0;
        let r_cap = a + (cap - h0) / q1;
        if r_cap >= b {
            ((h0 + q1 * len) / h0).ln() / q1
        } else {
            (cap / h0).ln() / q1 + (b - r_cap) / cap
        }
    };
    let cap = if count(h0) <= n as f64 {
        h0
    } else {
        let (mut lo, mut hi) = (h0, len.max(h0));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if count(mid) > n as f64 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    let q1 = FAR_GROWTH - 1.0;
    let spacing = |r: f64| (h0 + q1 * (r - a)).min(cap);
    // march with the target spacing, then rescale so the last edge hits b
    let mut raw = vec![a];
    let mut r = a;
    while r < b {
        let s = spacing(r);
        r += s;
        raw.push(r);
    }
    let overshoot = raw[raw.len() - 1] - b;
    let last_gap = raw[raw.len() - 1] - raw[raw.len() - 2];
    if raw.len() > 2 && overshoot > 0.5 * last_gap {
        raw.pop();
    }
    let scale = len / (raw[raw.len() - 1] - a);
    raw.iter().map(|&x| a + (x - a) * scale).collect()
}

fn snap_edge(edges: &mut [f64], b: f64) {
    let k = edges.partition_point(|&e| e < b);
    let pick = if k == 0 {
        0
    } else if k >= edges.len() || (b - edges[k - 1]) < (edges[k] - b) {
        k - 1
    } else {
        k
    };
    if pick > 0 && pick < edges.len() - 1 {
        edges[pick] = b;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileKind {
    /// Nonnegative cell averages of a density.
    Density,
    /// `M(r) = int_{B_r} rho` at edges, with `M(0) = 0`.
    MassFunction,
    /// Potential sampled at cell centres.
    Potential,
    /// Radial derivative sampled at edges.
    Drift,
    /// Any other cell-centred scalar field.
    Field,
}

impl ProfileKind {
    pub fn on_edges(self) -> bool {
        matches!(self, ProfileKind::MassFunction | ProfileKind::Drift)
    }
}

#[derive(Debug, Clone)]
pub struct RadialProfile {
    grid: Arc<RadialGrid>,
    kind: ProfileKind,
    values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(grid: Arc<RadialGrid>, kind: ProfileKind, values: Vec<f64>) -> Result<Self> {
        let expected = if kind.on_edges() { grid.n_cells() + 1 } else { grid.n_cells() };
        if values.len() != expected {
            return Err(Error::LengthMismatch { expected, found: values.len() });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite profile value {v}")));
        }
        match kind {
            ProfileKind::Density => {
                if let Some((i, &v)) = values.iter().enumerate().find(|(_, &v)| v < 0.0) {
                    return Err(Error::NegativeDensity { value: v, radius: grid.centers()[i], t: 0.0 });
                }
            }
            ProfileKind::MassFunction => {
                if values[0] != 0.0 {
                    return Err(invalid("mass function must vanish at r = 0"));
                }
                let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for k in 1..values.len() {
                    if values[k] < values[k - 1] - 1e-13 * scale {
                        return Err(Error::DecreasingMassFunction { index: k, radius: grid.edges()[k] });
                    }
                }
            }
            _ => {}
        }
        Ok(Self { grid, kind, values })
    }

    /// Samples `f` at cell centres (or edges for edge kinds).
    pub fn from_fn(grid: Arc<RadialGrid>, kind: ProfileKind, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = if kind.on_edges() {
            grid.edges().iter().map(|&r| f(r)).collect()
        } else {
            grid.centers().iter().map(|&r| f(r)).collect()
        };
        Self::new(grid, kind, values)
    }

    /// Exact-to-quadrature cell averages `(1/|cell|) int_cell f dx` of a
    /// radial function; 8-point Gauss-Legendre in `r` on each cell.
    pub fn cell_averages(grid: Arc<RadialGrid>, kind: ProfileKind, f: impl Fn(f64) -> f64) -> Result<Self> {
        if kind.on_edges() {
            return Err(invalid("cell averages need a cell-centred kind"));
        }
        let rule = GaussRule::new(8);
        let values = (0..grid.n_cells())
            .map(|i| {
                let (a, b) = (grid.edges()[i], grid.edges()[i + 1]);
                let s: f64 = rule.on(a, b).map(|(r, w)| w * f(r) * r).sum();
                2.0 * PI * s / grid.volumes()[i]
            })
            .collect();
        Self::new(grid, kind, values)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn expect_kind(&self, kind: ProfileKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::KindMismatch { expected: kind, found: self.kind })
        }
    }

    pub fn same_grid(&self, other: &RadialProfile) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.kind, self.values.iter().map(|v| v * factor).collect())
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// `int rho dx` for a density (or any cell-centred field).
pub fn integrate(profile: &RadialProfile) -> Result<f64> {
    if profile.kind.on_edges() {
        return Err(invalid("integrate expects a cell-centred profile"));
    }
    Ok(dot_volume(profile.grid.volumes(), &profile.values))
}

pub(crate) fn dot_volume(volumes: &[f64], values: &[f64]) -> f64 {
    // pairwise-compensated sum keeps mass checks at roundoff over many cells
    let mut sum = 0.0;
    let mut comp = 0.0;
    for (v, x) in volumes.iter().zip(values) {
        let y = v * x - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Cumulative masses at every edge.
pub fn to_mass_function(rho: &RadialProfile) -> Result<RadialProfile> {
    rho.expect_kind(ProfileKind::Density)?;
    let mut m = Vec::with_capacity(rho.values.len() + 1);
    m.push(0.0);
    let mut acc = 0.0;
    for (v, x) in rho.grid.volumes().iter().zip(&rho.values) {
        acc += v * x;
        m.push(acc);
    }
    RadialProfile::new(rho.grid.clone(), ProfileKind::MassFunction, m)
}

/// Inverse of [`to_mass_function`].
pub fn from_mass_function(m: &RadialProfile) -> Result<RadialProfile> {
    m.expect_kind(ProfileKind::MassFunction)?;
    let vals = m
        .values
        .windows(2)
        .zip(m.grid.volumes())
        .map(|(w, v)| ((w[1] - w[0]) / v).max(0.0))
        .collect();
    RadialProfile::new(m.grid.clone(), ProfileKind::Density, vals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_grid_has_breakpoints() {
        for gamma in [8.0, 16.0, 64.0, 128.0] {
            let g = build_graded_grid(100.0, 128, 128, gamma).unwrap();
            for b in STANDARD_BREAKPOINTS {
                assert!(g.edge_index(b).is_some(), "gamma={gamma} b={b}");
            }
            assert_eq!(g.r_max(), 100.0);
            let h = GridSpec::new(100.0, 128, 128, gamma).core_spacing();
            for i in 0..g.n_cells() {
                if g.edges()[i + 1] <= 2.0 {
                    assert!(g.width(i) <= h * (1.0 + 1e-9));
                }
            }
        }
    }

    #[test]
    fn far_field_grows_geometrically() {
        let g = build_graded_grid(200.0, 64, 200, 32.0).unwrap();
        let start = g.edge_index(2.0).unwrap();
        for i in start..g.n_cells() - 1 {
            let q = g.width(i + 1) / g.width(i);
            assert!(q <= 1.05 && q >= 1.0 / 1.05, "ratio {q} at {i}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(build_graded_grid(1.0, 64, 64, 16.0).is_err());
        assert!(build_graded_grid(10.0, 8, 64, 16.0).is_err());
        assert!(build_graded_grid(10.0, 64, 64, 0.0).is_err());
        assert!(build_graded_grid(10.0, 64, 64, -3.0).is_err());
    }

    #[test]
    fn extra_breakpoints_are_edges() {
        let g = GridSpec::new(50.0, 64, 64, 16.0).with_breakpoints(&[0.5, 4.0, 6.0 / 7.0]).build().unwrap();
        for b in [0.5, 4.0, 6.0 / 7.0] {
            assert!(g.edge_index(b).is_some());
        }
    }
}
