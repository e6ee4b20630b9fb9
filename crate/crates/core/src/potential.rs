//! Radial potentials: the inverse Laplacian of a radial source, the
//! worst-case annulus potential, and the weights used by the Poincare
//! workbench.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{ProfileKind, RadialGrid, RadialProfile};

/// A radially symmetric potential with closed-form or exact evaluation.
pub trait RadialPotential: Send + Sync {
    fn value(&self, r: f64) -> f64;
    fn derivative(&self, r: f64) -> f64;
    /// Effective coupling `gamma = chi * theta` of the potential.
    fn gamma(&self) -> f64;

    /// Values at the cell centres of `grid`.
    fn sample(&self, grid: &RadialGrid) -> Vec<f64> {
        grid.centers().iter().map(|&r| self.value(r)).collect()
    }
}

/// `H = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPotential;

impl RadialPotential for ZeroPotential {
    fn value(&self, _r: f64) -> f64 {
        0.0
    }
    fn derivative(&self, _r: f64) -> f64 {
        0.0
    }
    fn gamma(&self) -> f64 {
        0.0
    }
}

/// Worst-case potential of the annulus `theta (chi_{B_1} - chi_{B_{1/sqrt 2}})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusPotential {
    gamma: f64,
}

pub fn annulus_potential(gamma: f64) -> Result<AnnulusPotential> {
    AnnulusPotential::new(gamma)
}

impl AnnulusPotential {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self { gamma })
    }

    /// Plateau value `H(0) = (gamma/8)(1 - ln 2)`.
    pub fn plateau(&self) -> f64 {
        self.gamma / 8.0 * (1.0 - std::f64::consts::LN_2)
    }

    /// Laplacian of `H`: `-gamma` on the annulus, zero elsewhere.
    pub fn laplacian(&self, r: f64) -> f64 {
        if (FRAC_1_SQRT_2..1.0).contains(&r) {
            -self.gamma
        } else {
            0.0
        }
    }
}

impl RadialPotential for AnnulusPotential {
    fn value(&self, r: f64) -> f64 {
        let g = self.gamma;
        if r < FRAC_1_SQRT_2 {
            self.plateau()
        } else if r < 1.0 {
            g / 4.0 * (r.ln() + 1.0 - r * r)
        } else {
            -g / 4.0 * r.ln()
        }
    }

    fn derivative(&self, r: f64) -> f64 {
        let g = self.gamma;
        if r < FRAC_1_SQRT_2 {
            0.0
        } else if r < 1.0 {
            g / 4.0 * (1.0 / r - 2.0 * r)
        } else {
            -g / (4.0 * r)
        }
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Exact potential `chi (-Delta)^{-1} g` of a piecewise-constant radial
/// source, normalized so that `H ~ -(chi |g|_1 / 2 pi) ln r` at infinity.
#[derive(Debug, Clone)]
pub struct InducedPotential {
    grid: Arc<RadialGrid>,
    chi: f64,
    source: Vec<f64>,
    /// `P(r_k) = int_0^{r_k} g s ds` at edges.
    prefix: Vec<f64>,
    /// `Q(r_k) = int_{r_k}^inf ln(s) g s ds` at edges.
    suffix: Vec<f64>,
    /// Cached `s^2/2 (ln s - 1/2)` at edges and centres, and `ln` of centres.
    prim_edges: Vec<f64>,
    prim_centers: Vec<f64>,
    ln_centers: Vec<f64>,
}

fn primitive_s_log_s(s: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        0.5 * s * s * (s.ln() - 0.5)
    }
}

impl InducedPotential {
    pub fn new(g: &RadialProfile, chi: f64) -> Result<Self> {
        if g.kind().on_edges() {
            return Err(Error::KindMismatch { expected: ProfileKind::Density, found: g.kind() });
        }
        let grid = g.grid().clone();
        let vals = g.values();
        let last = vals[vals.len() - 1];
        if last != 0.0 {
            return Err(Error::NotCompactlySupported(last));
        }
        Ok(Self::from_parts(grid, chi, vals.to_vec()))
    }

    pub(crate) fn from_parts(grid: Arc<RadialGrid>, chi: f64, source: Vec<f64>) -> Self {
        let n = source.len();
        let prim_edges = grid.edges().iter().map(|&s| primitive_s_log_s(s)).collect();
        let prim_centers = grid.centers().iter().map(|&s| primitive_s_log_s(s)).collect();
        let ln_centers = grid.centers().iter().map(|s| s.ln()).collect();
        let mut pot = Self {
            grid,
            chi,
            source: vec![0.0; n],
            prefix: vec![0.0; n + 1],
            suffix: vec![0.0; n + 1],
            prim_edges,
            prim_centers,
            ln_centers,
        };
        pot.update_source(&source);
        pot
    }

    /// Recompute in place for a new source on the same grid.
    pub(crate) fn update_source(&mut self, source: &[f64]) {
        let e = self.grid.edges();
        let n = source.len();
        self.source.copy_from_slice(source);
        for i in 0..n {
            self.prefix[i + 1] = self.prefix[i] + source[i] * 0.5 * (e[i + 1] * e[i + 1] - e[i] * e[i]);
        }
        self.suffix[n] = 0.0;
        for i in (0..n).rev() {
            self.suffix[i] = self.suffix[i + 1] + source[i] * (self.prim_edges[i + 1] - self.prim_edges[i]);
        }
    }

    fn split(&self, r: f64) -> (f64, f64) {
        let e = self.grid.edges();
        if r >= self.grid.r_max() {
            return (self.prefix[self.prefix.len() - 1], 0.0);
        }
        let i = self.grid.cell_of(r);
        let g = self.source[i];
        let p = self.prefix[i] + g * 0.5 * (r * r - e[i] * e[i]);
        let q = self.suffix[i + 1] + g * (primitive_s_log_s(e[i + 1]) - primitive_s_log_s(r));
        (p, q)
    }

    /// `int_0^r g s ds`.
    pub fn prefix_at(&self, r: f64) -> f64 {
        self.split(r).0
    }

    pub fn prefix_edges(&self) -> &[f64] {
        &self.prefix
    }

    /// Total mass `|g|_1`.
    pub fn mass(&self) -> f64 {
        2.0 * PI * self.prefix[self.prefix.len() - 1]
    }

    /// Values at cell centres, written into `out`.
    pub(crate) fn sample_into(&self, out: &mut [f64]) {
        let c = self.grid.centers();
        let e = self.grid.edges();
        for i in 0..c.len() {
            let r = c[i];
            let g = self.source[i];
            let p = self.prefix[i] + g * 0.5 * (r * r - e[i] * e[i]);
            let q = self.suffix[i + 1] + g * (self.prim_edges[i + 1] - self.prim_centers[i]);
            out[i] = self.chi * (-self.ln_centers[i] * p - q);
        }
    }

    /// Drift `dH/dr = -(chi/r) int_0^r g s ds` at the edges (0 at r = 0).
    pub fn drift_edges(&self) -> Vec<f64> {
        self.grid
            .edges()
            .iter()
            .zip(&self.prefix)
            .map(|(&r, &p)| if r == 0.0 { 0.0 } else { -self.chi * p / r })
            .collect()
    }
}

impl RadialPotential for InducedPotential {
    fn value(&self, r: f64) -> f64 {
        let (p, q) = self.split(r);
        if r == 0.0 {
            -self.chi * q
        } else {
            self.chi * (-r.ln() * p - q)
        }
    }

    fn derivative(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        -self.chi * self.split(r).0 / r
    }

    fn gamma(&self) -> f64 {
        2.0 * self.chi * self.mass() / PI
    }

    fn sample(&self, grid: &RadialGrid) -> Vec<f64> {
        if grid == &*self.grid {
            let mut out = vec![0.0; grid.n_cells()];
            self.sample_into(&mut out);
            out
        } else {
            grid.centers().iter().map(|&r| self.value(r)).collect()
        }
    }
}

/// Potential known only through its cell-centre samples.
#[derive(Debug, Clone)]
pub struct TabulatedPotential {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
    gamma: f64,
}

impl TabulatedPotential {
    pub fn new(profile: &RadialProfile, gamma: f64) -> Result<Self> {
        profile.expect_kind(ProfileKind::Potential)?;
        Ok(Self { grid: profile.grid().clone(), values: profile.values().to_vec(), gamma })
    }
}

impl RadialPotential for TabulatedPotential {
    fn value(&self, r: f64) -> f64 {
        self.grid.interpolate_centers(&self.values, r)
    }

    fn derivative(&self, r: f64) -> f64 {
        let c = self.grid.centers();
        let k = c.partition_point(|&x| x <= r).clamp(1, c.len() - 1);
        (self.values[k] - self.values[k - 1]) / (c[k] - c[k - 1])
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn sample(&self, grid: &RadialGrid) -> Vec<f64> {
        if grid == &*self.grid {
            self.values.clone()
        } else {
            grid.centers().iter().map(|&r| self.value(r)).collect()
        }
    }
}

/// `chi [-ln r int_0^r g s ds - int_r^inf ln(s) g s ds]` at cell centres.
pub fn inverse_laplacian_radial(g: &RadialProfile, chi: f64) -> Result<RadialProfile> {
    let pot = InducedPotential::new(g, chi)?;
    let mut vals = vec![0.0; g.grid().n_cells()];
    pot.sample_into(&mut vals);
    RadialProfile::new(g.grid().clone(), ProfileKind::Potential, vals)
}

/// `dH/dr = -(chi/r) int_0^r g s ds` at edges.
pub fn radial_drift(g: &RadialProfile, chi: f64) -> Result<RadialProfile> {
    let pot = InducedPotential::new(g, chi)?;
    RadialProfile::new(g.grid().clone(), ProfileKind::Drift, pot.drift_edges())
}

/// The annulus source `theta (chi_{B_1} - chi_{B_{1/sqrt 2}})` with
/// `chi theta = gamma`, as cell averages (exact when the grid resolves the
/// breakpoints).
pub fn annulus_source(grid: Arc<RadialGrid>, theta: f64) -> Result<RadialProfile> {
    let e = grid.edges().to_vec();
    let vals = (0..grid.n_cells())
        .map(|i| {
            let lo = e[i].max(FRAC_1_SQRT_2);
            let hi = e[i + 1].min(1.0);
            if hi <= lo {
                0.0
            } else {
                theta * (hi * hi - lo * lo) / (e[i + 1] * e[i + 1] - e[i] * e[i])
            }
        })
        .collect();
    RadialProfile::new(grid, ProfileKind::Density, vals)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WeightKind {
    /// `w = e^H` with the annulus potential.
    GroundState,
    /// `v = (1 + r^2)^{-gamma/2}`.
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub kind: WeightKind,
    pub gamma: f64,
    pub r1: f64,
    pub r2: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Largest residual of each weight condition on the validation sample;
/// all three are `<= 0` when the constants are admissible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightResiduals {
    pub plateau: f64,
    pub transition: f64,
    pub tail: f64,
}

impl WeightSpec {
    pub fn log_weight(&self, r: f64) -> f64 {
        match self.kind {
            WeightKind::GroundState => AnnulusPotential { gamma: self.gamma }.value(r),
            WeightKind::Power => -0.5 * self.gamma * (r * r).ln_1p(),
        }
    }

    /// `w'/w`.
    pub fn log_weight_derivative(&self, r: f64) -> f64 {
        match self.kind {
            WeightKind::GroundState => AnnulusPotential { gamma: self.gamma }.derivative(r),
            WeightKind::Power => -self.gamma * r / (1.0 + r * r),
        }
    }

    /// Sample radii used to fit and validate the constants.
    pub fn sample_points(&self, r_far: f64) -> Vec<f64> {
        let mut pts = Vec::new();
        let n = 4000;
        for k in 0..=n {
            pts.push(self.r1 * k as f64 / n as f64);
            pts.push(self.r1 + (self.r2 - self.r1) * k as f64 / n as f64);
        }
        // log-spaced tail
        let (a, b) = (self.r2.ln(), r_far.ln());
        for k in 0..=n {
            pts.push((a + (b - a) * k as f64 / n as f64).exp());
        }
        pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        pts.dedup();
        pts
    }

    /// Residuals of the three conditions on the sample:
    /// `|ln w(r) - ln w(s)| - ln C0` on `[0, r1]`,
    /// `w'/w + C1 gamma (r - r1)` on `[r1, r2]`,
    /// `w'/w + C2 gamma / r` on `[r2, r_far]`.
    pub fn residuals(&self, r_far: f64) -> WeightResiduals {
        let pts = self.sample_points(r_far);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut transition = f64::NEG_INFINITY;
        let mut tail = f64::NEG_INFINITY;
        for &r in &pts {
            let d = self.log_weight_derivative(r);
            if r <= self.r1 {
                let l = self.log_weight(r);
                lo = lo.min(l);
                hi = hi.max(l);
            }
            if r >= self.r1 && r <= self.r2 {
                transition = transition.max(d + self.c1 * self.gamma * (r - self.r1));
            }
            if r >= self.r2 {
                tail = tail.max(d + self.c2 * self.gamma / r);
            }
        }
        WeightResiduals { plateau: (hi - lo) - self.c0.ln(), transition, tail }
    }

    fn fit_constants(&mut self, r_far: f64) {
        let pts = self.sample_points(r_far);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut c1 = f64::INFINITY;
        let mut c2 = f64::INFINITY;
        for &r in &pts {
            let d = self.log_weight_derivative(r);
            if r <= self.r1 {
                let l = self.log_weight(r);
                lo = lo.min(l);
                hi = hi.max(l);
            }
            if r > self.r1 && r <= self.r2 {
                c1 = c1.min(-d / (self.gamma * (r - self.r1)));
            }
            if r >= self.r2 {
                c2 = c2.min(-d * r / self.gamma);
            }
        }
        // shave a few ulps so that the validation pass is not a coin flip
        self.c0 = (hi - lo).exp() * (1.0 + 1e-14);
        self.c1 = c1 * (1.0 - 1e-12);
        self.c2 = c2 * (1.0 - 1e-12);
    }

    fn validated(mut self) -> Result<Self> {
        let r_far = 1.0e4;
        self.fit_constants(r_far);
        let res = self.residuals(r_far);
        for (name, v, r) in [
            ("plateau", res.plateau, self.r1),
            ("transition", res.transition, self.r2),
            ("tail", res.tail, r_far),
        ] {
            if v > 0.0 || !v.is_finite() {
                return Err(Error::WeightCondition { condition: name, radius: r, residual: v });
            }
        }
        for c in [self.c0, self.c1, self.c2] {
            if !(c > 0.0) {
                return Err(Error::WeightCondition { condition: "positivity", radius: 0.0, residual: c });
            }
        }
        Ok(self)
    }
}

/// `w = e^H` with `r1 = 1/sqrt 2`, `r2 = 3/4` and the tightest constants.
pub fn ground_state_weight(gamma: f64) -> Result<WeightSpec> {
    if !(gamma > 2.0 && gamma.is_finite()) {
        return Err(invalid(format!("ground-state weight needs gamma > 2, got {gamma}")));
    }
    WeightSpec {
        kind: WeightKind::GroundState,
        gamma,
        r1: FRAC_1_SQRT_2,
        r2: 0.75,
        c0: 1.0,
        c1: 1.0,
        c2: 1.0,
    }
    .validated()
}

/// `v = (1 + r^2)^{-gamma/2}` with `r1 = 2/sqrt(gamma)`, `r2 = 1`.
pub fn power_weight(gamma: f64) -> Result<WeightSpec> {
    if !(gamma > 4.0 && gamma.is_finite()) {
        return Err(invalid(format!("power weight needs gamma > 4, got {gamma}")));
    }
    WeightSpec {
        kind: WeightKind::Power,
        gamma,
        r1: 2.0 / gamma.sqrt(),
        r2: 1.0,
        c0: 1.0,
        c1: 1.0,
        c2: 1.0,
    }
    .validated()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Concentration {
    /// `int_0^r g1 s ds >= int_0^r g2 s ds` at every edge.
    MoreConcentrated,
    /// The first edge where the prefix ordering fails.
    Incomparable { first_violation: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationWitness {
    pub ordering: Concentration,
    /// `drift(g1) <= drift(g2) <= 0` at every edge (unit chi); only
    /// meaningful for `MoreConcentrated`.
    pub drift_ordered: bool,
}

pub fn concentration_compare(g1: &RadialProfile, g2: &RadialProfile) -> Result<ConcentrationWitness> {
    g1.same_grid(g2)?;
    g1.expect_kind(ProfileKind::Density)?;
    g2.expect_kind(ProfileKind::Density)?;
    let a = InducedPotential::from_parts(g1.grid().clone(), 1.0, g1.values().to_vec());
    let b = InducedPotential::from_parts(g2.grid().clone(), 1.0, g2.values().to_vec());
    let scale = a.prefix[a.prefix.len() - 1].abs().max(b.prefix[b.prefix.len() - 1].abs()).max(1e-300);
    let tol = 1e-12 * scale;
    let edges = g1.grid().edges();
    let mut ordering = Concentration::MoreConcentrated;
    for k in 0..edges.len() {
        if a.prefix[k] < b.prefix[k] - tol {
            ordering = Concentration::Incomparable { first_violation: edges[k] };
            break;
        }
    }
    let da = a.drift_edges();
    let db = b.drift_edges();
    let drift_ordered = da
        .iter()
        .zip(&db)
        .zip(edges)
        .all(|((x, y), &r)| {
            let t = if r > 0.0 { tol / r } else { 0.0 };
            *x <= y + t && *y <= t
        });
    Ok(ConcentrationWitness { ordering, drift_ordered })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_graded_grid;

    #[test]
    fn annulus_closed_form() {
        let p = annulus_potential(40.0).unwrap();
        assert!((p.value(0.0) - 5.0 * (1.0 - 2f64.ln())).abs() < 1e-12);
        assert!((p.value(0.0) - 1.534_264_097_200_273_4).abs() < 1e-9);
        assert_eq!(p.value(1.0), 0.0);
        assert!((p.value(2.0).exp() - 9.765_625e-4).abs() < 1e-15);
        let left = p.value(FRAC_1_SQRT_2 - 1e-15);
        let right = p.value(FRAC_1_SQRT_2);
        assert!((left - right).abs() < 1e-12 * 40.0);
        assert!(annulus_potential(0.0).is_err());
    }

    #[test]
    fn induced_matches_annulus() {
        for gamma in [16.0, 40.0, 128.0] {
            let grid = build_graded_grid(20.0, 64, 64, gamma).unwrap();
            let chi = gamma / 2.0;
            let g = annulus_source(grid.clone(), 2.0).unwrap();
            let pot = InducedPotential::new(&g, chi).unwrap();
            let exact = annulus_potential(gamma).unwrap();
            for r in [0.0, FRAC_1_SQRT_2, 0.75, 1.0, 2.0] {
                assert!((pot.value(r) - exact.value(r)).abs() < 1e-10 * gamma, "r={r}");
            }
            assert!((pot.gamma() - gamma).abs() < 1e-10 * gamma);
        }
    }

    #[test]
    fn weight_constants() {
        for gamma in [16.0, 32.0, 64.0, 128.0] {
            let w = ground_state_weight(gamma).unwrap();
            assert!((w.c0 - 1.0).abs() < 1e-12);
            // transition constant is (r + r1)/(2r) minimised at r2
            assert!((w.c1 - (0.75 + FRAC_1_SQRT_2) / 1.5).abs() < 1e-6);
            // tail constant is (2 r2^2 - 1)/4 at r2
            assert!((w.c2 - 1.0 / 32.0).abs() < 1e-9);
            let v = power_weight(gamma).unwrap();
            assert!(v.c0 <= std::f64::consts::E.powi(2));
            assert!((v.c0 - (1.0 + 4.0 / gamma).powf(gamma / 2.0)).abs() < 1e-9 * v.c0);
        }
    }
}
