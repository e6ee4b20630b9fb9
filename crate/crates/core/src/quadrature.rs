//! Gauss-Legendre rules, adaptive Gauss-Kronrod integration and the
//! exponential integral E1.

use std::collections::BinaryHeap;

use crate::error::{invalid, Result};

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Fixed Gauss-Legendre rule mapped onto arbitrary intervals.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    /// Iterator of `(x, w)` pairs on `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.on(a, b).map(|(x, w)| w * f(x)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive 7/15-point Gauss-Kronrod on a finite interval (global
/// subdivision: always split the interval with the largest error).
pub fn integrate_adaptive(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(invalid("integration limits must be finite"));
    }
    if a == b {
        return Ok(0.0);
    }
    let (v0, e0) = kronrod15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { err: e0, lo: a, hi: b, val: v0 });
    let (mut total, mut err) = (v0, e0);
    let min_width = 1e-15 * (b - a).abs();
    for _ in 0..MAX_SUBDIVISIONS {
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let Some(p) = heap.pop() else { break };
        if (p.hi - p.lo).abs() < min_width {
            // cannot refine further; keep it and stop
            heap.push(p);
            break;
        }
        let mid = 0.5 * (p.lo + p.hi);
        let (vl, el) = kronrod15(&f, p.lo, mid);
        let (vr, er) = kronrod15(&f, mid, p.hi);
        total += vl + vr - p.val;
        err += el + er - p.err;
        heap.push(Piece { err: el, lo: p.lo, hi: mid, val: vl });
        heap.push(Piece { err: er, lo: mid, hi: p.hi, val: vr });
    }
    // resum to shed the drift of the running total
    let mut vals: Vec<f64> = heap.into_iter().map(|p| p.val).collect();
    vals.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    Ok(vals.iter().sum())
}

const MAX_SUBDIVISIONS: usize = 20_000;

struct Piece {
    err: f64,
    lo: f64,
    hi: f64,
    val: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err).is_eq()
    }
}

impl Eq for Piece {}

impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Adaptive integration over `[a, inf)` through the map `x = a + s / (1 - s)`.
pub fn integrate_to_infinity(
    f: impl Fn(f64) -> f64,
    a: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    let g = |s: f64| {
        if s >= 1.0 {
            return 0.0;
        }
        let d = 1.0 - s;
        let v = f(a + s / d) / (d * d);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate_adaptive(g, 0.0, 1.0, abs_tol, rel_tol)
}

/// Exponential integral `E1(x) = int_x^inf e^{-y}/y dy` for `x > 0`,
/// evaluated as `e^{-x} int_0^inf e^{-u}/(x+u) du` by adaptive quadrature.
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(invalid(format!("E1 needs a positive finite argument, got {x}")));
    }
    // split at u = x where the 1/(x+u) factor changes scale
    let inner = |u: f64| (-u).exp() / (x + u);
    let near = integrate_adaptive(inner, 0.0, x.min(1.0), 0.0, 1e-14)?;
    let far = integrate_to_infinity(inner, x.min(1.0), 0.0, 1e-14)?;
    Ok((-x).exp() * (near + far))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_exact_for_polynomials() {
        for n in 1..12 {
            let rule = GaussRule::new(n);
            for deg in 0..(2 * n) {
                let got = rule.integrate(-1.0, 2.0, |x| x.powi(deg as i32));
                let want = (2f64.powi(deg as i32 + 1) - (-1f64).powi(deg as i32 + 1)) / (deg as f64 + 1.0);
                assert!((got - want).abs() < 1e-12 * want.abs().max(1.0), "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn adaptive_handles_peaks() {
        let v = integrate_adaptive(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 0.0, 1e-12).unwrap();
        let want = 2.0 * (1.0 / 1e-2) * (1.0f64 / 1e-2).atan();
        assert!((v - want).abs() < 1e-9 * want);
    }

    #[test]
    fn e1_known_values() {
        // E1(1) = 0.219383934395520...
        assert!((exp_integral_e1(1.0).unwrap() - 0.219_383_934_395_520_3).abs() < 1e-13);
        assert!((exp_integral_e1(0.01).unwrap() - 4.037_929_576_538_114).abs() < 1e-11);
        assert!((exp_integral_e1(10.0).unwrap() - 4.156_968_929_685_324e-6).abs() < 1e-17);
    }
}
