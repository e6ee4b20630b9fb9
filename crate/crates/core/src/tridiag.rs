//! Tridiagonal systems.

/// `lower[k]` sits at `(k+1, k)`, `upper[k]` at `(k, k+1)`.
#[derive(Debug, Clone, Default)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    scratch: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n.saturating_sub(1)],
            diag: vec![0.0; n],
            upper: vec![0.0; n.saturating_sub(1)],
            scratch: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Thomas algorithm without pivoting; intended for M-matrices and
    /// symmetric positive definite systems.
    pub fn solve(&mut self, rhs: &[f64], out: &mut [f64]) {
        let n = self.diag.len();
        debug_assert_eq!(rhs.len(), n);
        let c = &mut self.scratch;
        c.resize(n, 0.0);
        if n == 1 {
            out[0] = rhs[0] / self.diag[0];
            return;
        }
        let mut beta = self.diag[0];
        c[0] = self.upper[0] / beta;
        out[0] = rhs[0] / beta;
        for i in 1..n {
            beta = self.diag[i] - self.lower[i - 1] * c[i - 1];
            if i < n - 1 {
                c[i] = self.upper[i] / beta;
            }
            out[i] = (rhs[i] - self.lower[i - 1] * out[i - 1]) / beta;
        }
        for i in (0..n - 1).rev() {
            out[i] -= c[i] * out[i + 1];
        }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * x[i + 1];
            }
            out[i] = s;
        }
    }
}

/// Number of negative pivots of `A - sigma B` for symmetric tridiagonal
/// `A`, `B` with `B` positive definite; by Sylvester's law this counts the
/// eigenvalues of the pencil below `sigma`.
pub fn pencil_count_below(a: &Tridiagonal, b: &Tridiagonal, sigma: f64) -> usize {
    let n = a.diag.len();
    let mut count = 0;
    let mut d_prev = 1.0;
    let mut off_prev = 0.0;
    for i in 0..n {
        let di = a.diag[i] - sigma * b.diag[i];
        let mut d = if i == 0 { di } else { di - off_prev * off_prev / d_prev };
        if d == 0.0 {
            d = -f64::EPSILON * (a.diag[i].abs() + sigma.abs() * b.diag[i].abs()).max(f64::MIN_POSITIVE);
        }
        if d < 0.0 {
            count += 1;
        }
        if i + 1 < n {
            off_prev = a.upper[i] - sigma * b.upper[i];
        }
        d_prev = d;
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_laplacian() {
        let n = 50;
        let mut t = Tridiagonal::zeros(n);
        for i in 0..n {
            t.diag[i] = 2.0;
        }
        for i in 0..n - 1 {
            t.lower[i] = -1.0;
            t.upper[i] = -1.0;
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = vec![0.0; n];
        t.apply(&x, &mut b);
        let mut y = vec![0.0; n];
        t.solve(&b, &mut y);
        for i in 0..n {
            assert!((x[i] - y[i]).abs() < 1e-11);
        }
    }

    #[test]
    fn inertia_counts_eigenvalues() {
        // eigenvalues of tridiag(-1, 2, -1) are 2 - 2 cos(k pi/(n+1))
        let n = 20;
        let mut a = Tridiagonal::zeros(n);
        let mut b = Tridiagonal::zeros(n);
        for i in 0..n {
            a.diag[i] = 2.0;
            b.diag[i] = 1.0;
        }
        for i in 0..n - 1 {
            a.lower[i] = -1.0;
            a.upper[i] = -1.0;
        }
        for k in 1..=n {
            let lam = 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert_eq!(pencil_count_below(&a, &b, lam + 1e-9), k);
            assert_eq!(pencil_count_below(&a, &b, lam - 1e-9), k - 1);
        }
    }
}
