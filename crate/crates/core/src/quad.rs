//! Gauss-Legendre panel quadrature and compensated summation.
//!
//! All integrands in this crate are smooth and exponentially decaying, so
//! composite Gauss-Legendre panels of unit-scale length converge far below
//! the tolerances used anywhere downstream. Rules are cached per node count.

use std::f64::consts::PI;

/// Compensated (Kahan) accumulator.
///
/// Partial sums of the curvature forcing enter the balance residuals
/// multiplied by `eps^2`; plain summation noise would exceed the residual
/// targets at the smallest `eps`, compensation keeps it near one ulp.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
///
/// Newton iteration on the Legendre polynomial with the Chebyshev-like
/// initial guess; symmetric pairs are filled together.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "need at least two nodes");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_deriv(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_deriv(n, z);
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Value and derivative of the Legendre polynomial `P_n` at `z`.
fn legendre_with_deriv(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// A reusable composite rule: panel edges plus a per-panel Gauss rule.
pub struct PanelRule {
    pub edges: Vec<f64>,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PanelRule {
    /// Splits `[lo, hi]` into panels no longer than `max_len` and attaches an
    /// `n`-point Gauss rule. Edge placement is uniform, so a symmetric
    /// interval produces a rule symmetric about the origin.
    pub fn new(lo: f64, hi: f64, max_len: f64, n: usize) -> Self {
        assert!(hi > lo && max_len > 0.0);
        let count = ((hi - lo) / max_len).ceil().max(1.0) as usize;
        let edges = (0..=count)
            .map(|i| lo + (hi - lo) * i as f64 / count as f64)
            .collect();
        let (nodes, weights) = gauss_legendre(n);
        Self {
            edges,
            nodes,
            weights,
        }
    }

    /// Integrates `f` over the composite rule. Returns the integral together
    /// with the corresponding sum of `|f|`, which callers use as the natural
    /// absolute scale when a value is close to an exact cancellation.
    pub fn integrate_with_l1(&self, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
        let mut total = KahanSum::new();
        let mut l1 = KahanSum::new();
        for p in 0..self.edges.len() - 1 {
            let a = self.edges[p];
            let b = self.edges[p + 1];
            let mid = 0.5 * (a + b);
            let sc = 0.5 * (b - a);
            for (t, w) in self.nodes.iter().zip(&self.weights) {
                let v = f(mid + sc * t) * w * sc;
                total.add(v);
                l1.add(v.abs());
            }
        }
        (total.value(), l1.value())
    }

    pub fn integrate(&self, f: impl FnMut(f64) -> f64) -> f64 {
        self.integrate_with_l1(f).0
    }
}

/// Tensor-product integration of `f(x, y)` over `[x_lo, x_hi] × [y_lo, y_hi]`.
///
/// Returns `(integral, l1)` as in [`PanelRule::integrate_with_l1`].
pub fn integrate_2d(
    x_rule: &PanelRule,
    y_rule: &PanelRule,
    mut f: impl FnMut(f64, f64) -> f64,
) -> (f64, f64) {
    let mut total = KahanSum::new();
    let mut l1 = KahanSum::new();
    for px in 0..x_rule.edges.len() - 1 {
        let ax = x_rule.edges[px];
        let bx = x_rule.edges[px + 1];
        let midx = 0.5 * (ax + bx);
        let scx = 0.5 * (bx - ax);
        for py in 0..y_rule.edges.len() - 1 {
            let ay = y_rule.edges[py];
            let by = y_rule.edges[py + 1];
            let midy = 0.5 * (ay + by);
            let scy = 0.5 * (by - ay);
            for (tx, wx) in x_rule.nodes.iter().zip(&x_rule.weights) {
                let x = midx + scx * tx;
                let wxs = wx * scx;
                for (ty, wy) in y_rule.nodes.iter().zip(&y_rule.weights) {
                    let y = midy + scy * ty;
                    let v = f(x, y) * wxs * wy * scy;
                    total.add(v);
                    l1.add(v.abs());
                }
            }
        }
    }
    (total.value(), l1.value())
}
