//! Piecewise-cubic interpolation: Hermite on uniform grids (value + slope
//! data, as produced by the ODE solvers) and a not-a-knot spline for tables
//! that carry values only (curvature samples, the log-interaction table).
//!
//! Not-a-knot is used instead of natural end conditions so that splines of
//! polynomials up to cubic degree are reproduced exactly; natural conditions
//! would flatten the second derivative at the ends and break the curvature
//! certification of perfectly valid models.

use crate::dd::Dd;

/// Cubic Hermite interpolant on a uniform grid.
///
/// With exact slopes the interpolation error is `O(h^4)` in the value and
/// `O(h^3)` in the derivative of the interpolant.
#[derive(Clone, Debug)]
pub struct UniformHermite {
    x0: f64,
    dx: f64,
    y: Vec<f64>,
    dy: Vec<f64>,
}

impl UniformHermite {
    pub fn new(x0: f64, dx: f64, y: Vec<f64>, dy: Vec<f64>) -> Self {
        assert!(dx > 0.0);
        assert_eq!(y.len(), dy.len());
        assert!(y.len() >= 2);
        Self { x0, dx, y, dy }
    }

    #[inline]
    fn locate(&self, x: f64) -> (usize, f64) {
        let t = (x - self.x0) / self.dx;
        let j = (t.floor() as isize).clamp(0, self.y.len() as isize - 2) as usize;
        (j, t - j as f64)
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.dx * (self.y.len() - 1) as f64
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let (j, t) = self.locate(x);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y[j]
            + h10 * self.dx * self.dy[j]
            + h01 * self.y[j + 1]
            + h11 * self.dx * self.dy[j + 1]
    }

    /// Derivative of the interpolant.
    #[inline]
    pub fn eval_deriv(&self, x: f64) -> f64 {
        let (j, t) = self.locate(x);
        let t2 = t * t;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -6.0 * t2 + 6.0 * t;
        let d11 = 3.0 * t2 - 2.0 * t;
        (d00 * self.y[j]
            + d10 * self.dx * self.dy[j]
            + d01 * self.y[j + 1]
            + d11 * self.dx * self.dy[j + 1])
            / self.dx
    }
}

/// Cubic spline with not-a-knot end conditions on a strictly increasing grid.
#[derive(Clone, Debug)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len());
        let n = x.len();
        assert!(n >= 4, "not-a-knot spline needs at least 4 points");
        assert!(
            x.windows(2).all(|p| p[1] > p[0]),
            "spline abscissae must be strictly increasing"
        );
        let m = solve_not_a_knot(&x, &y);
        Self { x, y, m }
    }

    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.x.last().unwrap()
    }

    #[inline]
    fn segment(&self, x: f64) -> usize {
        // rightmost knot <= x, clamped to a valid segment
        match self
            .x
            .binary_search_by(|v| v.partial_cmp(&x).expect("non-finite abscissa"))
        {
            Ok(j) => j.min(self.x.len() - 2),
            Err(j) => j.saturating_sub(1).min(self.x.len() - 2),
        }
    }

    pub fn eval(&self, xq: f64) -> f64 {
        let j = self.segment(xq);
        let h = self.x[j + 1] - self.x[j];
        let a = (self.x[j + 1] - xq) / h;
        let b = (xq - self.x[j]) / h;
        a * self.y[j]
            + b * self.y[j + 1]
            + ((a * a * a - a) * self.m[j] + (b * b * b - b) * self.m[j + 1]) * h * h / 6.0
    }

    pub fn eval_deriv(&self, xq: f64) -> f64 {
        let j = self.segment(xq);
        let h = self.x[j + 1] - self.x[j];
        let a = (self.x[j + 1] - xq) / h;
        let b = (xq - self.x[j]) / h;
        (self.y[j + 1] - self.y[j]) / h
            + ((3.0 * b * b - 1.0) * self.m[j + 1] - (3.0 * a * a - 1.0) * self.m[j]) * h / 6.0
    }

    pub fn eval_second_deriv(&self, xq: f64) -> f64 {
        let j = self.segment(xq);
        let h = self.x[j + 1] - self.x[j];
        let a = (self.x[j + 1] - xq) / h;
        let b = (xq - self.x[j]) / h;
        a * self.m[j] + b * self.m[j + 1]
    }

    /// Double-double evaluation of the same piecewise cubic. The spline
    /// itself is defined by its `f64` knots and moments; this evaluates that
    /// exact function at an extended-precision abscissa.
    pub fn eval_dd(&self, xq: Dd) -> Dd {
        let j = self.segment(xq.hi);
        let h = self.x[j + 1] - self.x[j];
        let a = Dd::from_f64(self.x[j + 1]).sub(xq).div_f64(h);
        let b = xq.add_f64(-self.x[j]).div_f64(h);
        let cubic = |t: Dd| t.mul(t).mul(t).sub(t);
        let bend = cubic(a)
            .mul_f64(self.m[j])
            .add(cubic(b).mul_f64(self.m[j + 1]))
            .mul_f64(h * h / 6.0);
        a.mul_f64(self.y[j]).add(b.mul_f64(self.y[j + 1])).add(bend)
    }

    /// Double-double derivative of the piecewise cubic.
    pub fn eval_deriv_dd(&self, xq: Dd) -> Dd {
        let j = self.segment(xq.hi);
        let h = self.x[j + 1] - self.x[j];
        let a = Dd::from_f64(self.x[j + 1]).sub(xq).div_f64(h);
        let b = xq.add_f64(-self.x[j]).div_f64(h);
        let sq3m1 = |t: Dd| t.mul(t).mul_f64(3.0).add_f64(-1.0);
        let bend = sq3m1(b)
            .mul_f64(self.m[j + 1])
            .sub(sq3m1(a).mul_f64(self.m[j]))
            .mul_f64(h / 6.0);
        Dd::from_f64((self.y[j + 1] - self.y[j]) / h).add(bend)
    }
}

/// Second derivatives `M_j` for the not-a-knot spline.
///
/// Interior moment equations are reduced to a tridiagonal system by
/// eliminating `M_0` and `M_{n-1}` through the third-derivative continuity
/// conditions at the first and last interior knots.
fn solve_not_a_knot(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|p| p[1] - p[0]).collect();
    let rhs = |j: usize| (y[j + 1] - y[j]) / h[j] - (y[j] - y[j - 1]) / h[j - 1];

    // Unknowns M_1 .. M_{n-2}; m = n-2 of them.
    let m = n - 2;
    let mut sub = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut sup = vec![0.0; m];
    let mut b = vec![0.0; m];
    for (row, j) in (1..=n - 2).enumerate() {
        sub[row] = h[j - 1] / 6.0;
        diag[row] = (h[j - 1] + h[j]) / 3.0;
        sup[row] = h[j] / 6.0;
        b[row] = rhs(j);
    }
    // M_0 = M_1 - h_0 (M_2 - M_1)/h_1  folded into the first row
    diag[0] += sub[0] * (1.0 + h[0] / h[1]);
    sup[0] -= sub[0] * (h[0] / h[1]);
    sub[0] = 0.0;
    // M_{n-1} = M_{n-2} + h_{n-2} (M_{n-2} - M_{n-3})/h_{n-3}  into the last row
    let hl = h[n - 2] / h[n - 3];
    diag[m - 1] += sup[m - 1] * (1.0 + hl);
    sub[m - 1] -= sup[m - 1] * hl;
    sup[m - 1] = 0.0;

    // Thomas elimination
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    c[0] = sup[0] / diag[0];
    d[0] = b[0] / diag[0];
    for i in 1..m {
        let denom = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / denom;
        d[i] = (b[i] - sub[i] * d[i - 1]) / denom;
    }
    let mut inner = vec![0.0; m];
    inner[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        inner[i] = d[i] - c[i] * inner[i + 1];
    }

    let mut out = vec![0.0; n];
    out[1..=n - 2].copy_from_slice(&inner);
    out[0] = out[1] - h[0] * (out[2] - out[1]) / h[1];
    out[n - 1] = out[n - 2] + h[n - 2] * (out[n - 2] - out[n - 3]) / h[n - 3];
    out
}
