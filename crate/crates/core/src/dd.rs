//! Minimal double-double arithmetic.
//!
//! The solved spike gaps enter the balance residuals through `Ψ₁(gap/eps)`,
//! whose value moves in steps of `Ψ₁ · ulp(gap/eps)` as the gap sweeps the
//! `f64` grid. At the smallest sweep `eps` that quantum sits an order of
//! magnitude above the residual target, so the solver and the residual
//! evaluation carry gaps and running sums as unevaluated double-double
//! pairs. Only the handful of operations the balance system needs is
//! implemented.

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
///
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

// Plain methods rather than operator impls: the handful of call sites chain
// explicitly and the asymmetric `_f64` variants dominate anyway.
#[allow(clippy::should_implement_trait)]
impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    /// Renormalized value of an arbitrary `hi + lo` pair.
    #[inline]
    pub fn from_sum(hi: f64, lo: f64) -> Self {
        let (s, e) = two_sum(hi, lo);
        Dd { hi: s, lo: e }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn add_f64(self, x: f64) -> Dd {
        let (s, e) = two_sum(self.hi, x);
        let e = e + self.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn sub(self, other: Dd) -> Dd {
        self.add(Dd {
            hi: -other.hi,
            lo: -other.lo,
        })
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    #[inline]
    pub fn mul(self, other: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + self.hi * other.lo + self.lo * other.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn mul_f64(self, x: f64) -> Dd {
        let (p, e) = two_prod(self.hi, x);
        let e = e + self.lo * x;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn div_f64(self, d: f64) -> Dd {
        let q0 = self.hi / d;
        let (p, e) = two_prod(q0, d);
        let r = (self.hi - p) - e + self.lo;
        let q1 = r / d;
        let (hi, lo) = quick_two_sum(q0, q1);
        Dd { hi, lo }
    }

    /// Exponential by range reduction and a term-recurrence Taylor series.
    /// Relative accuracy is a few units in 1e-30, far below anything the
    /// balance residuals can resolve.
    pub fn exp(self) -> Dd {
        if self.hi < -700.0 {
            return Dd::ZERO;
        }
        if self.hi > 700.0 {
            return Dd::from_f64(f64::INFINITY);
        }
        const LN2_HI: f64 = std::f64::consts::LN_2;
        const LN2_LO: f64 = 2.3190468138462996e-17;
        let k = (self.hi / LN2_HI).round();
        // k ln2 must be removed exactly; a bare k*LN2_HI product rounds at
        // ulp(|x|), which exp would amplify into relative error
        let (p, e) = two_prod(k, LN2_HI);
        let r = self.sub(Dd { hi: p, lo: e }).add_f64(-k * LN2_LO);
        // |r| <= ln2/2; term recurrence keeps every coefficient exact
        let mut term = Dd::from_f64(1.0);
        let mut sum = Dd::from_f64(1.0);
        for n in 1..26 {
            term = term.mul(r).div_f64(n as f64);
            sum = sum.add(term);
            if term.hi.abs() < 1e-35 * sum.hi.abs() {
                break;
            }
        }
        let scale = (k as i32).clamp(-1074, 1023);
        let factor = f64::powi(2.0, scale);
        Dd {
            hi: sum.hi * factor,
            lo: sum.lo * factor,
        }
    }
}
