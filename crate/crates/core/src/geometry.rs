//! Curvature of the boundary segment along arclength: `H(γ(s))` with two
//! derivatives, plus certification of the convexity and equal-endpoint
//! assumptions the whole construction stands on.
//!
//! Two model families: a cubic polynomial whose vertex offset is solved at
//! construction so the endpoint curvatures match exactly, and a not-a-knot
//! spline through user samples with clamped quadratic continuation outside
//! the sampled span.

use crate::dd::Dd;
use crate::interp::CubicSpline;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("s = {s} outside the extrapolation margin [{lo}, {hi}]")]
    OutOfDomain { s: f64, lo: f64, hi: f64 },
    #[error("invalid curvature model: {0}")]
    InvalidModel(String),
}

/// Fraction of the segment length allowed as extrapolation margin on either
/// side; shooting iterates may transiently overshoot the endpoint.
pub const EXTRAPOLATION_MARGIN: f64 = 0.1;

#[derive(Clone, Debug)]
pub enum CurvatureModel {
    Poly(PolyModel),
    Spline(SplineModel),
}

/// `H(γ(s)) = h0 + a (s - s_star)^2 + beta (s - s_star)^3` on
/// `[s_begin, s_begin + b]`.
#[derive(Clone, Debug)]
pub struct PolyModel {
    pub h0: f64,
    pub a: f64,
    pub beta: f64,
    pub s_begin: f64,
    pub b: f64,
    pub s_star: f64,
}

/// Spline through `(s, H)` samples; outside the samples the model continues
/// with the quadratic Taylor polynomial frozen at the nearer endpoint.
#[derive(Clone, Debug)]
pub struct SplineModel {
    spline: CubicSpline,
    pub s_begin: f64,
    pub b: f64,
    lo_state: [f64; 3],
    hi_state: [f64; 3],
}

impl PolyModel {
    /// Solves the vertex offset so that `H(s_begin) = H(s_begin + b)`.
    ///
    /// In local coordinates the matching condition is the quadratic
    /// `3β σ*² − (2a + 3βb) σ* + (ab + βb²) = 0`; the root continuous in
    /// `β → 0` (where it degenerates to `b/2`) is taken, written in the
    /// cancellation-free conjugate form.
    pub fn new(h0: f64, a: f64, beta: f64, b: f64, s_begin: f64) -> Result<Self, GeometryError> {
        if !(b > 0.0) || !a.is_finite() || !beta.is_finite() || !h0.is_finite() {
            return Err(GeometryError::InvalidModel(format!(
                "bad parameters h0={h0} a={a} beta={beta} b={b}"
            )));
        }
        if !(a > 0.0) {
            return Err(GeometryError::InvalidModel(format!(
                "quadratic coefficient a = {a} must be positive for a convex model"
            )));
        }
        let disc = 4.0 * a * a - 3.0 * beta * beta * b * b;
        if disc < 0.0 {
            return Err(GeometryError::InvalidModel(format!(
                "no endpoint-matching vertex exists for a={a}, beta={beta}, b={b}"
            )));
        }
        let sigma_star = 2.0 * (a * b + beta * b * b) / (2.0 * a + 3.0 * beta * b + disc.sqrt());
        if !(sigma_star > 0.0 && sigma_star < b) {
            return Err(GeometryError::InvalidModel(format!(
                "endpoint-matching vertex {sigma_star} falls outside (0, {b})"
            )));
        }
        Ok(Self {
            h0,
            a,
            beta,
            s_begin,
            b,
            s_star: s_begin + sigma_star,
        })
    }

    /// Symmetric quadratic: vertex at the midpoint.
    pub fn symmetric(h0: f64, a: f64, b: f64) -> Self {
        Self::new(h0, a, 0.0, b, 0.0).expect("symmetric quadratic is always valid")
    }

    /// Explicit vertex, no endpoint matching; lets tests and users build
    /// models that fail certification.
    pub fn with_vertex(h0: f64, a: f64, beta: f64, s_star: f64, b: f64, s_begin: f64) -> Self {
        Self {
            h0,
            a,
            beta,
            s_begin,
            b,
            s_star,
        }
    }
}

impl SplineModel {
    pub fn from_samples(samples: &[(f64, f64)]) -> Result<Self, GeometryError> {
        if samples.len() < 8 {
            return Err(GeometryError::InvalidModel(format!(
                "need at least 8 curvature samples, got {}",
                samples.len()
            )));
        }
        if !samples.windows(2).all(|w| w[1].0 > w[0].0) {
            return Err(GeometryError::InvalidModel(
                "curvature samples must have strictly increasing arclength".into(),
            ));
        }
        let x: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let y: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let s_begin = x[0];
        let s_end = *x.last().unwrap();
        let spline = CubicSpline::new(x, y);
        let state = |s: f64| {
            [
                spline.eval(s),
                spline.eval_deriv(s),
                spline.eval_second_deriv(s),
            ]
        };
        Ok(Self {
            lo_state: state(s_begin),
            hi_state: state(s_end),
            s_begin,
            b: s_end - s_begin,
            spline,
        })
    }
}

impl CurvatureModel {
    pub fn s_begin(&self) -> f64 {
        match self {
            CurvatureModel::Poly(m) => m.s_begin,
            CurvatureModel::Spline(m) => m.s_begin,
        }
    }

    pub fn b(&self) -> f64 {
        match self {
            CurvatureModel::Poly(m) => m.b,
            CurvatureModel::Spline(m) => m.b,
        }
    }

    pub fn s_end(&self) -> f64 {
        self.s_begin() + self.b()
    }

    fn margin(&self) -> (f64, f64) {
        let m = EXTRAPOLATION_MARGIN * self.b();
        (self.s_begin() - m, self.s_end() + m)
    }

    pub fn in_margin(&self, s: f64) -> bool {
        let (lo, hi) = self.margin();
        s >= lo && s <= hi
    }

    /// Unchecked total evaluation; the polynomial uses its own formula
    /// everywhere, the spline continues quadratically past its span.
    #[inline]
    pub fn eval_h(&self, s: f64) -> f64 {
        match self {
            CurvatureModel::Poly(m) => {
                let u = s - m.s_star;
                m.h0 + (m.a + m.beta * u) * u * u
            }
            CurvatureModel::Spline(m) => {
                if s < m.s_begin {
                    let d = s - m.s_begin;
                    m.lo_state[0] + m.lo_state[1] * d + 0.5 * m.lo_state[2] * d * d
                } else if s > m.s_begin + m.b {
                    let d = s - (m.s_begin + m.b);
                    m.hi_state[0] + m.hi_state[1] * d + 0.5 * m.hi_state[2] * d * d
                } else {
                    m.spline.eval(s)
                }
            }
        }
    }

    #[inline]
    pub fn eval_hp(&self, s: f64) -> f64 {
        match self {
            CurvatureModel::Poly(m) => {
                let u = s - m.s_star;
                (2.0 * m.a + 3.0 * m.beta * u) * u
            }
            CurvatureModel::Spline(m) => {
                if s < m.s_begin {
                    m.lo_state[1] + m.lo_state[2] * (s - m.s_begin)
                } else if s > m.s_begin + m.b {
                    m.hi_state[1] + m.hi_state[2] * (s - (m.s_begin + m.b))
                } else {
                    m.spline.eval_deriv(s)
                }
            }
        }
    }

    #[inline]
    pub fn eval_hpp(&self, s: f64) -> f64 {
        match self {
            CurvatureModel::Poly(m) => 2.0 * m.a + 6.0 * m.beta * (s - m.s_star),
            CurvatureModel::Spline(m) => {
                if s < m.s_begin {
                    m.lo_state[2]
                } else if s > m.s_begin + m.b {
                    m.hi_state[2]
                } else {
                    m.spline.eval_second_deriv(s)
                }
            }
        }
    }

    /// `H'` at an extended-precision arclength; same function as
    /// [`eval_hp`](Self::eval_hp), evaluated in double-double so the
    /// balance-system sums resolve below one ulp of the positions.
    #[inline]
    pub fn eval_hp_dd(&self, s: Dd) -> Dd {
        match self {
            CurvatureModel::Poly(m) => {
                let u = s.add_f64(-m.s_star);
                u.mul_f64(3.0 * m.beta).add_f64(2.0 * m.a).mul(u)
            }
            CurvatureModel::Spline(m) => {
                if s.hi < m.s_begin {
                    s.add_f64(-m.s_begin)
                        .mul_f64(m.lo_state[2])
                        .add_f64(m.lo_state[1])
                } else if s.hi > m.s_begin + m.b {
                    s.add_f64(-(m.s_begin + m.b))
                        .mul_f64(m.hi_state[2])
                        .add_f64(m.hi_state[1])
                } else {
                    m.spline.eval_deriv_dd(s)
                }
            }
        }
    }

    /// Checked evaluations: error outside the extrapolation margin.
    pub fn try_eval_h(&self, s: f64) -> Result<f64, GeometryError> {
        self.check_domain(s)?;
        Ok(self.eval_h(s))
    }

    pub fn try_eval_hp(&self, s: f64) -> Result<f64, GeometryError> {
        self.check_domain(s)?;
        Ok(self.eval_hp(s))
    }

    pub fn try_eval_hpp(&self, s: f64) -> Result<f64, GeometryError> {
        self.check_domain(s)?;
        Ok(self.eval_hpp(s))
    }

    fn check_domain(&self, s: f64) -> Result<(), GeometryError> {
        let (lo, hi) = self.margin();
        if s < lo || s > hi {
            Err(GeometryError::OutOfDomain { s, lo, hi })
        } else {
            Ok(())
        }
    }
}

/// Certification thresholds for [`validate_h1`].
#[derive(Clone, Copy, Debug)]
pub struct H1Tolerances {
    /// Certified lower bound demanded of `H''` over the segment.
    pub c0_min: f64,
    /// Allowed endpoint curvature mismatch; `None` picks the default for the
    /// model kind (analytic models are held to a much tighter match than
    /// splines, whose mismatch also carries modeling error).
    pub endpoint: Option<f64>,
}

impl Default for H1Tolerances {
    fn default() -> Self {
        Self {
            c0_min: 1e-8,
            endpoint: None,
        }
    }
}

/// Certification scan result.
#[derive(Clone, Copy, Debug)]
pub struct H1Report {
    /// Certified lower bound: minimum of `H''` over the scan grid.
    pub c0: f64,
    pub c0_location: f64,
    pub endpoint_mismatch: f64,
    pub endpoint_tolerance: f64,
    pub convex_ok: bool,
    pub endpoints_ok: bool,
    pub pass: bool,
}

const H1_SCAN_POINTS: usize = 20_001;

/// Grid-scan certification of the standing assumptions: `H'' ≥ c0 > 0` on
/// the segment and equal curvature at the endpoints.
pub fn validate_h1(model: &CurvatureModel, tol: H1Tolerances) -> H1Report {
    let s0 = model.s_begin();
    let b = model.b();
    let mut c0 = f64::INFINITY;
    let mut c0_location = s0;
    for i in 0..H1_SCAN_POINTS {
        let s = s0 + b * i as f64 / (H1_SCAN_POINTS - 1) as f64;
        let v = model.eval_hpp(s);
        if v < c0 {
            c0 = v;
            c0_location = s;
        }
    }
    let endpoint_mismatch = (model.eval_h(s0) - model.eval_h(s0 + b)).abs();
    let endpoint_tolerance = tol.endpoint.unwrap_or(match model {
        CurvatureModel::Poly(_) => 1e-10,
        CurvatureModel::Spline(_) => 1e-6,
    });
    let convex_ok = c0 >= tol.c0_min && c0 > 0.0;
    let endpoints_ok = endpoint_mismatch <= endpoint_tolerance;
    H1Report {
        c0,
        c0_location,
        endpoint_mismatch,
        endpoint_tolerance,
        convex_ok,
        endpoints_ok,
        pass: convex_ok && endpoints_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quadratic() -> CurvatureModel {
        CurvatureModel::Poly(PolyModel::symmetric(1.0, 1.0, 1.0))
    }

    #[test]
    fn symmetric_quadratic_has_flat_midpoint_and_constant_hpp() {
        let m = quadratic();
        assert!(m.eval_hp(0.5).abs() < 1e-15);
        for s in [0.0, 0.21, 0.5, 0.93] {
            assert!((m.eval_hpp(s) - 2.0).abs() < 1e-14);
        }
        let rep = validate_h1(&m, H1Tolerances::default());
        assert!(rep.pass);
        assert!((rep.c0 - 2.0).abs() < 1e-12);
        assert!(rep.endpoint_mismatch < 1e-15);
    }

    #[test]
    fn cubic_term_still_matches_endpoints() {
        let m = PolyModel::new(1.0, 1.0, 0.25, 1.0, 0.0).unwrap();
        let model = CurvatureModel::Poly(m.clone());
        assert!((model.eval_h(0.0) - model.eval_h(1.0)).abs() < 1e-14);
        // vertex drifts off center for beta != 0
        assert!((m.s_star - 0.5).abs() > 1e-3);
        let rep = validate_h1(&model, H1Tolerances::default());
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn unmatched_parabola_fails_certification() {
        // H = 1 + s^2 on [0, 1]: endpoint mismatch exactly 1
        let m = CurvatureModel::Poly(PolyModel::with_vertex(1.0, 1.0, 0.0, 0.0, 1.0, 0.0));
        let rep = validate_h1(&m, H1Tolerances::default());
        assert!(!rep.pass);
        assert!(rep.convex_ok);
        assert!((rep.endpoint_mismatch - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_dip_fails_on_sign_changing_hpp() {
        // H = 1 - cos(2 pi s): H'' changes sign on [0, 1]
        let samples: Vec<(f64, f64)> = (0..=400)
            .map(|i| {
                let s = i as f64 / 400.0;
                (s, 1.0 - (2.0 * std::f64::consts::PI * s).cos())
            })
            .collect();
        let m = CurvatureModel::Spline(SplineModel::from_samples(&samples).unwrap());
        let rep = validate_h1(&m, H1Tolerances::default());
        assert!(!rep.convex_ok);
        assert!(rep.endpoints_ok);
        assert!(!rep.pass);
    }

    #[test]
    fn spline_of_quadratic_matches_analytic_derivatives() {
        let samples: Vec<(f64, f64)> = (0..=200)
            .map(|i| {
                let s = i as f64 / 200.0;
                (s, 1.0 + (s - 0.5) * (s - 0.5))
            })
            .collect();
        let m = CurvatureModel::Spline(SplineModel::from_samples(&samples).unwrap());
        for i in 0..=50 {
            let s = i as f64 / 50.0;
            assert!((m.eval_h(s) - (1.0 + (s - 0.5) * (s - 0.5))).abs() < 1e-10);
            assert!(
                (m.eval_hp(s) - 2.0 * (s - 0.5)).abs() < 1e-8,
                "H' off at s={s}: {}",
                m.eval_hp(s)
            );
            assert!((m.eval_hpp(s) - 2.0).abs() < 1e-6);
        }
        assert!(validate_h1(&m, H1Tolerances::default()).pass);
    }

    #[test]
    fn out_of_domain_is_flagged_beyond_margin() {
        let m = quadratic();
        assert!(m.try_eval_h(-0.05).is_ok()); // inside the 10% margin
        assert!(m.try_eval_h(1.09).is_ok());
        assert!(matches!(
            m.try_eval_h(-0.11),
            Err(GeometryError::OutOfDomain { .. })
        ));
        assert!(matches!(
            m.try_eval_hpp(1.2),
            Err(GeometryError::OutOfDomain { .. })
        ));
    }

    #[test]
    fn spline_extrapolates_with_frozen_quadratic() {
        let samples: Vec<(f64, f64)> = (0..=100)
            .map(|i| {
                let s = i as f64 / 100.0;
                (s, 2.0 + (s - 0.4) * (s - 0.4))
            })
            .collect();
        let m = CurvatureModel::Spline(SplineModel::from_samples(&samples).unwrap());
        // quadratic continuation of a quadratic is the quadratic itself
        let s = 1.08;
        assert!((m.eval_h(s) - (2.0 + (s - 0.4) * (s - 0.4))).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn derivative_consistency_at_probes(
            a in 0.5f64..4.0,
            beta in -0.3f64..0.3,
            probe in 0.02f64..0.98,
        ) {
            let m = match PolyModel::new(1.0, a, beta, 1.0, 0.0) {
                Ok(m) => CurvatureModel::Poly(m),
                Err(_) => return Ok(()),
            };
            let d = 1e-4;
            let fd1 = (m.eval_h(probe + d) - m.eval_h(probe - d)) / (2.0 * d);
            prop_assert!((fd1 - m.eval_hp(probe)).abs() < 50.0 * d * d);
            let fd2 = (m.eval_hp(probe + d) - m.eval_hp(probe - d)) / (2.0 * d);
            prop_assert!((fd2 - m.eval_hpp(probe)).abs() < 50.0 * d * d);
        }

        #[test]
        fn midpoint_integral_of_hp_matches_endpoint_difference(
            a in 0.5f64..4.0,
            beta in -0.2f64..0.2,
        ) {
            let m = match PolyModel::new(1.0, a, beta, 1.0, 0.0) {
                Ok(m) => CurvatureModel::Poly(m),
                Err(_) => return Ok(()),
            };
            let n = 40_000usize;
            let hgrid = 1.0 / n as f64;
            let mut acc = crate::quad::KahanSum::new();
            for i in 0..n {
                acc.add(m.eval_hp((i as f64 + 0.5) * hgrid) * hgrid);
            }
            let diff = m.eval_h(1.0) - m.eval_h(0.0);
            prop_assert!((acc.value() - diff).abs() < 1e-8);
            // matched endpoints make the integral itself vanish
            prop_assert!(acc.value().abs() < 1e-8);
        }
    }
}
