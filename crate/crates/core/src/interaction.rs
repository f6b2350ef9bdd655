//! Pairwise spike interaction strength and its inverse.
//!
//! The interaction at scaled separation `s` is the half-plane integral
//!
//! ```text
//! Ψ(s) = -∫∫_{y₂>0} p · w(y - (s,0)) · w(y)^{p-1} · ∂w/∂y₁ dy
//! ```
//!
//! together with the curvature coupling constant
//! `ν₂ = (1/3) ∫ (w'(|t|)/|t|)² t⁴ dt` and the normalization `Ψ₁ = Ψ/ν₂`.
//! The balance equations consume `Ψ₁` and its inverse `G`; both are served
//! from one log-space table of `Ψ` so the two can never drift apart.
//! `Ψ` spans sixteen orders of magnitude over the tabulated range, so the
//! spline interpolates `ln Ψ`, keeping relative error uniform.

use crate::dd::Dd;
use crate::ground_state::GroundStateProfile;
use crate::interp::CubicSpline;
use crate::quad::{integrate_2d, PanelRule};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InteractionError {
    #[error(
        "quadrature not converged at s = {s}: refinement moved the value by {rel_change:.3e} (tol {tol:.1e})"
    )]
    QuadratureNonconvergent { s: f64, rel_change: f64, tol: f64 },
    #[error("argument {b:.6e} outside the tabulated range ({lo:.6e}, {hi:.6e}) of the normalized interaction; extend the kernel table")]
    OutOfTabulatedRange { b: f64, lo: f64, hi: f64 },
    #[error("inverse interaction needs a positive argument, got {b}")]
    NonpositiveArgument { b: f64 },
    #[error("invalid kernel range: {0}")]
    InvalidRange(String),
    #[error("kernel table does not interpolate the direct quadrature: relative error {err:.3e} at s = {s}")]
    InterpolationInaccurate { s: f64, err: f64 },
    #[error("kernel import failed: {0}")]
    Import(String),
}

/// Resolution record for the panel quadratures.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureSpec {
    /// Maximum panel length; integrand features have unit scale.
    pub panel_len: f64,
    /// Gauss nodes per panel per dimension at the base resolution; the
    /// convergence check doubles this.
    pub base_nodes: usize,
    /// Relative agreement demanded between the two resolutions.
    pub rel_tol: f64,
    /// `-ln` of the truncation level relative to the integrand peak.
    pub tail_cut: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            panel_len: 2.0,
            base_nodes: 16,
            rel_tol: 1e-8,
            tail_cut: 41.45, // ln 1e18
        }
    }
}

fn psi_integrand<'a>(profile: &'a GroundStateProfile, s: f64) -> impl Fn(f64, f64) -> f64 + 'a {
    let p = profile.p;
    move |y1: f64, y2: f64| {
        let r = (y1 * y1 + y2 * y2).sqrt();
        let rs = ((y1 - s) * (y1 - s) + y2 * y2).sqrt();
        let dw_dy1 = if r < 1e-14 {
            0.0
        } else {
            profile.eval_w_prime(r) * y1 / r
        };
        -p * profile.eval_w(rs) * profile.eval_w(r).powf(p - 1.0) * dw_dy1
    }
}

fn psi_rules(p: f64, s: f64, spec: &QuadratureSpec, nodes: usize) -> (PanelRule, PanelRule) {
    // Beyond the segment [min(0,s), max(0,s)] the integrand decays at least
    // like e^{-(p+1)u} relative to its peak; inside it is fully covered.
    let margin = spec.tail_cut / (p + 1.0) + 2.0;
    let y2_max = spec.tail_cut / p + 2.0;
    let lo = s.min(0.0) - margin;
    let hi = s.max(0.0) + margin;
    (
        PanelRule::new(lo, hi, spec.panel_len, nodes),
        PanelRule::new(0.0, y2_max, spec.panel_len, nodes),
    )
}

/// Single-resolution value of `Ψ(s)` with its `|·|`-mass.
pub fn compute_psi_at(
    profile: &GroundStateProfile,
    s: f64,
    spec: &QuadratureSpec,
    nodes: usize,
) -> (f64, f64) {
    let (rx, ry) = psi_rules(profile.p, s, spec, nodes);
    integrate_2d(&rx, &ry, psi_integrand(profile, s))
}

/// `Ψ(s)` with an internal convergence check: the node count is doubled and
/// the two values must agree to `spec.rel_tol` relative (with an absolute
/// floor tied to the integrand mass, so exact cancellations like `s = 0`
/// are not rejected for having no scale of their own).
pub fn compute_psi_with(
    profile: &GroundStateProfile,
    s: f64,
    spec: &QuadratureSpec,
) -> Result<f64, InteractionError> {
    let (coarse, _) = compute_psi_at(profile, s, spec, spec.base_nodes);
    let (fine, l1) = compute_psi_at(profile, s, spec, 2 * spec.base_nodes);
    let diff = (fine - coarse).abs();
    if diff > spec.rel_tol * fine.abs() + 1e-13 * l1 {
        return Err(InteractionError::QuadratureNonconvergent {
            s,
            rel_change: diff / fine.abs().max(1e-300),
            tol: spec.rel_tol,
        });
    }
    Ok(fine)
}

pub fn compute_psi(profile: &GroundStateProfile, s: f64) -> Result<f64, InteractionError> {
    compute_psi_with(profile, s, &QuadratureSpec::default())
}

/// `ν₂ = (1/3) ∫_R (w'(|t|)/|t|)² t⁴ dt`, refinement-checked.
///
/// The integrand extends continuously through the origin: `w'(r)/r → w''(0)`.
pub fn compute_nu2_with(
    profile: &GroundStateProfile,
    spec: &QuadratureSpec,
) -> Result<f64, InteractionError> {
    let half_width = spec.tail_cut / 2.0 + 4.0;
    let f = |t: f64| {
        let r = t.abs();
        if r < 1e-14 {
            return 0.0;
        }
        let q = profile.eval_w_prime(r) / r;
        q * q * t.powi(4) / 3.0
    };
    let run = |nodes: usize| {
        PanelRule::new(-half_width, half_width, spec.panel_len, nodes).integrate_with_l1(f)
    };
    let (coarse, _) = run(spec.base_nodes);
    let (fine, _) = run(2 * spec.base_nodes);
    let diff = (fine - coarse).abs();
    if diff > spec.rel_tol * fine.abs() {
        return Err(InteractionError::QuadratureNonconvergent {
            s: f64::NAN,
            rel_change: diff / fine.abs().max(1e-300),
            tol: spec.rel_tol,
        });
    }
    Ok(fine)
}

pub fn compute_nu2(profile: &GroundStateProfile) -> Result<f64, InteractionError> {
    compute_nu2_with(profile, &QuadratureSpec::default())
}

/// Half-plane integral of `p w^{p-1} (w(y - q1 e₁) + w(y + q2 e₁)) ∂w/∂y₁`:
/// the near-cancellation whose size is controlled by `|q1 - q2| w(q1)`.
///
/// Returns `(value, l1_mass)`. The panel layout is symmetric about `y₁ = 0`,
/// so at `q1 = q2` the discrete sum inherits the exact odd cancellation.
pub fn evenness_integral(
    profile: &GroundStateProfile,
    q1: f64,
    q2: f64,
    spec: &QuadratureSpec,
) -> Result<(f64, f64), InteractionError> {
    let p = profile.p;
    let margin = spec.tail_cut / (p + 1.0) + 2.0;
    let y2_max = spec.tail_cut / p + 2.0;
    let half = q1.max(q2) + margin;
    let f = |y1: f64, y2: f64| {
        let r = (y1 * y1 + y2 * y2).sqrt();
        let r1 = ((y1 - q1) * (y1 - q1) + y2 * y2).sqrt();
        let r2 = ((y1 + q2) * (y1 + q2) + y2 * y2).sqrt();
        let dw_dy1 = if r < 1e-14 {
            0.0
        } else {
            profile.eval_w_prime(r) * y1 / r
        };
        p * profile.eval_w(r).powf(p - 1.0) * (profile.eval_w(r1) + profile.eval_w(r2)) * dw_dy1
    };
    let run = |nodes: usize| {
        let rx = PanelRule::new(-half, half, spec.panel_len, nodes);
        let ry = PanelRule::new(0.0, y2_max, spec.panel_len, nodes);
        integrate_2d(&rx, &ry, f)
    };
    let (coarse, _) = run(spec.base_nodes);
    let (fine, l1) = run(2 * spec.base_nodes);
    let diff = (fine - coarse).abs();
    if diff > spec.rel_tol * fine.abs() + 1e-13 * l1 {
        return Err(InteractionError::QuadratureNonconvergent {
            s: q1,
            rel_change: diff / fine.abs().max(1e-300),
            tol: spec.rel_tol,
        });
    }
    Ok((fine, l1))
}

/// Tabulation parameters for [`build_kernel_with`].
#[derive(Clone, Copy, Debug)]
pub struct KernelConfig {
    pub s_min: f64,
    pub s_max: f64,
    pub ds: f64,
    pub quad: QuadratureSpec,
}

impl Default for KernelConfig {
    fn default() -> Self {
        // The inverse map is queried near |ln eps|, which stays well inside
        // [2, 40] for any desk-scale eps.
        Self {
            s_min: 2.0,
            s_max: 40.0,
            ds: 0.1,
            quad: QuadratureSpec::default(),
        }
    }
}

/// Tabulated interaction kernel: `Ψ` samples, the log-space spline, `ν₂`,
/// and the fitted asymptotic prefactor of `Ψ₁`.
#[derive(Clone, Debug)]
pub struct InteractionKernel {
    pub p: f64,
    pub profile_r_max: f64,
    pub profile_w0: f64,
    pub s_grid: Vec<f64>,
    pub psi_values: Vec<f64>,
    pub nu2: f64,
    /// Fitted `C` in `Ψ₁(s) ≈ C s^{-1/2} e^{-s}` over the last third of the
    /// table.
    pub asym_constant: f64,
    /// Max of `|Ψ₁ s^{1/2} e^{s}/C - 1|` over the last 4 units of the table.
    pub asym_window_dev: f64,
    pub quad: QuadratureSpec,
    ln_spline: CubicSpline,
    ln_nu2: f64,
    ln_nu2_dd: Dd,
}

pub fn build_kernel(
    profile: &GroundStateProfile,
    s_min: f64,
    s_max: f64,
) -> Result<InteractionKernel, InteractionError> {
    build_kernel_with(
        profile,
        &KernelConfig {
            s_min,
            s_max,
            ..Default::default()
        },
    )
}

pub fn build_kernel_with(
    profile: &GroundStateProfile,
    cfg: &KernelConfig,
) -> Result<InteractionKernel, InteractionError> {
    if !(cfg.s_min >= 2.0 && cfg.s_max > cfg.s_min && cfg.ds > 0.0) {
        return Err(InteractionError::InvalidRange(format!(
            "need 2 <= s_min < s_max and ds > 0, got s_min={}, s_max={}, ds={}",
            cfg.s_min, cfg.s_max, cfg.ds
        )));
    }
    let n = ((cfg.s_max - cfg.s_min) / cfg.ds).round() as usize + 1;
    if n < 8 {
        return Err(InteractionError::InvalidRange(
            "kernel table needs at least 8 samples".into(),
        ));
    }
    let s_grid: Vec<f64> = (0..n)
        .map(|i| cfg.s_min + (cfg.s_max - cfg.s_min) * i as f64 / (n - 1) as f64)
        .collect();
    let mut psi_values = Vec::with_capacity(n);
    for &s in &s_grid {
        psi_values.push(compute_psi_with(profile, s, &cfg.quad)?);
    }
    let nu2 = compute_nu2_with(profile, &cfg.quad)?;

    let kernel = assemble_kernel(
        profile.p,
        profile.r_max,
        profile.w0,
        s_grid,
        psi_values,
        nu2,
        cfg.quad,
    )?;

    // Off-grid probes: the log-space spline must reproduce the direct
    // quadrature to 1e-6 relative or the table is too coarse to trust.
    let lo = kernel.s_grid[0];
    let hi = *kernel.s_grid.last().unwrap();
    for i in 0..7 {
        let s = lo + (hi - lo) * (i as f64 + 0.5) / 7.0;
        let direct = compute_psi_with(profile, s, &cfg.quad)?;
        let interp = kernel.psi(s)?;
        let err = ((interp - direct) / direct).abs();
        if err > 1e-6 {
            return Err(InteractionError::InterpolationInaccurate { s, err });
        }
    }
    Ok(kernel)
}

fn assemble_kernel(
    p: f64,
    profile_r_max: f64,
    profile_w0: f64,
    s_grid: Vec<f64>,
    psi_values: Vec<f64>,
    nu2: f64,
    quad: QuadratureSpec,
) -> Result<InteractionKernel, InteractionError> {
    if nu2 <= 0.0 {
        return Err(InteractionError::InvalidRange(format!(
            "nu2 = {nu2} must be positive"
        )));
    }
    if let Some(j) = psi_values.iter().position(|&v| v <= 0.0) {
        return Err(InteractionError::InvalidRange(format!(
            "psi({}) = {} is not positive",
            s_grid[j], psi_values[j]
        )));
    }
    if let Some(w) = psi_values.windows(2).position(|w| w[1] >= w[0]) {
        return Err(InteractionError::InvalidRange(format!(
            "psi is not strictly decreasing between s = {} and s = {}",
            s_grid[w],
            s_grid[w + 1]
        )));
    }
    let ln_psi: Vec<f64> = psi_values.iter().map(|v| v.ln()).collect();
    let ln_spline = CubicSpline::new(s_grid.clone(), ln_psi);
    let ln_nu2 = nu2.ln();
    // ln(nu2) to double-double: refine the f64 logarithm by one residual step
    let ln_nu2_dd = {
        let delta = Dd::from_f64(-ln_nu2).exp().mul_f64(nu2).add_f64(-1.0);
        Dd::from_sum(ln_nu2, delta.to_f64())
    };

    let n = s_grid.len();
    let fit_from = n - n / 3;
    let q = |j: usize| psi_values[j].ln() - ln_nu2 + s_grid[j] + 0.5 * s_grid[j].ln();
    let ln_c = (fit_from..n).map(q).sum::<f64>() / (n - fit_from) as f64;
    let s_hi = *s_grid.last().unwrap();
    let asym_window_dev = (0..n)
        .filter(|&j| s_grid[j] >= s_hi - 4.0)
        .map(|j| ((q(j) - ln_c).exp() - 1.0).abs())
        .fold(0.0f64, f64::max);

    Ok(InteractionKernel {
        p,
        profile_r_max,
        profile_w0,
        s_grid,
        psi_values,
        nu2,
        asym_constant: ln_c.exp(),
        asym_window_dev,
        quad,
        ln_spline,
        ln_nu2,
        ln_nu2_dd,
    })
}

impl InteractionKernel {
    pub fn s_min(&self) -> f64 {
        self.s_grid[0]
    }

    pub fn s_max(&self) -> f64 {
        *self.s_grid.last().unwrap()
    }

    fn check_s(&self, s: f64) -> Result<(), InteractionError> {
        if s < self.s_min() || s > self.s_max() {
            // report in terms of the psi1 values the caller asked about
            Err(InteractionError::OutOfTabulatedRange {
                b: s,
                lo: self.s_min(),
                hi: self.s_max(),
            })
        } else {
            Ok(())
        }
    }

    /// Interpolated `Ψ(s)` on the tabulated range.
    pub fn psi(&self, s: f64) -> Result<f64, InteractionError> {
        self.check_s(s)?;
        Ok(self.ln_spline.eval(s).exp())
    }

    /// Normalized interaction `Ψ₁(s) = Ψ(s)/ν₂`.
    pub fn psi1(&self, s: f64) -> Result<f64, InteractionError> {
        self.check_s(s)?;
        Ok((self.ln_spline.eval(s) - self.ln_nu2).exp())
    }

    /// Derivative of `Ψ₁` from the log-space spline.
    pub fn psi1_deriv(&self, s: f64) -> Result<f64, InteractionError> {
        self.check_s(s)?;
        let ln = self.ln_spline.eval(s);
        Ok((ln - self.ln_nu2).exp() * self.ln_spline.eval_deriv(s))
    }

    /// Range of `Ψ₁` arguments the inverse can serve: `(Ψ₁(s_max), Ψ₁(s_min))`.
    pub fn psi1_range(&self) -> (f64, f64) {
        let lo = (self.ln_spline.eval(self.s_max()) - self.ln_nu2).exp();
        let hi = (self.ln_spline.eval(self.s_min()) - self.ln_nu2).exp();
        (lo, hi)
    }

    /// Double-double `Ψ₁` at an extended-precision separation: the exact
    /// spline-in-log-space function the `f64` path uses, evaluated finely
    /// enough that the balance residuals are not quantized by `ulp(s)`.
    pub fn psi1_dd(&self, s: Dd) -> Result<Dd, InteractionError> {
        self.check_s(s.hi)?;
        Ok(self.ln_spline.eval_dd(s).sub(self.ln_nu2_dd).exp())
    }

    /// `G(b)` in double-double: an `f64` seed refined by Newton with
    /// double-double residuals.
    pub fn invert_psi1_dd(&self, b: Dd) -> Result<Dd, InteractionError> {
        let seed = self.invert_psi1(b.hi)?;
        let mut s = Dd::from_f64(seed);
        for _ in 0..4 {
            let f = self.psi1_dd(s)?.sub(b);
            let fp = self.psi1_deriv(s.hi)?;
            let step = f.div_f64(fp);
            s = s.sub(step);
            if s.hi < self.s_min() {
                s = Dd::from_f64(self.s_min());
            }
            if s.hi > self.s_max() {
                s = Dd::from_f64(self.s_max());
            }
            if step.hi.abs() < 1e-28 * s.hi.abs() {
                break;
            }
        }
        Ok(s)
    }

    /// `G(b)`: the solution of `Ψ₁(s) = b`, by safeguarded Newton on the
    /// log-space table.
    pub fn invert_psi1(&self, b: f64) -> Result<f64, InteractionError> {
        if !(b > 0.0) {
            return Err(InteractionError::NonpositiveArgument { b });
        }
        let ln_target = b.ln() + self.ln_nu2;
        let mut lo = self.s_min();
        let mut hi = self.s_max();
        let g_lo = self.ln_spline.eval(lo) - ln_target;
        let g_hi = self.ln_spline.eval(hi) - ln_target;
        if g_lo < 0.0 || g_hi > 0.0 {
            let (plo, phi) = self.psi1_range();
            return Err(InteractionError::OutOfTabulatedRange {
                b,
                lo: plo,
                hi: phi,
            });
        }
        let mut s = 0.5 * (lo + hi);
        for _ in 0..200 {
            let g = self.ln_spline.eval(s) - ln_target;
            if g > 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let dg = self.ln_spline.eval_deriv(s);
            let mut s_new = s - g / dg;
            if !(s_new > lo && s_new < hi) || !s_new.is_finite() {
                s_new = 0.5 * (lo + hi);
            }
            // converge to the floating-point floor; the balance residuals
            // downstream are quantized by exactly this resolution
            if (s_new - s).abs() <= 2.0 * f64::EPSILON * s.abs() {
                return Ok(s_new);
            }
            s = s_new;
        }
        Ok(s)
    }

    /// Kernel-level invariant report.
    pub fn validate(&self) -> KernelReport {
        let n = self.s_grid.len();
        // finite-difference slope of ln psi over the last 4 units
        let s_hi = self.s_max();
        let idx: Vec<usize> = (0..n).filter(|&j| self.s_grid[j] >= s_hi - 4.0).collect();
        let slope = {
            let a = *idx.first().unwrap();
            let b = *idx.last().unwrap();
            (self.psi_values[b].ln() - self.psi_values[a].ln()) / (self.s_grid[b] - self.s_grid[a])
        };
        KernelReport {
            positive: self.psi_values.iter().all(|&v| v > 0.0),
            strictly_decreasing: self.psi_values.windows(2).all(|w| w[1] < w[0]),
            nu2_positive: self.nu2 > 0.0,
            asym_constant_positive: self.asym_constant > 0.0,
            asym_window_dev: self.asym_window_dev,
            ln_slope_tail: slope,
        }
    }

    pub fn export(&self) -> String {
        let mut s = String::new();
        s.push_str("# interaction kernel\n");
        let _ = writeln!(s, "# p = {:.17e}", self.p);
        let _ = writeln!(s, "# profile_r_max = {:.17e}", self.profile_r_max);
        let _ = writeln!(s, "# profile_w0 = {:.17e}", self.profile_w0);
        let _ = writeln!(s, "# nu2 = {:.17e}", self.nu2);
        let _ = writeln!(s, "# asym_constant = {:.17e}", self.asym_constant);
        let _ = writeln!(s, "# panel_len = {:.17e}", self.quad.panel_len);
        let _ = writeln!(s, "# base_nodes = {}", self.quad.base_nodes);
        let _ = writeln!(s, "# rel_tol = {:.17e}", self.quad.rel_tol);
        let _ = writeln!(s, "# tail_cut = {:.17e}", self.quad.tail_cut);
        s.push_str("# columns: s psi\n");
        for (sv, pv) in self.s_grid.iter().zip(&self.psi_values) {
            let _ = writeln!(s, "{sv:.17e}\t{pv:.17e}");
        }
        s
    }

    pub fn import(text: &str) -> Result<Self, InteractionError> {
        let mut header = std::collections::BTreeMap::new();
        let mut s_grid = Vec::new();
        let mut psi_values = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    if let Ok(x) = v.trim().parse::<f64>() {
                        header.insert(k.trim().to_string(), x);
                    }
                }
                continue;
            }
            let mut it = line.split_whitespace();
            match (
                it.next().and_then(|t| t.parse::<f64>().ok()),
                it.next().and_then(|t| t.parse::<f64>().ok()),
            ) {
                (Some(s), Some(v)) => {
                    s_grid.push(s);
                    psi_values.push(v);
                }
                _ => return Err(InteractionError::Import(format!("bad row: {line}"))),
            }
        }
        let get = |k: &str| -> Result<f64, InteractionError> {
            header
                .get(k)
                .copied()
                .ok_or_else(|| InteractionError::Import(format!("missing header key {k}")))
        };
        let quad = QuadratureSpec {
            panel_len: get("panel_len")?,
            base_nodes: get("base_nodes")? as usize,
            rel_tol: get("rel_tol")?,
            tail_cut: get("tail_cut")?,
        };
        assemble_kernel(
            get("p")?,
            get("profile_r_max")?,
            get("profile_w0")?,
            s_grid,
            psi_values,
            get("nu2")?,
            quad,
        )
        .map_err(|e| InteractionError::Import(e.to_string()))
    }
}

/// Kernel invariant check outcomes.
#[derive(Clone, Copy, Debug)]
pub struct KernelReport {
    pub positive: bool,
    pub strictly_decreasing: bool,
    pub nu2_positive: bool,
    pub asym_constant_positive: bool,
    pub asym_window_dev: f64,
    pub ln_slope_tail: f64,
}

impl KernelReport {
    pub fn all_ok(&self) -> bool {
        self.positive
            && self.strictly_decreasing
            && self.nu2_positive
            && self.asym_constant_positive
            && self.asym_window_dev <= 0.05
            && self.ln_slope_tail >= -1.02
            && self.ln_slope_tail <= -0.98
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nonpositive_inverse_argument_is_rejected() {
        // a tiny synthetic kernel is enough to exercise the guards
        let s_grid: Vec<f64> = (0..40).map(|i| 2.0 + i as f64 * 0.5).collect();
        let psi: Vec<f64> = s_grid
            .iter()
            .map(|&s| (-s - 0.5 * s.ln()).exp() * 3.0)
            .collect();
        let k =
            assemble_kernel(3.0, 30.0, 2.2, s_grid, psi, 2.0, QuadratureSpec::default()).unwrap();
        assert!(matches!(
            k.invert_psi1(-1.0),
            Err(InteractionError::NonpositiveArgument { .. })
        ));
        assert!(matches!(
            k.invert_psi1(0.0),
            Err(InteractionError::NonpositiveArgument { .. })
        ));
        // far outside the table on both sides
        assert!(matches!(
            k.invert_psi1(1e9),
            Err(InteractionError::OutOfTabulatedRange { .. })
        ));
        assert!(matches!(
            k.invert_psi1(1e-30),
            Err(InteractionError::OutOfTabulatedRange { .. })
        ));
    }

    #[test]
    fn synthetic_kernel_inverse_is_exact() {
        // psi = nu2 * C s^{-1/2} e^{-s} makes psi1 analytic; G must invert it
        let nu2 = 2.37;
        let c = 1.83;
        let s_grid: Vec<f64> = (0..=380).map(|i| 2.0 + i as f64 * 0.1).collect();
        let psi: Vec<f64> = s_grid
            .iter()
            .map(|&s| nu2 * c * s.powf(-0.5) * (-s).exp())
            .collect();
        let k =
            assemble_kernel(3.0, 30.0, 2.2, s_grid, psi, nu2, QuadratureSpec::default()).unwrap();
        for &s in &[2.5f64, 5.0, 10.0, 17.3, 31.0, 39.5] {
            let b = c * s.powf(-0.5) * (-s).exp();
            let got = k.invert_psi1(b).unwrap();
            assert!((got - s).abs() < 1e-9, "s={s} got={got}");
            let back = k.psi1(got).unwrap();
            assert!(((back - b) / b).abs() < 1e-12);
        }
        // asymptotic fit recovers the planted constant
        assert!((k.asym_constant - c).abs() / c < 1e-10);
        assert!(k.validate().all_ok());
    }

    #[test]
    fn kernel_roundtrips_through_text() {
        let nu2 = 1.91;
        let s_grid: Vec<f64> = (0..=120).map(|i| 2.0 + i as f64 * 0.25).collect();
        let psi: Vec<f64> = s_grid
            .iter()
            .map(|&s| nu2 * 2.2 * s.powf(-0.5) * (-s).exp())
            .collect();
        let k =
            assemble_kernel(3.0, 30.0, 2.2, s_grid, psi, nu2, QuadratureSpec::default()).unwrap();
        let text = k.export();
        let k2 = InteractionKernel::import(&text).unwrap();
        assert_eq!(k.s_grid.len(), k2.s_grid.len());
        assert_eq!(k.nu2, k2.nu2);
        for &s in &[3.1, 8.4, 22.0] {
            assert_eq!(k.psi1(s).unwrap(), k2.psi1(s).unwrap());
        }
        // byte-identical re-export
        assert_eq!(text, k2.export());
    }

    #[test]
    fn rejects_nondecreasing_table() {
        let s_grid: Vec<f64> = (0..40).map(|i| 2.0 + i as f64 * 0.5).collect();
        let mut psi: Vec<f64> = s_grid.iter().map(|&s| (-s).exp()).collect();
        psi[10] = psi[9]; // plateau
        let err = assemble_kernel(3.0, 30.0, 2.2, s_grid, psi, 2.0, QuadratureSpec::default())
            .unwrap_err();
        assert!(matches!(err, InteractionError::InvalidRange(_)));
    }
}
