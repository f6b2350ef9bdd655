//! The reduced nonlinear balance system for the spike positions and its
//! exact solution.
//!
//! With `S_i = Σ_{j<=i} H'(γ(s_j))`, the balance equations are
//!
//! ```text
//! r_i = Ψ₁((s_{i+1} - s_i)/eps) + eps² S_i = 0      for i = 1 .. k-1
//! r_k = eps² S_k = 0
//! ```
//!
//! The first `k-1` equations determine every gap from the first position, so
//! the primary solver runs that forward recursion exactly and performs a
//! single bracketed scalar root-find on `s_1` against the sum equation; a
//! damped Newton iteration on all `k` positions with the analytic
//! lower-triangular-plus-superdiagonal Jacobian stands by as a fallback.
//!
//! The first position and the gaps are carried as double-double values and
//! the residual is evaluated in double-double. In plain `f64` the residual
//! is quantized by `Ψ₁ · ulp(gap/eps)`, which at the smallest sweep `eps`
//! sits above the residual target; extended precision removes that wall
//! while every exported quantity remains an ordinary double.

use crate::continuum::ContinuumSolution;
use crate::dd::Dd;
use crate::geometry::{CurvatureModel, GeometryError};
use crate::interaction::{InteractionError, InteractionKernel};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("no convergence: best residual {residual:.3e} (tol {tol:.3e}), staged: {staged_note}")]
    NoConvergence {
        residual: f64,
        tol: f64,
        staged_note: String,
    },
    #[error("iterate left the curvature domain: s_{i} = {s:.6}")]
    StepOutOfDomain { i: usize, s: f64 },
    #[error("positions not strictly increasing at index {i}")]
    NotIncreasing { i: usize },
    #[error("configuration import failed: {0}")]
    Import(String),
    #[error(transparent)]
    Kernel(#[from] InteractionError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverPath {
    /// Input already satisfied the residual target.
    AlreadyConverged,
    /// Forward recursion + scalar solve on the first position.
    Staged,
    /// Damped Newton on all positions.
    Newton,
}

impl SolverPath {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverPath::AlreadyConverged => "already-converged",
            SolverPath::Staged => "staged",
            SolverPath::Newton => "newton",
        }
    }

    fn from_str(s: &str) -> Option<Self> {
        match s {
            "already-converged" => Some(SolverPath::AlreadyConverged),
            "staged" => Some(SolverPath::Staged),
            "newton" => Some(SolverPath::Newton),
            _ => None,
        }
    }
}

/// A spike configuration on the segment: initial midpoint-sampled positions
/// and the current (possibly corrected) positions in first-plus-gaps form.
#[derive(Clone, Debug)]
pub struct SpikeConfiguration {
    pub eps: f64,
    pub h: f64,
    pub k: usize,
    /// Cell midpoints `(t_i + t_{i+1})/2` for the first `k-1` lattice cells.
    pub t_mid: Vec<f64>,
    /// Initial positions from the continuum trajectory.
    pub s0: Vec<f64>,
    /// Current first position.
    pub s1: Dd,
    /// Current gaps, `gaps[i] = s_{i+1} - s_i` (0-based, length `k-1`).
    pub gaps: Vec<Dd>,
    pub solver: SolverPath,
    pub solve_iterations: usize,
}

impl SpikeConfiguration {
    /// Positions `s_1 .. s_k` in extended precision.
    pub fn positions_dd(&self) -> Vec<Dd> {
        let mut acc = self.s1;
        let mut out = Vec::with_capacity(self.k);
        out.push(acc);
        for &g in &self.gaps {
            acc = acc.add(g);
            out.push(acc);
        }
        out
    }

    /// Materialized positions `s_1 .. s_k`.
    pub fn positions(&self) -> Vec<f64> {
        self.positions_dd().iter().map(|p| p.to_f64()).collect()
    }

    /// Corrections `y_i = s_i - s_i^0`.
    pub fn corrections(&self) -> Vec<f64> {
        self.positions_dd()
            .iter()
            .zip(&self.s0)
            .map(|(s, s0)| s.add_f64(-s0).to_f64())
            .collect()
    }

    pub fn y_inf_norm(&self) -> f64 {
        self.corrections()
            .iter()
            .map(|y| y.abs())
            .fold(0.0, f64::max)
    }

    /// Gap values as plain doubles.
    pub fn gap_values(&self) -> Vec<f64> {
        self.gaps.iter().map(|g| g.to_f64()).collect()
    }

    fn with_solution(&self, s1: Dd, gaps: Vec<Dd>, solver: SolverPath, iters: usize) -> Self {
        Self {
            s1,
            gaps,
            solver,
            solve_iterations: iters,
            ..self.clone()
        }
    }
}

/// Midpoint sampling of the continuum solution: `s_i^0 = x((t_i+t_{i+1})/2)`
/// for `i < k`, and the last position one terminal gap further.
pub fn initial_configuration(
    sol: &ContinuumSolution,
    kernel: &InteractionKernel,
    _model: &CurvatureModel,
) -> Result<SpikeConfiguration, SolveError> {
    let k = sol.k;
    let eps = sol.eps;
    let h = sol.h;
    let t_mid: Vec<f64> = (0..k - 1).map(|i| (i as f64 + 0.5) * h).collect();
    let mut s0: Vec<f64> = t_mid.iter().map(|&t| sol.eval_x(t)).collect();
    // terminal gap from the compatibility value of rho at the right end
    let arg = eps * sol.rho_b / eps.ln();
    let last_gap = eps * kernel.invert_psi1(arg)?;
    s0.push(s0[k - 2] + last_gap);
    if let Some(i) = s0.windows(2).position(|w| w[1] <= w[0]) {
        return Err(SolveError::NotIncreasing { i });
    }
    let mut gaps: Vec<Dd> = s0.windows(2).map(|w| Dd::from_f64(w[1] - w[0])).collect();
    gaps[k - 2] = Dd::from_f64(last_gap);
    Ok(SpikeConfiguration {
        eps,
        h,
        k,
        t_mid,
        s1: Dd::from_f64(s0[0]),
        gaps,
        s0,
        solver: SolverPath::AlreadyConverged,
        solve_iterations: 0,
    })
}

/// Residuals of the balance system at the configuration's current positions.
pub fn residual(
    cfg: &SpikeConfiguration,
    kernel: &InteractionKernel,
    model: &CurvatureModel,
) -> Result<Vec<f64>, SolveError> {
    let eps = cfg.eps;
    let e2 = Dd::from_f64(eps).mul_f64(eps);
    let mut pos = cfg.s1;
    let mut sum = Dd::ZERO;
    let mut r = Vec::with_capacity(cfg.k);
    for i in 0..cfg.k {
        if !model.in_margin(pos.hi) {
            return Err(SolveError::StepOutOfDomain { i, s: pos.hi });
        }
        sum = sum.add(model.eval_hp_dd(pos));
        if i < cfg.k - 1 {
            let psi1 = kernel.psi1_dd(cfg.gaps[i].div_f64(eps))?;
            r.push(psi1.add(e2.mul(sum)).to_f64());
            pos = pos.add(cfg.gaps[i]);
        } else {
            r.push(e2.mul(sum).to_f64());
        }
    }
    Ok(r)
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Error terms of the initial configuration against the exact recursion:
/// `E_i = s0_{i+1} - s0_i - eps G(-eps² S_i)` for `i < k`, `E_k = eps² S_k`,
/// with the partial sums taken over the initial positions.
pub fn error_terms(
    cfg: &SpikeConfiguration,
    kernel: &InteractionKernel,
    model: &CurvatureModel,
) -> Result<Vec<f64>, SolveError> {
    let eps = cfg.eps;
    let e2 = Dd::from_f64(eps).mul_f64(eps);
    let mut sum = Dd::ZERO;
    let mut e = Vec::with_capacity(cfg.k);
    for i in 0..cfg.k {
        sum = sum.add(model.eval_hp_dd(Dd::from_f64(cfg.s0[i])));
        if i < cfg.k - 1 {
            let b = e2.mul(sum).neg();
            let gap_pred = eps * kernel.invert_psi1(b.to_f64())?;
            e.push(cfg.s0[i + 1] - cfg.s0[i] - gap_pred);
        } else {
            e.push(e2.mul(sum).to_f64());
        }
    }
    Ok(e)
}

/// Side information when a trial chain cannot be completed; used by the
/// scalar root-find as a sign instead of an abort.
#[derive(Clone, Copy, Debug)]
enum ChainFault {
    /// A partial sum reached zero or turned positive: the trial first
    /// position sits too far right.
    SumNotNegative,
    /// The recursion argument fell below the table: gaps would exceed the
    /// tabulated separation, again the too-far-right regime.
    ArgBelowTable,
    /// The recursion argument exceeded the table: too far left.
    ArgAboveTable,
    /// The chain walked out of the curvature domain on the given side.
    OutOfDomain { right: bool },
}

impl ChainFault {
    /// Pseudo-sign of the sum equation for bracketing purposes.
    fn sign(&self) -> f64 {
        match self {
            ChainFault::SumNotNegative => 1.0,
            ChainFault::ArgBelowTable => 1.0,
            ChainFault::ArgAboveTable => -1.0,
            ChainFault::OutOfDomain { right: true } => 1.0,
            ChainFault::OutOfDomain { right: false } => -1.0,
        }
    }
}

struct Chain {
    gaps: Vec<Dd>,
    /// `eps² S_k`: the sum-equation residual.
    phi: f64,
}

fn run_chain(
    s1: Dd,
    k: usize,
    eps: f64,
    kernel: &InteractionKernel,
    model: &CurvatureModel,
) -> Result<Result<Chain, ChainFault>, SolveError> {
    let e2 = Dd::from_f64(eps).mul_f64(eps);
    let (arg_lo, arg_hi) = kernel.psi1_range();
    let mut pos = s1;
    let mut sum = Dd::ZERO;
    let mut gaps = Vec::with_capacity(k - 1);
    for i in 0..k {
        if !model.in_margin(pos.hi) {
            return Ok(Err(ChainFault::OutOfDomain {
                right: pos.hi > model.s_end(),
            }));
        }
        sum = sum.add(model.eval_hp_dd(pos));
        if i < k - 1 {
            let b = e2.mul(sum).neg();
            if b.hi <= 0.0 {
                return Ok(Err(ChainFault::SumNotNegative));
            }
            if b.hi < arg_lo {
                return Ok(Err(ChainFault::ArgBelowTable));
            }
            if b.hi > arg_hi {
                return Ok(Err(ChainFault::ArgAboveTable));
            }
            let gap = kernel.invert_psi1_dd(b)?.mul_f64(eps);
            gaps.push(gap);
            pos = pos.add(gap);
        }
    }
    Ok(Ok(Chain {
        gaps,
        phi: e2.mul(sum).to_f64(),
    }))
}

/// Solves `r(s) = 0` to `max_i |r_i| <= tol`.
///
/// The scalar solve brackets the sum equation in the first position,
/// alternating secant proposals with bisection so the bracket always
/// shrinks; chain faults act as pseudo-signs. If the staged path cannot
/// reach the target the damped Newton fallback runs on all `k` positions.
pub fn solve_corrections(
    cfg: &SpikeConfiguration,
    kernel: &InteractionKernel,
    model: &CurvatureModel,
    tol: f64,
) -> Result<SpikeConfiguration, SolveError> {
    let r0 = residual(cfg, kernel, model)?;
    if max_abs(&r0) <= tol {
        return Ok(cfg.with_solution(cfg.s1, cfg.gaps.clone(), SolverPath::AlreadyConverged, 0));
    }

    let staged_note = match staged_solve(cfg, kernel, model, tol)? {
        Ok((out, iters)) => {
            let r = residual(&out, kernel, model)?;
            if max_abs(&r) <= tol {
                return Ok(out.with_solution(out.s1, out.gaps.clone(), SolverPath::Staged, iters));
            }
            format!("reached {:.3e}", max_abs(&r))
        }
        Err(note) => note,
    };

    let (s1, gaps, iters) = newton_solve(cfg, kernel, model, tol, &staged_note)?;
    let out = cfg.with_solution(s1, gaps, SolverPath::Newton, iters);
    let r = residual(&out, kernel, model)?;
    let worst = max_abs(&r);
    if worst > tol {
        return Err(SolveError::NoConvergence {
            residual: worst,
            tol,
            staged_note,
        });
    }
    Ok(out)
}

/// Runs only the damped-Newton path from the given configuration; exposed
/// so the two solver routes can be compared directly.
pub fn solve_corrections_via_newton(
    cfg: &SpikeConfiguration,
    kernel: &InteractionKernel,
    model: &CurvatureModel,
    tol: f64,
) -> Result<SpikeConfiguration, SolveError> {
    let (s1, gaps, iters) = newton_solve(cfg, kernel, model, tol, "direct newton call")?;
    Ok(cfg.with_solution(s1, gaps, SolverPath::Newton, iters))
}

#[allow(clippy::type_complexity)]
fn staged_solve(
    cfg: &SpikeConfiguration,
    kernel: &InteractionKernel,
    model: &CurvatureModel,
    tol: f64,
) -> Result<Result<(SpikeConfiguration, usize), String>, SolveError> {
    let eps = cfg.eps;
    let k = cfg.k;
    let mut evals = 0usize;
    let mut shot = |s1: Dd| -> Result<(f64, Option<Chain>), SolveError> {
        evals += 1;
        match run_chain(s1, k, eps, kernel, model)? {
            Ok(chain) => Ok((chain.phi, Some(chain))),
            Err(fault) => Ok((fault.sign() * 1e30, None)),
        }
    };

    // the correction scale is eps ln(-ln eps); expand around the sampled
    // first position until the sum equation changes sign
    let center = cfg.s1;
    let dy = (eps * (-eps.ln()).ln().abs()).max(1e-9);
    let (g_center, _) = shot(center)?;
    let (mut a, mut ga, mut c, mut gc) = (center, g_center, center, g_center);
    let mut step = 2.0 * dy;
    let mut tries = 0;
    while ga.signum() == gc.signum() {
        tries += 1;
        if tries > 200 {
            return Ok(Err(format!(
                "no bracket for the sum equation within {step:.3e} of s1"
            )));
        }
        // phi is increasing in s1; walk the side its sign asks for
        if g_center > 0.0 {
            a = a.add_f64(-step);
            let (g, _) = shot(a)?;
            ga = g;
        } else {
            c = c.add_f64(step);
            let (g, _) = shot(c)?;
            gc = g;
        }
        step *= 1.6;
        if step > model.b() {
            return Ok(Err("sum-equation bracket exceeded the segment".into()));
        }
    }
    if ga > 0.0 {
        std::mem::swap(&mut a, &mut c);
        std::mem::swap(&mut ga, &mut gc);
    }
    // now phi(a) < 0 < phi(c)

    let mut best: Option<(f64, Dd, Chain)> = None;
    let mut use_secant = true;
    for _ in 0..500 {
        let width = c.sub(a).to_f64().abs();
        let mut s_new = if use_secant && ga.abs() < 1e29 && gc.abs() < 1e29 && ga != gc {
            // secant in offsets from a, keeping double-double resolution
            let t = ga / (ga - gc);
            a.add(c.sub(a).mul_f64(t.clamp(1e-3, 1.0 - 1e-3)))
        } else {
            a.add(c.sub(a).mul_f64(0.5))
        };
        use_secant = !use_secant;
        let inside = (s_new.sub(a).to_f64() > 0.0) == (c.sub(a).to_f64() > 0.0)
            && s_new.sub(c).to_f64().abs() < width;
        if !inside || !s_new.hi.is_finite() {
            s_new = a.add(c.sub(a).mul_f64(0.5));
        }
        let (g, chain) = shot(s_new)?;
        if let Some(chain) = chain {
            if best.as_ref().is_none_or(|(bg, _, _)| g.abs() < bg.abs()) {
                best = Some((g, s_new, chain));
            }
        }
        if g.abs() <= tol {
            break;
        }
        if g < 0.0 {
            a = s_new;
            ga = g;
        } else {
            c = s_new;
            gc = g;
        }
        if width <= 1e-30 * a.hi.abs().max(1.0) {
            break;
        }
    }

    match best {
        Some((_, s1, chain)) => {
            let out = cfg.with_solution(s1, chain.gaps, SolverPath::Staged, evals);
            Ok(Ok((out, evals)))
        }
        None => Ok(Err("every chain trial faulted".into())),
    }
}

/// Damped Newton on the position vector with the analytic Jacobian:
/// `∂r_i/∂s_j = eps² H''(s_j)` for `j <= i`, plus the interaction terms
/// `∓ Ψ₁'(gap_i/eps)/eps` on the diagonal and superdiagonal.
fn newton_solve(
    cfg: &SpikeConfiguration,
    kernel: &InteractionKernel,
    model: &CurvatureModel,
    tol: f64,
    staged_note: &str,
) -> Result<(Dd, Vec<Dd>, usize), SolveError> {
    let eps = cfg.eps;
    let e2 = eps * eps;
    let k = cfg.k;
    let mut s = cfg.positions();

    let eval = |s: &[f64]| -> Result<Vec<f64>, SolveError> {
        let mut sum = Dd::ZERO;
        let mut r = Vec::with_capacity(k);
        for i in 0..k {
            if !model.in_margin(s[i]) {
                return Err(SolveError::StepOutOfDomain { i, s: s[i] });
            }
            sum = sum.add(model.eval_hp_dd(Dd::from_f64(s[i])));
            if i < k - 1 {
                let gap = s[i + 1] - s[i];
                if gap <= 0.0 {
                    return Err(SolveError::NotIncreasing { i });
                }
                let psi1 = kernel.psi1_dd(Dd::from_f64(gap).div_f64(eps))?;
                r.push(psi1.add(sum.mul_f64(e2)).to_f64());
            } else {
                r.push(sum.mul_f64(e2).to_f64());
            }
        }
        Ok(r)
    };

    let mut r = eval(&s)?;
    let mut worst = max_abs(&r);
    let mut iters = 0usize;
    for _ in 0..120 {
        if worst <= tol {
            break;
        }
        iters += 1;
        // assemble J (row-major dense; k stays modest at desk scale)
        let mut jac = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..=i.min(k - 1) {
                jac[i * k + j] = e2 * model.eval_hpp(s[j]);
            }
            if i < k - 1 {
                let dpsi = kernel.psi1_deriv((s[i + 1] - s[i]) / eps)? / eps;
                jac[i * k + i] -= dpsi;
                jac[i * k + i + 1] += dpsi;
            }
        }
        let mut rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        if !lu_solve(&mut jac, &mut rhs, k) {
            return Err(SolveError::NoConvergence {
                residual: worst,
                tol,
                staged_note: format!("{staged_note}; newton hit a singular Jacobian"),
            });
        }
        // damped update
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let trial: Vec<f64> = s
                .iter()
                .zip(&rhs)
                .map(|(si, di)| si + lambda * di)
                .collect();
            match eval(&trial) {
                Ok(rt) => {
                    let wt = max_abs(&rt);
                    if wt < worst {
                        s = trial;
                        r = rt;
                        worst = wt;
                        improved = true;
                        break;
                    }
                }
                Err(SolveError::Kernel(_))
                | Err(SolveError::StepOutOfDomain { .. })
                | Err(SolveError::NotIncreasing { .. }) => {}
                Err(e) => return Err(e),
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if worst > tol {
        return Err(SolveError::NoConvergence {
            residual: worst,
            tol,
            staged_note: format!("{staged_note}; newton stalled at {worst:.3e}"),
        });
    }
    let gaps: Vec<Dd> = s.windows(2).map(|w| Dd::from_f64(w[1] - w[0])).collect();
    Ok((Dd::from_f64(s[0]), gaps, iters))
}

/// LU with partial pivoting, in place; returns false on singularity.
fn lu_solve(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    for col in 0..n {
        let mut piv = col;
        let mut max = a[col * n + col].abs();
        for row in col + 1..n {
            let v = a[row * n + col].abs();
            if v > max {
                max = v;
                piv = row;
            }
        }
        if max < 1e-300 {
            return false;
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            a[row * n + col] = 0.0;
            for j in col + 1..n {
                a[row * n + j] -= f * a[col * n + j];
            }
            b[row] -= f * b[col];
        }
    }
    for row in (0..n).rev() {
        let mut acc = b[row];
        for j in row + 1..n {
            acc -= a[row * n + j] * b[j];
        }
        b[row] = acc / a[row * n + row];
    }
    true
}

/// Membership and spacing report for the admissible-configuration bounds.
#[derive(Clone, Debug)]
pub struct LambdaReport {
    /// `C eps ln(-ln eps)`: the first-correction bound actually used.
    pub y1_bound: f64,
    pub y1_abs: f64,
    pub y1_ok: bool,
    /// Second-difference bound violations (out of `k-2` interior tests).
    pub second_diff_violations: usize,
    /// Max of `|Δ²s| · min(Ψ(gap⁰/eps)) / eps³` over interior indices; the
    /// admissibility constant must dominate this.
    pub second_diff_max_ratio: f64,
    pub interior_gap_min_ratio: f64,
    pub end_gap_ratios: (f64, f64),
    pub spacing_ok: bool,
}

/// Checks the admissibility constraints with constant `c_admis` (violations
/// are reported, not fatal; the constant in the bounds is existential).
pub fn lambda_k_report(
    cfg: &SpikeConfiguration,
    kernel: &InteractionKernel,
    c_admis: f64,
) -> Result<LambdaReport, SolveError> {
    let eps = cfg.eps;
    let ln_eps_abs = eps.ln().abs();
    let h = eps * ln_eps_abs;
    let y = cfg.corrections();
    let y1_bound = c_admis * eps * (-eps.ln()).ln();
    let y1_abs = y[0].abs();

    let s = cfg.positions();
    let gaps0: Vec<f64> = cfg.s0.windows(2).map(|w| w[1] - w[0]).collect();
    let mut violations = 0usize;
    let mut max_ratio = 0.0f64;
    for i in 1..cfg.k - 1 {
        let d2 = (s[i + 1] - s[i]) - (s[i] - s[i - 1]);
        let psi_lo = kernel.psi(gaps0[i - 1] / eps)?;
        let psi_hi = kernel.psi(gaps0[i] / eps)?;
        let bound = c_admis * eps.powi(3) / psi_lo.min(psi_hi);
        let ratio = d2.abs() * psi_lo.min(psi_hi) / eps.powi(3);
        max_ratio = max_ratio.max(ratio);
        if d2.abs() > bound {
            violations += 1;
        }
    }

    let gaps = cfg.gap_values();
    let interior_gap_min_ratio = if cfg.k > 3 {
        gaps[1..cfg.k - 2]
            .iter()
            .map(|g| g / h)
            .fold(f64::INFINITY, f64::min)
    } else {
        f64::INFINITY
    };
    let end_gap_ratios = (gaps[0] / h, gaps[cfg.k - 2] / h);
    let spacing_ok = interior_gap_min_ratio >= 0.8
        && end_gap_ratios.0 >= 1.5
        && end_gap_ratios.0 <= 2.5
        && end_gap_ratios.1 >= 1.5
        && end_gap_ratios.1 <= 2.5;

    Ok(LambdaReport {
        y1_bound,
        y1_abs,
        y1_ok: y1_abs <= y1_bound,
        second_diff_violations: violations,
        second_diff_max_ratio: max_ratio,
        interior_gap_min_ratio,
        end_gap_ratios,
        spacing_ok,
    })
}

/// Structured-text export: per-spike table plus a summary block. The
/// solver's extended-precision chain state rides along in comment lines as
/// exact bit patterns so a reload can reproduce residuals verbatim.
pub fn export_configuration(cfg: &SpikeConfiguration, residuals: &[f64]) -> String {
    let mut out = String::new();
    out.push_str("# spike configuration\n");
    let _ = writeln!(out, "# eps = {:.17e}", cfg.eps);
    let _ = writeln!(out, "# h = {:.17e}", cfg.h);
    let _ = writeln!(out, "# k = {}", cfg.k);
    let _ = writeln!(out, "# y_inf_norm = {:.17e}", cfg.y_inf_norm());
    let _ = writeln!(out, "# max_residual = {:.17e}", max_abs(residuals));
    let _ = writeln!(out, "# solver = {}", cfg.solver.as_str());
    let _ = writeln!(
        out,
        "# chain-bits s1 {:016x} {:016x}",
        cfg.s1.hi.to_bits(),
        cfg.s1.lo.to_bits()
    );
    for (i, g) in cfg.gaps.iter().enumerate() {
        let _ = writeln!(
            out,
            "# chain-bits gap{} {:016x} {:016x}",
            i,
            g.hi.to_bits(),
            g.lo.to_bits()
        );
    }
    out.push_str("# columns: i t_mid s0 y s r\n");
    let s = cfg.positions();
    let y = cfg.corrections();
    for i in 0..cfg.k {
        let t_mid = if i < cfg.k - 1 {
            format!("{:.17e}", cfg.t_mid[i])
        } else {
            "nan".to_string()
        };
        let _ = writeln!(
            out,
            "{}\t{}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}",
            i + 1,
            t_mid,
            cfg.s0[i],
            y[i],
            s[i],
            residuals[i]
        );
    }
    out
}

/// Parses a configuration table written by [`export_configuration`].
/// Returns the configuration and the stored residual column.
pub fn import_configuration(text: &str) -> Result<(SpikeConfiguration, Vec<f64>), SolveError> {
    let mut eps = None;
    let mut h = None;
    let mut solver = SolverPath::AlreadyConverged;
    let mut s1_bits: Option<Dd> = None;
    let mut gap_bits: Vec<Dd> = Vec::new();
    let mut rows: Vec<(f64, f64, f64, f64)> = Vec::new(); // t_mid, s0, s, r
    let parse_dd = |hi: &str, lo: &str| -> Option<Dd> {
        let hi = u64::from_str_radix(hi, 16).ok()?;
        let lo = u64::from_str_radix(lo, 16).ok()?;
        Some(Dd {
            hi: f64::from_bits(hi),
            lo: f64::from_bits(lo),
        })
    };
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(bits) = rest.strip_prefix("chain-bits ") {
                let f: Vec<&str> = bits.split_whitespace().collect();
                if f.len() == 3 {
                    if let Some(v) = parse_dd(f[1], f[2]) {
                        if f[0] == "s1" {
                            s1_bits = Some(v);
                        } else {
                            gap_bits.push(v);
                        }
                    }
                }
            } else if let Some((key, v)) = rest.split_once('=') {
                match key.trim() {
                    "eps" => eps = v.trim().parse().ok(),
                    "h" => h = v.trim().parse().ok(),
                    "solver" => {
                        solver =
                            SolverPath::from_str(v.trim()).unwrap_or(SolverPath::AlreadyConverged)
                    }
                    _ => {}
                }
            }
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 6 {
            return Err(SolveError::Import(format!("bad configuration row: {line}")));
        }
        let parse = |t: &str| t.parse::<f64>().unwrap_or(f64::NAN);
        rows.push((parse(f[1]), parse(f[2]), parse(f[4]), parse(f[5])));
    }
    let eps = eps.ok_or_else(|| SolveError::Import("missing eps header".into()))?;
    let h = h.ok_or_else(|| SolveError::Import("missing h header".into()))?;
    let k = rows.len();
    if k < 3 {
        return Err(SolveError::Import("configuration table too short".into()));
    }
    let s: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let (s1, gaps) = match (s1_bits, gap_bits.len() == k - 1) {
        (Some(s1), true) => (s1, gap_bits),
        _ => (
            Dd::from_f64(s[0]),
            s.windows(2).map(|w| Dd::from_f64(w[1] - w[0])).collect(),
        ),
    };
    let cfg = SpikeConfiguration {
        eps,
        h,
        k,
        t_mid: rows[..k - 1].iter().map(|r| r.0).collect(),
        s0: rows.iter().map(|r| r.1).collect(),
        s1,
        gaps,
        solver,
        solve_iterations: 0,
    };
    Ok((cfg, rows.iter().map(|r| r.3).collect()))
}
