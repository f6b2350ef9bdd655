//! Continuum limit of the spike balance system: the planar system
//!
//! ```text
//! dx/dt = -(1/ln eps) G((eps/ln eps) rho(t))
//! drho/dt = H'(gamma(x(t)))
//! rho(0) = 0,  rho(b_eps) = rho_b,  x'(b_eps) pinned by the terminal gap
//! ```
//!
//! Three boundary conditions on a planar system: the terminal pair
//! `(x_b, rho_b)` is coupled through `rho_b = eps ln(eps) H'(gamma(x_b))`,
//! which reduces the overdetermined problem to a single scalar root-find on
//! the terminal position `x_b`. Integration runs backward from `t = b_eps`
//! and the shot function is `rho(0)`.
//!
//! Sign bookkeeping: `ln eps < 0`, and the argument handed to `G` must be
//! positive, so `rho <= 0` along any valid trajectory. Near `t = 0` where
//! `rho -> 0` the argument is clamped at the `eps^3` floor; the clamp is
//! flagged on the solution so its influence can be measured rather than
//! assumed.

use crate::geometry::CurvatureModel;
use crate::interaction::{InteractionError, InteractionKernel};
use crate::ode::{integrate, DenseSolution, OdeError, OdeOptions};
use std::cell::Cell;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ContinuumError {
    #[error("kernel range too small for eps = {eps}: needs psi1 arguments in [{need_lo:.3e}, {need_hi:.3e}], table covers ({have_lo:.3e}, {have_hi:.3e})")]
    KernelRangeExceeded {
        eps: f64,
        need_lo: f64,
        need_hi: f64,
        have_lo: f64,
        have_hi: f64,
    },
    #[error("trajectory escaped the curvature domain at t = {t:.6}: x = {x:.6}")]
    TrajectoryEscape { t: f64, x: f64 },
    #[error("rho went positive beyond the clamp floor at t = {t:.6}: rho = {rho:.3e}")]
    SignConventionViolation { t: f64, rho: f64 },
    #[error("no sign change of rho(0) over x_b in [{lo:.6}, {hi:.6}]")]
    BracketFailure { lo: f64, hi: f64 },
    #[error("shooting stalled with |rho(0)| = {residual:.3e} (tol {tol:.3e})")]
    ShootFailure { residual: f64, tol: f64 },
    #[error("eps = {eps} out of range (need 0 < eps < 1/e)")]
    EpsOutOfRange { eps: f64 },
    #[error("segment too short: only {k} lattice sites")]
    TooFewSites { k: usize },
    #[error(transparent)]
    Kernel(#[from] InteractionError),
    #[error(transparent)]
    Integrator(#[from] OdeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Fault {
    Escape,
    SignViolation,
    KernelRange,
}

/// One backward integration from a trial terminal position.
#[derive(Debug)]
pub struct BackwardRun {
    /// Dense solution in the reversed time `tau = b_eps - t`.
    sol: DenseSolution<2>,
    pub rho0: f64,
    pub x0: f64,
    pub clamped: bool,
    pub rho_b: f64,
    pub x_b: f64,
    pub b_eps: f64,
}

impl BackwardRun {
    pub fn eval(&self, t: f64) -> [f64; 2] {
        self.sol.eval(self.b_eps - t)
    }
}

/// Converged continuum solution with lattice bookkeeping.
#[derive(Debug)]
pub struct ContinuumSolution {
    pub eps: f64,
    /// Boot size `h = -eps ln eps`.
    pub h: f64,
    pub k: usize,
    pub b_eps: f64,
    pub x_b: f64,
    pub rho_b: f64,
    pub x0: f64,
    pub shoot_residual: f64,
    pub shoot_tol: f64,
    pub shoot_iterations: usize,
    pub bracket: (f64, f64),
    /// True when the `eps^3` clamp floor was active somewhere on the
    /// converged trajectory (it always is near `t = 0`).
    pub clamped: bool,
    run: BackwardRun,
}

impl ContinuumSolution {
    pub fn eval_x(&self, t: f64) -> f64 {
        self.run.eval(t)[0]
    }

    pub fn eval_rho(&self, t: f64) -> f64 {
        self.run.eval(t)[1]
    }

    /// Uniform `(t, x, rho)` sampling for export.
    pub fn sample(&self, n: usize) -> Vec<(f64, f64, f64)> {
        (0..n)
            .map(|i| {
                let t = self.b_eps * i as f64 / (n - 1) as f64;
                let y = self.run.eval(t);
                (t, y[0], y[1])
            })
            .collect()
    }

    /// Re-integrates forward from `(x(0), rho(0) = 0)` and returns the
    /// terminal mismatch `(|x - x_b|, |rho - rho_b|)`.
    pub fn forward_consistency(
        &self,
        model: &CurvatureModel,
        kernel: &InteractionKernel,
    ) -> Result<(f64, f64), ContinuumError> {
        let eps = self.eps;
        let ln_eps = eps.ln();
        let fault = Cell::new(None::<Fault>);
        let rhs = rhs_factory(model, kernel, eps, ln_eps, 1.0, &fault);
        let opts = ode_options();
        let sol = integrate(rhs, 0.0, self.b_eps, [self.x0, 0.0], &opts, |_, _| {
            fault.get().is_some()
        })?;
        if let Some(f) = fault.get() {
            return Err(fault_to_error(f, eps, self.b_eps, sol.y_end()));
        }
        let [x_end, rho_end] = sol.y_end();
        Ok(((x_end - self.x_b).abs(), (rho_end - self.rho_b).abs()))
    }

    pub fn export(&self, samples: usize) -> String {
        let mut s = String::new();
        s.push_str("# continuum trajectory\n");
        let _ = writeln!(s, "# eps = {:.17e}", self.eps);
        let _ = writeln!(s, "# h = {:.17e}", self.h);
        let _ = writeln!(s, "# k = {}", self.k);
        let _ = writeln!(s, "# b_eps = {:.17e}", self.b_eps);
        let _ = writeln!(s, "# x_b = {:.17e}", self.x_b);
        let _ = writeln!(s, "# rho_b = {:.17e}", self.rho_b);
        let _ = writeln!(s, "# x0 = {:.17e}", self.x0);
        let _ = writeln!(s, "# shoot_residual = {:.17e}", self.shoot_residual);
        let _ = writeln!(s, "# clamped = {}", u8::from(self.clamped));
        s.push_str("# columns: t x rho\n");
        for (t, x, rho) in self.sample(samples) {
            let _ = writeln!(s, "{t:.17e}\t{x:.17e}\t{rho:.17e}");
        }
        s
    }
}

fn ode_options() -> OdeOptions {
    // rho reaches curvature scale along the dip, so the relative tolerance
    // must sit two orders below the absolute trajectory targets downstream
    OdeOptions {
        rtol: 1e-12,
        atol: 1e-14,
        max_steps: 4_000_000,
        max_step: f64::INFINITY,
    }
}

/// RHS in reversed time when `direction = -1.0` (backward), physical time
/// when `direction = +1.0`. `rho` is clamped at the `eps^3` floor before
/// being handed to `G`; a positive excursion beyond a guard multiple of the
/// floor is recorded as a sign-convention fault.
fn rhs_factory<'a>(
    model: &'a CurvatureModel,
    kernel: &'a InteractionKernel,
    eps: f64,
    ln_eps: f64,
    direction: f64,
    fault: &'a Cell<Option<Fault>>,
) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] + 'a {
    let floor = eps.powi(3);
    let guard = (1e3 * floor).max(1e-9);
    move |_t, y| {
        let [x, rho] = *y;
        if !model.in_margin(x) {
            fault.set(Some(Fault::Escape));
            return [0.0, 0.0];
        }
        if rho > guard {
            fault.set(Some(Fault::SignViolation));
            return [0.0, 0.0];
        }
        let arg = eps * rho.min(-floor) / ln_eps;
        let g = match kernel.invert_psi1(arg) {
            Ok(g) => g,
            Err(_) => {
                fault.set(Some(Fault::KernelRange));
                return [0.0, 0.0];
            }
        };
        [
            direction * (-1.0 / ln_eps) * g,
            direction * model.eval_hp(x),
        ]
    }
}

fn fault_to_error(f: Fault, eps: f64, t: f64, y: [f64; 2]) -> ContinuumError {
    match f {
        Fault::Escape => ContinuumError::TrajectoryEscape { t, x: y[0] },
        Fault::SignViolation => ContinuumError::SignConventionViolation { t, rho: y[1] },
        Fault::KernelRange => ContinuumError::KernelRangeExceeded {
            eps,
            need_lo: f64::NAN,
            need_hi: f64::NAN,
            have_lo: f64::NAN,
            have_hi: f64::NAN,
        },
    }
}

/// Lattice parameters implied by `eps` and the segment length.
pub fn lattice(eps: f64, b: f64) -> Result<(f64, usize, f64), ContinuumError> {
    if !(eps > 0.0 && eps < (-1.0f64).exp()) {
        return Err(ContinuumError::EpsOutOfRange { eps });
    }
    let h = -eps * eps.ln();
    let k = (b / h).floor() as usize + 1;
    if k < 3 {
        return Err(ContinuumError::TooFewSites { k });
    }
    Ok((h, k, (k - 1) as f64 * h))
}

/// Integrates the system backward from `t = b_eps` with the terminal pair
/// `x(b_eps) = x_b`, `rho(b_eps) = eps ln(eps) H'(gamma(x_b))`.
pub fn integrate_backward(
    model: &CurvatureModel,
    kernel: &InteractionKernel,
    eps: f64,
    x_b: f64,
) -> Result<BackwardRun, ContinuumError> {
    let (_, _, b_eps) = lattice(eps, model.b())?;
    integrate_backward_inner(model, kernel, eps, x_b, b_eps)
        .and_then(|res| res.map_err(|(f, t, y)| fault_to_error(f, eps, t, y)))
}

/// Inner variant used by the shot: faults come back as values so the
/// root-finder can use them as side information instead of aborting.
#[allow(clippy::type_complexity)]
fn integrate_backward_inner(
    model: &CurvatureModel,
    kernel: &InteractionKernel,
    eps: f64,
    x_b: f64,
    b_eps: f64,
) -> Result<Result<BackwardRun, (Fault, f64, [f64; 2])>, ContinuumError> {
    let ln_eps = eps.ln();
    let rho_b = eps * ln_eps * model.eval_hp(x_b);
    let fault = Cell::new(None::<Fault>);
    let rhs = rhs_factory(model, kernel, eps, ln_eps, -1.0, &fault);
    let opts = ode_options();
    let sol = integrate(rhs, 0.0, b_eps, [x_b, rho_b], &opts, |_, _| {
        fault.get().is_some()
    })?;
    if let Some(f) = fault.get() {
        let t = b_eps - sol.t_end();
        return Ok(Err((f, t, sol.y_end())));
    }
    let [x0, rho0] = sol.y_end();
    // the clamp is active wherever |rho| dips under the floor
    let floor = eps.powi(3);
    let clamped = (0..=200).any(|i| {
        let tau = b_eps * i as f64 / 200.0;
        sol.eval(tau)[1] > -floor
    });
    Ok(Ok(BackwardRun {
        sol,
        rho0,
        x0,
        clamped,
        rho_b,
        x_b,
        b_eps,
    }))
}

/// Verifies the kernel table covers every `G` argument the trajectory can
/// produce for this `eps`, from the clamp floor up to the largest `|rho|`
/// reachable inside the extended domain.
fn check_kernel_coverage(
    model: &CurvatureModel,
    kernel: &InteractionKernel,
    eps: f64,
    b_eps: f64,
) -> Result<(), ContinuumError> {
    let ln_eps = eps.ln();
    let mut hp_max = 0.0f64;
    let lo = model.s_begin() - 0.1 * model.b();
    let hi = model.s_end() + 0.1 * model.b();
    for i in 0..=400 {
        let s = lo + (hi - lo) * i as f64 / 400.0;
        hp_max = hp_max.max(model.eval_hp(s).abs());
    }
    let rho_scale = eps * ln_eps.abs() * hp_max + 1.2 * b_eps * hp_max;
    let need_lo = eps * eps.powi(3) / ln_eps.abs();
    let need_hi = eps * rho_scale / ln_eps.abs();
    let (have_lo, have_hi) = kernel.psi1_range();
    if need_lo < have_lo || need_hi > have_hi {
        return Err(ContinuumError::KernelRangeExceeded {
            eps,
            need_lo,
            need_hi,
            have_lo,
            have_hi,
        });
    }
    Ok(())
}

/// Solves the overdetermined system: finds `x_b` such that the backward
/// trajectory lands on `rho(0) = 0` within `shoot_tol`.
pub fn shoot(
    model: &CurvatureModel,
    kernel: &InteractionKernel,
    eps: f64,
    shoot_tol: f64,
) -> Result<ContinuumSolution, ContinuumError> {
    let (h, k, b_eps) = lattice(eps, model.b())?;
    check_kernel_coverage(model, kernel, eps, b_eps)?;

    const BIG: f64 = 1e30;
    let mut evals = 0usize;
    let mut shot = |x_b: f64| -> Result<(f64, Option<BackwardRun>), ContinuumError> {
        evals += 1;
        match integrate_backward_inner(model, kernel, eps, x_b, b_eps)? {
            Ok(run) => Ok((run.rho0, Some(run))),
            // a positive blow-up of rho or a leftward escape both mean the
            // terminal position sits below the root of rho(0)
            Err((Fault::SignViolation | Fault::Escape, _, _)) => Ok((BIG, None)),
            Err((Fault::KernelRange, t, y)) => Err(fault_to_error(Fault::KernelRange, eps, t, y)),
        }
    };

    // rho(0) is decreasing in x_b. Expand symmetrically around the nominal
    // endpoint until the sign changes.
    let center = model.s_begin() + b_eps;
    let margin_hi = model.s_end() + 0.1 * model.b();
    let margin_lo = model.s_begin();
    let (g_center, _) = shot(center)?;
    let mut lo = center;
    let mut g_lo = g_center;
    let mut hi = center;
    let mut g_hi = g_center;
    let step = 0.02 * model.b();
    let mut expansions = 0;
    while g_lo.signum() == g_hi.signum() {
        expansions += 1;
        if expansions > 60 {
            return Err(ContinuumError::BracketFailure { lo, hi });
        }
        let mut moved = false;
        if hi + step <= margin_hi {
            hi += step;
            let (g, _) = shot(hi)?;
            g_hi = g;
            moved = true;
        }
        if g_lo.signum() != g_hi.signum() {
            break;
        }
        if lo - step >= margin_lo {
            lo -= step;
            let (g, _) = shot(lo)?;
            g_lo = g;
            moved = true;
        }
        if !moved {
            return Err(ContinuumError::BracketFailure { lo, hi });
        }
    }
    // orient: a = positive side, c = negative side
    let (mut a, mut ga, mut c, mut gc) = if g_lo > 0.0 {
        (lo, g_lo, hi, g_hi)
    } else {
        (hi, g_hi, lo, g_lo)
    };

    let mut best: Option<(f64, BackwardRun)> = None;
    for _ in 0..300 {
        let secant_ok = ga.abs() < BIG && gc.abs() < BIG && ga != gc;
        let mut x_new = if secant_ok {
            (a * gc - c * ga) / (gc - ga)
        } else {
            0.5 * (a + c)
        };
        let lo_b = a.min(c);
        let hi_b = a.max(c);
        if !(x_new > lo_b && x_new < hi_b) || !x_new.is_finite() {
            x_new = 0.5 * (a + c);
        }
        let (g, run) = shot(x_new)?;
        if let Some(run) = run {
            if best.as_ref().is_none_or(|(bg, _)| g.abs() < bg.abs()) {
                best = Some((g, run));
            }
        }
        if g.abs() <= shoot_tol {
            break;
        }
        if g > 0.0 {
            a = x_new;
            ga = g;
        } else {
            c = x_new;
            gc = g;
        }
        if (a - c).abs() <= 4.0 * f64::EPSILON * a.abs().max(1.0) {
            break;
        }
    }

    let (residual, run) = best.ok_or(ContinuumError::BracketFailure { lo: a, hi: c })?;
    if residual.abs() > shoot_tol {
        return Err(ContinuumError::ShootFailure {
            residual: residual.abs(),
            tol: shoot_tol,
        });
    }
    Ok(ContinuumSolution {
        eps,
        h,
        k,
        b_eps,
        x_b: run.x_b,
        rho_b: run.rho_b,
        x0: run.x0,
        shoot_residual: residual.abs(),
        shoot_tol,
        shoot_iterations: evals,
        bracket: (a.min(c), a.max(c)),
        clamped: run.clamped,
        run,
    })
}

/// Default shot tolerance: `rho` scales like the boot size.
pub fn default_shoot_tol(eps: f64) -> f64 {
    1e-10 * (-eps * eps.ln())
}
