//! Scaling and property checks tying the numerics back to every
//! quantitative claim of the construction, run over a sweep of `eps`.
//!
//! Asymptotic `o(1)` claims are tested as monotone trends plus a loose band
//! at the smallest `eps`; desk-scale `eps` never reaches the limit, so the
//! trend is the honest check. Fitted constants are accepted when they vary
//! by at most 3x across the sweep, which catches a wrong exponent without
//! overclaiming precision the sweep cannot deliver.

use crate::continuum::{shoot, ContinuumError, ContinuumSolution};
use crate::discrete::{
    error_terms, initial_configuration, lambda_k_report, max_abs, residual, solve_corrections,
    SolveError, SpikeConfiguration,
};
use crate::geometry::{validate_h1, CurvatureModel, H1Report, H1Tolerances};
use crate::ground_state::GroundStateProfile;
use crate::interaction::{evenness_integral, InteractionError, InteractionKernel};
use crate::quad::{KahanSum, PanelRule};
use std::fmt::Write as _;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifierError {
    #[error("geometry failed certification: min H'' = {c0:.6e} at s = {at:.6}, endpoint mismatch = {mismatch:.3e}")]
    GeometryRejected { c0: f64, at: f64, mismatch: f64 },
    #[error(transparent)]
    Continuum(#[from] ContinuumError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Interaction(#[from] InteractionError),
    #[error("sweep needs at least one eps value")]
    EmptySweep,
}

/// Every check the sweep runs, with the quantitative claim it measures.
/// The report enumerates exactly this list; nothing is skipped silently.
pub const CHECK_MANIFEST: &[(&str, &str)] = &[
    (
        "terminal-compatibility",
        "rho_b = eps ln(eps) H'(gamma(x_b)) exactly at the shot solution",
    ),
    (
        "terminal-slope-trend",
        "rho_b/h + H'(gamma(b_eps)) shrinks like ln(-ln eps)/ln(eps)",
    ),
    (
        "left-end-drift",
        "x(0) - s_begin = O(ln(-ln eps)/ln eps)",
    ),
    (
        "initial-error-terms",
        "max_i |E_i| = O(eps) and sum_i |E_i| = O(eps)",
    ),
    (
        "terminal-error-term",
        "E_k = O(eps^2 ln(-ln eps)/|ln eps|)",
    ),
    (
        "correction-norm",
        "solved corrections obey max|y| <= C eps ln(-ln eps)",
    ),
    (
        "residual-exactness",
        "balance residuals vanish at the solved configuration",
    ),
    (
        "spacing-laws",
        "interior gaps >= (1+o(1)) eps|ln eps|; w(gap/eps) <= c eps/|ln eps|; end gaps trend to 2 eps|ln eps|",
    ),
    (
        "admissibility",
        "|y_1| bounded by C eps ln(-ln eps); second differences bounded by C eps^3 / min psi",
    ),
    (
        "reversal-symmetry",
        "for mirror-symmetric curvature the solved configuration is reversal-invariant and the sum equation cancels pairwise",
    ),
    (
        "midpoint-rule",
        "midpoint partial sums track the running integral to O(h^2)",
    ),
    (
        "evenness-cancellation",
        "paired-shift integral cancels at equal shifts and scales like |q1-q2| w(q1)",
    ),
];

#[derive(Clone, Copy, Debug)]
pub struct SweepConfig {
    /// Shot tolerance as a multiple of the boot size `h`.
    pub shoot_tol_factor: f64,
    /// Solve tolerance as a multiple of `eps^2`.
    pub solve_tol_factor: f64,
    /// Constant used in the admissibility bounds.
    pub c_admis: f64,
    /// Fitted constants may vary by at most this factor across the sweep.
    pub stability_factor: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            shoot_tol_factor: 1e-10,
            solve_tol_factor: 1e-12,
            c_admis: 10.0,
            stability_factor: 3.0,
        }
    }
}

/// One per-`eps` pipeline run kept for reporting and downstream export.
#[derive(Debug)]
pub struct EpsRun {
    pub eps: f64,
    pub sol: ContinuumSolution,
    pub initial: SpikeConfiguration,
    pub solved: SpikeConfiguration,
    pub e_terms: Vec<f64>,
    pub residual_initial: Vec<f64>,
    pub residual_solved: Vec<f64>,
    pub solve_tol: f64,
}

#[derive(Clone, Debug)]
pub struct CheckRecord {
    pub name: &'static str,
    pub anchor: &'static str,
    pub passed: bool,
    /// Loud skip (structural, e.g. fits need two sweep points); a skipped
    /// check does not fail the suite but is always listed.
    pub skipped: Option<String>,
    pub metrics: Vec<(String, f64)>,
    pub runtime_s: f64,
}

impl CheckRecord {
    fn ok(&self) -> bool {
        self.passed || self.skipped.is_some()
    }
}

#[derive(Clone, Debug)]
pub struct VerificationReport {
    pub eps_list: Vec<f64>,
    pub records: Vec<CheckRecord>,
    /// Pipeline failures per eps; the suite continues past them and the
    /// surviving runs feed the checks.
    pub run_failures: Vec<(f64, String)>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.run_failures.is_empty() && self.records.iter().all(|r| r.ok())
    }

    pub fn record(&self, name: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    /// Human-readable section (includes runtimes).
    pub fn render_human(&self) -> String {
        let mut s = String::new();
        s.push_str("verification report\n");
        let _ = writeln!(
            s,
            "eps sweep: {}",
            self.eps_list
                .iter()
                .map(|e| format!("{e:.3e}"))
                .collect::<Vec<_>>()
                .join(" ")
        );
        for (eps, why) in &self.run_failures {
            let _ = writeln!(s, "[FAIL] pipeline at eps={eps:.3e}: {why}");
        }
        for r in &self.records {
            let status = match (&r.skipped, r.passed) {
                (Some(_), _) => "SKIP",
                (None, true) => "PASS",
                (None, false) => "FAIL",
            };
            let _ = writeln!(s, "[{status}] {} ({:.2}s)", r.name, r.runtime_s);
            let _ = writeln!(s, "    claim: {}", r.anchor);
            if let Some(reason) = &r.skipped {
                let _ = writeln!(s, "    skipped: {reason}");
            }
            for (k, v) in &r.metrics {
                let _ = writeln!(s, "    {k} = {v:.6e}");
            }
        }
        let _ = writeln!(
            s,
            "overall: {}",
            if self.all_passed() { "PASS" } else { "FAIL" }
        );
        s
    }

    /// Machine-readable section: deterministic, no runtimes.
    pub fn render_machine(&self) -> String {
        let mut s = String::new();
        s.push_str("check\tstatus\tmetric\tvalue\n");
        for (eps, _) in &self.run_failures {
            let _ = writeln!(s, "pipeline\tfail\teps\t{eps:.17e}");
        }
        for r in &self.records {
            let status = match (&r.skipped, r.passed) {
                (Some(_), _) => "skip",
                (None, true) => "pass",
                (None, false) => "fail",
            };
            if r.metrics.is_empty() {
                let _ = writeln!(s, "{}\t{}\t-\t-", r.name, status);
            }
            for (k, v) in &r.metrics {
                let _ = writeln!(s, "{}\t{}\t{}\t{:.17e}", r.name, status, k, v);
            }
        }
        s
    }
}

pub fn model_is_symmetric(model: &CurvatureModel) -> bool {
    let c = 2.0 * model.s_begin() + model.b();
    (0..=64).all(|i| {
        let s = model.s_begin() + model.b() * i as f64 / 64.0;
        (model.eval_h(s) - model.eval_h(c - s)).abs() <= 1e-10
    })
}

/// Runs the full pipeline for one `eps`.
pub fn run_pipeline(
    profile_kernel: &InteractionKernel,
    model: &CurvatureModel,
    eps: f64,
    cfg: &SweepConfig,
) -> Result<EpsRun, VerifierError> {
    let h = -eps * eps.ln();
    let sol = shoot(model, profile_kernel, eps, cfg.shoot_tol_factor * h)?;
    let initial = initial_configuration(&sol, profile_kernel, model)?;
    let e_terms = error_terms(&initial, profile_kernel, model)?;
    let residual_initial = residual(&initial, profile_kernel, model)?;
    let solve_tol = cfg.solve_tol_factor * eps * eps;
    let solved = solve_corrections(&initial, profile_kernel, model, solve_tol)?;
    let residual_solved = residual(&solved, profile_kernel, model)?;
    Ok(EpsRun {
        eps,
        sol,
        initial,
        solved,
        e_terms,
        residual_initial,
        residual_solved,
        solve_tol,
    })
}

/// Midpoint partial sums of `g` versus its running integral on the lattice
/// `t_i = (i-1) h`, `i = 1..k`: returns `max_i | sum_{j<=i} g(t_mid_j) h -
/// int_0^{t_{i+1}} g |`. The integral uses per-cell Gauss panels.
pub fn midpoint_vs_integral(g: impl Fn(f64) -> f64, h: f64, k: usize) -> f64 {
    let rule = PanelRule::new(0.0, 1.0, 2.0, 10); // reference nodes on [0,1]
    let mut sum = KahanSum::new();
    let mut integral = KahanSum::new();
    let mut worst = 0.0f64;
    for i in 1..k {
        let t_mid = (i as f64 - 0.5) * h;
        sum.add(g(t_mid) * h);
        // integral over cell [t_i, t_{i+1}] = [(i-1)h, ih]
        let a = (i - 1) as f64 * h;
        for (node, weight) in rule.nodes.iter().zip(&rule.weights) {
            let t = a + 0.5 * h * (node + 1.0);
            integral.add(g(t) * weight * 0.5 * h);
        }
        worst = worst.max((sum.value() - integral.value()).abs());
    }
    worst
}

fn fit_stability(vals: &[f64]) -> f64 {
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(0.0f64, f64::max);
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Growth of a fitted upper-bound constant as `eps` decreases: the largest
/// ratio of a later value over an earlier one. A claimed envelope is wrong
/// when its fitted constant grows; a shrinking constant satisfies the bound
/// a fortiori, so shrinkage is never penalized. Values of the quantity that
/// dip far below the envelope (sign changes, incidental zeros) are floored
/// at a quarter of the peak so a rebound out of a dip is not mistaken for
/// exponential growth.
fn fit_growth(vals: &[f64]) -> f64 {
    let peak = vals.iter().copied().fold(0.0f64, f64::max);
    let floor = 0.25 * peak;
    let mut worst = 0.0f64;
    for i in 0..vals.len() {
        for j in i + 1..vals.len() {
            let base = vals[i].max(floor);
            if base > 0.0 {
                worst = worst.max(vals[j] / base);
            }
        }
    }
    worst
}

fn monotone_decreasing(vals: &[f64], slack: f64) -> bool {
    vals.windows(2).all(|w| w[1] <= w[0] * (1.0 + slack))
}

fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}

fn ln_ln_ratio(eps: f64) -> f64 {
    ((-eps.ln()).ln()) / eps.ln().abs()
}

/// Runs every manifest check over the sweep. The geometry gate runs first;
/// a model that fails certification aborts the whole suite.
pub fn run_sweep(
    profile: &GroundStateProfile,
    kernel: &InteractionKernel,
    model: &CurvatureModel,
    eps_list: &[f64],
    cfg: &SweepConfig,
) -> Result<(VerificationReport, Vec<EpsRun>), VerifierError> {
    if eps_list.is_empty() {
        return Err(VerifierError::EmptySweep);
    }
    let h1 = validate_h1(model, H1Tolerances::default());
    if !h1.pass {
        return Err(geometry_rejection(&h1));
    }

    // per-eps failures are recorded and the suite continues on whatever
    // survives; only the geometry gate aborts outright
    let mut runs = Vec::with_capacity(eps_list.len());
    let mut run_failures = Vec::new();
    for &eps in eps_list {
        match run_pipeline(kernel, model, eps, cfg) {
            Ok(run) => runs.push(run),
            Err(e) => run_failures.push((eps, e.to_string())),
        }
    }
    if runs.is_empty() {
        return Ok((
            VerificationReport {
                eps_list: eps_list.to_vec(),
                records: Vec::new(),
                run_failures,
            },
            runs,
        ));
    }

    let multi = runs.len() >= 2;
    let symmetric = model_is_symmetric(model);
    let mut records = Vec::new();

    // terminal-compatibility
    records.push(timed("terminal-compatibility", |m| {
        let mut pass = true;
        for r in &runs {
            let expect = r.eps * r.eps.ln() * model.eval_hp(r.sol.x_b);
            let dev = (r.sol.rho_b / expect - 1.0).abs();
            m.push((format!("eps={:.3e}:rel_dev", r.eps), dev));
            pass &= dev <= 1e-8;
        }
        (pass, None)
    }));

    // terminal-slope-trend
    records.push(timed("terminal-slope-trend", |m| {
        let mut vals = Vec::new();
        for r in &runs {
            let hp_end = model.eval_hp(model.s_begin() + r.sol.b_eps);
            let v = (r.sol.rho_b / r.sol.h + hp_end).abs();
            m.push((format!("eps={:.3e}:gap", r.eps), v));
            vals.push((v, hp_end.abs()));
        }
        if !multi {
            return (true, Some("trend needs >= 2 eps values".into()));
        }
        let seq: Vec<f64> = vals.iter().map(|v| v.0).collect();
        let (last, scale) = *vals.last().unwrap();
        let pass = monotone_decreasing(&seq, 0.02) && last <= 0.5 * scale;
        m.push(("terminal_ratio".into(), last / scale));
        (pass, None)
    }));

    // left-end-drift
    records.push(timed("left-end-drift", |m| {
        let mut fitted = Vec::new();
        for r in &runs {
            let c = (r.sol.x0 - model.s_begin()).abs() / ln_ln_ratio(r.eps);
            m.push((format!("eps={:.3e}:fitted_c", r.eps), c));
            fitted.push(c);
        }
        if !multi {
            return (true, Some("growth fit needs >= 2 eps values".into()));
        }
        let growth = fit_growth(&fitted);
        m.push(("growth".into(), growth));
        (growth <= cfg.stability_factor, None)
    }));

    // initial-error-terms
    records.push(timed("initial-error-terms", |m| {
        let mut cmax = Vec::new();
        let mut csum = Vec::new();
        for r in &runs {
            let interior = &r.e_terms[..r.e_terms.len() - 1];
            let emax = max_abs(interior) / r.eps;
            let esum: f64 = interior.iter().map(|e| e.abs()).sum::<f64>() / r.eps;
            m.push((format!("eps={:.3e}:max_over_eps", r.eps), emax));
            m.push((format!("eps={:.3e}:sum_over_eps", r.eps), esum));
            cmax.push(emax);
            csum.push(esum);
        }
        if !multi {
            return (true, Some("stability fit needs >= 2 eps values".into()));
        }
        let s1 = fit_stability(&cmax);
        let s2 = fit_stability(&csum);
        m.push(("stability_max".into(), s1));
        m.push(("stability_sum".into(), s2));
        (
            s1 <= cfg.stability_factor && s2 <= cfg.stability_factor,
            None,
        )
    }));

    // terminal-error-term
    records.push(timed("terminal-error-term", |m| {
        let mut fitted = Vec::new();
        for r in &runs {
            let ek = r.e_terms[r.e_terms.len() - 1].abs();
            let c = ek / (r.eps * r.eps * ln_ln_ratio(r.eps));
            m.push((format!("eps={:.3e}:fitted_c", r.eps), c));
            fitted.push(c);
        }
        if !multi {
            return (true, Some("growth fit needs >= 2 eps values".into()));
        }
        let growth = fit_growth(&fitted);
        m.push(("growth".into(), growth));
        (growth <= cfg.stability_factor, None)
    }));

    // correction-norm
    records.push(timed("correction-norm", |m| {
        let mut fitted = Vec::new();
        for r in &runs {
            let c = r.solved.y_inf_norm() / (r.eps * (-r.eps.ln()).ln());
            m.push((format!("eps={:.3e}:fitted_c", r.eps), c));
            // basin diagnostic: how far the midpoint sampling starts from
            // the exact balance
            m.push((
                format!("eps={:.3e}:initial_residual", r.eps),
                max_abs(&r.residual_initial),
            ));
            m.push((
                format!("eps={:.3e}:solver", r.eps),
                match r.solved.solver {
                    crate::discrete::SolverPath::AlreadyConverged => 0.0,
                    crate::discrete::SolverPath::Staged => 1.0,
                    crate::discrete::SolverPath::Newton => 2.0,
                },
            ));
            fitted.push(c);
        }
        if !multi {
            return (true, Some("stability fit needs >= 2 eps values".into()));
        }
        let stab = fit_stability(&fitted);
        m.push(("stability".into(), stab));
        (stab <= cfg.stability_factor, None)
    }));

    // residual-exactness
    records.push(timed("residual-exactness", |m| {
        let mut pass = true;
        for r in &runs {
            let worst = max_abs(&r.residual_solved);
            m.push((format!("eps={:.3e}:max_residual", r.eps), worst));
            m.push((format!("eps={:.3e}:tol", r.eps), r.solve_tol));
            pass &= worst <= r.solve_tol;
        }
        (pass, None)
    }));

    // spacing-laws
    records.push(timed("spacing-laws", |m| {
        let mut pass = true;
        let mut w_consts = Vec::new();
        let mut end_first = Vec::new();
        for r in &runs {
            let hsize = r.eps * r.eps.ln().abs();
            let gaps = r.solved.gap_values();
            let interior_min = gaps[1..gaps.len() - 1]
                .iter()
                .fold(f64::INFINITY, |a, g| a.min(g / hsize));
            let wlaw = gaps
                .iter()
                .map(|g| profile.eval_w(g / r.eps) * r.eps.ln().abs() / r.eps)
                .fold(0.0f64, f64::max);
            let e0 = gaps[0] / hsize;
            let e1 = gaps[gaps.len() - 1] / hsize;
            m.push((
                format!("eps={:.3e}:interior_min_ratio", r.eps),
                interior_min,
            ));
            m.push((format!("eps={:.3e}:w_law_c", r.eps), wlaw));
            m.push((format!("eps={:.3e}:end_gap_first", r.eps), e0));
            m.push((format!("eps={:.3e}:end_gap_last", r.eps), e1));
            pass &= interior_min >= 0.8;
            w_consts.push(wlaw);
            end_first.push((e0, e1));
        }
        // the [1.5, 2.5] end-gap band is pinned at the smallest sweep eps;
        // a single run far from the limit only gets a sanity band
        let (e0, e1) = *end_first.last().unwrap();
        if multi {
            pass &= (1.5..=2.5).contains(&e0) && (1.5..=2.5).contains(&e1);
            let stab = fit_stability(&w_consts);
            m.push(("w_law_stability".into(), stab));
            pass &= stab <= cfg.stability_factor;
            let dev0: Vec<f64> = end_first.iter().map(|p| (p.0 - 2.0).abs()).collect();
            let dev1: Vec<f64> = end_first.iter().map(|p| (p.1 - 2.0).abs()).collect();
            let trend = monotone_decreasing(&dev0, 0.05) && monotone_decreasing(&dev1, 0.05);
            m.push(("end_gap_trend_ok".into(), f64::from(u8::from(trend))));
            pass &= trend;
        } else {
            pass &= (1.2..=2.6).contains(&e0) && (1.2..=2.6).contains(&e1);
        }
        (pass, None)
    }));

    // admissibility
    let lambda_result: Result<Vec<_>, _> = runs
        .iter()
        .map(|r| lambda_k_report(&r.solved, kernel, cfg.c_admis))
        .collect();
    let lambdas = lambda_result?;
    records.push(timed("admissibility", |m| {
        // The constants in the admissibility bounds are existential: the
        // first-correction constant is checked against the configured
        // c_admis, while the second-difference constant is fitted and must
        // hold steady across the sweep (its true scale is nu2 * max|H'|,
        // which depends on the geometry, not on eps).
        let mut pass = true;
        let mut ratios = Vec::new();
        for (r, l) in runs.iter().zip(&lambdas) {
            m.push((
                format!("eps={:.3e}:y1_over_bound", r.eps),
                l.y1_abs / l.y1_bound,
            ));
            m.push((
                format!("eps={:.3e}:second_diff_max_ratio", r.eps),
                l.second_diff_max_ratio,
            ));
            pass &= l.y1_ok;
            ratios.push(l.second_diff_max_ratio);
        }
        if multi {
            let stab = fit_stability(&ratios);
            m.push(("second_diff_stability".into(), stab));
            pass &= stab <= cfg.stability_factor;
        }
        (pass, None)
    }));

    // reversal-symmetry
    records.push(timed("reversal-symmetry", |m| {
        if !symmetric {
            return (true, Some("curvature model is not mirror-symmetric".into()));
        }
        let c = 2.0 * model.s_begin() + model.b();
        let mut pass = true;
        for r in &runs {
            let s = r.solved.positions();
            let dev = (0..s.len())
                .map(|i| (s[i] + s[s.len() - 1 - i] - c).abs())
                .fold(0.0f64, f64::max);
            m.push((format!("eps={:.3e}:reversal_dev", r.eps), dev));
            pass &= dev <= 1e-8;

            // pairwise cancellation of the sum equation on the mirror
            // symmetrization of the initial positions
            let k = r.initial.k;
            let s0 = &r.initial.s0;
            let sym: Vec<f64> = (0..k).map(|i| 0.5 * (s0[i] + c - s0[k - 1 - i])).collect();
            let mut acc = KahanSum::new();
            for &si in &sym {
                acc.add(model.eval_hp(si));
            }
            let rk = (r.eps * r.eps * acc.value()).abs();
            let bound = 10.0 * r.sol.shoot_tol;
            m.push((format!("eps={:.3e}:sym_rk", r.eps), rk));
            m.push((format!("eps={:.3e}:sym_rk_bound", r.eps), bound));
            pass &= rk <= bound;
        }
        (pass, None)
    }));

    // midpoint-rule
    records.push(timed("midpoint-rule", |m| {
        let mut errs = Vec::new();
        let mut hs = Vec::new();
        for r in &runs {
            let err = midpoint_vs_integral(|t| model.eval_hp(r.sol.eval_x(t)), r.sol.h, r.sol.k);
            m.push((format!("eps={:.3e}:max_err", r.eps), err));
            errs.push(err);
            hs.push(r.sol.h);
        }
        if !multi {
            return (true, Some("exponent fit needs >= 2 eps values".into()));
        }
        let alpha = log_log_slope(&hs, &errs);
        m.push(("fitted_exponent".into(), alpha));
        ((1.8..=2.2).contains(&alpha), None)
    }));

    // evenness-cancellation
    let spec = kernel.quad;
    let mut even_metrics: Vec<(String, f64)> = Vec::new();
    let mut even_pass = true;
    {
        let (val, mass) = evenness_integral(profile, 8.0, 8.0, &spec)?;
        even_metrics.push(("equal_shift_cancellation".into(), val.abs()));
        even_metrics.push(("equal_shift_mass".into(), mass));
        even_pass &= val.abs() <= 1e-12 * mass;

        let mut ratios = Vec::new();
        for &q in &[8.0, 10.0, 12.0] {
            let (v, _) = evenness_integral(profile, q, q + 0.01, &spec)?;
            let ratio = v.abs() / (0.01 * profile.eval_w(q));
            even_metrics.push((format!("q={q}:bound_ratio"), ratio));
            ratios.push(ratio);
        }
        let stab = fit_stability(&ratios);
        even_metrics.push(("bound_ratio_stability".into(), stab));
        even_pass &= stab <= cfg.stability_factor;

        let (v1, _) = evenness_integral(profile, 10.0, 10.01, &spec)?;
        let (v2, _) = evenness_integral(profile, 10.0, 10.02, &spec)?;
        let doubling = (v2 / v1).abs();
        even_metrics.push(("doubling_factor".into(), doubling));
        even_pass &= (1.5..=2.5).contains(&doubling);
    }
    records.push(CheckRecord {
        name: "evenness-cancellation",
        anchor: manifest_anchor("evenness-cancellation"),
        passed: even_pass,
        skipped: None,
        metrics: even_metrics,
        runtime_s: 0.0,
    });

    debug_assert_eq!(records.len(), CHECK_MANIFEST.len());
    for (rec, (name, _)) in records.iter().zip(CHECK_MANIFEST) {
        debug_assert_eq!(rec.name, *name);
    }

    Ok((
        VerificationReport {
            eps_list: eps_list.to_vec(),
            records,
            run_failures,
        },
        runs,
    ))
}

fn geometry_rejection(h1: &H1Report) -> VerifierError {
    VerifierError::GeometryRejected {
        c0: h1.c0,
        at: h1.c0_location,
        mismatch: h1.endpoint_mismatch,
    }
}

fn manifest_anchor(name: &str) -> &'static str {
    CHECK_MANIFEST
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, a)| *a)
        .expect("check name in manifest")
}

fn timed(
    name: &'static str,
    body: impl FnOnce(&mut Vec<(String, f64)>) -> (bool, Option<String>),
) -> CheckRecord {
    let start = Instant::now();
    let mut metrics = Vec::new();
    let (passed, skipped) = body(&mut metrics);
    CheckRecord {
        name,
        anchor: manifest_anchor(name),
        passed,
        skipped,
        metrics,
        runtime_s: start.elapsed().as_secs_f64(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_names_are_unique() {
        let mut names: Vec<&str> = CHECK_MANIFEST.iter().map(|(n, _)| *n).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), CHECK_MANIFEST.len());
    }

    #[test]
    fn midpoint_rule_is_exact_for_constants_and_linears() {
        // midpoint quadrature integrates constants and linears exactly
        let err_const = midpoint_vs_integral(|_| 3.7, 0.05, 40);
        assert!(err_const < 1e-12, "constant: {err_const}");
        let err_lin = midpoint_vs_integral(|t| 2.0 - 5.0 * t, 0.05, 40);
        assert!(err_lin < 1e-12, "linear: {err_lin}");
    }

    #[test]
    fn midpoint_rule_error_scales_quadratically() {
        let g = |t: f64| (1.3 * t).sin() + 0.5 * t * t;
        let e1 = midpoint_vs_integral(g, 0.02, 101);
        let e2 = midpoint_vs_integral(g, 0.01, 201);
        let order = (e1 / e2).log2();
        assert!((1.7..=2.3).contains(&order), "observed order {order}");
    }

    #[test]
    fn stability_and_trend_helpers() {
        assert!(fit_stability(&[1.0, 2.0, 1.5]) == 2.0);
        assert!(monotone_decreasing(&[3.0, 2.0, 1.999], 0.01));
        assert!(!monotone_decreasing(&[1.0, 2.0], 0.01));
        let slope = log_log_slope(&[0.1, 0.05, 0.025], &[0.01, 0.0025, 0.000625]);
        assert!((slope - 2.0).abs() < 1e-12);
    }
}
