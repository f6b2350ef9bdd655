//! Pipeline orchestration: table caching, per-run artifact layout, and the
//! four command verbs. Machine-readable outputs are byte-deterministic;
//! anything timing-related goes to the human report or stderr only.

use crate::config::RunConfig;
use anyhow::{anyhow, bail, Context, Result};
use spikechain::continuum::shoot;
use spikechain::discrete::{
    export_configuration, import_configuration, initial_configuration, lambda_k_report, max_abs,
    residual, solve_corrections,
};
use spikechain::geometry::{validate_h1, CurvatureModel, H1Tolerances};
use spikechain::ground_state::{solve_ground_state, GroundStateProfile};
use spikechain::interaction::{build_kernel_with, InteractionKernel, KernelConfig};
use spikechain::verifier::{model_is_symmetric, run_sweep, EpsRun, SweepConfig};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

fn profile_cache_path(cfg: &RunConfig) -> PathBuf {
    cfg.cache_dir.join(format!(
        "profile_p{:.6e}_r{:.6e}_tol{:.6e}.txt",
        cfg.p, cfg.r_max, cfg.gs_tol
    ))
}

fn kernel_cache_path(cfg: &RunConfig) -> PathBuf {
    cfg.cache_dir.join(format!(
        "kernel_p{:.6e}_r{:.6e}_s{:.3e}-{:.3e}_ds{:.3e}.txt",
        cfg.p, cfg.r_max, cfg.kernel_s_min, cfg.kernel_s_max, cfg.kernel_ds
    ))
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Loads the ground state from cache when the header matches, else solves
/// and caches. Returns the profile and whether the cache served it.
pub fn ensure_profile(cfg: &RunConfig) -> Result<(GroundStateProfile, bool)> {
    let path = profile_cache_path(cfg);
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(p) = GroundStateProfile::import(&text) {
            if p.p == cfg.p && p.r_max == cfg.r_max && p.tol == cfg.gs_tol {
                eprintln!("profile cache hit: {}", path.display());
                return Ok((p, true));
            }
            eprintln!("profile cache stale (parameters changed), recomputing");
        }
    }
    let p = solve_ground_state(cfg.p, cfg.gs_tol, cfg.r_max).map_err(|e| anyhow!("{e}"))?;
    write_atomic(&path, &p.export())?;
    Ok((p, false))
}

/// Same contract for the interaction kernel.
pub fn ensure_kernel(
    cfg: &RunConfig,
    profile: &GroundStateProfile,
) -> Result<(InteractionKernel, bool)> {
    let path = kernel_cache_path(cfg);
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(k) = InteractionKernel::import(&text) {
            if k.p == cfg.p
                && k.profile_r_max == profile.r_max
                && k.profile_w0 == profile.w0
                && k.s_min() == cfg.kernel_s_min
                && k.s_max() == cfg.kernel_s_max
            {
                eprintln!("kernel cache hit: {}", path.display());
                return Ok((k, true));
            }
            eprintln!("kernel cache stale (parameters changed), recomputing");
        }
    }
    let k = build_kernel_with(
        profile,
        &KernelConfig {
            s_min: cfg.kernel_s_min,
            s_max: cfg.kernel_s_max,
            ds: cfg.kernel_ds,
            ..Default::default()
        },
    )
    .map_err(|e| anyhow!("{e}"))?;
    write_atomic(&path, &k.export())?;
    Ok((k, false))
}

fn geometry_gate(model: &CurvatureModel) -> Result<()> {
    let rep = validate_h1(model, H1Tolerances::default());
    if !rep.pass {
        bail!(
            "curvature model failed certification: min H'' = {:.6e} at s = {:.6}, endpoint mismatch = {:.3e} (tol {:.1e})",
            rep.c0,
            rep.c0_location,
            rep.endpoint_mismatch,
            rep.endpoint_tolerance
        );
    }
    Ok(())
}

fn eps_dir(base: &Path, eps: f64) -> PathBuf {
    base.join(format!("eps_{eps:.3e}"))
}

fn write_run_artifacts(dir: &Path, run: &EpsRun) -> Result<()> {
    write_atomic(&dir.join("trajectory.txt"), &run.sol.export(1201))?;
    write_atomic(
        &dir.join("configuration.txt"),
        &export_configuration(&run.solved, &run.residual_solved),
    )?;
    Ok(())
}

fn sweep_config(cfg: &RunConfig) -> SweepConfig {
    SweepConfig {
        shoot_tol_factor: cfg.shoot_tol_factor,
        solve_tol_factor: cfg.solve_tol_factor,
        c_admis: cfg.c_admis,
        ..Default::default()
    }
}

/// Exit-status view of a verification report under the configured check
/// selection: unknown names are an error, unselected checks still run and
/// are reported, only selected ones gate.
fn selected_pass(cfg: &RunConfig, report: &spikechain::VerificationReport) -> Result<bool> {
    if cfg.checks.is_empty() {
        return Ok(report.all_passed());
    }
    let mut ok = true;
    for name in &cfg.checks {
        let rec = report
            .record(name)
            .ok_or_else(|| anyhow!("unknown check name {name:?}"))?;
        ok &= rec.passed || rec.skipped.is_some();
    }
    Ok(ok)
}

/// `kernel`: build (or reuse) the cached ground state and kernel tables.
pub fn cmd_kernel(cfg: &RunConfig) -> Result<bool> {
    cfg.validate()?;
    let (profile, _) = ensure_profile(cfg)?;
    let (kernel, hit) = ensure_kernel(cfg, &profile)?;
    let rep = kernel.validate();
    println!(
        "kernel ready ({}): {} samples on [{}, {}], nu2 = {:.12e}, asym constant = {:.6e}, tail ln-slope = {:.4}",
        if hit { "cache" } else { "fresh" },
        kernel.s_grid.len(),
        kernel.s_min(),
        kernel.s_max(),
        kernel.nu2,
        kernel.asym_constant,
        rep.ln_slope_tail,
    );
    Ok(rep.all_ok())
}

/// `solve`: one eps end to end, artifacts plus the per-eps checks.
pub fn cmd_solve(cfg: &RunConfig) -> Result<bool> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    geometry_gate(&model)?;
    let (profile, _) = ensure_profile(cfg)?;
    let (kernel, _) = ensure_kernel(cfg, &profile)?;
    let eps = cfg.eps_list[0];
    let (report, runs) = run_sweep(&profile, &kernel, &model, &[eps], &sweep_config(cfg))
        .map_err(|e| anyhow!("{e}"))?;
    let base = cfg.out_dir.join("solve");
    for run in &runs {
        write_run_artifacts(&eps_dir(&base, run.eps), run)?;
    }
    write_atomic(&base.join("report.txt"), &report.render_human())?;
    write_atomic(&base.join("report_machine.tsv"), &report.render_machine())?;
    let run = &runs[0];
    println!(
        "eps = {eps:.3e}: k = {}, solver = {}, max residual = {:.3e}, |y|_inf = {:.3e}",
        run.solved.k,
        run.solved.solver.as_str(),
        max_abs(&run.residual_solved),
        run.solved.y_inf_norm(),
    );
    println!("artifacts in {}", base.display());
    selected_pass(cfg, &report)
}

/// `sweep`: the full eps list plus the verification suite.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<bool> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    geometry_gate(&model)?;
    let (profile, _) = ensure_profile(cfg)?;
    let (kernel, _) = ensure_kernel(cfg, &profile)?;
    let (report, runs) = run_sweep(&profile, &kernel, &model, &cfg.eps_list, &sweep_config(cfg))
        .map_err(|e| anyhow!("{e}"))?;
    let base = cfg.out_dir.join("sweep");
    for run in &runs {
        write_run_artifacts(&eps_dir(&base, run.eps), run)?;
    }
    write_atomic(&base.join("report.txt"), &report.render_human())?;
    write_atomic(&base.join("report_machine.tsv"), &report.render_machine())?;
    print!("{}", report.render_human());
    println!("artifacts in {}", base.display());
    selected_pass(cfg, &report)
}

/// `check`: revalidate previously written artifacts without re-solving.
/// Residuals must reproduce bitwise from the stored chain state; spacing
/// and admissibility are re-derived from the loaded configurations.
pub fn cmd_check(cfg: &RunConfig) -> Result<bool> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    geometry_gate(&model)?;
    let profile_path = profile_cache_path(cfg);
    let kernel_path = kernel_cache_path(cfg);
    let profile = GroundStateProfile::import(
        &fs::read_to_string(&profile_path)
            .with_context(|| format!("no cached profile at {}", profile_path.display()))?,
    )
    .map_err(|e| anyhow!("{e}"))?;
    let kernel = InteractionKernel::import(
        &fs::read_to_string(&kernel_path)
            .with_context(|| format!("no cached kernel at {}", kernel_path.display()))?,
    )
    .map_err(|e| anyhow!("{e}"))?;
    if !profile.validate().all_ok(1e-8) {
        bail!("cached profile fails its invariants");
    }
    if !kernel.validate().all_ok() {
        bail!("cached kernel fails its invariants");
    }

    let base = cfg.out_dir.join("sweep");
    let mut lines = String::new();
    lines.push_str("artifact check\n");
    let mut all_ok = true;
    let symmetric = model_is_symmetric(&model);
    for &eps in &cfg.eps_list {
        let dir = eps_dir(&base, eps);
        let path = dir.join("configuration.txt");
        let text = fs::read_to_string(&path)
            .with_context(|| format!("no configuration at {}", path.display()))?;
        let (config, stored) = import_configuration(&text).map_err(|e| anyhow!("{e}"))?;
        let recomputed = residual(&config, &kernel, &model).map_err(|e| anyhow!("{e}"))?;
        let bitwise = recomputed
            .iter()
            .zip(&stored)
            .all(|(a, b)| a.to_bits() == b.to_bits());
        let solve_tol = cfg.solve_tol_factor * eps * eps;
        let within = max_abs(&recomputed) <= solve_tol;
        let lam = lambda_k_report(&config, &kernel, cfg.c_admis).map_err(|e| anyhow!("{e}"))?;
        let mut sym_ok = true;
        if symmetric {
            let s = config.positions();
            let c = 2.0 * model.s_begin() + model.b();
            let dev = (0..s.len())
                .map(|i| (s[i] + s[s.len() - 1 - i] - c).abs())
                .fold(0.0f64, f64::max);
            sym_ok = dev <= 1e-8;
        }
        let ok = bitwise && within && lam.y1_ok && sym_ok;
        all_ok &= ok;
        let _ = writeln!(
            lines,
            "eps={eps:.3e}: residuals_bitwise={bitwise} within_tol={within} y1_ok={} interior_gap_min={:.3} end_gaps=({:.3},{:.3}) symmetric_ok={sym_ok} -> {}",
            lam.y1_ok,
            lam.interior_gap_min_ratio,
            lam.end_gap_ratios.0,
            lam.end_gap_ratios.1,
            if ok { "ok" } else { "FAIL" }
        );
    }
    let _ = writeln!(lines, "overall: {}", if all_ok { "PASS" } else { "FAIL" });
    write_atomic(&base.join("check_report.txt"), &lines)?;
    print!("{lines}");
    Ok(all_ok)
}

/// Direct pipeline access for one eps; used by tests and kept close to what
/// `solve` does per run.
pub fn run_single(
    cfg: &RunConfig,
    eps: f64,
) -> Result<(
    spikechain::ContinuumSolution,
    spikechain::SpikeConfiguration,
    Vec<f64>,
)> {
    let model = cfg.build_model()?;
    geometry_gate(&model)?;
    let (profile, _) = ensure_profile(cfg)?;
    let (kernel, _) = ensure_kernel(cfg, &profile)?;
    let h = -eps * eps.ln();
    let sol = shoot(&model, &kernel, eps, cfg.shoot_tol_factor * h).map_err(|e| anyhow!("{e}"))?;
    let initial = initial_configuration(&sol, &kernel, &model).map_err(|e| anyhow!("{e}"))?;
    let solved = solve_corrections(&initial, &kernel, &model, cfg.solve_tol_factor * eps * eps)
        .map_err(|e| anyhow!("{e}"))?;
    let res = residual(&solved, &kernel, &model).map_err(|e| anyhow!("{e}"))?;
    Ok((sol, solved, res))
}
