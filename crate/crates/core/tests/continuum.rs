//! Backward shooting for the continuum system against a fixed-step oracle,
//! plus the sign conventions and consistency invariants.

mod common;

use common::{test_kernel, test_profile};
use spikechain::continuum::{default_shoot_tol, integrate_backward, shoot, ContinuumError};
use spikechain::geometry::{CurvatureModel, PolyModel};
use spikechain::interaction::{build_kernel, InteractionKernel};
use std::sync::OnceLock;

fn model() -> CurvatureModel {
    CurvatureModel::Poly(PolyModel::symmetric(1.0, 28.0, 4.0))
}

fn fixture() -> &'static (InteractionKernel, spikechain::ContinuumSolution) {
    static F: OnceLock<(InteractionKernel, spikechain::ContinuumSolution)> = OnceLock::new();
    F.get_or_init(|| {
        let prof = test_profile();
        let kernel = test_kernel(&prof, 40.0);
        let sol = shoot(&model(), &kernel, 1e-2, default_shoot_tol(1e-2)).expect("shoot");
        (kernel, sol)
    })
}

#[test]
fn terminal_compatibility_is_exact() {
    let (_, sol) = fixture();
    let m = model();
    let expect = sol.eps * sol.eps.ln() * m.eval_hp(sol.x_b);
    assert_eq!(sol.rho_b, expect, "rho_b is pinned by construction");
    assert!(sol.rho_b < 0.0);
}

#[test]
fn shot_residual_is_within_tolerance() {
    let (_, sol) = fixture();
    assert!(sol.shoot_residual <= sol.shoot_tol);
    assert!(sol.clamped, "the eps^3 clamp is always active near t = 0");
}

#[test]
fn x_is_strictly_increasing_and_rho_nonpositive() {
    let (_, sol) = fixture();
    let samples = sol.sample(2000);
    for w in samples.windows(2) {
        assert!(w[1].1 > w[0].1, "x must increase along t");
        assert!(
            w[0].2 <= 1e3 * sol.eps.powi(3),
            "rho must stay below the guard"
        );
    }
}

#[test]
fn rho_is_monotone_where_hp_has_one_sign() {
    let (_, sol) = fixture();
    let m = model();
    let mid = 2.0; // vertex of the symmetric model
    let samples = sol.sample(2000);
    for w in samples.windows(2) {
        let (t0, x0, r0) = w[0];
        let (_, _, r1) = w[1];
        if x0 > mid + 0.1 && m.eval_hp(x0) > 0.0 {
            assert!(r1 >= r0, "rho must increase where H' > 0 (t = {t0})");
        }
        if x0 < mid - 0.1 {
            assert!(r1 <= r0, "rho must decrease where H' < 0 (t = {t0})");
        }
    }
}

#[test]
fn dense_trajectory_matches_fine_fixed_step_oracle() {
    let (kernel, sol) = fixture();
    let m = model();
    let eps = sol.eps;
    let ln_eps = eps.ln();
    let floor = eps.powi(3);
    // independent fixed-step RK4 on the same backward system
    let rhs = |y: &[f64; 2]| -> [f64; 2] {
        let arg = eps * y[1].min(-floor) / ln_eps;
        let g = kernel.invert_psi1(arg).expect("in range");
        [(1.0 / ln_eps) * g, -m.eval_hp(y[0])]
    };
    let n = 400_000usize;
    let dt = sol.b_eps / n as f64;
    let mut y = [sol.x_b, sol.rho_b];
    let mut worst = 0.0f64;
    for i in 0..n {
        let k1 = rhs(&y);
        let y2 = [y[0] + 0.5 * dt * k1[0], y[1] + 0.5 * dt * k1[1]];
        let k2 = rhs(&y2);
        let y3 = [y[0] + 0.5 * dt * k2[0], y[1] + 0.5 * dt * k2[1]];
        let k3 = rhs(&y3);
        let y4 = [y[0] + dt * k3[0], y[1] + dt * k3[1]];
        let k4 = rhs(&y4);
        for j in 0..2 {
            y[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        // compare at a handful of interleaved times
        if i % 20_000 == 0 {
            let t = sol.b_eps - (i + 1) as f64 * dt;
            let dx = (sol.eval_x(t) - y[0]).abs();
            let drho = (sol.eval_rho(t) - y[1]).abs();
            worst = worst.max(dx).max(drho);
        }
    }
    println!("fixed-step oracle sup deviation: {worst:.3e}");
    assert!(worst <= 1e-8, "oracle deviation {worst:.3e}");
    // at the very left end the clamp layer (|rho| < eps^3, width ~1e-8 in t)
    // is below any fixed step, so the endpoint only matches at layer scale
    assert!(
        (y[0] - sol.x0).abs() <= 3e-6,
        "endpoint dx {:.3e}",
        y[0] - sol.x0
    );
    assert!(y[1].abs() <= 1e-6);
}

#[test]
fn forward_reintegration_reproduces_terminal_state() {
    let (kernel, sol) = fixture();
    let (dx, drho) = sol.forward_consistency(&model(), kernel).expect("forward");
    println!("forward consistency: dx={dx:.3e} drho={drho:.3e}");
    // ten integrator tolerances, measured against the trajectory scales
    // (|x| ~ b, |rho| ~ curvature drop ~ 1e2)
    assert!(dx <= 1e-9, "dx = {dx:.3e}");
    assert!(drho <= 1e-8, "drho = {drho:.3e}");
}

#[test]
fn end_asymmetry_has_boot_scale() {
    // the two boundary conditions are not mirror images, so the solution is
    // not reversal-symmetric; the offset x(0) + (b_eps - x_b) is an
    // O(h ln ln)-scale quantity, not a shot-tolerance one
    let (_, sol) = fixture();
    let mismatch = (sol.x0 + sol.b_eps - sol.x_b).abs();
    println!("end asymmetry: {mismatch:.4e} (h = {:.4e})", sol.h);
    assert!(mismatch > sol.shoot_tol, "asymmetry is a real effect");
    assert!(
        mismatch <= 0.2 * 4.0,
        "but stays a small fraction of the segment"
    );
}

#[test]
fn sweep_shrinks_terminal_slope_mismatch() {
    let prof = test_profile();
    let kernel = test_kernel(&prof, 40.0);
    let m = model();
    let mut prev = f64::INFINITY;
    for eps in [1e-2, 2e-3] {
        let sol = shoot(&m, &kernel, eps, default_shoot_tol(eps)).unwrap();
        let gap = (sol.rho_b / sol.h + m.eval_hp(sol.b_eps)).abs();
        assert!(gap < prev, "terminal slope mismatch must shrink");
        prev = gap;
    }
}

#[test]
fn bad_terminal_position_faults() {
    let (kernel, _) = fixture();
    // x_b left of the curvature minimum: rho_b > 0 from the start
    let err = integrate_backward(&model(), kernel, 1e-2, 0.5).unwrap_err();
    match err {
        ContinuumError::SignConventionViolation { .. }
        | ContinuumError::TrajectoryEscape { .. } => {}
        other => panic!("expected a sign/escape fault, got {other}"),
    }
}

#[test]
fn undersized_kernel_is_rejected_before_integrating() {
    let prof = test_profile();
    let small = build_kernel(&prof, 2.0, 8.0).expect("small kernel");
    let err = shoot(&model(), &small, 1e-2, default_shoot_tol(1e-2)).unwrap_err();
    assert!(
        matches!(err, ContinuumError::KernelRangeExceeded { .. }),
        "{err}"
    );
}

#[test]
fn eps_domain_is_validated() {
    let (kernel, _) = fixture();
    for eps in [0.5, 1.0, 0.0, -0.1] {
        let err = shoot(&model(), kernel, eps, 1e-10).unwrap_err();
        assert!(matches!(err, ContinuumError::EpsOutOfRange { .. }));
    }
}
