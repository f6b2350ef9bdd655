//! Interaction kernel against refined-quadrature oracles: oddness, decay,
//! the curvature constant, and the inverse map.

mod common;

use common::{test_kernel, test_profile};
use spikechain::interaction::{
    compute_nu2, compute_nu2_with, compute_psi, compute_psi_at, evenness_integral,
    InteractionError, QuadratureSpec,
};
use spikechain::quad::PanelRule;

#[test]
fn psi_vanishes_at_zero_offset() {
    let prof = test_profile();
    let at_zero = compute_psi(&prof, 0.0).unwrap();
    let at_three = compute_psi(&prof, 3.0).unwrap();
    assert!(at_zero.abs() <= 1e-8 * at_three, "psi(0) = {at_zero:.3e}");
}

#[test]
fn psi_is_odd() {
    let prof = test_profile();
    for &s in &[1.0, 3.0, 7.0] {
        let plus = compute_psi(&prof, s).unwrap();
        let minus = compute_psi(&prof, -s).unwrap();
        assert!(
            (plus + minus).abs() <= 1e-8 * plus.abs(),
            "s={s}: {plus:.6e} vs {minus:.6e}"
        );
    }
}

#[test]
fn psi_matches_quadruple_resolution_oracle() {
    let prof = test_profile();
    let spec = QuadratureSpec::default();
    let got = compute_psi(&prof, 10.0).unwrap();
    assert!(got > 0.0);
    let (oracle, _) = compute_psi_at(&prof, 10.0, &spec, 4 * spec.base_nodes);
    assert!(
        ((got - oracle) / oracle).abs() <= 1e-6,
        "psi(10): {got:.12e} vs oracle {oracle:.12e}"
    );
}

#[test]
fn nu2_is_positive_and_refinement_stable() {
    let prof = test_profile();
    let spec = QuadratureSpec::default();
    let got = compute_nu2(&prof).unwrap();
    assert!(got > 0.0);
    // 4x-resolution oracle
    let oracle = {
        let half = spec.tail_cut / 2.0 + 4.0;
        let rule = PanelRule::new(-half, half, spec.panel_len, 4 * spec.base_nodes);
        rule.integrate(|t: f64| {
            let r = t.abs();
            if r < 1e-14 {
                return 0.0;
            }
            let q = prof.eval_w_prime(r) / r;
            q * q * t.powi(4) / 3.0
        })
    };
    assert!(((got - oracle) / oracle).abs() <= 1e-8, "{got} vs {oracle}");
    // doubling the domain beyond the truncation changes nothing
    let wide = compute_nu2_with(
        &prof,
        &QuadratureSpec {
            tail_cut: 2.0 * spec.tail_cut,
            ..spec
        },
    )
    .unwrap();
    assert!(((wide - got) / got).abs() <= 1e-10, "{wide} vs {got}");
}

#[test]
fn nu2_integrand_vanishes_at_origin() {
    let prof = test_profile();
    // (w'(t)/t)^2 t^4 -> w''(0)^2 t^4 near zero
    for &t in &[1e-4, 1e-3, 1e-2] {
        let q = prof.eval_w_prime(t) / t;
        let v: f64 = q * q * t.powi(4) / 3.0;
        assert!(v.abs() < 30.0 * t.powi(4), "t={t}: {v}");
    }
}

#[test]
fn kernel_table_interpolates_direct_quadrature() {
    let prof = test_profile();
    let kernel = test_kernel(&prof, 30.0);
    // off-grid probes at cell midpoints
    for &s in &[2.55, 9.35, 17.85, 26.15] {
        let direct = compute_psi(&prof, s).unwrap();
        let interp = kernel.psi(s).unwrap();
        assert!(
            ((interp - direct) / direct).abs() <= 1e-6,
            "s={s}: interp {interp:.9e} vs direct {direct:.9e}"
        );
    }
}

#[test]
fn kernel_is_positive_decreasing_with_positive_constants() {
    let prof = test_profile();
    let kernel = test_kernel(&prof, 30.0);
    let rep = kernel.validate();
    assert!(rep.positive);
    assert!(rep.strictly_decreasing);
    assert!(rep.nu2_positive);
    assert!(rep.asym_constant_positive);
    assert!(
        rep.asym_window_dev <= 0.05,
        "dev {:.3e}",
        rep.asym_window_dev
    );
    assert!(
        (-1.02..=-0.98).contains(&rep.ln_slope_tail),
        "slope {}",
        rep.ln_slope_tail
    );
}

#[test]
fn inverse_identity_at_tabulated_point() {
    let prof = test_profile();
    let kernel = test_kernel(&prof, 30.0);
    let b = kernel.psi1(10.0).unwrap();
    let s = kernel.invert_psi1(b).unwrap();
    assert!((s - 10.0).abs() <= 1e-10, "got {s}");
}

#[test]
fn inverse_is_consistent_and_monotone_over_log_spaced_arguments() {
    let prof = test_profile();
    let kernel = test_kernel(&prof, 30.0);
    let (lo, hi) = kernel.psi1_range();
    let mut prev_s = f64::NEG_INFINITY;
    for i in 0..20 {
        // log-spaced strictly inside the served range
        let t = (i as f64 + 0.5) / 20.0;
        let b = (lo.ln() * (1.0 - t) + hi.ln() * t).exp();
        let s = kernel.invert_psi1(b).unwrap();
        let back = kernel.psi1(s).unwrap();
        assert!(((back - b) / b).abs() <= 1e-10, "b={b:.3e}");
        if i > 0 {
            // b sweeps upward, so G must come back strictly downward
            assert!(s < prev_s, "G must decrease in b");
        }
        prev_s = s;
    }
}

#[test]
fn inverse_matches_log_asymptotics_at_small_argument() {
    let prof = test_profile();
    let kernel = test_kernel(&prof, 30.0);
    let b = 1e-6;
    let s = kernel.invert_psi1(b).unwrap();
    // s + ln b + ln(s)/2 - ln C is the asymptotic-model residue
    let dev = s + b.ln() + 0.5 * s.ln() - kernel.asym_constant.ln();
    assert!(dev.abs() <= 0.02, "asymptotic deviation {dev:.4}");
    // leading order: G(b) ~ -ln b
    assert!((s / -b.ln() - 1.0).abs() < 0.2);
}

#[test]
fn inverse_rejects_nonpositive_and_out_of_range() {
    let prof = test_profile();
    let kernel = test_kernel(&prof, 30.0);
    assert!(matches!(
        kernel.invert_psi1(-1.0),
        Err(InteractionError::NonpositiveArgument { .. })
    ));
    let (lo, hi) = kernel.psi1_range();
    assert!(matches!(
        kernel.invert_psi1(hi * 1.01),
        Err(InteractionError::OutOfTabulatedRange { .. })
    ));
    assert!(matches!(
        kernel.invert_psi1(lo * 0.99),
        Err(InteractionError::OutOfTabulatedRange { .. })
    ));
}

#[test]
fn tail_log_slope_of_psi_is_near_minus_one() {
    let prof = test_profile();
    let kernel = test_kernel(&prof, 30.0);
    // finite-difference slope of ln psi over the last 4 units of the table
    let n = kernel.s_grid.len();
    let hi = kernel.s_grid[n - 1];
    let j = kernel.s_grid.iter().position(|&s| s >= hi - 4.0).unwrap();
    let slope = (kernel.psi_values[n - 1].ln() - kernel.psi_values[j].ln())
        / (kernel.s_grid[n - 1] - kernel.s_grid[j]);
    assert!((-1.02..=-0.98).contains(&slope), "slope {slope}");
}

#[test]
fn evenness_integral_cancels_at_equal_shifts() {
    let prof = test_profile();
    let (v, mass) = evenness_integral(&prof, 8.0, 8.0, &QuadratureSpec::default()).unwrap();
    assert!(
        v.abs() <= 1e-12 * mass,
        "residue {v:.3e} vs mass {mass:.3e}"
    );
}

#[test]
fn evenness_integral_scales_linearly_in_shift_difference() {
    let prof = test_profile();
    let spec = QuadratureSpec::default();
    let (v1, _) = evenness_integral(&prof, 10.0, 10.01, &spec).unwrap();
    let (v2, _) = evenness_integral(&prof, 10.0, 10.02, &spec).unwrap();
    let factor = (v2 / v1).abs();
    assert!((1.5..=2.5).contains(&factor), "doubling factor {factor}");
}
