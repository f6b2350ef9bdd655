//! Shared fixtures for the integration-test binaries: the default ground
//! state and kernel, cached as structured text under the target tmpdir so
//! repeated `cargo test` invocations and sibling test binaries do not redo
//! the quadratures.

#![allow(dead_code)]

use spikechain::ground_state::{solve_ground_state, GroundStateProfile};
use spikechain::interaction::{build_kernel, InteractionKernel};
use std::fs;
use std::path::PathBuf;

fn cache_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    fs::create_dir_all(&dir).expect("create test cache dir");
    dir
}

pub fn test_profile() -> GroundStateProfile {
    let path = cache_dir().join("profile_p3_r30.txt");
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(p) = GroundStateProfile::import(&text) {
            return p;
        }
    }
    let p = solve_ground_state(3.0, 1e-10, 30.0).expect("ground state");
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, p.export()).expect("write profile cache");
    fs::rename(&tmp, &path).expect("publish profile cache");
    p
}

pub fn test_kernel(profile: &GroundStateProfile, s_max: f64) -> InteractionKernel {
    let path = cache_dir().join(format!("kernel_p3_r30_smax{s_max:.0}.txt"));
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(k) = InteractionKernel::import(&text) {
            if (k.profile_w0 - profile.w0).abs() < 1e-12 {
                return k;
            }
        }
    }
    let k = build_kernel(profile, 2.0, s_max).expect("kernel build");
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, k.export()).expect("write kernel cache");
    fs::rename(&tmp, &path).expect("publish kernel cache");
    k
}

/// Collocation oracle: solves `w'' + w'/r - w + w^p = 0`, `w'(0) = 0`,
/// `w'(R) = -(1 + 1/(2R)) w(R)` on a uniform mesh by damped Newton.
pub fn collocation_w(p: f64, r_end: f64, n: usize, init: impl Fn(f64) -> f64) -> Vec<f64> {
    let d = r_end / n as f64;
    let mut w: Vec<f64> = (0..=n).map(|i| init(i as f64 * d)).collect();

    let residual = |w: &[f64]| -> Vec<f64> {
        let mut f = vec![0.0; n + 1];
        f[0] = 4.0 * (w[1] - w[0]) / (d * d) - w[0] + w[0].powf(p);
        for i in 1..n {
            let r = i as f64 * d;
            f[i] = (w[i + 1] - 2.0 * w[i] + w[i - 1]) / (d * d)
                + (w[i + 1] - w[i - 1]) / (2.0 * d * r)
                - w[i]
                + w[i].abs().powf(p - 1.0) * w[i];
        }
        f[n] = (w[n] - w[n - 1]) / d + (1.0 + 0.5 / r_end) * w[n];
        f
    };
    let norm = |f: &[f64]| f.iter().map(|v| v.abs()).fold(0.0f64, f64::max);

    // the residual evaluation floors out at ~eps_machine/d^2, so convergence
    // targets and the stall check must sit above that
    let floor = 50.0 * f64::EPSILON / (d * d);
    let mut fval = residual(&w);
    for _ in 0..60 {
        if norm(&fval) < floor {
            break;
        }
        // tridiagonal Jacobian
        let mut sub = vec![0.0; n + 1];
        let mut diag = vec![0.0; n + 1];
        let mut sup = vec![0.0; n + 1];
        diag[0] = -4.0 / (d * d) - 1.0 + p * w[0].abs().powf(p - 1.0);
        sup[0] = 4.0 / (d * d);
        for i in 1..n {
            let r = i as f64 * d;
            sub[i] = 1.0 / (d * d) - 1.0 / (2.0 * d * r);
            diag[i] = -2.0 / (d * d) - 1.0 + p * w[i].abs().powf(p - 1.0);
            sup[i] = 1.0 / (d * d) + 1.0 / (2.0 * d * r);
        }
        sub[n] = -1.0 / d;
        diag[n] = 1.0 / d + 1.0 + 0.5 / r_end;

        // Thomas solve for the Newton step
        let mut c = vec![0.0; n + 1];
        let mut rhs: Vec<f64> = fval.iter().map(|v| -v).collect();
        c[0] = sup[0] / diag[0];
        rhs[0] /= diag[0];
        for i in 1..=n {
            let den = diag[i] - sub[i] * c[i - 1];
            c[i] = sup[i] / den;
            rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / den;
        }
        for i in (0..n).rev() {
            let next = rhs[i + 1];
            rhs[i] -= c[i] * next;
        }

        let base = norm(&fval);
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial: Vec<f64> = w.iter().zip(&rhs).map(|(a, b)| a + lambda * b).collect();
            let ft = residual(&trial);
            if norm(&ft) < base {
                w = trial;
                fval = ft;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break; // at the evaluation noise floor
        }
    }
    assert!(
        norm(&fval) < 4.0 * floor,
        "oracle Newton stalled at {} (floor {floor:.3e})",
        norm(&fval)
    );
    w
}

/// Coarse-to-fine oracle: a crude Gaussian seed on a coarse mesh, then the
/// ten-times-finer mesh seeded by interpolation.
pub fn oracle_peak(p: f64, r_end: f64, fine_n: usize) -> f64 {
    let coarse_n = 500;
    let coarse = collocation_w(p, r_end, coarse_n, |r| 2.2 * (-0.5 * r * r).exp());
    let dc = r_end / coarse_n as f64;
    let fine = collocation_w(p, r_end, fine_n, |r| {
        let j = ((r / dc) as usize).min(coarse_n - 1);
        let t = (r - j as f64 * dc) / dc;
        (coarse[j] * (1.0 - t) + coarse[j + 1] * t).max(1e-14)
    });
    fine[0]
}
