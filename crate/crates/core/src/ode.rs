//! Embedded Dormand-Prince 5(4) integrator with the classic fourth-order
//! dense output, sign-agnostic in the integration direction.
//!
//! Dimension is a const generic; both uses in this crate are planar systems.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("exceeded {max_steps} steps at t = {t}")]
    MaxStepsExceeded { t: f64, max_steps: usize },
}

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Step-size cap. The dense interpolant is one order below the
    /// integrator, so callers that evaluate between steps may need steps
    /// smaller than error control alone would pick.
    pub max_step: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 2_000_000,
            max_step: f64::INFINITY,
        }
    }
}

/// One accepted step's dense-output coefficients.
#[derive(Clone, Debug)]
struct DenseStep<const N: usize> {
    t: f64,
    h: f64,
    cont: [[f64; N]; 5],
}

/// Dense solution: evaluable anywhere between the initial time and the point
/// where integration ended (the requested endpoint or an early stop).
#[derive(Clone, Debug)]
pub struct DenseSolution<const N: usize> {
    steps: Vec<DenseStep<N>>,
    t_end: f64,
    y_end: [f64; N],
    /// True when a stop condition halted the integration before the endpoint.
    pub stopped: bool,
    pub n_accepted: usize,
    pub n_rejected: usize,
}

impl<const N: usize> DenseSolution<N> {
    pub fn t_start(&self) -> f64 {
        self.steps.first().map_or(self.t_end, |s| s.t)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn y_end(&self) -> [f64; N] {
        self.y_end
    }

    /// Evaluates the dense interpolant. `t` is clamped to the covered span.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let step = self.find_step(t);
        let theta = ((t - step.t) / step.h).clamp(0.0, 1.0);
        let th1 = 1.0 - theta;
        let mut out = [0.0; N];
        for i in 0..N {
            let c = &step.cont;
            out[i] =
                c[0][i] + theta * (c[1][i] + th1 * (c[2][i] + theta * (c[3][i] + th1 * c[4][i])));
        }
        out
    }

    fn find_step(&self, t: f64) -> &DenseStep<N> {
        debug_assert!(!self.steps.is_empty());
        let forward = self.steps[0].h > 0.0;
        let pos = self.steps.partition_point(|s| {
            if forward {
                s.t + s.h <= t
            } else {
                s.t + s.h >= t
            }
        });
        &self.steps[pos.min(self.steps.len() - 1)]
    }
}

// Dormand-Prince coefficients.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Integrates `dy/dt = f(t, y)` from `t0` to `t_end` (either direction).
///
/// `stop` is checked after every accepted step; returning `true` ends the
/// integration there. The state where the stop fired is `y_end()`.
pub fn integrate<const N: usize>(
    mut f: impl FnMut(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    t_end: f64,
    y0: [f64; N],
    opts: &OdeOptions,
    mut stop: impl FnMut(f64, &[f64; N]) -> bool,
) -> Result<DenseSolution<N>, OdeError> {
    assert!(t_end != t0, "empty integration span");
    let dir = (t_end - t0).signum();
    let span = (t_end - t0).abs();

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);

    // initial step from the state/derivative scale, conservatively small
    let ynorm = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let fnorm = k1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut h = dir
        * (0.01 * (ynorm + opts.atol) / (fnorm + 1e-300))
            .min(span / 10.0)
            .min(opts.max_step)
            .max(span * 1e-10);

    let mut steps = Vec::new();
    let mut n_accepted = 0usize;
    let mut n_rejected = 0usize;
    let mut stopped = false;

    loop {
        if (t - t_end) * dir >= 0.0 {
            break;
        }
        if n_accepted + n_rejected > opts.max_steps {
            return Err(OdeError::MaxStepsExceeded {
                t,
                max_steps: opts.max_steps,
            });
        }
        if h.abs() < 1e-14 * span.max(t.abs()) {
            return Err(OdeError::StepSizeUnderflow { t });
        }
        // land exactly on the endpoint
        if (t + 1.01 * h - t_end) * dir > 0.0 {
            h = t_end - t;
        }

        let mut k = [[0.0; N]; 7];
        k[0] = k1;
        let stage = |y: &[f64; N], k: &[[f64; N]; 7], coeffs: &[f64], h: f64| {
            let mut out = *y;
            for (j, &a) in coeffs.iter().enumerate() {
                for i in 0..N {
                    out[i] += h * a * k[j][i];
                }
            }
            out
        };
        k[1] = f(t + C[1] * h, &stage(&y, &k, &A2, h));
        k[2] = f(t + C[2] * h, &stage(&y, &k, &A3, h));
        k[3] = f(t + C[3] * h, &stage(&y, &k, &A4, h));
        k[4] = f(t + C[4] * h, &stage(&y, &k, &A5, h));
        k[5] = f(t + C[5] * h, &stage(&y, &k, &A6, h));
        let y_new = stage(&y, &k, &B, h);
        k[6] = f(t + h, &y_new);

        // embedded error estimate
        let mut err_sq = 0.0;
        for i in 0..N {
            let e: f64 = (0..7).map(|j| E[j] * k[j][i]).sum::<f64>() * h;
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err_sq += (e / sc) * (e / sc);
        }
        let err = (err_sq / N as f64).sqrt();

        if err <= 1.0 {
            // dense coefficients for this step
            let mut cont = [[0.0; N]; 5];
            for i in 0..N {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                cont[0][i] = y[i];
                cont[1][i] = ydiff;
                cont[2][i] = bspl;
                cont[3][i] = ydiff - h * k[6][i] - bspl;
                cont[4][i] = h * (0..7).map(|j| D[j] * k[j][i]).sum::<f64>();
            }
            steps.push(DenseStep { t, h, cont });
            t += h;
            y = y_new;
            k1 = k[6]; // FSAL
            n_accepted += 1;
            if stop(t, &y) {
                stopped = true;
                break;
            }
        } else {
            n_rejected += 1;
        }

        let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
        h = (h * fac).clamp(-opts.max_step, opts.max_step);
    }

    Ok(DenseSolution {
        steps,
        t_end: t,
        y_end: y,
        stopped,
        n_accepted,
        n_rejected,
    })
}
