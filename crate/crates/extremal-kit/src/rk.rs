//! Adaptive Runge-Kutta integration: the Dormand-Prince 5(4) embedded pair
//! with proportional step control and first-same-as-last reuse.
//!
//! The stepper is generic over the state dimension and owns its right-hand
//! side, which returns `Result` so that model-specific guards (chart
//! boundaries, undefined feedback) abort a step cleanly. Event times are
//! located by bisection on the step fraction, re-taking a single fifth-order
//! step from the last accepted state, which keeps event location independent
//! of the step controller.

use crate::error::{Error, Result};

/// Step-control parameters.
#[derive(Debug, Clone)]
pub struct StepperOptions {
    /// Relative error weight per component.
    pub rel_tol: f64,
    /// Absolute error weight per component.
    pub abs_tol: f64,
    /// Hard upper bound on the step size.
    pub max_step: f64,
    /// If set, take steps of exactly this size (clipped at the target time)
    /// and ignore the error estimate. Runs are then bitwise reproducible.
    pub fixed_step: Option<f64>,
    /// Budget of accepted plus rejected steps per `advance_to` call.
    pub max_steps: usize,
}

impl Default for StepperOptions {
    fn default() -> Self {
        StepperOptions {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_step: f64::INFINITY,
            fixed_step: None,
            max_steps: 10_000_000,
        }
    }
}

// Dormand-Prince coefficients. The fifth-order solution uses stages 1..=6;
// stage 7 is the derivative at the accepted point (reused as stage 1 of the
// next step) and enters only the error estimate.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
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
const B5: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
// Difference between the fifth- and fourth-order weights, stage 2 omitted.
const D: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn axpy<const N: usize>(y: &[f64; N], h: f64, coeffs: &[f64], ks: &[[f64; N]]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in coeffs.iter().zip(ks) {
        if *c != 0.0 {
            for i in 0..N {
                out[i] += h * c * k[i];
            }
        }
    }
    out
}

/// One fifth-order solution from `(t, y)` with step `h`, given `k1 = f(t, y)`.
/// Returns the new state and stages 2..=6 (needed for the error estimate).
#[allow(clippy::type_complexity)]
fn fifth_order_step<F, const N: usize>(
    f: &mut F,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
) -> Result<([f64; N], [[f64; N]; 5])>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let k2 = f(t + C[1] * h, &axpy(y, h, &A2, &[*k1]))?;
    let k3 = f(t + C[2] * h, &axpy(y, h, &A3, &[*k1, k2]))?;
    let k4 = f(t + C[3] * h, &axpy(y, h, &A4, &[*k1, k2, k3]))?;
    let k5 = f(t + C[4] * h, &axpy(y, h, &A5, &[*k1, k2, k3, k4]))?;
    let k6 = f(t + C[5] * h, &axpy(y, h, &A6, &[*k1, k2, k3, k4, k5]))?;
    let y5 = axpy(y, h, &B5, &[*k1, k2, k3, k4, k5, k6]);
    Ok((y5, [k2, k3, k4, k5, k6]))
}

/// Adaptive stepper holding the current state and the first-same-as-last
/// derivative cache. `advance_to` moves forward in the independent variable;
/// integrate backwards by negating the right-hand side.
pub struct Stepper<F, const N: usize> {
    f: F,
    /// Current value of the independent variable.
    pub t: f64,
    /// Current state.
    pub y: [f64; N],
    k1: [f64; N],
    /// Proposed size for the next trial step.
    h: f64,
    t_prev: f64,
    y_prev: [f64; N],
    k1_prev: [f64; N],
    opts: StepperOptions,
    accepted: usize,
}

impl<F, const N: usize> Stepper<F, N>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    pub fn new(mut f: F, t0: f64, y0: [f64; N], opts: StepperOptions) -> Result<Self> {
        let k1 = f(t0, &y0)?;
        Ok(Stepper {
            f,
            t: t0,
            y: y0,
            k1,
            h: f64::NAN,
            t_prev: t0,
            y_prev: y0,
            k1_prev: k1,
            opts,
            accepted: 0,
        })
    }

    pub fn options(&self) -> &StepperOptions {
        &self.opts
    }

    /// Accepted steps so far.
    pub fn accepted_steps(&self) -> usize {
        self.accepted
    }

    /// State at the start of the last accepted step.
    pub fn prev(&self) -> (f64, [f64; N]) {
        (self.t_prev, self.y_prev)
    }

    /// Restart from a new state (after an event or an external modification
    /// of the state vector). Keeps the current step-size proposal.
    pub fn reset(&mut self, t: f64, y: [f64; N]) -> Result<()> {
        self.k1 = (self.f)(t, &y)?;
        self.t = t;
        self.y = y;
        self.t_prev = t;
        self.y_prev = y;
        self.k1_prev = self.k1;
        Ok(())
    }

    fn initial_step(&self, span: f64) -> f64 {
        // Crude but safe: the controller corrects within a few steps and a
        // first rejection costs one extra derivative sweep.
        (span * 1e-3).min(self.opts.max_step)
    }

    /// Advance by one accepted step, clipped so `t` never passes `t_end`.
    /// When the clip lands on the target, `self.t` is set to exactly `t_end`.
    pub fn step_toward(&mut self, t_end: f64) -> Result<()> {
        assert!(
            t_end >= self.t,
            "step_toward goes forward only; negate the right-hand side instead"
        );
        if t_end == self.t {
            return Ok(());
        }
        if let Some(h) = self.opts.fixed_step {
            assert!(h > 0.0, "fixed_step must be positive");
            let (h_trial, clipped) = if self.t + h >= t_end {
                (t_end - self.t, true)
            } else {
                (h, false)
            };
            let (y5, _stages) = fifth_order_step(&mut self.f, self.t, &self.y, &self.k1, h_trial)?;
            let t_new = if clipped { t_end } else { self.t + h_trial };
            let k7 = (self.f)(t_new, &y5)?;
            self.commit(t_new, y5, k7);
            return Ok(());
        }
        if !self.h.is_finite() {
            self.h = self.initial_step(t_end - self.t);
        }
        let mut attempts = 0usize;
        // Remembered failure from the right-hand side during a trial step.
        // Trials may leave the model's domain transiently, so a failure
        // rejects the step; it is surfaced only if the step size underflows.
        let mut rhs_failure: Option<Error> = None;
        loop {
            attempts += 1;
            if attempts > self.opts.max_steps {
                return Err(Error::StepFailure {
                    t: self.t,
                    reason: format!("step budget {} exhausted", self.opts.max_steps),
                });
            }
            let h_floor = 16.0 * f64::EPSILON * self.t.abs().max(1e-3);
            if self.h < h_floor {
                return Err(rhs_failure.unwrap_or(Error::StepFailure {
                    t: self.t,
                    reason: format!("step size underflow: h = {:e}", self.h),
                }));
            }
            let (h_trial, clipped) = if self.t + self.h >= t_end {
                (t_end - self.t, true)
            } else {
                (self.h, false)
            };
            let t_new = if clipped { t_end } else { self.t + h_trial };
            let trial = fifth_order_step(&mut self.f, self.t, &self.y, &self.k1, h_trial)
                .and_then(|(y5, stages)| {
                    let k7 = (self.f)(t_new, &y5)?;
                    Ok((y5, stages, k7))
                });
            let (y5, stages, k7) = match trial {
                Ok(v) => v,
                Err(e) => {
                    rhs_failure = Some(e);
                    self.h = h_trial * 0.2;
                    continue;
                }
            };
            let ks = [
                self.k1, stages[0], stages[1], stages[2], stages[3], stages[4], k7,
            ];
            let mut err_sq = 0.0;
            for i in 0..N {
                let mut e = 0.0;
                for (d, k) in D.iter().zip(&ks) {
                    e += d * k[i];
                }
                e *= h_trial;
                let scale =
                    self.opts.abs_tol + self.opts.rel_tol * self.y[i].abs().max(y5[i].abs());
                err_sq += (e / scale) * (e / scale);
            }
            let err = (err_sq / N as f64).sqrt();
            if err.is_finite() && err <= 1.0 {
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                self.h = (h_trial * factor).min(self.opts.max_step);
                self.commit(t_new, y5, k7);
                return Ok(());
            }
            let factor = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.2, 1.0)
            } else {
                0.2
            };
            self.h = h_trial * factor;
        }
    }

    fn commit(&mut self, t_new: f64, y_new: [f64; N], k_new: [f64; N]) {
        self.t_prev = self.t;
        self.y_prev = self.y;
        self.k1_prev = self.k1;
        self.t = t_new;
        self.y = y_new;
        self.k1 = k_new;
        self.accepted += 1;
    }

    /// Locate a sign change of `g` inside the last accepted step by
    /// bisection on the step fraction. Requires `g` to have strictly
    /// opposite signs at the step's endpoints (a value of exactly zero at
    /// an endpoint returns that endpoint). Does not move the stepper;
    /// callers typically `reset` to the returned state.
    pub fn bisect_last<G>(&mut self, g: &mut G) -> Result<(f64, [f64; N])>
    where
        G: FnMut(f64, &[f64; N]) -> f64,
    {
        let g0 = g(self.t_prev, &self.y_prev);
        let g1 = g(self.t, &self.y);
        if g0 == 0.0 {
            return Ok((self.t_prev, self.y_prev));
        }
        if g1 == 0.0 {
            return Ok((self.t, self.y));
        }
        if g0.signum() == g1.signum() {
            return Err(Error::IntegrationFailure(format!(
                "no sign change across the last step: g({}) = {:e}, g({}) = {:e}",
                self.t_prev, g0, self.t, g1
            )));
        }
        let h_full = self.t - self.t_prev;
        let (mut s_lo, mut s_hi) = (0.0f64, 1.0f64);
        let mut best = (self.t, self.y);
        for _ in 0..128 {
            let s = 0.5 * (s_lo + s_hi);
            let h = s * h_full;
            let (y_mid, _) =
                fifth_order_step(&mut self.f, self.t_prev, &self.y_prev, &self.k1_prev, h)?;
            let t_mid = self.t_prev + h;
            let g_mid = g(t_mid, &y_mid);
            best = (t_mid, y_mid);
            if g_mid == 0.0 {
                break;
            }
            if g_mid.signum() == g0.signum() {
                s_lo = s;
            } else {
                s_hi = s;
            }
            if (s_hi - s_lo) * h_full.abs() <= 8.0 * f64::EPSILON * self.t.abs().max(1e-12) {
                break;
            }
        }
        Ok(best)
    }
}

/// Drive a stepper from `t0` to `t_end`, invoking `observer` after every
/// accepted step. Convenience wrapper for event-free integrations.
pub fn integrate_to<F, O, const N: usize>(
    f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: StepperOptions,
    mut observer: O,
) -> Result<(f64, [f64; N])>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    O: FnMut(f64, &[f64; N]),
{
    let max_steps = opts.max_steps;
    let mut stepper = Stepper::new(f, t0, y0, opts)?;
    observer(stepper.t, &stepper.y);
    while stepper.t < t_end {
        stepper.step_toward(t_end)?;
        observer(stepper.t, &stepper.y);
        if stepper.accepted_steps() > max_steps {
            return Err(Error::StepFailure {
                t: stepper.t,
                reason: format!("accepted-step budget {} exhausted", max_steps),
            });
        }
    }
    Ok((stepper.t, stepper.y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_accuracy() {
        let (t, y) = integrate_to(
            |_t, y: &[f64; 1]| Ok([-y[0]]),
            0.0,
            [1.0],
            5.0,
            StepperOptions::default(),
            |_, _| {},
        )
        .unwrap();
        assert_eq!(t, 5.0);
        assert!((y[0] - (-5.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn oscillator_returns_after_full_period() {
        use std::f64::consts::PI;
        let (_, y) = integrate_to(
            |_t, y: &[f64; 2]| Ok([y[1], -y[0]]),
            0.0,
            [1.0, 0.0],
            2.0 * PI,
            StepperOptions::default(),
            |_, _| {},
        )
        .unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9);
        assert!(y[1].abs() < 1e-9);
    }

    #[test]
    fn fixed_step_runs_are_bitwise_identical() {
        let run = || {
            let opts = StepperOptions {
                fixed_step: Some(1e-3),
                ..StepperOptions::default()
            };
            integrate_to(
                |t, y: &[f64; 2]| Ok([y[1], -y[0] + 0.1 * t.sin()]),
                0.0,
                [1.0, 0.0],
                3.0,
                opts,
                |_, _| {},
            )
            .unwrap()
        };
        let (t_a, y_a) = run();
        let (t_b, y_b) = run();
        assert_eq!(t_a.to_bits(), t_b.to_bits());
        assert_eq!(y_a[0].to_bits(), y_b[0].to_bits());
        assert_eq!(y_a[1].to_bits(), y_b[1].to_bits());
    }

    #[test]
    fn max_step_is_respected() {
        let mut count = 0usize;
        let opts = StepperOptions {
            max_step: 0.1,
            ..StepperOptions::default()
        };
        integrate_to(
            |_t, _y: &[f64; 1]| Ok([1.0]),
            0.0,
            [0.0],
            1.0,
            opts,
            |_, _| count += 1,
        )
        .unwrap();
        // Initial state plus at least ten steps of size at most 0.1.
        assert!(count >= 11, "observed {count} samples");
    }

    #[test]
    fn event_bisection_hits_analytic_crossing() {
        let mut stepper = Stepper::new(
            |_t, y: &[f64; 1]| Ok([-y[0]]),
            0.0,
            [1.0],
            StepperOptions::default(),
        )
        .unwrap();
        let threshold = 0.3;
        let t_star = loop {
            stepper.step_toward(10.0).unwrap();
            if stepper.y[0] < threshold {
                let (t_ev, y_ev) = stepper.bisect_last(&mut |_t, y| y[0] - threshold).unwrap();
                assert!((y_ev[0] - threshold).abs() < 1e-12);
                break t_ev;
            }
        };
        assert!((t_star - (1.0 / threshold).ln()).abs() < 1e-10);
    }

    #[test]
    fn singular_rhs_fails_cleanly() {
        // Derivative blows up at t = 1; the controller must not loop forever.
        let res = integrate_to(
            |t, _y: &[f64; 1]| Ok([1.0 / (1.0 - t)]),
            0.0,
            [0.0],
            2.0,
            StepperOptions::default(),
            |_, _| {},
        );
        assert!(matches!(res, Err(Error::StepFailure { .. })));
    }

    #[test]
    fn rhs_errors_propagate() {
        let res = integrate_to(
            |t, _y: &[f64; 1]| {
                if t > 0.5 {
                    Err(Error::IntegrationFailure("guard".into()))
                } else {
                    Ok([1.0])
                }
            },
            0.0,
            [0.0],
            1.0,
            StepperOptions::default(),
            |_, _| {},
        );
        assert!(matches!(res, Err(Error::IntegrationFailure(_))));
    }
}
