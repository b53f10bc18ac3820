//! Extremal flow in the cylindrical blow-up chart `(rho, theta, h3, x)`,
//! where `h1 = rho cos(theta)`, `h2 = rho sin(theta)` and the control is
//! `u = (cos(theta), sin(theta))`.
//!
//! Away from the locus the flow is integrated in physical time. Inside a
//! collar `rho <= eps_switch` the chart equations are integrated in a
//! rescaled variable `s` with `dt/ds = rho`, in which the locus `rho = 0`
//! carries hyperbolic equilibria at the angles `theta_minus` (incoming) and
//! `theta_plus` (outgoing) of the one-switching case. A pass that enters the
//! collar close to the incoming angle is treated as a switching: the crossing
//! time is extrapolated from the incoming radial speed, the state is restarted
//! on the outgoing separatrix at `rho = eps_restart`, and the outgoing control
//! is measured when the trajectory leaves the collar again, so the recorded
//! jump is an observation, not an echo of the prediction. Passes that enter
//! away from the incoming angle sweep past the equilibria with continuously
//! rotating control and produce no event.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{
    classify_state, singular_control, Case, ClassificationReport, ControlValue, LIN_INDEP_TOL,
};
use crate::error::{Error, Result};
use crate::rk::{Stepper, StepperOptions};
use crate::system::{hamiltonian_lift, CanonicalState, ControlSystem};
use crate::vec3::{angle_dist, dot, norm, wrap_angle, Vec3};

/// Rescaled-variable budget for a single collar passage; generous, since a
/// passage costs `O(log(1/eps_restart))` in the rescaled variable.
const COLLAR_S_BUDGET: f64 = 1e6;

/// State in the blow-up chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupState {
    /// Radial coordinate `sqrt(h1^2 + h2^2) >= 0`.
    pub rho: f64,
    /// Fiber angle; not wrapped, so long runs may wind.
    pub theta: f64,
    /// Lift along `f3 = f1 x f2`.
    pub h3: f64,
    /// Base point.
    pub x: Vec3,
}

impl BlowupState {
    pub fn new(rho: f64, theta: f64, h3: f64, x: Vec3) -> Self {
        BlowupState { rho, theta, h3, x }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.rho, self.theta, self.h3, self.x[0], self.x[1], self.x[2],
        ]
    }

    pub fn from_array(y: &[f64; 6]) -> Self {
        BlowupState {
            rho: y[0],
            theta: y[1],
            h3: y[2],
            x: [y[3], y[4], y[5]],
        }
    }

    /// Reconstruct the covector this chart state represents.
    pub fn covector(&self, sys: &ControlSystem) -> Result<Vec3> {
        let h = [
            self.rho * self.theta.cos(),
            self.rho * self.theta.sin(),
            self.h3,
        ];
        sys.covector_from_lifts(&self.x, &h, LIN_INDEP_TOL)
    }

    /// Chart coordinates of a canonical state; fails where `f1, f2` are
    /// linearly dependent.
    pub fn from_canonical(sys: &ControlSystem, state: &CanonicalState) -> Result<BlowupState> {
        let f3 = sys.f3().eval(&state.x);
        if norm(&f3) <= LIN_INDEP_TOL {
            return Err(Error::DegeneratePoint(format!(
                "|f1 x f2| = {:e} at x = {:?}",
                norm(&f3),
                state.x
            )));
        }
        let h1 = hamiltonian_lift(state, sys.f1());
        let h2 = hamiltonian_lift(state, sys.f2());
        let h3 = hamiltonian_lift(state, sys.f3());
        Ok(BlowupState {
            rho: (h1 * h1 + h2 * h2).sqrt(),
            theta: (h2 + 0.0).atan2(h1),
            h3,
            x: state.x,
        })
    }

    /// Image under the blow-down `(h1, h2, h3, x)`; two chart states that
    /// describe the same covector map to the same point.
    pub fn embedded(&self) -> [f64; 6] {
        [
            self.rho * self.theta.cos(),
            self.rho * self.theta.sin(),
            self.h3,
            self.x[0],
            self.x[1],
            self.x[2],
        ]
    }
}

/// Euclidean distance after blowing down; continuous across the locus.
pub fn embedded_distance(a: &BlowupState, b: &BlowupState) -> f64 {
    let ea = a.embedded();
    let eb = b.embedded();
    ea.iter()
        .zip(&eb)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// Distance in chart coordinates, with the angular difference taken on the
/// circle. This metric separates the two sides of a switching by `O(1)`
/// regardless of how small `rho` is.
pub fn chart_distance(a: &BlowupState, b: &BlowupState) -> f64 {
    let dth = angle_dist(a.theta, b.theta);
    let dx = [b.x[0] - a.x[0], b.x[1] - a.x[1], b.x[2] - a.x[2]];
    ((a.rho - b.rho) * (a.rho - b.rho)
        + dth * dth
        + (a.h3 - b.h3) * (a.h3 - b.h3)
        + dot(&dx, &dx))
    .sqrt()
}

/// One recorded control switching.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SwitchEvent {
    /// Crossing time, extrapolated from the collar entry.
    pub t: f64,
    /// Base point at the crossing.
    pub x: Vec3,
    pub h3: f64,
    /// Radius at which the collar captured the trajectory.
    pub rho_entry: f64,
    /// Fiber angle measured at capture, wrapped.
    pub theta_in: f64,
    /// Fiber angle measured when the restarted trajectory left the collar.
    pub theta_out: f64,
    /// Control at capture.
    pub u_in: ControlValue,
    /// Control at collar exit.
    pub u_out: ControlValue,
    /// Equilibrium angles predicted by the pointwise classification at entry.
    pub theta_in_predicted: f64,
    pub theta_out_predicted: f64,
    /// Bound on the time spent between capture and the ideal crossing.
    pub crossing_dt_bound: f64,
    /// False if the run ended before the outgoing leg left the collar, in
    /// which case the `*_out` fields still hold the predicted values.
    pub out_measured: bool,
}

/// Why an integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminationReason {
    /// Ran to the requested final time.
    ReachedTmax,
    /// Entered the collar in the boundary case `r^2 = h12^2`, where the
    /// one-switching picture does not apply and the trajectory may join a
    /// locus arc; the caller decides how to continue.
    LimitCaseHold,
    /// The flow approached a point where `f1, f2` degenerate or the
    /// first-order lifts all vanish.
    DegeneratePoint,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: BlowupState,
    pub u: ControlValue,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtremalTrajectory {
    pub samples: Vec<Sample>,
    pub events: Vec<SwitchEvent>,
    pub termination: TerminationReason,
    pub final_time: f64,
    pub final_state: BlowupState,
}

impl ExtremalTrajectory {
    pub fn count_switchings(&self) -> usize {
        self.events.len()
    }
}

/// Tolerances and collar geometry for [`integrate_extremal`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Fixed step size for bitwise-reproducible runs.
    pub fixed_step: Option<f64>,
    /// Collar radius at which the integrator hands over to the rescaled
    /// equations.
    pub eps_switch: f64,
    /// Restart radius on the outgoing separatrix after a capture.
    pub eps_restart: f64,
    /// Angular capture half-width around the incoming equilibrium.
    pub angle_tol: f64,
    /// Residual band for locus-arc monitors.
    pub drift_tol: f64,
    pub max_steps: usize,
    /// Record a sample at every accepted step. Turn off for large batches;
    /// events and the final state are always kept.
    pub record_samples: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_step: f64::INFINITY,
            fixed_step: None,
            eps_switch: 1e-6,
            eps_restart: 1e-10,
            angle_tol: 1e-6,
            drift_tol: 1e-6,
            max_steps: 10_000_000,
            record_samples: true,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("eps_switch", self.eps_switch),
            ("eps_restart", self.eps_restart),
            ("angle_tol", self.angle_tol),
            ("drift_tol", self.drift_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive")));
            }
        }
        if let Some(h) = self.fixed_step {
            if !(h > 0.0) {
                return Err(Error::InvalidInput("fixed_step must be positive".into()));
            }
        }
        if self.eps_restart >= self.eps_switch {
            return Err(Error::InvalidInput(format!(
                "eps_restart = {:e} must be smaller than eps_switch = {:e}",
                self.eps_restart, self.eps_switch
            )));
        }
        Ok(())
    }

    fn stepper_options(&self) -> StepperOptions {
        StepperOptions {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            fixed_step: self.fixed_step,
            max_steps: self.max_steps,
        }
    }
}

/// Lifts entering the chart equations, evaluated at a chart state.
struct ChartData {
    h01: f64,
    h02: f64,
    h12: f64,
    h03: f64,
    h13: f64,
    h23: f64,
}

fn chart_data(sys: &ControlSystem, rho: f64, theta: f64, h3: f64, x: &Vec3) -> Result<ChartData> {
    let h = [rho * theta.cos(), rho * theta.sin(), h3];
    let xi = sys.covector_from_lifts(x, &h, LIN_INDEP_TOL)?;
    let state = CanonicalState::new(xi, *x);
    Ok(ChartData {
        h01: hamiltonian_lift(&state, sys.f01()),
        h02: hamiltonian_lift(&state, sys.f02()),
        h12: hamiltonian_lift(&state, sys.f12()),
        h03: hamiltonian_lift(&state, sys.f03()),
        h13: hamiltonian_lift(&state, sys.f13()),
        h23: hamiltonian_lift(&state, sys.f23()),
    })
}

/// Switching function `g = h12 + cos(theta) h02 - sin(theta) h01` at a chart
/// point; its zeros on the locus are the equilibrium angles.
fn chart_g(sys: &ControlSystem, rho: f64, theta: f64, h3: f64, x: &Vec3) -> Result<f64> {
    let d = chart_data(sys, rho, theta, h3, x)?;
    Ok(d.h12 + theta.cos() * d.h02 - theta.sin() * d.h01)
}

fn bang_xdot(sys: &ControlSystem, theta: f64, x: &Vec3) -> Vec3 {
    let f0 = sys.f0().eval(x);
    let f1 = sys.f1().eval(x);
    let f2 = sys.f2().eval(x);
    let (c, s) = (theta.cos(), theta.sin());
    [
        f0[0] + c * f1[0] + s * f2[0],
        f0[1] + c * f1[1] + s * f2[1],
        f0[2] + c * f1[2] + s * f2[2],
    ]
}

/// Chart equations in physical time; valid for `rho > 0`.
fn time_rhs(sys: &ControlSystem, y: &[f64; 6]) -> Result<[f64; 6]> {
    let (rho, theta, h3) = (y[0], y[1], y[2]);
    if rho <= 0.0 {
        return Err(Error::ChartSingular { rho });
    }
    let x = [y[3], y[4], y[5]];
    let d = chart_data(sys, rho, theta, h3, &x)?;
    let (c, s) = (theta.cos(), theta.sin());
    let h0t = c * d.h01 + s * d.h02;
    let g = d.h12 + c * d.h02 - s * d.h01;
    let xdot = bang_xdot(sys, theta, &x);
    Ok([
        h0t,
        g / rho,
        d.h03 + c * d.h13 + s * d.h23,
        xdot[0],
        xdot[1],
        xdot[2],
    ])
}

/// Chart equations in the rescaled variable `s` with `dt/ds = rho`; smooth
/// through `rho = 0`. The seventh component carries physical time.
fn rescaled_rhs(sys: &ControlSystem, y: &[f64; 7]) -> Result<[f64; 7]> {
    let (rho, theta, h3) = (y[0], y[1], y[2]);
    let x = [y[3], y[4], y[5]];
    let d = chart_data(sys, rho, theta, h3, &x)?;
    let (c, s) = (theta.cos(), theta.sin());
    let h0t = c * d.h01 + s * d.h02;
    let g = d.h12 + c * d.h02 - s * d.h01;
    let xdot = bang_xdot(sys, theta, &x);
    Ok([
        rho * h0t,
        g,
        rho * (d.h03 + c * d.h13 + s * d.h23),
        rho * xdot[0],
        rho * xdot[1],
        rho * xdot[2],
        rho,
    ])
}

/// Classify the locus case at a chart state using its reconstructed
/// covector, i.e. the classification the flow itself sees at a collar entry.
pub fn classify_chart_state(
    sys: &ControlSystem,
    state: &BlowupState,
) -> Result<ClassificationReport> {
    let xi = state.covector(sys)?;
    classify_state(sys, &CanonicalState::new(xi, state.x))
}

fn is_degeneracy(err: &Error) -> bool {
    matches!(
        err,
        Error::DegeneratePoint(_) | Error::ChartSingular { .. }
    )
}

struct RunAccumulator {
    samples: Vec<Sample>,
    events: Vec<SwitchEvent>,
    record: bool,
}

impl RunAccumulator {
    fn push(&mut self, t: f64, y: &BlowupState) {
        if self.record {
            self.samples.push(Sample {
                t,
                state: *y,
                u: ControlValue::from_angle(y.theta),
            });
        }
    }
}

/// Integrate the extremal through `(rho0, theta0, h30, x0)` from `t = 0`
/// to `tmax`, recording switchings. Fails immediately if the initial point
/// is outside the chart's domain; degeneracies reached later terminate the
/// run gracefully with [`TerminationReason::DegeneratePoint`].
pub fn integrate_extremal(
    sys: &ControlSystem,
    init: &BlowupState,
    tmax: f64,
    config: &IntegratorConfig,
) -> Result<ExtremalTrajectory> {
    config.validate()?;
    if !(tmax >= 0.0) {
        return Err(Error::InvalidInput("tmax must be nonnegative".into()));
    }
    if init.rho < 0.0 {
        return Err(Error::InvalidInput(format!(
            "initial rho = {} must be nonnegative",
            init.rho
        )));
    }
    // Domain check at the start; an error here is the caller's problem.
    chart_data(sys, init.rho, init.theta, init.h3, &init.x)?;

    let mut acc = RunAccumulator {
        samples: Vec::new(),
        events: Vec::new(),
        record: config.record_samples,
    };
    let mut t = 0.0;
    let mut state = *init;
    acc.push(t, &state);
    // Index of a capture whose outgoing angle has not been measured yet.
    let mut pending_out: Option<usize> = None;

    let finish = |acc: RunAccumulator, reason, t, state| {
        Ok(ExtremalTrajectory {
            samples: acc.samples,
            events: acc.events,
            termination: reason,
            final_time: t,
            final_state: state,
        })
    };

    loop {
        if t >= tmax {
            return finish(acc, TerminationReason::ReachedTmax, t, state);
        }

        if state.rho > config.eps_switch {
            // Physical-time leg outside the collar.
            let mut stepper = match Stepper::new(
                |_t, y: &[f64; 6]| time_rhs(sys, y),
                t,
                state.to_array(),
                config.stepper_options(),
            ) {
                Ok(s) => s,
                Err(e) if is_degeneracy(&e) => {
                    return finish(acc, TerminationReason::DegeneratePoint, t, state)
                }
                Err(e) => return Err(e),
            };
            let mut entered = false;
            while stepper.t < tmax {
                match stepper.step_toward(tmax) {
                    Ok(()) => {}
                    Err(e) if is_degeneracy(&e) => {
                        let (t_ok, y_ok) = (stepper.t, stepper.y);
                        return finish(
                            acc,
                            TerminationReason::DegeneratePoint,
                            t_ok,
                            BlowupState::from_array(&y_ok),
                        );
                    }
                    Err(e) => return Err(e),
                }
                if stepper.y[0] <= config.eps_switch {
                    let (_, y_prev) = stepper.prev();
                    let (t_e, y_e) = if y_prev[0] > config.eps_switch {
                        stepper.bisect_last(&mut |_t, y| y[0] - config.eps_switch)?
                    } else {
                        (stepper.t, stepper.y)
                    };
                    t = t_e;
                    state = BlowupState::from_array(&y_e);
                    acc.push(t, &state);
                    entered = true;
                    break;
                }
                acc.push(stepper.t, &BlowupState::from_array(&stepper.y));
            }
            if !entered {
                t = stepper.t;
                state = BlowupState::from_array(&stepper.y);
                return finish(acc, TerminationReason::ReachedTmax, t, state);
            }
        }

        // At (or inside) the collar boundary: decide what this passage is.
        let report = match classify_chart_state(sys, &state) {
            Ok(r) => r,
            Err(e) if is_degeneracy(&e) => {
                return finish(acc, TerminationReason::DegeneratePoint, t, state)
            }
            Err(e) => return Err(e),
        };
        match report.case {
            Case::Limit => {
                return finish(acc, TerminationReason::LimitCaseHold, t, state);
            }
            Case::Switch => {
                let theta_minus = report.theta_minus.expect("switch case carries angles");
                let theta_plus = report.theta_plus.expect("switch case carries angles");
                if angle_dist(state.theta, theta_minus) < config.angle_tol {
                    // Capture: the pass rides the incoming separatrix. The
                    // incoming radial speed at the equilibrium is
                    // sqrt(r^2 - h12^2), so the remaining crossing time is
                    // rho / that speed, up to O(rho^2).
                    let speed = (report.r * report.r - report.h12 * report.h12).sqrt();
                    let t_bar = t + state.rho / speed;
                    if t_bar > tmax {
                        return finish(acc, TerminationReason::ReachedTmax, t, state);
                    }
                    // Slope of the outgoing separatrix theta(rho) at the
                    // equilibrium, by finite differences on the switching
                    // function: theta = theta_plus + kappa rho + O(rho^2).
                    let dg = {
                        let delta = config.eps_switch;
                        let g1 = chart_g(sys, delta, theta_plus, state.h3, &state.x)?;
                        let g0 = chart_g(sys, 0.0, theta_plus, state.h3, &state.x)?;
                        (g1 - g0) / delta
                    };
                    let kappa = dg / (2.0 * speed);
                    let event = SwitchEvent {
                        t: t_bar,
                        x: state.x,
                        h3: state.h3,
                        rho_entry: state.rho,
                        theta_in: wrap_angle(state.theta),
                        theta_out: theta_plus,
                        u_in: ControlValue::from_angle(state.theta),
                        u_out: ControlValue::from_angle(theta_plus),
                        theta_in_predicted: theta_minus,
                        theta_out_predicted: theta_plus,
                        crossing_dt_bound: state.rho / speed,
                        out_measured: false,
                    };
                    acc.events.push(event);
                    pending_out = Some(acc.events.len() - 1);
                    t = t_bar + config.eps_restart / speed;
                    state = BlowupState::new(
                        config.eps_restart,
                        theta_plus + kappa * config.eps_restart,
                        state.h3,
                        state.x,
                    );
                    acc.push(t, &state);
                }
            }
            Case::SmoothBang => {}
            Case::Degenerate => unreachable!("classify_state returns an error instead"),
        }

        // Rescaled leg through the collar, carrying physical time along.
        let y7 = {
            let a = state.to_array();
            [a[0], a[1], a[2], a[3], a[4], a[5], t]
        };
        let mut stepper = match Stepper::new(
            |_s, y: &[f64; 7]| rescaled_rhs(sys, y),
            0.0,
            y7,
            config.stepper_options(),
        ) {
            Ok(s) => s,
            Err(e) if is_degeneracy(&e) => {
                return finish(acc, TerminationReason::DegeneratePoint, t, state)
            }
            Err(e) => return Err(e),
        };
        loop {
            if stepper.t >= COLLAR_S_BUDGET {
                return Err(Error::IntegrationFailure(format!(
                    "collar passage did not exit within rescaled budget {COLLAR_S_BUDGET:e}"
                )));
            }
            match stepper.step_toward(COLLAR_S_BUDGET) {
                Ok(()) => {}
                Err(e) if is_degeneracy(&e) => {
                    let y = stepper.y;
                    return finish(
                        acc,
                        TerminationReason::DegeneratePoint,
                        y[6],
                        BlowupState::from_array(&[y[0], y[1], y[2], y[3], y[4], y[5]]),
                    );
                }
                Err(e) => return Err(e),
            }
            if stepper.y[6] >= tmax {
                let (_, y_prev) = stepper.prev();
                let (_, y_f) = if y_prev[6] < tmax {
                    stepper.bisect_last(&mut |_s, y| y[6] - tmax)?
                } else {
                    (stepper.t, stepper.y)
                };
                let final_state =
                    BlowupState::from_array(&[y_f[0], y_f[1], y_f[2], y_f[3], y_f[4], y_f[5]]);
                acc.push(y_f[6], &final_state);
                return finish(acc, TerminationReason::ReachedTmax, y_f[6], final_state);
            }
            if stepper.y[0] >= config.eps_switch {
                let (_, y_prev) = stepper.prev();
                let (_, y_x) = if y_prev[0] < config.eps_switch {
                    stepper.bisect_last(&mut |_s, y| y[0] - config.eps_switch)?
                } else {
                    (stepper.t, stepper.y)
                };
                t = y_x[6];
                state = BlowupState::from_array(&[y_x[0], y_x[1], y_x[2], y_x[3], y_x[4], y_x[5]]);
                if let Some(idx) = pending_out.take() {
                    let ev = &mut acc.events[idx];
                    ev.theta_out = wrap_angle(state.theta);
                    ev.u_out = ControlValue::from_angle(state.theta);
                    ev.out_measured = true;
                }
                acc.push(t, &state);
                break;
            }
            let y = stepper.y;
            acc.push(
                y[6],
                &BlowupState::from_array(&[y[0], y[1], y[2], y[3], y[4], y[5]]),
            );
        }
    }
}

/// Flow a batch of initial chart states to `tmax` in parallel, preserving
/// input order. The thread pool is rayon's global one; cap it before calling
/// if the environment requires it.
pub fn flow_map(
    sys: &ControlSystem,
    inits: &[BlowupState],
    tmax: f64,
    config: &IntegratorConfig,
) -> Vec<Result<ExtremalTrajectory>> {
    inits
        .par_iter()
        .map(|init| integrate_extremal(sys, init, tmax, config))
        .collect()
}

/// One locus-arc sample in canonical coordinates.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LimitSample {
    pub t: f64,
    pub state: CanonicalState,
    pub u: ControlValue,
}

/// A locus arc driven by the feedback control, with drift monitoring.
#[derive(Debug, Clone, Serialize)]
pub struct LimitArc {
    pub samples: Vec<LimitSample>,
    pub final_time: f64,
    pub final_state: CanonicalState,
    /// Largest monitored residual seen along the arc.
    pub max_drift: f64,
}

/// Integrate the canonical equations along a locus arc, with the control
/// given by the feedback `u~ = (-h02/h12, h01/h12)`. Monitors `|h1|`, `|h2|`
/// and the boundary residual `r^2 - h12^2` after every accepted step and
/// fails with `DriftExceeded` when any leaves `drift_tol`; closed locus arcs
/// exist only where that residual vanishes, so staying inside the band for
/// the whole arc is evidence the arc is genuine.
pub fn integrate_limit_arc(
    sys: &ControlSystem,
    init: &CanonicalState,
    tmax: f64,
    config: &IntegratorConfig,
) -> Result<LimitArc> {
    config.validate()?;
    if !(tmax > 0.0) {
        return Err(Error::InvalidInput("tmax must be positive".into()));
    }
    let table0 = sys.bracket_table(init, 1);
    if table0.h1.abs() > config.drift_tol || table0.h2.abs() > config.drift_tol {
        return Err(Error::NotOnSingularLocus {
            h1_abs: table0.h1.abs(),
            h2_abs: table0.h2.abs(),
        });
    }

    let control_at = |state: &CanonicalState| -> Result<(f64, f64)> {
        let table = sys.bracket_table(state, 1);
        singular_control(&table)
    };

    let rhs = |y: &[f64; 6]| -> Result<[f64; 6]> {
        let state = CanonicalState::new([y[0], y[1], y[2]], [y[3], y[4], y[5]]);
        let (u1, u2) = control_at(&state)?;
        let x = state.x;
        let f0 = sys.f0().eval(&x);
        let f1 = sys.f1().eval(&x);
        let f2 = sys.f2().eval(&x);
        // xi' = -J^T xi for the field f0 + u1 f1 + u2 f2 with u frozen.
        let j0 = sys.f0().jacobian(&x);
        let j1 = sys.f1().jacobian(&x);
        let j2 = sys.f2().jacobian(&x);
        let mut out = [0.0; 6];
        for k in 0..3 {
            let mut acc = 0.0;
            for i in 0..3 {
                acc += (j0[i][k] + u1 * j1[i][k] + u2 * j2[i][k]) * y[i];
            }
            out[k] = -acc;
            out[3 + k] = f0[k] + u1 * f1[k] + u2 * f2[k];
        }
        Ok(out)
    };

    let y0 = [
        init.xi[0], init.xi[1], init.xi[2], init.x[0], init.x[1], init.x[2],
    ];
    let mut samples = Vec::new();
    let mut max_drift: f64 = 0.0;
    let mut monitor = |t: f64, y: &[f64; 6]| -> Result<()> {
        let state = CanonicalState::new([y[0], y[1], y[2]], [y[3], y[4], y[5]]);
        let table = sys.bracket_table(&state, 1);
        let p0 = table.h01 * table.h01 + table.h02 * table.h02 - table.h12 * table.h12;
        let scale = table.h12 * table.h12;
        for (name, value) in [
            ("h1", table.h1.abs()),
            ("h2", table.h2.abs()),
            ("boundary residual", p0.abs() / scale.max(1e-300)),
        ] {
            max_drift = max_drift.max(value);
            if value > config.drift_tol {
                return Err(Error::DriftExceeded {
                    t,
                    monitor: match name {
                        "h1" => "h1",
                        "h2" => "h2",
                        _ => "boundary residual",
                    },
                    value,
                    tol: config.drift_tol,
                });
            }
        }
        let (u1, u2) = singular_control(&table)?;
        samples.push(LimitSample {
            t,
            state,
            u: ControlValue::clamped(u1, u2),
        });
        Ok(())
    };

    let mut stepper = Stepper::new(|_t, y: &[f64; 6]| rhs(y), 0.0, y0, config.stepper_options())?;
    monitor(0.0, &stepper.y)?;
    while stepper.t < tmax {
        stepper.step_toward(tmax)?;
        monitor(stepper.t, &stepper.y)?;
    }
    let y = stepper.y;
    let final_state = CanonicalState::new([y[0], y[1], y[2]], [y[3], y[4], y[5]]);
    let final_time = stepper.t;
    let keep = if config.record_samples {
        samples
    } else {
        Vec::new()
    };
    Ok(LimitArc {
        samples: keep,
        final_time,
        final_state,
        max_drift,
    })
}

/// Probe how strongly nearby initial conditions separate by a horizon `t`:
/// for each `delta`, flow the pair `center +- (delta/2) d` (one shared random
/// unit direction `d` in chart coordinates) and report the chart distance at
/// the horizon divided by `delta`. Across a switching the chart distance
/// between the pair is `O(1)` however small `delta` is, so the ratio grows
/// like `1/delta`; where the flow is regular the ratio stays near the local
/// Lipschitz constant.
pub fn lipschitz_probe(
    sys: &ControlSystem,
    center: &BlowupState,
    horizon: f64,
    deltas: &[f64],
    seed: u64,
    config: &IntegratorConfig,
) -> Result<Vec<ProbeResult>> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let dir = loop {
        let mut v = [0.0f64; 6];
        for c in &mut v {
            *c = rng.gen_range(-1.0..1.0);
        }
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 0.1 {
            break v.map(|c| c / n);
        }
    };
    let mut quiet = config.clone();
    quiet.record_samples = false;
    let mut out = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        if !(delta > 0.0) {
            return Err(Error::InvalidInput("probe deltas must be positive".into()));
        }
        let offset = |sign: f64| {
            let c = center.to_array();
            let mut y = c;
            for i in 0..6 {
                y[i] = c[i] + sign * 0.5 * delta * dir[i];
            }
            BlowupState::from_array(&y)
        };
        let mut pair = Vec::new();
        for side in [-1.0, 1.0] {
            let traj = integrate_extremal(sys, &offset(side), horizon, &quiet)?;
            if traj.termination != TerminationReason::ReachedTmax {
                return Err(Error::IntegrationFailure(format!(
                    "probe leg stopped early: {:?} at t = {}",
                    traj.termination, traj.final_time
                )));
            }
            pair.push(traj.final_state);
        }
        let dist = chart_distance(&pair[0], &pair[1]);
        out.push(ProbeResult {
            delta,
            dist,
            ratio: dist / delta,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProbeResult {
    pub delta: f64,
    /// Chart distance between the pair at the horizon.
    pub dist: f64,
    /// `dist / delta`.
    pub ratio: f64,
}

/// A state on the incoming separatrix of the switching point over `q`, at
/// radial distance `rho_start`, found by riding the separatrix backwards
/// from the equilibrium (backward integration is self-correcting there,
/// since the incoming branch repels in reverse time). Also returns an
/// estimate of the forward time from the returned state to the crossing.
pub fn incoming_branch_state(
    sys: &ControlSystem,
    q: &Vec3,
    h3: f64,
    rho_start: f64,
    config: &IntegratorConfig,
) -> Result<(BlowupState, f64)> {
    config.validate()?;
    if !(rho_start > config.eps_switch) {
        return Err(Error::InvalidInput(format!(
            "rho_start = {rho_start:e} must exceed eps_switch = {:e}",
            config.eps_switch
        )));
    }
    let xi = crate::system::locus_covector(sys, q, h3)?;
    let report = classify_state(sys, &CanonicalState::new(xi, *q))?;
    if report.case != Case::Switch {
        return Err(Error::InvalidInput(format!(
            "no switching at q = {q:?}: case {:?}",
            report.case
        )));
    }
    let theta_minus = report.theta_minus.expect("switch case carries angles");
    let speed = (report.r * report.r - report.h12 * report.h12).sqrt();
    // Incoming separatrix slope theta = theta_minus - kappa rho + O(rho^2).
    let kappa = {
        let delta = config.eps_switch;
        let g1 = chart_g(sys, delta, theta_minus, h3, q)?;
        let g0 = chart_g(sys, 0.0, theta_minus, h3, q)?;
        (g1 - g0) / delta / (2.0 * speed)
    };
    let rho_seed = config.eps_switch;
    let y0 = [
        rho_seed,
        theta_minus - kappa * rho_seed,
        h3,
        q[0],
        q[1],
        q[2],
    ];
    // Reverse time: negate the right-hand side and run the radius up.
    let mut stepper = Stepper::new(
        |_s, y: &[f64; 6]| {
            let d = time_rhs(sys, y)?;
            Ok(d.map(|v| -v))
        },
        0.0,
        y0,
        config.stepper_options(),
    )?;
    let budget = 1e6;
    loop {
        stepper.step_toward(budget)?;
        if stepper.y[0] >= rho_start {
            let (t_b, y_b) = stepper.bisect_last(&mut |_s, y| y[0] - rho_start)?;
            let state = BlowupState::from_array(&y_b);
            return Ok((state, t_b + rho_seed / speed));
        }
        if stepper.t >= budget {
            return Err(Error::IntegrationFailure(
                "incoming separatrix did not reach rho_start within budget".into(),
            ));
        }
    }
}

/// Finite-difference linearization of the rescaled `(rho, theta)` block at
/// an equilibrium `(0, theta_eq)` over the point `x`. The full linearization
/// is block-triangular with this block on the diagonal and zeros from the
/// slow directions, so these two eigenvalues are the only nonzero ones.
pub fn equilibrium_linearization(
    sys: &ControlSystem,
    x: &Vec3,
    h3: f64,
    theta_eq: f64,
) -> Result<[[f64; 2]; 2]> {
    let delta = 1e-6;
    let rho_prime = |rho: f64, theta: f64| -> Result<f64> {
        let d = chart_data(sys, rho, theta, h3, x)?;
        Ok(rho * (theta.cos() * d.h01 + theta.sin() * d.h02))
    };
    let theta_prime = |rho: f64, theta: f64| -> Result<f64> { chart_g(sys, rho, theta, h3, x) };
    let j00 = (rho_prime(delta, theta_eq)? - rho_prime(-delta, theta_eq)?) / (2.0 * delta);
    let j01 = (rho_prime(0.0, theta_eq + delta)? - rho_prime(0.0, theta_eq - delta)?)
        / (2.0 * delta);
    let j10 = (theta_prime(delta, theta_eq)? - theta_prime(-delta, theta_eq)?) / (2.0 * delta);
    let j11 = (theta_prime(0.0, theta_eq + delta)? - theta_prime(0.0, theta_eq - delta)?)
        / (2.0 * delta);
    Ok([[j00, j01], [j10, j11]])
}

/// Eigenvalues of a real 2x2 matrix as `(re, im)` pairs.
pub fn eigenvalues_2x2(m: &[[f64; 2]; 2]) -> [(f64, f64); 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [(tr / 2.0 - s, 0.0), (tr / 2.0 + s, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [(tr / 2.0, -s), (tr / 2.0, s)]
    }
}
