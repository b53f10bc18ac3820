//! Independent checks for the symbolic and flow machinery.
//!
//! Everything in this module deliberately avoids the code paths it is used
//! to validate: brackets are re-derived from finite differences of plain
//! field evaluations, candidate trajectories for the time-optimality search
//! are integrated with a fixed-step fourth-order scheme rather than the
//! adaptive stepper, and the model radial equations are scalar and
//! self-contained.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::ExtremalTrajectory;
use crate::poly::{field, PolyField};
use crate::rk::{Stepper, StepperOptions};
use crate::system::{drift_family, CanonicalState, ControlSystem};
use crate::vec3::{dot, sub, Vec3};

/// Lie bracket `[f, g](x) = Dg(x) f(x) - Df(x) g(x)` with both Jacobians
/// taken by central differences of field evaluations. Exact (up to
/// roundoff) for fields of degree at most two; `O(h^2)` otherwise.
pub fn fd_bracket_oracle(f: &PolyField, g: &PolyField, x: &Vec3, h: f64) -> Vec3 {
    let fd_jacobian_times = |field: &PolyField, v: &Vec3| -> Vec3 {
        // D field(x) . v  =  sum_j v_j * d field / d x_j, columns by FD.
        let mut out = [0.0; 3];
        for j in 0..3 {
            let mut xp = *x;
            let mut xm = *x;
            xp[j] += h;
            xm[j] -= h;
            let fp = field.eval(&xp);
            let fm = field.eval(&xm);
            for i in 0..3 {
                out[i] += v[j] * (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        out
    };
    let fx = f.eval(x);
    let gx = g.eval(x);
    let dg_f = fd_jacobian_times(g, &fx);
    let df_g = fd_jacobian_times(f, &gx);
    sub(&dg_f, &df_g)
}

/// Poisson bracket `{a, b}` of the lifts `a = <xi, f>`, `b = <xi, g>`,
/// computed by central differences of the coordinate formula
/// `{a, b} = sum_k (da/dxi_k db/dx_k - da/dx_k db/dxi_k)`
/// using only field evaluations.
pub fn fd_poisson_bracket(f: &PolyField, g: &PolyField, state: &CanonicalState, h: f64) -> f64 {
    let lift = |field: &PolyField, xi: &Vec3, x: &Vec3| dot(xi, &field.eval(x));
    let mut acc = 0.0;
    for k in 0..3 {
        let (mut xi_p, mut xi_m) = (state.xi, state.xi);
        xi_p[k] += h;
        xi_m[k] -= h;
        let da_dxi = (lift(f, &xi_p, &state.x) - lift(f, &xi_m, &state.x)) / (2.0 * h);
        let db_dxi = (lift(g, &xi_p, &state.x) - lift(g, &xi_m, &state.x)) / (2.0 * h);
        let (mut x_p, mut x_m) = (state.x, state.x);
        x_p[k] += h;
        x_m[k] -= h;
        let da_dx = (lift(f, &state.xi, &x_p) - lift(f, &state.xi, &x_m)) / (2.0 * h);
        let db_dx = (lift(g, &state.xi, &x_p) - lift(g, &state.xi, &x_m)) / (2.0 * h);
        acc += da_dxi * db_dx - da_dx * db_dxi;
    }
    acc
}

/// Largest disagreement between the finite-difference Poisson brackets
/// `{h_i, h_j}` and the cached bracket lifts `h_ij`, over the pairs
/// (0,1), (0,2), (1,2).
pub fn poisson_consistency(sys: &ControlSystem, lam: &CanonicalState, h: f64) -> f64 {
    poisson_consistency_with(sys, lam, h, false)
}

/// Same check with an optional deliberate sign flip on the cached side.
/// A correct implementation then reports about `2 max |h_ij|`, which
/// demonstrates that the comparison is able to fail.
pub fn poisson_consistency_with(
    sys: &ControlSystem,
    lam: &CanonicalState,
    h: f64,
    flip_sign: bool,
) -> f64 {
    let table = sys.bracket_table(lam, 1);
    let sign = if flip_sign { -1.0 } else { 1.0 };
    let pairs = [
        (sys.f0(), sys.f1(), table.h01),
        (sys.f0(), sys.f2(), table.h02),
        (sys.f1(), sys.f2(), table.h12),
    ];
    pairs
        .iter()
        .map(|(f, g, cached)| (fd_poisson_bracket(f, g, lam, h) - sign * cached).abs())
        .fold(0.0, f64::max)
}

/// Random polynomial field with every monomial of total degree at most
/// `max_degree`, coefficients uniform in `(-scale, scale)`. Used to feed
/// the oracles with arbitrary smooth systems.
pub fn random_field(rng: &mut impl Rng, max_degree: u32, scale: f64) -> PolyField {
    let mut comps: [Vec<(f64, [u32; 3])>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for comp in comps.iter_mut() {
        for i in 0..=max_degree {
            for j in 0..=(max_degree - i) {
                for k in 0..=(max_degree - i - j) {
                    comp.push((rng.gen_range(-scale..scale), [i, j, k]));
                }
            }
        }
    }
    field(&[&comps[0], &comps[1], &comps[2]])
}

/// Fit the exponential lower envelope `rho(t) >= c rho(0) e^(-a t)` across
/// every sample of every trajectory in the set. Returns the pair `(c, a)`
/// with the largest `c in (0, 1]` for the smallest sufficient `a >= 0`;
/// all samples satisfy the bound by construction, so the substance is that
/// a positive `c` exists for a finite `a`. Fails if any sample has
/// `rho <= 0`, and rejects trajectories containing switching events (the
/// radius restarts across a switch, so no single envelope applies).
pub fn envelope_fit(trajs: &[ExtremalTrajectory]) -> Result<(f64, f64)> {
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    for traj in trajs {
        if !traj.events.is_empty() {
            return Err(Error::InvalidInput(
                "envelope fit expects event-free trajectories".into(),
            ));
        }
        if traj.samples.len() < 2 {
            return Err(Error::InvalidInput(
                "envelope fit needs recorded samples".into(),
            ));
        }
        let t0 = traj.samples[0].t;
        let rho0 = traj.samples[0].state.rho;
        if rho0 <= 0.0 {
            return Err(Error::EnvelopeViolated(format!(
                "initial radius {rho0} is not positive"
            )));
        }
        for s in &traj.samples {
            if s.state.rho <= 0.0 {
                return Err(Error::EnvelopeViolated(format!(
                    "radius {} at t = {} is not positive",
                    s.state.rho, s.t
                )));
            }
            pooled.push((s.t - t0, (s.state.rho / rho0).ln()));
        }
    }
    if pooled.is_empty() {
        return Err(Error::InvalidInput("envelope fit of an empty set".into()));
    }
    let mut a: f64 = 0.0;
    for &(t, y) in &pooled {
        if t > 0.0 {
            a = a.max(-y / t);
        }
    }
    let ln_c = pooled
        .iter()
        .map(|(t, y)| y + a * t)
        .fold(f64::INFINITY, f64::min)
        .min(0.0);
    Ok((ln_c.exp(), a))
}

/// Smallest slack `rho_i - c rho(0) e^(-a t_i)` over the samples of a run;
/// a fitted envelope keeps this nonnegative up to roundoff.
pub fn envelope_residual(traj: &ExtremalTrajectory, c: f64, a: f64) -> f64 {
    let t0 = traj.samples[0].t;
    let rho0 = traj.samples[0].state.rho;
    traj.samples
        .iter()
        .map(|s| s.state.rho - c * rho0 * (-a * (s.t - t0)).exp())
        .fold(f64::INFINITY, f64::min)
}

/// Grid and accuracy knobs for the model radial equations.
#[derive(Debug, Clone)]
pub struct ModelOdeConfig {
    /// Number of comparison grid points past `theta1`.
    pub grid_n: usize,
    /// End of the comparison window.
    pub theta_end: f64,
    /// `theta1 = time_factor * (1 + eta) / (1 - eta^2) * rho0`; any factor
    /// above 2 admits the ordering claim, 3 leaves a margin.
    pub time_factor: f64,
}

impl Default for ModelOdeConfig {
    fn default() -> Self {
        ModelOdeConfig {
            grid_n: 64,
            theta_end: 1.5,
            time_factor: 3.0,
        }
    }
}

/// The two scalar radial profiles near the boundary case: `rho_neg` follows
/// the equation for `rho(-theta)` and `rho_pos` the one for `rho(eta theta)`,
/// both started at `rho0`. Past the matching angle `theta1` the first must
/// stay strictly below the second.
#[derive(Debug, Clone)]
pub struct ModelOdeRun {
    pub rho0: f64,
    pub eta: f64,
    pub theta1: f64,
    /// Increasing grid on `(theta1, theta_end]`.
    pub theta_grid: Vec<f64>,
    pub rho_neg: Vec<f64>,
    pub rho_pos: Vec<f64>,
    /// `min(rho_pos - rho_neg)` over the grid.
    pub min_gap: f64,
    /// True when `rho_neg < rho_pos` across the whole grid.
    pub ordered: bool,
}

fn model_opts() -> StepperOptions {
    StepperOptions {
        rel_tol: 1e-12,
        abs_tol: 1e-18,
        ..StepperOptions::default()
    }
}

fn neg_branch_rhs(theta: f64, rho: f64) -> f64 {
    rho * (rho - theta.sin()) / (1.0 - theta.cos() + rho)
}

fn pos_branch_rhs(theta: f64, rho: f64, eta: f64) -> f64 {
    -eta * rho * (rho + (eta * theta).sin()) / (1.0 - (eta * theta).cos() + rho)
}

/// Integrate a scalar equation from `(0, rho0)` and record the solution at
/// each grid point exactly (the stepper clips onto the requested abscissae).
fn scalar_on_grid(rhs: impl Fn(f64, f64) -> f64, rho0: f64, grid: &[f64]) -> Result<Vec<f64>> {
    let mut stepper = Stepper::new(
        |t: f64, y: &[f64; 1]| Ok([rhs(t, y[0])]),
        0.0,
        [rho0],
        model_opts(),
    )?;
    let mut out = Vec::with_capacity(grid.len());
    for &theta in grid {
        while stepper.t < theta {
            stepper.step_toward(theta)?;
        }
        out.push(stepper.y[0]);
    }
    Ok(out)
}

pub fn model_radial_ode(rho0: f64, eta: f64, cfg: &ModelOdeConfig) -> Result<ModelOdeRun> {
    if !(rho0 > 0.0) || !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidInput(
            "model equations need rho0 > 0 and eta in (0, 1)".into(),
        ));
    }
    if !(cfg.time_factor > 2.0) {
        return Err(Error::InvalidInput(
            "the matching-time factor must exceed 2".into(),
        ));
    }
    let theta1 = cfg.time_factor * (1.0 + eta) / (1.0 - eta * eta) * rho0;
    if theta1 >= cfg.theta_end {
        return Err(Error::InvalidInput(format!(
            "matching angle {theta1} does not precede the comparison window"
        )));
    }
    let n = cfg.grid_n.max(2);
    let theta_grid: Vec<f64> = (1..=n)
        .map(|k| theta1 + (cfg.theta_end - theta1) * k as f64 / n as f64)
        .collect();
    let rho_neg = scalar_on_grid(neg_branch_rhs, rho0, &theta_grid)?;
    let rho_pos = scalar_on_grid(|t, r| pos_branch_rhs(t, r, eta), rho0, &theta_grid)?;
    for (name, curve) in [("rho_neg", &rho_neg), ("rho_pos", &rho_pos)] {
        if curve.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::IntegrationFailure(format!(
                "model profile {name} left the positive half-line"
            )));
        }
    }
    let min_gap = rho_neg
        .iter()
        .zip(&rho_pos)
        .map(|(n, p)| p - n)
        .fold(f64::INFINITY, f64::min);
    Ok(ModelOdeRun {
        rho0,
        eta,
        theta1,
        theta_grid,
        rho_neg,
        rho_pos,
        min_gap,
        ordered: min_gap > 0.0,
    })
}

/// Sup-distance between the rescaled model solutions and their limiting
/// quadratic profiles `t - t^2/2` and `-eta t - eta^2 t^2 / 2` on the
/// matching window `t in [0, theta1/rho0]`, via
/// `x(t) = (rho(rho0 t) - rho0) / rho0^2`. Shrinks like `O(rho0)`.
pub fn model_profile_residual(rho0: f64, eta: f64, grid_n: usize) -> Result<(f64, f64)> {
    if !(rho0 > 0.0) || !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidInput(
            "model equations need rho0 > 0 and eta in (0, 1)".into(),
        ));
    }
    let t_end = 3.0 * (1.0 + eta) / (1.0 - eta * eta);
    let n = grid_n.max(2);
    let ts: Vec<f64> = (1..=n).map(|k| t_end * k as f64 / n as f64).collect();
    let thetas: Vec<f64> = ts.iter().map(|t| rho0 * t).collect();
    let neg = scalar_on_grid(neg_branch_rhs, rho0, &thetas)?;
    let pos = scalar_on_grid(|t, r| pos_branch_rhs(t, r, eta), rho0, &thetas)?;
    let mut worst_x: f64 = 0.0;
    let mut worst_y: f64 = 0.0;
    for ((t, rn), rp) in ts.iter().zip(&neg).zip(&pos) {
        let x = (rn - rho0) / (rho0 * rho0);
        let y = (rp - rho0) / (rho0 * rho0);
        worst_x = worst_x.max((x - (t - t * t / 2.0)).abs());
        worst_y = worst_y.max((y - (-eta * t - eta * eta * t * t / 2.0)).abs());
    }
    Ok((worst_x, worst_y))
}

/// Options for the time-optimality search.
#[derive(Debug, Clone)]
pub struct DirectSearchOptions {
    /// Constant-control segments in the candidate family; 2 is the
    /// one-switch family, up to 8 for the wide search.
    pub segments: usize,
    /// Total trajectory-simulation budget across all restarts.
    pub budget: usize,
    pub seed: u64,
    /// Endpoint distance defining a hit.
    pub endpoint_tol: f64,
}

impl Default for DirectSearchOptions {
    fn default() -> Self {
        DirectSearchOptions {
            segments: 2,
            budget: 100_000,
            seed: 0,
            endpoint_tol: 1e-6,
        }
    }
}

/// Outcome of a successful search.
#[derive(Debug, Clone)]
pub struct DirectSearchResult {
    pub target: Vec3,
    /// Reference time of the extremal that produced the target.
    pub extremal_time: f64,
    /// Total duration of the fastest control found that hits the target.
    pub best_found_time: f64,
    /// Endpoint miss of that control.
    pub best_miss: f64,
    /// Parameter vector `(theta_a, .., theta_n, t_1, .., t_n)`; durations
    /// are nonnegative.
    pub best_control: Vec<f64>,
    /// Trajectory simulations spent.
    pub evaluations: usize,
}

/// Endpoint of a candidate control: piecewise-constant circle-valued
/// segments, integrated with classic fixed-step fourth-order steps on plain
/// field evaluations (independent of the adaptive machinery).
fn simulate_candidate(sys: &ControlSystem, x0: &Vec3, segs: &[(f64, f64)]) -> Vec3 {
    let mut x = *x0;
    for &(angle, duration) in segs {
        if duration <= 0.0 {
            continue;
        }
        let (u1, u2) = (angle.cos(), angle.sin());
        let rhs = |x: &Vec3| -> Vec3 {
            let f0 = sys.f0().eval(x);
            let f1 = sys.f1().eval(x);
            let f2 = sys.f2().eval(x);
            [
                f0[0] + u1 * f1[0] + u2 * f2[0],
                f0[1] + u1 * f1[1] + u2 * f2[1],
                f0[2] + u1 * f1[2] + u2 * f2[2],
            ]
        };
        let steps = 50;
        let h = duration / steps as f64;
        for _ in 0..steps {
            let k1 = rhs(&x);
            let mid1 = [
                x[0] + 0.5 * h * k1[0],
                x[1] + 0.5 * h * k1[1],
                x[2] + 0.5 * h * k1[2],
            ];
            let k2 = rhs(&mid1);
            let mid2 = [
                x[0] + 0.5 * h * k2[0],
                x[1] + 0.5 * h * k2[1],
                x[2] + 0.5 * h * k2[2],
            ];
            let k3 = rhs(&mid2);
            let end = [x[0] + h * k3[0], x[1] + h * k3[1], x[2] + h * k3[2]];
            let k4 = rhs(&end);
            for i in 0..3 {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }
    x
}

/// Endpoint of a candidate control, exposed so callers can build reference
/// targets through the same independent integrator the search uses.
pub fn candidate_endpoint(sys: &ControlSystem, x0: &Vec3, segs: &[(f64, f64)]) -> Vec3 {
    simulate_candidate(sys, x0, segs)
}

/// Internal parameter layout: `[angles.., roots..]` where the duration of
/// segment i is `roots[i]^2`; squaring keeps durations nonnegative and the
/// objective smooth where a segment collapses.
fn params_to_segments(p: &[f64]) -> Vec<(f64, f64)> {
    let n = p.len() / 2;
    (0..n).map(|i| (p[i], p[n + i] * p[n + i])).collect()
}

fn total_time(p: &[f64]) -> f64 {
    let n = p.len() / 2;
    p[n..].iter().map(|d| d * d).sum()
}

/// Downhill-simplex minimization; returns the best vertex reached. The
/// objective may report `None` (budget exhausted), which is treated as an
/// infinitely bad vertex.
fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> Option<f64>,
    x0: &[f64],
    spread: f64,
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut eval = |x: &[f64]| f(x).unwrap_or(f64::INFINITY);
    let v0 = eval(x0);
    simplex.push((x0.to_vec(), v0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += spread;
        let v = eval(&x);
        simplex.push((x, v));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[n].1.is_finite()
            && simplex[n].1 - simplex[0].1 < 1e-14 * (1.0 + simplex[0].1.abs())
        {
            break;
        }
        let worst = simplex[n].clone();
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for i in 0..n {
                centroid[i] += x[i] / n as f64;
            }
        }
        let blend = |alpha: f64| -> Vec<f64> {
            (0..n)
                .map(|i| centroid[i] + alpha * (worst.0[i] - centroid[i]))
                .collect()
        };
        let reflected = blend(-1.0);
        let vr = eval(&reflected);
        if vr < simplex[0].1 {
            let expanded = blend(-2.0);
            let ve = eval(&expanded);
            simplex[n] = if ve < vr {
                (expanded, ve)
            } else {
                (reflected, vr)
            };
        } else if vr < simplex[n - 1].1 {
            simplex[n] = (reflected, vr);
        } else {
            let contracted = blend(0.5);
            let vc = eval(&contracted);
            if vc < worst.1 {
                simplex[n] = (contracted, vc);
            } else {
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    for i in 0..n {
                        item.0[i] = best[i] + 0.5 * (item.0[i] - best[i]);
                    }
                    item.1 = eval(&item.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0].clone()
}

struct RunOutcome {
    /// `(params, total time, miss)` of the best hitting control, if any.
    feasible: Option<(Vec<f64>, f64, f64)>,
    best_miss: f64,
    spent: usize,
}

/// One independent restart: random candidates from this run's generator
/// stream, simplex refinement of the endpoint miss with shrinking
/// re-seeded simplices, then a duration-plus-penalty polish.
fn search_run(
    sys: &ControlSystem,
    x0: &Vec3,
    target: &Vec3,
    t_scale: f64,
    opts: &DirectSearchOptions,
    stream: u64,
    cap: usize,
) -> RunOutcome {
    let n = opts.segments;
    let dim = 2 * n;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(stream);
    let mut spent = 0usize;
    let miss_of = |p: &[f64], spent: &mut usize| -> Option<f64> {
        if *spent >= cap {
            return None;
        }
        *spent += 1;
        let end = simulate_candidate(sys, x0, &params_to_segments(p));
        let d2: f64 = (0..3).map(|i| (end[i] - target[i]).powi(2)).sum();
        Some(d2.sqrt())
    };

    // Random candidates: a modest sample to place the first simplex.
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..(cap / 8).max(1) {
        let mut p = vec![0.0; dim];
        for a in p.iter_mut().take(n) {
            *a = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        }
        for d in p.iter_mut().skip(n) {
            *d = rng.gen_range(0.0f64..1.5 * t_scale / n as f64).sqrt();
        }
        match miss_of(&p, &mut spent) {
            Some(miss) => {
                if best.as_ref().map_or(true, |(_, m)| miss < *m) {
                    best = Some((p, miss));
                }
            }
            None => break,
        }
    }
    let (mut p_cur, mut miss_cur) = match best {
        Some(b) => b,
        None => return RunOutcome {
            feasible: None,
            best_miss: f64::INFINITY,
            spent,
        },
    };

    // Shrinking restarts pull the simplex out of premature collapse.
    let mut spread = 0.25 * t_scale.max(0.1);
    for _ in 0..8 {
        if spent >= cap || miss_cur <= 0.1 * opts.endpoint_tol {
            break;
        }
        let (p, miss) = nelder_mead(|q| miss_of(q, &mut spent), &p_cur, spread, cap);
        if miss < miss_cur {
            p_cur = p;
            miss_cur = miss;
        }
        spread *= 0.3;
    }

    let mut outcome = RunOutcome {
        feasible: None,
        best_miss: miss_cur,
        spent: 0,
    };
    if miss_cur <= opts.endpoint_tol {
        outcome.feasible = Some((p_cur.clone(), total_time(&p_cur), miss_cur));
        // Polish: minimize duration, keeping the endpoint pinned by a
        // penalty that dwarfs any possible time gain.
        let penalty = 1e3 * t_scale / opts.endpoint_tol;
        let mut spread = 0.05 * t_scale.max(0.1);
        for _ in 0..6 {
            if spent >= cap {
                break;
            }
            let seed_p = outcome.feasible.as_ref().unwrap().0.clone();
            let (p, _) = nelder_mead(
                |q| {
                    miss_of(q, &mut spent)
                        .map(|m| total_time(q) + penalty * (m - opts.endpoint_tol).max(0.0))
                },
                &seed_p,
                spread,
                cap,
            );
            if let Some(m) = miss_of(&p, &mut spent) {
                outcome.best_miss = outcome.best_miss.min(m);
                let t = total_time(&p);
                if m <= opts.endpoint_tol
                    && t < outcome.feasible.as_ref().unwrap().1
                {
                    outcome.feasible = Some((p, t, m));
                }
            }
            spread *= 0.4;
        }
    }
    outcome.spent = spent;
    outcome
}

/// Time-optimality search on the one-parameter linear family: find the
/// fastest piecewise-constant circle-valued control steering the origin to
/// `target`, and compare against the time of the extremal that generated
/// the target. The default two-segment family is the one-switch candidate
/// set; wider families (up to 8 segments) probe for anything faster.
///
/// Restarts are independent seeded generator streams evaluated in
/// parallel; the reported minimum is deterministic for a fixed seed.
pub fn direct_search_linear_example(
    alpha: f64,
    target: &Vec3,
    extremal_time: f64,
    opts: &DirectSearchOptions,
) -> Result<DirectSearchResult> {
    if !(alpha > 1.0) {
        return Err(Error::InvalidInput(
            "the one-switch search expects the family parameter above 1".into(),
        ));
    }
    if opts.segments == 0 || opts.segments > 8 {
        return Err(Error::InvalidInput(
            "direct search supports 1..=8 segments".into(),
        ));
    }
    if !(extremal_time > 0.0) {
        return Err(Error::InvalidInput(
            "reference time must be positive".into(),
        ));
    }
    let sys = drift_family(alpha);
    let x0 = [0.0; 3];
    let runs: usize = 12;
    let cap = opts.budget / runs;
    let outcomes: Vec<RunOutcome> = (0..runs as u64)
        .into_par_iter()
        .map(|stream| search_run(&sys, &x0, target, extremal_time, opts, stream + 1, cap))
        .collect();
    let evaluations: usize = outcomes.iter().map(|o| o.spent).sum();
    let best_miss = outcomes
        .iter()
        .map(|o| o.best_miss)
        .fold(f64::INFINITY, f64::min);
    let winner = outcomes
        .into_iter()
        .filter_map(|o| o.feasible)
        .min_by(|a, b| a.1.total_cmp(&b.1));
    match winner {
        Some((p, t, miss)) => Ok(DirectSearchResult {
            target: *target,
            extremal_time,
            best_found_time: t,
            best_miss: miss,
            best_control: {
                let n = p.len() / 2;
                let mut c = p[..n].to_vec();
                c.extend(p[n..].iter().map(|d| d * d));
                c
            },
            evaluations,
        }),
        None => Err(Error::Unreachable {
            tol: opts.endpoint_tol,
            best_miss,
        }),
    }
}
