//! The aggregated verification suite: every slow cross-check the library
//! offers, run under one seed and collected into a structured report.
//!
//! Each check compares one piece of machinery against an independent source
//! of truth: finite differences against symbolic brackets, frozen
//! hand-derived values against classification output, Monte Carlo runs
//! against structural claims, and a brute-force search against integrated
//! extremal times.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::classify::{
    classify_point, singular_arc_admissible, singular_control, Admissibility, Case,
};
use crate::error::{Error, Result};
use crate::flow::{
    classify_chart_state, embedded_distance, eigenvalues_2x2, equilibrium_linearization,
    incoming_branch_state, integrate_extremal, lipschitz_probe, BlowupState, IntegratorConfig,
    TerminationReason,
};
use crate::oracle::{
    direct_search_linear_example, envelope_fit, envelope_residual, fd_bracket_oracle,
    model_radial_ode, poisson_consistency_with, random_field, DirectSearchOptions,
    ModelOdeConfig,
};
use crate::system::{commuting_controls_example, drift_family, BracketTable, CanonicalState,
    ControlSystem};
use crate::vec3::{norm, sub};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    /// The quantity the check measured (its meaning is check-specific and
    /// spelled out in `detail`).
    pub measured: f64,
    /// The bound `measured` was held against.
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn bounded(name: &'static str, measured: f64, tolerance: f64, detail: String) -> Self {
        CheckResult {
            name,
            pass: measured <= tolerance,
            measured,
            tolerance,
            detail,
        }
    }

    fn failed(name: &'static str, detail: String) -> Self {
        CheckResult {
            name,
            pass: false,
            measured: f64::NAN,
            tolerance: f64::NAN,
            detail,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
    /// Echo of the configuration the suite ran under.
    pub environment: Vec<(String, String)>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Initial conditions in the switching Monte Carlo.
    pub mc_runs: usize,
    /// Trajectories pooled into the envelope fit.
    pub envelope_runs: usize,
    /// Extremal endpoints the time-optimality search attacks.
    pub search_targets: usize,
    /// Simulation budget per search target.
    pub search_budget: usize,
    /// Search over the widened candidate family (more segments).
    pub wide_search: bool,
    /// Deliberately flip the bracket sign inside the Poisson check; the
    /// suite must then report that check as failed.
    pub inject_poisson_sign_flip: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 42,
            mc_runs: 1000,
            envelope_runs: 100,
            search_targets: 2,
            search_budget: 20_000,
            wide_search: false,
            inject_poisson_sign_flip: false,
        }
    }
}

fn random_system(rng: &mut ChaCha8Rng) -> ControlSystem {
    ControlSystem::new(
        random_field(rng, 2, 1.0),
        random_field(rng, 2, 1.0),
        random_field(rng, 2, 1.0),
    )
}

fn check_bracket_oracle(opts: &VerifyOptions) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x01);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let sys = random_system(&mut rng);
        for _ in 0..10 {
            let x = [0.0; 3].map(|_| rng.gen_range(-1.0..1.0));
            for (f, g) in [
                (sys.f0(), sys.f1()),
                (sys.f0(), sys.f2()),
                (sys.f1(), sys.f2()),
            ] {
                let fd = fd_bracket_oracle(f, g, &x, 1e-5);
                let symbolic = f.lie_bracket(g).eval(&x);
                worst = worst.max(norm(&sub(&fd, &symbolic)));
            }
        }
    }
    CheckResult::bounded(
        "bracket_oracle",
        worst,
        1e-6,
        "max |FD - symbolic| over 20 random systems x 10 points x 3 pairs".into(),
    )
}

fn check_poisson_consistency(opts: &VerifyOptions) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x02);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let sys = random_system(&mut rng);
        for _ in 0..5 {
            let xi = [0.0; 3].map(|_| rng.gen_range(-1.0..1.0));
            let x = [0.0; 3].map(|_| rng.gen_range(-1.0..1.0));
            let state = CanonicalState::new(xi, x);
            worst = worst.max(poisson_consistency_with(
                &sys,
                &state,
                1e-5,
                opts.inject_poisson_sign_flip,
            ));
        }
    }
    let mut detail =
        String::from("max Poisson-vs-bracket residual over 20 random systems x 5 covectors");
    if opts.inject_poisson_sign_flip {
        detail.push_str(" (sign flip injected)");
    }
    CheckResult::bounded("poisson_consistency", worst, 1e-6, detail)
}

fn check_jacobi_identity(opts: &VerifyOptions) -> CheckResult {
    // Small integer coefficients keep every product and cancellation exact
    // in double precision, so the cyclic sum must vanish identically.
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x03);
    let int_field = |rng: &mut ChaCha8Rng| {
        let mut comps: [Vec<(f64, [u32; 3])>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for comp in comps.iter_mut() {
            for i in 0..=2u32 {
                for j in 0..=(2 - i) {
                    for k in 0..=(2 - i - j) {
                        comp.push((rng.gen_range(-3i32..=3) as f64, [i, j, k]));
                    }
                }
            }
        }
        crate::poly::field(&[&comps[0], &comps[1], &comps[2]])
    };
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let f = int_field(&mut rng);
        let g = int_field(&mut rng);
        let h = int_field(&mut rng);
        let cyclic = f
            .lie_bracket(&g.lie_bracket(&h))
            .add(&g.lie_bracket(&h.lie_bracket(&f)))
            .add(&h.lie_bracket(&f.lie_bracket(&g)));
        for comp in &cyclic.components {
            for m in comp.terms() {
                worst = worst.max(m.coeff.abs());
            }
        }
    }
    CheckResult {
        name: "jacobi_identity",
        pass: worst == 0.0,
        measured: worst,
        tolerance: 0.0,
        detail: "max surviving coefficient of the cyclic bracket sum, 10 integer systems".into(),
    }
}

fn check_jump_formula() -> CheckResult {
    let sys = drift_family(2.0);
    let report = match classify_point(&sys, &[0.0; 3]) {
        Ok(r) => r,
        Err(e) => return CheckResult::failed("jump_formula", e.to_string()),
    };
    let (um, up) = match (report.u_minus, report.u_plus) {
        (Some(um), Some(up)) => (um, up),
        _ => return CheckResult::failed("jump_formula", "no jump controls reported".into()),
    };
    let root3 = 3.0f64.sqrt();
    let err = (um.u1 - root3 / 2.0)
        .abs()
        .max((um.u2 + 0.5).abs())
        .max((up.u1 + root3 / 2.0).abs())
        .max((up.u2 + 0.5).abs());
    CheckResult::bounded(
        "jump_formula",
        err,
        1e-9,
        "jump controls at the origin vs hand-derived (+-sqrt(3)/2, -1/2)".into(),
    )
}

fn check_antipodal_jump() -> CheckResult {
    let sys = commuting_controls_example();
    let report = match classify_point(&sys, &[0.0; 3]) {
        Ok(r) => r,
        Err(e) => return CheckResult::failed("antipodal_jump", e.to_string()),
    };
    let (um, up) = match (report.u_minus, report.u_plus) {
        (Some(um), Some(up)) => (um, up),
        _ => return CheckResult::failed("antipodal_jump", "no jump controls reported".into()),
    };
    let err = (up.u1 + um.u1).abs().max((up.u2 + um.u2).abs());
    CheckResult::bounded(
        "antipodal_jump",
        err,
        1e-9,
        "commuting controls: outgoing control is the antipode of the incoming one".into(),
    )
}

fn check_trichotomy() -> CheckResult {
    let cases = [
        (2.0, Case::Switch),
        (1.0, Case::Limit),
        (0.5, Case::SmoothBang),
    ];
    let mut mismatches = 0.0;
    let mut detail = String::new();
    for (a, expected) in cases {
        match classify_point(&drift_family(a), &[0.0; 3]) {
            Ok(r) => {
                if r.case != expected {
                    mismatches += 1.0;
                    detail.push_str(&format!("family {a}: got {:?}; ", r.case));
                }
            }
            Err(e) => {
                mismatches += 1.0;
                detail.push_str(&format!("family {a}: {e}; "));
            }
        }
    }
    if detail.is_empty() {
        detail = "family parameter 2 / 1 / 0.5 mapped to the three cases".into();
    }
    CheckResult::bounded("trichotomy", mismatches, 0.0, detail)
}

fn check_equilibrium_eigenvalues() -> CheckResult {
    let sys = drift_family(2.0);
    let report = match classify_point(&sys, &[0.0; 3]) {
        Ok(r) => r,
        Err(e) => return CheckResult::failed("equilibrium_eigenvalues", e.to_string()),
    };
    let speed = (report.r * report.r - report.h12 * report.h12).sqrt();
    let mut worst: f64 = 0.0;
    for theta in [report.theta_minus.unwrap(), report.theta_plus.unwrap()] {
        let jac = match equilibrium_linearization(&sys, &[0.0; 3], 1.0, theta) {
            Ok(j) => j,
            Err(e) => return CheckResult::failed("equilibrium_eigenvalues", e.to_string()),
        };
        let eig = eigenvalues_2x2(&jac);
        worst = worst
            .max((eig[0].0 + speed).abs())
            .max((eig[1].0 - speed).abs())
            .max(eig[0].1.abs())
            .max(eig[1].1.abs());
    }
    CheckResult::bounded(
        "equilibrium_eigenvalues",
        worst,
        1e-6,
        format!("FD linearization at both equilibrium angles vs +-{speed:.6}"),
    )
}

fn check_singular_identities(opts: &VerifyOptions) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x04);
    let mut worst_rel: f64 = 0.0;
    let mut mismatches = 0usize;
    let mut produced = 0usize;
    while produced < 1000 {
        let table = BracketTable {
            h1: 0.0,
            h2: 0.0,
            h3: rng.gen_range(-2.0..2.0),
            h01: rng.gen_range(-2.0..2.0),
            h02: rng.gen_range(-2.0..2.0),
            h12: rng.gen_range(-2.0..2.0),
            second: None,
        };
        if table.h12.abs() <= 1e-3 {
            continue;
        }
        produced += 1;
        let r2 = table.h01 * table.h01 + table.h02 * table.h02;
        let (u1, u2) = match singular_control(&table) {
            Ok(u) => u,
            Err(e) => return CheckResult::failed("singular_identities", e.to_string()),
        };
        let norm_sq = u1 * u1 + u2 * u2;
        if r2 > 0.0 {
            worst_rel = worst_rel.max((norm_sq * table.h12 * table.h12 - r2).abs() / r2);
        }
        let adm = singular_arc_admissible(&table);
        let h12_sq = table.h12 * table.h12;
        let expected = if (r2 - h12_sq).abs() <= 1e-9 * (r2 + h12_sq) {
            Admissibility::PossibleLimit
        } else if r2 > h12_sq {
            Admissibility::ExcludedNormTooBig
        } else {
            Admissibility::ExcludedByGoh
        };
        if adm != expected {
            mismatches += 1;
        }
    }
    let pass = worst_rel <= 1e-12 && mismatches == 0;
    CheckResult {
        name: "singular_identities",
        pass,
        measured: worst_rel,
        tolerance: 1e-12,
        detail: format!(
            "rel norm-identity residual over 1000 tables; {mismatches} admissibility mismatches"
        ),
    }
}

/// Random initial conditions near (and on) the incoming branch of the
/// switching system; trajectories may cross the singular locus at most
/// once within a window spanning the crossing time.
fn check_one_switch_monte_carlo(opts: &VerifyOptions) -> CheckResult {
    let sys = drift_family(2.0);
    let config = IntegratorConfig {
        record_samples: false,
        ..IntegratorConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x05);
    let mut max_events = 0usize;
    let mut with_event = 0usize;
    let root3 = 3.0f64.sqrt();
    for k in 0..opts.mc_runs {
        let rho = rng.gen_range(0.3..0.7);
        let h3 = rng.gen_range(0.5..1.5);
        let x = [0.0; 3].map(|_| rng.gen_range(-0.3..0.3));
        let q_state = match incoming_branch_state(&sys, &x, h3, rho, &config) {
            Ok((s, _)) => s,
            Err(e) => return CheckResult::failed("one_switch_monte_carlo", e.to_string()),
        };
        // Half the sample sits exactly on the branch and must switch; the
        // other half is pushed off in angle and sweeps past smoothly.
        let dtheta = if k % 2 == 0 {
            0.0
        } else {
            rng.gen_range(1e-4..0.03) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }
        };
        let init = BlowupState::new(
            q_state.rho,
            q_state.theta + dtheta,
            q_state.h3,
            q_state.x,
        );
        match classify_chart_state(&sys, &init) {
            Ok(r) if r.case == Case::Switch => {}
            Ok(r) => {
                return CheckResult::failed(
                    "one_switch_monte_carlo",
                    format!("sample classified {:?}, not a switching point", r.case),
                )
            }
            Err(e) => return CheckResult::failed("one_switch_monte_carlo", e.to_string()),
        }
        let tmax = 1.4 * rho / root3 + 0.05;
        match integrate_extremal(&sys, &init, tmax, &config) {
            Ok(traj) => {
                let n = traj.count_switchings();
                max_events = max_events.max(n);
                if n > 0 {
                    with_event += 1;
                }
            }
            Err(e) => {
                return CheckResult::failed(
                    "one_switch_monte_carlo",
                    format!("run {k} failed: {e}"),
                )
            }
        }
    }
    CheckResult {
        name: "one_switch_monte_carlo",
        pass: max_events <= 1 && with_event > 0,
        measured: max_events as f64,
        tolerance: 1.0,
        detail: format!(
            "max switch count over {} runs; {} runs recorded a switch",
            opts.mc_runs, with_event
        ),
    }
}

fn check_envelope(opts: &VerifyOptions) -> CheckResult {
    let sys = drift_family(0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x06);
    let mut trajs = Vec::with_capacity(opts.envelope_runs);
    for _ in 0..opts.envelope_runs {
        let init = BlowupState::new(
            rng.gen_range(0.2..0.8),
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            rng.gen_range(0.5..1.5),
            [0.0; 3].map(|_| rng.gen_range(-0.3..0.3)),
        );
        match integrate_extremal(&sys, &init, 2.0, &IntegratorConfig::default()) {
            Ok(t) => trajs.push(t),
            Err(e) => return CheckResult::failed("envelope_fit", e.to_string()),
        }
    }
    let (c, a) = match envelope_fit(&trajs) {
        Ok(p) => p,
        Err(e) => return CheckResult::failed("envelope_fit", e.to_string()),
    };
    let worst_crossing = trajs
        .iter()
        .map(|t| -envelope_residual(t, c, a))
        .fold(0.0f64, f64::max);
    CheckResult {
        name: "envelope_fit",
        pass: c > 0.0 && a.is_finite() && worst_crossing <= 1e-9,
        measured: worst_crossing,
        tolerance: 1e-9,
        detail: format!(
            "worst crossing below the fitted bound, {} runs, c = {c:.3e}, a = {a:.3e}",
            opts.envelope_runs
        ),
    }
}

fn check_model_ode() -> CheckResult {
    let cfg = ModelOdeConfig::default();
    let mut min_gap = f64::INFINITY;
    for rho0 in [1e-2, 1e-3, 1e-4] {
        match model_radial_ode(rho0, 0.1, &cfg) {
            Ok(run) => {
                if !run.ordered {
                    return CheckResult {
                        name: "model_radial_ode",
                        pass: false,
                        measured: run.min_gap,
                        tolerance: 0.0,
                        detail: format!("ordering violated at rho0 = {rho0:e}"),
                    };
                }
                min_gap = min_gap.min(run.min_gap);
            }
            Err(e) => return CheckResult::failed("model_radial_ode", e.to_string()),
        }
    }
    CheckResult {
        name: "model_radial_ode",
        pass: min_gap > 0.0,
        measured: min_gap,
        tolerance: 0.0,
        detail: "min branch gap past the matching angle, rho0 in {1e-2, 1e-3, 1e-4}".into(),
    }
}

fn probe_growth(sys: &ControlSystem, opts: &VerifyOptions) -> Result<f64> {
    let config = IntegratorConfig {
        record_samples: false,
        ..IntegratorConfig::default()
    };
    let (center, eta) = incoming_branch_state(sys, &[0.0; 3], 1.0, 0.5, &config)?;
    let deltas = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    let results = lipschitz_probe(sys, &center, eta, &deltas, opts.seed ^ 0x07, &config)?;
    Ok(results.last().unwrap().ratio / results.first().unwrap().ratio)
}

fn check_probe_switch(opts: &VerifyOptions) -> CheckResult {
    match probe_growth(&drift_family(2.0), opts) {
        Ok(growth) => CheckResult {
            name: "probe_switch_growth",
            pass: growth >= 10.0,
            measured: growth,
            tolerance: 10.0,
            detail: "distance/offset growth across deltas 1e-2..1e-6 at a switching point"
                .into(),
        },
        Err(e) => CheckResult::failed("probe_switch_growth", e.to_string()),
    }
}

fn check_probe_smooth(opts: &VerifyOptions) -> CheckResult {
    // Control run on the smooth-bang side: same probe, no switch in reach,
    // ratios stay within a decade.
    let sys = drift_family(0.5);
    let config = IntegratorConfig {
        record_samples: false,
        ..IntegratorConfig::default()
    };
    let center = BlowupState::new(0.5, 0.3, 1.0, [0.0; 3]);
    let deltas = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    let horizon = 0.5 / 3.0f64.sqrt();
    match lipschitz_probe(&sys, &center, horizon, &deltas, opts.seed ^ 0x07, &config) {
        Ok(results) => {
            let ratios: Vec<f64> = results.iter().map(|r| r.ratio).collect();
            let spread = ratios.iter().fold(0.0f64, |a, &b| a.max(b))
                / ratios.iter().fold(f64::INFINITY, |a, &b| a.min(b));
            CheckResult {
                name: "probe_smooth_control",
                pass: spread < 10.0,
                measured: spread,
                tolerance: 10.0,
                detail: "ratio spread across the same deltas on the smooth side".into(),
            }
        }
        Err(e) => CheckResult::failed("probe_smooth_control", e.to_string()),
    }
}

fn check_flow_continuity(opts: &VerifyOptions) -> CheckResult {
    let sys = drift_family(2.0);
    let config = IntegratorConfig {
        record_samples: false,
        ..IntegratorConfig::default()
    };
    let (center, eta) = match incoming_branch_state(&sys, &[0.0; 3], 1.0, 0.5, &config) {
        Ok(c) => c,
        Err(e) => return CheckResult::failed("flow_continuity", e.to_string()),
    };
    let horizon = 1.3 * eta;
    let reference = match integrate_extremal(&sys, &center, horizon, &config) {
        Ok(t) => t,
        Err(e) => return CheckResult::failed("flow_continuity", e.to_string()),
    };
    if reference.termination != TerminationReason::ReachedTmax {
        return CheckResult::failed(
            "flow_continuity",
            format!("reference terminated early: {:?}", reference.termination),
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x08);
    let dir = loop {
        let mut v = [0.0f64; 6];
        for c in &mut v {
            *c = rng.gen_range(-1.0..1.0);
        }
        let n = v.iter().map(|c| c * c).fold(0.0, |a, b| a + b).sqrt();
        if n > 0.1 {
            break v.map(|c| c / n);
        }
    };
    let base = center.to_array();
    let mut deviations = Vec::new();
    for k in 3..=10u32 {
        let scale = 0.5f64.powi(k as i32);
        let mut y = base;
        for i in 0..6 {
            y[i] += scale * dir[i];
        }
        let init = BlowupState::from_array(&y);
        match integrate_extremal(&sys, &init, horizon, &config) {
            Ok(t) if t.termination == TerminationReason::ReachedTmax => {
                deviations.push(embedded_distance(&t.final_state, &reference.final_state));
            }
            Ok(t) => {
                return CheckResult::failed(
                    "flow_continuity",
                    format!("offset 2^-{k} terminated early: {:?}", t.termination),
                )
            }
            Err(e) => return CheckResult::failed("flow_continuity", e.to_string()),
        }
    }
    let worst_ratio = deviations
        .windows(2)
        .map(|w| w[1] / w[0])
        .fold(0.0f64, f64::max);
    CheckResult {
        name: "flow_continuity",
        pass: worst_ratio <= 1.05,
        measured: worst_ratio,
        tolerance: 1.05,
        detail: format!(
            "max deviation growth between successive halvings; deviations {:.3e}..{:.3e}",
            deviations.first().unwrap(),
            deviations.last().unwrap()
        ),
    }
}

fn check_direct_search(opts: &VerifyOptions) -> CheckResult {
    let sys = drift_family(2.0);
    let config = IntegratorConfig::default();
    // The search family starts at the origin, so the reference extremal must
    // too. The incoming separatrix of this family is exactly radial (its
    // angular velocity vanishes at theta_minus independently of rho), so the
    // chart state (rho0, theta_minus, h3, 0) lies on the incoming branch of
    // the through-switch extremal departing the origin.
    let report = match classify_point(&sys, &[0.0; 3]) {
        Ok(r) => r,
        Err(e) => return CheckResult::failed("direct_search", e.to_string()),
    };
    let theta_minus = report.theta_minus.expect("switch case carries angles");
    let speed = (report.r * report.r - report.h12 * report.h12).sqrt();
    let rho0 = 0.5;
    let center = BlowupState::new(rho0, theta_minus, 1.0, [0.0; 3]);
    let crossing = rho0 / speed;
    // Reference times straddle the crossing; each target is the state-space
    // endpoint of the integrated extremal at that time.
    let mut worst_margin = f64::INFINITY;
    let mut detail = String::new();
    for j in 0..opts.search_targets {
        let t_star = crossing * (0.7 + 0.6 * j as f64 / opts.search_targets.max(1) as f64);
        let traj = match integrate_extremal(&sys, &center, t_star, &config) {
            Ok(t) => t,
            Err(e) => return CheckResult::failed("direct_search", e.to_string()),
        };
        let target = traj.final_state.x;
        let search_opts = DirectSearchOptions {
            segments: if opts.wide_search { 4 } else { 2 },
            budget: opts.search_budget,
            seed: opts.seed ^ (0x10 + j as u64),
            endpoint_tol: 1e-6,
        };
        match direct_search_linear_example(2.0, &target, t_star, &search_opts) {
            Ok(res) => {
                let margin = res.best_found_time - (t_star - 1e-3);
                worst_margin = worst_margin.min(margin);
                detail.push_str(&format!(
                    "T*={t_star:.4}: found {:.4}; ",
                    res.best_found_time
                ));
            }
            Err(Error::Unreachable { best_miss, .. }) => {
                return CheckResult::failed(
                    "direct_search",
                    format!("target at T*={t_star:.4} unreachable (best miss {best_miss:.3e})"),
                )
            }
            Err(e) => return CheckResult::failed("direct_search", e.to_string()),
        }
    }
    CheckResult {
        name: "direct_search",
        pass: worst_margin >= 0.0,
        measured: worst_margin,
        tolerance: 0.0,
        detail: format!("min(found - (T* - 1e-3)) over targets; {detail}"),
    }
}

/// Run the whole suite and collect the report. The suite itself never
/// errors on a failed check; it errors only if a check cannot be
/// constructed at all.
pub fn run_suite(opts: &VerifyOptions) -> VerificationReport {
    let checks = vec![
        check_bracket_oracle(opts),
        check_poisson_consistency(opts),
        check_jacobi_identity(opts),
        check_jump_formula(),
        check_antipodal_jump(),
        check_trichotomy(),
        check_equilibrium_eigenvalues(),
        check_singular_identities(opts),
        check_one_switch_monte_carlo(opts),
        check_envelope(opts),
        check_model_ode(),
        check_probe_switch(opts),
        check_probe_smooth(opts),
        check_flow_continuity(opts),
        check_direct_search(opts),
    ];
    let environment = vec![
        ("seed".into(), opts.seed.to_string()),
        ("mc_runs".into(), opts.mc_runs.to_string()),
        ("envelope_runs".into(), opts.envelope_runs.to_string()),
        ("search_targets".into(), opts.search_targets.to_string()),
        ("search_budget".into(), opts.search_budget.to_string()),
        ("wide_search".into(), opts.wide_search.to_string()),
        (
            "poisson_sign_flip".into(),
            opts.inject_poisson_sign_flip.to_string(),
        ),
        ("threads".into(), rayon::current_num_threads().to_string()),
    ];
    VerificationReport {
        checks,
        environment,
    }
}
