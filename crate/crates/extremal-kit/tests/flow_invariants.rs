//! Dynamical invariants of the integrator: agreement with the raw canonical
//! equations, conservation of the maximized Hamiltonian, independence from
//! the collar radius, event-report consistency, and determinism.

use approx::assert_abs_diff_eq;

use extremal_kit::flow::{embedded_distance, incoming_branch_state, integrate_limit_arc};
use extremal_kit::system::{drift_family, locus_covector};
use extremal_kit::vec3::{dot, Vec3};
use extremal_kit::{
    classify_point, flow_map, integrate_extremal, BlowupState, CanonicalState, ControlSystem,
    IntegratorConfig, TerminationReason,
};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Maximized Hamiltonian h0 + rho, reconstructed from the chart state via
/// the covector.
fn hamiltonian(sys: &ControlSystem, state: &BlowupState) -> f64 {
    let xi = state.covector(sys).expect("fields independent");
    dot(&xi, &sys.f0().eval(&state.x)) + state.rho
}

/// The canonical extremal equations with the maximizing control, as one
/// plain vector field on (xi, x). Used only through field evaluations and
/// Jacobians, with a fixed-step integrator, so it shares nothing with the
/// chart integrator it cross-checks.
fn canonical_rhs(sys: &ControlSystem, y: &[f64; 6]) -> [f64; 6] {
    let xi = [y[0], y[1], y[2]];
    let x = [y[3], y[4], y[5]];
    let h1 = dot(&xi, &sys.f1().eval(&x));
    let h2 = dot(&xi, &sys.f2().eval(&x));
    let rho = (h1 * h1 + h2 * h2).sqrt();
    let u = [h1 / rho, h2 / rho];
    let mut xdot: Vec3 = sys.f0().eval(&x);
    let f1 = sys.f1().eval(&x);
    let f2 = sys.f2().eval(&x);
    for i in 0..3 {
        xdot[i] += u[0] * f1[i] + u[1] * f2[i];
    }
    let j0 = sys.f0().jacobian(&x);
    let j1 = sys.f1().jacobian(&x);
    let j2 = sys.f2().jacobian(&x);
    let mut xidot = [0.0f64; 3];
    for j in 0..3 {
        for i in 0..3 {
            xidot[j] -= xi[i] * (j0[i][j] + u[0] * j1[i][j] + u[1] * j2[i][j]);
        }
    }
    [
        xidot[0], xidot[1], xidot[2], xdot[0], xdot[1], xdot[2],
    ]
}

fn rk4_canonical(sys: &ControlSystem, mut y: [f64; 6], tmax: f64, steps: usize) -> [f64; 6] {
    let h = tmax / steps as f64;
    for _ in 0..steps {
        let k1 = canonical_rhs(sys, &y);
        let mut y2 = y;
        for i in 0..6 {
            y2[i] = y[i] + 0.5 * h * k1[i];
        }
        let k2 = canonical_rhs(sys, &y2);
        let mut y3 = y;
        for i in 0..6 {
            y3[i] = y[i] + 0.5 * h * k2[i];
        }
        let k3 = canonical_rhs(sys, &y3);
        let mut y4 = y;
        for i in 0..6 {
            y4[i] = y[i] + h * k3[i];
        }
        let k4 = canonical_rhs(sys, &y4);
        for i in 0..6 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

#[test]
fn chart_run_matches_the_canonical_equations() {
    let sys = drift_family(0.5);
    let init = BlowupState::new(0.5, 0.3, 1.0, [0.1, -0.2, 0.05]);
    let tmax = 0.3;

    let traj = integrate_extremal(&sys, &init, tmax, &IntegratorConfig::default()).unwrap();
    assert_eq!(traj.termination, TerminationReason::ReachedTmax);

    let xi = init.covector(&sys).unwrap();
    let y0 = [xi[0], xi[1], xi[2], init.x[0], init.x[1], init.x[2]];
    let y = rk4_canonical(&sys, y0, tmax, 3000);
    let xi_end = [y[0], y[1], y[2]];
    let x_end = [y[3], y[4], y[5]];
    let expected = [
        dot(&xi_end, &sys.f1().eval(&x_end)),
        dot(&xi_end, &sys.f2().eval(&x_end)),
        dot(&xi_end, &sys.f3().eval(&x_end)),
        x_end[0],
        x_end[1],
        x_end[2],
    ];
    let got = traj.final_state.embedded();
    for i in 0..6 {
        assert_abs_diff_eq!(got[i], expected[i], epsilon = 1e-8);
    }
}

#[test]
fn maximized_hamiltonian_is_conserved_on_smooth_runs() {
    let sys = drift_family(0.5);
    let init = BlowupState::new(0.4, -1.1, 0.8, [0.2, 0.1, -0.3]);
    let traj = integrate_extremal(&sys, &init, 1.0, &IntegratorConfig::default()).unwrap();
    assert_eq!(traj.termination, TerminationReason::ReachedTmax);
    assert_eq!(traj.count_switchings(), 0);
    let h0 = hamiltonian(&sys, &init);
    let drift = traj
        .samples
        .iter()
        .map(|s| (hamiltonian(&sys, &s.state) - h0).abs())
        .fold(0.0f64, f64::max);
    assert!(
        drift <= 1e-8 * (1.0 + h0.abs()),
        "Hamiltonian drifted by {drift:e}"
    );
}

#[test]
fn maximized_hamiltonian_survives_the_switch() {
    let sys = drift_family(2.0);
    let config = IntegratorConfig::default();
    let (init, crossing) = incoming_branch_state(&sys, &[0.0; 3], 1.0, 0.5, &config).unwrap();
    let traj = integrate_extremal(&sys, &init, 1.4 * crossing, &config).unwrap();
    assert_eq!(traj.count_switchings(), 1);
    let h_start = hamiltonian(&sys, &init);
    let h_end = hamiltonian(&sys, &traj.final_state);
    // The teleport cuts the collar at eps_switch, so conservation across the
    // event is exact only to that order.
    assert_abs_diff_eq!(h_end, h_start, epsilon = 1e-5);
}

#[test]
fn collar_radius_does_not_change_smooth_transits() {
    // An off-branch pass dips to min rho ~ 3e-3. With the default collar it
    // never leaves the physical-time mode; with an enlarged collar the same
    // pass runs in rescaled mode with time carried along. The two answers
    // must agree.
    let sys = drift_family(2.0);
    let report = classify_point(&sys, &[0.0; 3]).unwrap();
    let theta = report.theta_minus.unwrap() + 0.01;
    let init = BlowupState::new(0.5, theta, 1.0, [0.0; 3]);
    let tmax = 0.4;

    let narrow = integrate_extremal(&sys, &init, tmax, &IntegratorConfig::default()).unwrap();
    let wide_config = IntegratorConfig {
        eps_switch: 1e-2,
        ..IntegratorConfig::default()
    };
    let wide = integrate_extremal(&sys, &init, tmax, &wide_config).unwrap();

    assert_eq!(narrow.termination, TerminationReason::ReachedTmax);
    assert_eq!(wide.termination, TerminationReason::ReachedTmax);
    assert_eq!(narrow.count_switchings(), 0);
    assert_eq!(wide.count_switchings(), 0);
    assert!(
        embedded_distance(&narrow.final_state, &wide.final_state) <= 1e-8,
        "modes disagree by {:e}",
        embedded_distance(&narrow.final_state, &wide.final_state)
    );
}

#[test]
fn switch_events_report_consistently() {
    let sys = drift_family(2.0);
    let config = IntegratorConfig::default();
    for (rho0, h3) in [(0.3, 0.7), (0.5, 1.0), (0.7, 1.3)] {
        let (init, crossing) =
            incoming_branch_state(&sys, &[0.0; 3], h3, rho0, &config).unwrap();
        let traj = integrate_extremal(&sys, &init, 1.4 * crossing + 0.05, &config).unwrap();
        assert_eq!(traj.events.len(), 1, "rho0 = {rho0}");
        let ev = &traj.events[0];
        assert!(ev.out_measured);
        assert!(extremal_kit::vec3::angle_dist(ev.theta_in, ev.theta_in_predicted) <= 1e-6);
        assert!(extremal_kit::vec3::angle_dist(ev.theta_out, ev.theta_out_predicted) <= 1e-4);
        assert!(ev.crossing_dt_bound >= 0.0);
        assert!(ev.t > 0.0 && ev.t < traj.final_time);
        for u in [&ev.u_in, &ev.u_out] {
            assert_abs_diff_eq!(u.u1 * u.u1 + u.u2 * u.u2, 1.0, epsilon = 1e-12);
        }
        // The event time matches the linear-decay prediction from the entry
        // radius.
        let expected_dt = ev.rho_entry / (SQRT3 * h3);
        assert_abs_diff_eq!(ev.crossing_dt_bound, expected_dt, epsilon = 1e-3 * expected_dt);
    }
}

#[test]
fn limit_arcs_hold_the_locus() {
    let sys = drift_family(1.0);
    let x0 = [0.2, -0.1, 0.3];
    let xi = locus_covector(&sys, &x0, 1.0).unwrap();
    let init = CanonicalState::new(xi, x0);
    let arc = integrate_limit_arc(&sys, &init, 0.5, &IntegratorConfig::default()).unwrap();
    assert!(arc.max_drift <= IntegratorConfig::default().drift_tol);
    assert_abs_diff_eq!(arc.final_time, 0.5, epsilon = 1e-12);
    for s in &arc.samples {
        let norm_sq = s.u.u1 * s.u.u1 + s.u.u2 * s.u.u2;
        assert!(norm_sq <= 1.0 + 1e-9, "control left the disk: {norm_sq}");
    }
}

#[test]
fn flow_map_is_deterministic_and_order_preserving() {
    let sys = drift_family(2.0);
    let config = IntegratorConfig::default();
    let report = classify_point(&sys, &[0.0; 3]).unwrap();
    let theta_minus = report.theta_minus.unwrap();
    let inits: Vec<BlowupState> = (0..6)
        .map(|k| BlowupState::new(0.4 + 0.02 * k as f64, theta_minus + 0.005 * k as f64, 1.0, [0.0; 3]))
        .collect();
    let tmax = 0.45;
    let batch_a = flow_map(&sys, &inits, tmax, &config);
    let batch_b = flow_map(&sys, &inits, tmax, &config);
    assert_eq!(batch_a.len(), inits.len());
    for ((a, b), init) in batch_a.iter().zip(&batch_b).zip(&inits) {
        let a = a.as_ref().expect("run succeeds");
        let b = b.as_ref().expect("run succeeds");
        // Bitwise determinism between repeated batch runs.
        assert_eq!(a.final_state.to_array(), b.final_state.to_array());
        assert_eq!(a.final_time, b.final_time);
        // Order preservation: each slot matches its own sequential run.
        let solo = integrate_extremal(&sys, init, tmax, &config).unwrap();
        assert_eq!(a.final_state.to_array(), solo.final_state.to_array());
    }
}

#[test]
fn zero_horizon_returns_the_initial_sample() {
    let sys = drift_family(2.0);
    let init = BlowupState::new(0.5, 0.2, 1.0, [0.0; 3]);
    let traj = integrate_extremal(&sys, &init, 0.0, &IntegratorConfig::default()).unwrap();
    assert_eq!(traj.termination, TerminationReason::ReachedTmax);
    assert_eq!(traj.samples.len(), 1);
    assert!(traj.events.is_empty());
    assert_eq!(traj.final_time, 0.0);
    assert_eq!(traj.final_state.to_array(), init.to_array());
}

#[test]
fn equilibrium_speed_tracks_the_family_parameter() {
    use extremal_kit::flow::{eigenvalues_2x2, equilibrium_linearization};
    for a in [1.5, 2.0, 3.0] {
        let sys = drift_family(a);
        for h3 in [0.7, 1.0, 1.3] {
            let xi3 = h3;
            let speed = (a * a - 1.0).sqrt() * xi3;
            let report = classify_point(&sys, &[0.0; 3]).unwrap();
            assert_eq!(report.case, extremal_kit::Case::Switch);
            for theta in [report.theta_minus.unwrap(), report.theta_plus.unwrap()] {
                let jac = equilibrium_linearization(&sys, &[0.0; 3], h3, theta).unwrap();
                let eig = eigenvalues_2x2(&jac);
                assert_abs_diff_eq!(eig[0].0, -speed, epsilon = 1e-5);
                assert_abs_diff_eq!(eig[1].0, speed, epsilon = 1e-5);
            }
        }
    }
}
