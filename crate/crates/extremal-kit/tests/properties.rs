//! Randomized algebraic invariants. Integer and dyadic coefficients keep
//! every product exactly representable, so the structural identities are
//! asserted at coefficient level with zero tolerance; identities that pass
//! through transcendental functions get small pinned tolerances instead.

use std::collections::BTreeMap;

use proptest::prelude::*;

use extremal_kit::classify::{singular_arc_admissible, Admissibility};
use extremal_kit::poly::{field, PolyField};
use extremal_kit::system::BracketTable;
use extremal_kit::vec3::{angle_dist, wrap_angle, Vec3};
use extremal_kit::{
    equilibrium_angles, jump_controls, singular_control, CanonicalState, ControlSystem,
    SystemSpecFile,
};

const POWERS_DEG2: [[u32; 3]; 10] = [
    [0, 0, 0],
    [0, 0, 1],
    [0, 0, 2],
    [0, 1, 0],
    [0, 1, 1],
    [0, 2, 0],
    [1, 0, 0],
    [1, 0, 1],
    [1, 1, 0],
    [2, 0, 0],
];

fn field_from_coeffs(coeffs: &[i32]) -> PolyField {
    assert_eq!(coeffs.len(), 30);
    let comps: Vec<Vec<(f64, [u32; 3])>> = (0..3)
        .map(|c| {
            POWERS_DEG2
                .iter()
                .enumerate()
                .map(|(i, p)| (coeffs[10 * c + i] as f64, *p))
                .collect()
        })
        .collect();
    field(&[&comps[0], &comps[1], &comps[2]])
}

fn int_field() -> impl Strategy<Value = PolyField> {
    proptest::collection::vec(-3i32..=3, 30).prop_map(|c| field_from_coeffs(&c))
}

/// Multiples of 1/8: scaling integer-coefficient fields by these is exact.
fn dyadic() -> impl Strategy<Value = f64> {
    (-16i32..=16).prop_map(|k| k as f64 / 8.0)
}

/// Signed powers of two: multiplication by these never rounds.
fn pow2() -> impl Strategy<Value = f64> {
    ((-2i32..=2), prop::bool::ANY).prop_map(|(e, neg)| {
        let m = 2.0f64.powi(e);
        if neg {
            -m
        } else {
            m
        }
    })
}

fn coeffs_vanish(f: &PolyField) -> bool {
    f.components
        .iter()
        .all(|p| p.terms().iter().all(|m| m.coeff == 0.0))
}

proptest! {
    /// The bracket is bilinear at coefficient level: with dyadic weights all
    /// arithmetic is exact, so the defect must cancel to literal zeros.
    #[test]
    fn bracket_is_bilinear(
        cf in proptest::collection::vec(-3i32..=3, 30),
        cg in proptest::collection::vec(-3i32..=3, 30),
        ch in proptest::collection::vec(-3i32..=3, 30),
        a in dyadic(),
        b in dyadic(),
    ) {
        let f = field_from_coeffs(&cf);
        let g = field_from_coeffs(&cg);
        let h = field_from_coeffs(&ch);
        let lhs = f.scale(a).add(&g.scale(b)).lie_bracket(&h);
        let rhs = f.lie_bracket(&h).scale(a).add(&g.lie_bracket(&h).scale(b));
        prop_assert!(coeffs_vanish(&lhs.add(&rhs.scale(-1.0))));
    }

    /// Antisymmetry at coefficient level.
    #[test]
    fn bracket_is_antisymmetric(f in int_field(), g in int_field()) {
        let defect = f.lie_bracket(&g).add(&g.lie_bracket(&f));
        prop_assert!(coeffs_vanish(&defect));
    }

    /// Jacobi identity at coefficient level.
    #[test]
    fn bracket_satisfies_jacobi(f in int_field(), g in int_field(), h in int_field()) {
        let cyclic = f
            .lie_bracket(&g.lie_bracket(&h))
            .add(&g.lie_bracket(&h.lie_bracket(&f)))
            .add(&h.lie_bracket(&f.lie_bracket(&g)));
        prop_assert!(coeffs_vanish(&cyclic));
    }

    /// Every lift in the bracket table is linear in the covector; scaling by
    /// a power of two commutes with every rounding step, so the comparison
    /// is exact.
    #[test]
    fn lifts_are_linear_in_the_covector(
        cf in proptest::collection::vec(-3i32..=3, 30),
        cg in proptest::collection::vec(-3i32..=3, 30),
        chh in proptest::collection::vec(-3i32..=3, 30),
        xi in prop::array::uniform3(-2.0f64..2.0),
        x in prop::array::uniform3(-1.0f64..1.0),
        c in pow2(),
    ) {
        let sys = ControlSystem::new(
            field_from_coeffs(&cf),
            field_from_coeffs(&cg),
            field_from_coeffs(&chh),
        );
        let base = sys.bracket_table(&CanonicalState::new(xi, x), 1);
        let scaled = sys.bracket_table(
            &CanonicalState::new([c * xi[0], c * xi[1], c * xi[2]], x),
            1,
        );
        prop_assert_eq!(scaled.h1, c * base.h1);
        prop_assert_eq!(scaled.h2, c * base.h2);
        prop_assert_eq!(scaled.h3, c * base.h3);
        prop_assert_eq!(scaled.h01, c * base.h01);
        prop_assert_eq!(scaled.h02, c * base.h02);
        prop_assert_eq!(scaled.h12, c * base.h12);
    }

    /// Jump controls and equilibrium angles describe the same pair of
    /// directions, the controls sit on the unit circle, the angles zero the
    /// angular velocity, and the radial velocity at the angles is -/+ the
    /// saddle speed.
    #[test]
    fn jump_controls_match_equilibrium_angles(
        h01 in -3.0f64..3.0,
        h02 in -3.0f64..3.0,
        h12 in -2.0f64..2.0,
    ) {
        let r2 = h01 * h01 + h02 * h02;
        prop_assume!(r2 - h12 * h12 > 1e-4);
        let s = (r2 - h12 * h12).sqrt();
        let r = r2.sqrt();
        let (phi, theta_minus, theta_plus) = equilibrium_angles(h01, h02, h12).unwrap();
        let (um, up) = jump_controls(h01, h02, h12).unwrap();

        let tol = 1e-9 * (1.0 + r);
        prop_assert!((um.u1 - theta_minus.cos()).abs() <= tol);
        prop_assert!((um.u2 - theta_minus.sin()).abs() <= tol);
        prop_assert!((up.u1 - theta_plus.cos()).abs() <= tol);
        prop_assert!((up.u2 - theta_plus.sin()).abs() <= tol);

        prop_assert!((um.u1 * um.u1 + um.u2 * um.u2 - 1.0).abs() <= 1e-12);
        prop_assert!((up.u1 * up.u1 + up.u2 * up.u2 - 1.0).abs() <= 1e-12);

        // Angular velocity g and radial velocity h0theta at the two angles.
        for (theta, sign) in [(theta_minus, -1.0), (theta_plus, 1.0)] {
            let g = h12 - r * (theta - phi).sin();
            prop_assert!(g.abs() <= tol);
            let radial = h01 * theta.cos() + h02 * theta.sin();
            prop_assert!((radial - sign * s).abs() <= tol);
        }
    }

    /// Rotating the first-order pair rotates the equilibrium geometry by the
    /// same angle and leaves the controls' mutual angle unchanged.
    #[test]
    fn equilibrium_angles_are_rotation_equivariant(
        h01 in -3.0f64..3.0,
        h02 in -3.0f64..3.0,
        h12 in -2.0f64..2.0,
        beta in -3.0f64..3.0,
    ) {
        let r2 = h01 * h01 + h02 * h02;
        prop_assume!(r2 - h12 * h12 > 1e-4);
        let (rb01, rb02) = (
            beta.cos() * h01 - beta.sin() * h02,
            beta.sin() * h01 + beta.cos() * h02,
        );
        let (_, tm, tp) = equilibrium_angles(h01, h02, h12).unwrap();
        let (_, tm_r, tp_r) = equilibrium_angles(rb01, rb02, h12).unwrap();
        let tol = 1e-9;
        prop_assert!(angle_dist(tm_r, tm + beta) <= tol);
        prop_assert!(angle_dist(tp_r, tp + beta) <= tol);
    }

    /// The equilibrium geometry is invariant under positive rescaling of the
    /// covector; powers of two make the invariance exact up to atan2.
    #[test]
    fn equilibrium_angles_are_scale_invariant(
        h01 in -3.0f64..3.0,
        h02 in -3.0f64..3.0,
        h12 in -2.0f64..2.0,
        e in -2i32..=2,
    ) {
        let r2 = h01 * h01 + h02 * h02;
        prop_assume!(r2 - h12 * h12 > 1e-4);
        let c = 2.0f64.powi(e);
        let (_, tm, tp) = equilibrium_angles(h01, h02, h12).unwrap();
        let (_, tm_s, tp_s) = equilibrium_angles(c * h01, c * h02, c * h12).unwrap();
        prop_assert!(angle_dist(tm_s, tm) <= 1e-12);
        prop_assert!(angle_dist(tp_s, tp) <= 1e-12);
    }

    /// Away from the rank-degenerate stratum the singular feedback satisfies
    /// the norm identity, and its admissibility matches the sign of the
    /// discriminant.
    #[test]
    fn singular_feedback_identities(
        h3 in -2.0f64..2.0,
        h01 in -2.0f64..2.0,
        h02 in -2.0f64..2.0,
        h12 in -2.0f64..2.0,
    ) {
        prop_assume!(h12.abs() > 1e-3);
        let table = BracketTable {
            h1: 0.0,
            h2: 0.0,
            h3,
            h01,
            h02,
            h12,
            second: None,
        };
        let (u1, u2) = singular_control(&table).unwrap();
        let r2 = h01 * h01 + h02 * h02;
        let norm_identity = (u1 * u1 + u2 * u2) * h12 * h12;
        prop_assert!((norm_identity - r2).abs() <= 1e-12 * (1.0 + r2));
        let h12_sq = h12 * h12;
        let expected = if (r2 - h12_sq).abs() <= 1e-9 * (r2 + h12_sq) {
            Admissibility::PossibleLimit
        } else if r2 > h12_sq {
            Admissibility::ExcludedNormTooBig
        } else {
            Admissibility::ExcludedByGoh
        };
        prop_assert_eq!(singular_arc_admissible(&table), expected);
    }

    /// wrap_angle lands in (-pi, pi] and only ever moves by whole turns;
    /// angle_dist is symmetric, bounded by pi, and vanishes on the diagonal.
    #[test]
    fn angle_helpers_behave(theta in -50.0f64..50.0, psi in -50.0f64..50.0) {
        let w = wrap_angle(theta);
        prop_assert!(w > -std::f64::consts::PI && w <= std::f64::consts::PI);
        let turns = (theta - w) / (2.0 * std::f64::consts::PI);
        prop_assert!((turns - turns.round()).abs() <= 1e-9);

        let d = angle_dist(theta, psi);
        prop_assert!((0.0..=std::f64::consts::PI + 1e-12).contains(&d));
        prop_assert!((d - angle_dist(psi, theta)).abs() <= 1e-12);
        prop_assert!(angle_dist(theta, theta) <= 1e-12);
    }

    /// Serializing a system to its JSON description and resolving it back
    /// reproduces the fields exactly (integer coefficients survive the JSON
    /// number round-trip bit for bit).
    #[test]
    fn spec_file_round_trips(
        cf in proptest::collection::vec(-3i32..=3, 30),
        cg in proptest::collection::vec(-3i32..=3, 30),
        ch in proptest::collection::vec(-3i32..=3, 30),
        x in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let sys = ControlSystem::new(
            field_from_coeffs(&cf),
            field_from_coeffs(&cg),
            field_from_coeffs(&ch),
        );
        let spec = SystemSpecFile::from_system("round-trip", &sys);
        let parsed = SystemSpecFile::from_json(&spec.to_json()).unwrap();
        let back = parsed.resolve(&BTreeMap::new()).unwrap();
        for i in 0..3 {
            let orig: Vec3 = sys.f(i).eval(&x);
            let again: Vec3 = back.f(i).eval(&x);
            prop_assert_eq!(orig, again);
        }
    }
}
