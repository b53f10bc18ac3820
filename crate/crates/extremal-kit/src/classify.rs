//! Classification of extremals at points of the locus `{h1 = h2 = 0}`.
//!
//! At a point where `f1, f2` are linearly independent, the locus is spanned
//! by `lambda_bar = f1 x f2`, and the first-order lifts `h01, h02, h12`
//! decide among three mutually exclusive behaviours:
//!
//! * `r^2 > h12^2` — exactly one control discontinuity (the jump formula),
//! * `r^2 < h12^2` — extremals stay bang with smoothly rotating control,
//! * `r^2 = h12^2` — the limit case separating the two,
//!
//! where `r^2 = h01^2 + h02^2`. Everything here is algebra on the lifts;
//! no integration is involved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{BracketTable, CanonicalState, ControlSystem};
use crate::vec3::{norm, wrap_angle, Vec3};

/// Linear-independence floor for `|f1 x f2|` at a point.
pub const LIN_INDEP_TOL: f64 = 1e-10;
/// Floor for `h01^2 + h02^2 + h12^2`; below it the point is degenerate.
pub const RANK_TOL: f64 = 1e-10;
/// Membership tolerance for the locus `{|h1|, |h2| = 0}`.
pub const SING_TOL: f64 = 1e-9;
/// Relative half-width of the limit band around `r^2 = h12^2`.
pub const LIMIT_TOL: f64 = 1e-9;
/// Angular tolerance used when matching equilibrium angles.
pub const ANGLE_TOL: f64 = 1e-6;
/// Slack allowed on the closed-disk constraint for constructed controls.
pub const DISK_SLACK: f64 = 1e-12;

/// A control value in the closed unit disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlValue {
    pub u1: f64,
    pub u2: f64,
}

impl ControlValue {
    /// Construct, asserting the disk constraint. Every control the crate
    /// produces is on or inside the unit circle by construction, so a
    /// violation here is a logic error, not a data error.
    pub fn new(u1: f64, u2: f64) -> Self {
        let n2 = u1 * u1 + u2 * u2;
        assert!(
            n2 <= 1.0 + DISK_SLACK,
            "control ({u1}, {u2}) leaves the unit disk: |u|^2 = {n2}"
        );
        ControlValue { u1, u2 }
    }

    pub fn from_angle(theta: f64) -> Self {
        ControlValue::new(theta.cos(), theta.sin())
    }

    /// Construct, rescaling onto the circle if the pair lies outside the
    /// disk. For feedback laws that sit on the circle in exact arithmetic,
    /// this absorbs roundoff without tripping the constructor assert.
    pub fn clamped(u1: f64, u2: f64) -> Self {
        let n = (u1 * u1 + u2 * u2).sqrt();
        if n > 1.0 {
            ControlValue { u1: u1 / n, u2: u2 / n }
        } else {
            ControlValue { u1, u2 }
        }
    }

    pub fn norm(&self) -> f64 {
        (self.u1 * self.u1 + self.u2 * self.u2).sqrt()
    }
}

/// Outcome of the pointwise trichotomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    /// One control discontinuity with explicit incoming/outgoing values.
    Switch,
    /// Control stays on the circle and rotates smoothly; no discontinuity.
    SmoothBang,
    /// Boundary case `r^2 = h12^2` within tolerance.
    Limit,
    /// Rank hypothesis fails; outside the theory's scope.
    Degenerate,
}

/// Full pointwise report. Angle and control fields are populated only in
/// the `Switch` case.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub point: Vec3,
    pub lambda_bar: Vec3,
    pub r: f64,
    pub h01: f64,
    pub h02: f64,
    pub h12: f64,
    pub phi: f64,
    pub case: Case,
    pub theta_minus: Option<f64>,
    pub theta_plus: Option<f64>,
    pub u_minus: Option<ControlValue>,
    pub u_plus: Option<ControlValue>,
}

/// The canonical locus covector at a base point: `lambda_bar = f1(q) x f2(q)`.
pub fn canonical_covector(sys: &ControlSystem, q: &Vec3) -> Result<CanonicalState> {
    let f1 = sys.f1().eval(q);
    let f2 = sys.f2().eval(q);
    let lambda = crate::vec3::cross(&f1, &f2);
    if norm(&lambda) <= LIN_INDEP_TOL {
        return Err(Error::DegeneratePoint(format!(
            "|f1 x f2| = {:e} at q = {:?}",
            norm(&lambda),
            q
        )));
    }
    Ok(CanonicalState::new(lambda, *q))
}

/// Rank test: the three first-order lifts must not vanish simultaneously.
pub fn rank_condition(table: &BracketTable) -> bool {
    table.h01 * table.h01 + table.h02 * table.h02 + table.h12 * table.h12 > RANK_TOL
}

/// Trichotomy on raw lift values. Scaling all lifts by `c != 0` does not
/// change the answer except through the absolute rank floor.
pub fn case_from_lifts(h01: f64, h02: f64, h12: f64) -> Case {
    let r2 = h01 * h01 + h02 * h02;
    let h12_sq = h12 * h12;
    if r2 + h12_sq <= RANK_TOL {
        Case::Degenerate
    } else if (r2 - h12_sq).abs() <= LIMIT_TOL * (r2 + h12_sq) {
        Case::Limit
    } else if r2 > h12_sq {
        Case::Switch
    } else {
        Case::SmoothBang
    }
}

/// Zeros of the switching function `theta -> h12 + cos(theta) h02 - sin(theta) h01`,
/// i.e. angles with `sin(theta - phi) = h12 / r`. Returns `(phi, theta_minus,
/// theta_plus)` where `theta_minus` is the root with `cos(theta - phi) < 0`
/// (the radially incoming equilibrium) and `theta_plus` the outgoing one.
/// Both are wrapped to `(-pi, pi]`.
pub fn equilibrium_angles(h01: f64, h02: f64, h12: f64) -> Result<(f64, f64, f64)> {
    let r2 = h01 * h01 + h02 * h02;
    let disc = r2 - h12 * h12;
    if disc <= 0.0 {
        return Err(Error::NoRealAngles { discriminant: disc });
    }
    // `+ 0.0` turns a negative zero into a positive one so that the angle
    // lands in (-pi, pi] instead of at -pi.
    let phi = (h02 + 0.0).atan2(h01);
    let s = disc.sqrt();
    let theta_plus = wrap_angle(phi + h12.atan2(s));
    let theta_minus = wrap_angle(phi + h12.atan2(-s));
    Ok((phi, theta_minus, theta_plus))
}

/// Incoming and outgoing control values at a one-switching point:
///
/// `u(+-) = ( -h02 h12 -+ h01 s,  h01 h12 -+ h02 s ) / r^2`, `s = sqrt(r^2 - h12^2)`.
///
/// Returns `(u_minus, u_plus)`; `u_minus = (cos theta_minus, sin theta_minus)`
/// and likewise for `u_plus`, which an angle-based test pins down separately.
pub fn jump_controls(h01: f64, h02: f64, h12: f64) -> Result<(ControlValue, ControlValue)> {
    let r2 = h01 * h01 + h02 * h02;
    let h12_sq = h12 * h12;
    if r2 <= h12_sq {
        return Err(Error::NoJump { r2, h12_sq });
    }
    let s = (r2 - h12_sq).sqrt();
    let u_minus = ControlValue::new((-h02 * h12 - h01 * s) / r2, (h01 * h12 - h02 * s) / r2);
    let u_plus = ControlValue::new((-h02 * h12 + h01 * s) / r2, (h01 * h12 + h02 * s) / r2);
    Ok((u_minus, u_plus))
}

/// Classify at an arbitrary canonical state (the covector need not be the
/// canonical one; all decisions are invariant under positive rescaling of
/// `xi`).
pub fn classify_state(sys: &ControlSystem, state: &CanonicalState) -> Result<ClassificationReport> {
    let table = sys.bracket_table(state, 1);
    let case = case_from_lifts(table.h01, table.h02, table.h12);
    if case == Case::Degenerate {
        return Err(Error::DegeneratePoint(format!(
            "rank test fails: h01^2 + h02^2 + h12^2 = {:e} at x = {:?}",
            table.h01 * table.h01 + table.h02 * table.h02 + table.h12 * table.h12,
            state.x
        )));
    }
    let r = (table.h01 * table.h01 + table.h02 * table.h02).sqrt();
    let phi = (table.h02 + 0.0).atan2(table.h01);
    let (theta_minus, theta_plus, u_minus, u_plus) = if case == Case::Switch {
        let (_, tm, tp) = equilibrium_angles(table.h01, table.h02, table.h12)?;
        let (um, up) = jump_controls(table.h01, table.h02, table.h12)?;
        (Some(tm), Some(tp), Some(um), Some(up))
    } else {
        (None, None, None, None)
    };
    Ok(ClassificationReport {
        point: state.x,
        lambda_bar: state.xi,
        r,
        h01: table.h01,
        h02: table.h02,
        h12: table.h12,
        phi,
        case,
        theta_minus,
        theta_plus,
        u_minus,
        u_plus,
    })
}

/// Classify the locus at a base point using the canonical covector
/// `lambda_bar = f1(q) x f2(q)`.
pub fn classify_point(sys: &ControlSystem, q: &Vec3) -> Result<ClassificationReport> {
    let state = canonical_covector(sys, q)?;
    classify_state(sys, &state)
}

/// Feedback control that keeps an extremal on the locus:
/// `u~ = (-h02 / h12, h01 / h12)`. Defined only where `h12` is bounded away
/// from zero; note `|u~|^2 = r^2 / h12^2`, so it lies in the closed disk only
/// in the smooth-bang and limit cases.
pub fn singular_control(table: &BracketTable) -> Result<(f64, f64)> {
    if table.h12.abs() <= RANK_TOL {
        return Err(Error::SingularControlUndefined {
            h12_abs: table.h12.abs(),
        });
    }
    Ok((-table.h02 / table.h12, table.h01 / table.h12))
}

/// Verdict on whether an arc can stay on the locus over an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Admissibility {
    /// `r^2 > h12^2`: the feedback control leaves the unit disk.
    ExcludedNormTooBig,
    /// `r^2 < h12^2`: the control is interior, which the generalized
    /// Legendre condition forbids since `h12 != 0` there.
    ExcludedByGoh,
    /// `r^2 = h12^2` within tolerance: the boundary case survives both tests.
    PossibleLimit,
}

/// Trichotomy for locus arcs; mirrors [`case_from_lifts`] bands.
pub fn singular_arc_admissible(table: &BracketTable) -> Admissibility {
    let r2 = table.h01 * table.h01 + table.h02 * table.h02;
    let h12_sq = table.h12 * table.h12;
    if (r2 - h12_sq).abs() <= LIMIT_TOL * (r2 + h12_sq) {
        Admissibility::PossibleLimit
    } else if r2 > h12_sq {
        Admissibility::ExcludedNormTooBig
    } else {
        Admissibility::ExcludedByGoh
    }
}

/// Residual of the second-order necessary condition for interior locus
/// arcs: it vanishes exactly when such arcs are not immediately excluded.
pub fn goh_residual(table: &BracketTable) -> f64 {
    table.h12
}

/// Residuals cutting out the closure of the limit points inside the locus:
/// `p0 = h01^2 + h02^2 - h12^2` and its derivative `p1` along the locus
/// feedback flow, evaluated with `d h_ij/dt = h0ij + u1 h1ij + u2 h2ij`.
///
/// Requires an order-2 bracket table's worth of data, a state on the locus
/// (`|h1|, |h2| <= SING_TOL`), and `|h12|` above the rank floor.
pub fn limit_locus_residuals(sys: &ControlSystem, state: &CanonicalState) -> Result<(f64, f64)> {
    let table = sys.bracket_table(state, 2);
    if table.h1.abs() > SING_TOL || table.h2.abs() > SING_TOL {
        return Err(Error::NotOnSingularLocus {
            h1_abs: table.h1.abs(),
            h2_abs: table.h2.abs(),
        });
    }
    let (u1, u2) = singular_control(&table)?;
    let d = |i: usize, j: usize| {
        table.h_second(0, i, j) + u1 * table.h_second(1, i, j) + u2 * table.h_second(2, i, j)
    };
    let p0 = table.h01 * table.h01 + table.h02 * table.h02 - table.h12 * table.h12;
    let p1 = 2.0 * (table.h01 * d(0, 1) + table.h02 * d(0, 2) - table.h12 * d(1, 2));
    Ok((p0, p1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{commuting_controls_example, drift_family, locus_covector};
    use std::f64::consts::PI;

    const SQRT3: f64 = 1.732_050_807_568_877_2;

    #[test]
    fn drift_family_trichotomy() {
        for (a, case) in [
            (2.0, Case::Switch),
            (1.0, Case::Limit),
            (0.5, Case::SmoothBang),
        ] {
            let sys = drift_family(a);
            let report = classify_point(&sys, &[0.0; 3]).unwrap();
            assert_eq!(report.case, case, "a = {a}");
        }
    }

    #[test]
    fn switch_report_hand_values() {
        let sys = drift_family(2.0);
        let report = classify_point(&sys, &[0.0; 3]).unwrap();
        assert_eq!(report.lambda_bar, [0.0, 0.0, 1.0]);
        assert_eq!(report.h01, -2.0);
        assert_eq!(report.h02, 0.0);
        assert_eq!(report.h12, 1.0);
        assert_eq!(report.r, 2.0);
        assert!((report.phi - PI).abs() < 1e-15);
        // theta_minus = -pi/6 (incoming), theta_plus = -5 pi/6 (outgoing).
        assert!((report.theta_minus.unwrap() + PI / 6.0).abs() < 1e-12);
        assert!((report.theta_plus.unwrap() + 5.0 * PI / 6.0).abs() < 1e-12);
        let um = report.u_minus.unwrap();
        let up = report.u_plus.unwrap();
        assert!((um.u1 - SQRT3 / 2.0).abs() < 1e-12);
        assert!((um.u2 + 0.5).abs() < 1e-12);
        assert!((up.u1 + SQRT3 / 2.0).abs() < 1e-12);
        assert!((up.u2 + 0.5).abs() < 1e-12);
    }

    #[test]
    fn jump_matches_angles() {
        let (phi, tm, tp) = equilibrium_angles(-2.0, 0.0, 1.0).unwrap();
        assert!((phi - PI).abs() < 1e-15);
        let (um, up) = jump_controls(-2.0, 0.0, 1.0).unwrap();
        assert!((um.u1 - tm.cos()).abs() < 1e-14);
        assert!((um.u2 - tm.sin()).abs() < 1e-14);
        assert!((up.u1 - tp.cos()).abs() < 1e-14);
        assert!((up.u2 - tp.sin()).abs() < 1e-14);
        // theta_minus is the root with cos(theta - phi) < 0.
        assert!((tm - phi).cos() < 0.0);
        assert!((tp - phi).cos() > 0.0);
    }

    #[test]
    fn commuting_controls_jump_is_antipodal() {
        let sys = commuting_controls_example();
        let report = classify_point(&sys, &[0.0; 3]).unwrap();
        assert_eq!(report.h01, -1.0);
        assert_eq!(report.h02, 0.0);
        assert_eq!(report.h12, 0.0);
        let um = report.u_minus.unwrap();
        let up = report.u_plus.unwrap();
        assert!((um.u1 + up.u1).abs() < 1e-12);
        assert!((um.u2 + up.u2).abs() < 1e-12);
        // h01 < 0 puts the incoming root at 0 and the outgoing one at pi.
        assert!(report.theta_minus.unwrap().abs() < 1e-12);
        assert!((crate::vec3::angle_dist(report.theta_plus.unwrap(), PI)) < 1e-12);
    }

    #[test]
    fn degenerate_rank_is_an_error() {
        // f0 with [f0, fi] lifts vanishing at lambda_bar and [f1,f2] = 0
        // in the lambda_bar direction: f0 = 0 gives h01 = h02 = 0 and
        // commuting f1, f2 with f12 = 0.
        use crate::poly::field;
        let f0 = crate::poly::PolyField::zero();
        let f1 = field(&[&[(1.0, [0, 0, 0])], &[], &[]]);
        let f2 = field(&[&[], &[(1.0, [0, 0, 0])], &[]]);
        let sys = crate::system::ControlSystem::new(f0, f1, f2);
        let err = classify_point(&sys, &[0.0; 3]).unwrap_err();
        assert!(matches!(err, Error::DegeneratePoint(_)));
    }

    #[test]
    fn no_angles_in_smooth_bang_case() {
        let err = equilibrium_angles(-0.5, 0.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::NoRealAngles { .. }));
        let err = jump_controls(-0.5, 0.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::NoJump { .. }));
    }

    #[test]
    fn singular_control_values_and_norm() {
        let sys = drift_family(1.0);
        let state = CanonicalState::new(locus_covector(&sys, &[0.0; 3], 1.0).unwrap(), [0.0; 3]);
        let table = sys.bracket_table(&state, 1);
        let (u1, u2) = singular_control(&table).unwrap();
        assert!((u1 - 0.0).abs() < 1e-14);
        assert!((u2 + 1.0).abs() < 1e-14);
        let r2 = table.h01 * table.h01 + table.h02 * table.h02;
        assert!((u1 * u1 + u2 * u2) * table.h12 * table.h12 - r2 < 1e-14);
    }

    #[test]
    fn admissibility_trichotomy() {
        let mk = |h01: f64, h12: f64| BracketTable {
            h1: 0.0,
            h2: 0.0,
            h3: 1.0,
            h01,
            h02: 0.0,
            h12,
            second: None,
        };
        assert_eq!(
            singular_arc_admissible(&mk(2.0, 1.0)),
            Admissibility::ExcludedNormTooBig
        );
        assert_eq!(
            singular_arc_admissible(&mk(0.5, 1.0)),
            Admissibility::ExcludedByGoh
        );
        assert_eq!(
            singular_arc_admissible(&mk(1.0, 1.0)),
            Admissibility::PossibleLimit
        );
    }

    #[test]
    fn limit_locus_residuals_on_drift_family() {
        // a = 2: p0 = 4 - 1 = 3; the family has no second-order lifts, so p1 = 0.
        let sys = drift_family(2.0);
        let state = CanonicalState::new(locus_covector(&sys, &[0.0; 3], 1.0).unwrap(), [0.0; 3]);
        let (p0, p1) = limit_locus_residuals(&sys, &state).unwrap();
        assert!((p0 - 3.0).abs() < 1e-14);
        assert_eq!(p1, 0.0);
        // a = 1: exactly on the limit set.
        let sys = drift_family(1.0);
        let state = CanonicalState::new(locus_covector(&sys, &[0.0; 3], 1.0).unwrap(), [0.0; 3]);
        let (p0, p1) = limit_locus_residuals(&sys, &state).unwrap();
        assert!(p0.abs() < 1e-14);
        assert_eq!(p1, 0.0);
    }

    #[test]
    fn residuals_require_locus_membership() {
        let sys = drift_family(2.0);
        let state = CanonicalState::new([1.0, 0.0, 1.0], [0.0; 3]);
        let err = limit_locus_residuals(&sys, &state).unwrap_err();
        assert!(matches!(err, Error::NotOnSingularLocus { .. }));
    }
}
