//! Control-affine systems `dx/dt = f0 + u1 f1 + u2 f2` on R^3 and their
//! Hamiltonian lifts.
//!
//! A [`ControlSystem`] owns the three defining fields plus `f3 = f1 x f2`
//! and a cache of every Lie bracket the rest of the crate evaluates along
//! trajectories. The cache is built once at construction and never mutated,
//! so a system can be shared freely across threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::PolyField;
use crate::vec3::{cross, dot, norm, norm_sq, scale, Vec3};

/// Points of the cotangent bundle in canonical coordinates: covector `xi`
/// over base point `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalState {
    pub xi: Vec3,
    pub x: Vec3,
}

impl CanonicalState {
    pub fn new(xi: Vec3, x: Vec3) -> Self {
        CanonicalState { xi, x }
    }
}

/// Lift of a vector field to a linear-in-fibre Hamiltonian: `<xi, f(x)>`.
pub fn hamiltonian_lift(state: &CanonicalState, f: &PolyField) -> f64 {
    dot(&state.xi, &f.eval(&state.x))
}

/// Index pairs for first-order brackets, in storage order.
const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// First- and optionally second-order bracket lifts at one canonical state.
///
/// `h1, h2, h3` are the lifts of `f1, f2, f3`; `hij` lifts `[fi, fj]`; the
/// second-order entry `(k, i, j)` lifts `[fk, [fi, fj]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BracketTable {
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
    pub h01: f64,
    pub h02: f64,
    pub h12: f64,
    /// `second[k][m]` lifts `[fk, [fi, fj]]` where `(i, j) = PAIRS[m]`.
    pub second: Option<[[f64; 3]; 3]>,
}

impl BracketTable {
    /// First-order lift by pair, antisymmetric in `(i, j)`.
    pub fn h_pair(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (sign, a, b) = if i < j { (1.0, i, j) } else { (-1.0, j, i) };
        sign * match (a, b) {
            (0, 1) => self.h01,
            (0, 2) => self.h02,
            (1, 2) => self.h12,
            _ => panic!("first-order pair indices must lie in {{0,1,2}}"),
        }
    }

    /// Second-order lift `<xi, [fk, [fi, fj]]>`, antisymmetric in `(i, j)`.
    ///
    /// Panics if the table was built with `order = 1`.
    pub fn h_second(&self, k: usize, i: usize, j: usize) -> f64 {
        let table = self
            .second
            .expect("second-order lifts requested from an order-1 table");
        if i == j {
            return 0.0;
        }
        let (sign, a, b) = if i < j { (1.0, i, j) } else { (-1.0, j, i) };
        let m = PAIRS
            .iter()
            .position(|&p| p == (a, b))
            .expect("second-order pair indices must lie in {0,1,2}");
        sign * table[k][m]
    }
}

/// Bracket words over the alphabet `{0, 1, 2, 3}` naming cached fields:
/// `[i]` is the field itself, `[i, j]` is `[fi, fj]`, and `[k, i, j]` is
/// `[fk, [fi, fj]]`.
pub const CACHED_WORDS: [&[usize]; 19] = [
    &[0],
    &[1],
    &[2],
    &[3],
    &[0, 1],
    &[0, 2],
    &[1, 2],
    &[0, 3],
    &[1, 3],
    &[2, 3],
    &[0, 0, 1],
    &[1, 0, 1],
    &[2, 0, 1],
    &[0, 0, 2],
    &[1, 0, 2],
    &[2, 0, 2],
    &[0, 1, 2],
    &[1, 1, 2],
    &[2, 1, 2],
];

/// A control-affine system with precomputed bracket fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSystem {
    fields: [PolyField; 4],
    /// `first[i][j] = [fi, fj]` for `i in {0,1,2}`, `j in {0,1,2,3}`, `i < j`.
    f01: PolyField,
    f02: PolyField,
    f12: PolyField,
    f03: PolyField,
    f13: PolyField,
    f23: PolyField,
    /// `second[k][m] = [fk, [fi, fj]]` with `(i, j) = PAIRS[m]`.
    second: [[PolyField; 3]; 3],
}

impl ControlSystem {
    /// Build the system; `f3 = f1 x f2` and all cached brackets are
    /// computed symbolically here.
    pub fn new(f0: PolyField, f1: PolyField, f2: PolyField) -> Self {
        let f3 = f1.cross(&f2);
        let f01 = f0.lie_bracket(&f1);
        let f02 = f0.lie_bracket(&f2);
        let f12 = f1.lie_bracket(&f2);
        let f03 = f0.lie_bracket(&f3);
        let f13 = f1.lie_bracket(&f3);
        let f23 = f2.lie_bracket(&f3);
        let firsts = [&f01, &f02, &f12];
        let mut second: [[PolyField; 3]; 3] = Default::default();
        for (k, row) in second.iter_mut().enumerate() {
            for (m, entry) in row.iter_mut().enumerate() {
                *entry = [&f0, &f1, &f2][k].lie_bracket(firsts[m]);
            }
        }
        ControlSystem {
            fields: [f0, f1, f2, f3],
            f01,
            f02,
            f12,
            f03,
            f13,
            f23,
            second,
        }
    }

    pub fn f(&self, i: usize) -> &PolyField {
        &self.fields[i]
    }

    pub fn f0(&self) -> &PolyField {
        &self.fields[0]
    }
    pub fn f1(&self) -> &PolyField {
        &self.fields[1]
    }
    pub fn f2(&self) -> &PolyField {
        &self.fields[2]
    }
    /// The cross field `f3 = f1 x f2`.
    pub fn f3(&self) -> &PolyField {
        &self.fields[3]
    }

    pub fn f01(&self) -> &PolyField {
        &self.f01
    }
    pub fn f02(&self) -> &PolyField {
        &self.f02
    }
    pub fn f12(&self) -> &PolyField {
        &self.f12
    }
    pub fn f03(&self) -> &PolyField {
        &self.f03
    }
    pub fn f13(&self) -> &PolyField {
        &self.f13
    }
    pub fn f23(&self) -> &PolyField {
        &self.f23
    }

    /// Cached bracket field by word; `None` for words outside the cache.
    pub fn bracket_word(&self, word: &[usize]) -> Option<&PolyField> {
        match *word {
            [i] if i < 4 => Some(&self.fields[i]),
            [0, 1] => Some(&self.f01),
            [0, 2] => Some(&self.f02),
            [1, 2] => Some(&self.f12),
            [0, 3] => Some(&self.f03),
            [1, 3] => Some(&self.f13),
            [2, 3] => Some(&self.f23),
            [k, i, j] if k < 3 => {
                let m = PAIRS.iter().position(|&p| p == (i, j))?;
                Some(&self.second[k][m])
            }
            _ => None,
        }
    }

    /// First- and optionally second-order bracket lifts at a canonical state.
    ///
    /// `order` is 1 or 2; an order-1 table leaves `second` empty.
    pub fn bracket_table(&self, state: &CanonicalState, order: u8) -> BracketTable {
        let lift = |f: &PolyField| hamiltonian_lift(state, f);
        let second = if order >= 2 {
            let mut table = [[0.0; 3]; 3];
            for (k, row) in table.iter_mut().enumerate() {
                for (m, entry) in row.iter_mut().enumerate() {
                    *entry = lift(&self.second[k][m]);
                }
            }
            Some(table)
        } else {
            None
        };
        BracketTable {
            h1: lift(&self.fields[1]),
            h2: lift(&self.fields[2]),
            h3: lift(&self.fields[3]),
            h01: lift(&self.f01),
            h02: lift(&self.f02),
            h12: lift(&self.f12),
            second,
        }
    }

    /// Recover the covector with prescribed lifts `(<xi,f1>, <xi,f2>, <xi,f3>) = h`
    /// at base point `x`. Fails where `f1, f2` are not linearly independent.
    pub fn covector_from_lifts(&self, x: &Vec3, h: &Vec3, lin_indep_tol: f64) -> Result<Vec3> {
        let f1 = self.fields[1].eval(x);
        let f2 = self.fields[2].eval(x);
        let f3 = cross(&f1, &f2);
        let det = norm_sq(&f3);
        if norm(&f3) <= lin_indep_tol {
            return Err(Error::DegeneratePoint(format!(
                "|f1 x f2| = {:e} at x = {:?}",
                norm(&f3),
                x
            )));
        }
        // Rows (f1, f2, f3) have inverse columns (f2 x f3, f3 x f1, f1 x f2) / det.
        let c1 = cross(&f2, &f3);
        let c2 = cross(&f3, &f1);
        let xi = [
            (h[0] * c1[0] + h[1] * c2[0] + h[2] * f3[0]) / det,
            (h[0] * c1[1] + h[1] * c2[1] + h[2] * f3[1]) / det,
            (h[0] * c1[2] + h[1] * c2[2] + h[2] * f3[2]) / det,
        ];
        Ok(xi)
    }

    /// Value of the maximized Hamiltonian `h0 + sqrt(h1^2 + h2^2)`.
    pub fn maximized_hamiltonian(&self, state: &CanonicalState) -> f64 {
        let h0 = hamiltonian_lift(state, &self.fields[0]);
        let h1 = hamiltonian_lift(state, &self.fields[1]);
        let h2 = hamiltonian_lift(state, &self.fields[2]);
        h0 + (h1 * h1 + h2 * h2).sqrt()
    }
}

/// The drift-plus-disk family `f0 = (0, 0, a*x1)`, `f1 = (1, 0, 0)`,
/// `f2 = (0, 1, x1)` used across the test and verification suites. The
/// parameter `a` selects the classification at the origin: one switching
/// for `a > 1`, smooth bang for `a < 1`, the limit case at `a = 1`.
pub fn drift_family(a: f64) -> ControlSystem {
    use crate::poly::field;
    let f0 = field(&[&[], &[], &[(a, [1, 0, 0])]]);
    let f1 = field(&[&[(1.0, [0, 0, 0])], &[], &[]]);
    let f2 = field(&[&[], &[(1.0, [0, 0, 0])], &[(1.0, [1, 0, 0])]]);
    ControlSystem::new(f0, f1, f2)
}

/// Companion system with commuting control fields (`[f1, f2] = 0`):
/// `f0 = (0, 0, x1)`, `f1 = (1, 0, 0)`, `f2 = (0, 1, 0)`. Its jump is
/// antipodal: the outgoing control is the negative of the incoming one.
pub fn commuting_controls_example() -> ControlSystem {
    use crate::poly::field;
    let f0 = field(&[&[], &[], &[(1.0, [1, 0, 0])]]);
    let f1 = field(&[&[(1.0, [0, 0, 0])], &[], &[]]);
    let f2 = field(&[&[], &[(1.0, [0, 0, 0])], &[]]);
    ControlSystem::new(f0, f1, f2)
}

/// Scale-check helper shared by tests: `xi = c * f3(x) / |f3(x)|^2` realizes
/// prescribed `h3 = c` on the locus `h1 = h2 = 0`.
pub fn locus_covector(sys: &ControlSystem, x: &Vec3, h3: f64) -> Result<Vec3> {
    let f3 = sys.f3().eval(x);
    let n2 = norm_sq(&f3);
    if n2 == 0.0 {
        return Err(Error::DegeneratePoint(format!(
            "f3 vanishes at x = {:?}",
            x
        )));
    }
    Ok(scale(&f3, h3 / n2))
}
