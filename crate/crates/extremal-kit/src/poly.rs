//! Polynomial vector fields on R^3 with exact coefficient arithmetic.
//!
//! Fields are stored as explicit monomial lists so Lie brackets can be
//! computed symbolically and compared coefficient-by-coefficient. All
//! operations keep results in canonical form: monomials sorted in graded
//! lexicographic order, duplicates merged, zero coefficients dropped.

use serde::{Deserialize, Serialize};

use crate::vec3::{Mat3, Vec3};

/// One term `coeff * x1^p1 * x2^p2 * x3^p3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: [u32; 3],
}

impl Monomial {
    pub fn new(coeff: f64, powers: [u32; 3]) -> Self {
        Monomial { coeff, powers }
    }

    pub fn degree(&self) -> u32 {
        self.powers.iter().sum()
    }

    fn eval(&self, x: &Vec3) -> f64 {
        self.coeff
            * x[0].powi(self.powers[0] as i32)
            * x[1].powi(self.powers[1] as i32)
            * x[2].powi(self.powers[2] as i32)
    }
}

/// Graded-lex key: total degree first, then the exponent triple.
fn gradedlex_key(m: &Monomial) -> (u32, [u32; 3]) {
    (m.degree(), m.powers)
}

/// Scalar polynomial in canonical form.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Poly {
    terms: Vec<Monomial>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Poly::from_terms(vec![Monomial::new(c, [0, 0, 0])])
    }

    /// Build from arbitrary terms, normalizing to canonical form.
    pub fn from_terms(terms: Vec<Monomial>) -> Self {
        let mut p = Poly { terms };
        p.canonicalize();
        p
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(Monomial::degree).max().unwrap_or(0)
    }

    fn canonicalize(&mut self) {
        self.terms.sort_by_key(gradedlex_key);
        let mut merged: Vec<Monomial> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match merged.last_mut() {
                Some(last) if last.powers == t.powers => last.coeff += t.coeff,
                _ => merged.push(t),
            }
        }
        merged.retain(|m| m.coeff != 0.0);
        self.terms = merged;
    }

    pub fn eval(&self, x: &Vec3) -> f64 {
        // Fold from +0.0 rather than `sum()`: the standard sum of an empty
        // f64 iterator is -0.0, which would leak into atan2 conventions.
        self.terms.iter().map(|m| m.eval(x)).fold(0.0, |a, b| a + b)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Poly::from_terms(terms)
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly::from_terms(
            self.terms
                .iter()
                .map(|m| Monomial::new(m.coeff * s, m.powers))
                .collect(),
        )
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push(Monomial::new(
                    a.coeff * b.coeff,
                    [
                        a.powers[0] + b.powers[0],
                        a.powers[1] + b.powers[1],
                        a.powers[2] + b.powers[2],
                    ],
                ));
            }
        }
        Poly::from_terms(terms)
    }

    /// Partial derivative with respect to coordinate `j` (0-based).
    pub fn partial(&self, j: usize) -> Poly {
        let terms = self
            .terms
            .iter()
            .filter(|m| m.powers[j] > 0)
            .map(|m| {
                let mut p = m.powers;
                p[j] -= 1;
                Monomial::new(m.coeff * m.powers[j] as f64, p)
            })
            .collect();
        Poly::from_terms(terms)
    }

    /// Evaluate the partial derivative at a point without building the
    /// derivative polynomial.
    pub fn partial_eval(&self, j: usize, x: &Vec3) -> f64 {
        self.terms
            .iter()
            .filter(|m| m.powers[j] > 0)
            .map(|m| {
                let mut p = m.powers;
                p[j] -= 1;
                Monomial::new(m.coeff * m.powers[j] as f64, p).eval(x)
            })
            .fold(0.0, |a, b| a + b)
    }
}

/// Polynomial vector field on R^3: one `Poly` per component.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PolyField {
    pub components: [Poly; 3],
}

impl PolyField {
    pub fn new(components: [Poly; 3]) -> Self {
        PolyField { components }
    }

    pub fn zero() -> Self {
        PolyField::default()
    }

    /// Constant vector field.
    pub fn constant(v: Vec3) -> Self {
        PolyField::new([
            Poly::constant(v[0]),
            Poly::constant(v[1]),
            Poly::constant(v[2]),
        ])
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Poly::is_zero)
    }

    pub fn degree(&self) -> u32 {
        self.components.iter().map(Poly::degree).max().unwrap_or(0)
    }

    /// Evaluate the field at a point.
    pub fn eval(&self, x: &Vec3) -> Vec3 {
        [
            self.components[0].eval(x),
            self.components[1].eval(x),
            self.components[2].eval(x),
        ]
    }

    /// Jacobian matrix at a point; entry `(i, j)` is `d f_i / d x_j`.
    pub fn jacobian(&self, x: &Vec3) -> Mat3 {
        let mut jac = [[0.0; 3]; 3];
        for (i, comp) in self.components.iter().enumerate() {
            for j in 0..3 {
                jac[i][j] = comp.partial_eval(j, x);
            }
        }
        jac
    }

    pub fn add(&self, other: &PolyField) -> PolyField {
        PolyField::new([
            self.components[0].add(&other.components[0]),
            self.components[1].add(&other.components[1]),
            self.components[2].add(&other.components[2]),
        ])
    }

    pub fn sub(&self, other: &PolyField) -> PolyField {
        PolyField::new([
            self.components[0].sub(&other.components[0]),
            self.components[1].sub(&other.components[1]),
            self.components[2].sub(&other.components[2]),
        ])
    }

    pub fn scale(&self, s: f64) -> PolyField {
        PolyField::new([
            self.components[0].scale(s),
            self.components[1].scale(s),
            self.components[2].scale(s),
        ])
    }

    /// Lie bracket `[f, g] = Dg . f - Df . g`, computed symbolically.
    ///
    /// Sign convention: the Jacobian of the second argument acts on the
    /// first. This is the convention compatible with the canonical Poisson
    /// bracket on lifted Hamiltonians, which a finite-difference test pins
    /// down elsewhere.
    pub fn lie_bracket(&self, other: &PolyField) -> PolyField {
        let mut comps: [Poly; 3] = Default::default();
        for (i, comp) in comps.iter_mut().enumerate() {
            let mut acc = Poly::zero();
            for j in 0..3 {
                // (Dg . f)_i picks up dg_i/dx_j * f_j, and symmetrically.
                let dg = other.components[i].partial(j);
                let df = self.components[i].partial(j);
                acc = acc
                    .add(&dg.mul(&self.components[j]))
                    .sub(&df.mul(&other.components[j]));
            }
            *comp = acc;
        }
        PolyField::new(comps)
    }

    /// Componentwise polynomial cross product.
    pub fn cross(&self, other: &PolyField) -> PolyField {
        let a = &self.components;
        let b = &other.components;
        PolyField::new([
            a[1].mul(&b[2]).sub(&a[2].mul(&b[1])),
            a[2].mul(&b[0]).sub(&a[0].mul(&b[2])),
            a[0].mul(&b[1]).sub(&a[1].mul(&b[0])),
        ])
    }
}

/// Convenience constructor used heavily in tests and examples:
/// `field(&[&[(c, [p1,p2,p3]), ...], ...])` with one term slice per component.
pub fn field(component_terms: &[&[(f64, [u32; 3])]; 3]) -> PolyField {
    let build = |terms: &[(f64, [u32; 3])]| {
        Poly::from_terms(terms.iter().map(|&(c, p)| Monomial::new(c, p)).collect())
    };
    PolyField::new([
        build(component_terms[0]),
        build(component_terms[1]),
        build(component_terms[2]),
    ])
}
