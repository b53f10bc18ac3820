//! On-disk description of a control system: three polynomial fields with
//! coefficients that are either plain numbers or references to named
//! parameters, so one file describes a whole family.
//!
//! ```json
//! {
//!   "name": "drift-family",
//!   "params": { "alpha": 2.0 },
//!   "f0": [[], [], [{ "c": "alpha", "p": [1, 0, 0] }]],
//!   "f1": [[{ "c": 1.0, "p": [0, 0, 0] }], [], []],
//!   "f2": [[], [{ "c": 1.0, "p": [0, 0, 0] }], [{ "c": 1.0, "p": [1, 0, 0] }]]
//! }
//! ```
//!
//! A coefficient expression is `[-][number*]ident`, e.g. `"alpha"`,
//! `"-alpha"`, `"0.5*alpha"`. Parameter values come from the file's `params`
//! map, overridden entry-wise by the caller.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{Monomial, Poly, PolyField};
use crate::system::ControlSystem;

/// One monomial: coefficient times `x1^p[0] x2^p[1] x3^p[2]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonomialSpec {
    pub c: CoeffSpec,
    pub p: [u32; 3],
}

/// A literal coefficient or a parameter expression.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoeffSpec {
    Num(f64),
    Expr(String),
}

/// Component-wise monomial lists for one vector field.
pub type FieldSpec = [Vec<MonomialSpec>; 3];

/// The file format: a named system, optional parameters, three fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpecFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    pub f0: FieldSpec,
    pub f1: FieldSpec,
    pub f2: FieldSpec,
}

/// Parse `[-][number*]ident` into a scale factor and the parameter name.
fn parse_coeff_expr(s: &str) -> Result<(f64, &str)> {
    let bad = |msg: &str| Error::SpecFile(format!("coefficient expression {s:?}: {msg}"));
    let t = s.trim();
    let (sign, rest) = match t.strip_prefix('-') {
        Some(r) => (-1.0, r.trim_start()),
        None => (1.0, t),
    };
    let (factor, ident) = match rest.split_once('*') {
        Some((num, id)) => {
            let f: f64 = num
                .trim()
                .parse()
                .map_err(|_| bad("numeric factor does not parse"))?;
            (f, id.trim())
        }
        None => (1.0, rest),
    };
    if ident.is_empty() {
        return Err(bad("missing parameter name"));
    }
    let mut chars = ident.chars();
    let first = chars.next().unwrap();
    if !(first.is_ascii_alphabetic() || first == '_')
        || !chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
    {
        return Err(bad("parameter name must be an identifier"));
    }
    Ok((sign * factor, ident))
}

impl CoeffSpec {
    fn resolve(&self, params: &BTreeMap<String, f64>) -> Result<f64> {
        match self {
            CoeffSpec::Num(v) => Ok(*v),
            CoeffSpec::Expr(s) => {
                let (factor, name) = parse_coeff_expr(s)?;
                let value = params.get(name).ok_or_else(|| {
                    Error::SpecFile(format!("unresolved parameter {name:?} in {s:?}"))
                })?;
                Ok(factor * value)
            }
        }
    }
}

fn resolve_field(spec: &FieldSpec, params: &BTreeMap<String, f64>) -> Result<PolyField> {
    let mut comps: [Poly; 3] = Default::default();
    for (i, comp) in spec.iter().enumerate() {
        let terms = comp
            .iter()
            .map(|m| Ok(Monomial::new(m.c.resolve(params)?, m.p)))
            .collect::<Result<Vec<_>>>()?;
        comps[i] = Poly::from_terms(terms);
    }
    Ok(PolyField::new(comps))
}

fn field_to_spec(field: &PolyField) -> FieldSpec {
    let comp = |i: usize| {
        field.components[i]
            .terms()
            .iter()
            .map(|m| MonomialSpec {
                c: CoeffSpec::Num(m.coeff),
                p: m.powers,
            })
            .collect()
    };
    [comp(0), comp(1), comp(2)]
}

impl SystemSpecFile {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::SpecFile(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serialization cannot fail")
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Snapshot a concrete system (numeric coefficients, no parameters).
    pub fn from_system(name: &str, sys: &ControlSystem) -> Self {
        SystemSpecFile {
            name: name.to_string(),
            params: BTreeMap::new(),
            f0: field_to_spec(sys.f0()),
            f1: field_to_spec(sys.f1()),
            f2: field_to_spec(sys.f2()),
        }
    }

    /// Effective parameter map: the file's values overridden entry-wise.
    /// Overriding a name the file does not declare is an error, since it is
    /// almost certainly a typo.
    pub fn effective_params(
        &self,
        overrides: &BTreeMap<String, f64>,
    ) -> Result<BTreeMap<String, f64>> {
        let mut params = self.params.clone();
        for (k, v) in overrides {
            if !params.contains_key(k) {
                return Err(Error::InvalidInput(format!(
                    "unknown parameter {k:?}; the file declares {:?}",
                    self.params.keys().collect::<Vec<_>>()
                )));
            }
            params.insert(k.clone(), *v);
        }
        Ok(params)
    }

    /// Build the system with all coefficients resolved.
    pub fn resolve(&self, overrides: &BTreeMap<String, f64>) -> Result<ControlSystem> {
        let params = self.effective_params(overrides)?;
        let f0 = resolve_field(&self.f0, &params)?;
        let f1 = resolve_field(&self.f1, &params)?;
        let f2 = resolve_field(&self.f2, &params)?;
        Ok(ControlSystem::new(f0, f1, f2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::drift_family;

    const FAMILY_JSON: &str = r#"{
        "name": "drift-family",
        "params": { "alpha": 2.0 },
        "f0": [[], [], [{ "c": "alpha", "p": [1, 0, 0] }]],
        "f1": [[{ "c": 1.0, "p": [0, 0, 0] }], [], []],
        "f2": [[], [{ "c": 1.0, "p": [0, 0, 0] }], [{ "c": 1.0, "p": [1, 0, 0] }]]
    }"#;

    #[test]
    fn parses_and_matches_builtin_family() {
        let spec = SystemSpecFile::from_json(FAMILY_JSON).unwrap();
        let sys = spec.resolve(&BTreeMap::new()).unwrap();
        let reference = drift_family(2.0);
        for i in 0..4 {
            assert_eq!(sys.f(i), reference.f(i));
        }
    }

    #[test]
    fn overrides_rescale_the_family() {
        let spec = SystemSpecFile::from_json(FAMILY_JSON).unwrap();
        let overrides = BTreeMap::from([("alpha".to_string(), 0.5)]);
        let sys = spec.resolve(&overrides).unwrap();
        assert_eq!(sys.f0(), drift_family(0.5).f0());
    }

    #[test]
    fn unknown_override_is_rejected() {
        let spec = SystemSpecFile::from_json(FAMILY_JSON).unwrap();
        let overrides = BTreeMap::from([("alhpa".to_string(), 0.5)]);
        assert!(matches!(
            spec.resolve(&overrides),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn coefficient_expressions() {
        let params = BTreeMap::from([("a".to_string(), 3.0)]);
        for (expr, want) in [
            ("a", 3.0),
            ("-a", -3.0),
            ("2*a", 6.0),
            ("-0.5*a", -1.5),
            (" 2 * a ", 6.0),
        ] {
            let got = CoeffSpec::Expr(expr.to_string()).resolve(&params).unwrap();
            assert_eq!(got, want, "{expr}");
        }
        for bad in ["", "2*", "*a", "a*b*c", "2a", "-", "1.0", "a b"] {
            assert!(
                CoeffSpec::Expr(bad.to_string()).resolve(&params).is_err(),
                "{bad:?} should not parse"
            );
        }
    }

    #[test]
    fn unresolved_parameter_is_an_error() {
        let json = r#"{
            "name": "x",
            "f0": [[{ "c": "beta", "p": [0, 0, 0] }], [], []],
            "f1": [[{ "c": 1.0, "p": [0, 0, 0] }], [], []],
            "f2": [[], [{ "c": 1.0, "p": [0, 0, 0] }], []]
        }"#;
        let spec = SystemSpecFile::from_json(json).unwrap();
        let err = spec.resolve(&BTreeMap::new()).unwrap_err();
        assert!(matches!(err, Error::SpecFile(_)));
    }

    #[test]
    fn snapshot_round_trips() {
        let sys = drift_family(2.0);
        let spec = SystemSpecFile::from_system("snapshot", &sys);
        let json = spec.to_json();
        let back = SystemSpecFile::from_json(&json)
            .unwrap()
            .resolve(&BTreeMap::new())
            .unwrap();
        for i in 0..4 {
            assert_eq!(back.f(i), sys.f(i));
        }
    }

    #[test]
    fn malformed_json_is_a_spec_error() {
        assert!(matches!(
            SystemSpecFile::from_json("{ not json"),
            Err(Error::SpecFile(_))
        ));
        // Unknown top-level keys are rejected too.
        assert!(matches!(
            SystemSpecFile::from_json(r#"{ "name": "x", "f0": [[],[],[]], "f1": [[],[],[]], "f2": [[],[],[]], "extra": 1 }"#),
            Err(Error::SpecFile(_))
        ));
    }
}
