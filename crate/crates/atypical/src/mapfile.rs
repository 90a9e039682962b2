//! The JSON map-file format: parsing, canonical form and content hash.
//!
//! ```json
//! { "name": "broughton", "space": "real", "vars": ["x", "y"],
//!   "components": [ { "terms": [ { "c": "1", "e": [1, 0] }, { "c": "1", "e": [2, 1] } ] } ] }
//! ```
//!
//! Coefficients are strings: integers, finite decimals (`"-1.25"`, `"3e-2"`),
//! fractions (`"a/b"`) and, for `"space": "complex"`, Gaussian rationals such
//! as `"1/2-3i"`. JSON integers are accepted as well; JSON floats are rejected
//! because their decimal text does not determine an exact value.

use std::collections::BTreeSet;
use std::path::Path;

use atypical_core::polymap::ComplexPolyMap;
use atypical_core::{GaussRational, PolyMap, Polynomial};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum MapError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed map JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("need n > p > 0, got n = {n}, p = {p}")]
    Dimensions { n: usize, p: usize },
    #[error("duplicate variable name {0:?}")]
    DuplicateVariable(String),
    #[error("component {component}, term {term}: exponent vector has length {found}, expected {expected}")]
    ExponentLength { component: usize, term: usize, expected: usize, found: usize },
    #[error("component {component}, term {term}: cannot parse coefficient {text}: {reason}")]
    Coefficient { component: usize, term: usize, text: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Real,
    Complex,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RawCoefficient {
    Text(String),
    Number(serde_json::Number),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    c: RawCoefficient,
    e: Vec<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComponent {
    terms: Vec<RawTerm>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMapFile {
    name: String,
    space: Space,
    vars: Vec<String>,
    components: Vec<RawComponent>,
}

// Field order is alphabetical so that serialization has sorted keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CanonicalTerm {
    pub c: String,
    pub e: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CanonicalComponent {
    pub terms: Vec<CanonicalTerm>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CanonicalMapFile {
    pub components: Vec<CanonicalComponent>,
    pub name: String,
    pub space: Space,
    pub vars: Vec<String>,
}

/// A parsed map with its canonical file form and hash.
#[derive(Debug, Clone)]
pub struct LoadedMap {
    /// The real map analysed (the real lift for complex files).
    pub map: PolyMap,
    pub canonical: CanonicalMapFile,
    /// Lower-case hex SHA-256 of [`LoadedMap::canonical_json`].
    pub hash: String,
}

impl LoadedMap {
    pub fn canonical_json(&self) -> String {
        canonical_json(&self.canonical)
    }
}

pub fn canonical_json(file: &CanonicalMapFile) -> String {
    serde_json::to_string(file).expect("canonical map serializes")
}

fn int(v: &str) -> Option<BigInt> {
    let digits = v.strip_prefix(['+', '-']).unwrap_or(v);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    v.parse().ok()
}

/// Exact value of an integer, finite decimal or `a/b` string.
pub fn parse_rational(text: &str) -> Result<BigRational, String> {
    let s = text.trim();
    if s.is_empty() {
        return Err("empty coefficient".into());
    }
    if let Some((a, b)) = s.split_once('/') {
        let num = int(a.trim()).ok_or_else(|| format!("bad numerator {a:?}"))?;
        let b = b.trim();
        if b.starts_with(['+', '-']) {
            return Err("denominator must be an unsigned integer".into());
        }
        let den = int(b).ok_or_else(|| format!("bad denominator {b:?}"))?;
        if den.is_zero() {
            return Err("zero denominator".into());
        }
        return Ok(BigRational::new(num, den));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(k) => {
            let e: i32 = int(&s[k + 1..])
                .and_then(|e| i32::try_from(e).ok())
                .filter(|e| e.abs() <= 4096)
                .ok_or_else(|| format!("bad exponent in {s:?}"))?;
            (&s[..k], e)
        }
        None => (s, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(format!("no digits in {s:?}"));
    }
    if !whole.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(format!("not a decimal or a/b rational: {s:?}"));
    }
    let digits: BigInt = format!("0{whole}{frac}").parse().expect("digits only");
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10u32);
    let mut r = BigRational::from_integer(digits);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if neg { -r } else { r })
}

/// Parses `a`, `bi`, `a+bi` or `a-bi` with rational parts.
pub fn parse_gauss(text: &str) -> Result<GaussRational, String> {
    let s = text.trim();
    let Some(body) = s.strip_suffix('i') else {
        return parse_rational(s).map(GaussRational::real);
    };
    let bytes = body.as_bytes();
    // last sign that is neither leading nor part of a decimal exponent
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (parse_rational(&body[..k])?, &body[k..]),
        None => (BigRational::zero(), body),
    };
    let im = match im.trim() {
        "" | "+" => BigRational::from_integer(1.into()),
        "-" => BigRational::from_integer((-1).into()),
        other => parse_rational(other)?,
    };
    Ok(GaussRational::new(re, im))
}

fn coefficient_text(raw: &RawCoefficient) -> Result<String, String> {
    match raw {
        RawCoefficient::Text(s) => Ok(s.clone()),
        RawCoefficient::Number(n) if n.is_i64() || n.is_u64() => Ok(n.to_string()),
        RawCoefficient::Number(n) => {
            Err(format!("floating JSON number {n} is not exact; write the coefficient as a string"))
        }
    }
}

fn format_gauss(c: &GaussRational) -> String {
    if c.im.is_zero() {
        return c.re.to_string();
    }
    if c.re.is_zero() {
        return format!("{}i", c.im);
    }
    let sign = if c.im.is_negative() { '-' } else { '+' };
    format!("{}{}{}i", c.re, sign, c.im.abs())
}

/// Parses map-file text; terms are merged and zero terms dropped.
pub fn parse_map(text: &str) -> Result<LoadedMap, MapError> {
    let raw: RawMapFile = serde_json::from_str(text)?;
    let n = raw.vars.len();
    let mut seen = BTreeSet::new();
    for v in &raw.vars {
        if !seen.insert(v.as_str()) {
            return Err(MapError::DuplicateVariable(v.clone()));
        }
    }
    let (real_n, real_p) = match raw.space {
        Space::Real => (n, raw.components.len()),
        Space::Complex => (2 * n, 2 * raw.components.len()),
    };
    if !(real_n > real_p && real_p > 0) {
        return Err(MapError::Dimensions { n: real_n, p: real_p });
    }
    let mut complex = ComplexPolyMap::new(raw.name.clone(), n);
    for (ci, comp) in raw.components.iter().enumerate() {
        let mut terms = Vec::with_capacity(comp.terms.len());
        for (ti, t) in comp.terms.iter().enumerate() {
            if t.e.len() != n {
                return Err(MapError::ExponentLength { component: ci, term: ti, expected: n, found: t.e.len() });
            }
            let bad = |reason: String, text: String| MapError::Coefficient { component: ci, term: ti, text, reason };
            let text = coefficient_text(&t.c).map_err(|r| bad(r, format!("{:?}", t.c)))?;
            let c = match raw.space {
                Space::Real => parse_rational(&text).map(GaussRational::real),
                Space::Complex => parse_gauss(&text),
            }
            .map_err(|r| bad(r, format!("{text:?}")))?;
            terms.push((c, t.e.clone()));
        }
        complex.push_component(terms).expect("exponent lengths checked");
    }
    let map = match raw.space {
        Space::Real => {
            let comps = complex
                .components
                .iter()
                .map(|c| Polynomial::from_terms(n, c.iter().map(|(e, g)| (g.re.clone(), e.clone()))))
                .collect::<Result<Vec<_>, _>>()
                .expect("exponent lengths checked");
            PolyMap::new(raw.name.clone(), n, comps)
        }
        Space::Complex => complex.realify(),
    }
    .map_err(|_| MapError::Dimensions { n: real_n, p: real_p })?;
    let canonical = CanonicalMapFile {
        components: complex
            .components
            .iter()
            .map(|c| CanonicalComponent {
                terms: c.iter().map(|(e, g)| CanonicalTerm { c: format_gauss(g), e: e.clone() }).collect(),
            })
            .collect(),
        name: raw.name,
        space: raw.space,
        vars: raw.vars,
    };
    let hash = hex::encode(Sha256::digest(canonical_json(&canonical).as_bytes()));
    Ok(LoadedMap { map, canonical, hash })
}

pub fn load_map(path: &Path) -> Result<LoadedMap, MapError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| MapError::Io { path: path.display().to_string(), source })?;
    parse_map(&text)
}

/// The example maps shipped with the tool, in corpus order.
pub const BUNDLED: [(&str, &str); 8] = [
    ("broughton", include_str!("../maps/broughton.json")),
    ("exfair", include_str!("../maps/exfair.json")),
    ("pz_1_1", include_str!("../maps/pz_1_1.json")),
    ("pz_1_2", include_str!("../maps/pz_1_2.json")),
    ("pz_2_1", include_str!("../maps/pz_2_1.json")),
    ("quasihom", include_str!("../maps/quasihom.json")),
    ("linear", include_str!("../maps/linear.json")),
    ("cube", include_str!("../maps/cube.json")),
];

pub fn bundled(name: &str) -> Option<LoadedMap> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| parse_map(text).expect("bundled maps are valid"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("3").unwrap(), q(3, 1));
        assert_eq!(parse_rational("-1.25").unwrap(), q(-5, 4));
        assert_eq!(parse_rational("0.1").unwrap(), q(1, 10));
        assert_eq!(parse_rational("3e-2").unwrap(), q(3, 100));
        assert_eq!(parse_rational("1.5E2").unwrap(), q(150, 1));
        assert_eq!(parse_rational("-6/4").unwrap(), q(-3, 2));
        assert_eq!(parse_rational(".5").unwrap(), q(1, 2));
        for bad in ["", "1/0", "1/-2", "abc", "1.2.3", "nan", "inf", "0x10", "1e", "."] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn gaussian_rationals() {
        let g = |re, im| GaussRational::new(re, im);
        assert_eq!(parse_gauss("1/2-3/4i").unwrap(), g(q(1, 2), q(-3, 4)));
        assert_eq!(parse_gauss("-i").unwrap(), g(q(0, 1), q(-1, 1)));
        assert_eq!(parse_gauss("2").unwrap(), g(q(2, 1), q(0, 1)));
        assert_eq!(parse_gauss("1e-1+2i").unwrap(), g(q(1, 10), q(2, 1)));
        assert_eq!(parse_gauss("-3i").unwrap(), g(q(0, 1), q(-3, 1)));
        for c in [g(q(1, 2), q(-3, 4)), g(q(0, 1), q(5, 1)), g(q(-7, 3), q(0, 1))] {
            assert_eq!(parse_gauss(&format_gauss(&c)).unwrap(), c);
        }
    }

    #[test]
    fn duplicate_terms_merge() {
        let text = r#"{"name":"d","space":"real","vars":["x","y"],
            "components":[{"terms":[{"c":"1","e":[1,0]},{"c":"1","e":[1,0]},{"c":"2","e":[0,1]},{"c":"-2","e":[0,1]}]}]}"#;
        let m = parse_map(text).unwrap();
        assert_eq!(m.canonical.components[0].terms, vec![CanonicalTerm { c: "2".into(), e: vec![1, 0] }]);
        assert_eq!(m.map.components()[0].n_terms(), 1);
    }

    #[test]
    fn hash_ignores_layout_and_order() {
        let a = r#"{"name":"b","space":"real","vars":["x","y"],"components":[{"terms":[{"c":"1","e":[1,0]},{"c":"2/2","e":[2,1]}]}]}"#;
        let b = r#"{ "components": [ { "terms": [ { "e": [2, 1], "c": "1.0" }, { "c": 1, "e": [1, 0] } ] } ],
                     "vars": ["x", "y"], "space": "real", "name": "b" }"#;
        let (a, b) = (parse_map(a).unwrap(), parse_map(b).unwrap());
        assert_eq!(a.hash, b.hash);
        assert_eq!(a.canonical_json(), b.canonical_json());
        assert!(a.canonical_json().starts_with(r#"{"components":[{"terms":[{"c":"1","e":[1,0]}"#));
    }

    #[test]
    fn distinct_errors() {
        let base = |vars: &str, comps: &str| format!(r#"{{"name":"m","space":"real","vars":{vars},"components":{comps}}}"#);
        assert!(matches!(parse_map("{not json"), Err(MapError::Json(_))));
        let e = parse_map(&base(r#"["x"]"#, r#"[{"terms":[{"c":"1","e":[1]}]}]"#));
        assert!(matches!(e, Err(MapError::Dimensions { n: 1, p: 1 })));
        let e = parse_map(&base(r#"["x","y"]"#, r#"[{"terms":[{"c":"1","e":[1]}]}]"#));
        assert!(matches!(e, Err(MapError::ExponentLength { expected: 2, found: 1, .. })));
        let e = parse_map(&base(r#"["x","y"]"#, r#"[{"terms":[{"c":"1/x","e":[1,0]}]}]"#));
        assert!(matches!(e, Err(MapError::Coefficient { .. })));
        let e = parse_map(&base(r#"["x","y"]"#, r#"[{"terms":[{"c":0.1,"e":[1,0]}]}]"#));
        assert!(matches!(e, Err(MapError::Coefficient { .. })));
        let e = parse_map(&base(r#"["x","y"]"#, r#"[{"terms":[{"c":"2i","e":[1,0]}]}]"#));
        assert!(matches!(e, Err(MapError::Coefficient { .. })));
        let e = parse_map(&base(r#"["x","x"]"#, r#"[{"terms":[{"c":"1","e":[1,0]}]}]"#));
        assert!(matches!(e, Err(MapError::DuplicateVariable(_))));
    }

    #[test]
    fn bundled_maps_parse() {
        for (name, _) in BUNDLED {
            let m = bundled(name).unwrap();
            assert_eq!(m.map.name(), name);
        }
        let pz = bundled("pz_2_1").unwrap();
        assert_eq!((pz.map.n(), pz.map.p()), (6, 2));
        assert_eq!((bundled("exfair").unwrap().map.n(), bundled("exfair").unwrap().map.p()), (3, 2));
    }
}
