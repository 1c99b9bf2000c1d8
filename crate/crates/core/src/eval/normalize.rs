//! Canonical forms for literal terms so that equal values compare equal
//! regardless of how an endpoint serialized them.
//!
//! - integer-family and decimal literals share one canonical form: integral
//!   values become `xsd:integer`, others `xsd:decimal` without redundant zeros
//! - float/double become `xsd:double` in shortest round-trip form; integral
//!   doubles below 1e15 also collapse to `xsd:integer`
//! - `xsd:boolean` becomes `true`/`false`
//! - `xsd:dateTime` with an offset is shifted to UTC with a `Z` suffix;
//!   `xsd:date` keeps its day and writes a zero offset as `Z`
//! - language tags are lowercased; `xsd:string` is dropped

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, Utc};

use super::{RdfTerm, TermKind};
use crate::sparql::XSD_NS;

const INTEGER_TYPES: [&str; 13] = [
    "integer",
    "int",
    "long",
    "short",
    "byte",
    "nonNegativeInteger",
    "positiveInteger",
    "negativeInteger",
    "nonPositiveInteger",
    "unsignedLong",
    "unsignedInt",
    "unsignedShort",
    "unsignedByte",
];

fn xsd(local: &str) -> String {
    format!("{XSD_NS}{local}")
}

/// Normalizes `t`; see the module docs for the rules.
pub fn normalize_term(t: &RdfTerm) -> RdfTerm {
    normalize_term_checked(t).0
}

/// Like [`normalize_term`], also reporting whether a typed literal's lexical
/// form could not be parsed (it is then kept as-is and compared lexically).
pub fn normalize_term_checked(t: &RdfTerm) -> (RdfTerm, bool) {
    if t.kind != TermKind::Literal {
        return (RdfTerm { kind: t.kind, value: t.value.clone(), datatype: None, lang: None }, false);
    }
    if let Some(lang) = &t.lang {
        return (RdfTerm::lang(t.value.clone(), lang.to_ascii_lowercase()), false);
    }
    let Some(dt) = t.datatype.as_deref() else {
        return (t.clone(), false);
    };
    let Some(local) = dt.strip_prefix(XSD_NS) else {
        return (t.clone(), false);
    };
    let v = t.value.trim();
    let out = match local {
        "string" => Some(RdfTerm::literal(t.value.clone())),
        "decimal" => canonical_decimal(v).map(decimal_term),
        l if INTEGER_TYPES.contains(&l) => {
            canonical_decimal(v).filter(|(_, frac)| frac.is_empty()).map(decimal_term)
        }
        "double" | "float" => canonical_double(v),
        "boolean" => match v {
            "true" | "1" => Some(RdfTerm::typed("true", xsd("boolean"))),
            "false" | "0" => Some(RdfTerm::typed("false", xsd("boolean"))),
            _ => None,
        },
        "dateTime" => canonical_datetime(v).map(|s| RdfTerm::typed(s, xsd("dateTime"))),
        "date" => canonical_date(v).map(|s| RdfTerm::typed(s, xsd("date"))),
        _ => return (t.clone(), false),
    };
    match out {
        Some(n) => (n, false),
        None => (t.clone(), true),
    }
}

/// Splits a decimal lexical form into canonical (signed integer part,
/// fraction digits without trailing zeros).
fn canonical_decimal(v: &str) -> Option<(String, String)> {
    let (neg, digits) = match v.as_bytes().first()? {
        b'-' => (true, &v[1..]),
        b'+' => (false, &v[1..]),
        _ => (false, v),
    };
    let (int, frac) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let int = int.trim_start_matches('0');
    let frac = frac.trim_end_matches('0');
    let int = if int.is_empty() { "0" } else { int };
    let zero = int == "0" && frac.is_empty();
    let sign = if neg && !zero { "-" } else { "" };
    Some((format!("{sign}{int}"), frac.to_string()))
}

fn decimal_term((int, frac): (String, String)) -> RdfTerm {
    if frac.is_empty() {
        RdfTerm::typed(int, xsd("integer"))
    } else {
        RdfTerm::typed(format!("{int}.{frac}"), xsd("decimal"))
    }
}

fn canonical_double(v: &str) -> Option<RdfTerm> {
    let f: f64 = match v {
        "INF" | "+INF" => f64::INFINITY,
        "-INF" => f64::NEG_INFINITY,
        "NaN" => f64::NAN,
        _ => {
            // Rust accepts "inf"/"nan" spellings XSD does not.
            if v.chars().any(|c| c.is_ascii_alphabetic() && c != 'e' && c != 'E') {
                return None;
            }
            v.parse().ok()?
        }
    };
    if f.is_nan() {
        return Some(RdfTerm::typed("NaN", xsd("double")));
    }
    if f.is_infinite() {
        let s = if f > 0.0 { "INF" } else { "-INF" };
        return Some(RdfTerm::typed(s, xsd("double")));
    }
    if f.fract() == 0.0 && f.abs() < 1e15 {
        let i = f as i64;
        return Some(RdfTerm::typed(i.to_string(), xsd("integer")));
    }
    Some(RdfTerm::typed(format!("{f:?}"), xsd("double")))
}

fn canonical_datetime(v: &str) -> Option<String> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(v) {
        return Some(dt.with_timezone(&Utc).to_rfc3339_opts(SecondsFormat::AutoSi, true));
    }
    let naive = NaiveDateTime::parse_from_str(v, "%Y-%m-%dT%H:%M:%S%.f").ok()?;
    let s = naive.format("%Y-%m-%dT%H:%M:%S%.f").to_string();
    Some(s)
}

fn canonical_date(v: &str) -> Option<String> {
    if v.len() < 10 {
        return None;
    }
    let (day, tz) = v.split_at(10);
    let d = NaiveDate::parse_from_str(day, "%Y-%m-%d").ok()?;
    let tz = match tz {
        "" => "",
        "Z" | "+00:00" | "-00:00" => "Z",
        other => {
            let ok = other.len() == 6
                && matches!(other.as_bytes()[0], b'+' | b'-')
                && other.as_bytes()[3] == b':';
            if !ok {
                return None;
            }
            other
        }
    };
    Some(format!("{}{tz}", d.format("%Y-%m-%d")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn typed(v: &str, local: &str) -> RdfTerm {
        RdfTerm::typed(v, xsd(local))
    }

    #[test]
    fn integers_and_decimals() {
        assert_eq!(normalize_term(&typed("01", "integer")), typed("1", "integer"));
        assert_eq!(normalize_term(&typed("+007", "int")), typed("7", "integer"));
        assert_eq!(normalize_term(&typed("-0", "integer")), typed("0", "integer"));
        assert_eq!(normalize_term(&typed("2.50", "decimal")), typed("2.5", "decimal"));
        assert_eq!(normalize_term(&typed("3.000", "decimal")), typed("3", "integer"));
        assert_eq!(normalize_term(&typed(".5", "decimal")), typed("0.5", "decimal"));
    }

    #[test]
    fn doubles() {
        assert_eq!(normalize_term(&typed("2.5E0", "double")), typed("2.5", "double"));
        assert_eq!(normalize_term(&typed("1.0e3", "float")), typed("1000", "integer"));
        assert_eq!(normalize_term(&typed("INF", "double")), typed("INF", "double"));
        let (t, flagged) = normalize_term_checked(&typed("lots", "double"));
        assert!(flagged);
        assert_eq!(t, typed("lots", "double"));
    }

    #[test]
    fn lang_string_bool_dates() {
        assert_eq!(normalize_term(&RdfTerm::lang("hello", "EN")), RdfTerm::lang("hello", "en"));
        assert_eq!(normalize_term(&typed("x", "string")), RdfTerm::literal("x"));
        assert_eq!(normalize_term(&typed("1", "boolean")), typed("true", "boolean"));
        assert_eq!(
            normalize_term(&typed("1928-07-26T02:00:00+02:00", "dateTime")),
            typed("1928-07-26T00:00:00Z", "dateTime")
        );
        assert_eq!(normalize_term(&typed("1928-07-26+00:00", "date")), typed("1928-07-26Z", "date"));
        assert_eq!(normalize_term(&typed("1928-07-26", "date")), typed("1928-07-26", "date"));
        assert!(normalize_term_checked(&typed("26/07/1928", "date")).1);
    }

    /// Independent decimal comparison: align fraction lengths and compare
    /// the resulting integer digit strings.
    fn oracle_decimal_eq(a: &str, b: &str) -> bool {
        fn parts(s: &str) -> (bool, String, String) {
            let (neg, s) = match s.strip_prefix('-') {
                Some(r) => (true, r),
                None => (false, s.strip_prefix('+').unwrap_or(s)),
            };
            let (i, f) = s.split_once('.').unwrap_or((s, ""));
            (neg, i.to_string(), f.to_string())
        }
        let (na, ia, fa) = parts(a);
        let (nb, ib, fb) = parts(b);
        let w = fa.len().max(fb.len());
        let pad = |i: &str, f: &str| {
            let mut d = format!("{i}{f}{}", "0".repeat(w - f.len()));
            while d.len() > 1 && d.starts_with('0') {
                d.remove(0);
            }
            d
        };
        let (da, db) = (pad(&ia, &fa), pad(&ib, &fb));
        let zero = |d: &str| d.bytes().all(|c| c == b'0');
        if zero(&da) && zero(&db) {
            return true;
        }
        na == nb && da == db
    }

    proptest! {
        #[test]
        fn decimal_equality_matches_oracle(
            a in "[+-]?[0-9]{1,4}(\\.[0-9]{0,4})?",
            b in "[+-]?[0-9]{1,4}(\\.[0-9]{0,4})?",
        ) {
            let na = normalize_term(&typed(&a, "decimal"));
            let nb = normalize_term(&typed(&b, "decimal"));
            prop_assert_eq!(na == nb, oracle_decimal_eq(&a, &b), "{} vs {}", a, b);
        }

        #[test]
        fn normalization_is_idempotent(
            v in "[+-]?[0-9]{0,4}(\\.[0-9]{0,3})?([eE][0-9])?|true|false|[a-z]{0,4}|19[0-9]{2}-0[1-9]-1[0-9](T0[0-9]:00:00(Z|\\+0[0-9]:00))?",
            dt in prop::sample::select(vec!["integer", "decimal", "double", "float", "boolean", "dateTime", "date", "string", "gYear"]),
            lang in prop::option::of("[a-zA-Z]{2}"),
        ) {
            let t = match lang {
                Some(l) => RdfTerm::lang(v, l),
                None => typed(&v, dt),
            };
            let once = normalize_term(&t);
            prop_assert_eq!(normalize_term(&once), once);
        }
    }
}
