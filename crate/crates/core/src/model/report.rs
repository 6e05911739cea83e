//! JSON encodings shared by every report: rationals as `"p/q"` strings,
//! polynomials as `[[coefficient, monomial], ...]` term lists.

use serde_json::{json, Value};

use crate::algebra::rational::{format_rational, Rational};
use crate::algebra::{MultiPoly, RatMatrix};
use crate::series::TruncatedSeries;

pub fn rational(r: &Rational) -> Value {
    Value::String(format_rational(r))
}

pub fn rationals(v: &[Rational]) -> Value {
    Value::Array(v.iter().map(rational).collect())
}

pub fn poly(p: &MultiPoly) -> Value {
    Value::Array(
        p.term_strings()
            .into_iter()
            .map(|(c, m)| json!([c, m]))
            .collect(),
    )
}

pub fn polys(v: &[MultiPoly]) -> Value {
    Value::Array(v.iter().map(poly).collect())
}

pub fn matrix(m: &RatMatrix) -> Value {
    Value::Array(m.to_rows().iter().map(|r| rationals(r)).collect())
}

/// `{"terms": [[exponent, poly], ...], "trunc": n | null}`.
pub fn series(s: &TruncatedSeries) -> Value {
    let terms: Vec<Value> = s.terms().map(|(e, c)| json!([e, poly(c)])).collect();
    json!({ "terms": terms, "trunc": s.trunc() })
}

/// Serializes with a trailing newline. `serde_json` maps keep keys sorted,
/// so equal reports give identical bytes.
pub fn to_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::rational::{rat, ratio};

    #[test]
    fn encodings() {
        let ev: Vec<i64> = vec![-1, 2, 5, 8];
        assert_eq!(json!({ "resonances": ev }).to_string(), r#"{"resonances":[-1,2,5,8]}"#);
        let empty: Vec<Vec<Rational>> = Vec::new();
        assert_eq!(json!(empty.iter().map(|v| rationals(v)).collect::<Vec<_>>()).to_string(), "[]");
        assert_eq!(rational(&ratio(-3, 6)), json!("-1/2"));
        let p = MultiPoly::var("r2").scale(&rat(3)) - MultiPoly::one();
        assert_eq!(poly(&p), json!([["3", "r2"], ["-1", "1"]]));
        assert_eq!(Value::String(p.to_string()), json!("3*r2 - 1"));
    }
}
