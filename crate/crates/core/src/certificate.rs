//! Pass/fail certificates produced by every numerical check.
//!
//! A certificate records an inequality `lhs <= rhs` with an absolute slack:
//! `margin = rhs - lhs` and the check passes iff `margin >= -tolerance`.
//! Floats serialize with 17 significant digits; non-finite values become `null`.

use std::collections::BTreeMap;

use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;
use serde_json::value::RawValue;

/// Wrapper that serializes an `f64` with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sig17(pub f64);

pub fn format_sig17(x: f64) -> String {
    if x.is_finite() {
        format!("{:.16e}", x)
    } else {
        "null".to_string()
    }
}

impl Serialize for Sig17 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let raw = RawValue::from_string(format_sig17(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Real(f64),
    Int(i64),
    Text(String),
    Reals(Vec<f64>),
}

impl Serialize for ParamValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ParamValue::Real(x) => Sig17(*x).serialize(serializer),
            ParamValue::Int(i) => serializer.serialize_i64(*i),
            ParamValue::Text(t) => serializer.serialize_str(t),
            ParamValue::Reals(v) => serializer.collect_seq(v.iter().map(|x| Sig17(*x))),
        }
    }
}

impl From<f64> for ParamValue {
    fn from(x: f64) -> Self {
        ParamValue::Real(x)
    }
}
impl From<usize> for ParamValue {
    fn from(x: usize) -> Self {
        ParamValue::Int(x as i64)
    }
}
impl From<u64> for ParamValue {
    fn from(x: u64) -> Self {
        ParamValue::Int(x as i64)
    }
}
impl From<i64> for ParamValue {
    fn from(x: i64) -> Self {
        ParamValue::Int(x)
    }
}
impl From<&str> for ParamValue {
    fn from(x: &str) -> Self {
        ParamValue::Text(x.to_string())
    }
}
impl From<String> for ParamValue {
    fn from(x: String) -> Self {
        ParamValue::Text(x)
    }
}
impl From<Vec<f64>> for ParamValue {
    fn from(x: Vec<f64>) -> Self {
        ParamValue::Reals(x)
    }
}

/// Location (or other data) at which a check is tightest or fails.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub description: String,
    pub values: Vec<f64>,
}

impl Witness {
    pub fn new(description: impl Into<String>, values: Vec<f64>) -> Self {
        Witness { description: description.into(), values }
    }

    /// Witness at a point of C^n, flattened as (x1, y1, x2, y2, ...).
    pub fn at_point(description: impl Into<String>, point: &[crate::C64]) -> Self {
        let values = point.iter().flat_map(|z| [z.re, z.im]).collect();
        Witness { description: description.into(), values }
    }
}

impl Serialize for Witness {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Witness", 2)?;
        s.serialize_field("description", &self.description)?;
        let vals: Vec<Sig17> = self.values.iter().map(|x| Sig17(*x)).collect();
        s.serialize_field("values", &vals)?;
        s.end()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub witness: Option<Witness>,
    pub parameters: BTreeMap<String, ParamValue>,
    pub error: Option<String>,
}

impl Certificate {
    /// Certificate for `lhs <= rhs` up to `tolerance`. NaN on either side fails.
    pub fn upper_bound(check: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let margin = rhs - lhs;
        let pass = !margin.is_nan() && margin >= -tolerance;
        Certificate {
            check: check.into(),
            lhs,
            rhs,
            margin,
            tolerance,
            pass,
            witness: None,
            parameters: BTreeMap::new(),
            error: None,
        }
    }

    /// Certificate recording a failed computation.
    pub fn failed(check: impl Into<String>, error: impl Into<String>) -> Self {
        Certificate {
            check: check.into(),
            lhs: f64::NAN,
            rhs: f64::NAN,
            margin: f64::NAN,
            tolerance: 0.0,
            pass: false,
            witness: None,
            parameters: BTreeMap::new(),
            error: Some(error.into()),
        }
    }

    pub fn with_witness(mut self, witness: Witness) -> Self {
        self.witness = Some(witness);
        self
    }

    pub fn with_param(mut self, name: &str, value: impl Into<ParamValue>) -> Self {
        self.parameters.insert(name.to_string(), value.into());
        self
    }

    /// Same as `margin`; named for checks that sweep many samples.
    pub fn worst_margin(&self) -> f64 {
        self.margin
    }

    /// One-line human summary.
    pub fn summary_line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        match &self.error {
            Some(e) => format!("{verdict} {} error: {e}", self.check),
            None => format!(
                "{verdict} {} lhs={} rhs={} margin={}",
                self.check,
                format_sig17(self.lhs),
                format_sig17(self.rhs),
                format_sig17(self.margin)
            ),
        }
    }
}

impl Serialize for Certificate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Certificate", 9)?;
        s.serialize_field("check", &self.check)?;
        s.serialize_field("pass", &self.pass)?;
        s.serialize_field("lhs", &Sig17(self.lhs))?;
        s.serialize_field("rhs", &Sig17(self.rhs))?;
        s.serialize_field("margin", &Sig17(self.margin))?;
        s.serialize_field("worst_margin", &Sig17(self.margin))?;
        s.serialize_field("tolerance", &Sig17(self.tolerance))?;
        s.serialize_field("witness", &self.witness)?;
        s.serialize_field("parameters", &self.parameters)?;
        if let Some(e) = &self.error {
            s.serialize_field("error", e)?;
        }
        s.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_iff_margin_within_tolerance() {
        assert!(Certificate::upper_bound("a", 1.0, 1.0, 0.0).pass);
        assert!(Certificate::upper_bound("a", 1.0 + 1e-10, 1.0, 1e-9).pass);
        assert!(!Certificate::upper_bound("a", 1.1, 1.0, 1e-9).pass);
        assert!(!Certificate::upper_bound("a", f64::NAN, 1.0, 1e-9).pass);
    }

    #[test]
    fn floats_have_seventeen_digits_and_nan_is_null() {
        let c = Certificate::upper_bound("x", 0.1, f64::INFINITY, 0.0).with_param("s", 0.01);
        let js = serde_json::to_string(&c).unwrap();
        assert!(js.contains("\"lhs\":1.0000000000000001e-1"), "{js}");
        assert!(js.contains("\"rhs\":null"), "{js}");
        let v: serde_json::Value = serde_json::from_str(&js).unwrap();
        assert_eq!(v["lhs"].as_f64().unwrap(), 0.1);
        assert_eq!(v["parameters"]["s"].as_f64().unwrap(), 0.01);
    }

    #[test]
    fn sig17_round_trips() {
        for x in [1.0 / 3.0, -2.5e-300, 6.02214076e23, -0.0] {
            let s = format_sig17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }
}
