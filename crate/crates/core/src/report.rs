//! Serialization helpers for machine-readable reports.
//!
//! Every real number is emitted with 17 significant digits so that a report
//! round-trips bit-exactly. Non-finite values are written as `null`.

use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;
use serde_json::value::RawValue;

/// Formats a real with 17 significant digits (`d.dddddddddddddddde±x`).
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn raw(x: f64) -> Box<RawValue> {
    let text = if x.is_finite() { format_real(x) } else { "null".to_string() };
    RawValue::from_string(text).expect("formatted real is valid JSON")
}

/// A real that serializes with 17 significant digits.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        raw(self.0).serialize(s)
    }
}

/// `serialize_with` adapter for `f64` fields.
pub fn real<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    Real(*x).serialize(s)
}

/// `serialize_with` adapter for `Option<f64>` fields.
pub fn opt_real<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => Real(*v).serialize(s),
        None => s.serialize_none(),
    }
}

/// `serialize_with` adapter for real sequences.
pub fn reals<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for &x in xs {
        seq.serialize_element(&Real(x))?;
    }
    seq.end()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, std::f64::consts::PI, -2.5e-300, 1e300] {
            let text = serde_json::to_string(&Real(x)).unwrap();
            let mantissa = text.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.replace('.', "").len(), 17, "{text}");
            assert_eq!(text.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn non_finite_is_null() {
        assert_eq!(serde_json::to_string(&Real(f64::NAN)).unwrap(), "null");
    }
}
