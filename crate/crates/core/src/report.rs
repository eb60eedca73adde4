//! Report serialization helpers.
//!
//! Every floating-point value that ends up in a JSON report goes through
//! [`Real`], which writes the number with 17 significant digits so reports
//! are byte-identical across runs and round-trip to the exact `f64`.

use serde::de::Deserializer;
use serde::ser::{Error as _, Serializer};
use serde::{Deserialize, Serialize};

/// An `f64` that serializes as a JSON number with 17 significant digits.
#[derive(Clone, Copy, PartialEq, Debug, Default)]
pub struct Real(pub f64);

impl From<f64> for Real {
    fn from(v: f64) -> Self {
        Real(v)
    }
}

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(S::Error::custom("non-finite value in report"));
        }
        let raw = serde_json::value::RawValue::from_string(format_f64(self.0))
            .map_err(S::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Real(f64::deserialize(d)?))
    }
}

/// One named check inside a verification suite.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub pass: bool,
    pub measured: Real,
    pub tolerance: Real,
    /// Stable machine-readable identifier of the property being checked.
    pub anchor: String,
}

impl CheckRecord {
    /// A check that passes when `measured <= tolerance`.
    pub fn le(name: impl Into<String>, anchor: impl Into<String>, measured: f64, tol: f64) -> Self {
        CheckRecord {
            name: name.into(),
            pass: measured <= tol,
            measured: Real(measured),
            tolerance: Real(tol),
            anchor: anchor.into(),
        }
    }

    /// A check on a boolean condition; `measured` carries a diagnostic value.
    pub fn flag(
        name: impl Into<String>,
        anchor: impl Into<String>,
        pass: bool,
        measured: f64,
    ) -> Self {
        CheckRecord {
            name: name.into(),
            pass,
            measured: Real(measured),
            tolerance: Real(0.0),
            anchor: anchor.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_serializes_with_17_digits_and_round_trips() {
        let v = std::f64::consts::PI;
        let s = serde_json::to_string(&Real(v)).unwrap();
        assert_eq!(s, "3.1415926535897931e0");
        let back: f64 = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn real_handles_negatives_and_zero() {
        for v in [-1.25e-12, 0.0, 2.0_f64.powi(-53), -0.75] {
            let s = serde_json::to_string(&Real(v)).unwrap();
            let back: f64 = serde_json::from_str(&s).unwrap();
            assert_eq!(back, v, "round trip of {v} through {s}");
        }
    }
}
