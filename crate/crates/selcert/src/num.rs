//! Fixed-precision number output.
//!
//! Every probability written to a report is first rounded to 12 significant
//! digits; serde_json then prints the shortest decimal that round-trips,
//! which for such a value is exactly those digits.

use serde::Serializer;

pub const SIGNIFICANT_DIGITS: usize = 12;

pub fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

/// Text form used in CSV cells.
pub fn fmt12(x: f64) -> String {
    sig12(x).to_string()
}

pub fn fmt12_opt(x: Option<f64>) -> String {
    x.map(fmt12).unwrap_or_default()
}

pub fn ser12<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(sig12(*x))
}

pub fn ser12_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_f64(sig12(*v)),
        None => s.serialize_none(),
    }
}
