//! Twelve-significant-digit number formatting shared by every output format.

use serde_json::Value;

pub const SIG_DIGITS: usize = 12;

pub fn round_sig(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{:.*e}", SIG_DIGITS - 1, v).parse().unwrap_or(v)
}

pub fn fmt_sig(v: f64) -> String {
    let r = round_sig(v);
    if r == 0.0 {
        return "0".into();
    }
    if !r.is_finite() {
        return format!("{r}");
    }
    let a = r.abs();
    if !(1e-4..1e12).contains(&a) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

/// Rounds every float inside a JSON value in place.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                if let Some(f) = n.as_f64() {
                    if let Some(m) = serde_json::Number::from_f64(round_sig(f)) {
                        *n = m;
                    }
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_json),
        Value::Object(o) => o.values_mut().for_each(round_json),
        _ => {}
    }
}
