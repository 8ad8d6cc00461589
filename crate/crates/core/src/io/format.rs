//! Deterministic number formatting for the CSV writers.

/// `%.9g`-style text: 9 significant digits, trailing zeros dropped,
/// exponent form outside `[1e-4, 1e9)`. Negative zero prints as `0`.
pub fn sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        return format!("{}e{exp}", trim_zeros(mantissa));
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Shortest text that parses back to the same `f64` bit pattern.
pub fn exact(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    v.to_string()
}
