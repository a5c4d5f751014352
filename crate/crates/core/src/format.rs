//! Compact decimal formatting for CSV output.

/// `%.9g`-style formatting: nine significant digits, trailing zeros
/// trimmed, exponent form outside [1e-4, 1e9).
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let sci = format!("{x:.8e}");
    let (mant, e) = sci.split_once('e').expect("exponent present");
    let e: i32 = e.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) || !(-4..9).contains(&e) {
        let mant = trim_zeros(mant);
        return format!("{mant}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs());
    }
    let decimals = (8 - e).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
