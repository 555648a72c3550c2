//! Float rendering for CSV and JSON reports.

/// Renders `v` with at least nine significant digits, falling back to the
/// shortest round-trip representation when nine are not enough.
pub fn fmt_f64(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0.00000000".to_string();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).max(0) as usize;
    let fixed = format!("{v:.decimals$}");
    if fixed.parse::<f64>() == Ok(v) {
        fixed
    } else {
        format!("{v:?}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig_digits(s: &str) -> usize {
        let mantissa = s.split(['e', 'E']).next().unwrap();
        mantissa.trim_start_matches('-').trim_start_matches(['0', '.']).chars().filter(char::is_ascii_digit).count()
    }

    #[test]
    fn nine_significant_digits() {
        for v in [65.0, -69.5, 1e-5, 0.18452380952380953, -1_000_000.0, 123456789012.0, 1.0 / 3.0] {
            let s = fmt_f64(v);
            assert!(sig_digits(&s) >= 9, "{v} -> {s}");
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(fmt_f64(65.0), "65.0000000");
    }
}
