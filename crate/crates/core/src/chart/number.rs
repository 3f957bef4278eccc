//! Numeric lexer for chart text ("$1,234", "12.44 percent", "3.5M", "1e6").

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("not numeric: {0:?}")]
pub struct NotNumeric(pub String);

const CURRENCY: &[char] = &['$', '€', '£', '¥', '₹', '₩'];
const PERCENT_WORDS: &[&str] = &["percent", "per cent", "pct"];

/// Parses a numeric token as it appears on an axis label or in an answer.
///
/// Accepted grammar, after trimming:
/// `[sign] [currency] [sign] digits[,ddd]*[.digits] [e[sign]digits] [K|M|B] [% | percent]`.
/// Only `.` is a decimal separator and `,` a thousands separator; thousands
/// groups must have exactly three digits.
pub fn parse_number(token: &str) -> Result<f64, NotNumeric> {
    let fail = || NotNumeric(token.to_string());
    let mut s = token.trim().to_lowercase();

    for word in PERCENT_WORDS {
        if let Some(stripped) = s.strip_suffix(word) {
            s = stripped.trim_end().to_string();
            break;
        }
    }
    if let Some(stripped) = s.strip_suffix('%') {
        s = stripped.trim_end().to_string();
    }

    let mut multiplier = 1.0;
    if let Some(last) = s.chars().last() {
        let scale = match last {
            'k' => Some(1e3),
            'm' => Some(1e6),
            'b' => Some(1e9),
            _ => None,
        };
        if let Some(scale) = scale {
            multiplier = scale;
            s.pop();
            s = s.trim_end().to_string();
        }
    }

    let mut negative = false;
    let mut rest = s.as_str();
    loop {
        let before = rest;
        if let Some(r) = rest.strip_prefix('-').or_else(|| rest.strip_prefix('−')) {
            if negative {
                return Err(fail());
            }
            negative = true;
            rest = r;
        } else if let Some(r) = rest.strip_prefix('+') {
            rest = r;
        } else if let Some(c) = rest.chars().next().filter(|c| CURRENCY.contains(c)) {
            rest = &rest[c.len_utf8()..];
        }
        if before == rest {
            break;
        }
    }

    let core = strip_thousands(rest.trim_start()).ok_or_else(fail)?;
    if !is_decimal_literal(&core) {
        return Err(fail());
    }
    let value: f64 = core.parse().map_err(|_| fail())?;
    let value = value * multiplier;
    if !value.is_finite() {
        return Err(fail());
    }
    Ok(if negative { -value } else { value })
}

/// Removes `,` thousands separators, rejecting malformed grouping.
fn strip_thousands(s: &str) -> Option<String> {
    if !s.contains(',') {
        return Some(s.to_string());
    }
    let (int_part, tail) = match s.find(['.', 'e']) {
        Some(i) => (&s[..i], &s[i..]),
        None => (s, ""),
    };
    if tail.contains(',') {
        return None;
    }
    let groups: Vec<&str> = int_part.split(',').collect();
    let first = groups[0];
    if first.is_empty() || first.len() > 3 || !first.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if groups[1..]
        .iter()
        .any(|g| g.len() != 3 || !g.bytes().all(|b| b.is_ascii_digit()))
    {
        return None;
    }
    Some(format!("{}{}", groups.concat(), tail))
}

/// `digits[.digits][e[+-]digits]` or `.digits[...]`; rejects "inf", "nan" and
/// anything else `f64::from_str` would otherwise accept.
fn is_decimal_literal(s: &str) -> bool {
    let b = s.as_bytes();
    let mut i = 0;
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let mut mantissa_digits = i - int_start;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        mantissa_digits += i - frac_start;
    }
    if mantissa_digits == 0 {
        return false;
    }
    if i < b.len() && b[i] == b'e' {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        let exp_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == exp_start {
            return false;
        }
    }
    i == b.len()
}

/// Canonical text for a numeric value: shortest round-trip representation.
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plain_decimals() {
        assert_eq!(parse_number("40.14"), Ok(40.14));
        assert_eq!(parse_number("17.13"), Ok(17.13));
        assert_eq!(parse_number(" 0 "), Ok(0.0));
        assert_eq!(parse_number(".5"), Ok(0.5));
        assert_eq!(parse_number("-3.25"), Ok(-3.25));
    }

    #[test]
    fn e_notation() {
        assert_eq!(parse_number("1e6"), Ok(1_000_000.0));
        assert_eq!(parse_number("2.5E-3"), Ok(0.0025));
        assert!(parse_number("1e").is_err());
        assert!(parse_number("1e999").is_err());
    }

    #[test]
    fn percent_and_currency() {
        assert_eq!(parse_number("12.44 percent"), Ok(12.44));
        assert_eq!(parse_number("12.44%"), Ok(12.44));
        assert_eq!(parse_number("$1,234.5"), Ok(1234.5));
        assert_eq!(parse_number("-$20"), Ok(-20.0));
        assert_eq!(parse_number("€ 7"), Ok(7.0));
    }

    #[test]
    fn suffixes() {
        assert_eq!(parse_number("3.5M"), Ok(3_500_000.0));
        assert_eq!(parse_number("12k"), Ok(12_000.0));
        assert_eq!(parse_number("2 B"), Ok(2e9));
    }

    #[test]
    fn thousands_grouping_is_strict() {
        assert_eq!(parse_number("1,234,567"), Ok(1_234_567.0));
        assert!(parse_number("1,23").is_err());
        assert!(parse_number("12,34.5").is_err());
        assert!(parse_number("1.5,000").is_err());
    }

    #[test]
    fn words_are_not_numeric() {
        assert_eq!(
            parse_number("Snapchat"),
            Err(NotNumeric("Snapchat".to_string()))
        );
        for t in ["", "inf", "NaN", "-", "%", "k", "12abc", "1.2.3", "--1", "e5"] {
            assert!(parse_number(t).is_err(), "{t:?} should not parse");
        }
    }

    #[test]
    fn format_round_trips() {
        for v in [0.0, 5.0, 40.14, -3.5, 1e6, 1.0 / 3.0] {
            assert_eq!(parse_number(&format_value(v)), Ok(v));
        }
        assert_eq!(format_value(5.0), "5");
    }

    proptest! {
        #[test]
        fn total_over_arbitrary_input(s in "\\PC{0,12}") {
            if let Ok(v) = parse_number(&s) {
                prop_assert!(v.is_finite());
            }
        }

        #[test]
        fn total_over_numeric_grammar(
            sign in prop::option::of("[-+]"),
            cur in prop::option::of("[$€£]"),
            int in "[0-9]{1,7}",
            frac in prop::option::of("[0-9]{0,4}"),
            exp in prop::option::of(-20i32..20),
            suffix in prop::option::of("[kKmMbB]"),
            pct in prop::option::of(prop::sample::select(vec!["%", " percent"])),
        ) {
            let mut t = String::new();
            if let Some(s) = &sign { t.push_str(s); }
            if let Some(c) = &cur { t.push_str(c); }
            t.push_str(&int);
            if let Some(f) = &frac { t.push('.'); t.push_str(f); }
            if let Some(e) = exp { t.push_str(&format!("e{e}")); }
            if let Some(s) = &suffix { t.push_str(s); }
            if let Some(p) = pct { t.push_str(p); }
            let v = parse_number(&t);
            prop_assert!(v.is_ok(), "{t:?} -> {v:?}");
            prop_assert!(v.unwrap().is_finite());
        }

        #[test]
        fn format_value_round_trips(v in -1e12f64..1e12) {
            prop_assert_eq!(parse_number(&format_value(v)), Ok(v));
        }
    }
}
