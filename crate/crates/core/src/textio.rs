//! Number formatting and line tokenising shared by the text formats.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::real::Real;

/// Scientific notation with 17 significant digits; round-trips an `f64`.
pub fn fmt_exact<T: Real>(x: T) -> String {
    format!("{:.16e}", x)
}

/// `re,im` pair, both with 17 significant digits.
pub fn fmt_complex<T: Real>(z: Complex<T>) -> String {
    format!("{},{}", fmt_exact(z.re), fmt_exact(z.im))
}

/// `%g`-style formatting with `digits` significant digits: fixed notation for
/// moderate exponents, scientific otherwise, trailing zeros removed.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mant, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        let mant = trim_zeros(mant);
        return format!("{mant}e{exp}");
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let fixed = format!("{:.*}", decimals, x);
    let out = trim_zeros(&fixed);
    if out == "-0" {
        "0".to_string()
    } else {
        out.to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn parse_real<T: Real>(tok: &str, line: usize) -> Result<T> {
    tok.trim()
        .parse::<T>()
        .map_err(|_| Error::parse(line, format!("expected a number, found `{tok}`")))
}

pub fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.trim()
        .parse::<usize>()
        .map_err(|_| Error::parse(line, format!("expected a count, found `{tok}`")))
}

pub fn parse_complex<T: Real>(tok: &str, line: usize) -> Result<Complex<T>> {
    let (re, im) = tok
        .split_once(',')
        .ok_or_else(|| Error::parse(line, format!("expected `re,im`, found `{tok}`")))?;
    Ok(Complex::new(parse_real(re, line)?, parse_real(im, line)?))
}

/// Non-empty lines with `#` comments stripped, paired with 1-based line numbers.
pub fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

/// Converts a 1-based label from a text format into a 0-based index below `bound`.
pub fn label(tok: &str, bound: usize, line: usize, what: &str) -> Result<usize> {
    let v = parse_usize(tok, line)?;
    if v == 0 || v > bound {
        return Err(Error::parse(
            line,
            format!("{what} label {v} outside 1..={bound}"),
        ));
    }
    Ok(v - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_digit_formatting() {
        assert_eq!(fmt_sig(0.0, 12), "0");
        assert_eq!(fmt_sig(1.0, 12), "1");
        assert_eq!(fmt_sig(0.5, 12), "0.5");
        assert_eq!(fmt_sig(2.0f64.sqrt() * 2.0, 12), "2.82842712475");
        assert_eq!(fmt_sig(-0.25, 12), "-0.25");
        assert_eq!(fmt_sig(1.5e-9, 12), "1.5e-9");
        assert_eq!(fmt_sig(123456789012345.0, 12), "1.23456789012e14");
        assert_eq!(fmt_sig(-1e-20, 12), "-1e-20");
    }

    #[test]
    fn exact_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.0f64.sqrt(), 1e-300, 6.02214076e23] {
            let back: f64 = parse_real(&fmt_exact(x), 1).unwrap();
            assert_eq!(back.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn labels_are_one_based() {
        assert_eq!(label("1", 4, 1, "outcome").unwrap(), 0);
        assert!(label("0", 4, 1, "outcome").is_err());
        assert!(label("5", 4, 1, "outcome").is_err());
    }
}
