//! Exact verifier for packings of n circles in the unit square.
//!
//! Comparisons use arbitrary-precision rationals built from the submitted
//! decimal strings (or from the exact binary value of an `f64`), so there is
//! no tolerance: a packing whose circles touch is valid, one that overlaps
//! by any positive amount is not. Distances are compared squared, which
//! avoids square roots entirely.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PackingError {
    #[error("expected {expected} values ({n} circles × 3), got {got}", expected = .n * 3)]
    WrongArity { n: usize, got: usize },
    #[error("value {0} is not finite")]
    NonFinite(usize),
    #[error("could not parse `{token}` (value {index}) as a decimal number")]
    Parse { index: usize, token: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    NegativeRadius(usize),
    Boundary(usize),
    Overlap(usize, usize),
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NegativeRadius(i) => write!(f, "circle {i} has a negative radius"),
            Violation::Boundary(i) => write!(f, "circle {i} crosses the square boundary"),
            Violation::Overlap(i, j) => write!(f, "circles {i} and {j} overlap"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PackingVerdict {
    Valid { score: f64, exact: BigRational },
    Invalid(Violation),
}

impl PackingVerdict {
    pub fn score(&self) -> Option<f64> {
        match self {
            PackingVerdict::Valid { score, .. } => Some(*score),
            PackingVerdict::Invalid(_) => None,
        }
    }
}

/// Parses one decimal literal (`-1.25`, `.5`, `3e-2`) into an exact rational.
pub fn parse_decimal(token: &str) -> Option<BigRational> {
    let t = token.trim();
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(pos) => (&t[..pos], t[pos + 1..].parse::<i32>().ok()?),
        None => (t, 0),
    };
    let (negative, digits) = match mantissa.as_bytes().first()? {
        b'-' => (true, &mantissa[1..]),
        b'+' => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    if exponent.unsigned_abs() > 4000 {
        return None;
    }
    let mut value: BigInt = format!("{int_part}{frac_part}").parse().ok()?;
    if negative {
        value = -value;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    Some(if scale >= 0 {
        BigRational::from_integer(value * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(value, num_traits::pow(ten, (-scale) as usize))
    })
}

/// Splits an artifact into numeric tokens. Brackets, commas, and whitespace
/// are separators, so `[x, y, r, ...]` and one-triple-per-line both work.
pub fn tokenize(text: &str) -> Vec<&str> {
    text.split(|c: char| c.is_whitespace() || matches!(c, ',' | '[' | ']' | '(' | ')' | ';'))
        .filter(|t| !t.is_empty())
        .collect()
}

pub fn parse_artifact(text: &str) -> Result<Vec<BigRational>, PackingError> {
    tokenize(text)
        .into_iter()
        .enumerate()
        .map(|(index, token)| {
            let lower = token.to_ascii_lowercase();
            if matches!(lower.trim_start_matches(['+', '-']), "nan" | "inf" | "infinity") {
                return Err(PackingError::NonFinite(index));
            }
            parse_decimal(token).ok_or_else(|| PackingError::Parse {
                index,
                token: token.to_string(),
            })
        })
        .collect()
}

/// Verifies a flat `[x0, y0, r0, x1, y1, r1, ...]` list of exact values.
pub fn verify_exact(values: &[BigRational], n: usize) -> Result<PackingVerdict, PackingError> {
    if values.len() != 3 * n {
        return Err(PackingError::WrongArity { n, got: values.len() });
    }
    let one = BigRational::from_integer(BigInt::from(1));
    let circles: Vec<(&BigRational, &BigRational, &BigRational)> =
        values.chunks_exact(3).map(|c| (&c[0], &c[1], &c[2])).collect();
    for (i, (x, y, r)) in circles.iter().enumerate() {
        if r.is_negative() {
            return Ok(PackingVerdict::Invalid(Violation::NegativeRadius(i)));
        }
        let inside = *r <= *x && *r <= *y && **r <= &one - *x && **r <= &one - *y;
        if !inside {
            return Ok(PackingVerdict::Invalid(Violation::Boundary(i)));
        }
    }
    for i in 0..n {
        let (xi, yi, ri) = circles[i];
        for (j, &(xj, yj, rj)) in circles.iter().enumerate().skip(i + 1) {
            let dx = xi - xj;
            let dy = yi - yj;
            let reach = ri + rj;
            if &dx * &dx + &dy * &dy < &reach * &reach {
                return Ok(PackingVerdict::Invalid(Violation::Overlap(i, j)));
            }
        }
    }
    let exact = circles.iter().fold(BigRational::zero(), |acc, (_, _, r)| acc + *r);
    let score = exact.to_f64().unwrap_or(f64::NAN);
    Ok(PackingVerdict::Valid { score, exact })
}

/// Verifies a packing given as `f64`s, using each value's exact binary value.
pub fn verify_packing(values: &[f64], n: usize) -> Result<PackingVerdict, PackingError> {
    if values.len() != 3 * n {
        return Err(PackingError::WrongArity { n, got: values.len() });
    }
    let exact = values
        .iter()
        .enumerate()
        .map(|(i, v)| BigRational::from_float(*v).ok_or(PackingError::NonFinite(i)))
        .collect::<Result<Vec<_>, _>>()?;
    verify_exact(&exact, n)
}

pub fn verify_artifact(text: &str, n: usize) -> Result<PackingVerdict, PackingError> {
    verify_exact(&parse_artifact(text)?, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inscribed_circle_scores_half() {
        assert_eq!(verify_packing(&[0.5, 0.5, 0.5], 1).unwrap().score(), Some(0.5));
        assert_eq!(
            verify_packing(&[0.5, 0.5, 0.6], 1).unwrap(),
            PackingVerdict::Invalid(Violation::Boundary(0))
        );
    }

    #[test]
    fn diagonal_pair() {
        let v = verify_packing(&[0.25, 0.25, 0.25, 0.75, 0.75, 0.25], 2).unwrap();
        assert_eq!(v.score(), Some(0.5));
    }

    #[test]
    fn touching_is_valid_overlap_is_not() {
        assert!(verify_artifact("0.25 0.5 0.25\n0.75 0.5 0.25", 2)
            .unwrap()
            .score()
            .is_some());
        assert_eq!(
            verify_artifact("0.25 0.5 0.25\n0.75 0.5 0.2500000000000000001", 2).unwrap(),
            PackingVerdict::Invalid(Violation::Boundary(1))
        );
        assert_eq!(
            verify_artifact("0.25 0.5 0.25\n0.7499999999999999999 0.5 0.25", 2).unwrap(),
            PackingVerdict::Invalid(Violation::Overlap(0, 1))
        );
    }

    #[test]
    fn errors() {
        assert_eq!(
            verify_packing(&[0.5, 0.5], 1),
            Err(PackingError::WrongArity { n: 1, got: 2 })
        );
        assert_eq!(
            verify_packing(&[0.5, f64::NAN, 0.1], 1),
            Err(PackingError::NonFinite(1))
        );
        assert!(matches!(
            verify_artifact("0.5 0.5 abc", 1),
            Err(PackingError::Parse { index: 2, .. })
        ));
        assert_eq!(verify_artifact("0.5 0.5 inf", 1), Err(PackingError::NonFinite(2)));
        assert_eq!(
            verify_artifact("0.5 0.5 -0.1", 1).unwrap(),
            PackingVerdict::Invalid(Violation::NegativeRadius(0))
        );
    }

    #[test]
    fn decimal_parsing_is_exact() {
        assert_eq!(parse_decimal("0.1").unwrap(), BigRational::new(1.into(), 10.into()));
        assert_eq!(
            parse_decimal("-2.5e-1").unwrap(),
            BigRational::new((-1).into(), 4.into())
        );
        assert_eq!(parse_decimal(".5").unwrap(), BigRational::new(1.into(), 2.into()));
        assert_eq!(parse_decimal("3E2").unwrap(), BigRational::from_integer(300.into()));
        for bad in ["", ".", "1.2.3", "e5", "1e", "--1", "0x10"] {
            assert!(parse_decimal(bad).is_none(), "{bad}");
        }
    }

    #[test]
    fn bracketed_lists() {
        let v = verify_artifact("[0.5, 0.5, 0.5]", 1).unwrap();
        assert_eq!(v.score(), Some(0.5));
    }
}
