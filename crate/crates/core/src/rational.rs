//! Exact rationals, the extended tag for `+inf`, and canonical `p/q` text.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

/// Canonical text: always `p/q` with `q > 0`, lowest terms.
pub fn fmt_rat(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_rat(s: &str) -> Result<Rational> {
    let t = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    match t.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(p, q))
        }
        None => {
            let p: BigInt = t.parse().map_err(|_| bad())?;
            Ok(BigRational::from_integer(p))
        }
    }
}

/// Nonnegative-or-infinite cost entry. Never a sentinel magnitude.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ExtRational {
    Finite(Rational),
    Infinite,
}

impl ExtRational {
    pub fn finite(&self) -> Option<&Rational> {
        match self {
            ExtRational::Finite(r) => Some(r),
            ExtRational::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtRational::Infinite)
    }

    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("+inf") {
            Ok(ExtRational::Infinite)
        } else {
            parse_rat(t).map(ExtRational::Finite)
        }
    }
}

impl From<Rational> for ExtRational {
    fn from(r: Rational) -> Self {
        ExtRational::Finite(r)
    }
}

impl fmt::Display for ExtRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtRational::Finite(r) => write!(f, "{}", fmt_rat(r)),
            ExtRational::Infinite => write!(f, "inf"),
        }
    }
}

impl PartialOrd for ExtRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtRational {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtRational::Finite(a), ExtRational::Finite(b)) => a.cmp(b),
            (ExtRational::Finite(_), ExtRational::Infinite) => Ordering::Less,
            (ExtRational::Infinite, ExtRational::Finite(_)) => Ordering::Greater,
            (ExtRational::Infinite, ExtRational::Infinite) => Ordering::Equal,
        }
    }
}

impl Add for &ExtRational {
    type Output = ExtRational;
    fn add(self, rhs: Self) -> ExtRational {
        match (self, rhs) {
            (ExtRational::Finite(a), ExtRational::Finite(b)) => ExtRational::Finite(a + b),
            _ => ExtRational::Infinite,
        }
    }
}

pub fn pos_part(r: &Rational) -> Rational {
    if r.is_positive() {
        r.clone()
    } else {
        Rational::zero()
    }
}

pub fn neg_part(r: &Rational) -> Rational {
    if r.is_negative() {
        -r
    } else {
        Rational::zero()
    }
}

pub fn sum<'a, I: IntoIterator<Item = &'a Rational>>(it: I) -> Rational {
    it.into_iter().fold(Rational::zero(), |acc, x| acc + x)
}

pub fn one() -> Rational {
    Rational::one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_keeps_denominator() {
        assert_eq!(fmt_rat(&int(0)), "0/1");
        assert_eq!(fmt_rat(&int(1)), "1/1");
        assert_eq!(fmt_rat(&rat(6, -4)), "-3/2");
    }

    #[test]
    fn parse_accepts_integers_fractions_and_inf() {
        assert_eq!(parse_rat("7").unwrap(), int(7));
        assert_eq!(parse_rat(" 10/4 ").unwrap(), rat(5, 2));
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("x").is_err());
        assert_eq!(ExtRational::parse("inf").unwrap(), ExtRational::Infinite);
    }

    #[test]
    fn infinity_dominates_order_and_sum() {
        let a = ExtRational::Finite(int(1_000_000));
        assert!(a < ExtRational::Infinite);
        assert!((&a + &ExtRational::Infinite).is_infinite());
    }
}
