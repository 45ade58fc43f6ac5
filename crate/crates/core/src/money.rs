//! Exact money arithmetic.
//!
//! Every bid, payment and utility in this crate is an arbitrary-precision
//! rational. Property audits hinge on exact comparisons (a tie and a
//! hair's-breadth difference select different winners), so floating point is
//! banned throughout. Instance files carry decimal strings ("2.5"); reports
//! and tables print integers bare and everything else as "p/q".

use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An exact rational amount of money. Signed: bids are non-negative by
/// construction at the parsing boundary, payments may go either way.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Money(BigRational);

/// Error produced when a string is not a valid money literal.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid money literal {literal:?}: {reason}")]
pub struct MoneyParseError {
    pub literal: String,
    pub reason: &'static str,
}

impl Money {
    pub fn zero() -> Self {
        Money(BigRational::zero())
    }

    pub fn from_int(n: i64) -> Self {
        Money(BigRational::from_integer(BigInt::from(n)))
    }

    /// Builds numerator/denominator directly. Panics on a zero denominator.
    pub fn from_ratio(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "zero denominator");
        Money(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    /// The value halfway between `self` and `other`. Used to build bid grids.
    pub fn midpoint(&self, other: &Money) -> Money {
        let two = BigRational::from_integer(BigInt::from(2));
        Money((&self.0 + &other.0) / two)
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    /// Exact decimal rendering, available iff the reduced denominator is of
    /// the form 2^a * 5^b. Grid-derived values (integers, midpoints) always
    /// qualify; `None` signals the caller to fall back to "p/q".
    pub fn to_decimal_string(&self) -> Option<String> {
        let mut denom = self.0.denom().clone();
        let mut twos = 0u32;
        let mut fives = 0u32;
        let big2 = BigInt::from(2);
        let big5 = BigInt::from(5);
        while (&denom % &big2).is_zero() {
            denom /= &big2;
            twos += 1;
        }
        while (&denom % &big5).is_zero() {
            denom /= &big5;
            fives += 1;
        }
        if !denom.is_one() {
            return None;
        }
        // Scale to an integer over 10^k with k = max(twos, fives).
        let k = twos.max(fives);
        let mut scaled = self.0.numer().clone();
        for _ in 0..(k - twos) {
            scaled *= &big2;
        }
        for _ in 0..(k - fives) {
            scaled *= &big5;
        }
        let negative = scaled.is_negative();
        let digits = scaled.magnitude().to_string();
        let mut out = String::new();
        if negative {
            out.push('-');
        }
        if k == 0 {
            out.push_str(&digits);
            return Some(out);
        }
        let k = k as usize;
        if digits.len() <= k {
            out.push_str("0.");
            for _ in 0..(k - digits.len()) {
                out.push('0');
            }
            out.push_str(&digits);
        } else {
            let (int_part, frac_part) = digits.split_at(digits.len() - k);
            out.push_str(int_part);
            out.push('.');
            out.push_str(frac_part);
        }
        Some(out)
    }

    /// String form used everywhere a `Money` value is emitted into instance
    /// JSON: decimal when exactly representable, "p/q" otherwise.
    pub fn to_json_string(&self) -> String {
        self.to_decimal_string()
            .unwrap_or_else(|| self.to_string())
    }
}

/// Accepts decimal literals ("4", "2.5", "-0.75", ".5") and reduced or
/// unreduced fractions ("5/2", "-7/4"). Round-trips both `Display` and
/// `to_decimal_string` output.
impl FromStr for Money {
    type Err = MoneyParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fail = |reason| MoneyParseError {
            literal: s.to_string(),
            reason,
        };
        let t = s.trim();
        if t.is_empty() {
            return Err(fail("empty string"));
        }
        if let Some((numer, denom)) = t.split_once('/') {
            let n: BigInt = numer
                .trim()
                .parse()
                .map_err(|_| fail("numerator is not an integer"))?;
            let d: BigInt = denom
                .trim()
                .parse()
                .map_err(|_| fail("denominator is not an integer"))?;
            if d.is_zero() {
                return Err(fail("zero denominator"));
            }
            return Ok(Money(BigRational::new(n, d)));
        }
        let (sign, body) = match t.strip_prefix('-') {
            Some(rest) => (-1, rest),
            None => (1, t.strip_prefix('+').unwrap_or(t)),
        };
        if body.is_empty() {
            return Err(fail("sign without digits"));
        }
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(fail("no digits"));
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(fail("non-digit character"));
        }
        let mut numer: BigInt = if int_part.is_empty() {
            BigInt::zero()
        } else {
            int_part.parse().map_err(|_| fail("integer part overflow"))?
        };
        let mut denom = BigInt::one();
        let ten = BigInt::from(10);
        for b in frac_part.bytes() {
            numer = &numer * &ten + BigInt::from((b - b'0') as u32);
            denom *= &ten;
        }
        if sign < 0 {
            numer = -numer;
        }
        Ok(Money(BigRational::new(numer, denom)))
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Money({})", self)
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_json_string())
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

macro_rules! forward_binop {
    ($trait_:ident, $method:ident, $op:tt) => {
        impl $trait_ for Money {
            type Output = Money;
            fn $method(self, rhs: Money) -> Money {
                Money(self.0 $op rhs.0)
            }
        }
        impl<'a> $trait_<&'a Money> for &'a Money {
            type Output = Money;
            fn $method(self, rhs: &'a Money) -> Money {
                Money(&self.0 $op &rhs.0)
            }
        }
        impl<'a> $trait_<&'a Money> for Money {
            type Output = Money;
            fn $method(self, rhs: &'a Money) -> Money {
                Money(self.0 $op &rhs.0)
            }
        }
    };
}

forward_binop!(Add, add, +);
forward_binop!(Sub, sub, -);

impl AddAssign<&Money> for Money {
    fn add_assign(&mut self, rhs: &Money) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&Money> for Money {
    fn sub_assign(&mut self, rhs: &Money) {
        self.0 -= &rhs.0;
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl Neg for &Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0.clone())
    }
}

impl std::iter::Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::zero(), |a, b| a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals() {
        assert_eq!("2.5".parse::<Money>().unwrap(), Money::from_ratio(5, 2));
        assert_eq!("4".parse::<Money>().unwrap(), Money::from_int(4));
        assert_eq!("0.1".parse::<Money>().unwrap(), Money::from_ratio(1, 10));
        assert_eq!(".5".parse::<Money>().unwrap(), Money::from_ratio(1, 2));
        assert_eq!("-0.75".parse::<Money>().unwrap(), Money::from_ratio(-3, 4));
        assert_eq!("007".parse::<Money>().unwrap(), Money::from_int(7));
    }

    #[test]
    fn parses_fractions() {
        assert_eq!("5/2".parse::<Money>().unwrap(), Money::from_ratio(5, 2));
        assert_eq!("-7/4".parse::<Money>().unwrap(), Money::from_ratio(-7, 4));
        assert_eq!("6/4".parse::<Money>().unwrap(), Money::from_ratio(3, 2));
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "1.2.3", "1/0", "abc", "1e3", "--4", ".", "-"] {
            assert!(bad.parse::<Money>().is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn display_is_bare_int_or_fraction() {
        assert_eq!(Money::from_int(4).to_string(), "4");
        assert_eq!(Money::from_ratio(5, 2).to_string(), "5/2");
        assert_eq!(Money::from_ratio(-7, 2).to_string(), "-7/2");
        assert_eq!(Money::zero().to_string(), "0");
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(
            Money::from_ratio(5, 2).to_decimal_string().as_deref(),
            Some("2.5")
        );
        assert_eq!(
            Money::from_ratio(1, 10).to_decimal_string().as_deref(),
            Some("0.1")
        );
        assert_eq!(
            Money::from_ratio(-3, 4).to_decimal_string().as_deref(),
            Some("-0.75")
        );
        assert_eq!(Money::from_ratio(1, 3).to_decimal_string(), None);
        assert_eq!(
            Money::from_int(12).to_decimal_string().as_deref(),
            Some("12")
        );
    }

    #[test]
    fn midpoint_is_exact() {
        let m = Money::from_int(1).midpoint(&Money::from_int(2));
        assert_eq!(m, Money::from_ratio(3, 2));
        let q = Money::from_ratio(1, 2).midpoint(&Money::from_int(1));
        assert_eq!(q, Money::from_ratio(3, 4));
    }
}
