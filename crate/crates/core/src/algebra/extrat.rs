//! The scalar rig of nonnegative rationals extended with a top element.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::AlgebraError;

/// A nonnegative exact rational, or `Inf`.
///
/// Multiplication follows the measure-theoretic convention `0 * Inf = 0`,
/// which is what makes the rig operations monotone and continuous.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ExtRat {
    Fin(BigRational),
    Inf,
}

impl ExtRat {
    pub fn zero() -> Self {
        ExtRat::Fin(BigRational::zero())
    }

    pub fn one() -> Self {
        ExtRat::Fin(BigRational::one())
    }

    /// Builds a finite value, rejecting negatives.
    pub fn new(r: BigRational) -> Result<Self, AlgebraError> {
        if r.is_negative() {
            Err(AlgebraError::Negative(r.to_string()))
        } else {
            Ok(ExtRat::Fin(r))
        }
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        ExtRat::new(BigRational::new(BigInt::from(num), BigInt::from(den)))
            .expect("from_ratio requires a nonnegative ratio")
    }

    pub fn from_int(n: u64) -> Self {
        ExtRat::Fin(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ExtRat::Fin(r) if r.is_zero())
    }

    pub fn is_inf(&self) -> bool {
        matches!(self, ExtRat::Inf)
    }

    pub fn finite(&self) -> Option<&BigRational> {
        match self {
            ExtRat::Fin(r) => Some(r),
            ExtRat::Inf => None,
        }
    }

    /// `self - other` when it stays nonnegative and finite-defined.
    pub fn checked_sub(&self, other: &ExtRat) -> Option<ExtRat> {
        match (self, other) {
            (ExtRat::Fin(a), ExtRat::Fin(b)) if a >= b => Some(ExtRat::Fin(a - b)),
            (ExtRat::Inf, ExtRat::Fin(_)) => Some(ExtRat::Inf),
            _ => None,
        }
    }

    /// Multiplication by a finite nonnegative rational.
    pub fn mul_rat(&self, r: &BigRational) -> ExtRat {
        if r.is_zero() {
            return ExtRat::zero();
        }
        match self {
            ExtRat::Fin(a) => ExtRat::Fin(a * r),
            ExtRat::Inf => ExtRat::Inf,
        }
    }
}

impl From<BigRational> for ExtRat {
    fn from(r: BigRational) -> Self {
        ExtRat::new(r).expect("negative rational converted to ExtRat")
    }
}

impl Add for &ExtRat {
    type Output = ExtRat;

    fn add(self, rhs: &ExtRat) -> ExtRat {
        match (self, rhs) {
            (ExtRat::Fin(a), ExtRat::Fin(b)) => ExtRat::Fin(a + b),
            _ => ExtRat::Inf,
        }
    }
}

impl Add for ExtRat {
    type Output = ExtRat;

    fn add(self, rhs: ExtRat) -> ExtRat {
        &self + &rhs
    }
}

impl Mul for &ExtRat {
    type Output = ExtRat;

    fn mul(self, rhs: &ExtRat) -> ExtRat {
        match (self, rhs) {
            (ExtRat::Fin(a), ExtRat::Fin(b)) => ExtRat::Fin(a * b),
            (ExtRat::Fin(a), ExtRat::Inf) | (ExtRat::Inf, ExtRat::Fin(a)) => {
                if a.is_zero() {
                    ExtRat::zero()
                } else {
                    ExtRat::Inf
                }
            }
            (ExtRat::Inf, ExtRat::Inf) => ExtRat::Inf,
        }
    }
}

impl Mul for ExtRat {
    type Output = ExtRat;

    fn mul(self, rhs: ExtRat) -> ExtRat {
        &self * &rhs
    }
}

impl std::iter::Sum for ExtRat {
    fn sum<I: Iterator<Item = ExtRat>>(iter: I) -> ExtRat {
        iter.fold(ExtRat::zero(), |acc, x| acc + x)
    }
}

impl PartialOrd for ExtRat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtRat {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtRat::Fin(a), ExtRat::Fin(b)) => a.cmp(b),
            (ExtRat::Fin(_), ExtRat::Inf) => Ordering::Less,
            (ExtRat::Inf, ExtRat::Fin(_)) => Ordering::Greater,
            (ExtRat::Inf, ExtRat::Inf) => Ordering::Equal,
        }
    }
}

impl fmt::Display for ExtRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtRat::Fin(r) => write!(f, "{}", r),
            ExtRat::Inf => write!(f, "inf"),
        }
    }
}

/// Parses `inf`, an integer, or `p/q`.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p = BigInt::from_str(p.trim()).ok()?;
        let q = BigInt::from_str(q.trim()).ok()?;
        if q.is_zero() {
            return None;
        }
        Some(BigRational::new(p, q))
    } else {
        BigInt::from_str(s).ok().map(BigRational::from_integer)
    }
}

impl FromStr for ExtRat {
    type Err = AlgebraError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim() == "inf" {
            return Ok(ExtRat::Inf);
        }
        let r = parse_rational(s).ok_or_else(|| AlgebraError::BadNumber(s.to_string()))?;
        ExtRat::new(r)
    }
}
