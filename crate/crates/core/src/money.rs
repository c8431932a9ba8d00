//! Fixed-point money.
//!
//! Amounts are integers in units of 10^-12 of the configured currency. Prices
//! are quoted per 1,000,000 tokens with at most six decimals, so
//! `tokens * price / 1_000_000` is always an exact integer in these units and
//! no cost ever needs rounding until it is displayed.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Sub-units per whole currency unit.
const UNITS_PER_WHOLE: i128 = 1_000_000_000_000;
/// Sub-units per micro-unit (10^-6).
const UNITS_PER_MICRO: i128 = 1_000_000;
/// Prices are quoted per this many tokens.
pub const TOKENS_PER_PRICE_UNIT: u64 = 1_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MoneyError {
    #[error("invalid money amount {0:?}")]
    Invalid(String),
    #[error("amount {0:?} has more than {1} decimal places")]
    TooPrecise(String, usize),
    #[error("amount {0:?} is out of range")]
    Overflow(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Money(i128);

impl Money {
    pub const ZERO: Money = Money(0);

    pub fn from_micros(micros: i64) -> Self {
        Money(micros as i128 * UNITS_PER_MICRO)
    }

    pub fn from_whole(whole: i64) -> Self {
        Money(whole as i128 * UNITS_PER_WHOLE)
    }

    /// Raw value in 10^-12 units.
    pub fn raw(self) -> i128 {
        self.0
    }

    pub fn from_raw(raw: i128) -> Self {
        Money(raw)
    }

    /// Parses a decimal string allowing at most `max_decimals` fractional digits.
    pub fn parse_with_precision(s: &str, max_decimals: usize) -> Result<Self, MoneyError> {
        let t = s.trim();
        let t = t.strip_prefix('$').unwrap_or(t);
        let (neg, digits) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t),
        };
        let (int_part, frac_part) = match digits.split_once('.') {
            Some((i, f)) => (i, f),
            None => (digits, ""),
        };
        let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if int_part.is_empty() && frac_part.is_empty()
            || !all_digits(int_part)
            || !all_digits(frac_part)
        {
            return Err(MoneyError::Invalid(s.to_string()));
        }
        if frac_part.len() > max_decimals.min(12) {
            return Err(MoneyError::TooPrecise(s.to_string(), max_decimals.min(12)));
        }
        let overflow = || MoneyError::Overflow(s.to_string());
        let whole: i128 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| overflow())?
        };
        let mut frac: i128 = 0;
        if !frac_part.is_empty() {
            frac = frac_part.parse().map_err(|_| overflow())?;
            frac *= 10i128.pow((12 - frac_part.len()) as u32);
        }
        let value = whole
            .checked_mul(UNITS_PER_WHOLE)
            .and_then(|w| w.checked_add(frac))
            .ok_or_else(overflow)?;
        Ok(Money(if neg { -value } else { value }))
    }

    /// Cost of `tokens` at `price` per million tokens. Exact when `price` has
    /// at most six decimals.
    pub fn cost_of(tokens: u64, price_per_million: Money) -> Money {
        Money(tokens as i128 * price_per_million.0 / TOKENS_PER_PRICE_UNIT as i128)
    }

    /// Value rounded half-to-even to whole micro-units.
    pub fn to_micros_rounded(self) -> i128 {
        let q = self.0.div_euclid(UNITS_PER_MICRO);
        let r = self.0.rem_euclid(UNITS_PER_MICRO);
        let half = UNITS_PER_MICRO / 2;
        if r > half || (r == half && q % 2 != 0) {
            q + 1
        } else {
            q
        }
    }

    pub fn checked_add(self, other: Money) -> Option<Money> {
        self.0.checked_add(other.0).map(Money)
    }

    /// `self / other` as a ratio, for threshold checks.
    pub fn ratio_of(self, other: Money) -> f64 {
        self.0 as f64 / other.0 as f64
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Money> for Money {
    fn sum<I: Iterator<Item = &'a Money>>(iter: I) -> Money {
        iter.copied().sum()
    }
}

/// Six decimals, rounded half-to-even.
impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let micros = self.to_micros_rounded();
        let sign = if micros < 0 { "-" } else { "" };
        let abs = micros.unsigned_abs();
        write!(f, "{sign}{}.{:06}", abs / 1_000_000, abs % 1_000_000)
    }
}

impl FromStr for Money {
    type Err = MoneyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Money::parse_with_precision(s, 12)
    }
}

/// Serialized as an exact decimal string with all twelve places trimmed of
/// trailing zeros.
impl Serialize for Money {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let whole = abs / UNITS_PER_WHOLE as u128;
        let frac = abs % UNITS_PER_WHOLE as u128;
        let s = if frac == 0 {
            format!("{sign}{whole}")
        } else {
            let f = format!("{frac:012}");
            format!("{sign}{whole}.{}", f.trim_end_matches('0'))
        };
        serializer.serialize_str(&s)
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Str(String),
            Int(i64),
            Float(f64),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Int(i) => Ok(Money::from_whole(i)),
            // Floats only come from hand-written config; go through the
            // shortest decimal representation rather than the binary value.
            Raw::Float(x) => x.to_string().parse().map_err(serde::de::Error::custom),
        }
    }
}
