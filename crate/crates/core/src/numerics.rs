//! Fixed-point amounts, rates and the cumulative rebase index.
//!
//! Every quantity that touches balances is an integer:
//!
//! - [`Amount`] counts nano-units, `1 token == 1_000_000_000` raw units.
//! - [`Rate`] is a signed parts-per-billion ratio.
//! - [`Index`] is the exact rational product of all `(1 + r)` factors applied
//!   so far, renormalized once its terms get large.
//!
//! Rounding is always toward negative infinity (floor). Products are taken in
//! 256-bit intermediates, so none of the helpers here can lose precision
//! before the final division.

use std::fmt;
use std::str::FromStr;

use ethnum::U256;
use thiserror::Error;

/// Raw units per whole token.
pub const UNIT: u128 = 1_000_000_000;

/// Parts-per-billion denominator of a [`Rate`].
pub const PPB: i64 = 1_000_000_000;

/// Once `num` or `den` of an [`Index`] exceeds this, both are shifted down.
pub const INDEX_RENORM_LIMIT: u128 = 1 << 96;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithmeticError {
    #[error("arithmetic overflow")]
    Overflow,
    #[error("result would be negative")]
    NegativeResult,
    #[error("growth factor 1 + r must be positive")]
    NonPositiveFactor,
    #[error("division by zero")]
    DivisionByZero,
    #[error("invalid decimal literal {0:?}")]
    InvalidDecimal(String),
}

/// `floor(a * b / c)` with a 256-bit intermediate product.
pub(crate) fn mul_div_floor(a: u128, b: u128, c: u128) -> Result<u128, ArithmeticError> {
    if c == 0 {
        return Err(ArithmeticError::DivisionByZero);
    }
    let q = U256::from(a) * U256::from(b) / U256::from(c);
    u128::try_from(q).map_err(|_| ArithmeticError::Overflow)
}

/// Parses a plain decimal literal (`-12.5`, `0.0004`) into an integer scaled
/// by 10^9. More than nine fractional digits is rejected rather than rounded.
fn parse_scaled(s: &str) -> Result<i128, ArithmeticError> {
    let bad = || ArithmeticError::InvalidDecimal(s.to_string());
    let t = s.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit())
        || !frac_part.bytes().all(|b| b.is_ascii_digit())
        || frac_part.len() > 9
    {
        return Err(bad());
    }
    let int: i128 = if int_part.is_empty() {
        0
    } else {
        int_part.parse().map_err(|_| bad())?
    };
    let mut frac: i128 = 0;
    for (i, b) in frac_part.bytes().enumerate() {
        frac += i128::from(b - b'0') * 10i128.pow(8 - i as u32);
    }
    let v = int
        .checked_mul(UNIT as i128)
        .and_then(|v| v.checked_add(frac))
        .ok_or(ArithmeticError::Overflow)?;
    Ok(if neg { -v } else { v })
}

fn fmt_scaled(f: &mut fmt::Formatter<'_>, v: i128) -> fmt::Result {
    let sign = if v < 0 { "-" } else { "" };
    let a = v.unsigned_abs();
    write!(f, "{sign}{}.{:09}", a / UNIT, a % UNIT)
}

/// A non-negative token amount in nano-units.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Amount(u128);

impl Amount {
    pub const ZERO: Amount = Amount(0);
    pub const ONE_RAW: Amount = Amount(1);

    pub const fn from_raw(raw: u128) -> Self {
        Amount(raw)
    }

    pub const fn raw(self) -> u128 {
        self.0
    }

    /// Whole tokens.
    pub fn from_tokens(tokens: u64) -> Self {
        Amount(u128::from(tokens) * UNIT)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_add(self, rhs: Amount) -> Result<Amount, ArithmeticError> {
        self.0.checked_add(rhs.0).map(Amount).ok_or(ArithmeticError::Overflow)
    }

    pub fn checked_sub(self, rhs: Amount) -> Result<Amount, ArithmeticError> {
        self.0
            .checked_sub(rhs.0)
            .map(Amount)
            .ok_or(ArithmeticError::NegativeResult)
    }

    pub fn checked_mul_u64(self, n: u64) -> Result<Amount, ArithmeticError> {
        self.0
            .checked_mul(u128::from(n))
            .map(Amount)
            .ok_or(ArithmeticError::Overflow)
    }

    pub fn saturating_sub(self, rhs: Amount) -> Amount {
        Amount(self.0.saturating_sub(rhs.0))
    }

    /// Signed difference `self - rhs`.
    pub fn diff(self, rhs: Amount) -> SignedAmount {
        SignedAmount(self.0 as i128 - rhs.0 as i128)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / UNIT as f64
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:09}", self.0 / UNIT, self.0 % UNIT)
    }
}

impl FromStr for Amount {
    type Err = ArithmeticError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v = parse_scaled(s)?;
        if v < 0 {
            return Err(ArithmeticError::NegativeResult);
        }
        Ok(Amount(v as u128))
    }
}

/// A signed amount, used for profit/loss style differences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignedAmount(i128);

impl SignedAmount {
    pub const ZERO: SignedAmount = SignedAmount(0);

    pub const fn from_raw(raw: i128) -> Self {
        SignedAmount(raw)
    }

    pub const fn raw(self) -> i128 {
        self.0
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn checked_sub(self, rhs: SignedAmount) -> Result<SignedAmount, ArithmeticError> {
        self.0
            .checked_sub(rhs.0)
            .map(SignedAmount)
            .ok_or(ArithmeticError::Overflow)
    }
}

impl From<Amount> for SignedAmount {
    fn from(a: Amount) -> Self {
        SignedAmount(a.0 as i128)
    }
}

impl fmt::Display for SignedAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_scaled(f, self.0)
    }
}

impl FromStr for SignedAmount {
    type Err = ArithmeticError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_scaled(s).map(SignedAmount)
    }
}

/// A dimensionless ratio in parts per billion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rate(i64);

impl Rate {
    pub const ZERO: Rate = Rate(0);
    pub const ONE: Rate = Rate(PPB);
    pub const MAX: Rate = Rate(i64::MAX);

    pub const fn from_ppb(ppb: i64) -> Self {
        Rate(ppb)
    }

    pub const fn ppb(self) -> i64 {
        self.0
    }

    /// `floor(num / den)` as a rate.
    pub fn from_ratio(num: i64, den: i64) -> Result<Rate, ArithmeticError> {
        if den == 0 {
            return Err(ArithmeticError::DivisionByZero);
        }
        let v = (i128::from(num) * i128::from(PPB)).div_euclid(i128::from(den));
        i64::try_from(v).map(Rate).map_err(|_| ArithmeticError::Overflow)
    }

    pub fn saturating_add(self, rhs: Rate) -> Rate {
        Rate(self.0.saturating_add(rhs.0))
    }

    pub fn saturating_sub(self, rhs: Rate) -> Rate {
        Rate(self.0.saturating_sub(rhs.0))
    }

    pub fn saturating_neg(self) -> Rate {
        Rate(self.0.saturating_neg())
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / PPB as f64
    }

    /// The growth factor `1 + r` as an exact index.
    pub fn one_plus(self) -> Result<Index, ArithmeticError> {
        Index::ONE.grow(self)
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_scaled(f, i128::from(self.0))
    }
}

impl FromStr for Rate {
    type Err = ArithmeticError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v = parse_scaled(s)?;
        i64::try_from(v).map(Rate).map_err(|_| ArithmeticError::Overflow)
    }
}

/// Cumulative growth index, kept as the exact rational `num / den`.
///
/// Equality compares the represented value, so `2/2 == 1/1`.
#[derive(Debug, Clone, Copy)]
pub struct Index {
    num: u128,
    den: u128,
}

impl Index {
    pub const ONE: Index = Index { num: 1, den: 1 };

    pub fn new(num: u128, den: u128) -> Result<Index, ArithmeticError> {
        if den == 0 {
            return Err(ArithmeticError::DivisionByZero);
        }
        if num == 0 {
            return Err(ArithmeticError::NonPositiveFactor);
        }
        Ok(Index { num, den })
    }

    pub fn num(&self) -> u128 {
        self.num
    }

    pub fn den(&self) -> u128 {
        self.den
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Multiplies the index by `1 + r`.
    ///
    /// The product is exact and reduced to lowest terms; if either term then
    /// exceeds [`INDEX_RENORM_LIMIT`] both are shifted right by the same
    /// number of bits.
    pub fn grow(self, r: Rate) -> Result<Index, ArithmeticError> {
        let factor = i128::from(PPB) + i128::from(r.ppb());
        if factor <= 0 {
            return Err(ArithmeticError::NonPositiveFactor);
        }
        let num = U256::from(self.num) * U256::from(factor as u128);
        let den = U256::from(self.den) * U256::from(PPB as u128);
        let g = gcd(num, den);
        let (mut num, mut den) = (num / g, den / g);
        let hi = num.max(den);
        let limit = U256::from(INDEX_RENORM_LIMIT);
        if hi > limit {
            let shift = (256 - hi.leading_zeros()) - (256 - limit.leading_zeros()) + 1;
            num >>= shift;
            den >>= shift;
            if num == U256::ZERO || den == U256::ZERO {
                return Err(ArithmeticError::Overflow);
            }
        }
        Ok(Index {
            num: num.as_u128(),
            den: den.as_u128(),
        })
    }
}

impl PartialEq for Index {
    fn eq(&self, other: &Self) -> bool {
        U256::from(self.num) * U256::from(other.den) == U256::from(other.num) * U256::from(self.den)
    }
}

impl Eq for Index {}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

fn gcd(mut a: U256, mut b: U256) -> U256 {
    if a == U256::ZERO {
        return b;
    }
    if b == U256::ZERO {
        return a;
    }
    let shift = (a | b).trailing_zeros();
    a >>= a.trailing_zeros();
    loop {
        b >>= b.trailing_zeros();
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        b -= a;
        if b == U256::ZERO {
            return a << shift;
        }
    }
}

/// `floor(a * r)`. Negative rates are only accepted for a zero amount.
pub fn mul_amount_rate(a: Amount, r: Rate) -> Result<Amount, ArithmeticError> {
    if r.ppb() < 0 {
        return if a.is_zero() {
            Ok(Amount::ZERO)
        } else {
            Err(ArithmeticError::NegativeResult)
        };
    }
    let p = a.raw().checked_mul(r.ppb() as u128).ok_or(ArithmeticError::Overflow)?;
    Ok(Amount(p / UNIT))
}

/// `floor(a * (1 + r))`.
pub fn scale_one_plus(a: Amount, r: Rate) -> Result<Amount, ArithmeticError> {
    let factor = i128::from(PPB) + i128::from(r.ppb());
    if factor < 0 {
        return Err(ArithmeticError::NegativeResult);
    }
    mul_div_floor(a.raw(), factor as u128, UNIT).map(Amount)
}

/// `floor(shares * num / den)`.
pub fn apply_index(shares: Amount, idx: Index) -> Result<Amount, ArithmeticError> {
    mul_div_floor(shares.raw(), idx.num, idx.den).map(Amount)
}

/// `idx * (1 + r)`.
pub fn grow_index(idx: Index, r: Rate) -> Result<Index, ArithmeticError> {
    idx.grow(r)
}
