//! Exact arithmetic in `Q(sqrt d)`.
//!
//! A [`QuadRat`] is `a + b sqrt(d)` with rational `a`, `b` and a fixed
//! square-free `d >= 2`. The checked operations return [`ExactError`] on a
//! discriminant mismatch or division by zero; the operator impls panic in
//! those cases.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Bits kept in the scaled integer before conversion to `f64`.
const FLOAT_BITS: u64 = 80;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ExactError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("operands live in Q(sqrt {0}) and Q(sqrt {1})")]
    MixedDiscriminant(u64, u64),
    #[error("{0} is not a square-free integer >= 2")]
    NotSquareFree(u64),
    #[error("cannot parse {input:?}: {reason}")]
    Parse { input: String, reason: String },
    #[error("exact mode unsupported: {0}")]
    ExactModeUnsupported(String),
}

/// True when `d >= 2` has no repeated prime factor.
pub fn is_square_free(d: u64) -> bool {
    if d < 2 {
        return false;
    }
    let mut n = d;
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return false;
            }
        }
        p += 1;
    }
    true
}

/// Splits a positive integer as `f^2 * s` with `s` square-free (`s = 1` for perfect squares).
///
/// Returns `None` when a prime factor larger than `limit` remains undecided.
pub fn square_free_split(n: &BigUint, limit: u64) -> Option<(BigUint, BigUint)> {
    let mut rest = n.clone();
    let mut square = BigUint::one();
    let mut free = BigUint::one();
    let mut p = 2u64;
    while BigUint::from(p) * BigUint::from(p) <= rest {
        if p > limit {
            return None;
        }
        let bp = BigUint::from(p);
        let mut count = 0u32;
        while (&rest % &bp).is_zero() {
            rest /= &bp;
            count += 1;
        }
        for _ in 0..count / 2 {
            square *= &bp;
        }
        if count % 2 == 1 {
            free *= &bp;
        }
        p += 1;
    }
    free *= rest;
    Some((square, free))
}

/// `a + b sqrt(d)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QuadRat {
    a: BigRational,
    b: BigRational,
    d: u64,
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl QuadRat {
    pub fn new(a: BigRational, b: BigRational, d: u64) -> Result<Self, ExactError> {
        if !is_square_free(d) {
            return Err(ExactError::NotSquareFree(d));
        }
        Ok(QuadRat { a, b, d })
    }

    pub fn rational(a: BigRational, d: u64) -> Result<Self, ExactError> {
        Self::new(a, BigRational::zero(), d)
    }

    pub fn from_i64(a: i64, d: u64) -> Result<Self, ExactError> {
        Self::rational(rat(a), d)
    }

    /// The exact binary value of `x`.
    pub fn from_f64(x: f64, d: u64) -> Result<Self, ExactError> {
        let a = BigRational::from_float(x).ok_or_else(|| ExactError::Parse {
            input: x.to_string(),
            reason: "not a finite number".into(),
        })?;
        Self::rational(a, d)
    }

    pub fn zero(d: u64) -> Result<Self, ExactError> {
        Self::from_i64(0, d)
    }

    pub fn one(d: u64) -> Result<Self, ExactError> {
        Self::from_i64(1, d)
    }

    /// Zero in the same field as `self`.
    pub fn zero_like(&self) -> Self {
        QuadRat {
            a: BigRational::zero(),
            b: BigRational::zero(),
            d: self.d,
        }
    }

    /// Rational `r` in the same field as `self`.
    pub fn rational_like(&self, r: BigRational) -> Self {
        QuadRat {
            a: r,
            b: BigRational::zero(),
            d: self.d,
        }
    }

    pub fn a(&self) -> &BigRational {
        &self.a
    }

    pub fn b(&self) -> &BigRational {
        &self.b
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    /// `a - b sqrt(d)`.
    pub fn conj(&self) -> Self {
        QuadRat {
            a: self.a.clone(),
            b: -self.b.clone(),
            d: self.d,
        }
    }

    /// `a^2 - d b^2`.
    pub fn norm(&self) -> BigRational {
        &self.a * &self.a - rat(self.d as i64) * &self.b * &self.b
    }

    fn same_field(&self, other: &Self) -> Result<(), ExactError> {
        if self.d == other.d {
            Ok(())
        } else {
            Err(ExactError::MixedDiscriminant(self.d, other.d))
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, ExactError> {
        self.same_field(other)?;
        Ok(QuadRat {
            a: &self.a + &other.a,
            b: &self.b + &other.b,
            d: self.d,
        })
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, ExactError> {
        self.same_field(other)?;
        Ok(QuadRat {
            a: &self.a - &other.a,
            b: &self.b - &other.b,
            d: self.d,
        })
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self, ExactError> {
        self.same_field(other)?;
        let d = rat(self.d as i64);
        Ok(QuadRat {
            a: &self.a * &other.a + d * &self.b * &other.b,
            b: &self.a * &other.b + &self.b * &other.a,
            d: self.d,
        })
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self, ExactError> {
        self.same_field(other)?;
        let n = other.norm();
        if n.is_zero() {
            return Err(ExactError::DivisionByZero);
        }
        let num = self.checked_mul(&other.conj())?;
        Ok(QuadRat {
            a: num.a / &n,
            b: num.b / &n,
            d: self.d,
        })
    }

    pub fn recip(&self) -> Result<Self, ExactError> {
        self.one_like().checked_div(self)
    }

    fn one_like(&self) -> Self {
        self.rational_like(BigRational::one())
    }

    /// Exact sign, decided by comparing `a^2` with `d b^2`.
    pub fn sign(&self) -> i8 {
        let sa = sign_of(&self.a);
        let sb = sign_of(&self.b);
        if sb == 0 {
            return sa;
        }
        if sa == 0 || sa == sb {
            return sb;
        }
        let a2 = &self.a * &self.a;
        let db2 = rat(self.d as i64) * &self.b * &self.b;
        match a2.cmp(&db2) {
            Ordering::Greater => sa,
            Ordering::Less => sb,
            // a^2 = d b^2 with b != 0 would make sqrt(d) rational
            Ordering::Equal => 0,
        }
    }

    /// Exact comparison with a rational.
    pub fn cmp_rational(&self, r: &BigRational) -> Ordering {
        let diff = QuadRat {
            a: &self.a - r,
            b: self.b.clone(),
            d: self.d,
        };
        diff.sign().cmp(&0)
    }

    pub fn compare_to_one(&self) -> Ordering {
        self.cmp_rational(&BigRational::one())
    }

    pub fn compare_to_minus_one(&self) -> Ordering {
        self.cmp_rational(&-BigRational::one())
    }

    pub fn abs(&self) -> Self {
        if self.sign() < 0 {
            -self
        } else {
            self.clone()
        }
    }

    /// Nearest-ish double: the value is scaled by `2^s` until its integer part
    /// has at least 80 bits, floored exactly with an integer square root, then
    /// converted. The result is within one ulp of `a + b sqrt(d)`.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        // (p + q sqrt d) / r with integers
        let r = self.a.denom() * self.b.denom();
        let p = self.a.numer() * self.b.denom();
        let q = self.b.numer() * self.a.denom();
        let d = BigInt::from(self.d);

        let top = p.bits().max(q.bits() + (64 - self.d.leading_zeros()) as u64 / 2 + 1);
        let mut s = FLOAT_BITS as i64 + r.bits() as i64 - top as i64;
        loop {
            let n = scaled_floor(&p, &q, &d, &r, s);
            let bits = n.bits();
            if bits >= FLOAT_BITS - 8 {
                return ldexp(n.to_f64().unwrap_or(f64::NAN), -s);
            }
            s += (FLOAT_BITS - bits) as i64 + 2;
        }
    }

    /// Parses forms such as `-11/2 - 13/2*sqrt(41)`, `3√41/82`, `0.25`, `1e-12`
    /// and the display form `a + b√d`. Every surd must be `sqrt(d)`.
    pub fn parse(input: &str, d: u64) -> Result<Self, ExactError> {
        if !is_square_free(d) {
            return Err(ExactError::NotSquareFree(d));
        }
        Parser::new(input, d).parse()
    }
}

fn sign_of(r: &BigRational) -> i8 {
    if r.is_zero() {
        0
    } else if r.is_positive() {
        1
    } else {
        -1
    }
}

/// `floor((p + q sqrt d) 2^s / r)`, up to one unit from the irrational part.
fn scaled_floor(p: &BigInt, q: &BigInt, d: &BigInt, r: &BigInt, s: i64) -> BigInt {
    let (p, q, r) = if s >= 0 {
        (p << (s as u64), q << (s as u64), r.clone())
    } else {
        (p.clone(), q.clone(), r << ((-s) as u64))
    };
    let root = (&q * &q * d).magnitude().sqrt();
    let t = match q.sign() {
        Sign::NoSign => BigInt::zero(),
        Sign::Plus => BigInt::from(root),
        Sign::Minus => -BigInt::from(root) - 1,
    };
    (p + t).div_floor(&r)
}

fn ldexp(x: f64, e: i64) -> f64 {
    let mut x = x;
    let mut e = e;
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e as i32)
}

impl fmt::Display for QuadRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_zero() {
            write!(f, "{}", self.a)
        } else {
            write!(f, "{} + {}√{}", self.a, self.b, self.d)
        }
    }
}

impl serde::Serialize for QuadRat {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl Neg for &QuadRat {
    type Output = QuadRat;
    fn neg(self) -> QuadRat {
        QuadRat {
            a: -self.a.clone(),
            b: -self.b.clone(),
            d: self.d,
        }
    }
}

impl Neg for QuadRat {
    type Output = QuadRat;
    fn neg(self) -> QuadRat {
        -&self
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl $trait<&QuadRat> for &QuadRat {
            type Output = QuadRat;
            fn $method(self, rhs: &QuadRat) -> QuadRat {
                match self.$checked(rhs) {
                    Ok(v) => v,
                    Err(e) => panic!("{e}"),
                }
            }
        }
        impl $trait<QuadRat> for QuadRat {
            type Output = QuadRat;
            fn $method(self, rhs: QuadRat) -> QuadRat {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&QuadRat> for QuadRat {
            type Output = QuadRat;
            fn $method(self, rhs: &QuadRat) -> QuadRat {
                (&self).$method(rhs)
            }
        }
    };
}

binop!(Add, add, checked_add);
binop!(Sub, sub, checked_sub);
binop!(Mul, mul, checked_mul);
binop!(Div, div, checked_div);

struct Parser<'a> {
    input: &'a str,
    chars: Vec<char>,
    pos: usize,
    d: u64,
}

impl<'a> Parser<'a> {
    fn new(input: &'a str, d: u64) -> Self {
        Parser {
            input,
            chars: input.chars().filter(|c| !c.is_whitespace()).collect(),
            pos: 0,
            d,
        }
    }

    fn fail(&self, reason: impl Into<String>) -> ExactError {
        ExactError::Parse {
            input: self.input.to_string(),
            reason: reason.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_str(&mut self, s: &str) -> bool {
        let n = s.chars().count();
        if self.chars.len() >= self.pos + n && self.chars[self.pos..self.pos + n].iter().copied().eq(s.chars()) {
            self.pos += n;
            true
        } else {
            false
        }
    }

    fn parse(mut self) -> Result<QuadRat, ExactError> {
        if self.chars.is_empty() {
            return Err(self.fail("empty input"));
        }
        let raw: Vec<char> = self.input.chars().collect();
        for (i, c) in raw.iter().enumerate() {
            if c.is_whitespace() {
                let before = raw[..i].iter().rev().find(|c| !c.is_whitespace());
                let after = raw[i..].iter().find(|c| !c.is_whitespace());
                if let (Some(b), Some(a)) = (before, after) {
                    if (b.is_ascii_alphanumeric() || *b == '.') && (a.is_ascii_digit() || *a == '.') {
                        return Err(self.fail("whitespace inside a number"));
                    }
                }
            }
        }
        let mut total = QuadRat {
            a: BigRational::zero(),
            b: BigRational::zero(),
            d: self.d,
        };
        let mut first = true;
        while self.pos < self.chars.len() {
            let mut negative = false;
            let mut saw_op = false;
            while let Some(c) = self.peek() {
                match c {
                    '+' => saw_op = true,
                    '-' | '−' => {
                        saw_op = true;
                        negative = !negative;
                    }
                    _ => break,
                }
                self.pos += 1;
            }
            if !first && !saw_op {
                return Err(self.fail(format!("expected '+' or '-' at position {}", self.pos)));
            }
            first = false;
            let (value, surd) = self.term()?;
            let value = if negative { -value } else { value };
            if surd {
                total.b += value;
            } else {
                total.a += value;
            }
        }
        Ok(total)
    }

    /// `[number] ['/' number] [['*'] surd] ['/' number]`
    fn term(&mut self) -> Result<(BigRational, bool), ExactError> {
        let mut value = BigRational::one();
        let mut have_number = false;
        if self.peek().is_some_and(|c| c.is_ascii_digit() || c == '.') {
            value = self.number()?;
            have_number = true;
            if self.eat('/') {
                value /= self.nonzero_number()?;
            }
        }
        self.eat('*');
        let surd = self.surd()?;
        if !have_number && !surd {
            return Err(self.fail(format!("expected a number at position {}", self.pos)));
        }
        if surd && self.eat('/') {
            value /= self.nonzero_number()?;
        }
        Ok((value, surd))
    }

    fn surd(&mut self) -> Result<bool, ExactError> {
        let radicand = if self.eat('√') {
            if self.eat('(') {
                let v = self.integer()?;
                if !self.eat(')') {
                    return Err(self.fail("unclosed '('"));
                }
                v
            } else {
                self.integer()?
            }
        } else if self.eat_str("sqrt(") {
            let v = self.integer()?;
            if !self.eat(')') {
                return Err(self.fail("unclosed 'sqrt('"));
            }
            v
        } else {
            return Ok(false);
        };
        if radicand != self.d {
            return Err(ExactError::MixedDiscriminant(self.d, radicand));
        }
        Ok(true)
    }

    fn integer(&mut self) -> Result<u64, ExactError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        s.parse().map_err(|_| self.fail(format!("expected an integer at position {start}")))
    }

    fn nonzero_number(&mut self) -> Result<BigRational, ExactError> {
        let v = self.number()?;
        if v.is_zero() {
            return Err(ExactError::DivisionByZero);
        }
        Ok(v)
    }

    /// Decimal literal with optional fraction and exponent, read exactly.
    fn number(&mut self) -> Result<BigRational, ExactError> {
        let start = self.pos;
        let mut digits = String::new();
        let mut frac_len = 0i64;
        let mut seen_dot = false;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                digits.push(c);
                if seen_dot {
                    frac_len += 1;
                }
            } else if c == '.' && !seen_dot {
                seen_dot = true;
            } else {
                break;
            }
            self.pos += 1;
        }
        if digits.is_empty() {
            return Err(self.fail(format!("expected a number at position {start}")));
        }
        let mut exponent = -frac_len;
        if matches!(self.peek(), Some('e' | 'E')) {
            self.pos += 1;
            let neg = if self.eat('-') {
                true
            } else {
                self.eat('+');
                false
            };
            let e = self.integer()? as i64;
            exponent += if neg { -e } else { e };
        }
        let mantissa: BigInt = digits.parse().map_err(|_| self.fail("bad digits"))?;
        let ten = BigInt::from(10);
        let scale = num_traits::pow(ten, exponent.unsigned_abs() as usize);
        Ok(if exponent >= 0 {
            BigRational::from_integer(mantissa * scale)
        } else {
            BigRational::new(mantissa, scale)
        })
    }
}

/// Roots of a monic quadratic `z^2 + c1 z + c0` with rational coefficients,
/// expressed in `Q(sqrt d)`.
///
/// `d` is the square-free part of the discriminant; when the discriminant is a
/// rational square the roots are rational and `fallback_d` names the field.
/// Complex roots and explicit `d` values that do not match are rejected.
pub fn quadratic_roots(
    c1: &BigRational,
    c0: &BigRational,
    requested_d: Option<u64>,
) -> Result<(u64, QuadRat, QuadRat), ExactError> {
    let disc = c1 * c1 - rat(4) * c0;
    if disc.is_negative() {
        return Err(ExactError::ExactModeUnsupported(
            "closed-loop eigenvalues are complex".into(),
        ));
    }
    let num = disc.numer().magnitude() * disc.denom().magnitude();
    let (square, free) = square_free_split(&num, 1_000_000).ok_or_else(|| {
        ExactError::ExactModeUnsupported("discriminant too large to factor".into())
    })?;
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let centre = -c1 * &half;
    // sqrt(disc) = square * sqrt(free) / denom
    let root_coeff = BigRational::new(BigInt::from(square), disc.denom().clone()) * &half;
    if free.is_one() || disc.is_zero() {
        let d = requested_d.unwrap_or(2);
        let r1 = QuadRat::rational(&centre + &root_coeff, d)?;
        let r2 = QuadRat::rational(&centre - &root_coeff, d)?;
        return Ok((d, r1, r2));
    }
    let d = free.to_u64().ok_or_else(|| {
        ExactError::ExactModeUnsupported("square-free part exceeds 64 bits".into())
    })?;
    if let Some(req) = requested_d {
        if req != d {
            return Err(ExactError::ExactModeUnsupported(format!(
                "closed-loop eigenvalues lie in Q(sqrt {d}), not Q(sqrt {req})"
            )));
        }
    }
    let r1 = QuadRat::new(centre.clone(), root_coeff.clone(), d)?;
    let r2 = QuadRat::new(centre, -root_coeff, d)?;
    Ok((d, r1, r2))
}
