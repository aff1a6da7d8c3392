//! Exact arithmetic over a prime field `F_p` or a binary extension `GF(2^m)`.
//!
//! A [`Field`] is a small `Copy` descriptor; a [`Fe`] carries its canonical
//! representative together with the field it lives in, so operands from two
//! different fields are caught instead of silently producing garbage. The
//! arithmetic operators panic on mixed operands; the `try_*` methods return
//! [`Error::MixedFields`] instead.

pub mod counter;

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported prime; keeps `a + b` inside a `u64`.
pub const MAX_PRIME: u64 = (1 << 62) - 1;

/// Mersenne prime used for large sweeps.
pub const P31: u64 = (1 << 31) - 1;

/// `15 * 2^27 + 1`: transforms up to length `2^27`.
pub const P_NTT: u64 = 2013265921;

/// Lowest-weight irreducible polynomials over GF(2), degree 1..=32, as
/// bitmasks including the leading term.
const BINARY_REDUCTION: [u64; 32] = [
    0b11,                                       // x + 1
    0b111,                                      // x^2 + x + 1
    0b1011,                                     // x^3 + x + 1
    0b1_0011,                                   // x^4 + x + 1
    0b10_0101,                                  // x^5 + x^2 + 1
    0b100_0011,                                 // x^6 + x + 1
    0b1000_0011,                                // x^7 + x + 1
    0x11b,                                      // x^8 + x^4 + x^3 + x + 1
    (1 << 9) | 0b11,                            // x^9 + x + 1
    (1 << 10) | (1 << 3) | 1,                   // x^10 + x^3 + 1
    (1 << 11) | (1 << 2) | 1,                   // x^11 + x^2 + 1
    (1 << 12) | (1 << 3) | 1,                   // x^12 + x^3 + 1
    (1 << 13) | (1 << 4) | (1 << 3) | 0b11,     // x^13 + x^4 + x^3 + x + 1
    (1 << 14) | (1 << 5) | 1,                   // x^14 + x^5 + 1
    (1 << 15) | 0b11,                           // x^15 + x + 1
    (1 << 16) | (1 << 5) | (1 << 3) | 0b11,     // x^16 + x^5 + x^3 + x + 1
    (1 << 17) | (1 << 3) | 1,                   // x^17 + x^3 + 1
    (1 << 18) | (1 << 3) | 1,                   // x^18 + x^3 + 1
    (1 << 19) | (1 << 5) | (1 << 2) | 0b11,     // x^19 + x^5 + x^2 + x + 1
    (1 << 20) | (1 << 3) | 1,                   // x^20 + x^3 + 1
    (1 << 21) | (1 << 2) | 1,                   // x^21 + x^2 + 1
    (1 << 22) | 0b11,                           // x^22 + x + 1
    (1 << 23) | (1 << 5) | 1,                   // x^23 + x^5 + 1
    (1 << 24) | (1 << 4) | (1 << 3) | 0b11,     // x^24 + x^4 + x^3 + x + 1
    (1 << 25) | (1 << 3) | 1,                   // x^25 + x^3 + 1
    (1 << 26) | (1 << 4) | (1 << 3) | 0b11,     // x^26 + x^4 + x^3 + x + 1
    (1 << 27) | (1 << 5) | (1 << 2) | 0b11,     // x^27 + x^5 + x^2 + x + 1
    (1 << 28) | 0b11,                           // x^28 + x + 1
    (1 << 29) | (1 << 2) | 1,                   // x^29 + x^2 + 1
    (1 << 30) | 0b11,                           // x^30 + x + 1
    (1 << 31) | (1 << 3) | 1,                   // x^31 + x^3 + 1
    (1 << 32) | (1 << 7) | (1 << 3) | (1 << 2) | 1, // x^32 + x^7 + x^3 + x^2 + 1
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldKind {
    Prime,
    BinaryExtension,
}

/// Field descriptor: `F_p`, or `GF(2^m)` with a fixed reduction polynomial.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "FieldRepr", into = "FieldRepr")]
pub struct Field {
    kind: FieldKind,
    degree: u32,
    /// `p` for prime fields, the reduction polynomial for binary ones.
    modulus: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum FieldRepr {
    Prime { p: u64 },
    Binary { m: u32, poly: u64 },
}

impl TryFrom<FieldRepr> for Field {
    type Error = Error;
    fn try_from(r: FieldRepr) -> Result<Field> {
        match r {
            FieldRepr::Prime { p } => Field::prime(p),
            FieldRepr::Binary { poly, .. } => Field::binary_with_poly(poly),
        }
    }
}

impl From<Field> for FieldRepr {
    fn from(f: Field) -> FieldRepr {
        match f.kind {
            FieldKind::Prime => FieldRepr::Prime { p: f.modulus },
            FieldKind::BinaryExtension => FieldRepr::Binary { m: f.degree, poly: f.modulus },
        }
    }
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FieldKind::Prime => write!(f, "F_{}", self.modulus),
            FieldKind::BinaryExtension => write!(f, "GF(2^{})/{:#x}", self.degree, self.modulus),
        }
    }
}

impl std::str::FromStr for Field {
    type Err = Error;

    /// Accepts `p31`, `prime:<p>`, `<p>`, `gf2^<m>` or `binary:<m>`.
    fn from_str(s: &str) -> Result<Field> {
        let s = s.trim().to_ascii_lowercase();
        let bad = || Error::Config(format!("unrecognized field `{s}`"));
        if s == "p31" {
            return Field::prime(P31);
        }
        if let Some(m) = s.strip_prefix("gf2^").or_else(|| s.strip_prefix("binary:")) {
            return Field::binary(m.parse().map_err(|_| bad())?);
        }
        let p = s.strip_prefix("prime:").unwrap_or(&s);
        Field::prime(p.parse().map_err(|_| bad())?)
    }
}

impl Field {
    pub fn prime(p: u64) -> Result<Field> {
        if !(2..=MAX_PRIME).contains(&p) {
            return Err(Error::Config(format!("modulus {p} out of range [2, 2^62)")));
        }
        if !is_prime(p) {
            return Err(Error::Config(format!("modulus {p} is not prime")));
        }
        Ok(Field { kind: FieldKind::Prime, degree: 1, modulus: p })
    }

    /// `GF(2^m)` with the built-in reduction polynomial, `1 <= m <= 32`.
    pub fn binary(m: u32) -> Result<Field> {
        if !(1..=32).contains(&m) {
            return Err(Error::Config(format!("extension degree {m} out of range [1, 32]")));
        }
        Ok(Field { kind: FieldKind::BinaryExtension, degree: m, modulus: BINARY_REDUCTION[m as usize - 1] })
    }

    /// `GF(2^m)` reduced by an explicit polynomial (bitmask including `x^m`).
    pub fn binary_with_poly(poly: u64) -> Result<Field> {
        if poly < 2 {
            return Err(Error::Config("reduction polynomial must have degree >= 1".into()));
        }
        let m = 63 - poly.leading_zeros();
        if m > 32 {
            return Err(Error::Config(format!("extension degree {m} out of range [1, 32]")));
        }
        if !gf2::is_irreducible(poly) {
            return Err(Error::Config(format!("{poly:#x} is reducible over GF(2)")));
        }
        Ok(Field { kind: FieldKind::BinaryExtension, degree: m, modulus: poly })
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn is_binary(&self) -> bool {
        self.kind == FieldKind::BinaryExtension
    }

    /// `p` for prime fields, `m` for `GF(2^m)`.
    pub fn characteristic_or_degree(&self) -> u64 {
        match self.kind {
            FieldKind::Prime => self.modulus,
            FieldKind::BinaryExtension => self.degree as u64,
        }
    }

    /// Reduction polynomial of a binary field, `None` for prime fields.
    pub fn reduction_poly(&self) -> Option<u64> {
        self.is_binary().then_some(self.modulus)
    }

    pub fn order(&self) -> u128 {
        match self.kind {
            FieldKind::Prime => self.modulus as u128,
            FieldKind::BinaryExtension => 1u128 << self.degree,
        }
    }

    /// Bits needed for one canonical element.
    pub fn element_bits(&self) -> u32 {
        match self.kind {
            FieldKind::Prime => 64 - (self.modulus - 1).leading_zeros(),
            FieldKind::BinaryExtension => self.degree,
        }
    }

    /// Bytes needed to store one element.
    pub fn element_bytes(&self) -> usize {
        (self.element_bits() as usize).div_ceil(8).max(1)
    }

    /// Canonical element from an integer (reduced mod `p`, or as a bit
    /// pattern reduced by the field polynomial).
    pub fn elem(&self, v: u64) -> Fe {
        let value = match self.kind {
            FieldKind::Prime => v % self.modulus,
            FieldKind::BinaryExtension => gf2::reduce(v as u128, self.modulus),
        };
        Fe { value, field: *self }
    }

    /// `n * 1`, the image of an integer under the ring map `Z -> F`.
    pub fn integer(&self, n: u64) -> Fe {
        match self.kind {
            FieldKind::Prime => self.elem(n),
            FieldKind::BinaryExtension => Fe { value: n & 1, field: *self },
        }
    }

    /// Element from an already-canonical value.
    pub fn try_elem(&self, v: u64) -> Result<Fe> {
        if (v as u128) >= self.order() {
            return Err(Error::Domain(format!("{v} is not a canonical element of {self}")));
        }
        Ok(Fe { value: v, field: *self })
    }

    pub fn zero(&self) -> Fe {
        Fe { value: 0, field: *self }
    }

    pub fn one(&self) -> Fe {
        Fe { value: 1, field: *self }
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> Fe {
        let value = match self.kind {
            FieldKind::Prime => rng.gen_range(0..self.modulus),
            FieldKind::BinaryExtension => rng.gen_range(0..(1u64 << self.degree)),
        };
        Fe { value, field: *self }
    }

    pub fn random_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> Fe {
        loop {
            let v = self.random(rng);
            if !v.is_zero() {
                return v;
            }
        }
    }

    /// All elements in canonical order. Only sensible for small fields.
    pub fn elements(&self) -> impl Iterator<Item = Fe> + '_ {
        let n = self.order().min(u64::MAX as u128) as u64;
        (0..n).map(move |v| Fe { value: v, field: *self })
    }

    /// Appendix-style bit embedding into `GF(2^m)`: `0 -> 00..0`, `1 -> 00..01`.
    pub fn embed_bit(&self, b: u8) -> Result<Fe> {
        if !self.is_binary() {
            return Err(Error::Config(format!("bit embedding requires a binary extension field, got {self}")));
        }
        if b > 1 {
            return Err(Error::Domain(format!("{b} is not a bit")));
        }
        Ok(Fe { value: b as u64, field: *self })
    }
}

/// A canonical field element tagged with its field.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "FeRepr", into = "FeRepr")]
pub struct Fe {
    value: u64,
    field: Field,
}

#[derive(Serialize, Deserialize)]
struct FeRepr {
    v: u64,
    f: Field,
}

impl TryFrom<FeRepr> for Fe {
    type Error = Error;
    fn try_from(r: FeRepr) -> Result<Fe> {
        r.f.try_elem(r.v)
    }
}

impl From<Fe> for FeRepr {
    fn from(e: Fe) -> FeRepr {
        FeRepr { v: e.value, f: e.field }
    }
}

impl fmt::Debug for Fe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl fmt::Display for Fe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl Fe {
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    pub fn is_one(&self) -> bool {
        self.value == 1
    }

    #[inline]
    fn check(&self, other: &Fe) -> Result<()> {
        if self.field == other.field {
            Ok(())
        } else {
            Err(Error::MixedFields)
        }
    }

    #[inline]
    fn raw_add(&self, o: &Fe) -> u64 {
        match self.field.kind {
            FieldKind::Prime => {
                let s = self.value + o.value;
                if s >= self.field.modulus {
                    s - self.field.modulus
                } else {
                    s
                }
            }
            FieldKind::BinaryExtension => self.value ^ o.value,
        }
    }

    #[inline]
    fn raw_sub(&self, o: &Fe) -> u64 {
        match self.field.kind {
            FieldKind::Prime => {
                if self.value >= o.value {
                    self.value - o.value
                } else {
                    self.value + self.field.modulus - o.value
                }
            }
            FieldKind::BinaryExtension => self.value ^ o.value,
        }
    }

    #[inline]
    fn raw_mul(&self, o: &Fe) -> u64 {
        match self.field.kind {
            FieldKind::Prime => ((self.value as u128 * o.value as u128) % self.field.modulus as u128) as u64,
            FieldKind::BinaryExtension => gf2::reduce(gf2::clmul(self.value, o.value), self.field.modulus),
        }
    }

    pub fn try_add(self, o: Fe) -> Result<Fe> {
        self.check(&o)?;
        counter::record_add();
        Ok(Fe { value: self.raw_add(&o), field: self.field })
    }

    pub fn try_sub(self, o: Fe) -> Result<Fe> {
        self.check(&o)?;
        counter::record_add();
        Ok(Fe { value: self.raw_sub(&o), field: self.field })
    }

    pub fn try_mul(self, o: Fe) -> Result<Fe> {
        self.check(&o)?;
        counter::record_mul();
        Ok(Fe { value: self.raw_mul(&o), field: self.field })
    }

    /// Multiplicative inverse by the extended Euclidean algorithm.
    pub fn inv(self) -> Result<Fe> {
        if self.value == 0 {
            return Err(Error::DivisionByZero);
        }
        counter::record_inv();
        let value = match self.field.kind {
            FieldKind::Prime => inv_mod(self.value, self.field.modulus),
            FieldKind::BinaryExtension => gf2::inv(self.value, self.field.modulus),
        };
        Ok(Fe { value, field: self.field })
    }

    pub fn try_div(self, o: Fe) -> Result<Fe> {
        self.check(&o)?;
        self.try_mul(o.inv()?)
    }

    pub fn pow(self, mut e: u64) -> Fe {
        let mut base = self;
        let mut acc = self.field.one();
        let mut first = true;
        while e > 0 {
            if e & 1 == 1 {
                acc = if first { base } else { acc * base };
                first = false;
            }
            e >>= 1;
            if e > 0 {
                base = base * base;
            }
        }
        acc
    }
}

impl Add for Fe {
    type Output = Fe;
    #[inline]
    fn add(self, o: Fe) -> Fe {
        self.try_add(o).expect("mixed-field operands")
    }
}

impl Sub for Fe {
    type Output = Fe;
    #[inline]
    fn sub(self, o: Fe) -> Fe {
        self.try_sub(o).expect("mixed-field operands")
    }
}

impl Mul for Fe {
    type Output = Fe;
    #[inline]
    fn mul(self, o: Fe) -> Fe {
        self.try_mul(o).expect("mixed-field operands")
    }
}

impl Div for Fe {
    type Output = Fe;
    fn div(self, o: Fe) -> Fe {
        self.try_div(o).expect("invalid division")
    }
}

impl Neg for Fe {
    type Output = Fe;
    fn neg(self) -> Fe {
        counter::record_add();
        let value = match self.field.kind {
            FieldKind::Prime if self.value != 0 => self.field.modulus - self.value,
            _ => self.value,
        };
        Fe { value, field: self.field }
    }
}

impl AddAssign for Fe {
    fn add_assign(&mut self, o: Fe) {
        *self = *self + o;
    }
}

impl SubAssign for Fe {
    fn sub_assign(&mut self, o: Fe) {
        *self = *self - o;
    }
}

impl MulAssign for Fe {
    fn mul_assign(&mut self, o: Fe) {
        *self = *self * o;
    }
}

/// Invert every nonzero element of `xs` with one field inversion
/// (Montgomery's trick).
pub fn batch_inverse(xs: &[Fe]) -> Result<Vec<Fe>> {
    let Some(first) = xs.first() else {
        return Ok(Vec::new());
    };
    let mut prefix = Vec::with_capacity(xs.len());
    let mut acc = *first;
    prefix.push(acc);
    for x in &xs[1..] {
        acc *= *x;
        prefix.push(acc);
    }
    let mut inv = acc.inv()?;
    let mut out = vec![first.field().zero(); xs.len()];
    for i in (1..xs.len()).rev() {
        out[i] = inv * prefix[i - 1];
        inv *= xs[i];
    }
    out[0] = inv;
    Ok(out)
}

fn inv_mod(a: u64, p: u64) -> u64 {
    let (mut r0, mut r1) = (p as i128, a as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    debug_assert_eq!(r0, 1);
    t0.rem_euclid(p as i128) as u64
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in SMALL {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut r = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                r = mulmod(r, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        r
    };
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in SMALL {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Bit-polynomial helpers over GF(2).
pub(crate) mod gf2 {
    pub fn clmul(a: u64, b: u64) -> u128 {
        let mut acc = 0u128;
        let mut b = b;
        let a = a as u128;
        let mut shift = 0;
        while b != 0 {
            if b & 1 == 1 {
                acc ^= a << shift;
            }
            b >>= 1;
            shift += 1;
        }
        acc
    }

    fn degree(p: u128) -> i32 {
        127 - p.leading_zeros() as i32
    }

    pub fn reduce(mut v: u128, poly: u64) -> u64 {
        let m = degree(poly as u128);
        let poly = poly as u128;
        while degree(v) >= m {
            v ^= poly << (degree(v) - m);
        }
        v as u64
    }

    pub fn mulmod(a: u64, b: u64, poly: u64) -> u64 {
        reduce(clmul(a, b), poly)
    }

    pub fn gcd(mut a: u64, mut b: u64) -> u64 {
        while b != 0 {
            a = reduce(a as u128, b);
            std::mem::swap(&mut a, &mut b);
        }
        a
    }

    pub fn inv(a: u64, poly: u64) -> u64 {
        let (mut r0, mut r1) = (poly as u128, a as u128);
        let (mut t0, mut t1) = (0u128, 1u128);
        while r1 != 0 {
            let mut q = 0u128;
            let mut r = r0;
            let d1 = degree(r1);
            while r != 0 && degree(r) >= d1 {
                let s = degree(r) - d1;
                q ^= 1 << s;
                r ^= r1 << s;
            }
            let qt = clmul_wide(q, t1);
            (r0, r1) = (r1, r);
            (t0, t1) = (t1, t0 ^ qt);
        }
        reduce(t0, poly)
    }

    fn clmul_wide(a: u128, b: u128) -> u128 {
        let mut acc = 0u128;
        let mut b = b;
        let mut shift = 0;
        while b != 0 {
            if b & 1 == 1 {
                acc ^= a << shift;
            }
            b >>= 1;
            shift += 1;
        }
        acc
    }

    /// Ben-Or irreducibility test.
    pub fn is_irreducible(poly: u64) -> bool {
        let m = degree(poly as u128);
        if m < 1 {
            return false;
        }
        if m == 1 {
            return true;
        }
        let mut xp = 0b10u64; // x
        for _ in 0..m / 2 {
            xp = mulmod(xp, xp, poly);
            if gcd(poly, xp ^ 0b10) != 1 {
                return false;
            }
        }
        true
    }
}
