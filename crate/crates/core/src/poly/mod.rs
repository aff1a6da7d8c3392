//! Dense univariate polynomials, interpolation and multipoint evaluation.
//!
//! Every operation that grows with the number of points comes in two
//! flavours: a quadratic *naive* path and a subproduct-tree *fast* path built
//! on Karatsuba multiplication and Newton-iteration division. Both return
//! identical results; they differ only in how many field operations they
//! spend.

mod domain;
pub mod ntt;
mod progression;
mod tree;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Fe, Field};

pub use domain::{lagrange_coeffs, EvalDomain};
pub use progression::Extrapolation;
pub use tree::{interpolate, multipoint_eval, PointSet, SubproductTree};

/// Below this many points `Auto` picks the naive path.
pub const FAST_THRESHOLD: usize = 32;

/// Operand length at or below which multiplication is schoolbook.
const KARATSUBA_CUTOFF: usize = 8;

/// Quotient length below which division is plain long division.
const NEWTON_CUTOFF: usize = 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvalMode {
    Naive,
    Fast,
    /// Naive below `threshold` points, fast from there on.
    #[default]
    Auto,
    AutoAt(usize),
}

impl EvalMode {
    /// Concrete choice for a problem of `n` points.
    pub fn resolve(self, n: usize) -> EvalMode {
        match self {
            EvalMode::Auto => EvalMode::AutoAt(FAST_THRESHOLD).resolve(n),
            EvalMode::AutoAt(t) if n < t => EvalMode::Naive,
            EvalMode::AutoAt(_) => EvalMode::Fast,
            m => m,
        }
    }

    pub fn is_fast(self, n: usize) -> bool {
        self.resolve(n) == EvalMode::Fast
    }
}

/// Polynomial in coefficient form, lowest degree first. The highest stored
/// coefficient is nonzero; the zero polynomial has no coefficients.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensePoly {
    field: Field,
    coeffs: Vec<Fe>,
}

impl fmt::Debug for DensePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for DensePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}z")?,
                _ => write!(f, "{c}z^{i}")?,
            }
        }
        Ok(())
    }
}

impl DensePoly {
    pub fn new(field: Field, mut coeffs: Vec<Fe>) -> Self {
        assert!(coeffs.iter().all(|c| c.field() == field), "mixed-field coefficients");
        while coeffs.last().is_some_and(Fe::is_zero) {
            coeffs.pop();
        }
        DensePoly { field, coeffs }
    }

    pub fn from_u64(field: Field, coeffs: &[u64]) -> Self {
        Self::new(field, coeffs.iter().map(|&c| field.elem(c)).collect())
    }

    pub fn zero(field: Field) -> Self {
        DensePoly { field, coeffs: Vec::new() }
    }

    pub fn constant(c: Fe) -> Self {
        Self::new(c.field(), vec![c])
    }

    /// `z - root`.
    pub fn linear_root(root: Fe) -> Self {
        Self::new(root.field(), vec![-root, root.field().one()])
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[Fe] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> Fe {
        self.coeffs.get(i).copied().unwrap_or(self.field.zero())
    }

    pub fn leading(&self) -> Option<Fe> {
        self.coeffs.last().copied()
    }

    /// Horner evaluation.
    pub fn eval(&self, x: Fe) -> Fe {
        let mut it = self.coeffs.iter().rev();
        let Some(&top) = it.next() else {
            return self.field.zero();
        };
        it.fold(top, |acc, &c| acc * x + c)
    }

    pub fn add(&self, o: &DensePoly) -> DensePoly {
        DensePoly::new(self.field, add_slices(&self.coeffs, &o.coeffs))
    }

    pub fn sub(&self, o: &DensePoly) -> DensePoly {
        let n = self.coeffs.len().max(o.coeffs.len());
        let out = (0..n)
            .map(|i| match (self.coeffs.get(i), o.coeffs.get(i)) {
                (Some(&a), Some(&b)) => a - b,
                (Some(&a), None) => a,
                (None, Some(&b)) => -b,
                (None, None) => unreachable!(),
            })
            .collect();
        DensePoly::new(self.field, out)
    }

    pub fn scale(&self, s: Fe) -> DensePoly {
        DensePoly::new(self.field, self.coeffs.iter().map(|&c| c * s).collect())
    }

    /// Schoolbook product.
    pub fn mul_naive(&self, o: &DensePoly) -> DensePoly {
        DensePoly::new(self.field, schoolbook(&self.coeffs, &o.coeffs))
    }

    /// Karatsuba product.
    pub fn mul_fast(&self, o: &DensePoly) -> DensePoly {
        DensePoly::new(self.field, karatsuba(&self.coeffs, &o.coeffs))
    }

    pub fn mul(&self, o: &DensePoly, mode: EvalMode) -> DensePoly {
        let n = self.coeffs.len().max(o.coeffs.len());
        if mode.is_fast(n) {
            self.mul_fast(o)
        } else {
            self.mul_naive(o)
        }
    }

    pub fn derivative(&self) -> DensePoly {
        let out = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| c * self.field.integer(i as u64))
            .collect();
        DensePoly::new(self.field, out)
    }

    /// Long division: `self = q * d + r` with `deg r < deg d`.
    pub fn divrem(&self, d: &DensePoly) -> Result<(DensePoly, DensePoly)> {
        let Some(dd) = d.degree() else {
            return Err(Error::DivisionByZero);
        };
        if self.coeffs.len() <= dd {
            return Ok((DensePoly::zero(self.field), self.clone()));
        }
        let lc = d.coeffs[dd];
        let lc_inv = if lc.is_one() { None } else { Some(lc.inv()?) };
        let mut r = self.coeffs.clone();
        let qlen = r.len() - dd;
        let mut q = vec![self.field.zero(); qlen];
        for i in (0..qlen).rev() {
            let top = r[i + dd];
            if top.is_zero() {
                continue;
            }
            let c = match lc_inv {
                Some(inv) => top * inv,
                None => top,
            };
            q[i] = c;
            for j in 0..dd {
                let t = c * d.coeffs[j];
                r[i + j] -= t;
            }
            r[i + dd] = self.field.zero();
        }
        r.truncate(dd);
        Ok((DensePoly::new(self.field, q), DensePoly::new(self.field, r)))
    }

    /// Division via a Newton-iteration inverse of the reversed divisor.
    pub fn divrem_fast(&self, d: &DensePoly) -> Result<(DensePoly, DensePoly)> {
        let Some(dd) = d.degree() else {
            return Err(Error::DivisionByZero);
        };
        if self.coeffs.len() <= dd {
            return Ok((DensePoly::zero(self.field), self.clone()));
        }
        let qlen = self.coeffs.len() - dd;
        if qlen < NEWTON_CUTOFF {
            return self.divrem(d);
        }
        let rev_d: Vec<Fe> = d.coeffs.iter().rev().copied().collect();
        let inv = inverse_series(&rev_d, qlen)?;
        Ok(self.divrem_with_inverse(d, &inv))
    }

    /// Division given `inv = 1 / rev(d) mod z^k` for some `k >= deg(self) - deg(d) + 1`.
    pub(crate) fn divrem_with_inverse(&self, d: &DensePoly, inv: &[Fe]) -> (DensePoly, DensePoly) {
        let dd = d.degree().expect("nonzero divisor");
        if self.coeffs.len() <= dd {
            return (DensePoly::zero(self.field), self.clone());
        }
        let qlen = self.coeffs.len() - dd;
        debug_assert!(inv.len() >= qlen);
        let rev_a: Vec<Fe> = self.coeffs.iter().rev().take(qlen).copied().collect();
        let mut rq = karatsuba(&rev_a, &inv[..qlen]);
        rq.resize(qlen, self.field.zero());
        rq.reverse();
        let q = DensePoly::new(self.field, rq);
        // only the low dd coefficients of q*d are needed for the remainder
        let low_d = &d.coeffs[..dd.min(d.coeffs.len())];
        let low_q = &q.coeffs[..q.coeffs.len().min(dd)];
        let mut qd = if low_q.is_empty() || low_d.is_empty() { Vec::new() } else { karatsuba(low_q, low_d) };
        qd.truncate(dd);
        let r: Vec<Fe> = (0..dd)
            .map(|i| {
                let a = self.coeff(i);
                match qd.get(i) {
                    Some(&t) => a - t,
                    None => a,
                }
            })
            .collect();
        (q, DensePoly::new(self.field, r))
    }
}

pub(crate) fn add_slices(a: &[Fe], b: &[Fe]) -> Vec<Fe> {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut out = long.to_vec();
    for (o, &s) in out.iter_mut().zip(short) {
        *o += s;
    }
    out
}

fn sub_in_place(acc: &mut [Fe], b: &[Fe]) {
    for (o, &s) in acc.iter_mut().zip(b) {
        *o -= s;
    }
}

fn add_shifted(acc: &mut Vec<Fe>, b: &[Fe], shift: usize, zero: Fe) {
    if acc.len() < shift + b.len() {
        acc.resize(shift + b.len(), zero);
    }
    for (i, &v) in b.iter().enumerate() {
        if i + shift < acc.len() && acc[i + shift].is_zero() {
            acc[i + shift] = v;
        } else {
            acc[i + shift] += v;
        }
    }
}

/// `la * lb` multiplications and `(la - 1)(lb - 1)` additions.
pub(crate) fn schoolbook(a: &[Fe], b: &[Fe]) -> Vec<Fe> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let lb = b.len();
    let mut out: Vec<Fe> = b.iter().map(|&y| a[0] * y).collect();
    out.reserve(a.len() - 1);
    for (i, &x) in a.iter().enumerate().skip(1) {
        for (j, &y) in b.iter().enumerate() {
            let t = x * y;
            if j == lb - 1 {
                out.push(t);
            } else {
                out[i + j] += t;
            }
        }
    }
    out
}

pub(crate) fn karatsuba(a: &[Fe], b: &[Fe]) -> Vec<Fe> {
    let (la, lb) = (a.len(), b.len());
    if la == 0 || lb == 0 {
        return Vec::new();
    }
    if la.min(lb) <= KARATSUBA_CUTOFF {
        return schoolbook(a, b);
    }
    let zero = a[0].field().zero();
    let m = la.max(lb).div_ceil(2);
    if lb <= m || la <= m {
        // unbalanced: split only the longer operand
        let (long, short) = if la >= lb { (a, b) } else { (b, a) };
        let mut out = Vec::new();
        for (c, chunk) in long.chunks(short.len()).enumerate() {
            let p = karatsuba(chunk, short);
            add_shifted(&mut out, &p, c * short.len(), zero);
        }
        return out;
    }
    let (a0, a1) = a.split_at(m);
    let (b0, b1) = b.split_at(m);
    let z0 = karatsuba(a0, b0);
    let z2 = karatsuba(a1, b1);
    let sa = add_slices(a0, a1);
    let sb = add_slices(b0, b1);
    let mut z1 = karatsuba(&sa, &sb);
    sub_in_place(&mut z1, &z0);
    sub_in_place(&mut z1, &z2);
    let mut out = z0;
    add_shifted(&mut out, &z1, m, zero);
    add_shifted(&mut out, &z2, 2 * m, zero);
    out.truncate(la + lb - 1);
    out
}

/// Power series inverse of `f` modulo `z^k` (requires `f[0] != 0`).
pub(crate) fn inverse_series(f: &[Fe], k: usize) -> Result<Vec<Fe>> {
    let field = f[0].field();
    let mut g = vec![f[0].inv()?];
    let mut prec = 1;
    while prec < k {
        let next = (2 * prec).min(k);
        let ft = &f[..f.len().min(next)];
        // e = f * g mod z^next, which is 1 + z^prec * h
        let mut e = karatsuba(ft, &g);
        e.resize(next, field.zero());
        let h = &e[prec..next];
        // g <- g - z^prec * (g * h)
        let mut gh = karatsuba(&g[..g.len().min(next - prec)], h);
        gh.truncate(next - prec);
        g.resize(next, field.zero());
        for (i, t) in gh.into_iter().enumerate() {
            g[prec + i] = -t;
        }
        prec = next;
    }
    g.truncate(k);
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_poly(f: Field, len: usize, rng: &mut ChaCha8Rng) -> DensePoly {
        DensePoly::new(f, (0..len).map(|_| f.random(rng)).collect())
    }

    #[test]
    fn karatsuba_matches_schoolbook() {
        let f = Field::prime(97).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for la in 1..70 {
            for lb in [1, 2, 5, 9, 17, 33, la] {
                let a: Vec<Fe> = (0..la).map(|_| f.random(&mut rng)).collect();
                let b: Vec<Fe> = (0..lb).map(|_| f.random(&mut rng)).collect();
                assert_eq!(karatsuba(&a, &b), schoolbook(&a, &b), "{la}x{lb}");
            }
        }
    }

    #[test]
    fn schoolbook_op_count() {
        let f = Field::prime(97).unwrap();
        let a: Vec<Fe> = (1..=5).map(|v| f.elem(v)).collect();
        let b: Vec<Fe> = (1..=3).map(|v| f.elem(v)).collect();
        let (_, c) = crate::field::counter::measure(|| schoolbook(&a, &b));
        assert_eq!((c.muls, c.adds), (15, 8));
    }

    #[test]
    fn division_paths_agree() {
        let f = Field::prime(crate::field::P31).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (la, lb) in [(5, 3), (40, 3), (64, 20), (100, 51), (3, 5), (33, 1)] {
            let a = rand_poly(f, la, &mut rng);
            let b = rand_poly(f, lb, &mut rng);
            let (q, r) = a.divrem(&b).unwrap();
            assert_eq!(a.divrem_fast(&b).unwrap(), (q.clone(), r.clone()));
            assert_eq!(q.mul_naive(&b).add(&r), a);
            assert!(r.degree() < b.degree() || r.is_zero());
        }
        assert_eq!(DensePoly::from_u64(f, &[1, 2]).divrem(&DensePoly::zero(f)), Err(Error::DivisionByZero));
    }

    #[test]
    fn inverse_series_is_inverse() {
        let f = Field::prime(97).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s: Vec<Fe> = (0..30).map(|_| f.random(&mut rng)).collect();
        s[0] = f.elem(7);
        let g = inverse_series(&s, 23).unwrap();
        let mut prod = schoolbook(&s, &g);
        prod.truncate(23);
        assert!(prod[0].is_one());
        assert!(prod[1..].iter().all(Fe::is_zero));
    }

    #[test]
    fn display_and_degree() {
        let f = Field::prime(11).unwrap();
        let p = DensePoly::from_u64(f, &[1, 4, 3, 0, 0]);
        assert_eq!(p.degree(), Some(2));
        assert_eq!(p.to_string(), "3z^2 + 4z + 1");
        assert_eq!(DensePoly::zero(f).degree(), None);
        assert_eq!(p.derivative(), DensePoly::from_u64(f, &[4, 6]));
    }

    #[test]
    fn mode_resolution() {
        assert_eq!(EvalMode::Auto.resolve(31), EvalMode::Naive);
        assert_eq!(EvalMode::Auto.resolve(32), EvalMode::Fast);
        assert_eq!(EvalMode::AutoAt(100).resolve(64), EvalMode::Naive);
        assert_eq!(EvalMode::Fast.resolve(2), EvalMode::Fast);
    }

    proptest! {
        #[test]
        fn prop_mul_paths_agree(a in proptest::collection::vec(0u64..97, 0..80), b in proptest::collection::vec(0u64..97, 0..80)) {
            let f = Field::prime(97).unwrap();
            let (pa, pb) = (DensePoly::from_u64(f, &a), DensePoly::from_u64(f, &b));
            prop_assert_eq!(pa.mul_fast(&pb), pa.mul_naive(&pb));
        }
    }
}
