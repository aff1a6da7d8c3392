//! Reed-Solomon decoding of noisy evaluations: Berlekamp-Welch by Gaussian
//! elimination, and a Gao-style decoder (interpolation plus a partial
//! extended Euclidean run) for the single-worker path.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{counter, Fe, Field};
use crate::linalg::{solve, Matrix};
use crate::poly::{DensePoly, EvalMode, PointSet};

/// Received evaluations `g_i` at points `alpha_i`; `None` marks a value
/// that never arrived.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoisyCodeword {
    points: Vec<Fe>,
    values: Vec<Option<Fe>>,
    degree_bound: usize,
    error_budget: usize,
}

impl NoisyCodeword {
    pub fn new(points: Vec<Fe>, values: Vec<Option<Fe>>, degree_bound: usize, error_budget: usize) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::Domain(format!("{} points but {} values", points.len(), values.len())));
        }
        let mut seen = HashSet::new();
        if let Some(x) = points.iter().find(|x| !seen.insert(x.value())) {
            return Err(Error::Domain(format!("point {x} appears twice")));
        }
        Ok(NoisyCodeword { points, values, degree_bound, error_budget })
    }

    /// Every value present.
    pub fn complete(points: Vec<Fe>, values: Vec<Fe>, degree_bound: usize, error_budget: usize) -> Result<Self> {
        Self::new(points, values.into_iter().map(Some).collect(), degree_bound, error_budget)
    }

    pub fn points(&self) -> &[Fe] {
        &self.points
    }

    pub fn values(&self) -> &[Option<Fe>] {
        &self.values
    }

    pub fn degree_bound(&self) -> usize {
        self.degree_bound
    }

    pub fn error_budget(&self) -> usize {
        self.error_budget
    }

    /// Number of values that arrived.
    pub fn present(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    fn received(&self) -> Vec<(usize, Fe, Fe)> {
        self.points.iter().zip(&self.values).enumerate().filter_map(|(i, (&x, v))| v.map(|y| (i, x, y))).collect()
    }

    fn check_decodable(&self) -> Result<usize> {
        let n = self.present();
        let (d, b) = (self.degree_bound, self.error_budget);
        if 2 * b + d + 1 > n {
            return Err(Error::Parameter(format!(
                "cannot correct {b} errors at degree {d} from {n} values (need 2b <= n - D - 1)"
            )));
        }
        Ok(n)
    }

    fn field(&self) -> Option<Field> {
        self.points.first().map(Fe::field)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub poly: DensePoly,
    /// Indices (into the codeword) where `poly` matches the received value.
    pub agreement: Vec<usize>,
}

/// Indices `i` with `g_i` present and `p(alpha_i) = g_i`.
pub fn agreement_set(p: &DensePoly, cw: &NoisyCodeword) -> Vec<usize> {
    cw.received().into_iter().filter(|&(_, x, y)| p.eval(x) == y).map(|(i, _, _)| i).collect()
}

/// Acceptance rule for a claimed decoding: degree at most `D` and agreement
/// on at least `(n + D + 1) / 2` received values. At most one polynomial
/// can pass.
pub fn accepts_claim(p: &DensePoly, cw: &NoisyCodeword) -> bool {
    p.degree().unwrap_or(0) <= cw.degree_bound && 2 * agreement_set(p, cw).len() > cw.present() + cw.degree_bound
}

fn finish(p: DensePoly, cw: &NoisyCodeword, n: usize) -> Option<DecodeResult> {
    if p.degree().unwrap_or(0) > cw.degree_bound {
        return None;
    }
    let agreement = agreement_set(&p, cw);
    (agreement.len() + cw.error_budget >= n).then_some(DecodeResult { poly: p, agreement })
}

/// Berlekamp-Welch: find `Q` (degree `<= D + e`) and monic `E` (degree `e`)
/// with `Q(alpha_i) = g_i E(alpha_i)`, trying `e = b, b-1, ..., 0`.
pub fn decode(cw: &NoisyCodeword) -> Result<DecodeResult> {
    let n = cw.check_decodable()?;
    let field = cw.field().expect("nonempty codeword");
    let rx = cw.received();
    let d = cw.degree_bound;
    for e in (0..=cw.error_budget).rev() {
        let unknowns = d + e + 1 + e;
        let mut a = Matrix::zeros(field, n, unknowns);
        let mut rhs = Vec::with_capacity(n);
        for (r, &(_, x, y)) in rx.iter().enumerate() {
            let mut p = field.one();
            for j in 0..d + e + 1 {
                a.set(r, j, p);
                if j < e {
                    a.set(r, d + e + 1 + j, -(y * p));
                }
                if j + 1 < d + e + 1 {
                    p *= x;
                }
            }
            rhs.push(y * a.get(r, e));
        }
        let Some(sol) = solve(&a, &rhs) else {
            continue;
        };
        let q = DensePoly::new(field, sol[..d + e + 1].to_vec());
        let mut ec = sol[d + e + 1..].to_vec();
        ec.push(field.one());
        let locator = DensePoly::new(field, ec);
        let (quot, rem) = q.divrem(&locator)?;
        if !rem.is_zero() {
            continue;
        }
        if let Some(res) = finish(quot, cw, n) {
            return Ok(res);
        }
    }
    Err(Error::DecodeFailure(format!(
        "no polynomial of degree <= {d} agrees with {} of {n} values",
        n - cw.error_budget
    )))
}

/// Gao's decoder: interpolate all received values, then run the extended
/// Euclidean algorithm on `(prod (z - alpha_i), interpolant)` until the
/// remainder degree drops below `(n + D + 1) / 2`.
pub fn decode_gao(cw: &NoisyCodeword, mode: EvalMode) -> Result<DecodeResult> {
    cw.check_decodable()?;
    let xs: Vec<Fe> = cw.received().iter().map(|r| r.1).collect();
    let set = PointSet::new(&xs, mode)?;
    gao(cw, &set)
}

/// [`decode_gao`] reusing a prepared point set, which must hold exactly
/// the points of the received values, in order.
pub fn decode_gao_with(cw: &NoisyCodeword, set: &PointSet) -> Result<DecodeResult> {
    cw.check_decodable()?;
    let rx = cw.received();
    if rx.len() != set.len() || rx.iter().zip(set.points()).any(|(r, &p)| r.1 != p) {
        return Err(Error::Domain("point set does not match the received values".into()));
    }
    gao(cw, set)
}

fn gao(cw: &NoisyCodeword, set: &PointSet) -> Result<DecodeResult> {
    let n = cw.present();
    let field = set.points()[0].field();
    let ys: Vec<Fe> = cw.received().iter().map(|r| r.2).collect();
    let g1 = set.interpolate(&ys)?;
    let stop = |r: &DensePoly| r.degree().is_none_or(|deg| 2 * deg < n + cw.degree_bound + 1);
    let (mut r0, mut r1) = (set.vanishing().clone(), g1);
    let (mut t0, mut t1) = (DensePoly::zero(field), DensePoly::constant(field.one()));
    while !stop(&r1) {
        let (q, r) = r0.divrem(&r1)?;
        let t = t0.sub(&q.mul_naive(&t1));
        r0 = std::mem::replace(&mut r1, r);
        t0 = std::mem::replace(&mut t1, t);
    }
    let failure = || Error::DecodeFailure(format!("received word is not within {} errors of a codeword", cw.error_budget));
    let (p, rem) = r1.divrem(&t1).map_err(|_| failure())?;
    if !rem.is_zero() {
        return Err(failure());
    }
    if p.degree().unwrap_or(0) > cw.degree_bound {
        return Err(failure());
    }
    let rx = cw.received();
    let agreement: Vec<usize> = set.evaluate(&p).into_iter().zip(&rx).filter(|(v, r)| *v == r.2).map(|(_, r)| r.0).collect();
    counter::record_comparisons(rx.len() as u64);
    if agreement.len() + cw.error_budget < n {
        return Err(failure());
    }
    Ok(DecodeResult { poly: p, agreement })
}
