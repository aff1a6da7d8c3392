//! Lagrange extrapolation between runs of consecutive integers.
//!
//! With sources `a, .., a+m-1` and a target `z` outside them,
//! `p(z) = P(z) * sum_j y_j w_j / (z - a - j)` where `P(z) = prod_j (z - a - j)`
//! and `w_j = 1 / prod_{l != j} (j - l)`. For targets `c + i` the inner sum
//! is a Toeplitz product in `i - j`, i.e. a slice of one convolution.

use super::ntt::Ntt;
use super::EvalMode;
use crate::error::{Error, Result};
use crate::field::counter::{self, Scope};
use crate::field::{batch_inverse, Fe, Field};
use crate::linalg::{dot, Matrix};

#[derive(Clone, Debug)]
struct FastPlan {
    ntt: Ntt,
    /// Transform of the zero-padded kernel `1 / k`.
    kernel: Vec<Fe>,
    /// `P(c + i) / L` per target.
    scale: Vec<Fe>,
}

/// The linear map from the values of a polynomial of degree `< m` at
/// `a..a+m` to its values at `c..c+r`.
#[derive(Clone, Debug)]
pub struct Extrapolation {
    field: Field,
    m: usize,
    r: usize,
    dense: Matrix,
    /// Target `i` is source `copy[i]`.
    copy: Vec<Option<usize>>,
    weights: Vec<Fe>,
    fast: Option<FastPlan>,
}

fn signed(field: Field, v: i64) -> Fe {
    let e = field.elem(v.unsigned_abs());
    if v < 0 {
        -e
    } else {
        e
    }
}

impl Extrapolation {
    /// Prime fields only; every integer involved must stay below `p`.
    /// Built under the setup scope.
    pub fn new(field: Field, a: u64, m: usize, c: u64, r: usize) -> Result<Self> {
        if field.is_binary() {
            return Err(Error::Domain("integer progressions need a prime field".into()));
        }
        if m == 0 {
            return Err(Error::Domain("no source points".into()));
        }
        let p = field.characteristic_or_degree() as u128;
        if (a as u128 + m as u128).max(c as u128 + r as u128) >= p {
            return Err(Error::Domain("progression wraps around the field".into()));
        }
        Ok(counter::with_scope(Scope::SETUP, || Self::build(field, a as i64, m, c as i64, r)))
    }

    fn build(field: Field, a: i64, m: usize, c: i64, r: usize) -> Self {
        let t = c - a;
        // w_j = (-1)^(m-1-j) / (j! (m-1-j)!)
        let mut fact = vec![field.one(); m];
        for j in 1..m {
            fact[j] = fact[j - 1] * field.elem(j as u64);
        }
        let denoms: Vec<Fe> = (0..m)
            .map(|j| {
                let d = fact[j] * fact[m - 1 - j];
                if (m - 1 - j) % 2 == 1 {
                    -d
                } else {
                    d
                }
            })
            .collect();
        let weights = batch_inverse(&denoms).expect("factorials below p are invertible");
        // kernel H[q] = 1 / (t - m + 1 + q), zero where the argument is zero
        let width = m + r - 1;
        let args: Vec<i64> = (0..width).map(|q| t - m as i64 + 1 + q as i64).collect();
        let nonzero: Vec<Fe> = args.iter().filter(|&&s| s != 0).map(|&s| signed(field, s)).collect();
        let mut inv = batch_inverse(&nonzero).expect("nonzero below p").into_iter();
        let kernel: Vec<Fe> = args.iter().map(|&s| if s == 0 { field.zero() } else { inv.next().expect("one per nonzero") }).collect();

        let mut copy = Vec::with_capacity(r);
        let mut prefactor = Vec::with_capacity(r);
        for i in 0..r {
            let s = t + i as i64;
            if (0..m as i64).contains(&s) {
                copy.push(Some(s as usize));
                prefactor.push(field.zero());
            } else {
                copy.push(None);
                prefactor.push((0..m as i64).map(|l| signed(field, s - l)).fold(field.one(), |x, y| x * y));
            }
        }
        let mut dense = Matrix::zeros(field, r, m);
        for i in 0..r {
            for j in 0..m {
                let v = match copy[i] {
                    Some(src) if src == j => field.one(),
                    Some(_) => field.zero(),
                    None => prefactor[i] * weights[j] * kernel[i + m - 1 - j],
                };
                dense.set(i, j, v);
            }
        }
        let fast = Ntt::new(field, width.next_power_of_two()).map(|ntt| {
            let mut k = kernel.clone();
            k.resize(ntt.len(), field.zero());
            ntt.forward(&mut k);
            let scale = prefactor.iter().map(|&p| p * ntt.len_inv()).collect();
            FastPlan { ntt, kernel: k, scale }
        });
        Extrapolation { field, m, r, dense, copy, weights, fast }
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn sources(&self) -> usize {
        self.m
    }

    pub fn targets(&self) -> usize {
        self.r
    }

    pub fn matrix(&self) -> &Matrix {
        &self.dense
    }

    pub fn has_fast_path(&self) -> bool {
        self.fast.is_some()
    }

    /// Field operations of the dense product over `rows` targets.
    pub fn dense_cost(&self, rows: usize) -> u64 {
        rows as u64 * (2 * self.m as u64 - 1)
    }

    pub fn fast_cost(&self) -> Option<u64> {
        let plan = self.fast.as_ref()?;
        let extra = self.copy.iter().filter(|c| c.is_none()).count();
        Some(self.m as u64 + 2 * plan.ntt.cost() + plan.ntt.len() as u64 + extra as u64)
    }

    fn use_fast(&self, mode: EvalMode, rows: usize) -> bool {
        let Some(fast) = self.fast_cost() else { return false };
        match mode {
            EvalMode::Naive => false,
            EvalMode::Fast => true,
            EvalMode::Auto => fast < self.dense_cost(rows),
            EvalMode::AutoAt(t) => self.r >= t,
        }
    }

    /// Values at every target.
    pub fn apply(&self, y: &[Fe], mode: EvalMode) -> Vec<Fe> {
        assert_eq!(y.len(), self.m, "one value per source point");
        if self.use_fast(mode, self.r) {
            self.apply_fast(y)
        } else {
            (0..self.r).map(|i| self.dense_row(i, y)).collect()
        }
    }

    /// Values at the listed targets.
    pub fn apply_rows(&self, y: &[Fe], rows: &[usize], mode: EvalMode) -> Vec<Fe> {
        assert_eq!(y.len(), self.m, "one value per source point");
        if self.use_fast(mode, rows.len()) {
            let all = self.apply_fast(y);
            rows.iter().map(|&i| all[i]).collect()
        } else {
            rows.iter().map(|&i| self.dense_row(i, y)).collect()
        }
    }

    fn dense_row(&self, i: usize, y: &[Fe]) -> Fe {
        match self.copy[i] {
            Some(j) => y[j],
            None => dot(self.dense.row(i), y),
        }
    }

    fn apply_fast(&self, y: &[Fe]) -> Vec<Fe> {
        let plan = self.fast.as_ref().expect("fast plan");
        let mut u: Vec<Fe> = y.iter().zip(&self.weights).map(|(&v, &w)| v * w).collect();
        u.resize(plan.ntt.len(), self.field.zero());
        plan.ntt.forward(&mut u);
        for (x, &k) in u.iter_mut().zip(&plan.kernel) {
            *x *= k;
        }
        plan.ntt.inverse_unscaled(&mut u);
        (0..self.r)
            .map(|i| match self.copy[i] {
                Some(j) => y[j],
                None => u[i + self.m - 1] * plan.scale[i],
            })
            .collect()
    }
}
