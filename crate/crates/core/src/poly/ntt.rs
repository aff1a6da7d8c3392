//! Radix-2 number-theoretic transform over prime fields with a large
//! power-of-two subgroup, e.g. `15 * 2^27 + 1`.

use crate::field::{Fe, Field};

/// Power-of-two part of `p - 1`; zero for binary fields.
pub fn two_adicity(field: Field) -> u32 {
    if field.is_binary() {
        return 0;
    }
    (field.characteristic_or_degree() - 1).trailing_zeros()
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = vec![];
    let mut q = 2;
    while q * q <= n {
        if n.is_multiple_of(q) {
            out.push(q);
            while n.is_multiple_of(q) {
                n /= q;
            }
        }
        q += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// A primitive `order`-th root of unity, `order` a power of two dividing
/// `p - 1`.
pub fn root_of_unity(field: Field, order: usize) -> Option<Fe> {
    if !order.is_power_of_two() || order.trailing_zeros() > two_adicity(field) {
        return None;
    }
    let p = field.characteristic_or_degree();
    let factors = prime_factors(p - 1);
    let g = (2..p).find(|&g| factors.iter().all(|&q| field.elem(g).pow((p - 1) / q) != field.one()))?;
    Some(field.elem(g).pow((p - 1) / order as u64))
}

#[derive(Clone, Debug)]
pub struct Ntt {
    len: usize,
    /// `root^j` and `root^-j` for `j < len / 2`.
    twiddles: Vec<Fe>,
    inv_twiddles: Vec<Fe>,
    len_inv: Fe,
}

impl Ntt {
    pub fn new(field: Field, len: usize) -> Option<Self> {
        let root = root_of_unity(field, len)?;
        let inv = root.inv().ok()?;
        let half = (len / 2).max(1);
        let mut twiddles = Vec::with_capacity(half);
        let mut inv_twiddles = Vec::with_capacity(half);
        let (mut w, mut wi) = (field.one(), field.one());
        for _ in 0..half {
            twiddles.push(w);
            inv_twiddles.push(wi);
            w *= root;
            wi *= inv;
        }
        let len_inv = field.integer(len as u64).inv().ok()?;
        Some(Ntt { len, twiddles, inv_twiddles, len_inv })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn len_inv(&self) -> Fe {
        self.len_inv
    }

    /// Evaluations at the powers of the root, in natural order.
    pub fn forward(&self, a: &mut [Fe]) {
        self.transform(a, &self.twiddles);
    }

    /// Inverse transform without the `1 / len` factor.
    pub fn inverse_unscaled(&self, a: &mut [Fe]) {
        self.transform(a, &self.inv_twiddles);
    }

    fn transform(&self, a: &mut [Fe], tw: &[Fe]) {
        let n = self.len;
        assert_eq!(a.len(), n, "transform length");
        let bits = n.trailing_zeros();
        if bits == 0 {
            return;
        }
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if i < j {
                a.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let step = n / size;
            for start in (0..n).step_by(size) {
                for j in 0..half {
                    let u = a[start + j];
                    let v = if j == 0 { a[start + j + half] } else { a[start + j + half] * tw[j * step] };
                    a[start + j] = u + v;
                    a[start + j + half] = u - v;
                }
            }
            size *= 2;
        }
    }

    /// Field operations of one transform.
    pub fn cost(&self) -> u64 {
        let n = self.len as u64;
        let bits = self.len.trailing_zeros() as u64;
        // n log n additions, (n/2) log n - (n - 1) twiddle multiplications
        n * bits + (n / 2 * bits).saturating_sub(n - 1)
    }
}
