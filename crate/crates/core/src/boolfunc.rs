//! Boolean functions as multilinear polynomials over `F_2`, evaluated over
//! `GF(2^m)` through the bit embedding `0 -> 0`, `1 -> 1`.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Fe, Field};

/// Largest supported arity (monomials are `u64` bitmasks; tables are `2^n` long).
pub const MAX_ARITY: usize = 24;

/// Outputs for all `2^n` inputs in lexicographic order, `a_1` most significant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthTable {
    arity: usize,
    bits: Vec<u8>,
}

impl TruthTable {
    pub fn new(arity: usize, bits: Vec<u8>) -> Result<Self> {
        if arity > MAX_ARITY {
            return Err(Error::Domain(format!("arity {arity} exceeds {MAX_ARITY}")));
        }
        if bits.len() != 1 << arity {
            return Err(Error::Domain(format!("table for arity {arity} needs {} entries, got {}", 1usize << arity, bits.len())));
        }
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::Domain(format!("table entry {b} is not a bit")));
        }
        Ok(TruthTable { arity, bits })
    }

    pub fn from_fn(arity: usize, f: impl Fn(&[u8]) -> u8) -> Result<Self> {
        let bits = (0..1usize << arity).map(|i| f(&input_bits(arity, i)) & 1).collect();
        Self::new(arity, bits)
    }

    /// The `index`-th function of the given arity: bit `j` of `index` is
    /// the output on input number `j`.
    pub fn nth(arity: usize, index: u64) -> Result<Self> {
        Self::new(arity, (0..1usize << arity).map(|j| ((index >> j) & 1) as u8).collect())
    }

    pub fn and2() -> Self {
        Self::new(2, vec![0, 0, 0, 1]).unwrap()
    }

    pub fn xor2() -> Self {
        Self::new(2, vec![0, 1, 1, 0]).unwrap()
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn output(&self, input: &[u8]) -> Result<u8> {
        Ok(self.bits[input_index(self.arity, input)?])
    }

    /// Inputs with output 1.
    pub fn ones(&self) -> Vec<Vec<u8>> {
        self.inputs_with(1)
    }

    /// Inputs with output 0.
    pub fn zeros(&self) -> Vec<Vec<u8>> {
        self.inputs_with(0)
    }

    fn inputs_with(&self, v: u8) -> Vec<Vec<u8>> {
        (0..self.bits.len()).filter(|&i| self.bits[i] == v).map(|i| input_bits(self.arity, i)).collect()
    }

    /// Line 1: `n`. Line 2: the `2^n` bits separated by spaces.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (ln, first) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty truth table".into() })?;
        let arity: usize = first
            .trim()
            .parse()
            .map_err(|_| Error::Parse { line: ln + 1, msg: format!("bad arity {:?}", first.trim()) })?;
        let (ln, second) = lines.next().ok_or(Error::Parse { line: ln + 2, msg: "missing output bits".into() })?;
        let bits = second
            .split_whitespace()
            .map(|t| match t {
                "0" => Ok(0),
                "1" => Ok(1),
                _ => Err(Error::Parse { line: ln + 1, msg: format!("bad bit {t:?}") }),
            })
            .collect::<Result<Vec<u8>>>()?;
        if let Some((ln, _)) = lines.next() {
            return Err(Error::Parse { line: ln + 1, msg: "trailing content".into() });
        }
        Self::new(arity, bits).map_err(|e| Error::Parse { line: ln + 1, msg: e.to_string() })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let bits: Vec<String> = self.bits.iter().map(u8::to_string).collect();
        format!("{}\n{}\n", self.arity, bits.join(" "))
    }
}

/// Input number `index` as bits `a_1..a_n` (`a_1` most significant).
pub fn input_bits(arity: usize, index: usize) -> Vec<u8> {
    (0..arity).map(|i| ((index >> (arity - 1 - i)) & 1) as u8).collect()
}

fn input_index(arity: usize, input: &[u8]) -> Result<usize> {
    if input.len() != arity {
        return Err(Error::Domain(format!("expected {arity} input bits, got {}", input.len())));
    }
    input.iter().try_fold(0usize, |acc, &b| match b {
        0 | 1 => Ok((acc << 1) | b as usize),
        _ => Err(Error::Domain(format!("input value {b} is not a bit"))),
    })
}

/// Multilinear polynomial over `F_2`. Each monomial is a bitmask: bit `i`
/// set means `x_{i+1}` occurs.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiPoly {
    arity: usize,
    monomials: BTreeSet<u64>,
}

impl MultiPoly {
    pub fn zero(arity: usize) -> Self {
        MultiPoly { arity, monomials: BTreeSet::new() }
    }

    pub fn from_monomials(arity: usize, monomials: impl IntoIterator<Item = u64>) -> Self {
        let mut p = Self::zero(arity);
        for m in monomials {
            p.toggle(m);
        }
        p
    }

    /// Add one monomial (coefficients live in `F_2`, so `m + m = 0`).
    pub fn toggle(&mut self, m: u64) {
        if !self.monomials.remove(&m) {
            self.monomials.insert(m);
        }
    }

    pub fn add(&self, o: &MultiPoly) -> MultiPoly {
        let mut out = self.clone();
        for &m in &o.monomials {
            out.toggle(m);
        }
        out
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn monomials(&self) -> impl Iterator<Item = u64> + '_ {
        self.monomials.iter().copied()
    }

    pub fn term_count(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_zero(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn total_degree(&self) -> usize {
        self.monomials.iter().map(|m| m.count_ones() as usize).max().unwrap_or(0)
    }

    pub fn eval_f2(&self, bits: &[u8]) -> Result<u8> {
        input_index(self.arity, bits)?;
        let x = bits.iter().enumerate().fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i));
        Ok(self.monomials.iter().filter(|&&m| m & x == m).count() as u8 & 1)
    }

    /// Evaluate at arbitrary field elements (all monomial coefficients are 1).
    pub fn eval_field(&self, xs: &[Fe], field: Field) -> Result<Fe> {
        if xs.len() != self.arity {
            return Err(Error::Domain(format!("expected {} inputs, got {}", self.arity, xs.len())));
        }
        let mut acc = field.zero();
        for &m in &self.monomials {
            let mut t = field.one();
            for (i, &x) in xs.iter().enumerate() {
                if m >> i & 1 == 1 {
                    t *= x;
                }
            }
            acc += t;
        }
        Ok(acc)
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.monomials.is_empty() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .monomials
            .iter()
            .map(|&m| {
                if m == 0 {
                    return "1".to_string();
                }
                (0..self.arity).filter(|i| m >> i & 1 == 1).map(|i| format!("x{}", i + 1)).collect::<Vec<_>>().join("*")
            })
            .collect();
        write!(f, "{}", terms.join(" + "))
    }
}

/// `h_a = prod_i z_i` with `z_i = x_i` where `a_i = 1` and `z_i = x_i + 1`
/// otherwise, expanded into monomials.
fn h_term(a: &[u8]) -> MultiPoly {
    let arity = a.len();
    let ones = a.iter().enumerate().filter(|(_, &b)| b == 1).fold(0u64, |acc, (i, _)| acc | 1 << i);
    let zero_pos: Vec<usize> = (0..arity).filter(|&i| a[i] == 0).collect();
    let mut p = MultiPoly::zero(arity);
    for sub in 0u64..1 << zero_pos.len() {
        let extra = zero_pos.iter().enumerate().filter(|(j, _)| sub >> j & 1 == 1).fold(0u64, |acc, (_, &i)| acc | 1 << i);
        p.toggle(ones | extra);
    }
    p
}

/// `sum_{a in S_1} h_a`, expanded and collected over `F_2`.
pub fn boolean_to_polynomial(t: &TruthTable) -> MultiPoly {
    let mut p = MultiPoly::zero(t.arity);
    for a in t.ones() {
        p = p.add(&h_term(&a));
    }
    p
}

/// `1 + sum_{a in S_0} h_a`; equal to [`boolean_to_polynomial`] as a polynomial.
pub fn complement_polynomial(t: &TruthTable) -> MultiPoly {
    let mut p = MultiPoly::from_monomials(t.arity, [0]);
    for a in t.zeros() {
        p = p.add(&h_term(&a));
    }
    p
}

/// Number of `h_a` terms in the shorter of the two sum forms.
pub fn h_form_terms(t: &TruthTable) -> usize {
    let ones = t.bits.iter().filter(|&&b| b == 1).count();
    ones.min(t.bits.len() - ones)
}

/// Evaluate `p` at the embedding of `bits` into `GF(2^m)`.
pub fn eval_embedded(p: &MultiPoly, bits: &[u8], field: Field) -> Result<Fe> {
    if !field.is_binary() {
        return Err(Error::Config(format!("bit embedding needs a binary extension field, got {field}")));
    }
    let xs = bits.iter().map(|&b| field.embed_bit(b)).collect::<Result<Vec<_>>>()?;
    p.eval_field(&xs, field)
}
