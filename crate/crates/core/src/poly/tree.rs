use std::collections::HashSet;

use super::{inverse_series, DensePoly, EvalMode, NEWTON_CUTOFF};
use crate::error::{Error, Result};
use crate::field::{batch_inverse, Fe, Field};

/// Nodes covering at most this many points are evaluated by Horner.
const HORNER_CUTOFF: usize = 8;

/// Products of `(z - x_i)` arranged as a binary tree: level 0 holds the
/// linear factors, each level above multiplies adjacent pairs (an odd node
/// out is carried up unchanged), the last level holds `prod (z - x_i)`.
#[derive(Clone, Debug)]
pub struct SubproductTree {
    points: Vec<Fe>,
    levels: Vec<Vec<DensePoly>>,
    /// `1 / rev(node) mod z^k`, `k = deg(parent) - deg(node)`, for nodes whose
    /// remainder step is large enough to use Newton division.
    inverses: Vec<Vec<Option<Vec<Fe>>>>,
}

impl SubproductTree {
    pub fn new(points: &[Fe]) -> Self {
        assert!(!points.is_empty(), "subproduct tree needs at least one point");
        let mut levels = vec![points.iter().map(|&x| DensePoly::linear_root(x)).collect::<Vec<_>>()];
        while levels.last().unwrap().len() > 1 {
            let next = levels
                .last()
                .unwrap()
                .chunks(2)
                .map(|c| if c.len() == 2 { c[0].mul_fast(&c[1]) } else { c[0].clone() })
                .collect();
            levels.push(next);
        }
        let mut inverses: Vec<Vec<Option<Vec<Fe>>>> = Vec::with_capacity(levels.len());
        for l in 0..levels.len() {
            let row = (0..levels[l].len())
                .map(|j| {
                    if l + 1 == levels.len() {
                        return None;
                    }
                    let sibling = j ^ 1;
                    if sibling >= levels[l].len() {
                        return None;
                    }
                    let k = span(&levels[l][sibling]);
                    if k < NEWTON_CUTOFF {
                        return None;
                    }
                    let rev: Vec<Fe> = levels[l][j].coeffs().iter().rev().copied().collect();
                    Some(inverse_series(&rev, k).expect("monic node"))
                })
                .collect();
            inverses.push(row);
        }
        SubproductTree { points: points.to_vec(), levels, inverses }
    }

    pub fn points(&self) -> &[Fe] {
        &self.points
    }

    /// `prod (z - x_i)`.
    pub fn root(&self) -> &DensePoly {
        &self.levels.last().unwrap()[0]
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// `p(x_i)` for every point, by remainders down the tree.
    pub fn evaluate(&self, p: &DensePoly) -> Vec<Fe> {
        let field = p.field();
        let mut out = vec![field.zero(); self.points.len()];
        let root = self.root();
        let r = if p.coeffs().len() > span(root) {
            p.divrem_fast(root).expect("monic root").1
        } else {
            p.clone()
        };
        self.descend(self.levels.len() - 1, 0, &r, &mut out);
        out
    }

    fn descend(&self, level: usize, idx: usize, r: &DensePoly, out: &mut [Fe]) {
        let lo = idx << level;
        let hi = ((idx + 1) << level).min(self.points.len());
        if level == 0 || hi - lo <= HORNER_CUTOFF {
            for i in lo..hi {
                out[i] = r.eval(self.points[i]);
            }
            return;
        }
        let children = &self.levels[level - 1];
        let (left, right) = (2 * idx, 2 * idx + 1);
        if right >= children.len() {
            // carried node: same polynomial one level down
            self.descend(level - 1, left, r, out);
            return;
        }
        for c in [left, right] {
            let node = &children[c];
            let rc = if r.coeffs().len() <= span(node) {
                r.clone()
            } else if let Some(inv) = &self.inverses[level - 1][c] {
                r.divrem_with_inverse(node, inv).1
            } else {
                r.divrem(node).expect("monic node").1
            };
            self.descend(level - 1, c, &rc, out);
        }
    }

    /// Bottom-up linear combination `sum_i c_i * prod_{j != i} (z - x_j)`.
    fn combine(&self, cs: &[Fe]) -> DensePoly {
        let field = cs[0].field();
        let mut vals: Vec<DensePoly> = cs.iter().map(|&c| DensePoly::constant(c)).collect();
        for l in 0..self.levels.len() - 1 {
            let nodes = &self.levels[l];
            vals = vals
                .chunks(2)
                .enumerate()
                .map(|(j, pair)| {
                    if pair.len() == 1 {
                        return pair[0].clone();
                    }
                    let a = pair[0].mul_fast(&nodes[2 * j + 1]);
                    let b = pair[1].mul_fast(&nodes[2 * j]);
                    a.add(&b)
                })
                .collect();
        }
        vals.pop().unwrap_or_else(|| DensePoly::zero(field))
    }
}

/// Number of coefficients needed to store a remainder modulo `node`.
fn span(node: &DensePoly) -> usize {
    node.degree().unwrap_or(0)
}

fn check_distinct(xs: &[Fe]) -> Result<()> {
    let mut seen = HashSet::with_capacity(xs.len());
    for x in xs {
        if !seen.insert(x.value()) {
            return Err(Error::Domain(format!("duplicate point {x}")));
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
enum Prepared {
    /// `q_i = M / (z - x_i)` and `1 / q_i(x_i)`.
    Naive { basis: Vec<DensePoly>, weights: Vec<Fe> },
    /// Subproduct tree and `1 / M'(x_i)`.
    Fast { tree: SubproductTree, weights: Vec<Fe> },
}

/// A fixed set of distinct points with everything precomputed that repeated
/// interpolation and evaluation on it can share.
#[derive(Clone, Debug)]
pub struct PointSet {
    field: Field,
    xs: Vec<Fe>,
    vanishing: DensePoly,
    prepared: Prepared,
}

impl PointSet {
    pub fn new(xs: &[Fe], mode: EvalMode) -> Result<Self> {
        let Some(first) = xs.first() else {
            return Err(Error::Domain("empty point set".into()));
        };
        let field = first.field();
        if xs.iter().any(|x| x.field() != field) {
            return Err(Error::MixedFields);
        }
        check_distinct(xs)?;
        let (vanishing, prepared) = match mode.resolve(xs.len()) {
            EvalMode::Fast => {
                let tree = SubproductTree::new(xs);
                let d = tree.root().derivative();
                let weights = batch_inverse(&tree.evaluate(&d))?;
                (tree.root().clone(), Prepared::Fast { tree, weights })
            }
            _ => {
                let mut master = DensePoly::constant(field.one());
                for &x in xs {
                    master = mul_linear(&master, x);
                }
                let basis: Vec<DensePoly> = xs.iter().map(|&x| synthetic_div(&master, x)).collect();
                let denoms: Vec<Fe> = basis.iter().zip(xs).map(|(q, &x)| q.eval(x)).collect();
                (master, Prepared::Naive { basis, weights: batch_inverse(&denoms)? })
            }
        };
        Ok(PointSet { field, xs: xs.to_vec(), vanishing, prepared })
    }

    pub fn points(&self) -> &[Fe] {
        &self.xs
    }

    /// `prod (z - x_i)`.
    pub fn vanishing(&self) -> &DensePoly {
        &self.vanishing
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn is_fast(&self) -> bool {
        matches!(self.prepared, Prepared::Fast { .. })
    }

    /// The unique polynomial of degree `< n` through `(x_i, ys[i])`.
    pub fn interpolate(&self, ys: &[Fe]) -> Result<DensePoly> {
        if ys.len() != self.xs.len() {
            return Err(Error::Domain(format!("{} values for {} points", ys.len(), self.xs.len())));
        }
        match &self.prepared {
            Prepared::Naive { basis, weights } => {
                let mut acc = vec![self.field.zero(); self.xs.len()];
                for ((q, &w), &y) in basis.iter().zip(weights).zip(ys) {
                    if y.is_zero() {
                        continue;
                    }
                    let c = y * w;
                    for (a, &b) in acc.iter_mut().zip(q.coeffs()) {
                        *a += c * b;
                    }
                }
                Ok(DensePoly::new(self.field, acc))
            }
            Prepared::Fast { tree, weights } => {
                let cs: Vec<Fe> = ys.iter().zip(weights).map(|(&y, &w)| y * w).collect();
                Ok(tree.combine(&cs))
            }
        }
    }

    pub fn evaluate(&self, p: &DensePoly) -> Vec<Fe> {
        match &self.prepared {
            Prepared::Naive { .. } => self.xs.iter().map(|&x| p.eval(x)).collect(),
            Prepared::Fast { tree, .. } => tree.evaluate(p),
        }
    }
}

/// `p * (z - x)`.
fn mul_linear(p: &DensePoly, x: Fe) -> DensePoly {
    let field = p.field();
    let c = p.coeffs();
    let neg = -x;
    let mut out = Vec::with_capacity(c.len() + 1);
    out.push(c[0] * neg);
    for i in 1..c.len() {
        out.push(c[i - 1] + c[i] * neg);
    }
    out.push(c[c.len() - 1]);
    DensePoly::new(field, out)
}

/// `p / (z - x)` for a root `x` of `p`.
fn synthetic_div(p: &DensePoly, x: Fe) -> DensePoly {
    let c = p.coeffs();
    let n = c.len() - 1;
    let mut q = vec![p.field().zero(); n];
    let mut carry = c[n];
    for i in (0..n).rev() {
        q[i] = carry;
        carry = c[i] + carry * x;
    }
    DensePoly::new(p.field(), q)
}

/// Lagrange interpolation through `points` (pairwise distinct x-values).
pub fn interpolate(points: &[(Fe, Fe)], mode: EvalMode) -> Result<DensePoly> {
    let xs: Vec<Fe> = points.iter().map(|p| p.0).collect();
    let ys: Vec<Fe> = points.iter().map(|p| p.1).collect();
    PointSet::new(&xs, mode)?.interpolate(&ys)
}

/// `[p(x) for x in xs]`.
pub fn multipoint_eval(p: &DensePoly, xs: &[Fe], mode: EvalMode) -> Vec<Fe> {
    if xs.is_empty() {
        return Vec::new();
    }
    if mode.is_fast(xs.len()) {
        SubproductTree::new(xs).evaluate(p)
    } else {
        xs.iter().map(|&x| p.eval(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{counter, P31};
    use crate::linalg::{solve, Matrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn f11() -> Field {
        Field::prime(11).unwrap()
    }

    fn vals(v: &[Fe]) -> Vec<u64> {
        v.iter().map(Fe::value).collect()
    }

    #[test]
    fn interpolate_two_points() {
        let f = f11();
        // oracle: solve [[1,1],[1,2]] (a0,a1) = (4,7)
        let sys = Matrix::from_u64(f, &[&[1, 1], &[1, 2]]).unwrap();
        let want = solve(&sys, &[f.elem(4), f.elem(7)]).unwrap();
        for mode in [EvalMode::Naive, EvalMode::Fast] {
            let p = interpolate(&[(f.elem(1), f.elem(4)), (f.elem(2), f.elem(7))], mode).unwrap();
            assert_eq!(p.coeffs(), &want[..]);
            assert_eq!(p, DensePoly::from_u64(f, &[1, 3]));
            let q = interpolate(&[(f.elem(1), f.elem(2)), (f.elem(2), f.elem(3))], mode).unwrap();
            assert_eq!(q, DensePoly::from_u64(f, &[1, 1]));
        }
    }

    #[test]
    fn interpolate_single_point_is_constant() {
        let f = f11();
        let p = interpolate(&[(f.elem(5), f.elem(9))], EvalMode::Naive).unwrap();
        assert_eq!(p, DensePoly::from_u64(f, &[9]));
    }

    #[test]
    fn interpolate_rejects_duplicates() {
        let f = f11();
        let pts = [(f.elem(1), f.elem(2)), (f.elem(1), f.elem(3))];
        assert!(matches!(interpolate(&pts, EvalMode::Naive), Err(Error::Domain(_))));
        assert!(matches!(interpolate(&pts, EvalMode::Fast), Err(Error::Domain(_))));
        assert!(interpolate(&[], EvalMode::Naive).is_err());
    }

    #[test]
    fn multipoint_examples() {
        let f = f11();
        let xs: Vec<Fe> = (3..=7).map(|v| f.elem(v)).collect();
        // oracle: Horner per point done by hand
        let lin = DensePoly::from_u64(f, &[1, 3]);
        let quad = DensePoly::from_u64(f, &[1, 4, 3]);
        for mode in [EvalMode::Naive, EvalMode::Fast] {
            assert_eq!(vals(&multipoint_eval(&lin, &xs, mode)), vec![10, 2, 5, 8, 0]);
            assert_eq!(vals(&multipoint_eval(&quad, &xs, mode)), vec![7, 10, 8, 1, 0]);
            assert_eq!(vals(&multipoint_eval(&DensePoly::zero(f), &xs, mode)), vec![0; 5]);
        }
    }

    #[test]
    fn fast_equals_naive_on_random_instances() {
        let f = Field::prime(P31).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [8usize, 13, 16, 31, 32, 64, 100, 128, 256] {
            let trials = 500;
            for _ in 0..trials {
                let mut xs: Vec<Fe> = Vec::new();
                let mut seen = HashSet::new();
                while xs.len() < n {
                    let x = f.random(&mut rng);
                    if seen.insert(x.value()) {
                        xs.push(x);
                    }
                }
                let ys: Vec<Fe> = (0..n).map(|_| f.random(&mut rng)).collect();
                let pts: Vec<(Fe, Fe)> = xs.iter().copied().zip(ys.iter().copied()).collect();
                let a = interpolate(&pts, EvalMode::Naive).unwrap();
                let b = interpolate(&pts, EvalMode::Fast).unwrap();
                assert_eq!(a, b, "n = {n}");
                // round trip, and a higher-degree polynomial through the tree
                assert_eq!(multipoint_eval(&b, &xs, EvalMode::Fast), ys);
                let big = DensePoly::new(f, (0..2 * n + 3).map(|_| f.random(&mut rng)).collect());
                assert_eq!(multipoint_eval(&big, &xs, EvalMode::Fast), multipoint_eval(&big, &xs, EvalMode::Naive));
            }
        }
    }

    #[test]
    fn binary_field_paths_agree() {
        let f = Field::binary(8).unwrap();
        let xs: Vec<Fe> = (1..=60).map(|v| f.elem(v)).collect();
        let ys: Vec<Fe> = (0..60).map(|v| f.elem(v * 7 + 3)).collect();
        let a = PointSet::new(&xs, EvalMode::Naive).unwrap().interpolate(&ys).unwrap();
        let b = PointSet::new(&xs, EvalMode::Fast).unwrap().interpolate(&ys).unwrap();
        assert_eq!(a, b);
        assert_eq!(multipoint_eval(&a, &xs, EvalMode::Fast), ys);
    }

    fn fast_interp_ops(n: usize) -> crate::field::counter::OpCounts {
        let f = Field::prime(P31).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let pts: Vec<(Fe, Fe)> = (0..n).map(|i| (f.elem(i as u64 + 1), f.random(&mut rng))).collect();
        counter::measure(|| interpolate(&pts, EvalMode::Fast).unwrap()).1
    }

    #[test]
    fn fast_interpolation_grows_subquadratically() {
        for n in [64, 128, 256] {
            let (a, b) = (fast_interp_ops(n), fast_interp_ops(2 * n));
            let muls = b.muls as f64 / a.muls as f64;
            let all = b.field_ops() as f64 / a.field_ops() as f64;
            assert!(muls <= 3.8, "n = {n}: mul ratio {muls}");
            assert!(all <= 3.8, "n = {n}: op ratio {all}");
        }
    }
}
