use std::collections::HashSet;
use std::sync::OnceLock;

use super::{EvalMode, Extrapolation, PointSet};
use crate::error::{Error, Result};
use crate::field::counter::{self, Scope};
use crate::field::{batch_inverse, Fe, Field};
use crate::linalg::Matrix;

/// Machine points `omega_1..omega_K` and node points `alpha_1..alpha_N`.
#[derive(Clone, Debug)]
pub struct EvalDomain {
    field: Field,
    omegas: Vec<Fe>,
    alphas: Vec<Fe>,
    mode: EvalMode,
    coeffs: OnceLock<Matrix>,
    omega_set: OnceLock<PointSet>,
    alpha_set: OnceLock<PointSet>,
    extrapolation: OnceLock<Option<Extrapolation>>,
}

impl EvalDomain {
    pub fn new(field: Field, omegas: Vec<Fe>, alphas: Vec<Fe>) -> Result<Self> {
        let (k, n) = (omegas.len(), alphas.len());
        if k == 0 {
            return Err(Error::Domain("no machine points".into()));
        }
        if k > n {
            return Err(Error::Domain(format!("K = {k} exceeds N = {n}")));
        }
        if field.order() < (k + n) as u128 {
            return Err(Error::Domain(format!("field of order {} cannot hold {} distinct points", field.order(), k + n)));
        }
        if omegas.iter().chain(&alphas).any(|x| x.field() != field) {
            return Err(Error::MixedFields);
        }
        let mut seen = HashSet::new();
        for x in omegas.iter().chain(&alphas) {
            if !seen.insert(x.value()) {
                return Err(Error::Domain(format!("point {x} appears twice")));
            }
        }
        Ok(EvalDomain {
            field,
            omegas,
            alphas,
            mode: EvalMode::default(),
            coeffs: OnceLock::new(),
            omega_set: OnceLock::new(),
            alpha_set: OnceLock::new(),
            extrapolation: OnceLock::new(),
        })
    }

    /// `omega_k = k` and `alpha_i = K + i`.
    pub fn standard(field: Field, k: usize, n: usize) -> Result<Self> {
        if field.order() < (k + n + 1) as u128 {
            return Err(Error::Domain(format!("field of order {} too small for K = {k}, N = {n}", field.order())));
        }
        let omegas = (1..=k).map(|v| field.elem(v as u64)).collect();
        let alphas = (k + 1..=k + n).map(|v| field.elem(v as u64)).collect();
        Self::new(field, omegas, alphas)
    }

    pub fn with_mode(mut self, mode: EvalMode) -> Self {
        self.mode = mode;
        self.omega_set = OnceLock::new();
        self.alpha_set = OnceLock::new();
        self
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn mode(&self) -> EvalMode {
        self.mode
    }

    pub fn k(&self) -> usize {
        self.omegas.len()
    }

    pub fn n(&self) -> usize {
        self.alphas.len()
    }

    pub fn omegas(&self) -> &[Fe] {
        &self.omegas
    }

    pub fn alphas(&self) -> &[Fe] {
        &self.alphas
    }

    /// `C[i][k] = prod_{l != k} (alpha_i - omega_l) / (omega_k - omega_l)`,
    /// built on first use and charged to the setup scope.
    pub fn lagrange_coeffs(&self) -> &Matrix {
        self.coeffs.get_or_init(|| counter::with_scope(Scope::SETUP, || compute_coeffs(&self.omegas, &self.alphas)))
    }

    pub fn omega_points(&self) -> &PointSet {
        self.omega_set.get_or_init(|| {
            counter::with_scope(Scope::SETUP, || PointSet::new(&self.omegas, self.mode).expect("validated points"))
        })
    }

    pub fn alpha_points(&self) -> &PointSet {
        self.alpha_set.get_or_init(|| {
            counter::with_scope(Scope::SETUP, || PointSet::new(&self.alphas, self.mode).expect("validated points"))
        })
    }
}

impl EvalDomain {
    /// Starts of the omega and alpha runs when both are runs of
    /// consecutive integers in a prime field.
    pub fn progressions(&self) -> Option<(u64, u64)> {
        if self.field.is_binary() {
            return None;
        }
        let run = |xs: &[Fe]| {
            let s = xs[0].value();
            xs.iter().enumerate().all(|(i, x)| x.value() == s + i as u64).then_some(s)
        };
        Some((run(&self.omegas)?, run(&self.alphas)?))
    }

    /// Omega values to alpha values as an integer-progression
    /// extrapolation, when the points allow it.
    pub fn extrapolation(&self) -> Option<&Extrapolation> {
        self.extrapolation
            .get_or_init(|| {
                let (w, a) = self.progressions()?;
                Extrapolation::new(self.field, w, self.k(), a, self.n()).ok()
            })
            .as_ref()
    }
}

fn compute_coeffs(omegas: &[Fe], alphas: &[Fe]) -> Matrix {
    let field = omegas[0].field();
    let k = omegas.len();
    let mut m = Matrix::zeros(field, alphas.len(), k);
    if k == 1 {
        for i in 0..alphas.len() {
            m.set(i, 0, field.one());
        }
        return m;
    }
    let denoms: Vec<Fe> = (0..k)
        .map(|j| {
            (0..k)
                .filter(|&l| l != j)
                .map(|l| omegas[j] - omegas[l])
                .reduce(|a, b| a * b)
                .expect("k > 1")
        })
        .collect();
    let weights = batch_inverse(&denoms).expect("distinct omegas");
    for (i, &a) in alphas.iter().enumerate() {
        let diffs: Vec<Fe> = omegas.iter().map(|&w| a - w).collect();
        // prefix[j] = prod_{l < j}, suffix[j] = prod_{l > j}
        let mut prefix = Vec::with_capacity(k);
        prefix.push(field.one());
        for j in 1..k {
            prefix.push(if j == 1 { diffs[0] } else { prefix[j - 1] * diffs[j - 1] });
        }
        let mut suffix = vec![field.one(); k];
        for j in (0..k - 1).rev() {
            suffix[j] = if j == k - 2 { diffs[k - 1] } else { suffix[j + 1] * diffs[j + 1] };
        }
        for j in 0..k {
            let num = if j == 0 {
                suffix[0]
            } else if j == k - 1 {
                prefix[k - 1]
            } else {
                prefix[j] * suffix[j]
            };
            m.set(i, j, num * weights[j]);
        }
    }
    m
}

/// Free-function form of [`EvalDomain::lagrange_coeffs`].
pub fn lagrange_coeffs(dom: &EvalDomain) -> &Matrix {
    dom.lagrange_coeffs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::P31;
    use crate::linalg::dot;
    use crate::poly::{interpolate, EvalMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Entry-by-entry product formula.
    fn oracle(omegas: &[Fe], a: Fe, k: usize) -> Fe {
        let mut v = a.field().one();
        for l in 0..omegas.len() {
            if l != k {
                v = v * (a - omegas[l]) / (omegas[k] - omegas[l]);
            }
        }
        v
    }

    #[test]
    fn coeffs_running_example() {
        let f = Field::prime(11).unwrap();
        let dom = EvalDomain::standard(f, 2, 5).unwrap();
        let c = dom.lagrange_coeffs();
        let rows: Vec<Vec<u64>> = (0..5).map(|i| c.row(i).iter().map(Fe::value).collect()).collect();
        assert_eq!(rows, vec![vec![10, 2], vec![9, 3], vec![8, 4], vec![7, 5], vec![6, 6]]);
        for i in 0..5 {
            for k in 0..2 {
                assert_eq!(c.get(i, k), oracle(dom.omegas(), dom.alphas()[i], k));
            }
        }
        // row (9,3) applied to states (4,7) gives u(4) = 2
        assert_eq!(dot(c.row(1), &[f.elem(4), f.elem(7)]), f.elem(2));
    }

    #[test]
    fn single_machine_coeffs_are_one() {
        let f = Field::prime(11).unwrap();
        let dom = EvalDomain::standard(f, 1, 4).unwrap();
        let c = dom.lagrange_coeffs();
        assert!((0..4).all(|i| c.get(i, 0).is_one()));
    }

    #[test]
    fn coeffs_match_oracle_random_domain() {
        let f = Field::prime(P31).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut seen = HashSet::new();
        let mut pts = Vec::new();
        while pts.len() < 17 {
            let x = f.random(&mut rng);
            if seen.insert(x.value()) {
                pts.push(x);
            }
        }
        let dom = EvalDomain::new(f, pts[..5].to_vec(), pts[5..].to_vec()).unwrap();
        let c = dom.lagrange_coeffs();
        for i in 0..12 {
            for k in 0..5 {
                assert_eq!(c.get(i, k), oracle(dom.omegas(), dom.alphas()[i], k));
            }
        }
    }

    #[test]
    fn encoding_is_interpolate_then_evaluate() {
        let f = Field::prime(P31).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for (k, n) in [(1, 3), (3, 10), (8, 40), (40, 90)] {
            let dom = EvalDomain::standard(f, k, n).unwrap();
            let states: Vec<Fe> = (0..k).map(|_| f.random(&mut rng)).collect();
            let pts: Vec<(Fe, Fe)> = dom.omegas().iter().copied().zip(states.iter().copied()).collect();
            let u = interpolate(&pts, EvalMode::Auto).unwrap();
            let c = dom.lagrange_coeffs();
            for (i, &a) in dom.alphas().iter().enumerate() {
                assert_eq!(dot(c.row(i), &states), u.eval(a));
            }
        }
    }

    #[test]
    fn coeffs_charged_to_setup_once() {
        counter::reset();
        let f = Field::prime(P31).unwrap();
        let dom = EvalDomain::standard(f, 4, 10).unwrap();
        let _ = dom.lagrange_coeffs();
        let first = counter::tally()[&Scope::SETUP];
        let _ = dom.lagrange_coeffs();
        assert_eq!(counter::tally()[&Scope::SETUP], first);
        assert!(first.field_ops() > 0);
    }

    #[test]
    fn invalid_domains() {
        let f = Field::prime(11).unwrap();
        let e = |v: &[u64]| v.iter().map(|&x| f.elem(x)).collect::<Vec<_>>();
        assert!(EvalDomain::new(f, e(&[1, 2]), e(&[2, 3])).is_err());
        assert!(EvalDomain::new(f, e(&[1, 2, 3]), e(&[4, 5])).is_err());
        assert!(EvalDomain::standard(f, 3, 8).is_err());
        assert!(EvalDomain::standard(f, 2, 8).is_ok());
        assert!(EvalDomain::new(f, vec![], e(&[1])).is_err());
    }
}
