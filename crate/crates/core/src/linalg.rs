//! Dense matrices over a field and exact Gaussian elimination.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Fe, Field};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matrix {
    field: Field,
    rows: usize,
    cols: usize,
    data: Vec<Fe>,
}

impl Matrix {
    pub fn zeros(field: Field, rows: usize, cols: usize) -> Self {
        Matrix { field, rows, cols, data: vec![field.zero(); rows * cols] }
    }

    pub fn from_rows(field: Field, rows: Vec<Vec<Fe>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Domain("ragged matrix rows".into()));
        }
        if rows.iter().flatten().any(|e| e.field() != field) {
            return Err(Error::MixedFields);
        }
        let n = rows.len();
        Ok(Matrix { field, rows: n, cols, data: rows.into_iter().flatten().collect() })
    }

    pub fn from_u64(field: Field, rows: &[&[u64]]) -> Result<Self> {
        Self::from_rows(field, rows.iter().map(|r| r.iter().map(|&v| field.elem(v)).collect()).collect())
    }

    /// Rows `[1, x, x^2, ..., x^(cols-1)]` for each point.
    pub fn vandermonde(field: Field, points: &[Fe], cols: usize) -> Self {
        let mut m = Matrix::zeros(field, points.len(), cols);
        for (i, &x) in points.iter().enumerate() {
            let mut p = field.one();
            for j in 0..cols {
                m.set(i, j, p);
                if j + 1 < cols {
                    p *= x;
                }
            }
        }
        m
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> Fe {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Fe) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Fe] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Submatrix made of the given rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &r in idx {
            data.extend_from_slice(self.row(r));
        }
        Matrix { field: self.field, rows: idx.len(), cols: self.cols, data }
    }

    pub fn mul_vec(&self, x: &[Fe]) -> Result<Vec<Fe>> {
        if x.len() != self.cols {
            return Err(Error::Domain(format!("vector length {} does not match {} columns", x.len(), self.cols)));
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), x)).collect())
    }
}

/// Inner product; `2n - 1` field operations for `n > 0`.
pub fn dot(a: &[Fe], b: &[Fe]) -> Fe {
    debug_assert_eq!(a.len(), b.len());
    let mut it = a.iter().zip(b);
    let Some((x, y)) = it.next() else {
        panic!("inner product of empty vectors has no field");
    };
    let mut acc = *x * *y;
    for (x, y) in it {
        acc += *x * *y;
    }
    acc
}

/// Some solution of `A x = rhs`, or `None` if the system is inconsistent.
/// Free variables are set to zero.
pub fn solve(a: &Matrix, rhs: &[Fe]) -> Option<Vec<Fe>> {
    let (n, m) = (a.rows, a.cols);
    assert_eq!(rhs.len(), n);
    let field = a.field;
    // augmented rows
    let mut rows: Vec<Vec<Fe>> = (0..n)
        .map(|r| {
            let mut v = a.row(r).to_vec();
            v.push(rhs[r]);
            v
        })
        .collect();
    let mut pivots = Vec::new();
    let mut pr = 0;
    for col in 0..m {
        if pr == n {
            break;
        }
        // any nonzero entry is an exact pivot
        let Some(sel) = (pr..n).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(pr, sel);
        let inv = rows[pr][col].inv().expect("nonzero pivot");
        for c in col..=m {
            rows[pr][c] *= inv;
        }
        for r in 0..n {
            if r != pr && !rows[r][col].is_zero() {
                let factor = rows[r][col];
                for c in col..=m {
                    let t = factor * rows[pr][c];
                    rows[r][c] -= t;
                }
            }
        }
        pivots.push(col);
        pr += 1;
    }
    if rows[pr..].iter().any(|row| !row[m].is_zero()) {
        return None;
    }
    let mut x = vec![field.zero(); m];
    for (r, &c) in pivots.iter().enumerate() {
        x[c] = rows[r][m];
    }
    Some(x)
}
