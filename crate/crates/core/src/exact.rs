//! Exact linear algebra over Q and fraction-free elimination over Z.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::domain::Rational;

#[derive(Debug, Clone, PartialEq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl RationalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RationalMatrix {
            rows,
            cols,
            data: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Rational::one());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Rational) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        RationalMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.data[i * self.cols + j]
    }

    pub fn to_f64(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.rows, self.cols, |i, j| {
            crate::domain::to_f64(self.get(i, j))
        })
    }

    pub fn set(&mut self, i: usize, j: usize, v: Rational) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn mul(&self, other: &RationalMatrix) -> RationalMatrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        let idx = i * out.cols + j;
                        out.data[idx] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .filter(|(a, b)| !a.is_zero() && !b.is_zero())
                    .fold(Rational::zero(), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    /// Row-vector product vᵀM.
    pub fn vec_mul(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(self.rows, v.len(), "dimension mismatch");
        let mut out = vec![Rational::zero(); self.cols];
        for (i, vi) in v.iter().enumerate() {
            if vi.is_zero() {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                if !a.is_zero() {
                    *o += vi * a;
                }
            }
        }
        out
    }

    pub fn pow(&self, p: u32) -> RationalMatrix {
        assert_eq!(self.rows, self.cols);
        let mut acc = Self::identity(self.rows);
        for _ in 0..p {
            acc = acc.mul(self);
        }
        acc
    }

    /// Reduced row echelon form and pivot columns.
    pub fn rref(&self) -> (RationalMatrix, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(p) = (r..m.rows).find(|&i| !m.get(i, c).is_zero()) else {
                continue;
            };
            m.swap_rows(r, p);
            let inv = m.get(r, c).recip();
            for j in c..m.cols {
                let v = m.get(r, j) * &inv;
                m.set(r, j, v);
            }
            for i in 0..m.rows {
                if i == r || m.get(i, c).is_zero() {
                    continue;
                }
                let f = m.get(i, c).clone();
                for j in c..m.cols {
                    if m.get(r, j).is_zero() {
                        continue;
                    }
                    let v = m.get(i, j) - &f * m.get(r, j);
                    m.set(i, j, v);
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of {x : Mx = 0}.
    pub fn nullspace(&self) -> Vec<Vec<Rational>> {
        let (r, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut x = vec![Rational::zero(); self.cols];
                x[f] = Rational::one();
                for (row, &p) in pivots.iter().enumerate() {
                    x[p] = -r.get(row, f).clone();
                }
                x
            })
            .collect()
    }

    /// A particular solution of Mx = b with free variables set to zero.
    pub fn solve(&self, b: &[Rational]) -> Option<Vec<Rational>> {
        assert_eq!(self.rows, b.len(), "dimension mismatch");
        let aug = Self::from_fn(self.rows, self.cols + 1, |i, j| {
            if j < self.cols {
                self.get(i, j).clone()
            } else {
                b[i].clone()
            }
        });
        let (r, pivots) = aug.rref();
        if pivots.last() == Some(&self.cols) {
            return None;
        }
        let mut x = vec![Rational::zero(); self.cols];
        for (row, &p) in pivots.iter().enumerate() {
            x[p] = r.get(row, self.cols).clone();
        }
        Some(x)
    }

    pub fn determinant(&self) -> Rational {
        assert_eq!(self.rows, self.cols, "determinant of non-square matrix");
        let mut m = self.clone();
        let n = self.rows;
        let mut det = Rational::one();
        for c in 0..n {
            let Some(p) = (c..n).find(|&i| !m.get(i, c).is_zero()) else {
                return Rational::zero();
            };
            if p != c {
                m.swap_rows(p, c);
                det = -det;
            }
            let piv = m.get(c, c).clone();
            det *= &piv;
            for i in c + 1..n {
                if m.get(i, c).is_zero() {
                    continue;
                }
                let f = m.get(i, c) / &piv;
                for j in c..n {
                    let v = m.get(i, j) - &f * m.get(c, j);
                    m.set(i, j, v);
                }
            }
        }
        det
    }
}

/// Row reduction of M kept alongside the transform E with E·M = rref(M), so
/// many right-hand sides can be solved after a single elimination.
#[derive(Debug, Clone)]
pub struct Solver {
    cols: usize,
    transform: RationalMatrix,
    pivots: Vec<usize>,
}

impl Solver {
    pub fn new(m: &RationalMatrix) -> Self {
        let aug = RationalMatrix::from_fn(m.rows, m.cols + m.rows, |i, j| {
            if j < m.cols {
                m.get(i, j).clone()
            } else if j - m.cols == i {
                Rational::one()
            } else {
                Rational::zero()
            }
        });
        let (r, all_pivots) = aug.rref();
        let pivots: Vec<usize> = all_pivots.into_iter().filter(|&p| p < m.cols).collect();
        let transform =
            RationalMatrix::from_fn(m.rows, m.rows, |i, j| r.get(i, m.cols + j).clone());
        Solver {
            cols: m.cols,
            transform,
            pivots,
        }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// Particular solution with free variables zero, or None if inconsistent.
    pub fn solve(&self, b: &[Rational]) -> Option<Vec<Rational>> {
        let eb = self.transform.mul_vec(b);
        if eb[self.pivots.len()..].iter().any(|v| !v.is_zero()) {
            return None;
        }
        let mut x = vec![Rational::zero(); self.cols];
        for (row, &p) in self.pivots.iter().enumerate() {
            x[p] = eb[row].clone();
        }
        Some(x)
    }
}

pub fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter()
        .zip(b)
        .filter(|(x, y)| !x.is_zero() && !y.is_zero())
        .fold(Rational::zero(), |acc, (x, y)| acc + x * y)
}

/// Divides a row by the gcd of its entries and makes its leading entry positive.
pub fn normalize_int_row(row: &mut [BigInt]) {
    let mut g = BigInt::zero();
    for v in row.iter() {
        if !v.is_zero() {
            g = g.gcd(v);
            if g.is_one() {
                break;
            }
        }
    }
    if g.is_zero() {
        return;
    }
    let lead_negative = row
        .iter()
        .find(|v| !v.is_zero())
        .is_some_and(|v| v.is_negative());
    if lead_negative {
        g = -g;
    }
    if !g.is_one() {
        for v in row.iter_mut() {
            if !v.is_zero() {
                *v = &*v / &g;
            }
        }
    }
}

/// Row-echelon basis of the row span of integer vectors, by fraction-free
/// elimination with gcd normalization.
pub fn integer_row_basis(rows: Vec<Vec<BigInt>>) -> Vec<Vec<BigInt>> {
    let Some(cols) = rows.first().map(Vec::len) else {
        return Vec::new();
    };
    let mut work: Vec<Vec<BigInt>> = rows
        .into_iter()
        .filter(|r| r.iter().any(|v| !v.is_zero()))
        .collect();
    for r in work.iter_mut() {
        normalize_int_row(r);
    }
    let mut basis = Vec::new();
    for c in 0..cols {
        let Some(p) = (0..work.len())
            .filter(|&i| !work[i][c].is_zero())
            .min_by_key(|&i| work[i][c].bits())
        else {
            continue;
        };
        let pivot = work.swap_remove(p);
        let pv = &pivot[c];
        for row in work.iter_mut() {
            if row[c].is_zero() {
                continue;
            }
            let g = pv.gcd(&row[c]);
            let fp = &row[c] / &g;
            let fr = pv / &g;
            for j in c..cols {
                let a = &row[j] * &fr;
                row[j] = if pivot[j].is_zero() {
                    a
                } else {
                    a - &pivot[j] * &fp
                };
            }
            normalize_int_row(row);
        }
        work.retain(|r| r.iter().any(|v| !v.is_zero()));
        basis.push(pivot);
    }
    basis
}

pub fn integer_rank(rows: Vec<Vec<BigInt>>) -> usize {
    integer_row_basis(rows).len()
}
