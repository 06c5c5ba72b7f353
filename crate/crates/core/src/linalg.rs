//! Dense linear algebra kernels: row-pivoted LU with stored factors,
//! multi-right-hand-side triangular solves, a 1-norm condition estimate
//! and index-set slicing helpers.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::scalar::Scalar;

/// LU factorization `P A = L U` with partial (row) pivoting.
///
/// `L` is unit lower triangular and shares storage with `U`.
#[derive(Clone, Debug)]
pub struct LuFactor<T: Scalar> {
    lu: DMatrix<T>,
    /// Row interchanges, LAPACK `ipiv` style: at step `k` rows `k` and
    /// `swaps[k]` were exchanged.
    swaps: Vec<usize>,
    norm1: f64,
}

pub(crate) fn norm1<T: Scalar>(a: &DMatrix<T>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl<T: Scalar> LuFactor<T> {
    pub fn new(mut a: DMatrix<T>) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "LU of a non-square matrix");
        let n = a.nrows();
        let norm1 = norm1(&a);
        let mut swaps = Vec::with_capacity(n);
        for k in 0..n {
            let mut piv = k;
            let mut best = a[(k, k)].modulus();
            for i in k + 1..n {
                let m = a[(i, k)].modulus();
                if m > best {
                    best = m;
                    piv = i;
                }
            }
            swaps.push(piv);
            if piv != k {
                a.swap_rows(k, piv);
            }
            let pivot = a[(k, k)];
            if best == 0.0 {
                continue;
            }
            let inv = T::one() / pivot;
            let data = a.as_mut_slice();
            let (left, right) = data.split_at_mut((k + 1) * n);
            let col_k = &mut left[k * n..];
            for v in &mut col_k[k + 1..] {
                *v *= inv;
            }
            let col_k = &col_k[k + 1..];
            right.chunks_mut(n).for_each(|col_j| {
                let akj = col_j[k];
                if akj != T::zero() {
                    for (dst, &l) in col_j[k + 1..].iter_mut().zip(col_k) {
                        *dst -= l * akj;
                    }
                }
            });
        }
        Self { lu: a, swaps, norm1 }
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    /// Packed factors (unit-lower `L` below the diagonal, `U` on and above).
    pub fn factors(&self) -> &DMatrix<T> {
        &self.lu
    }

    pub fn swaps(&self) -> &[usize] {
        &self.swaps
    }

    pub fn norm1(&self) -> f64 {
        self.norm1
    }

    pub(crate) fn from_parts(lu: DMatrix<T>, swaps: Vec<usize>, norm1: f64) -> Self {
        Self { lu, swaps, norm1 }
    }

    /// Smallest pivot modulus.
    pub fn min_pivot(&self) -> f64 {
        (0..self.dim())
            .map(|k| self.lu[(k, k)].modulus())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_pivot(&self) -> f64 {
        (0..self.dim()).map(|k| self.lu[(k, k)].modulus()).fold(0.0, f64::max)
    }

    fn solve_column(&self, b: &mut [T]) {
        let n = self.dim();
        for (k, &p) in self.swaps.iter().enumerate() {
            if p != k {
                b.swap(k, p);
            }
        }
        let data = self.lu.as_slice();
        for k in 0..n {
            let bk = b[k];
            if bk != T::zero() {
                let col = &data[k * n..(k + 1) * n];
                for i in k + 1..n {
                    b[i] -= col[i] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let col = &data[k * n..(k + 1) * n];
            b[k] /= col[k];
            let bk = b[k];
            if bk != T::zero() {
                for i in 0..k {
                    b[i] -= col[i] * bk;
                }
            }
        }
    }

    /// Solves `A^H x = b` in place.
    fn solve_adjoint_column(&self, b: &mut [T]) {
        let n = self.dim();
        let data = self.lu.as_slice();
        // U^H w = b
        for k in 0..n {
            let col = &data[k * n..(k + 1) * n];
            let mut acc = b[k];
            for i in 0..k {
                acc -= col[i].conjugate() * b[i];
            }
            b[k] = acc / col[k].conjugate();
        }
        // L^H t = w
        for k in (0..n).rev() {
            let col = &data[k * n..(k + 1) * n];
            let mut acc = b[k];
            for i in k + 1..n {
                acc -= col[i].conjugate() * b[i];
            }
            b[k] = acc;
        }
        for (k, &p) in self.swaps.iter().enumerate().rev() {
            if p != k {
                b.swap(k, p);
            }
        }
    }

    pub fn solve_vec(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_column(&mut x);
        x
    }

    pub fn solve_in_place(&self, b: &mut DMatrix<T>) {
        assert_eq!(b.nrows(), self.dim());
        let n = self.dim();
        if n == 0 {
            return;
        }
        b.as_mut_slice()
            .par_chunks_mut(n)
            .for_each(|col| self.solve_column(col));
    }

    pub fn solve(&self, b: &DMatrix<T>) -> DMatrix<T> {
        let mut x = b.clone();
        self.solve_in_place(&mut x);
        x
    }

    /// Hager–Higham estimate of `‖A⁻¹‖₁`.
    pub fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.dim();
        if n == 0 {
            return 0.0;
        }
        if self.min_pivot() == 0.0 {
            return f64::INFINITY;
        }
        let mut x = vec![T::from_real(1.0 / n as f64); n];
        let mut est = 0.0;
        for iter in 0..5 {
            let mut y = x.clone();
            self.solve_column(&mut y);
            let new_est: f64 = y.iter().map(|v| v.modulus()).sum();
            if !new_est.is_finite() {
                return f64::INFINITY;
            }
            if iter > 0 && new_est <= est {
                break;
            }
            est = new_est;
            let mut z: Vec<T> = y
                .iter()
                .map(|&v| {
                    let m = v.modulus();
                    if m == 0.0 {
                        T::one()
                    } else {
                        v / T::from_real(m)
                    }
                })
                .collect();
            self.solve_adjoint_column(&mut z);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.modulus()))
                .fold((0, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            let ztx: f64 = z
                .iter()
                .zip(&x)
                .map(|(zi, xi)| (zi.conjugate() * *xi).real_part())
                .sum();
            if iter > 0 && zmax <= ztx {
                break;
            }
            x.iter_mut().for_each(|v| *v = T::zero());
            x[jmax] = T::one();
        }
        // Alternating-sign probe guards against underestimates.
        let mut alt: Vec<T> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                T::from_real(s * (1.0 + i as f64 / (n.max(2) - 1) as f64))
            })
            .collect();
        self.solve_column(&mut alt);
        let alt_est = 2.0 * alt.iter().map(|v| v.modulus()).sum::<f64>() / (3.0 * n as f64);
        est.max(alt_est)
    }

    /// Estimated 1-norm condition number, never below the pivot spread.
    pub fn condition_estimate(&self) -> f64 {
        if self.dim() == 0 {
            return 1.0;
        }
        let est = self.norm1 * self.inverse_norm1_estimate();
        let spread = self.max_pivot() / self.min_pivot();
        est.max(spread)
    }
}

/// Real matrix promoted to the scalar field `T`.
pub fn promote<T: Scalar>(a: &DMatrix<f64>) -> DMatrix<T> {
    a.map(T::from_real)
}

pub fn submatrix<T: Scalar>(a: &DMatrix<T>, rows: &[usize], cols: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

pub fn select_rows<T: Scalar>(a: &DMatrix<T>, rows: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

pub fn select_cols<T: Scalar>(a: &DMatrix<T>, cols: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(a.nrows(), cols.len(), |i, j| a[(i, cols[j])])
}

pub fn gather<T: Copy>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i]).collect()
}

pub fn matvec<T: Scalar>(a: &DMatrix<T>, x: &[T]) -> Vec<T> {
    assert_eq!(a.ncols(), x.len());
    let mut y = vec![T::zero(); a.nrows()];
    let n = a.nrows();
    if n == 0 {
        return y;
    }
    for (col, &xj) in a.as_slice().chunks(n).zip(x) {
        if xj != T::zero() {
            for (yi, &aij) in y.iter_mut().zip(col) {
                *yi += aij * xj;
            }
        }
    }
    y
}

pub fn to_dvector<T: Scalar>(v: &[T]) -> DVector<T> {
    DVector::from_column_slice(v)
}
