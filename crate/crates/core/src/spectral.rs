//! One-dimensional Chebyshev primitives and their tensor-product lifts.
//!
//! All node sets are ascending. On the `(p+1)²` tensor grid the linear
//! index is `k = j·(p+1) + i`, where `j` indexes ξ and `i` indexes η, so
//! η varies fastest.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridKind {
    /// Chebyshev extreme points, endpoints included.
    SecondKind,
    /// Chebyshev roots, endpoints excluded.
    FirstKind,
}

/// Ascending one-dimensional Chebyshev grid of polynomial degree `order`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid1D {
    pub kind: GridKind,
    pub order: usize,
    pub nodes: Vec<f64>,
}

impl Grid1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Barycentric weights (up to a common factor).
    pub fn barycentric_weights(&self) -> Vec<f64> {
        let n = self.nodes.len();
        match self.kind {
            GridKind::SecondKind => (0..n)
                .map(|k| {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    let delta = if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
                    sign * delta
                })
                .collect(),
            GridKind::FirstKind => (0..n)
                .map(|k| {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    sign * ((2 * k + 1) as f64 * PI / (2 * n) as f64).sin()
                })
                .collect(),
        }
    }
}

/// Second-kind Chebyshev points `-cos(kπ/p)`, `k = 0..=p`.
pub fn cheb2_nodes(p: usize) -> Result<Grid1D> {
    if p < 1 {
        return Err(Error::InvalidOrder {
            order: p as i64,
            reason: "second-kind grids need p >= 1",
        });
    }
    // sin form keeps the grid exactly antisymmetric about 0
    let nodes = (0..=p)
        .map(|k| (PI * (2.0 * k as f64 - p as f64) / (2.0 * p as f64)).sin())
        .collect();
    Ok(Grid1D {
        kind: GridKind::SecondKind,
        order: p,
        nodes,
    })
}

/// First-kind Chebyshev points `-cos((2k+1)π/(2q+2))`, `k = 0..=q`.
pub fn cheb1_nodes(q: usize) -> Result<Grid1D> {
    let n = q + 1;
    let nodes = (0..n)
        .map(|k| (PI * (2.0 * k as f64 + 1.0 - n as f64) / (2.0 * n as f64)).sin())
        .collect();
    Ok(Grid1D {
        kind: GridKind::FirstKind,
        order: q,
        nodes,
    })
}

/// Differentiation matrix on an arbitrary Chebyshev grid, diagonal from the
/// negative-sum identity.
pub fn grid_diff_matrix(grid: &Grid1D) -> DMatrix<f64> {
    let x = &grid.nodes;
    let w = grid.barycentric_weights();
    let n = x.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = (w[j] / w[i]) / (x[i] - x[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    d
}

/// Spectral differentiation matrix on the order-`p` second-kind grid.
pub fn diff_matrix(p: usize) -> Result<DMatrix<f64>> {
    Ok(grid_diff_matrix(&cheb2_nodes(p)?))
}

/// Barycentric interpolation from `src` samples to the points `dst`.
pub fn interp_to_points(src: &Grid1D, dst: &[f64]) -> DMatrix<f64> {
    let w = src.barycentric_weights();
    let x = &src.nodes;
    let mut m = DMatrix::zeros(dst.len(), x.len());
    for (r, &t) in dst.iter().enumerate() {
        if let Some(hit) = x.iter().position(|&xj| xj == t) {
            m[(r, hit)] = 1.0;
            continue;
        }
        let mut denom = 0.0;
        for j in 0..x.len() {
            let c = w[j] / (t - x[j]);
            m[(r, j)] = c;
            denom += c;
        }
        for j in 0..x.len() {
            m[(r, j)] /= denom;
        }
    }
    m
}

/// `|dst| × |src|` interpolation matrix between two grids.
pub fn interp_matrix(src: &Grid1D, dst: &Grid1D) -> DMatrix<f64> {
    interp_to_points(src, &dst.nodes)
}

/// Clenshaw–Curtis weights on the order-`p` second-kind grid.
pub fn cc_weights(p: usize) -> Result<Vec<f64>> {
    if p < 1 {
        return Err(Error::InvalidOrder {
            order: p as i64,
            reason: "Clenshaw-Curtis needs p >= 1",
        });
    }
    let n = p;
    let nf = n as f64;
    let mut w = vec![0.0; n + 1];
    let theta = |k: usize| PI * k as f64 / nf;
    if n.is_multiple_of(2) {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[n] = w[0];
    } else {
        w[0] = 1.0 / (nf * nf);
        w[n] = w[0];
    }
    for (i, wi) in w.iter_mut().enumerate().take(n).skip(1) {
        let mut v = 1.0;
        let th = theta(i);
        if n.is_multiple_of(2) {
            for k in 1..n / 2 {
                let kf = k as f64;
                v -= 2.0 * (2.0 * kf * th).cos() / (4.0 * kf * kf - 1.0);
            }
            v -= (nf * th).cos() / (nf * nf - 1.0);
        } else {
            for k in 1..=(n - 1) / 2 {
                let kf = k as f64;
                v -= 2.0 * (2.0 * kf * th).cos() / (4.0 * kf * kf - 1.0);
            }
        }
        *wi = 2.0 * v / nf;
    }
    Ok(w)
}

/// Interpolatory quadrature weights on any Chebyshev grid (Clenshaw–Curtis
/// on second-kind grids, Fejér's first rule on first-kind grids).
pub fn quadrature_weights(grid: &Grid1D) -> Vec<f64> {
    match grid.kind {
        GridKind::SecondKind => cc_weights(grid.order).expect("grid order >= 1"),
        GridKind::FirstKind => {
            let m = grid.order.max(1);
            let target = cheb2_nodes(m).expect("m >= 1");
            let cc = cc_weights(m).expect("m >= 1");
            let e = interp_matrix(grid, &target);
            (0..grid.len())
                .map(|j| (0..target.len()).map(|r| cc[r] * e[(r, j)]).sum())
                .collect()
        }
    }
}

/// Linear index of tensor node `(i, j)` (η index `i`, ξ index `j`).
#[inline]
pub fn tensor_index(p: usize, i: usize, j: usize) -> usize {
    j * (p + 1) + i
}

/// Tensor-product differentiation operators on the reference square.
#[derive(Clone, Debug)]
pub struct TensorGrid {
    pub order: usize,
    pub grid: Grid1D,
    /// One-dimensional differentiation matrix.
    pub d1: DMatrix<f64>,
}

impl TensorGrid {
    pub fn new(p: usize) -> Result<Self> {
        let grid = cheb2_nodes(p)?;
        let d1 = grid_diff_matrix(&grid);
        Ok(Self { order: p, grid, d1 })
    }

    pub fn n1(&self) -> usize {
        self.order + 1
    }

    pub fn len(&self) -> usize {
        self.n1() * self.n1()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Reference coordinates `(ξ, η)` of tensor node `k`.
    pub fn point(&self, k: usize) -> (f64, f64) {
        let n1 = self.n1();
        (self.grid.nodes[k / n1], self.grid.nodes[k % n1])
    }

    /// `D_ξ · m` using the Kronecker structure `D ⊗ I`.
    pub fn apply_xi(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n1 = self.n1();
        assert_eq!(m.nrows(), n1 * n1);
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for c in 0..m.ncols() {
            let src = m.column(c);
            let mut dst = out.column_mut(c);
            for j in 0..n1 {
                for jj in 0..n1 {
                    let d = self.d1[(j, jj)];
                    if d == 0.0 {
                        continue;
                    }
                    for i in 0..n1 {
                        dst[j * n1 + i] += d * src[jj * n1 + i];
                    }
                }
            }
        }
        out
    }

    /// `D_η · m` using the Kronecker structure `I ⊗ D`.
    pub fn apply_eta(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n1 = self.n1();
        assert_eq!(m.nrows(), n1 * n1);
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for c in 0..m.ncols() {
            let src = m.column(c);
            let mut dst = out.column_mut(c);
            for j in 0..n1 {
                for i in 0..n1 {
                    let mut acc = 0.0;
                    for ii in 0..n1 {
                        acc += self.d1[(i, ii)] * src[j * n1 + ii];
                    }
                    dst[j * n1 + i] = acc;
                }
            }
        }
        out
    }

    pub fn diff_xi_vec(&self, v: &[f64]) -> Vec<f64> {
        let n1 = self.n1();
        let mut out = vec![0.0; n1 * n1];
        for j in 0..n1 {
            for jj in 0..n1 {
                let d = self.d1[(j, jj)];
                for i in 0..n1 {
                    out[j * n1 + i] += d * v[jj * n1 + i];
                }
            }
        }
        out
    }

    pub fn diff_eta_vec(&self, v: &[f64]) -> Vec<f64> {
        let n1 = self.n1();
        let mut out = vec![0.0; n1 * n1];
        for j in 0..n1 {
            for i in 0..n1 {
                out[j * n1 + i] = (0..n1).map(|ii| self.d1[(i, ii)] * v[j * n1 + ii]).sum();
            }
        }
        out
    }
}

/// Dense `(D_ξ, D_η)` on the order-`p` tensor grid.
pub fn tensor_diff(p: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d = diff_matrix(p)?;
    let n1 = p + 1;
    let eye = DMatrix::<f64>::identity(n1, n1);
    Ok((d.kronecker(&eye), eye.kronecker(&d)))
}

/// Barycentric evaluation of tensor samples at `(ξ, η)`.
pub fn eval_tensor<T: crate::scalar::Scalar>(grid: &Grid1D, values: &[T], xi: f64, eta: f64) -> T {
    let n1 = grid.len();
    let rx = interp_to_points(grid, &[xi]);
    let ry = interp_to_points(grid, &[eta]);
    let mut acc = T::zero();
    for j in 0..n1 {
        let cj = rx[(0, j)];
        if cj == 0.0 {
            continue;
        }
        let mut col = T::zero();
        for i in 0..n1 {
            col += values[j * n1 + i] * T::from_real(ry[(0, i)]);
        }
        acc += col * T::from_real(cj);
    }
    acc
}
