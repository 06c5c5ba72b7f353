//! Per-element geometry and differential operators on the tensor grid.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mesh::{Element, Point, Side};
use crate::scalar::Scalar;
use crate::spectral::{cheb1_nodes, interp_matrix, quadrature_weights, tensor_diff, Grid1D, TensorGrid};

fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

/// Order-dependent data shared by every element of a mesh: the tensor grid,
/// the first-kind edge grids of degree `p−2` and the maps between them.
#[derive(Clone, Debug)]
pub struct ReferenceElement {
    pub order: usize,
    pub grid: TensorGrid,
    pub d_xi: DMatrix<f64>,
    pub d_eta: DMatrix<f64>,
    /// First-kind edge grid with `p−1` nodes.
    pub edge: Grid1D,
    /// Fejér weights on the edge grid.
    pub edge_weights: Vec<f64>,
    /// `(p−1) × (p+1)`: second-kind side samples to edge grid.
    pub to_edge: DMatrix<f64>,
    /// `(p+1) × (p−1)`: edge grid to second-kind side samples.
    pub from_edge: DMatrix<f64>,
    pub interior: Vec<usize>,
    pub sides: [Vec<usize>; 4],
    /// `(p+1)² × 4(p−1)`: edge data to full-grid samples, zero on interior
    /// rows, corners averaged from their two sides.
    pub extension: DMatrix<f64>,
}

impl ReferenceElement {
    pub fn new(p: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidOrder {
                order: p as i64,
                reason: "elements need p >= 2",
            });
        }
        let grid = TensorGrid::new(p)?;
        let (d_xi, d_eta) = tensor_diff(p)?;
        let edge = cheb1_nodes(p - 2)?;
        let edge_weights = quadrature_weights(&edge);
        let to_edge = interp_matrix(&grid.grid, &edge);
        let from_edge = interp_matrix(&edge, &grid.grid);
        let n1 = p + 1;
        let mut interior = Vec::with_capacity((p - 1) * (p - 1));
        for j in 1..p {
            for i in 1..p {
                interior.push(j * n1 + i);
            }
        }
        let sides = Side::ALL.map(|s| s.node_indices(p));
        let ne = p - 1;
        let mut extension = DMatrix::zeros(n1 * n1, 4 * ne);
        let mut hits = vec![0usize; n1 * n1];
        for (s, idx) in sides.iter().enumerate() {
            for &k in idx {
                hits[k] += 1;
            }
            for (m, &k) in idx.iter().enumerate() {
                for c in 0..ne {
                    extension[(k, s * ne + c)] += from_edge[(m, c)];
                }
            }
        }
        for (k, &h) in hits.iter().enumerate() {
            if h > 1 {
                let scale = 1.0 / h as f64;
                for c in 0..4 * ne {
                    extension[(k, c)] *= scale;
                }
            }
        }
        Ok(Self {
            order: p,
            grid,
            d_xi,
            d_eta,
            edge,
            edge_weights,
            to_edge,
            from_edge,
            interior,
            sides,
            extension,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Edge-grid nodes per side.
    pub fn n_edge(&self) -> usize {
        self.order - 1
    }

    /// Size of the corner-free boundary grid.
    pub fn n_boundary(&self) -> usize {
        4 * self.n_edge()
    }

    pub fn edge_range(&self, side: Side) -> Range<usize> {
        let ne = self.n_edge();
        side as usize * ne..(side as usize + 1) * ne
    }

    /// Interpolates full-grid samples to the corner-free boundary grid.
    pub fn boundary_trace<T: Scalar>(&self, u: &[T]) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n_boundary());
        for idx in &self.sides {
            for r in 0..self.n_edge() {
                let mut acc = T::zero();
                for (m, &k) in idx.iter().enumerate() {
                    acc += u[k] * T::from_real(self.to_edge[(r, m)]);
                }
                out.push(acc);
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct MetricData {
    pub x_u: Vec<Point>,
    pub x_v: Vec<Point>,
    /// `(g_uu, g_uv, g_vv)` per node.
    pub g: Vec<[f64; 3]>,
    pub det_g: Vec<f64>,
    /// `(g^uu, g^uv, g^vv)` per node.
    pub inv_g: Vec<[f64; 3]>,
    pub xi_x: Vec<Point>,
    pub eta_x: Vec<Point>,
    pub normal: Vec<Point>,
}

impl MetricData {
    /// Area element `√det g`.
    pub fn jacobian(&self) -> Vec<f64> {
        self.det_g.iter().map(|d| d.sqrt()).collect()
    }
}

/// Relative floor on `det g` below which an element is rejected.
pub const DEGENERACY_TOL: f64 = 1e-13;

pub fn compute_metric(element: &Element, grid: &TensorGrid) -> Result<MetricData> {
    let n = grid.len();
    if element.nodes.len() != n {
        return Err(Error::Shape {
            what: "element nodes",
            expected: n,
            got: element.nodes.len(),
        });
    }
    let coord = |c: usize| -> Vec<f64> { element.nodes.iter().map(|x| x[c]).collect() };
    let (xs, ys, zs) = (coord(0), coord(1), coord(2));
    let du = [grid.diff_xi_vec(&xs), grid.diff_xi_vec(&ys), grid.diff_xi_vec(&zs)];
    let dv = [grid.diff_eta_vec(&xs), grid.diff_eta_vec(&ys), grid.diff_eta_vec(&zs)];

    let mut m = MetricData {
        x_u: Vec::with_capacity(n),
        x_v: Vec::with_capacity(n),
        g: Vec::with_capacity(n),
        det_g: Vec::with_capacity(n),
        inv_g: Vec::with_capacity(n),
        xi_x: Vec::with_capacity(n),
        eta_x: Vec::with_capacity(n),
        normal: Vec::with_capacity(n),
    };
    for k in 0..n {
        let xu = [du[0][k], du[1][k], du[2][k]];
        let xv = [dv[0][k], dv[1][k], dv[2][k]];
        let guu = dot(&xu, &xu);
        let guv = dot(&xu, &xv);
        let gvv = dot(&xv, &xv);
        let det = guu * gvv - guv * guv;
        m.x_u.push(xu);
        m.x_v.push(xv);
        m.g.push([guu, guv, gvv]);
        m.det_g.push(det);
    }
    let mut sorted = m.det_g.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = sorted[n / 2];
    for (k, &det) in m.det_g.iter().enumerate() {
        if !(det.is_finite() && det > DEGENERACY_TOL * median && det > 0.0) {
            return Err(Error::DegenerateElement {
                element: element.id,
                node: k,
                det_g: det,
            });
        }
    }
    for k in 0..n {
        let [guu, guv, gvv] = m.g[k];
        let det = m.det_g[k];
        let (iuu, iuv, ivv) = (gvv / det, -guv / det, guu / det);
        let (xu, xv) = (m.x_u[k], m.x_v[k]);
        m.inv_g.push([iuu, iuv, ivv]);
        m.xi_x.push(std::array::from_fn(|c| iuu * xu[c] + iuv * xv[c]));
        m.eta_x.push(std::array::from_fn(|c| iuv * xu[c] + ivv * xv[c]));
        let nrm = cross(&xu, &xv);
        let len = norm(&nrm);
        m.normal.push(nrm.map(|c| c / len));
    }
    Ok(m)
}

/// Tangential derivative matrices `D_x, D_y, D_z`.
#[derive(Clone, Debug)]
pub struct SurfaceDiffOps {
    pub dx: DMatrix<f64>,
    pub dy: DMatrix<f64>,
    pub dz: DMatrix<f64>,
}

impl SurfaceDiffOps {
    pub fn component(&self, c: usize) -> &DMatrix<f64> {
        match c {
            0 => &self.dx,
            1 => &self.dy,
            2 => &self.dz,
            _ => panic!("component index {c} out of range"),
        }
    }

    /// Surface gradient of nodal samples, one vector per Cartesian component.
    pub fn gradient<T: Scalar>(&self, u: &[T]) -> [Vec<T>; 3] {
        std::array::from_fn(|c| apply_real(self.component(c), u))
    }
}

pub(crate) fn apply_real<T: Scalar>(a: &DMatrix<f64>, u: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); a.nrows()];
    for (c, &uc) in u.iter().enumerate() {
        if uc == T::zero() {
            continue;
        }
        for (r, o) in out.iter_mut().enumerate() {
            *o += uc * T::from_real(a[(r, c)]);
        }
    }
    out
}

pub fn surface_diff_matrices(reference: &ReferenceElement, metric: &MetricData) -> SurfaceDiffOps {
    let n = reference.len();
    let build = |c: usize| {
        DMatrix::from_fn(n, n, |r, k| {
            metric.xi_x[r][c] * reference.d_xi[(r, k)] + metric.eta_x[r][c] * reference.d_eta[(r, k)]
        })
    };
    SurfaceDiffOps {
        dx: build(0),
        dy: build(1),
        dz: build(2),
    }
}

/// Outward unit binormals at the `p+1` second-kind nodes of one side.
pub fn outward_binormals(reference: &ReferenceElement, metric: &MetricData, side: Side) -> Vec<Point> {
    reference.sides[side as usize]
        .iter()
        .map(|&k| {
            let (t, out) = if side.along_xi() {
                (metric.x_u[k], metric.x_v[k])
            } else {
                (metric.x_v[k], metric.x_u[k])
            };
            let b = cross(&t, &metric.normal[k]);
            let len = norm(&b);
            let sign = if dot(&b, &out) * side.outward_sign() >= 0.0 {
                1.0
            } else {
                -1.0
            };
            b.map(|c| sign * c / len)
        })
        .collect()
}

/// `4(p−1) × (p+1)²` map from nodal samples to outward flux on the edge grids.
pub fn binormal_operator(reference: &ReferenceElement, metric: &MetricData, ops: &SurfaceDiffOps) -> DMatrix<f64> {
    let n = reference.len();
    let ne = reference.n_edge();
    let mut out = DMatrix::zeros(reference.n_boundary(), n);
    for side in Side::ALL {
        let idx = &reference.sides[side as usize];
        let nb = outward_binormals(reference, metric, side);
        let mut flux = DMatrix::zeros(idx.len(), n);
        for (m, &k) in idx.iter().enumerate() {
            for c in 0..n {
                flux[(m, c)] = nb[m][0] * ops.dx[(k, c)] + nb[m][1] * ops.dy[(k, c)] + nb[m][2] * ops.dz[(k, c)];
            }
        }
        let rows = &reference.to_edge * flux;
        out.view_mut((side as usize * ne, 0), (ne, n)).copy_from(&rows);
    }
    out
}

pub type CoefFn<T> = Arc<dyn Fn(&Point) -> T + Send + Sync>;

/// Names of the second-order coefficients, in storage order.
pub const A_NAMES: [&str; 6] = ["a11", "a22", "a33", "a12", "a23", "a13"];
const A_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)];
pub const B_NAMES: [&str; 3] = ["b1", "b2", "b3"];

/// Coefficients of `Σ a_ij ∂_i ∂_j + Σ b_i ∂_i + c` in Cartesian surface
/// derivatives. Absent entries are zero.
pub struct CoefficientField<T> {
    pub a: [Option<CoefFn<T>>; 6],
    pub b: [Option<CoefFn<T>>; 3],
    pub c: Option<CoefFn<T>>,
}

impl<T> Clone for CoefficientField<T> {
    fn clone(&self) -> Self {
        Self {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.clone(),
        }
    }
}

impl<T> fmt::Debug for CoefficientField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let present: Vec<&str> = A_NAMES
            .iter()
            .zip(&self.a)
            .chain(B_NAMES.iter().zip(&self.b))
            .chain(std::iter::once((&"c", &self.c)))
            .filter(|(_, v)| v.is_some())
            .map(|(n, _)| *n)
            .collect();
        f.debug_struct("CoefficientField").field("present", &present).finish()
    }
}

fn constant<T: Scalar>(v: T) -> CoefFn<T> {
    Arc::new(move |_| v)
}

impl<T: Scalar> CoefficientField<T> {
    pub fn zero() -> Self {
        Self {
            a: Default::default(),
            b: Default::default(),
            c: None,
        }
    }

    /// `diffusion · Δ_Γ + shift`.
    pub fn shifted_laplacian(diffusion: T, shift: T) -> Self {
        let mut f = Self::zero();
        for k in 0..3 {
            f.a[k] = Some(constant(diffusion));
        }
        if shift != T::zero() {
            f.c = Some(constant(shift));
        }
        f
    }

    pub fn laplace_beltrami() -> Self {
        Self::shifted_laplacian(T::one(), T::zero())
    }

    /// `Δ_Γ + c` with constant `c`.
    pub fn helmholtz(c: T) -> Self {
        Self::shifted_laplacian(T::one(), c)
    }

    /// Sets `a_ij` (1-based Cartesian indices, `i ≤ j`).
    pub fn with_a(mut self, i: usize, j: usize, f: impl Fn(&Point) -> T + Send + Sync + 'static) -> Self {
        let (i, j) = (i.min(j), i.max(j));
        let k = A_PAIRS
            .iter()
            .position(|&p| p == (i - 1, j - 1))
            .expect("indices in 1..=3");
        self.a[k] = Some(Arc::new(f));
        self
    }

    /// Sets `b_i` (1-based).
    pub fn with_b(mut self, i: usize, f: impl Fn(&Point) -> T + Send + Sync + 'static) -> Self {
        self.b[i - 1] = Some(Arc::new(f));
        self
    }

    pub fn with_c(mut self, f: impl Fn(&Point) -> T + Send + Sync + 'static) -> Self {
        self.c = Some(Arc::new(f));
        self
    }

    /// Samples every coefficient at the element nodes.
    pub fn sample(&self, element: &Element) -> Result<CoefficientSamples<T>> {
        let eval = |name: &'static str, f: &Option<CoefFn<T>>| -> Result<Option<Vec<T>>> {
            let Some(f) = f else { return Ok(None) };
            element
                .nodes
                .iter()
                .enumerate()
                .map(|(k, x)| {
                    let v = f(x);
                    if v.finite() {
                        Ok(v)
                    } else {
                        Err(Error::CoefficientEvaluation {
                            name,
                            element: element.id,
                            node: k,
                            point: *x,
                        })
                    }
                })
                .collect::<Result<Vec<T>>>()
                .map(Some)
        };
        let mut a: [Option<Vec<T>>; 6] = Default::default();
        for k in 0..6 {
            a[k] = eval(A_NAMES[k], &self.a[k])?;
        }
        let mut b: [Option<Vec<T>>; 3] = Default::default();
        for k in 0..3 {
            b[k] = eval(B_NAMES[k], &self.b[k])?;
        }
        let c = eval("c", &self.c)?;
        Ok(CoefficientSamples { a, b, c })
    }
}

impl CoefficientField<f64> {
    /// Lossless promotion to complex coefficients.
    pub fn to_complex(&self) -> CoefficientField<Complex64> {
        let lift = |f: &Option<CoefFn<f64>>| -> Option<CoefFn<Complex64>> {
            f.clone()
                .map(|f| Arc::new(move |x: &Point| Complex64::new(f(x), 0.0)) as CoefFn<Complex64>)
        };
        CoefficientField {
            a: std::array::from_fn(|k| lift(&self.a[k])),
            b: std::array::from_fn(|k| lift(&self.b[k])),
            c: lift(&self.c),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CoefficientSamples<T> {
    pub a: [Option<Vec<T>>; 6],
    pub b: [Option<Vec<T>>; 3],
    pub c: Option<Vec<T>>,
}

impl<T: Scalar> CoefficientSamples<T> {
    /// True when the zeroth-order term vanishes at every node.
    pub fn c_is_zero(&self) -> bool {
        let scale = self
            .a
            .iter()
            .flatten()
            .flatten()
            .map(|v| v.modulus())
            .fold(1.0, f64::max);
        self.c
            .as_ref()
            .is_none_or(|c| c.iter().all(|v| v.modulus() <= 1e-14 * scale))
    }
}

/// `L = Σ_{i≤j} diag(a_ij) D_i D_j + Σ diag(b_i) D_i + diag(c)`.
pub fn assemble_operator<T: Scalar>(ops: &SurfaceDiffOps, samples: &CoefficientSamples<T>) -> DMatrix<T> {
    let n = ops.dx.nrows();
    let mut l = DMatrix::<T>::zeros(n, n);
    let mut add_scaled = |coef: &[T], m: &DMatrix<f64>| {
        for c in 0..n {
            for r in 0..n {
                let v = m[(r, c)];
                if v != 0.0 {
                    l[(r, c)] += coef[r] * T::from_real(v);
                }
            }
        }
    };
    for (k, &(i, j)) in A_PAIRS.iter().enumerate() {
        if let Some(a) = &samples.a[k] {
            let m = ops.component(i) * ops.component(j);
            add_scaled(a, &m);
        }
    }
    for k in 0..3 {
        if let Some(b) = &samples.b[k] {
            add_scaled(b, ops.component(k));
        }
    }
    if let Some(c) = &samples.c {
        for r in 0..n {
            l[(r, r)] += c[r];
        }
    }
    l
}

/// Everything geometric a leaf needs about one element.
#[derive(Clone, Debug)]
pub struct ElementGeometry {
    pub metric: MetricData,
    pub ops: SurfaceDiffOps,
    pub d_binormal: DMatrix<f64>,
    /// Arc-length Jacobian on each side's edge grid.
    pub edge_jacobian: [Vec<f64>; 4],
    /// Physical points of each side's edge grid.
    pub edge_points: [Vec<Point>; 4],
}

impl ElementGeometry {
    /// Quadrature weights on the corner-free boundary grid (arc length).
    pub fn edge_quadrature(&self, reference: &ReferenceElement) -> Vec<f64> {
        self.edge_jacobian
            .iter()
            .flat_map(|jac| jac.iter().zip(&reference.edge_weights).map(|(j, w)| j * w))
            .collect()
    }
}

pub fn element_geometry(reference: &ReferenceElement, element: &Element) -> Result<ElementGeometry> {
    let metric = compute_metric(element, &reference.grid)?;
    let ops = surface_diff_matrices(reference, &metric);
    let d_binormal = binormal_operator(reference, &metric, &ops);
    let interp = |vals: &[f64]| -> Vec<f64> {
        (0..reference.n_edge())
            .map(|r| {
                vals.iter()
                    .enumerate()
                    .map(|(m, v)| reference.to_edge[(r, m)] * v)
                    .sum()
            })
            .collect()
    };
    let edge_jacobian = Side::ALL.map(|side| {
        let speed: Vec<f64> = reference.sides[side as usize]
            .iter()
            .map(|&k| {
                norm(if side.along_xi() {
                    &metric.x_u[k]
                } else {
                    &metric.x_v[k]
                })
            })
            .collect();
        interp(&speed)
    });
    let edge_points = Side::ALL.map(|side| {
        let idx = &reference.sides[side as usize];
        let comps: [Vec<f64>; 3] = std::array::from_fn(|c| {
            let vals: Vec<f64> = idx.iter().map(|&k| element.nodes[k][c]).collect();
            interp(&vals)
        });
        (0..reference.n_edge())
            .map(|r| [comps[0][r], comps[1][r], comps[2][r]])
            .collect()
    });
    Ok(ElementGeometry {
        metric,
        ops,
        d_binormal,
        edge_jacobian,
        edge_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_cubed_sphere;
    use crate::mesh::tests::flat_element;
    use crate::spectral::cheb2_nodes;

    fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
        v.into_iter().map(f64::abs).fold(0.0, f64::max)
    }

    fn samples(e: &Element, f: impl Fn(&Point) -> f64) -> Vec<f64> {
        e.nodes.iter().map(f).collect()
    }

    fn geometry(e: &Element) -> (ReferenceElement, ElementGeometry) {
        let r = ReferenceElement::new(e.order).unwrap();
        let g = element_geometry(&r, e).unwrap();
        (r, g)
    }

    #[test]
    fn flat_metric() {
        let e = flat_element(0, 5, -1.0, 1.0, -1.0, 1.0);
        let (_, g) = geometry(&e);
        for k in 0..e.nodes.len() {
            let m = &g.metric;
            assert!(max_abs(m.g[k].iter().zip([1.0, 0.0, 1.0]).map(|(a, b)| a - b)) < 1e-12);
            assert!(max_abs(m.xi_x[k].iter().zip([1.0, 0.0, 0.0]).map(|(a, b)| a - b)) < 1e-12);
            assert!(max_abs(m.eta_x[k].iter().zip([0.0, 1.0, 0.0]).map(|(a, b)| a - b)) < 1e-12);
            assert!((m.normal[k][2] - 1.0).abs() < 1e-12);
        }
        let e = flat_element(0, 5, -2.0, 2.0, -2.0, 2.0);
        let (_, g) = geometry(&e);
        assert!((g.metric.g[7][0] - 4.0).abs() < 1e-12);
        assert!((g.metric.xi_x[7][0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sphere_jacobian_matches_projection() {
        use std::f64::consts::FRAC_PI_4;
        for n_ref in 1..3 {
            let m = generate_cubed_sphere(n_ref, 16).unwrap();
            let r = ReferenceElement::new(16).unwrap();
            let half = 1.0 / (1u32 << n_ref) as f64;
            for e in m.elements().iter().step_by(5) {
                let md = compute_metric(e, &r.grid).unwrap();
                for (k, x) in e.nodes.iter().enumerate() {
                    // x = y/|y| with y on the cube face, y_a = tan(π s_a/4)
                    let mut a: Vec<f64> = x.iter().map(|c| c.abs()).collect();
                    a.sort_by(f64::total_cmp);
                    let depth = a[2];
                    let (s, t) = (a[0] / depth, a[1] / depth);
                    let exact = half * half * FRAC_PI_4 * FRAC_PI_4 * (1.0 + s * s) * (1.0 + t * t) * depth.powi(3);
                    let got = md.det_g[k].sqrt();
                    assert!((got - exact).abs() < 1e-11 * exact, "{got} vs {exact}");
                    let xu = md.x_u[k];
                    let xv = md.x_v[k];
                    assert!((dot(&md.xi_x[k], &xu) - 1.0).abs() < 1e-10);
                    assert!(dot(&md.xi_x[k], &xv).abs() < 1e-10);
                    assert!((dot(&md.eta_x[k], &xv) - 1.0).abs() < 1e-10);
                    assert!(dot(&md.eta_x[k], &xu).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn degenerate_element_rejected() {
        let mut e = flat_element(3, 4, 0.0, 1.0, 0.0, 1.0);
        for x in e.nodes.iter_mut() {
            x[1] = 0.0;
        }
        let r = ReferenceElement::new(4).unwrap();
        assert!(matches!(
            compute_metric(&e, &r.grid),
            Err(Error::DegenerateElement { element: 3, .. })
        ));
    }

    #[test]
    fn flat_derivatives() {
        let e = flat_element(0, 6, -0.5, 1.0, 0.2, 0.9);
        let (_, g) = geometry(&e);
        let x = samples(&e, |p| p[0]);
        let [gx, gy, gz] = g.ops.gradient(&x);
        assert!(max_abs(gx.iter().map(|v| v - 1.0)) < 1e-12);
        assert!(max_abs(gy) < 1e-12);
        assert!(max_abs(gz) < 1e-12);
        let ones = vec![1.0; x.len()];
        for c in 0..3 {
            assert!(max_abs(apply_real(g.ops.component(c), &ones)) < 1e-10);
        }
    }

    #[test]
    fn sphere_tangential_gradient() {
        let m = generate_cubed_sphere(0, 16).unwrap();
        let e = m.element(2);
        let (_, g) = geometry(e);
        let z = samples(e, |p| p[2]);
        let dz = apply_real(&g.ops.dz, &z);
        let err = max_abs(dz.iter().zip(&e.nodes).map(|(d, p)| d - (1.0 - p[2] * p[2])));
        assert!(err < 1e-8, "{err}");
        // trace of the tangential projector
        let tr: Vec<f64> = (0..e.nodes.len())
            .map(|k| {
                (0..3)
                    .map(|c| {
                        let xc = samples(e, |p| p[c]);
                        apply_real(g.ops.component(c), &xc)[k]
                    })
                    .sum()
            })
            .collect();
        assert!(max_abs(tr.iter().map(|t| t - 2.0)) < 1e-8);
    }

    #[test]
    fn identity_and_flat_laplacian() {
        let e = flat_element(0, 6, -1.0, 0.5, -0.3, 0.7);
        let (_, g) = geometry(&e);
        let s = CoefficientField::<f64>::zero().with_c(|_| 1.0).sample(&e).unwrap();
        let l = assemble_operator(&g.ops, &s);
        assert!((l - DMatrix::identity(49, 49)).amax() < 1e-15);

        let s = CoefficientField::<f64>::laplace_beltrami().sample(&e).unwrap();
        let l = assemble_operator(&g.ops, &s);
        let u = samples(&e, |p| p[0] * p[0] + p[1] * p[1]);
        let lu = &l * nalgebra::DVector::from_vec(u);
        assert!(lu.iter().all(|v| (v - 4.0).abs() < 1e-9));
        let lb = &g.ops.dx * &g.ops.dx + &g.ops.dy * &g.ops.dy + &g.ops.dz * &g.ops.dz;
        assert!((l - &lb).amax() < 1e-12 * lb.amax());
    }

    #[test]
    fn sphere_harmonic_eigenvalue() {
        let m = generate_cubed_sphere(1, 16).unwrap();
        let lb = CoefficientField::<f64>::laplace_beltrami();
        let y42 = |p: &Point| (7.0 * p[2] * p[2] - 1.0) * (p[0] * p[0] - p[1] * p[1]);
        for e in m.elements() {
            let (_, g) = geometry(e);
            let l = assemble_operator(&g.ops, &lb.sample(e).unwrap());
            let u = samples(e, y42);
            let lu = &l * nalgebra::DVector::from_vec(u.clone());
            let err = max_abs(lu.iter().zip(&u).map(|(a, b)| a + 20.0 * b));
            assert!(err < 1e-7, "element {}: {err}", e.id);
        }
    }

    #[test]
    fn nonfinite_coefficient_names_node() {
        let e = flat_element(4, 3, 0.0, 1.0, 0.0, 1.0);
        let f = CoefficientField::<f64>::laplace_beltrami().with_c(|p| if p[0] > 0.99 { f64::NAN } else { 0.0 });
        match f.sample(&e) {
            Err(Error::CoefficientEvaluation {
                name, element, point, ..
            }) => {
                assert_eq!((name, element), ("c", 4));
                assert!(point[0] > 0.99);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn flat_binormal_flux() {
        let e = flat_element(0, 7, 0.0, 1.0, 0.0, 1.0);
        let (r, g) = geometry(&e);
        let x = samples(&e, |p| p[0]);
        let flux = apply_real(&g.d_binormal, &x);
        for v in &flux[r.edge_range(Side::East)] {
            assert!((v - 1.0).abs() < 1e-12);
        }
        for v in &flux[r.edge_range(Side::West)] {
            assert!((v + 1.0).abs() < 1e-12);
        }
        for v in flux[r.edge_range(Side::South)]
            .iter()
            .chain(&flux[r.edge_range(Side::North)])
        {
            assert!(v.abs() < 1e-12);
        }
        let ones = vec![1.0; x.len()];
        assert!(max_abs(apply_real(&g.d_binormal, &ones)) < 1e-10);
    }

    #[test]
    fn binormal_flux_balances_across_interfaces() {
        let m = generate_cubed_sphere(1, 12).unwrap();
        let r = ReferenceElement::new(12).unwrap();
        let f = |p: &Point| (p[0] + 2.0 * p[1] * p[2]).exp();
        let geo: Vec<_> = m.elements().iter().map(|e| element_geometry(&r, e).unwrap()).collect();
        let flux: Vec<Vec<f64>> = m
            .elements()
            .iter()
            .zip(&geo)
            .map(|(e, g)| apply_real(&g.d_binormal, &samples(e, f)))
            .collect();
        let ne = r.n_edge();
        for (a, b) in m.interfaces() {
            let fa = &flux[a.element][r.edge_range(a.side)];
            let fb = &flux[b.element][r.edge_range(b.side)];
            for k in 0..ne {
                let kb = if a.reversed != b.reversed { ne - 1 - k } else { k };
                assert!((fa[k] + fb[kb]).abs() < 1e-6, "{} {}", fa[k], fb[kb]);
            }
        }
    }

    #[test]
    fn rigid_motion_invariance() {
        let m = generate_cubed_sphere(1, 8).unwrap();
        let e = m.element(5);
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let q = |p: &Point| [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]];
        let rot = Element::new(e.id, e.order, e.nodes.iter().map(q).collect()).unwrap();
        let lb = CoefficientField::<f64>::laplace_beltrami();
        let (_, g0) = geometry(e);
        let (_, g1) = geometry(&rot);
        let l0 = assemble_operator(&g0.ops, &lb.sample(e).unwrap());
        let l1 = assemble_operator(&g1.ops, &lb.sample(&rot).unwrap());
        let f = |p: &Point| (p[0] * p[2]).sin() + p[1];
        let u0 = nalgebra::DVector::from_vec(samples(e, f));
        let u1 = u0.clone();
        assert!((l0 * u0 - l1 * u1).amax() < 1e-10);
    }

    #[test]
    fn extension_reproduces_low_degree_traces() {
        let p = 6;
        let r = ReferenceElement::new(p).unwrap();
        let g = cheb2_nodes(p).unwrap();
        let f = |xi: f64, eta: f64| 1.0 + xi - 0.5 * eta + xi * eta;
        let full: Vec<f64> = (0..r.len())
            .map(|k| {
                let (xi, eta) = r.grid.point(k);
                f(xi, eta)
            })
            .collect();
        let trace = r.boundary_trace(&full);
        let ext = &r.extension * nalgebra::DVector::from_vec(trace);
        for side in &r.sides {
            for &k in side {
                assert!((ext[k] - full[k]).abs() < 1e-12);
            }
        }
        assert_eq!(g.len(), p + 1);
        assert_eq!(r.interior.len(), (p - 1) * (p - 1));
    }

    #[test]
    fn complex_promotion() {
        let e = flat_element(0, 4, 0.0, 1.0, 0.0, 1.0);
        let (_, g) = geometry(&e);
        let f = CoefficientField::<f64>::helmholtz(-2.0);
        let lr = assemble_operator(&g.ops, &f.sample(&e).unwrap());
        let lc = assemble_operator(&g.ops, &f.to_complex().sample(&e).unwrap());
        assert!((lc.map(|v| v.re) - lr).amax() < 1e-15);
        assert!(lc.map(|v| v.im).amax() == 0.0);
    }
}
