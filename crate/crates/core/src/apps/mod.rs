//! Application layer: mean-zero Laplace–Beltrami solves, Hodge
//! decomposition and IMEX-BDF reaction–diffusion.

pub mod harmonics;
pub mod hodge;
pub mod imex;
pub mod models;

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hierarchy::Factorization;
use crate::mesh::{Point, SurfaceMesh};
use crate::scalar::Scalar;
use crate::solver::{solve, Solution};
use crate::spectral::cc_weights;
use crate::surface_ops::{compute_metric, surface_diff_matrices, CoefficientField, ReferenceElement, SurfaceDiffOps};

/// Per-element samples of a scalar field.
pub type NodalField<T> = Vec<Vec<T>>;

pub(crate) fn check_shape<T>(mesh: &SurfaceMesh, f: &[Vec<T>], what: &'static str) -> Result<()> {
    let n1 = (mesh.order() + 1).pow(2);
    if f.len() != mesh.len() {
        return Err(Error::Shape {
            what,
            expected: mesh.len(),
            got: f.len(),
        });
    }
    match f.iter().find(|v| v.len() != n1) {
        Some(v) => Err(Error::Shape {
            what,
            expected: n1,
            got: v.len(),
        }),
        None => Ok(()),
    }
}

/// Clenshaw–Curtis tensor weights times `√det g` at every node.
pub fn node_weights(mesh: &SurfaceMesh) -> Result<NodalField<f64>> {
    let reference = ReferenceElement::new(mesh.order())?;
    let w1 = cc_weights(mesh.order())?;
    let n1 = w1.len();
    mesh.elements()
        .par_iter()
        .map(|e| {
            let jac = compute_metric(e, &reference.grid)?.jacobian();
            Ok((0..n1 * n1).map(|k| w1[k / n1] * w1[k % n1] * jac[k]).collect())
        })
        .collect()
}

pub fn integrate<T: Scalar>(weights: &[Vec<f64>], f: &[Vec<T>]) -> T {
    let mut total = T::zero();
    for (w, v) in weights.iter().zip(f) {
        for (wk, vk) in w.iter().zip(v) {
            total += vk.scale(*wk);
        }
    }
    total
}

/// Surface `L²` norm.
pub fn l2_norm<T: Scalar>(weights: &[Vec<f64>], f: &[Vec<T>]) -> f64 {
    let mut total = 0.0;
    for (w, v) in weights.iter().zip(f) {
        for (wk, vk) in w.iter().zip(v) {
            total += wk * vk.modulus_squared();
        }
    }
    total.sqrt()
}

/// Subtracts the area-weighted mean; returns the mean removed.
pub fn project_mean_zero<T: Scalar>(weights: &[Vec<f64>], f: &mut [Vec<T>]) -> T {
    let area: f64 = weights.iter().flatten().sum();
    let mean = integrate(weights, f).unscale(area);
    f.iter_mut().flatten().for_each(|v| *v -= mean);
    mean
}

/// Tangential derivative matrices and unit normals for every element.
pub struct SurfaceCalculus {
    mesh: Arc<SurfaceMesh>,
    ops: Vec<SurfaceDiffOps>,
    normals: Vec<Vec<Point>>,
    weights: NodalField<f64>,
}

impl SurfaceCalculus {
    pub fn new(mesh: &SurfaceMesh) -> Result<Self> {
        let reference = ReferenceElement::new(mesh.order())?;
        let w1 = cc_weights(mesh.order())?;
        let n1 = w1.len();
        let parts = mesh
            .elements()
            .par_iter()
            .map(|e| {
                let metric = compute_metric(e, &reference.grid)?;
                let jac = metric.jacobian();
                let w = (0..n1 * n1)
                    .map(|k| w1[k / n1] * w1[k % n1] * jac[k])
                    .collect::<Vec<_>>();
                Ok((surface_diff_matrices(&reference, &metric), metric.normal, w))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut ops = Vec::with_capacity(parts.len());
        let mut normals = Vec::with_capacity(parts.len());
        let mut weights = Vec::with_capacity(parts.len());
        for (o, n, w) in parts {
            ops.push(o);
            normals.push(n);
            weights.push(w);
        }
        Ok(Self {
            mesh: Arc::new(mesh.clone()),
            ops,
            normals,
            weights,
        })
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        &self.mesh
    }

    pub fn ops(&self, k: usize) -> &SurfaceDiffOps {
        &self.ops[k]
    }

    pub fn normals(&self) -> &[Vec<Point>] {
        &self.normals
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn sample<T>(&self, f: impl Fn(&Point) -> T + Sync) -> NodalField<T>
    where
        T: Send,
    {
        self.mesh
            .elements()
            .par_iter()
            .map(|e| e.nodes.iter().map(&f).collect())
            .collect()
    }

    /// `Σ_c D_c D_c u` per element, the pointwise Laplace–Beltrami operator.
    pub fn laplacian(&self, u: &[Vec<f64>]) -> Result<NodalField<f64>> {
        check_shape(&self.mesh, u, "scalar field")?;
        Ok(self
            .ops
            .par_iter()
            .zip(u.par_iter())
            .map(|(ops, u)| {
                let g = ops.gradient(u);
                let mut out = vec![0.0; u.len()];
                for (c, gc) in g.iter().enumerate() {
                    let d = ops.component(c) * nalgebra::DVector::from_column_slice(gc);
                    out.iter_mut().zip(d.iter()).for_each(|(o, v)| *o += v);
                }
                out
            })
            .collect())
    }
}

/// Laplace–Beltrami solver on a closed surface with mean-zero projection of
/// both the load and the solution. The factorization is reused across
/// right-hand sides.
pub struct LaplaceBeltrami {
    fact: Factorization<f64>,
    weights: NodalField<f64>,
}

impl LaplaceBeltrami {
    pub fn new(mesh: &SurfaceMesh) -> Result<Self> {
        if !mesh.closed() {
            return Err(Error::RequiresBoundaryData);
        }
        let fact = Factorization::new(mesh, &CoefficientField::laplace_beltrami())?;
        Ok(Self {
            fact,
            weights: node_weights(mesh)?,
        })
    }

    pub fn factorization(&self) -> &Factorization<f64> {
        &self.fact
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    /// Solves `Δ_Γ u = f − mean(f)` for the mean-zero `u`.
    pub fn solve(&mut self, f: &[Vec<f64>]) -> Result<Solution<f64>> {
        check_shape(self.fact.mesh(), f, "load")?;
        let mut f = f.to_vec();
        project_mean_zero(&self.weights, &mut f);
        self.fact.update_rhs(&f)?;
        let mut sol = solve(&self.fact, &[])?;
        project_mean_zero(&self.weights, &mut sol.values);
        Ok(sol)
    }
}

pub fn solve_laplace_beltrami(mesh: &SurfaceMesh, f: &[Vec<f64>]) -> Result<Solution<f64>> {
    LaplaceBeltrami::new(mesh)?.solve(f)
}
