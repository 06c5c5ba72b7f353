//! Downward pass and solution handling.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hierarchy::Factorization;
use crate::linalg::matvec;
use crate::mesh::{Point, SurfaceMesh};
use crate::scalar::{Scalar, ScalarKind};
use crate::spectral::{eval_tensor, Grid1D};

/// Nodal values on every element.
#[derive(Clone, Debug)]
pub struct Solution<T: Scalar> {
    mesh: Arc<SurfaceMesh>,
    grid: Grid1D,
    pub values: Vec<Vec<T>>,
}

impl<T: Scalar> Solution<T> {
    pub fn new(mesh: Arc<SurfaceMesh>, values: Vec<Vec<T>>) -> Result<Self> {
        let grid = crate::spectral::cheb2_nodes(mesh.order())?;
        let n1 = grid.len() * grid.len();
        if values.len() != mesh.len() {
            return Err(Error::Shape {
                what: "solution element count",
                expected: mesh.len(),
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| v.len() != n1) {
            return Err(Error::Shape {
                what: "solution samples per element",
                expected: n1,
                got: v.len(),
            });
        }
        Ok(Self { mesh, grid, values })
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        &self.mesh
    }

    pub fn order(&self) -> usize {
        self.grid.order
    }

    pub fn element(&self, k: usize) -> &[T] {
        &self.values[k]
    }

    /// Barycentric interpolation inside element `k`.
    pub fn evaluate(&self, k: usize, xi: f64, eta: f64) -> Result<T> {
        if !(xi.abs() <= 1.0 && eta.abs() <= 1.0) {
            return Err(Error::Domain { xi, eta });
        }
        if k >= self.values.len() {
            return Err(Error::Shape {
                what: "element index",
                expected: self.values.len(),
                got: k,
            });
        }
        Ok(eval_tensor(&self.grid, &self.values[k], xi, eta))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().map(|v| v.modulus()).fold(0.0, f64::max)
    }

    /// Largest mismatch between coincident side nodes of adjacent elements.
    /// Corners are skipped: their values are extrapolated per element from
    /// the corner-free edge data and need not agree at mesh vertices.
    pub fn interface_jump(&self) -> f64 {
        let p = self.order();
        let mut worst = 0.0f64;
        for (a, b) in self.mesh.interfaces() {
            let ia = a.side.node_indices(p);
            let ib = b.side.node_indices(p);
            for m in 1..p {
                let mb = if a.reversed != b.reversed { p - m } else { m };
                let d = (self.values[a.element][ia[m]] - self.values[b.element][ib[mb]]).modulus();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// `x y z value` per node (`x y z re im` for complex), one block per
    /// element headed by `# element k`.
    pub fn to_point_cloud(&self) -> String {
        let mut out = String::new();
        for (e, vals) in self.mesh.elements().iter().zip(&self.values) {
            let _ = writeln!(out, "# element {}", e.id);
            for (x, v) in e.nodes.iter().zip(vals) {
                let _ = write!(out, "{:?} {:?} {:?} ", x[0], x[1], x[2]);
                match T::KIND {
                    ScalarKind::Real => {
                        let _ = writeln!(out, "{:?}", v.real_part());
                    }
                    ScalarKind::Complex => {
                        let _ = writeln!(out, "{:?} {:?}", v.real_part(), v.imaginary());
                    }
                }
            }
        }
        out
    }

    pub fn write_point_cloud(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_point_cloud()).map_err(|e| Error::io(path, e))
    }
}

/// Samples Dirichlet data at the root boundary nodes.
pub fn boundary_data<T: Scalar>(fact: &Factorization<T>, g: impl Fn(&Point) -> T) -> Vec<T> {
    fact.root_points().iter().map(g).collect()
}

/// Top-down recovery of all element solutions from root boundary data.
pub fn solve<T: Scalar>(fact: &Factorization<T>, g: &[T]) -> Result<Solution<T>> {
    if g.len() != fact.n_root_boundary() {
        return Err(Error::Shape {
            what: "root boundary data",
            expected: fact.n_root_boundary(),
            got: g.len(),
        });
    }
    let tree = fact.tree();
    let n = fact.leaves.len();
    let mut data: Vec<Option<Vec<T>>> = vec![None; tree.num_clusters()];
    data[tree.root()] = Some(g.to_vec());
    for level in tree.levels().iter().rev() {
        let children: Vec<(Vec<T>, Vec<T>)> = level
            .par_iter()
            .map(|&c| {
                let node = &fact.nodes[c - n];
                let gc = data[c].as_ref().expect("parent data");
                let mut u_i = matvec(&node.s_i, gc);
                for (u, v) in u_i.iter_mut().zip(&node.v_i) {
                    *u += *v;
                }
                let nba = node.alpha_b.len();
                let mut ga = vec![T::zero(); nba + node.alpha_s.len()];
                let mut gb = vec![T::zero(); node.beta_b.len() + node.beta_s.len()];
                for (i, &k) in node.alpha_b.iter().enumerate() {
                    ga[k] = gc[i];
                }
                for (i, &k) in node.beta_b.iter().enumerate() {
                    gb[k] = gc[nba + i];
                }
                for (i, (&ka, &kb)) in node.alpha_s.iter().zip(&node.beta_s).enumerate() {
                    ga[ka] = u_i[i];
                    gb[kb] = u_i[i];
                }
                (ga, gb)
            })
            .collect();
        for (&c, (ga, gb)) in level.iter().zip(children) {
            let node = &fact.nodes[c - n];
            data[node.left] = Some(ga);
            data[node.right] = Some(gb);
            data[c] = None;
        }
    }
    let values: Vec<Vec<T>> = fact
        .leaves
        .par_iter()
        .zip(data[..n].par_iter())
        .map(|(leaf, g)| leaf.apply(g.as_ref().expect("leaf data")))
        .collect();
    Solution::new(fact.shared_mesh(), values)
}

/// Solve with homogeneous or absent boundary data.
pub fn solve_homogeneous<T: Scalar>(fact: &Factorization<T>) -> Result<Solution<T>> {
    solve(fact, &vec![T::zero(); fact.n_root_boundary()])
}

/// Per-element boundary traces of a solution on the corner-free grid.
pub fn boundary_traces<T: Scalar>(fact: &Factorization<T>, sol: &Solution<T>) -> Vec<Vec<T>> {
    sol.values.iter().map(|u| fact.reference().boundary_trace(u)).collect()
}

/// Largest flux imbalance over interface nodes: the outward fluxes of the
/// two sides should cancel.
pub fn flux_residual<T: Scalar>(fact: &Factorization<T>, sol: &Solution<T>) -> f64 {
    let r = fact.reference();
    let fluxes: Vec<Vec<T>> = fact
        .leaves()
        .par_iter()
        .zip(&sol.values)
        .map(|(leaf, u)| crate::surface_ops::apply_real(&leaf.d_binormal, u))
        .collect();
    let ne = r.n_edge();
    let mut worst = 0.0f64;
    for (a, b) in fact.mesh().interfaces() {
        let fa = &fluxes[a.element][r.edge_range(a.side)];
        let fb = &fluxes[b.element][r.edge_range(b.side)];
        for k in 0..ne {
            let kb = if a.reversed != b.reversed { ne - 1 - k } else { k };
            worst = worst.max((fa[k] + fb[kb]).modulus());
        }
    }
    worst
}
