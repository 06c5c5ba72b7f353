//! Shared fixtures: a monolithic dense collocation solve of the same
//! element discretization, and a few meshes and fields.

#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use surfhps::hierarchy::leaf_keys;
use surfhps::mesh::{build_connectivity, Element, Point, SurfaceMesh};
use surfhps::spectral::cheb2_nodes;
use surfhps::surface_ops::{assemble_operator, element_geometry, CoefficientField, ReferenceElement};

/// Axis-aligned flat element on `[x0,x1] × [y0,y1]` in the plane z = 0.
pub fn flat_element(id: usize, p: usize, x0: f64, x1: f64, y0: f64, y1: f64) -> Element {
    let g = cheb2_nodes(p).unwrap().nodes;
    let mut nodes = Vec::with_capacity((p + 1) * (p + 1));
    for xj in &g {
        for yi in &g {
            nodes.push([
                x0 + (xj + 1.0) * 0.5 * (x1 - x0),
                y0 + (yi + 1.0) * 0.5 * (y1 - y0),
                0.0,
            ]);
        }
    }
    Element::new(id, p, nodes).unwrap()
}

pub fn flat_pair(p: usize) -> SurfaceMesh {
    build_connectivity(
        vec![
            flat_element(0, p, 0.0, 0.5, 0.0, 1.0),
            flat_element(1, p, 0.5, 1.0, 0.0, 1.0),
        ],
        None,
    )
    .unwrap()
}

pub fn flat_grid(p: usize, n: usize) -> SurfaceMesh {
    let h = 1.0 / n as f64;
    let mut els = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let (x0, y0) = (a as f64 * h, b as f64 * h);
            els.push(flat_element(els.len(), p, x0, x0 + h, y0, y0 + h));
        }
    }
    build_connectivity(els, None).unwrap()
}

pub fn sample(mesh: &SurfaceMesh, f: impl Fn(&Point) -> f64) -> Vec<Vec<f64>> {
    mesh.elements()
        .iter()
        .map(|e| e.nodes.iter().map(&f).collect())
        .collect()
}

pub fn max_abs(u: &[Vec<f64>]) -> f64 {
    u.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn max_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Subtracts the plain nodal average; used to compare solutions that are
/// unique only up to constants.
pub fn remove_mean(u: &mut [Vec<f64>]) {
    let n: usize = u.iter().map(Vec::len).sum();
    let mean = u.iter().flatten().sum::<f64>() / n as f64;
    u.iter_mut().flatten().for_each(|v| *v -= mean);
}

/// Random smooth elliptic coefficients: `a = I + small symmetric`, small
/// `b`, and `c` bounded away from zero.
pub fn random_smooth_field(seed: u64) -> CoefficientField<f64> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    let mut wave = |amp: f64| {
        let (k0, k1, k2, ph) = (next(), next(), next(), 3.0 * next());
        move |x: &Point| amp * (k0 * x[0] + k1 * x[1] + k2 * x[2] + ph).sin()
    };
    let (a11, a22, a33, a12, a23, a13) = (wave(0.2), wave(0.2), wave(0.2), wave(0.1), wave(0.1), wave(0.1));
    let (b1, b2, b3, c) = (wave(0.3), wave(0.3), wave(0.3), wave(0.3));
    CoefficientField::zero()
        .with_a(1, 1, move |x| 1.0 + a11(x))
        .with_a(2, 2, move |x| 1.0 + a22(x))
        .with_a(3, 3, move |x| 1.0 + a33(x))
        .with_a(1, 2, a12)
        .with_a(2, 3, a23)
        .with_a(1, 3, a13)
        .with_b(1, b1)
        .with_b(2, b2)
        .with_b(3, b3)
        .with_c(move |x| -1.0 + c(x))
}

/// The global collocation system of a mesh: interior unknowns of every
/// element, then the edge-grid values of every skeleton edge.
pub struct DenseSystem {
    p: usize,
    reference: ReferenceElement,
    a: DMatrix<f64>,
    keys: Vec<Vec<(usize, usize)>>,
    /// Dirichlet data location for exterior keys.
    dirichlet: BTreeMap<usize, Point>,
    n_interior: usize,
    /// Left null vector of the closed, zeroth-order-free operator.
    left_null: Option<DVector<f64>>,
}

impl DenseSystem {
    pub fn assemble(mesh: &SurfaceMesh, coeff: &CoefficientField<f64>) -> Self {
        let p = mesh.order();
        let r = ReferenceElement::new(p).unwrap();
        let ne = p - 1;
        let ni = r.interior.len();
        let n_int = mesh.len() * ni;
        let n_edges = mesh.interfaces().len() + mesh.boundary_edges().len();
        let n = n_int + n_edges * ne;
        let mut a = DMatrix::zeros(n, n);
        let mut keys = Vec::with_capacity(mesh.len());
        let mut dirichlet = BTreeMap::new();
        let mut c_zero = true;
        let exterior = |edge: usize| edge >= mesh.interfaces().len();
        for (k, e) in mesh.elements().iter().enumerate() {
            let geom = element_geometry(&r, e).unwrap();
            let samples = coeff.sample(e).unwrap();
            c_zero &= samples.c_is_zero();
            let l = assemble_operator(&geom.ops, &samples);
            let l_ext = &l * &r.extension;
            let d_ext = &geom.d_binormal * &r.extension;
            let kk = leaf_keys(mesh, k);
            let col = |key: (usize, usize)| n_int + key.0 * ne + key.1;
            for (row, &node) in r.interior.iter().enumerate() {
                let gr = k * ni + row;
                for (c, &m) in r.interior.iter().enumerate() {
                    a[(gr, k * ni + c)] += l[(node, m)];
                }
                for (j, &key) in kk.iter().enumerate() {
                    a[(gr, col(key))] += l_ext[(node, j)];
                }
            }
            for (jr, &key) in kk.iter().enumerate() {
                let gr = col(key);
                if exterior(key.0) {
                    let side = jr / ne;
                    dirichlet.insert(gr, geom.edge_points[side][jr % ne]);
                    continue;
                }
                for (c, &m) in r.interior.iter().enumerate() {
                    a[(gr, k * ni + c)] += geom.d_binormal[(jr, m)];
                }
                for (j, &kc) in kk.iter().enumerate() {
                    a[(gr, col(kc))] += d_ext[(jr, j)];
                }
            }
            keys.push(kk);
        }
        for &row in dirichlet.keys() {
            a[(row, row)] = 1.0;
        }
        let left_null = (mesh.closed() && c_zero).then(|| {
            let svd = a.clone().svd(true, false);
            let (imin, _) = svd.singular_values.argmin();
            svd.u.unwrap().column(imin).into_owned()
        });
        Self {
            p,
            reference: r,
            a,
            keys,
            dirichlet,
            n_interior: n_int,
            left_null,
        }
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn rhs(&self, f: &[Vec<f64>], g: &impl Fn(&Point) -> f64) -> DVector<f64> {
        let ni = self.reference.interior.len();
        let mut b = DVector::zeros(self.dim());
        for (k, fk) in f.iter().enumerate() {
            for (r, &node) in self.reference.interior.iter().enumerate() {
                b[k * ni + r] = fk[node];
            }
        }
        for (&row, x) in &self.dirichlet {
            b[row] = g(x);
        }
        b
    }

    /// Removes from `f` its component that makes a singular system
    /// inconsistent. Identity for nonsingular systems.
    pub fn compatible_load(&self, f: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut f = f.to_vec();
        let Some(z) = &self.left_null else { return f };
        let ni = self.reference.interior.len();
        let (mut zf, mut zz) = (0.0, 0.0);
        for (k, fk) in f.iter().enumerate() {
            for (r, &node) in self.reference.interior.iter().enumerate() {
                zf += z[k * ni + r] * fk[node];
                zz += z[k * ni + r] * z[k * ni + r];
            }
        }
        for (k, fk) in f.iter_mut().enumerate() {
            for (r, &node) in self.reference.interior.iter().enumerate() {
                fk[node] -= z[k * ni + r] * zf / zz;
            }
        }
        f
    }

    /// Nodal solution for load `f` and Dirichlet data `g`. Singular systems
    /// need a compatible load; the returned solution is then one member of
    /// the family differing by constants.
    pub fn solve(&self, f: &[Vec<f64>], g: impl Fn(&Point) -> f64) -> Vec<Vec<f64>> {
        let b = self.rhs(f, &g);
        // Bordering with the left null vector keeps the system regular and
        // forces the multiplier to zero for a compatible load.
        let x = if let Some(z) = &self.left_null {
            let n = self.dim();
            let mut bordered = DMatrix::zeros(n + 1, n + 1);
            bordered.view_mut((0, 0), (n, n)).copy_from(&self.a);
            for i in 0..n {
                bordered[(i, n)] = z[i];
                bordered[(n, i)] = 1.0;
            }
            let mut bb = DVector::zeros(n + 1);
            bb.rows_mut(0, n).copy_from(&b);
            bordered
                .lu()
                .solve(&bb)
                .expect("bordered system")
                .rows(0, n)
                .into_owned()
        } else {
            self.a.clone().lu().solve(&b).expect("nonsingular system")
        };
        let ni = self.reference.interior.len();
        let ne = self.p - 1;
        self.keys
            .iter()
            .enumerate()
            .map(|(k, kk)| {
                let g_loc = DVector::from_iterator(kk.len(), kk.iter().map(|&(e, m)| x[self.n_interior + e * ne + m]));
                let mut u: Vec<f64> = (&self.reference.extension * g_loc).iter().copied().collect();
                for (r, &node) in self.reference.interior.iter().enumerate() {
                    u[node] = x[k * ni + r];
                }
                u
            })
            .collect()
    }
}
