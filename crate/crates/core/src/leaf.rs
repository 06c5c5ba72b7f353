//! Single-element solution operators and Dirichlet-to-Neumann maps.
//!
//! Boundary data lives on the corner-free grid: `p−1` first-kind nodes per
//! side, sides ordered south, east, north, west.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{promote, select_rows, submatrix, LuFactor};
use crate::mesh::Element;
use crate::scalar::Scalar;
use crate::surface_ops::{apply_real, assemble_operator, CoefficientSamples, ElementGeometry, ReferenceElement};

/// Relative pivot floor for the interior block.
pub const SINGULAR_PIVOT_TOL: f64 = 1e-14;

/// Interior and boundary index sets of the tensor grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSets {
    pub interior: Vec<usize>,
    /// Second-kind side nodes, south, east, north, west.
    pub boundary: Vec<usize>,
}

impl IndexSets {
    pub fn new(reference: &ReferenceElement) -> Self {
        let mut boundary = Vec::with_capacity(4 * (reference.order + 1));
        for side in &reference.sides {
            boundary.extend_from_slice(side);
        }
        Self {
            interior: reference.interior.clone(),
            boundary,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LeafOperators<T: Scalar> {
    pub element: usize,
    /// `(p+1)² × 4(p−1)` solution operator.
    pub s: DMatrix<T>,
    /// `4(p−1) × 4(p−1)` Dirichlet-to-Neumann map.
    pub sigma: DMatrix<T>,
    /// Factored interior block `L^{ii}`.
    pub interior: LuFactor<T>,
    /// Outward flux map from nodal samples to the boundary grid.
    pub d_binormal: DMatrix<f64>,
    pub v: Vec<T>,
    pub v_flux: Vec<T>,
    /// Arc-length quadrature weights on the boundary grid.
    pub edge_quadrature: Vec<f64>,
}

impl<T: Scalar> LeafOperators<T> {
    pub fn n_boundary(&self) -> usize {
        self.sigma.nrows()
    }

    /// `S·g + v`.
    pub fn apply(&self, g: &[T]) -> Vec<T> {
        let mut u = self.v.clone();
        for (c, &gc) in g.iter().enumerate() {
            for (r, ur) in u.iter_mut().enumerate() {
                *ur += self.s[(r, c)] * gc;
            }
        }
        u
    }

    /// Replaces the particular solution and flux for load samples `f`.
    pub fn set_load(&mut self, reference: &ReferenceElement, f: &[T]) {
        let (v, v_flux) = leaf_particular(self, reference, f);
        self.v = v;
        self.v_flux = v_flux;
    }

    pub fn memory_bytes(&self) -> usize {
        let t = std::mem::size_of::<T>();
        let n = self.s.nrows();
        let nb = self.sigma.nrows();
        let ni = self.interior.dim();
        t * (n * nb + nb * nb + ni * ni + n + nb) + 8 * (nb * n + nb + ni)
    }
}

pub fn factor_leaf<T: Scalar>(
    reference: &ReferenceElement,
    element: &Element,
    geometry: &ElementGeometry,
    samples: &CoefficientSamples<T>,
) -> Result<LeafOperators<T>> {
    let l = assemble_operator(&geometry.ops, samples);
    let ii = &reference.interior;
    let all: Vec<usize> = (0..reference.len()).collect();
    let l_ii = submatrix(&l, ii, ii);
    let ext = promote::<T>(&reference.extension);
    let l_ib = select_rows(&l, ii) * &ext;
    let lu = LuFactor::new(l_ii);
    let pivot = lu.min_pivot();
    if !(pivot > SINGULAR_PIVOT_TOL * lu.norm1()) {
        return Err(Error::SingularLeaf {
            element: element.id,
            pivot,
        });
    }
    let mut x = l_ib;
    lu.solve_in_place(&mut x);
    let mut s = ext;
    for (r, &k) in ii.iter().enumerate() {
        for c in 0..s.ncols() {
            s[(k, c)] = -x[(r, c)];
        }
    }
    let sigma = promote::<T>(&geometry.d_binormal) * &s;
    debug_assert_eq!(all.len(), s.nrows());
    let nb = reference.n_boundary();
    Ok(LeafOperators {
        element: element.id,
        s,
        sigma,
        interior: lu,
        d_binormal: geometry.d_binormal.clone(),
        v: vec![T::zero(); reference.len()],
        v_flux: vec![T::zero(); nb],
        edge_quadrature: geometry.edge_quadrature(reference),
    })
}

/// Particular solution with zero boundary values and its outward flux.
pub fn leaf_particular<T: Scalar>(ops: &LeafOperators<T>, reference: &ReferenceElement, f: &[T]) -> (Vec<T>, Vec<T>) {
    let fi: Vec<T> = reference.interior.iter().map(|&k| f[k]).collect();
    let vi = ops.interior.solve_vec(&fi);
    let mut v = vec![T::zero(); reference.len()];
    for (&k, val) in reference.interior.iter().zip(vi) {
        v[k] = val;
    }
    let v_flux = apply_real(&ops.d_binormal, &v);
    (v, v_flux)
}
