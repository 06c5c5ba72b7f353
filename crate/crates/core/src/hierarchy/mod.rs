//! Upward pass: pairwise merges of Dirichlet-to-Neumann maps along a merge
//! tree.
//!
//! Every boundary node of a cluster is identified by a key
//! `(skeleton edge, index along the edge's canonical orientation)`, so the
//! nodes two clusters share are exactly the keys they have in common.

mod cache;

pub use cache::{fingerprint, load_factorization, read_factorization, save_factorization, write_factorization};

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::leaf::{factor_leaf, LeafOperators};
use crate::linalg::{submatrix, LuFactor};
use crate::mesh::{build_merge_tree, MergeTree, Point, Side, SurfaceMesh};
use crate::scalar::Scalar;
use crate::surface_ops::{element_geometry, CoefficientField, ReferenceElement};

/// `(skeleton edge id, canonical node index)`.
pub type BoundaryKey = (usize, usize);

/// Condition estimate above which an interface system counts as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

#[derive(Clone, Debug)]
pub struct MergeNode<T: Scalar> {
    pub id: usize,
    pub left: usize,
    pub right: usize,
    pub level: usize,
    /// Positions in the left child's boundary that stay on the merged boundary.
    pub alpha_b: Vec<usize>,
    /// Positions in the left child's boundary on the shared interface.
    pub alpha_s: Vec<usize>,
    pub beta_b: Vec<usize>,
    /// Right child's positions matching `alpha_s` node for node.
    pub beta_s: Vec<usize>,
    /// Factored `−(Σ_α^{ss} + Σ_β^{ss})`, minus `qqᵀ` when fixed.
    pub interface: LuFactor<T>,
    /// Interface solution operator `|s| × |merged boundary|`.
    pub s_i: DMatrix<T>,
    /// `[Σ_α^{bs}; Σ_β^{bs}]`.
    pub sigma_bs: DMatrix<T>,
    pub v_i: Vec<T>,
    pub v_flux: Vec<T>,
    pub top_level_fix: Option<Vec<f64>>,
    pub condition: f64,
}

impl<T: Scalar> MergeNode<T> {
    pub fn n_shared(&self) -> usize {
        self.alpha_s.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.alpha_b.len() + self.beta_b.len()
    }

    pub fn memory_bytes(&self) -> usize {
        let t = std::mem::size_of::<T>();
        let s = self.n_shared();
        let b = self.n_boundary();
        t * (s * s + 2 * s * b + s + b) + 8 * (2 * s + b + s)
    }
}

/// Boundary state of a cluster while merging.
#[derive(Clone, Debug)]
pub(crate) struct ClusterState<T: Scalar> {
    pub keys: Vec<BoundaryKey>,
    pub weights: Vec<f64>,
    pub sigma: DMatrix<T>,
    pub v_flux: Vec<T>,
}

fn complement(n: usize, taken: &[usize]) -> Vec<usize> {
    let mut mask = vec![false; n];
    for &k in taken {
        mask[k] = true;
    }
    (0..n).filter(|&k| !mask[k]).collect()
}

pub(crate) struct MergeOutput<T: Scalar> {
    pub node: MergeNode<T>,
    pub state: ClusterState<T>,
    pub unfixed: Option<DMatrix<T>>,
}

/// Merges two adjacent clusters. `allow_fix` enables the rank-one fix for a
/// singular interface system.
pub(crate) fn merge_pair<T: Scalar>(
    id: usize,
    level: usize,
    (left, a): (usize, &ClusterState<T>),
    (right, b): (usize, &ClusterState<T>),
    allow_fix: bool,
) -> Result<MergeOutput<T>> {
    let b_index: HashMap<BoundaryKey, usize> = b.keys.iter().enumerate().map(|(k, &key)| (key, k)).collect();
    let mut alpha_s = Vec::new();
    let mut beta_s = Vec::new();
    for (k, key) in a.keys.iter().enumerate() {
        if let Some(&j) = b_index.get(key) {
            alpha_s.push(k);
            beta_s.push(j);
        }
    }
    if alpha_s.is_empty() {
        return Err(Error::Connectivity(format!(
            "clusters {left} and {right} share no boundary nodes"
        )));
    }
    let alpha_b = complement(a.keys.len(), &alpha_s);
    let beta_b = complement(b.keys.len(), &beta_s);
    let (ns, nba, nbb) = (alpha_s.len(), alpha_b.len(), beta_b.len());
    let nb = nba + nbb;

    let m = -(submatrix(&a.sigma, &alpha_s, &alpha_s) + submatrix(&b.sigma, &beta_s, &beta_s));
    let mut rhs = DMatrix::<T>::zeros(ns, nb);
    rhs.view_mut((0, 0), (ns, nba))
        .copy_from(&submatrix(&a.sigma, &alpha_s, &alpha_b));
    rhs.view_mut((0, nba), (ns, nbb))
        .copy_from(&submatrix(&b.sigma, &beta_s, &beta_b));

    let mut lu = LuFactor::new(m.clone());
    let mut condition = lu.condition_estimate();
    let mut fix = None;
    let mut unfixed = None;
    if !(condition <= SINGULAR_CONDITION) {
        if !allow_fix {
            return Err(Error::SingularMerge {
                node: id,
                level,
                condition,
            });
        }
        let w: Vec<f64> = alpha_s.iter().map(|&k| a.weights[k]).collect();
        let len = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let q: Vec<f64> = w.iter().map(|x| x / len).collect();
        let mut fixed = m.clone();
        for c in 0..ns {
            for r in 0..ns {
                fixed[(r, c)] -= T::from_real(q[r] * q[c]);
            }
        }
        lu = LuFactor::new(fixed);
        condition = lu.condition_estimate();
        if !(condition <= SINGULAR_CONDITION) {
            return Err(Error::SingularMerge {
                node: id,
                level,
                condition,
            });
        }
        fix = Some(q);
        unfixed = Some(m);
    }

    let mut s_i = rhs;
    lu.solve_in_place(&mut s_i);

    let mut sigma_bs = DMatrix::<T>::zeros(nb, ns);
    sigma_bs
        .view_mut((0, 0), (nba, ns))
        .copy_from(&submatrix(&a.sigma, &alpha_b, &alpha_s));
    sigma_bs
        .view_mut((nba, 0), (nbb, ns))
        .copy_from(&submatrix(&b.sigma, &beta_b, &beta_s));

    let mut sigma = &sigma_bs * &s_i;
    {
        let aa = submatrix(&a.sigma, &alpha_b, &alpha_b);
        let bb = submatrix(&b.sigma, &beta_b, &beta_b);
        let mut tl = sigma.view_mut((0, 0), (nba, nba));
        tl += aa;
        let mut br = sigma.view_mut((nba, nba), (nbb, nbb));
        br += bb;
    }

    let (v_i, v_flux) = particular_merge(
        &lu,
        &sigma_bs,
        &a.v_flux,
        &b.v_flux,
        (&alpha_s, &alpha_b),
        (&beta_s, &beta_b),
    );

    let keys = alpha_b
        .iter()
        .map(|&k| a.keys[k])
        .chain(beta_b.iter().map(|&k| b.keys[k]))
        .collect();
    let weights = alpha_b
        .iter()
        .map(|&k| a.weights[k])
        .chain(beta_b.iter().map(|&k| b.weights[k]))
        .collect();
    let state = ClusterState {
        keys,
        weights,
        sigma,
        v_flux: v_flux.clone(),
    };
    let node = MergeNode {
        id,
        left,
        right,
        level,
        alpha_b,
        alpha_s,
        beta_b,
        beta_s,
        interface: lu,
        s_i,
        sigma_bs,
        v_i,
        v_flux,
        top_level_fix: fix,
        condition,
    };
    Ok(MergeOutput { node, state, unfixed })
}

fn particular_merge<T: Scalar>(
    lu: &LuFactor<T>,
    sigma_bs: &DMatrix<T>,
    fa: &[T],
    fb: &[T],
    (a_s, a_b): (&[usize], &[usize]),
    (b_s, b_b): (&[usize], &[usize]),
) -> (Vec<T>, Vec<T>) {
    let rhs: Vec<T> = a_s.iter().zip(b_s).map(|(&i, &j)| fa[i] + fb[j]).collect();
    let v_i = lu.solve_vec(&rhs);
    let mut flux: Vec<T> = a_b.iter().map(|&k| fa[k]).chain(b_b.iter().map(|&k| fb[k])).collect();
    for (c, &vc) in v_i.iter().enumerate() {
        for (r, fr) in flux.iter_mut().enumerate() {
            *fr += sigma_bs[(r, c)] * vc;
        }
    }
    (v_i, flux)
}

/// Keys of one element's corner-free boundary grid.
pub fn leaf_keys(mesh: &SurfaceMesh, element: usize) -> Vec<BoundaryKey> {
    let ne = mesh.order() - 1;
    let mut keys = Vec::with_capacity(4 * ne);
    for side in Side::ALL {
        let link = mesh.side_link(element, side);
        for m in 0..ne {
            keys.push((link.edge, if link.reversed { ne - 1 - m } else { m }));
        }
    }
    keys
}

/// The complete hierarchy of solution operators for one mesh and operator.
#[derive(Clone, Debug)]
pub struct Factorization<T: Scalar> {
    pub(crate) mesh: Arc<SurfaceMesh>,
    pub(crate) reference: ReferenceElement,
    pub(crate) tree: MergeTree,
    pub(crate) leaves: Vec<LeafOperators<T>>,
    pub(crate) nodes: Vec<MergeNode<T>>,
    pub(crate) root_sigma: DMatrix<T>,
    pub(crate) root_keys: Vec<BoundaryKey>,
    pub(crate) root_points: Vec<Point>,
    pub(crate) root_weights: Vec<f64>,
    pub(crate) c_zero: bool,
    pub(crate) root_unfixed: Option<DMatrix<T>>,
}

impl<T: Scalar> Factorization<T> {
    /// Factors with an automatically built merge tree.
    pub fn new(mesh: &SurfaceMesh, coeff: &CoefficientField<T>) -> Result<Self> {
        let tree = build_merge_tree(mesh)?;
        build_factorization(mesh, coeff, &tree)
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        &self.mesh
    }

    pub fn shared_mesh(&self) -> Arc<SurfaceMesh> {
        self.mesh.clone()
    }

    pub fn reference(&self) -> &ReferenceElement {
        &self.reference
    }

    pub fn tree(&self) -> &MergeTree {
        &self.tree
    }

    pub fn leaves(&self) -> &[LeafOperators<T>] {
        &self.leaves
    }

    pub fn nodes(&self) -> &[MergeNode<T>] {
        &self.nodes
    }

    pub fn closed(&self) -> bool {
        self.mesh.closed()
    }

    /// True when the zeroth-order coefficient vanished on every element.
    pub fn c_is_zero(&self) -> bool {
        self.c_zero
    }

    pub fn fix_applied(&self) -> bool {
        self.nodes.last().is_some_and(|n| n.top_level_fix.is_some())
    }

    /// Root interface matrix before the rank-one fix, when one was applied.
    pub fn root_unfixed(&self) -> Option<&DMatrix<T>> {
        self.root_unfixed.as_ref()
    }

    /// Size of the root boundary (0 for closed surfaces).
    pub fn n_root_boundary(&self) -> usize {
        self.root_keys.len()
    }

    pub fn root_keys(&self) -> &[BoundaryKey] {
        &self.root_keys
    }

    /// Physical locations of the root boundary nodes.
    pub fn root_points(&self) -> &[Point] {
        &self.root_points
    }

    /// Arc-length quadrature weights of the root boundary nodes.
    pub fn root_weights(&self) -> &[f64] {
        &self.root_weights
    }

    /// Dirichlet-to-Neumann map of the whole mesh.
    pub fn root_sigma(&self) -> &DMatrix<T> {
        &self.root_sigma
    }

    /// Particular flux on the root boundary.
    pub fn root_flux(&self) -> &[T] {
        self.flux_of(self.tree.root())
    }

    pub(crate) fn flux_of(&self, cluster: usize) -> &[T] {
        let n = self.leaves.len();
        if cluster < n {
            &self.leaves[cluster].v_flux
        } else {
            &self.nodes[cluster - n].v_flux
        }
    }

    /// Estimated bytes held by stored operators.
    pub fn memory_bytes(&self) -> usize {
        let t = std::mem::size_of::<T>();
        self.leaves.iter().map(LeafOperators::memory_bytes).sum::<usize>()
            + self.nodes.iter().map(MergeNode::memory_bytes).sum::<usize>()
            + t * self.root_sigma.len()
    }

    /// Recomputes all particular data for per-element load samples.
    pub fn update_rhs(&mut self, f: &[Vec<T>]) -> Result<()> {
        if f.len() != self.leaves.len() {
            return Err(Error::Shape {
                what: "load element count",
                expected: self.leaves.len(),
                got: f.len(),
            });
        }
        let n1 = self.reference.len();
        if let Some(bad) = f.iter().find(|v| v.len() != n1) {
            return Err(Error::Shape {
                what: "load samples per element",
                expected: n1,
                got: bad.len(),
            });
        }
        let reference = &self.reference;
        self.leaves
            .par_iter_mut()
            .zip(f.par_iter())
            .for_each(|(leaf, fk)| leaf.set_load(reference, fk));
        let n = self.leaves.len();
        for level in self.tree.levels() {
            let updates: Vec<(Vec<T>, Vec<T>)> = level
                .par_iter()
                .map(|&c| {
                    let node = &self.nodes[c - n];
                    particular_merge(
                        &node.interface,
                        &node.sigma_bs,
                        self.flux_of(node.left),
                        self.flux_of(node.right),
                        (&node.alpha_s, &node.alpha_b),
                        (&node.beta_s, &node.beta_b),
                    )
                })
                .collect();
            for (&c, (v_i, v_flux)) in level.iter().zip(updates) {
                let node = &mut self.nodes[c - n];
                node.v_i = v_i;
                node.v_flux = v_flux;
            }
        }
        Ok(())
    }

    /// Samples a load function at every node and updates the particular data.
    pub fn update_rhs_fn(&mut self, f: impl Fn(&Point) -> T + Sync) -> Result<()> {
        let loads = sample_nodes(&self.mesh, f);
        self.update_rhs(&loads)
    }
}

/// Samples `f` at all mesh nodes, element by element.
pub fn sample_nodes<T: Send>(mesh: &SurfaceMesh, f: impl Fn(&Point) -> T + Sync) -> Vec<Vec<T>> {
    mesh.elements()
        .par_iter()
        .map(|e| e.nodes.iter().map(&f).collect())
        .collect()
}

fn first_error<V>(results: Vec<Result<V>>) -> Result<Vec<V>> {
    results.into_iter().collect()
}

/// Leaf stage followed by level-by-level merges. Particular data starts at zero.
pub fn build_factorization<T: Scalar>(
    mesh: &SurfaceMesh,
    coeff: &CoefficientField<T>,
    tree: &MergeTree,
) -> Result<Factorization<T>> {
    tree.validate(mesh)?;
    let reference = ReferenceElement::new(mesh.order())?;
    let leaf_results: Vec<Result<(LeafOperators<T>, bool, [Vec<Point>; 4])>> = mesh
        .elements()
        .par_iter()
        .map(|e| {
            let geo = element_geometry(&reference, e)?;
            let samples = coeff.sample(e)?;
            let leaf = factor_leaf(&reference, e, &geo, &samples)?;
            Ok((leaf, samples.c_is_zero(), geo.edge_points))
        })
        .collect();
    let mut leaves = Vec::with_capacity(mesh.len());
    let mut c_zero = true;
    let mut edge_points = Vec::with_capacity(mesh.len());
    for (leaf, cz, pts) in first_error(leaf_results)? {
        leaves.push(leaf);
        c_zero &= cz;
        edge_points.push(pts);
    }

    let n = mesh.len();
    let mut states: Vec<Option<ClusterState<T>>> = leaves
        .iter()
        .enumerate()
        .map(|(k, leaf)| {
            Some(ClusterState {
                keys: leaf_keys(mesh, k),
                weights: leaf.edge_quadrature.clone(),
                sigma: leaf.sigma.clone(),
                v_flux: leaf.v_flux.clone(),
            })
        })
        .collect();
    states.resize_with(tree.num_clusters(), || None);

    let root = tree.root();
    let fix_allowed = mesh.closed() && c_zero;
    let mut nodes: Vec<Option<MergeNode<T>>> = (0..tree.nodes().len()).map(|_| None).collect();
    let mut root_unfixed = None;
    for (level, ids) in tree.levels().iter().enumerate() {
        let inputs: Vec<(usize, ClusterState<T>, ClusterState<T>)> = ids
            .iter()
            .map(|&c| {
                let tn = tree.node(c).expect("merge node");
                let a = states[tn.left].take().expect("child state");
                let b = states[tn.right].take().expect("child state");
                (c, a, b)
            })
            .collect();
        let results: Vec<Result<MergeOutput<T>>> = inputs
            .par_iter()
            .map(|(c, a, b)| {
                let tn = tree.node(*c).expect("merge node");
                merge_pair(*c, level, (tn.left, a), (tn.right, b), fix_allowed && *c == root)
            })
            .collect();
        for (&c, out) in ids.iter().zip(first_error(results)?) {
            if out.unfixed.is_some() {
                root_unfixed = out.unfixed;
            }
            states[c] = Some(out.state);
            nodes[c - n] = Some(out.node);
        }
    }
    let root_state = states[root].take().expect("root state");
    let nodes: Vec<MergeNode<T>> = nodes.into_iter().map(|x| x.expect("all merges done")).collect();

    let n_int = mesh.interfaces().len();
    let ne = mesh.order() - 1;
    let root_points = root_state
        .keys
        .iter()
        .map(|&(edge, idx)| {
            let e = mesh.boundary_edges()[edge - n_int];
            edge_points[e.element][e.side as usize][idx]
        })
        .collect();
    debug_assert!(root_state.keys.iter().all(|&(edge, idx)| edge >= n_int && idx < ne));

    Ok(Factorization {
        mesh: Arc::new(mesh.clone()),
        reference,
        tree: tree.clone(),
        leaves,
        nodes,
        root_sigma: root_state.sigma,
        root_keys: root_state.keys,
        root_points,
        root_weights: root_state.weights,
        c_zero,
        root_unfixed,
    })
}
