//! Binary factorization cache.
//!
//! Layout (little-endian): magic `SHPSFACT`, `u32` version, `u8` scalar kind,
//! `u64` element count, `u64` order, `u64` fingerprint, then the merge list,
//! leaf blocks, merge-node blocks and the root block. Matrices are stored as
//! `u64` rows, `u64` cols and column-major entries.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{BoundaryKey, Factorization, MergeNode};
use crate::error::{Error, Result};
use crate::leaf::LeafOperators;
use crate::linalg::LuFactor;
use crate::mesh::{MergeTree, Point, SurfaceMesh};
use crate::scalar::Scalar;
use crate::surface_ops::ReferenceElement;

const MAGIC: &[u8; 8] = b"SHPSFACT";
const VERSION: u32 = 1;

/// FNV-1a hash of the mesh geometry and an operator description.
pub fn fingerprint(mesh: &SurfaceMesh, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(&(mesh.order() as u64).to_le_bytes());
    eat(&(mesh.len() as u64).to_le_bytes());
    for e in mesh.elements() {
        for x in &e.nodes {
            for c in x {
                eat(&c.to_le_bytes());
            }
        }
    }
    eat(tag.as_bytes());
    h
}

struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn indices(&mut self, v: &[usize]) {
        self.usize(v.len());
        v.iter().for_each(|&x| self.usize(x));
    }
    fn reals(&mut self, v: &[f64]) {
        self.usize(v.len());
        v.iter().for_each(|&x| self.f64(x));
    }
    fn values<T: Scalar>(&mut self, v: &[T]) {
        self.usize(v.len());
        v.iter().for_each(|&x| x.write_le(&mut self.0));
    }
    fn matrix<T: Scalar>(&mut self, m: &DMatrix<T>) {
        self.usize(m.nrows());
        self.usize(m.ncols());
        m.iter().for_each(|&x| x.write_le(&mut self.0));
    }
    fn real_matrix(&mut self, m: &DMatrix<f64>) {
        self.matrix(m)
    }
    fn lu<T: Scalar>(&mut self, lu: &LuFactor<T>) {
        self.matrix(lu.factors());
        self.indices(lu.swaps());
        self.f64(lu.norm1());
    }
}

struct Reader<'a>(&'a [u8]);

fn truncated() -> Error {
    Error::Cache("file is truncated".into())
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let (head, rest) = self.0.split_first_chunk::<N>().ok_or_else(truncated)?;
        self.0 = rest;
        Ok(*head)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::Cache(format!("size {v} out of range")))
    }
    fn len(&mut self, elem_bytes: usize) -> Result<usize> {
        let n = self.usize()?;
        if n.saturating_mul(elem_bytes) > self.0.len() {
            return Err(truncated());
        }
        Ok(n)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
    fn indices(&mut self) -> Result<Vec<usize>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.usize()).collect()
    }
    fn reals(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn value<T: Scalar>(&mut self) -> Result<T> {
        T::read_le(&mut self.0).ok_or_else(truncated)
    }
    fn values<T: Scalar>(&mut self) -> Result<Vec<T>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.value()).collect()
    }
    fn matrix<T: Scalar>(&mut self) -> Result<DMatrix<T>> {
        let r = self.usize()?;
        let c = self.usize()?;
        if r.saturating_mul(c).saturating_mul(8) > self.0.len() {
            return Err(truncated());
        }
        let data = (0..r * c).map(|_| self.value()).collect::<Result<Vec<T>>>()?;
        Ok(DMatrix::from_vec(r, c, data))
    }
    fn lu<T: Scalar>(&mut self) -> Result<LuFactor<T>> {
        let lu = self.matrix::<T>()?;
        let swaps = self.indices()?;
        let norm1 = self.f64()?;
        if lu.nrows() != lu.ncols() || swaps.len() != lu.nrows() || swaps.iter().any(|&s| s >= lu.nrows()) {
            return Err(Error::Cache("inconsistent LU block".into()));
        }
        Ok(LuFactor::from_parts(lu, swaps, norm1))
    }
}

/// Serializes a factorization; `tag` should describe the operator.
pub fn write_factorization<T: Scalar>(fact: &Factorization<T>, tag: &str) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.0.extend_from_slice(&VERSION.to_le_bytes());
    w.0.push(T::KIND as u8);
    w.usize(fact.mesh.len());
    w.usize(fact.mesh.order());
    w.u64(fingerprint(&fact.mesh, tag));

    w.usize(fact.tree.nodes().len());
    for n in fact.tree.nodes() {
        w.usize(n.left);
        w.usize(n.right);
    }
    for leaf in &fact.leaves {
        w.usize(leaf.element);
        w.matrix(&leaf.s);
        w.matrix(&leaf.sigma);
        w.lu(&leaf.interior);
        w.real_matrix(&leaf.d_binormal);
        w.values(&leaf.v);
        w.values(&leaf.v_flux);
        w.reals(&leaf.edge_quadrature);
    }
    for node in &fact.nodes {
        w.usize(node.id);
        w.usize(node.level);
        w.indices(&node.alpha_b);
        w.indices(&node.alpha_s);
        w.indices(&node.beta_b);
        w.indices(&node.beta_s);
        w.lu(&node.interface);
        w.matrix(&node.s_i);
        w.matrix(&node.sigma_bs);
        w.values(&node.v_i);
        w.values(&node.v_flux);
        match &node.top_level_fix {
            Some(q) => {
                w.0.push(1);
                w.reals(q);
            }
            None => w.0.push(0),
        }
        w.f64(node.condition);
    }
    w.matrix(&fact.root_sigma);
    w.usize(fact.root_keys.len());
    for &(e, i) in &fact.root_keys {
        w.usize(e);
        w.usize(i);
    }
    for p in &fact.root_points {
        p.iter().for_each(|&c| w.f64(c));
    }
    w.reals(&fact.root_weights);
    w.0.push(fact.c_zero as u8);
    match &fact.root_unfixed {
        Some(m) => {
            w.0.push(1);
            w.matrix(m);
        }
        None => w.0.push(0),
    }
    w.0
}

/// Restores a factorization for `mesh`, rejecting caches built for a
/// different mesh, operator tag or scalar type.
pub fn read_factorization<T: Scalar>(bytes: &[u8], mesh: &SurfaceMesh, tag: &str) -> Result<Factorization<T>> {
    let mut r = Reader(bytes);
    if &r.take::<8>()? != MAGIC {
        return Err(Error::Cache("not a factorization cache".into()));
    }
    let version = u32::from_le_bytes(r.take()?);
    if version != VERSION {
        return Err(Error::Cache(format!("unsupported cache version {version}")));
    }
    let [kind] = r.take::<1>()?;
    if kind != T::KIND as u8 {
        return Err(Error::Cache("cache holds a different scalar type".into()));
    }
    let n = r.usize()?;
    let p = r.usize()?;
    if n != mesh.len() || p != mesh.order() || r.u64()? != fingerprint(mesh, tag) {
        return Err(Error::Cache("cache was built for a different mesh or operator".into()));
    }
    let n_merges = r.len(16)?;
    let merges = (0..n_merges)
        .map(|_| Ok((r.usize()?, r.usize()?)))
        .collect::<Result<Vec<_>>>()?;
    let tree = MergeTree::from_merges(n, &merges)?;

    let mut leaves = Vec::with_capacity(n);
    for _ in 0..n {
        leaves.push(LeafOperators {
            element: r.usize()?,
            s: r.matrix()?,
            sigma: r.matrix()?,
            interior: r.lu()?,
            d_binormal: r.matrix()?,
            v: r.values()?,
            v_flux: r.values()?,
            edge_quadrature: r.reals()?,
        });
    }
    let mut nodes = Vec::with_capacity(n_merges);
    for tn in tree.nodes() {
        let id = r.usize()?;
        let level = r.usize()?;
        let alpha_b = r.indices()?;
        let alpha_s = r.indices()?;
        let beta_b = r.indices()?;
        let beta_s = r.indices()?;
        let interface = r.lu()?;
        let s_i = r.matrix()?;
        let sigma_bs = r.matrix()?;
        let v_i = r.values()?;
        let v_flux = r.values()?;
        let [flag] = r.take::<1>()?;
        let top_level_fix = if flag == 1 { Some(r.reals()?) } else { None };
        let condition = r.f64()?;
        nodes.push(MergeNode {
            id,
            left: tn.left,
            right: tn.right,
            level,
            alpha_b,
            alpha_s,
            beta_b,
            beta_s,
            interface,
            s_i,
            sigma_bs,
            v_i,
            v_flux,
            top_level_fix,
            condition,
        });
    }
    let root_sigma = r.matrix()?;
    let nk = r.len(16)?;
    let root_keys: Vec<BoundaryKey> = (0..nk).map(|_| Ok((r.usize()?, r.usize()?))).collect::<Result<_>>()?;
    let root_points: Vec<Point> = (0..nk)
        .map(|_| Ok([r.f64()?, r.f64()?, r.f64()?]))
        .collect::<Result<_>>()?;
    let root_weights = r.reals()?;
    let [cz] = r.take::<1>()?;
    let [flag] = r.take::<1>()?;
    let root_unfixed = if flag == 1 { Some(r.matrix()?) } else { None };
    if !r.0.is_empty() {
        return Err(Error::Cache(format!("{} trailing bytes", r.0.len())));
    }
    Ok(Factorization {
        mesh: Arc::new(mesh.clone()),
        reference: ReferenceElement::new(p)?,
        tree,
        leaves,
        nodes,
        root_sigma,
        root_keys,
        root_points,
        root_weights,
        c_zero: cz == 1,
        root_unfixed,
    })
}

pub fn save_factorization<T: Scalar>(fact: &Factorization<T>, tag: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_factorization(fact, tag)).map_err(|e| Error::io(path, e))
}

pub fn load_factorization<T: Scalar>(
    path: impl AsRef<Path>,
    mesh: &SurfaceMesh,
    tag: &str,
) -> Result<Factorization<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_factorization(&bytes, mesh, tag)
}
