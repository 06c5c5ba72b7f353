//! High-order quadrilateral surface meshes.

mod generate;
mod io;
mod tree;

pub use generate::{
    generate_blob, generate_cube, generate_cubed_sphere, generate_mapped_cube, generate_torus, locate_cubed,
    locate_sphere, locate_torus, TorusProfile,
};
pub use io::{load_mesh, read_mesh, save_mesh, write_mesh};
pub use tree::{build_merge_tree, MergeTree, TreeNode};

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub type Point = [f64; 3];

#[inline]
pub(crate) fn dist(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// One order-`p` tensor-product element: `(p+1)²` nodes in the column-wise
/// tensor ordering (η fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub id: usize,
    pub order: usize,
    pub nodes: Vec<Point>,
}

impl Element {
    pub fn new(id: usize, order: usize, nodes: Vec<Point>) -> Result<Self> {
        let want = (order + 1) * (order + 1);
        if nodes.len() != want {
            return Err(Error::Shape {
                what: "element nodes",
                expected: want,
                got: nodes.len(),
            });
        }
        Ok(Self { id, order, nodes })
    }

    pub fn side_nodes(&self, side: Side) -> Vec<Point> {
        side.node_indices(self.order)
            .into_iter()
            .map(|k| self.nodes[k])
            .collect()
    }
}

/// Element side. South/north run along ξ at η = ∓1, west/east run along η
/// at ξ = ∓1. Side node lists are ascending in their running parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    South = 0,
    East = 1,
    North = 2,
    West = 3,
}

impl Side {
    /// Counter-clockwise order used for every boundary ordering.
    pub const ALL: [Side; 4] = [Side::South, Side::East, Side::North, Side::West];

    pub fn name(self) -> &'static str {
        match self {
            Side::South => "south",
            Side::East => "east",
            Side::North => "north",
            Side::West => "west",
        }
    }

    /// Tensor indices of the `p+1` side nodes, ascending in the side parameter.
    pub fn node_indices(self, p: usize) -> Vec<usize> {
        let n1 = p + 1;
        (0..n1)
            .map(|m| match self {
                Side::South => m * n1,
                Side::North => m * n1 + p,
                Side::West => m,
                Side::East => p * n1 + m,
            })
            .collect()
    }

    /// True when the side runs along ξ.
    pub fn along_xi(self) -> bool {
        matches!(self, Side::South | Side::North)
    }

    /// Sign of the outward reference direction (+1 for east/north).
    pub fn outward_sign(self) -> f64 {
        match self {
            Side::East | Side::North => 1.0,
            Side::South | Side::West => -1.0,
        }
    }
}

/// One element side, with its orientation relative to the skeleton edge it
/// lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeRef {
    pub element: usize,
    pub side: Side,
    pub reversed: bool,
}

/// Skeleton edge a side lies on: interfaces are numbered first, then
/// exterior boundary edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SideLink {
    pub edge: usize,
    pub reversed: bool,
}

#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    order: usize,
    elements: Vec<Element>,
    interfaces: Vec<(EdgeRef, EdgeRef)>,
    boundary_edges: Vec<EdgeRef>,
    side_links: Vec<[SideLink; 4]>,
    tol: f64,
}

impl SurfaceMesh {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn element(&self, k: usize) -> &Element {
        &self.elements[k]
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn interfaces(&self) -> &[(EdgeRef, EdgeRef)] {
        &self.interfaces
    }

    pub fn boundary_edges(&self) -> &[EdgeRef] {
        &self.boundary_edges
    }

    pub fn closed(&self) -> bool {
        self.boundary_edges.is_empty()
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn num_skeleton_edges(&self) -> usize {
        self.interfaces.len() + self.boundary_edges.len()
    }

    pub fn side_link(&self, element: usize, side: Side) -> SideLink {
        self.side_links[element][side as usize]
    }

    /// Element adjacency with multiplicity (number of shared sides).
    pub fn adjacency(&self) -> Vec<BTreeMap<usize, usize>> {
        let mut adj = vec![BTreeMap::new(); self.len()];
        for (a, b) in &self.interfaces {
            *adj[a.element].entry(b.element).or_insert(0) += 1;
            *adj[b.element].entry(a.element).or_insert(0) += 1;
        }
        adj
    }

    pub fn bounding_box_diagonal(&self) -> f64 {
        bbox_diagonal(&self.elements)
    }

    /// Total node count `N (p+1)²`.
    pub fn num_nodes(&self) -> usize {
        self.len() * (self.order + 1) * (self.order + 1)
    }
}

fn bbox_diagonal(elements: &[Element]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for e in elements {
        for x in &e.nodes {
            for d in 0..3 {
                lo[d] = lo[d].min(x[d]);
                hi[d] = hi[d].max(x[d]);
            }
        }
    }
    dist(&lo, &hi)
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.0[hi] = lo;
        }
    }
}

/// Relative matching tolerance used when none is given.
pub const DEFAULT_RELATIVE_TOL: f64 = 1e-8;

/// Matches element sides by pointwise node coincidence.
///
/// `tol` is an absolute length; `None` selects `1e-8 ×` the bounding-box
/// diagonal.
pub fn build_connectivity(elements: Vec<Element>, tol: Option<f64>) -> Result<SurfaceMesh> {
    let Some(first) = elements.first() else {
        return Err(Error::InvalidMesh("mesh has no elements".into()));
    };
    let p = first.order;
    if p < 2 {
        return Err(Error::InvalidOrder {
            order: p as i64,
            reason: "surface elements need p >= 2",
        });
    }
    for e in &elements {
        if e.order != p {
            return Err(Error::InvalidMesh(format!(
                "element {} has order {} but the mesh has order {p}",
                e.id, e.order
            )));
        }
        if e.nodes.len() != (p + 1) * (p + 1) {
            return Err(Error::Shape {
                what: "element nodes",
                expected: (p + 1) * (p + 1),
                got: e.nodes.len(),
            });
        }
    }
    let tol = match tol {
        Some(t) if t > 0.0 => t,
        Some(t) => return Err(Error::InvalidMesh(format!("matching tolerance {t} must be positive"))),
        None => DEFAULT_RELATIVE_TOL * bbox_diagonal(&elements).max(f64::MIN_POSITIVE),
    };

    // Cluster element corners into vertices.
    let corner = |e: &Element, c: usize| -> Point {
        let n1 = p + 1;
        match c {
            0 => e.nodes[0],
            1 => e.nodes[p * n1],
            2 => e.nodes[p * n1 + p],
            _ => e.nodes[p],
        }
    };
    let mut pts: Vec<(Point, usize)> = Vec::with_capacity(4 * elements.len());
    for (k, e) in elements.iter().enumerate() {
        for c in 0..4 {
            pts.push((corner(e, c), 4 * k + c));
        }
    }
    pts.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]).then(a.1.cmp(&b.1)));
    let mut uf = UnionFind((0..pts.len()).collect());
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            if pts[b].0[0] - pts[a].0[0] > tol {
                break;
            }
            if dist(&pts[a].0, &pts[b].0) <= tol {
                uf.union(pts[a].1, pts[b].1);
            }
        }
    }
    // corner c of element k: 0 = (ξ,η)=(-1,-1), 1 = (1,-1), 2 = (1,1), 3 = (-1,1)
    let side_corners = |s: Side| -> (usize, usize) {
        match s {
            Side::South => (0, 1),
            Side::East => (1, 2),
            Side::North => (3, 2),
            Side::West => (0, 3),
        }
    };
    let mut groups: BTreeMap<(usize, usize), Vec<(usize, Side, usize)>> = BTreeMap::new();
    for (k, e) in elements.iter().enumerate() {
        for s in Side::ALL {
            let (c0, c1) = side_corners(s);
            let v0 = uf.find(4 * k + c0);
            let v1 = uf.find(4 * k + c1);
            if v0 == v1 {
                return Err(Error::InvalidMesh(format!(
                    "element {} {} side is collapsed",
                    e.id,
                    s.name()
                )));
            }
            groups.entry((v0.min(v1), v0.max(v1))).or_default().push((k, s, v0));
        }
    }

    let mut partner: Vec<[Option<(usize, Side, bool)>; 4]> = vec![[None; 4]; elements.len()];
    for members in groups.values() {
        match members.len() {
            1 => {}
            2 => {
                let (ka, sa, va) = members[0];
                let (kb, sb, vb) = members[1];
                let reversed = va != vb;
                let na = elements[ka].side_nodes(sa);
                let mut nb = elements[kb].side_nodes(sb);
                if reversed {
                    nb.reverse();
                }
                if na.iter().zip(&nb).any(|(x, y)| dist(x, y) > tol) {
                    return Err(Error::NonconformingMesh {
                        element: elements[ka].id,
                        side: sa.name(),
                        other: elements[kb].id,
                        other_side: sb.name(),
                    });
                }
                partner[ka][sa as usize] = Some((kb, sb, reversed));
                partner[kb][sb as usize] = Some((ka, sa, reversed));
            }
            n => {
                let (k, s, _) = members[0];
                return Err(Error::AmbiguousMesh {
                    element: elements[k].id,
                    side: s.name(),
                    count: n - 1,
                });
            }
        }
    }

    let mut interfaces = Vec::new();
    let mut boundary_edges = Vec::new();
    let dummy = SideLink {
        edge: usize::MAX,
        reversed: false,
    };
    let mut side_links = vec![[dummy; 4]; elements.len()];
    for k in 0..elements.len() {
        for s in Side::ALL {
            if let Some((kb, sb, reversed)) = partner[k][s as usize] {
                if (k, s) < (kb, sb) {
                    let a = EdgeRef {
                        element: k,
                        side: s,
                        reversed: false,
                    };
                    let b = EdgeRef {
                        element: kb,
                        side: sb,
                        reversed,
                    };
                    side_links[k][s as usize] = SideLink {
                        edge: interfaces.len(),
                        reversed: false,
                    };
                    side_links[kb][sb as usize] = SideLink {
                        edge: interfaces.len(),
                        reversed,
                    };
                    interfaces.push((a, b));
                }
            }
        }
    }
    for k in 0..elements.len() {
        for s in Side::ALL {
            if partner[k][s as usize].is_none() {
                side_links[k][s as usize] = SideLink {
                    edge: interfaces.len() + boundary_edges.len(),
                    reversed: false,
                };
                boundary_edges.push(EdgeRef {
                    element: k,
                    side: s,
                    reversed: false,
                });
            }
        }
    }

    Ok(SurfaceMesh {
        order: p,
        elements,
        interfaces,
        boundary_edges,
        side_links,
        tol,
    })
}
