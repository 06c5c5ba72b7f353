//! Binary merge hierarchies over the element adjacency graph.
//!
//! Cluster ids `0..N` are the elements; merge `k` creates cluster `N + k`.
//! Merges are stored level by level so that children always precede their
//! parent.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::SurfaceMesh;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeNode {
    pub left: usize,
    pub right: usize,
    pub level: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergeTree {
    n_leaves: usize,
    nodes: Vec<TreeNode>,
    levels: Vec<Vec<usize>>,
}

type Adjacency = Vec<BTreeMap<usize, usize>>;

impl MergeTree {
    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    /// Merge nodes in id order (cluster id `n_leaves + index`).
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, cluster: usize) -> Option<&TreeNode> {
        cluster.checked_sub(self.n_leaves).and_then(|k| self.nodes.get(k))
    }

    /// Cluster ids created at each level.
    pub fn levels(&self) -> &[Vec<usize>] {
        &self.levels
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn num_clusters(&self) -> usize {
        self.n_leaves + self.nodes.len()
    }

    pub fn root(&self) -> usize {
        self.num_clusters() - 1
    }

    pub fn level_pairs(&self, level: usize) -> Vec<(usize, usize)> {
        self.levels[level]
            .iter()
            .map(|&c| {
                let n = self.node(c).expect("merge node");
                (n.left, n.right)
            })
            .collect()
    }

    /// Elements in a cluster, ascending.
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![cluster];
        while let Some(c) = stack.pop() {
            match self.node(c) {
                Some(n) => {
                    stack.push(n.left);
                    stack.push(n.right);
                }
                None => out.push(c),
            }
        }
        out.sort_unstable();
        out
    }

    /// Element → cluster id at the start of `level` (before its merges).
    pub fn clusters_at(&self, level: usize) -> Vec<usize> {
        let mut owner: Vec<usize> = (0..self.n_leaves).collect();
        for lvl in self.levels.iter().take(level) {
            for &c in lvl {
                for e in self.members(c) {
                    owner[e] = c;
                }
            }
        }
        owner
    }

    /// Builds a tree from merges listed in creation order.
    pub fn from_merges(n_leaves: usize, merges: &[(usize, usize)]) -> Result<Self> {
        let mut height = vec![0usize; n_leaves + merges.len()];
        let mut used = vec![false; n_leaves + merges.len()];
        let mut nodes = Vec::with_capacity(merges.len());
        for (k, &(a, b)) in merges.iter().enumerate() {
            let id = n_leaves + k;
            if a >= id || b >= id || a == b || used[a] || used[b] {
                return Err(Error::InvalidMesh(format!("invalid merge ({a}, {b}) for cluster {id}")));
            }
            used[a] = true;
            used[b] = true;
            let level = height[a].max(height[b]);
            height[id] = level + 1;
            nodes.push(TreeNode {
                left: a,
                right: b,
                level,
            });
        }
        if n_leaves > 0 && merges.len() + 1 != n_leaves {
            return Err(Error::InvalidMesh(format!(
                "{} merges cannot join {n_leaves} clusters into one",
                merges.len()
            )));
        }
        let depth = nodes.iter().map(|n| n.level + 1).max().unwrap_or(0);
        let mut levels = vec![Vec::new(); depth];
        for (k, n) in nodes.iter().enumerate() {
            levels[n.level].push(n_leaves + k);
        }
        Ok(Self {
            n_leaves,
            nodes,
            levels,
        })
    }

    /// Checks partition and adjacency invariants against a mesh.
    pub fn validate(&self, mesh: &SurfaceMesh) -> Result<()> {
        if self.n_leaves != mesh.len() {
            return Err(Error::Shape {
                what: "merge tree leaves",
                expected: mesh.len(),
                got: self.n_leaves,
            });
        }
        let adj = mesh.adjacency();
        for (k, n) in self.nodes.iter().enumerate() {
            let a = self.members(n.left);
            let b: BTreeSet<usize> = self.members(n.right).into_iter().collect();
            if !a.iter().any(|e| adj[*e].keys().any(|x| b.contains(x))) {
                return Err(Error::InvalidMesh(format!(
                    "merge {} joins clusters {} and {} that share no edge",
                    self.n_leaves + k,
                    n.left,
                    n.right
                )));
            }
        }
        Ok(())
    }

    /// Alternative hierarchy by greedy heavy-edge matching of clusters,
    /// level by level.
    pub fn bottom_up_matching(mesh: &SurfaceMesh) -> Result<Self> {
        let n = mesh.len();
        check_connected(&mesh.adjacency())?;
        let mut owner: Vec<usize> = (0..n).collect();
        let mut size: BTreeMap<usize, usize> = (0..n).map(|c| (c, 1)).collect();
        let mut merges = Vec::new();
        while size.len() > 1 {
            let mut cadj: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
            for (a, b) in mesh.interfaces() {
                let (ca, cb) = (owner[a.element], owner[b.element]);
                if ca != cb {
                    *cadj.entry(ca).or_default().entry(cb).or_insert(0) += 1;
                    *cadj.entry(cb).or_default().entry(ca).or_insert(0) += 1;
                }
            }
            let mut matched = BTreeSet::new();
            let mut level_merges = Vec::new();
            for &c in size.keys() {
                if matched.contains(&c) {
                    continue;
                }
                let best = cadj
                    .get(&c)
                    .into_iter()
                    .flatten()
                    .filter(|(d, _)| !matched.contains(*d))
                    .max_by(|x, y| x.1.cmp(y.1).then(size[y.0].cmp(&size[x.0])).then(y.0.cmp(x.0)));
                if let Some((&d, _)) = best {
                    matched.insert(c);
                    matched.insert(d);
                    level_merges.push((c, d));
                }
            }
            for (c, d) in level_merges {
                let id = n + merges.len();
                merges.push((c, d));
                let s = size.remove(&c).unwrap() + size.remove(&d).unwrap();
                size.insert(id, s);
                for o in owner.iter_mut() {
                    if *o == c || *o == d {
                        *o = id;
                    }
                }
            }
        }
        Self::from_merges(n, &merges)
    }
}

fn components(adj: &Adjacency, set: &[usize], inside: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &s in set {
        if seen.contains(&s) {
            continue;
        }
        let mut comp = vec![s];
        seen.insert(s);
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &w in adj[v].keys() {
                if inside[w] && seen.insert(w) {
                    comp.push(w);
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

fn check_connected(adj: &Adjacency) -> Result<()> {
    let all: Vec<usize> = (0..adj.len()).collect();
    let inside = vec![true; adj.len()];
    let c = components(adj, &all, &inside).len();
    if c > 1 {
        return Err(Error::MultipleComponents { components: c });
    }
    Ok(())
}

/// BFS distances within `inside`, returning the farthest vertex (lowest id on ties).
fn farthest(adj: &Adjacency, start: usize, inside: &[bool]) -> usize {
    let mut dist = BTreeMap::new();
    dist.insert(start, 0usize);
    let mut queue = VecDeque::from([start]);
    let mut best = (0usize, start);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        if d > best.0 || (d == best.0 && v < best.1) {
            best = (d, v);
        }
        for &w in adj[v].keys() {
            if inside[w] && !dist.contains_key(&w) {
                dist.insert(w, d + 1);
                queue.push_back(w);
            }
        }
    }
    best.1
}

/// Splits a connected vertex set into two connected halves by greedy
/// region growth from a pseudo-peripheral vertex.
fn bisect(adj: &Adjacency, set: &[usize], inside: &mut [bool]) -> (Vec<usize>, Vec<usize>) {
    let n = set.len();
    let start = farthest(adj, farthest(adj, set[0], inside), inside);
    let target = n / 2;
    let mut in_a = BTreeSet::new();
    // gain = weight to A minus weight to the rest of the set
    let mut gain: BTreeMap<usize, i64> = set
        .iter()
        .map(|&v| {
            let deg: usize = adj[v].iter().filter(|(w, _)| inside[**w]).map(|(_, c)| *c).sum();
            (v, -(deg as i64))
        })
        .collect();
    let mut frontier = BTreeSet::new();
    let add =
        |v: usize, in_a: &mut BTreeSet<usize>, frontier: &mut BTreeSet<usize>, gain: &mut BTreeMap<usize, i64>| {
            in_a.insert(v);
            frontier.remove(&v);
            for (&w, &c) in &adj[v] {
                if inside[w] && !in_a.contains(&w) {
                    *gain.get_mut(&w).unwrap() += 2 * c as i64;
                    frontier.insert(w);
                }
            }
        };
    add(start, &mut in_a, &mut frontier, &mut gain);
    while in_a.len() < target {
        let v = *frontier
            .iter()
            .max_by(|x, y| gain[*x].cmp(&gain[*y]).then(y.cmp(x)))
            .expect("connected set has a frontier");
        add(v, &mut in_a, &mut frontier, &mut gain);
    }
    let rest: Vec<usize> = set.iter().copied().filter(|v| !in_a.contains(v)).collect();
    for &v in set {
        inside[v] = !in_a.contains(&v);
    }
    let mut comps = components(adj, &rest, inside);
    for &v in set {
        inside[v] = true;
    }
    if comps.len() > 1 {
        comps.sort_by(|x, y| y.len().cmp(&x.len()).then(x[0].cmp(&y[0])));
        for c in &comps[1..] {
            in_a.extend(c.iter().copied());
        }
    }
    let a: Vec<usize> = in_a.into_iter().collect();
    let b: Vec<usize> = set.iter().copied().filter(|v| a.binary_search(v).is_err()).collect();
    (a, b)
}

enum Split {
    Leaf(usize),
    Node(Box<Split>, Box<Split>, usize),
}

impl Split {
    fn height(&self) -> usize {
        match self {
            Split::Leaf(_) => 0,
            Split::Node(_, _, h) => *h,
        }
    }
}

fn split(adj: &Adjacency, set: Vec<usize>, inside: &mut Vec<bool>) -> Split {
    if set.len() == 1 {
        return Split::Leaf(set[0]);
    }
    for v in inside.iter_mut() {
        *v = false;
    }
    for &v in &set {
        inside[v] = true;
    }
    let (a, b) = bisect(adj, &set, inside);
    let left = split(adj, a, inside);
    let right = split(adj, b, inside);
    let h = left.height().max(right.height()) + 1;
    Split::Node(Box::new(left), Box::new(right), h)
}

/// Balanced merge hierarchy by recursive bisection of the element graph.
pub fn build_merge_tree(mesh: &SurfaceMesh) -> Result<MergeTree> {
    let n = mesh.len();
    let adj = mesh.adjacency();
    check_connected(&adj)?;
    let mut inside = vec![true; n];
    let root = split(&adj, (0..n).collect(), &mut inside);

    // Merges sorted by level (height − 1), then by smallest member.
    let mut pending: Vec<(usize, usize, usize, usize)> = Vec::new(); // (level, min elem, left, right) in split-local ids
    let mut local: Vec<(usize, usize)> = Vec::new(); // local id -> (kind, payload)
    fn walk(
        s: &Split,
        pending: &mut Vec<(usize, usize, usize, usize)>,
        local: &mut Vec<(usize, usize)>,
    ) -> (usize, usize) {
        match s {
            Split::Leaf(e) => {
                local.push((0, *e));
                (local.len() - 1, *e)
            }
            Split::Node(l, r, h) => {
                let (li, lmin) = walk(l, pending, local);
                let (ri, rmin) = walk(r, pending, local);
                let m = lmin.min(rmin);
                local.push((1, pending.len()));
                pending.push((h - 1, m, li, ri));
                (local.len() - 1, m)
            }
        }
    }
    walk(&root, &mut pending, &mut local);
    let mut order: Vec<usize> = (0..pending.len()).collect();
    order.sort_by_key(|&k| (pending[k].0, pending[k].1));
    let mut new_id = vec![0usize; pending.len()];
    for (pos, &k) in order.iter().enumerate() {
        new_id[k] = n + pos;
    }
    let resolve = |li: usize| -> usize {
        let (kind, payload) = local[li];
        if kind == 0 {
            payload
        } else {
            new_id[payload]
        }
    };
    let merges: Vec<(usize, usize)> = order
        .iter()
        .map(|&k| {
            let (_, _, l, r) = pending[k];
            (resolve(l), resolve(r))
        })
        .collect();
    MergeTree::from_merges(n, &merges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::tests::flat_element;
    use crate::mesh::{build_connectivity, generate_cubed_sphere, generate_torus};

    fn check_partition(t: &MergeTree) {
        for level in 0..=t.depth() {
            let owner = t.clusters_at(level);
            let clusters: BTreeSet<usize> = owner.iter().copied().collect();
            let total: usize = clusters.iter().map(|&c| t.members(c).len()).sum();
            assert_eq!(total, t.n_leaves());
        }
    }

    #[test]
    fn two_elements() {
        let m = build_connectivity(
            vec![
                flat_element(0, 3, -1.0, 0.0, -1.0, 1.0),
                flat_element(1, 3, 0.0, 1.0, -1.0, 1.0),
            ],
            None,
        )
        .unwrap();
        let t = build_merge_tree(&m).unwrap();
        assert_eq!(t.depth(), 1);
        let pairs = t.level_pairs(0);
        assert_eq!(pairs.len(), 1);
        let (a, b) = pairs[0];
        assert_eq!((a.min(b), a.max(b)), (0, 1));
    }

    #[test]
    fn cubed_sphere_tree() {
        let m = generate_cubed_sphere(0, 3).unwrap();
        let t = build_merge_tree(&m).unwrap();
        assert_eq!(t.depth(), 3);
        assert_eq!(t.members(t.root()), (0..6).collect::<Vec<_>>());
        t.validate(&m).unwrap();
        check_partition(&t);

        let m = generate_cubed_sphere(2, 2).unwrap();
        let t = build_merge_tree(&m).unwrap();
        assert!(t.depth() <= 9);
        t.validate(&m).unwrap();
        check_partition(&t);
    }

    #[test]
    fn matching_tree_is_valid() {
        let m = generate_torus(2.0, 1.0, 6, 4, 2, None).unwrap();
        let t = MergeTree::bottom_up_matching(&m).unwrap();
        t.validate(&m).unwrap();
        check_partition(&t);
        assert_eq!(t.members(t.root()).len(), 24);
    }

    #[test]
    fn disconnected_mesh_rejected() {
        let m = build_connectivity(
            vec![
                flat_element(0, 2, 0.0, 1.0, 0.0, 1.0),
                flat_element(1, 2, 5.0, 6.0, 0.0, 1.0),
            ],
            None,
        )
        .unwrap();
        assert!(matches!(
            build_merge_tree(&m),
            Err(Error::MultipleComponents { components: 2 })
        ));
    }

    #[test]
    fn bad_merge_lists() {
        assert!(MergeTree::from_merges(3, &[(0, 1), (0, 2)]).is_err());
        assert!(MergeTree::from_merges(3, &[(0, 1)]).is_err());
        let t = MergeTree::from_merges(3, &[(0, 1), (3, 2)]).unwrap();
        assert_eq!(t.depth(), 2);
        assert_eq!(t.levels()[1], vec![4]);
    }
}
