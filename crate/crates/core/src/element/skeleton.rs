//! Skeleton trees over element samples: minimum spanning tree of the
//! Delaunay edges, rooted at a tree center so the rooted height is minimal.
//! Deformable elements evaluate sample positions by composing per-joint
//! rotations along this tree; bone lengths stay constant.

use nalgebra::Point3;

use crate::element::rotation::rotation_from_expmap;
use crate::error::{Error, Result};
use crate::geom::delaunay::{delaunay_edges, mst_edges};
use crate::Vec3;

/// Rooted skeleton over an element's local samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonTree {
    pub root: usize,
    /// Parent per sample; `None` exactly for the root.
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    /// Root-first order; every parent precedes its children.
    pub topo_order: Vec<usize>,
    /// Bone offset to the parent in the undeformed configuration; zero for
    /// the root.
    pub bones: Vec<Vec3>,
}

/// Unrooted skeleton edges: minimum spanning tree of the Delaunay
/// triangulation, weighted by Euclidean length. Degenerate inputs are
/// perturbed deterministically from `seed` inside the Delaunay step.
pub fn build_skeleton(points: &[Point3<f64>], seed: u64) -> Result<Vec<(usize, usize)>> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(
            "skeletons need at least 2 samples".into(),
        ));
    }
    let candidates = delaunay_edges(points, seed);
    let tree = mst_edges(points, &candidates);
    if tree.len() != points.len() - 1 {
        return Err(Error::Geometry("sample MST does not span".into()));
    }
    Ok(tree)
}

fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    adj
}

/// Hop distances from `start`, plus a parent map pointing back toward it.
fn bfs(adj: &[Vec<usize>], start: usize) -> (Vec<usize>, Vec<usize>) {
    let n = adj.len();
    let mut dist = vec![usize::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    dist[start] = 0;
    queue.push_back(start);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                parent[w] = v;
                queue.push_back(w);
            }
        }
    }
    (dist, parent)
}

fn furthest(dist: &[usize]) -> usize {
    let mut best = 0;
    for (i, &d) in dist.iter().enumerate() {
        if d != usize::MAX && d > dist[best] {
            best = i;
        }
    }
    best
}

/// Root = the vertex half the diameter away from a diameter endpoint. Runs
/// two sweeps (furthest from an arbitrary vertex, then furthest from that)
/// and backtracks floor(diameter / 2) hops; the rooted height is minimal
/// over all choices of root.
pub fn select_root(num_vertices: usize, edges: &[(usize, usize)]) -> usize {
    if num_vertices <= 1 {
        return 0;
    }
    let adj = adjacency(num_vertices, edges);
    let (d0, _) = bfs(&adj, 0);
    let y = furthest(&d0);
    let (dy, parent_to_y) = bfs(&adj, y);
    let z = furthest(&dy);
    let diameter = dy[z];
    let mut v = z;
    for _ in 0..diameter / 2 {
        v = parent_to_y[v];
    }
    v
}

impl SkeletonTree {
    /// Orient an unrooted edge set at `root`.
    pub fn from_edges(points: &[Point3<f64>], edges: &[(usize, usize)], root: usize) -> Self {
        let n = points.len();
        let adj = adjacency(n, edges);
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut topo_order = Vec::with_capacity(n);
        let mut visited = vec![false; n];
        let mut queue = std::collections::VecDeque::new();
        visited[root] = true;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            topo_order.push(v);
            for &w in &adj[v] {
                if !visited[w] {
                    visited[w] = true;
                    parent[w] = Some(v);
                    children[v].push(w);
                    queue.push_back(w);
                }
            }
        }
        let bones = (0..n)
            .map(|s| match parent[s] {
                Some(p) => points[s] - points[p],
                None => Vec3::zeros(),
            })
            .collect();
        Self { root, parent, children, topo_order, bones }
    }

    /// Construct the full rooted skeleton: Delaunay MST + half-diameter root.
    pub fn build(points: &[Point3<f64>], seed: u64) -> Result<Self> {
        let edges = build_skeleton(points, seed)?;
        let root = select_root(points.len(), &edges);
        Ok(Self::from_edges(points, &edges, root))
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Height of the tree rooted as-is (edge count to the deepest leaf).
    pub fn height(&self) -> usize {
        let mut depth = vec![0usize; self.len()];
        let mut max = 0;
        for &v in &self.topo_order {
            if let Some(p) = self.parent[v] {
                depth[v] = depth[p] + 1;
                max = max.max(depth[v]);
            }
        }
        max
    }

    /// Deformed local sample positions: the root stays at its rest position,
    /// every other sample is its rotated bone offset from the parent.
    pub fn local_positions(&self, rest: &[Point3<f64>], omega: &[Vec3]) -> Vec<Point3<f64>> {
        debug_assert_eq!(rest.len(), self.len());
        debug_assert_eq!(omega.len(), self.len());
        let mut pos = vec![Point3::origin(); self.len()];
        for &s in &self.topo_order {
            match self.parent[s] {
                None => pos[s] = rest[s],
                Some(p) => {
                    let r = rotation_from_expmap(&omega[s]);
                    pos[s] = pos[p] + r * self.bones[s];
                }
            }
        }
        pos
    }
}
