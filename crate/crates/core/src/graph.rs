//! Undirected simple graphs on dense vertex indices, the standard topologies
//! used as hardware and code graphs, and the Cartesian product.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An undirected edge stored canonically with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub lo: usize,
    pub hi: usize,
}

impl Edge {
    /// Builds the canonical edge for `{u, v}`. Panics on a self-loop.
    pub fn new(u: usize, v: usize) -> Self {
        assert_ne!(u, v, "self-loop ({u}, {u})");
        if u < v {
            Edge { lo: u, hi: v }
        } else {
            Edge { lo: v, hi: u }
        }
    }

    pub fn other(&self, v: usize) -> usize {
        if v == self.lo {
            self.hi
        } else {
            self.lo
        }
    }
}

/// Immutable simple graph. Vertices are `0..vertex_count`, edges are kept
/// sorted so iteration order (and therefore edge rank) is deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    vertex_count: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Validating constructor. Duplicate edges (in either orientation) are
    /// rejected rather than merged.
    pub fn new(vertex_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {u}")));
            }
            if u >= vertex_count || v >= vertex_count {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) out of range for {vertex_count} vertices"
                )));
            }
            if !set.insert(Edge::new(u, v)) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({u}, {v})")));
            }
        }
        Ok(Self::from_canonical(vertex_count, set.into_iter().collect()))
    }

    fn from_canonical(vertex_count: usize, edges: Vec<Edge>) -> Self {
        let mut adjacency = vec![Vec::new(); vertex_count];
        for e in &edges {
            adjacency[e.lo].push(e.hi);
            adjacency[e.hi].push(e.lo);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Graph { vertex_count, edges, adjacency }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges in canonical sorted order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u != v && u < self.vertex_count && self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Position of an edge in the canonical order.
    pub fn edge_rank(&self, e: Edge) -> Option<usize> {
        self.edges.binary_search(&e).ok()
    }

    pub fn degree_sequence(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.adjacency.iter().map(Vec::len).collect();
        d.sort_unstable();
        d
    }

    pub fn is_connected(&self) -> bool {
        if self.vertex_count == 0 {
            return false;
        }
        self.bfs_order(0).len() == self.vertex_count
    }

    /// Breadth-first visiting order of the component containing `root`.
    pub fn bfs_order(&self, root: usize) -> Vec<usize> {
        let mut seen = vec![false; self.vertex_count];
        let mut order = Vec::with_capacity(self.vertex_count);
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &u in &self.adjacency[v] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        order
    }

    /// Dense 0/1 adjacency matrix, row-major.
    pub fn adjacency_matrix(&self) -> Vec<Vec<u8>> {
        let n = self.vertex_count;
        let mut m = vec![vec![0u8; n]; n];
        for e in &self.edges {
            m[e.lo][e.hi] = 1;
            m[e.hi][e.lo] = 1;
        }
        m
    }
}

/// Path `0 - 1 - ... - (n-1)`.
pub fn build_path(n: usize) -> Graph {
    assert!(n >= 1, "path needs at least one vertex");
    let edges = (1..n).map(|i| Edge::new(i - 1, i)).collect();
    Graph::from_canonical(n, edges)
}

/// `rows x cols` rook-move grid; vertex `(r, c)` is `r * cols + c`.
pub fn build_grid(rows: usize, cols: usize) -> Graph {
    assert!(rows >= 1 && cols >= 1, "grid dimensions must be positive");
    let mut edges = Vec::with_capacity(rows * (cols - 1) + cols * (rows - 1));
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                edges.push(Edge::new(v, v + 1));
            }
            if r + 1 < rows {
                edges.push(Edge::new(v, v + cols));
            }
        }
    }
    edges.sort_unstable();
    Graph::from_canonical(rows * cols, edges)
}

pub fn build_complete(n: usize) -> Graph {
    assert!(n >= 1, "complete graph needs at least one vertex");
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for v in u + 1..n {
            edges.push(Edge::new(u, v));
        }
    }
    Graph::from_canonical(n, edges)
}

/// Two parallel chains of `columns` vertices joined by one rung per column.
///
/// Column `c` holds the top vertex `2c` and the bottom vertex `2c + 1`, which
/// is exactly the vertex numbering of `path(columns) □ path(2)`.
pub fn build_ladder(columns: usize) -> Graph {
    assert!(columns >= 1, "ladder needs at least one column");
    cartesian_product(&build_path(columns), &build_path(2)).graph
}

pub fn ladder_top(column: usize) -> usize {
    2 * column
}

pub fn ladder_bottom(column: usize) -> usize {
    2 * column + 1
}

/// `G □ F` together with the block layout used to address its vertices.
#[derive(Debug, Clone)]
pub struct ProductGraph {
    pub graph: Graph,
    /// `|V_F|`: vertices per block.
    pub block_size: usize,
    /// `|V_G|`: number of blocks.
    pub blocks: usize,
}

impl ProductGraph {
    /// Product vertex for `(i, k)`, `i` in G and `k` in F.
    pub fn vertex(&self, i: usize, k: usize) -> usize {
        product_index(i, k, self.block_size)
    }

    /// Inverse of [`ProductGraph::vertex`].
    pub fn coords(&self, v: usize) -> (usize, usize) {
        (v / self.block_size, v % self.block_size)
    }
}

#[inline]
pub fn product_index(i: usize, k: usize, block_size: usize) -> usize {
    i * block_size + k
}

/// Cartesian product: `(i,k) ~ (j,k)` for `i ~ j` in G, and `(i,k) ~ (i,l)`
/// for `k ~ l` in F.
pub fn cartesian_product(g: &Graph, f: &Graph) -> ProductGraph {
    let kf = f.vertex_count();
    let mut edges = Vec::with_capacity(g.edge_count() * kf + g.vertex_count() * f.edge_count());
    for e in g.edges() {
        for k in 0..kf {
            edges.push(Edge::new(product_index(e.lo, k, kf), product_index(e.hi, k, kf)));
        }
    }
    for i in 0..g.vertex_count() {
        for e in f.edges() {
            edges.push(Edge::new(product_index(i, e.lo, kf), product_index(i, e.hi, kf)));
        }
    }
    edges.sort_unstable();
    ProductGraph {
        graph: Graph::from_canonical(g.vertex_count() * kf, edges),
        block_size: kf,
        blocks: g.vertex_count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_counts() {
        assert_eq!(build_path(1).edge_count(), 0);
        assert_eq!(build_path(2).edges(), &[Edge::new(0, 1)]);
        let p9 = build_path(9);
        assert_eq!((p9.vertex_count(), p9.edge_count()), (9, 8));
    }

    #[test]
    fn grid_counts() {
        let g = build_grid(1, 1);
        assert_eq!((g.vertex_count(), g.edge_count()), (1, 0));
        let g = build_grid(3, 3);
        assert_eq!((g.vertex_count(), g.edge_count()), (9, 12));
        // 2x2 grid is a 4-cycle: 2-regular and connected on 4 vertices.
        let g = build_grid(2, 2);
        assert_eq!(g.degree_sequence(), vec![2, 2, 2, 2]);
        assert!(g.is_connected());
    }

    #[test]
    fn complete_counts() {
        assert_eq!(build_complete(2).edge_count(), 1);
        assert_eq!(build_complete(9).edge_count(), 36);
        assert_eq!(build_complete(3).degree_sequence(), vec![2, 2, 2]);
    }

    #[test]
    fn ladder_counts() {
        let l = build_ladder(1);
        assert_eq!((l.vertex_count(), l.edge_count()), (2, 1));
        let l = build_ladder(8);
        assert_eq!((l.vertex_count(), l.edge_count()), (16, 22));
        assert!(l.has_edge(ladder_top(3), ladder_bottom(3)));
        assert!(l.has_edge(ladder_top(3), ladder_top(4)));
        assert!(!l.has_edge(ladder_top(3), ladder_bottom(4)));
        assert_eq!(l.max_degree(), 3);
    }

    #[test]
    fn p2_squared_is_four_cycle() {
        let p = cartesian_product(&build_path(2), &build_path(2));
        assert_eq!(p.graph.edge_count(), 4);
        assert_eq!(p.graph.degree_sequence(), vec![2, 2, 2, 2]);
    }

    #[test]
    fn encoded_ladder_edge_count() {
        let p = cartesian_product(&build_ladder(13), &build_grid(3, 3));
        assert_eq!(p.graph.edge_count(), 37 * 9 + 26 * 12);
        assert_eq!(p.graph.edge_count(), 645);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Graph::new(3, [(0, 0)]).is_err());
        assert!(Graph::new(3, [(0, 3)]).is_err());
        assert!(Graph::new(3, [(0, 1), (1, 0)]).is_err());
        assert!(Graph::new(3, [(0, 1), (2, 1)]).is_ok());
    }

    #[test]
    fn product_coords_roundtrip() {
        let p = cartesian_product(&build_ladder(3), &build_path(4));
        for v in 0..p.graph.vertex_count() {
            let (i, k) = p.coords(v);
            assert_eq!(p.vertex(i, k), v);
        }
    }
}
