//! Simple connected undirected graphs and the deterministic linear algebra on
//! top of them: weighted spanning-tree sums (Matrix-Tree theorem), effective
//! resistances, diameters and shortest-path trees.
//!
//! Edges are stored in canonical order: every pair is normalized to `i < j`
//! and the list is sorted lexicographically, so an edge's index is stable and
//! is the tie-break used everywhere edges are enumerated.

use std::collections::VecDeque;
use std::ops::Deref;

use thiserror::Error;

use crate::linalg::{Cholesky, DenseMatrix};

/// Largest graph the dense Laplacian solvers accept.
pub const MAX_DENSE_VERTICES: usize = 512;

const PIVOT_REL_TOL: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph needs at least 2 vertices and 1 edge (n = {n}, edges = {edges})")]
    EmptyGraph { n: usize, edges: usize },
    #[error("vertex {vertex} out of range for n = {n}")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(usize, usize),
    #[error("graph is disconnected: vertex {0} unreachable from vertex 0")]
    Disconnected(usize),
    #[error("weight vector has {got} entries, graph has {expected} edges")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("weight {index} is not strictly positive and finite: {value}")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("Laplacian pivot degenerated (weights too close to zero or too spread)")]
    NumericOverflow,
    #[error("Laplacian system is singular")]
    SingularSystem,
    #[error("dense solver limited to {MAX_DENSE_VERTICES} vertices, got {0}")]
    TooLarge(usize),
    #[error("graph is not a tree")]
    NotATree,
}

/// Neighbor entry of an adjacency list: the adjacent vertex and the index of
/// the connecting edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbor {
    pub vertex: usize,
    pub edge: usize,
}

/// Immutable simple connected undirected graph on vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<Neighbor>>,
}

impl Graph {
    /// Validates and canonicalizes a raw edge list.
    pub fn new(n: usize, raw_edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n < 2 || raw_edges.is_empty() {
            return Err(GraphError::EmptyGraph { n, edges: raw_edges.len() });
        }
        let mut edges = Vec::with_capacity(raw_edges.len());
        for &(a, b) in raw_edges {
            for v in [a, b] {
                if v >= n {
                    return Err(GraphError::VertexOutOfRange { vertex: v, n });
                }
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            edges.push((a.min(b), a.max(b)));
        }
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::DuplicateEdge(w[0].0, w[0].1));
        }

        let mut adj = vec![Vec::new(); n];
        for (e, &(i, j)) in edges.iter().enumerate() {
            adj[i].push(Neighbor { vertex: j, edge: e });
            adj[j].push(Neighbor { vertex: i, edge: e });
        }
        for list in &mut adj {
            list.sort_unstable_by_key(|nb| nb.vertex);
        }

        let g = Self { n, edges, adj };
        let dist = g.bfs_distances(0);
        if let Some(v) = dist.iter().position(|d| d.is_none()) {
            return Err(GraphError::Disconnected(v));
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Canonical edge list (`i < j`, lexicographic).
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    /// Neighbors of `v` sorted by vertex id.
    pub fn neighbors(&self, v: usize) -> &[Neighbor] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    /// Index of edge `{i, j}`, if present.
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let list = self.adj.get(i)?;
        list.binary_search_by_key(&j, |nb| nb.vertex)
            .ok()
            .map(|p| list[p].edge)
    }

    pub fn is_tree(&self) -> bool {
        self.edges.len() + 1 == self.n
    }

    /// Edges incident to `v`, in increasing edge-index order.
    pub fn incident_edges(&self, v: usize) -> Vec<usize> {
        let mut es: Vec<usize> = self.adj[v].iter().map(|nb| nb.edge).collect();
        es.sort_unstable();
        es
    }

    /// Weighted vertex sums `w_v = sum_{e ∋ v} w_e`.
    pub fn vertex_sums(&self, w: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for (&(i, j), &x) in self.edges.iter().zip(w) {
            s[i] += x;
            s[j] += x;
        }
        s
    }

    /// Length and positivity check of a per-edge vector.
    pub fn check_weights(&self, w: &[f64]) -> Result<(), GraphError> {
        if w.len() != self.edges.len() {
            return Err(GraphError::DimensionMismatch { expected: self.edges.len(), got: w.len() });
        }
        if let Some((index, &value)) = w.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x > 0.0)) {
            return Err(GraphError::NonPositiveWeight { index, value });
        }
        Ok(())
    }

    /// Weighted Laplacian with the row and column of `ground` removed.
    fn reduced_laplacian(&self, w: &[f64], ground: usize) -> DenseMatrix {
        let m = self.n - 1;
        let idx = |v: usize| if v < ground { v } else { v - 1 };
        let mut lap = DenseMatrix::zeros(m);
        for (&(i, j), &x) in self.edges.iter().zip(w) {
            if i != ground {
                lap.add(idx(i), idx(i), x);
            }
            if j != ground {
                lap.add(idx(j), idx(j), x);
            }
            if i != ground && j != ground {
                lap.add(idx(i), idx(j), -x);
                lap.add(idx(j), idx(i), -x);
            }
        }
        lap
    }

    /// `ln sum_T prod_{e in T} w_e` over all spanning trees `T`, via the
    /// log-determinant of a reduced weighted Laplacian.
    ///
    /// Weights are rescaled by their geometric mean before factorizing, so
    /// uniformly huge or tiny weights do not overflow.
    pub fn spanning_tree_log_sum(&self, w: &[f64]) -> Result<f64, GraphError> {
        self.check_weights(w)?;
        if self.is_tree() {
            // The only spanning tree is the graph itself.
            return Ok(w.iter().map(|x| x.ln()).sum());
        }
        if self.n > MAX_DENSE_VERTICES {
            return Err(GraphError::TooLarge(self.n));
        }
        let log_scale = w.iter().map(|x| x.ln()).sum::<f64>() / w.len() as f64;
        let scale = log_scale.exp();
        let scaled: Vec<f64> = w.iter().map(|x| x / scale).collect();
        let lap = self.reduced_laplacian(&scaled, self.n - 1);
        let chol = Cholesky::new(&lap, PIVOT_REL_TOL).ok_or(GraphError::NumericOverflow)?;
        let out = chol.log_det() + (self.n - 1) as f64 * log_scale;
        if out.is_finite() {
            Ok(out)
        } else {
            Err(GraphError::NumericOverflow)
        }
    }

    /// Same quantity as [`Graph::spanning_tree_log_sum`] by enumerating every
    /// `(n-1)`-edge subset; exact at any weight spread, so it backs the
    /// quadrature oracles. Limited to 20 edges.
    pub fn spanning_tree_log_sum_enumerated(&self, w: &[f64]) -> Result<f64, GraphError> {
        self.check_weights(w)?;
        let m = self.edges.len();
        if m > 20 {
            return Err(GraphError::TooLarge(self.n));
        }
        let logs: Vec<f64> = w.iter().map(|x| x.ln()).collect();
        let mut terms = Vec::new();
        for mask in 0u32..(1 << m) {
            if mask.count_ones() as usize != self.n - 1 {
                continue;
            }
            let mut parent: Vec<usize> = (0..self.n).collect();
            fn find(p: &mut [usize], mut x: usize) -> usize {
                while p[x] != x {
                    p[x] = p[p[x]];
                    x = p[x];
                }
                x
            }
            let mut acyclic = true;
            let mut s = 0.0;
            for (e, &(i, j)) in self.edges.iter().enumerate() {
                if mask & (1 << e) == 0 {
                    continue;
                }
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri == rj {
                    acyclic = false;
                    break;
                }
                parent[ri] = rj;
                s += logs[e];
            }
            if acyclic {
                terms.push(s);
            }
        }
        let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln())
    }

    /// Effective resistance between `i` and `j` with edge conductances `q`.
    pub fn effective_resistance(&self, q: &[f64], i: usize, j: usize) -> Result<f64, GraphError> {
        self.check_weights(q)?;
        for v in [i, j] {
            if v >= self.n {
                return Err(GraphError::VertexOutOfRange { vertex: v, n: self.n });
            }
        }
        if self.n > MAX_DENSE_VERTICES {
            return Err(GraphError::TooLarge(self.n));
        }
        if i == j {
            return Ok(0.0);
        }
        // Ground j, inject unit current at i; the potential at i is R(i <-> j).
        let lap = self.reduced_laplacian(q, j);
        let chol = Cholesky::new(&lap, PIVOT_REL_TOL).ok_or(GraphError::SingularSystem)?;
        let ii = if i < j { i } else { i - 1 };
        let mut b = vec![0.0; self.n - 1];
        b[ii] = 1.0;
        let x = chol.solve(&b);
        Ok(x[ii])
    }

    /// All-pairs effective resistance matrix (row-major `n x n`).
    pub fn resistance_matrix(&self, q: &[f64]) -> Result<Vec<f64>, GraphError> {
        self.check_weights(q)?;
        if self.n > MAX_DENSE_VERTICES {
            return Err(GraphError::TooLarge(self.n));
        }
        let n = self.n;
        let ground = n - 1;
        let lap = self.reduced_laplacian(q, ground);
        let chol = Cholesky::new(&lap, PIVOT_REL_TOL).ok_or(GraphError::SingularSystem)?;
        let green = chol.inverse();
        let g = |a: usize, b: usize| if a == ground || b == ground { 0.0 } else { green.get(a, b) };
        let mut r = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    r[a * n + b] = g(a, a) + g(b, b) - 2.0 * g(a, b);
                }
            }
        }
        Ok(r)
    }

    /// Maximum effective resistance over all vertex pairs.
    pub fn max_effective_resistance(&self, q: &[f64]) -> Result<f64, GraphError> {
        Ok(self.resistance_matrix(q)?.into_iter().fold(0.0, f64::max))
    }

    fn bfs_distances(&self, root: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        dist[root] = Some(0);
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            for nb in &self.adj[u] {
                if dist[nb.vertex].is_none() {
                    dist[nb.vertex] = Some(du + 1);
                    queue.push_back(nb.vertex);
                }
            }
        }
        dist
    }

    /// Hop-count eccentricity of `v`.
    pub fn eccentricity(&self, v: usize) -> usize {
        self.bfs_distances(v).into_iter().map(|d| d.unwrap_or(0)).max().unwrap_or(0)
    }

    pub fn diameter(&self) -> usize {
        (0..self.n).map(|v| self.eccentricity(v)).max().unwrap_or(0)
    }

    /// Breadth-first shortest-path tree rooted at `root`, ties broken by the
    /// canonical neighbor order. On a tree this is the unique orientation of
    /// every edge towards the root.
    pub fn shortest_path_tree(&self, root: usize) -> RootedTree {
        let mut parent = vec![None; self.n];
        let mut depth = vec![0; self.n];
        let mut seen = vec![false; self.n];
        let mut order = Vec::with_capacity(self.n);
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for nb in &self.adj[u] {
                if !seen[nb.vertex] {
                    seen[nb.vertex] = true;
                    parent[nb.vertex] = Some((u, nb.edge));
                    depth[nb.vertex] = depth[u] + 1;
                    queue.push_back(nb.vertex);
                }
            }
        }
        RootedTree { root, parent, depth, order }
    }
}

/// Spanning tree with every edge oriented child -> parent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedTree {
    pub root: usize,
    /// `(parent vertex, edge index in the host graph)`; `None` at the root.
    pub parent: Vec<Option<(usize, usize)>>,
    pub depth: Vec<usize>,
    /// Vertices in breadth-first order; parents precede children.
    pub order: Vec<usize>,
}

impl RootedTree {
    pub fn max_depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// Host-graph edge indices used by the tree.
    pub fn host_edges(&self) -> Vec<usize> {
        let mut es: Vec<usize> = self.parent.iter().flatten().map(|&(_, e)| e).collect();
        es.sort_unstable();
        es
    }

    /// The tree as a standalone [`Graph`] on the same vertex set.
    pub fn to_graph(&self) -> Graph {
        let edges: Vec<(usize, usize)> = self
            .parent
            .iter()
            .enumerate()
            .filter_map(|(v, p)| p.map(|(u, _)| (v, u)))
            .collect();
        Graph::new(self.parent.len(), &edges).expect("a BFS tree of a connected graph is connected")
    }
}

/// Strictly positive finite value per edge, aligned to canonical edge order.
/// Used for initial weights, conductances and Gamma fields alike.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self, GraphError> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x > 0.0)) {
            return Err(GraphError::NonPositiveWeight { index, value });
        }
        Ok(Self(values))
    }

    /// Checks the vector against the edge count of `g` as well.
    pub fn for_graph(g: &Graph, values: Vec<f64>) -> Result<Self, GraphError> {
        if values.len() != g.num_edges() {
            return Err(GraphError::DimensionMismatch { expected: g.num_edges(), got: values.len() });
        }
        Self::new(values)
    }

    pub fn constant(len: usize, value: f64) -> Result<Self, GraphError> {
        Self::new(vec![value; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Deref for WeightVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Common small graphs, handy in tests and the CLI self-test.
pub mod families {
    use super::Graph;

    pub fn path(n: usize) -> Graph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        Graph::new(n, &edges).unwrap()
    }

    pub fn cycle(n: usize) -> Graph {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::new(n, &edges).unwrap()
    }

    pub fn complete(n: usize) -> Graph {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push((i, j));
            }
        }
        Graph::new(n, &edges).unwrap()
    }

    pub fn star(leaves: usize) -> Graph {
        let edges: Vec<_> = (1..=leaves).map(|i| (0, i)).collect();
        Graph::new(leaves + 1, &edges).unwrap()
    }

    pub fn triangle() -> Graph {
        complete(3)
    }
}

#[cfg(test)]
mod tests {
    use super::families::*;
    use super::*;

    #[test]
    fn triangle_is_valid() {
        let g = Graph::new(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(g.num_edges(), 3);
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 2)]);
        assert_eq!(g.edge_index(2, 1), Some(2));
        assert_eq!(g.edge_index(0, 0), None);
    }

    #[test]
    fn construction_errors() {
        assert_eq!(Graph::new(4, &[(0, 1), (2, 3)]), Err(GraphError::Disconnected(2)));
        assert_eq!(Graph::new(2, &[(0, 0)]), Err(GraphError::SelfLoop(0)));
        assert_eq!(Graph::new(3, &[(0, 1), (1, 0), (1, 2)]), Err(GraphError::DuplicateEdge(0, 1)));
        assert!(matches!(Graph::new(1, &[]), Err(GraphError::EmptyGraph { .. })));
        assert!(matches!(Graph::new(2, &[(0, 5)]), Err(GraphError::VertexOutOfRange { vertex: 5, .. })));
    }

    #[test]
    fn tree_sums() {
        let t = triangle();
        assert!((t.spanning_tree_log_sum(&[1.0; 3]).unwrap() - 3f64.ln()).abs() < 1e-14);
        // w_{01} = 2: trees {01,02}, {01,12}, {02,12} weigh 2, 2, 1.
        assert!((t.spanning_tree_log_sum(&[2.0, 1.0, 1.0]).unwrap() - 5f64.ln()).abs() < 1e-14);
        let p = path(3);
        let got = p.spanning_tree_log_sum(&[0.3, 7.0]).unwrap();
        assert!((got - (0.3f64 * 7.0).ln()).abs() < 1e-13);
    }

    #[test]
    fn tree_sum_survives_extreme_scale() {
        let t = triangle();
        let got = t.spanning_tree_log_sum(&[1e200, 1e200, 1e200]).unwrap();
        assert!((got - (3f64.ln() + 400.0 * 10f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn resistances() {
        let p = path(3);
        assert!((p.effective_resistance(&[1.0, 1.0], 0, 2).unwrap() - 2.0).abs() < 1e-12);
        let t = triangle();
        assert!((t.effective_resistance(&[1.0; 3], 0, 1).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let c = cycle(4);
        assert!((c.effective_resistance(&[1.0; 4], 0, 2).unwrap() - 1.0).abs() < 1e-12);

        assert!((p.max_effective_resistance(&[1.0, 1.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!((t.max_effective_resistance(&[1.0; 3]).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let long = path(11);
        assert!((long.max_effective_resistance(&[1.0; 10]).unwrap() - 10.0).abs() < 1e-10);
    }

    #[test]
    fn diameters_and_trees() {
        assert_eq!(triangle().diameter(), 1);
        assert_eq!(cycle(4).diameter(), 2);
        let p = path(4);
        assert_eq!(p.diameter(), 3);
        let spt = p.shortest_path_tree(0);
        assert_eq!(spt.to_graph(), p);
        assert_eq!(spt.max_depth(), 3);
        assert_eq!(spt.parent[3], Some((2, 2)));
    }

    #[test]
    fn weight_vector_validation() {
        assert!(WeightVector::new(vec![1.0, 0.0]).is_err());
        assert!(WeightVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(WeightVector::for_graph(&triangle(), vec![1.0; 2]).is_err());
        assert_eq!(WeightVector::new(vec![0.5, 2.0]).unwrap().max(), 2.0);
    }
}
