//! Weighted undirected graphs and the matrices built from them.
//!
//! Edges are stored once, as `(i, j, a_ij)` with `i < j`, sorted
//! lexicographically. That order fixes the column order of the incidence
//! matrix, and every column carries `+sqrt(a_ij)` at the smaller endpoint
//! and `-sqrt(a_ij)` at the larger one.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::Matrix;

/// Threshold on `lambda_2` used when the spectral and combinatorial views of
/// connectivity are compared.
pub const CONNECTIVITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Neighbor {
    vertex: usize,
    weight: f64,
    sqrt_weight: f64,
}

/// Undirected graph with strictly positive edge weights and no self-loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<Neighbor>>,
}

/// JSON shape: `{"n": 3, "edges": [[0, 1, 1.0], [1, 2, 0.5]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawGraph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl TryFrom<RawGraph> for WeightedGraph {
    type Error = Error;

    fn try_from(raw: RawGraph) -> Result<Self> {
        WeightedGraph::new(raw.n, raw.edges)
    }
}

impl From<WeightedGraph> for RawGraph {
    fn from(g: WeightedGraph) -> Self {
        RawGraph {
            n: g.n,
            edges: g.edges.iter().map(|e| (e.i, e.j, e.weight)).collect(),
        }
    }
}

/// The Laplacian `Q = Delta - A` together with the incidence factor `D`,
/// `Q = D D^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianView {
    pub q: Matrix,
    pub d: Matrix,
}

impl WeightedGraph {
    /// Builds a graph from `(i, j, weight)` triples. Pairs may be given in
    /// either orientation; they are normalised to `i < j` and sorted.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("vertex count must be at least 1".into()));
        }
        let mut list = Vec::new();
        for (a, b, w) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) references a vertex outside 0..{n}"
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {a}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) has non-positive or non-finite weight {w}"
                )));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            list.push(Edge { i, j, weight: w });
        }
        list.sort_by_key(|e| (e.i, e.j));
        if let Some(w) = list.windows(2).find(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j)) {
            return Err(Error::InvalidGraph(format!(
                "duplicate edge ({}, {})",
                w[0].i, w[0].j
            )));
        }
        let mut adjacency = vec![Vec::new(); n];
        for e in &list {
            let s = e.weight.sqrt();
            adjacency[e.i].push(Neighbor {
                vertex: e.j,
                weight: e.weight,
                sqrt_weight: s,
            });
            adjacency[e.j].push(Neighbor {
                vertex: e.i,
                weight: e.weight,
                sqrt_weight: s,
            });
        }
        Ok(Self {
            n,
            edges: list,
            adjacency,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Neighbours of `i` with their edge weights.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.adjacency[i].iter().map(|nb| (nb.vertex, nb.weight))
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.adjacency[i].iter().map(|nb| nb.weight).sum()
    }

    pub fn adjacency_matrix(&self) -> Matrix {
        let mut a = Matrix::zeros(self.n, self.n);
        for e in &self.edges {
            a[(e.i, e.j)] = e.weight;
            a[(e.j, e.i)] = e.weight;
        }
        a
    }

    pub fn laplacian(&self) -> LaplacianView {
        let mut q = Matrix::zeros(self.n, self.n);
        let mut d = Matrix::zeros(self.n, self.edges.len());
        for (col, e) in self.edges.iter().enumerate() {
            q[(e.i, e.i)] += e.weight;
            q[(e.j, e.j)] += e.weight;
            q[(e.i, e.j)] -= e.weight;
            q[(e.j, e.i)] -= e.weight;
            let s = e.weight.sqrt();
            d[(e.i, col)] = s;
            d[(e.j, col)] = -s;
        }
        LaplacianView { q, d }
    }

    /// Full Laplacian spectrum, ascending.
    pub fn laplacian_spectrum(&self) -> Vec<f64> {
        self.laplacian().q.symmetric_eigenvalues()
    }

    /// Second-smallest Laplacian eigenvalue. Clamped at zero, since the
    /// eigensolver may return `-1e-16` for a disconnected graph.
    pub fn algebraic_connectivity(&self) -> Result<f64> {
        if self.n < 2 {
            return Err(Error::InvalidArgument(
                "algebraic connectivity needs at least 2 vertices".into(),
            ));
        }
        Ok(self.laplacian_spectrum()[1].max(0.0))
    }

    /// Breadth-first reachability from vertex 0.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for nb in &self.adjacency[v] {
                if !seen[nb.vertex] {
                    seen[nb.vertex] = true;
                    count += 1;
                    queue.push_back(nb.vertex);
                }
            }
        }
        count == self.n
    }

    /// `e_i = sum_j a_ij (x_j - x_i)`, i.e. `e = -Q x`.
    pub fn neighbor_errors(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        let mut e = vec![0.0; self.n];
        self.neighbor_errors_into(x, &mut e);
        Ok(e)
    }

    pub(crate) fn neighbor_errors_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = self.adjacency[i]
                .iter()
                .map(|nb| nb.weight * (x[nb.vertex] - x[i]))
                .sum();
        }
    }

    /// One entry per edge in incidence-column order:
    /// `sqrt(a_ij) (x_j - x_i)` for the edge `(i, j)`, `i < j`. This is
    /// `-D^T x`.
    pub fn edge_errors(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        Ok(self
            .edges
            .iter()
            .map(|e| e.weight.sqrt() * (x[e.j] - x[e.i]))
            .collect())
    }

    /// Iterates `(i, j, sqrt(a_ij))` over edges without allocating.
    pub(crate) fn sqrt_weighted_edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(i, nbs)| {
            nbs.iter()
                .filter(move |nb| nb.vertex > i)
                .map(move |nb| (i, nb.vertex, nb.sqrt_weight))
        })
    }

    /// Same topology with every weight multiplied by `factor`. The Laplacian,
    /// and hence every eigenvalue, scales by the same factor.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.n,
            self.edges.iter().map(|e| (e.i, e.j, e.weight * factor)),
        )
    }

    /// Rescales the weights so that the algebraic connectivity equals
    /// `target`.
    pub fn scaled_to_connectivity(&self, target: f64) -> Result<Self> {
        if !(target.is_finite() && target > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "target connectivity must be positive, got {target}"
            )));
        }
        if !self.is_connected() {
            return Err(Error::Disconnected { index: 0 });
        }
        let current = self.algebraic_connectivity()?;
        self.scaled(target / current)
    }

    pub fn path(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|j| (j - 1, j, 1.0)))
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGraph("a cycle needs at least 3 vertices".into()));
        }
        Self::new(n, (1..n).map(|j| (j - 1, j, 1.0)).chain([(0, n - 1, 1.0)]))
    }

    /// Star on `n` vertices with vertex 0 as the hub.
    pub fn star(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|j| (0, j, 1.0)))
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::new(
            n,
            (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j, 1.0))),
        )
    }

    /// Random connected graph with unit weights: a random spanning tree
    /// (each vertex, in shuffled order, attaches to an earlier one) plus
    /// every remaining pair independently with probability `extra_edge_prob`.
    pub fn random_connected<R: Rng + ?Sized>(
        n: usize,
        extra_edge_prob: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("vertex count must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&extra_edge_prob) {
            return Err(Error::InvalidArgument(format!(
                "edge probability {extra_edge_prob} outside [0, 1]"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut present = vec![vec![false; n]; n];
        let mut edges = Vec::new();
        for idx in 1..n {
            let parent = order[rng.gen_range(0..idx)];
            let child = order[idx];
            present[parent][child] = true;
            present[child][parent] = true;
            edges.push((parent, child, 1.0));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if !present[i][j] && rng.gen_bool(extra_edge_prob) {
                    edges.push((i, j, 1.0));
                }
            }
        }
        Self::new(n, edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn triangle() -> WeightedGraph {
        WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 4.0)]).unwrap()
    }

    #[test]
    fn single_edge_laplacian() {
        let g = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        let lap = g.laplacian();
        assert_eq!(lap.q, Matrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]));
        assert_eq!(lap.d, Matrix::from_rows(&[vec![1.0], vec![-1.0]]));
    }

    #[test]
    fn edgeless_laplacian_is_zero() {
        let g = WeightedGraph::new(3, []).unwrap();
        assert_eq!(g.laplacian().q, Matrix::zeros(3, 3));
        assert!(!g.is_connected());
        assert_eq!(g.algebraic_connectivity().unwrap(), 0.0);
    }

    #[test]
    fn triangle_factorization() {
        let lap = triangle().laplacian();
        let ddt = lap.d.matmul(&lap.d.transpose());
        // Hand-expanded Laplacian of the {1, 1, 4} triangle.
        let expected = Matrix::from_rows(&[
            vec![5.0, -1.0, -4.0],
            vec![-1.0, 2.0, -1.0],
            vec![-4.0, -1.0, 5.0],
        ]);
        assert!(lap.q.max_abs_diff(&expected) < 1e-12);
        assert!(ddt.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn rejects_malformed_edges() {
        assert!(matches!(
            WeightedGraph::new(3, [(1, 1, 1.0)]),
            Err(Error::InvalidGraph(_))
        ));
        assert!(WeightedGraph::new(3, [(0, 1, 1.0), (1, 0, 2.0)]).is_err());
        assert!(WeightedGraph::new(3, [(0, 1, 0.0)]).is_err());
        assert!(WeightedGraph::new(3, [(0, 1, -1.0)]).is_err());
        assert!(WeightedGraph::new(3, [(0, 1, f64::NAN)]).is_err());
        assert!(WeightedGraph::new(3, [(0, 3, 1.0)]).is_err());
        assert!(WeightedGraph::new(0, []).is_err());
    }

    #[test]
    fn edges_are_normalised_and_sorted() {
        let g = WeightedGraph::new(4, [(3, 1, 1.0), (2, 0, 2.0), (0, 1, 3.0)]).unwrap();
        let pairs: Vec<_> = g.edges().iter().map(|e| (e.i, e.j)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 3)]);
    }

    #[test]
    fn closed_form_connectivity() {
        let p10 = WeightedGraph::path(10).unwrap().algebraic_connectivity().unwrap();
        assert!((p10 - (2.0 - 2.0 * (PI / 10.0).cos())).abs() < 1e-12);
        assert!((p10 - 0.09789).abs() < 1e-5);
        let s7 = WeightedGraph::star(7).unwrap().algebraic_connectivity().unwrap();
        assert!((s7 - 1.0).abs() < 1e-12);
        let c8 = WeightedGraph::cycle(8).unwrap().algebraic_connectivity().unwrap();
        assert!((c8 - 0.58579).abs() < 1e-5);
    }

    #[test]
    fn connectivity_needs_two_vertices() {
        let g = WeightedGraph::new(1, []).unwrap();
        assert!(g.algebraic_connectivity().is_err());
        assert!(g.is_connected());
    }

    #[test]
    fn connectivity_by_traversal() {
        assert!(WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap().is_connected());
        let two_parts = WeightedGraph::new(4, [(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert!(!two_parts.is_connected());
        assert!(two_parts.algebraic_connectivity().unwrap() < CONNECTIVITY_TOL);
        let p10 = WeightedGraph::path(10).unwrap();
        let expected = 2.0 - 2.0 * (std::f64::consts::PI / 10.0).cos();
        assert!(p10.is_connected());
        assert!((p10.algebraic_connectivity().unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.09789).abs() < 1e-5);
    }

    #[test]
    fn error_signals_by_hand() {
        let g = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        assert_eq!(g.neighbor_errors(&[1.0, 0.0]).unwrap(), vec![-1.0, 1.0]);
        assert_eq!(g.neighbor_errors(&[2.5, 2.5]).unwrap(), vec![0.0, 0.0]);
        let g4 = WeightedGraph::new(2, [(0, 1, 4.0)]).unwrap();
        assert_eq!(g4.edge_errors(&[0.0, 1.0]).unwrap(), vec![2.0]);
        assert_eq!(g4.edge_errors(&[7.0, 7.0]).unwrap(), vec![0.0]);
        assert!(matches!(
            g.neighbor_errors(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
        assert!(g.edge_errors(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn scaling_moves_connectivity_linearly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = WeightedGraph::random_connected(10, 0.2, &mut rng).unwrap();
        let l = g.algebraic_connectivity().unwrap();
        let g3 = g.scaled(3.0).unwrap();
        assert!((g3.algebraic_connectivity().unwrap() - 3.0 * l).abs() < 1e-12);
        let calibrated = g.scaled_to_connectivity(0.27935).unwrap();
        assert!((calibrated.algebraic_connectivity().unwrap() - 0.27935).abs() < 1e-12);
    }

    #[test]
    fn json_shape() {
        let g: WeightedGraph =
            serde_json::from_str(r#"{"n": 3, "edges": [[0, 1, 1.0], [2, 1, 0.5]]}"#).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(
            serde_json::to_string(&g).unwrap(),
            r#"{"n":3,"edges":[[0,1,1.0],[1,2,0.5]]}"#
        );
        assert!(serde_json::from_str::<WeightedGraph>(r#"{"n": 2, "edges": [[0, 0, 1.0]]}"#)
            .is_err());
    }
}
