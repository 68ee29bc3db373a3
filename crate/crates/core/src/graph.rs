//! Weighted undirected graphs with a fixed edge orientation.
//!
//! Every edge `k` is stored as `(src, dst)` with weight `w_k > 0`. The
//! oriented incidence matrix `D` has `+1` at `src` and `-1` at `dst` in
//! column `k`; `D1` keeps the `+1` entries (sources) and `D2 = D1 - D` the
//! sinks. The gradient is `W^{1/2} D^T` and the divergence its adjoint
//! `D W^{1/2}`, so `div(grad(x)) = D W D^T x` is the (positive semidefinite)
//! graph Laplacian.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    weights: Vec<f64>,
    sqrt_w: Vec<f64>,
}

impl Graph {
    /// Builds a graph from `(i, j, w)` triples, inferring the node count from
    /// the largest index. Edges are canonicalized to `src = min(i, j)` and
    /// sorted lexicographically.
    pub fn from_edges(edges: &[(usize, usize, f64)]) -> Result<Self> {
        let n = edges.iter().map(|&(i, j, _)| i.max(j) + 1).max().unwrap_or(1);
        Self::new(n, edges)
    }

    /// Like [`Graph::from_edges`] with an explicit node count, which allows a
    /// single isolated node (`n = 1`, no edges).
    pub fn new(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut canon: Vec<(usize, usize, f64)> = edges.iter().map(|&(i, j, w)| (i.min(j), i.max(j), w)).collect();
        canon.sort_by_key(|a| (a.0, a.1));
        Self::with_orientation(n, &canon)
    }

    /// Keeps the given edge orientation and order. Validation is identical to
    /// [`Graph::new`].
    pub fn with_orientation(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("graph needs at least one node".into()));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        for &(i, j, w) in edges {
            for idx in [i, j] {
                if idx >= n {
                    return Err(Error::NodeOutOfRange { index: idx, n });
                }
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::NonpositiveWeight {
                    src: i,
                    dst: j,
                    weight: w,
                });
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::DuplicateEdge(i.min(j), i.max(j)));
            }
        }
        let components = count_components(n, edges.iter().map(|&(i, j, _)| (i, j)));
        if components != 1 {
            return Err(Error::DisconnectedGraph { components });
        }
        Ok(Graph {
            n,
            edges: edges.iter().map(|&(i, j, _)| (i, j)).collect(),
            weights: edges.iter().map(|e| e.2).collect(),
            sqrt_w: edges.iter().map(|e| e.2.sqrt()).collect(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sqrt_weights(&self) -> &[f64] {
        &self.sqrt_w
    }

    /// `(src, dst, w)` triples in stored order.
    pub fn edge_list(&self) -> Vec<(usize, usize, f64)> {
        self.edges
            .iter()
            .zip(&self.weights)
            .map(|(&(i, j), &w)| (i, j, w))
            .collect()
    }

    /// Returns a copy with the orientation of the listed edges reversed.
    pub fn reoriented(&self, flip: &[usize]) -> Result<Self> {
        let mut edges = self.edge_list();
        for &k in flip {
            check_index(k, edges.len())?;
            let (i, j, w) = edges[k];
            edges[k] = (j, i, w);
        }
        Self::with_orientation(self.n, &edges)
    }

    /// `∇x = W^{1/2} D^T x`: entry `k` is `sqrt(w_k) (x_src - x_dst)`.
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        Ok(self
            .edges
            .iter()
            .zip(&self.sqrt_w)
            .map(|(&(i, j), &s)| s * (x[i] - x[j]))
            .collect())
    }

    /// `∇*y = D W^{1/2} y`, the adjoint of [`Graph::grad`].
    pub fn div(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.edges.len(), y.len())?;
        let mut out = vec![0.0; self.n];
        for ((&(i, j), &s), &v) in self.edges.iter().zip(&self.sqrt_w).zip(y) {
            out[i] += s * v;
            out[j] -= s * v;
        }
        Ok(out)
    }

    /// `D W D^T x`.
    pub fn laplacian(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        let mut out = vec![0.0; self.n];
        for (&(i, j), &w) in self.edges.iter().zip(&self.weights) {
            let d = w * (x[i] - x[j]);
            out[i] += d;
            out[j] -= d;
        }
        Ok(out)
    }

    /// `D1^T rho`: the mass at the source of each edge.
    pub fn source_mass(&self, rho: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, rho.len())?;
        Ok(self.edges.iter().map(|&(i, _)| rho[i]).collect())
    }

    /// `D2^T rho`: the mass at the sink of each edge.
    pub fn sink_mass(&self, rho: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, rho.len())?;
        Ok(self.edges.iter().map(|&(_, j)| rho[j]).collect())
    }

    /// Dense `n x m` incidence matrix, row-major. Intended for small oracle
    /// checks only.
    pub fn incidence_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.edges.len()]; self.n];
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            d[i][k] = 1.0;
            d[j][k] = -1.0;
        }
        d
    }

    /// `max_i sum_k |D|_{ik} w_k`, the weighted degree bound.
    pub fn max_weighted_degree(&self) -> f64 {
        let mut deg = vec![0.0; self.n];
        for (&(i, j), &w) in self.edges.iter().zip(&self.weights) {
            deg[i] += w;
            deg[j] += w;
        }
        deg.into_iter().fold(0.0, f64::max)
    }

    /// One explicit Euler step of the heat equation `rho' = -D W D^T rho`.
    /// The step must satisfy `h <= 1 / (2 max_i sum_k |D|_{ik} w_k)`.
    pub fn heat_step(&self, rho: &[f64], h: f64) -> Result<Vec<f64>> {
        check_len(self.n, rho.len())?;
        let deg = self.max_weighted_degree();
        let bound = if deg > 0.0 { 1.0 / (2.0 * deg) } else { f64::INFINITY };
        if !(h > 0.0) || h > bound {
            return Err(Error::StepTooLarge { h, bound });
        }
        let lap = self.laplacian(rho)?;
        Ok(rho.iter().zip(lap).map(|(r, l)| r - h * l).collect())
    }

    /// Reads a UTF-8 TSV edge list (`i<TAB>j<TAB>w`, 0-based, `#` comments).
    pub fn read_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let edges = parse_tsv(&text).map_err(|(line, msg)| Error::parse(path, line, msg))?;
        Self::from_edges(&edges)
    }

    /// Writes the edge list in canonical sorted order.
    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(self.to_tsv().as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn to_tsv(&self) -> String {
        let mut edges: Vec<_> = self
            .edge_list()
            .into_iter()
            .map(|(i, j, w)| (i.min(j), i.max(j), w))
            .collect();
        edges.sort_by_key(|a| (a.0, a.1));
        let mut out = String::new();
        for (i, j, w) in edges {
            out.push_str(&format!("{i}\t{j}\t{w}\n"));
        }
        out
    }
}

fn check_index(k: usize, len: usize) -> Result<()> {
    if k < len {
        Ok(())
    } else {
        Err(Error::NodeOutOfRange { index: k, n: len })
    }
}

/// Weighted edges, or the failing line number and a message.
type ParsedEdges = std::result::Result<Vec<(usize, usize, f64)>, (usize, String)>;

pub(crate) fn parse_tsv(text: &str) -> ParsedEdges {
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 3 {
            return Err((
                lineno + 1,
                format!("expected 3 tab-separated fields, got {}", fields.len()),
            ));
        }
        let i = fields[0]
            .parse::<usize>()
            .map_err(|e| (lineno + 1, format!("bad source id: {e}")))?;
        let j = fields[1]
            .parse::<usize>()
            .map_err(|e| (lineno + 1, format!("bad target id: {e}")))?;
        let w = fields[2]
            .parse::<f64>()
            .map_err(|e| (lineno + 1, format!("bad weight: {e}")))?;
        edges.push((i, j, w));
    }
    Ok(edges)
}

fn count_components(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = n;
    for (i, j) in edges {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a] = b;
            components -= 1;
        }
    }
    components
}

/// Nearest-neighbour lattice with spacing `h`; every edge has weight `1/h^2`
/// so that the gradient is a first-order difference quotient. Nodes are
/// numbered row-major (last axis fastest).
pub fn grid_graph(shape: &[usize], h: f64) -> Result<Graph> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::EmptyShape);
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "grid spacing must be positive, got {h}"
        )));
    }
    let n: usize = shape.iter().product();
    let w = 1.0 / (h * h);
    let mut strides = vec![1usize; shape.len()];
    for a in (0..shape.len().saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * shape[a + 1];
    }
    let mut edges = Vec::new();
    for idx in 0..n {
        for (axis, &len) in shape.iter().enumerate() {
            let coord = (idx / strides[axis]) % len;
            if coord + 1 < len {
                edges.push((idx, idx + strides[axis], w));
            }
        }
    }
    Graph::new(n, &edges)
}

pub fn path_graph(n: usize, w: f64) -> Result<Graph> {
    let edges: Vec<_> = (1..n).map(|i| (i - 1, i, w)).collect();
    Graph::new(n, &edges)
}

pub fn complete_graph(n: usize, w: f64) -> Result<Graph> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.push((i, j, w));
        }
    }
    Graph::new(n, &edges)
}

/// `channels` copies of a spatial graph, where copies of the same spatial
/// node are linked through a mutation graph on the channels. Composite node
/// `(channel, node)` has index `channel * n + node`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredGraph {
    spatial: Graph,
    mutation: Graph,
    channels: usize,
}

impl LayeredGraph {
    pub fn new(spatial: Graph, mutation: Graph, channels: usize) -> Result<Self> {
        if mutation.node_count() != channels {
            return Err(Error::ChannelCountMismatch {
                expected: channels,
                got: mutation.node_count(),
            });
        }
        Ok(LayeredGraph {
            spatial,
            mutation,
            channels,
        })
    }

    /// Layered product with the complete unit-weight mutation graph.
    pub fn with_complete_mutation(spatial: Graph, channels: usize) -> Result<Self> {
        let mutation = complete_graph(channels, 1.0)?;
        Self::new(spatial, mutation, channels)
    }

    pub fn spatial(&self) -> &Graph {
        &self.spatial
    }

    pub fn mutation(&self) -> &Graph {
        &self.mutation
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn spatial_nodes(&self) -> usize {
        self.spatial.node_count()
    }

    pub fn node_count(&self) -> usize {
        self.channels * self.spatial.node_count()
    }

    pub fn index(&self, channel: usize, node: usize) -> usize {
        channel * self.spatial.node_count() + node
    }

    pub fn spatial_edge_count(&self) -> usize {
        self.channels * self.spatial.edge_count()
    }

    pub fn mutation_edge_count(&self) -> usize {
        self.spatial.node_count() * self.mutation.edge_count()
    }

    /// Spatial edges of every layer, ordered by channel then spatial edge.
    pub fn spatial_edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.spatial.node_count();
        let mut out = Vec::with_capacity(self.spatial_edge_count());
        for c in 0..self.channels {
            for (i, j, w) in self.spatial.edge_list() {
                out.push((c * n + i, c * n + j, w));
            }
        }
        out
    }

    /// Mutation edges at every spatial node, ordered by node then mutation
    /// edge.
    pub fn mutation_edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.spatial.node_count();
        let mut out = Vec::with_capacity(self.mutation_edge_count());
        for node in 0..n {
            for (a, b, w) in self.mutation.edge_list() {
                out.push((a * n + node, b * n + node, w));
            }
        }
        out
    }

    pub fn grad_spatial(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.node_count(), x.len())?;
        Ok(grad_edges(&self.spatial_edges(), x))
    }

    pub fn div_spatial(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.spatial_edge_count(), y.len())?;
        Ok(div_edges(&self.spatial_edges(), y, self.node_count()))
    }

    pub fn grad_mutation(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.node_count(), x.len())?;
        Ok(grad_edges(&self.mutation_edges(), x))
    }

    pub fn div_mutation(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.mutation_edge_count(), y.len())?;
        Ok(div_edges(&self.mutation_edges(), y, self.node_count()))
    }

    /// The product as a single scalar graph over the composite nodes.
    pub fn to_graph(&self) -> Result<Graph> {
        let mut edges = self.spatial_edges();
        edges.extend(self.mutation_edges());
        Graph::new(self.node_count(), &edges)
    }

    /// `true` when composite edge `(a, b)` links two channels of one node.
    pub fn is_mutation_edge(&self, a: usize, b: usize) -> bool {
        let n = self.spatial.node_count();
        a != b && a % n == b % n
    }
}

fn grad_edges(edges: &[(usize, usize, f64)], x: &[f64]) -> Vec<f64> {
    edges.iter().map(|&(i, j, w)| w.sqrt() * (x[i] - x[j])).collect()
}

fn div_edges(edges: &[(usize, usize, f64)], y: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (&(i, j, w), &v) in edges.iter().zip(y) {
        let s = w.sqrt() * v;
        out[i] += s;
        out[j] -= s;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn k2(w: f64) -> Graph {
        Graph::from_edges(&[(0, 1, w)]).unwrap()
    }

    #[test]
    fn single_edge_incidence() {
        let g = k2(1.0);
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.incidence_dense(), vec![vec![1.0], vec![-1.0]]);
    }

    #[test]
    fn canonical_orientation_and_order() {
        let g = Graph::from_edges(&[(2, 1, 1.0), (1, 0, 2.0)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.weights(), &[2.0, 1.0]);
        let d = g.incidence_dense();
        assert_eq!(d.len(), 3);
        assert_eq!(d[0].len(), 2);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            Graph::from_edges(&[(0, 1, 1.0), (2, 3, 1.0)]),
            Err(Error::DisconnectedGraph { components: 2 })
        ));
        assert!(matches!(Graph::from_edges(&[(0, 0, 1.0)]), Err(Error::SelfLoop(0))));
        assert!(matches!(
            Graph::from_edges(&[(0, 1, 0.0)]),
            Err(Error::NonpositiveWeight { .. })
        ));
        assert!(matches!(
            Graph::from_edges(&[(0, 1, 1.0), (1, 0, 2.0)]),
            Err(Error::DuplicateEdge(0, 1))
        ));
        assert!(matches!(
            Graph::new(2, &[(0, 2, 1.0)]),
            Err(Error::NodeOutOfRange { index: 2, n: 2 })
        ));
    }

    #[test]
    fn grad_examples() {
        assert_eq!(k2(4.0).grad(&[3.0, 1.0]).unwrap(), vec![4.0]);
        let p = path_graph(3, 1.0).unwrap();
        assert_eq!(p.grad(&[0.0, 1.0, 3.0]).unwrap(), vec![-1.0, -2.0]);
        assert_eq!(p.grad(&[2.5; 3]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(p.grad(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn div_examples() {
        assert_eq!(k2(1.0).div(&[1.0]).unwrap(), vec![1.0, -1.0]);
        assert!(matches!(k2(1.0).div(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn heat_step_examples() {
        let g = k2(1.0);
        let next = g.heat_step(&[1.0, 0.0], 0.1).unwrap();
        assert_abs_diff_eq!(next[0], 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(next[1], 0.1, epsilon = 1e-15);
        let uniform = path_graph(4, 1.0).unwrap().heat_step(&[0.25; 4], 0.2).unwrap();
        assert_eq!(uniform, vec![0.25; 4]);
        assert!(matches!(g.heat_step(&[1.0, 0.0], 0.6), Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn heat_flow_matches_closed_form() {
        // rho_0(t) = (1 + e^{-2t}) / 2 for K2 with unit weight
        let g = k2(1.0);
        let h = 2f64.powi(-10);
        let mut rho = vec![1.0, 0.0];
        for _ in 0..1024 {
            rho = g.heat_step(&rho, h).unwrap();
        }
        let exact = 0.5 * (1.0 + (-2.0f64).exp());
        assert!((rho[0] - exact).abs() < 1e-3);
        assert!((rho[1] - (1.0 - exact)).abs() < 1e-3);
        assert_abs_diff_eq!(rho[0] + rho[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn grid_counts() {
        let g = grid_graph(&[3], 0.5).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert!(g.weights().iter().all(|&w| w == 4.0));
        assert_eq!(grid_graph(&[2, 2], 1.0).unwrap().edge_count(), 4);
        let g = grid_graph(&[4, 3], 1.0).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (12, 17));
        assert!(matches!(grid_graph(&[], 1.0), Err(Error::EmptyShape)));
        assert!(matches!(grid_graph(&[3, 0], 1.0), Err(Error::EmptyShape)));
        assert_eq!(grid_graph(&[1], 1.0).unwrap().node_count(), 1);
    }

    #[test]
    fn grid_recovers_unit_slope() {
        let h = 0.125;
        let g = grid_graph(&[9], h).unwrap();
        let x: Vec<f64> = (0..9).map(|i| i as f64 * h).collect();
        for v in g.grad(&x).unwrap() {
            // src < dst, so the difference is x_i - x_{i+1} = -h, scaled by 1/h
            assert_abs_diff_eq!(v, -1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn layered_counts() {
        let k2 = k2(1.0);
        let l = LayeredGraph::new(k2.clone(), k2.clone(), 2).unwrap();
        assert_eq!(l.node_count(), 4);
        assert_eq!(l.spatial_edge_count(), 2);
        assert_eq!(l.mutation_edge_count(), 2);

        let single = LayeredGraph::new(k2.clone(), Graph::new(1, &[]).unwrap(), 1).unwrap();
        assert_eq!(single.mutation_edge_count(), 0);
        assert_eq!(single.to_graph().unwrap(), k2);

        let l = LayeredGraph::new(path_graph(3, 1.0).unwrap(), complete_graph(3, 1.0).unwrap(), 3).unwrap();
        assert_eq!(l.node_count(), 9);
        assert_eq!(l.spatial_edge_count(), 6);
        assert_eq!(l.mutation_edge_count(), 9);
        assert_eq!(l.index(2, 1), 7);

        assert!(matches!(
            LayeredGraph::new(k2.clone(), complete_graph(3, 1.0).unwrap(), 2),
            Err(Error::ChannelCountMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn tsv_round_trip() {
        let g = Graph::from_edges(&[(0, 1, 0.1), (1, 2, 1.0 / 3.0), (0, 2, 7.25)]).unwrap();
        let text = format!("# comment\n{}", g.to_tsv());
        let edges = parse_tsv(&text).unwrap();
        assert_eq!(Graph::from_edges(&edges).unwrap(), g);
        assert!(parse_tsv("0\t1\n").is_err());
    }

    fn random_graph() -> impl Strategy<Value = Graph> {
        (2usize..=8)
            .prop_flat_map(|n| {
                let pairs = n * (n - 1) / 2;
                (
                    Just(n),
                    proptest::collection::vec(0.1f64..5.0, n - 1),
                    proptest::collection::vec((any::<bool>(), 0.1f64..5.0), pairs),
                )
            })
            .prop_map(|(n, tree_w, extra)| {
                // random spanning path plus a random subset of the other pairs
                let mut edges: Vec<(usize, usize, f64)> = (1..n).map(|i| (i - 1, i, tree_w[i - 1])).collect();
                let mut k = 0;
                for i in 0..n {
                    for j in i + 1..n {
                        if j != i + 1 && extra[k].0 {
                            edges.push((i, j, extra[k].1));
                        }
                        k += 1;
                    }
                }
                Graph::from_edges(&edges).unwrap()
            })
    }

    proptest! {
        #[test]
        fn adjoint_identity(g in random_graph(), seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..g.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..g.edge_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let gx = g.grad(&x).unwrap();
            let dy = g.div(&y).unwrap();
            let lhs: f64 = gx.iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(&dy).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
            prop_assert!(dy.iter().sum::<f64>().abs() <= 1e-12);

            // div(grad x) = D W D^T x, against the dense incidence matrix
            let lap = g.div(&gx).unwrap();
            let d = g.incidence_dense();
            for i in 0..g.node_count() {
                let mut v = 0.0;
                for k in 0..g.edge_count() {
                    let dtx: f64 = (0..g.node_count()).map(|l| d[l][k] * x[l]).sum();
                    v += d[i][k] * g.weights()[k] * dtx;
                }
                prop_assert!((lap[i] - v).abs() <= 1e-12);
            }
        }

        #[test]
        fn layered_blocks_are_adjoint(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let l = LayeredGraph::new(
                path_graph(3, 2.0).unwrap(),
                complete_graph(3, 0.5).unwrap(),
                3,
            ).unwrap();
            let x: Vec<f64> = (0..l.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ys: Vec<f64> = (0..l.spatial_edge_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ym: Vec<f64> = (0..l.mutation_edge_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
            let s = dot(&l.grad_spatial(&x).unwrap(), &ys) - dot(&x, &l.div_spatial(&ys).unwrap());
            let m = dot(&l.grad_mutation(&x).unwrap(), &ym) - dot(&x, &l.div_mutation(&ym).unwrap());
            prop_assert!(s.abs() <= 1e-12 && m.abs() <= 1e-12);
        }
    }
}
