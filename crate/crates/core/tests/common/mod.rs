#![allow(dead_code)]

use proptest::prelude::*;
use vomt::graph::Graph;

/// Connected graph on `lo..=hi` nodes: a random spanning tree plus extra
/// edges, weights in `[0.5, 2]`.
pub fn connected_graph(lo: usize, hi: usize) -> impl Strategy<Value = Graph> {
    (lo..=hi).prop_flat_map(|n| {
        let pairs = n * (n - 1) / 2;
        (
            proptest::collection::vec((0.0f64..1.0, 0.5f64..2.0), n - 1),
            proptest::collection::vec((any::<bool>(), 0.5f64..2.0), pairs),
        )
            .prop_map(move |(tree, extra)| {
                let mut edges: Vec<(usize, usize, f64)> = tree
                    .iter()
                    .enumerate()
                    .map(|(k, &(p, w))| (((k + 1) as f64 * p) as usize, k + 1, w))
                    .collect();
                let mut idx = 0;
                for i in 0..n {
                    for j in i + 1..n {
                        let (keep, w) = extra[idx];
                        idx += 1;
                        if keep && !edges.iter().any(|e| (e.0, e.1) == (i, j)) {
                            edges.push((i, j, w));
                        }
                    }
                }
                Graph::new(n, &edges).unwrap()
            })
    })
}

/// Interior probability vector of length `n`.
pub fn interior(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.05f64..1.0, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

/// Graph together with two interior marginals on its nodes.
pub fn graph_and_pair(lo: usize, hi: usize) -> impl Strategy<Value = (Graph, Vec<f64>, Vec<f64>)> {
    connected_graph(lo, hi).prop_flat_map(|g| {
        let n = g.node_count();
        (Just(g), interior(n), interior(n))
    })
}
