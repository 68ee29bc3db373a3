//! Wasserstein-1 distances on graphs.
//!
//! `W1(mu, nu) = min c^T |u|  subject to  D u = nu - mu`, with the dual
//! `max f^T (nu - mu)  subject to  |f_i - f_j| <= c_k` on every edge `k`.
//! With `c_k = 1 / sqrt(w_k)` this is the flux form of the graph W1 metric.
//!
//! [`w1_graph`] solves the linear program exactly by successive shortest
//! paths and returns the flow together with optimal potentials.
//! [`w1_action`] solves the time-dependent recast with the first-order
//! engine and serves as an independent cross-check.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::graph::{Graph, LayeredGraph};
use crate::mass::VectorMass;
use crate::solver::{pdhg_solve, EdgeFamily, EnergyTerm, FamilyKind, FluxBlock, Program, SolveStats, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct W1Result {
    pub value: f64,
    /// Edge flow in the stored orientation, with `D u = nu - mu`.
    pub flow: Vec<f64>,
    /// Optimal potentials, pinned to `f[0] = 0`.
    pub potentials: Vec<f64>,
    /// `f^T (nu - mu)`.
    pub dual_value: f64,
    /// `value - dual_value`.
    pub gap: f64,
    /// `max_k (|f_src - f_dst| - c_k)`, clipped at zero.
    pub dual_infeasibility: f64,
    /// `|D u - (nu - mu)|_inf`.
    pub residual: f64,
}

/// Costs `1 / sqrt(w_k)`.
pub fn default_costs(g: &Graph) -> Vec<f64> {
    g.sqrt_weights().iter().map(|s| 1.0 / s).collect()
}

fn check_marginals(n: usize, mu: &[f64], nu: &[f64]) -> Result<()> {
    check_len(n, mu.len())?;
    check_len(n, nu.len())?;
    for (i, &v) in mu.iter().chain(nu).enumerate() {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidMass(format!("entry {} is {v}", i % n)));
        }
    }
    let (a, b) = (mu.iter().sum::<f64>(), nu.iter().sum::<f64>());
    if (a - b).abs() > 1e-10 * a.max(b).max(1.0) {
        return Err(Error::MassMismatch(a, b));
    }
    Ok(())
}

fn check_costs(m: usize, c: &[f64]) -> Result<()> {
    check_len(m, c.len())?;
    if let Some(v) = c.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("edge cost {v} must be positive")));
    }
    Ok(())
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Exact min-cost flow on `g` with edge costs `c`.
pub fn w1_graph(g: &Graph, c: &[f64], mu: &[f64], nu: &[f64]) -> Result<W1Result> {
    let n = g.node_count();
    let edges = g.edges();
    check_costs(edges.len(), c)?;
    check_marginals(n, mu, nu)?;

    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, &(i, j)) in edges.iter().enumerate() {
        adj[i].push(k);
        adj[j].push(k);
    }
    let total: f64 = mu.iter().sum();
    let tol = 1e-14 * total.max(1e-300);
    // moved[k] > 0 means mass travels src -> dst
    let mut moved = vec![0.0; edges.len()];
    let mut excess: Vec<f64> = mu.iter().zip(nu).map(|(a, b)| a - b).collect();
    let mut pot = vec![0.0; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];

    // residual move from `from` along edge k: (cost, capacity)
    let arc = |k: usize, from: usize, moved: &[f64]| -> (f64, f64) {
        let forward = from == edges[k].0;
        let m = if forward { moved[k] } else { -moved[k] };
        if m < 0.0 {
            (-c[k], -m)
        } else {
            (c[k], f64::INFINITY)
        }
    };

    for _round in 0..(4 * (n + edges.len()) + 64) {
        if excess.iter().all(|&e| e <= tol) {
            break;
        }
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        pred.iter_mut().for_each(|p| *p = None);
        let mut heap = BinaryHeap::new();
        for i in 0..n {
            if excess[i] > tol {
                dist[i] = 0.0;
                heap.push(Entry(0.0, i));
            }
        }
        let mut target = None;
        while let Some(Entry(d, i)) = heap.pop() {
            if d > dist[i] {
                continue;
            }
            if excess[i] < -tol {
                target = Some(i);
                break;
            }
            for &k in &adj[i] {
                let j = if edges[k].0 == i { edges[k].1 } else { edges[k].0 };
                let (cost, _) = arc(k, i, &moved);
                let nd = d + (cost + pot[i] - pot[j]).max(0.0);
                if nd < dist[j] {
                    dist[j] = nd;
                    pred[j] = Some(k);
                    heap.push(Entry(nd, j));
                }
            }
        }
        let t = target.ok_or(Error::Infeasible)?;
        let dt = dist[t];
        for i in 0..n {
            pot[i] += dist[i].min(dt);
        }
        // walk back to a source, collecting the bottleneck
        let mut amount = -excess[t];
        let mut v = t;
        let mut path = Vec::new();
        while let Some(k) = pred[v] {
            let u = if edges[k].0 == v { edges[k].1 } else { edges[k].0 };
            amount = amount.min(arc(k, u, &moved).1);
            path.push((k, u));
            v = u;
        }
        amount = amount.min(excess[v]);
        for &(k, from) in &path {
            if from == edges[k].0 {
                moved[k] += amount;
            } else {
                moved[k] -= amount;
            }
        }
        excess[v] -= amount;
        excess[t] += amount;
    }
    if excess.iter().any(|&e| e > 1e3 * tol) {
        return Err(Error::Infeasible);
    }

    let flow: Vec<f64> = moved.iter().map(|m| -m).collect();
    let value: f64 = flow.iter().zip(c).map(|(u, ck)| ck * u.abs()).sum();
    // potentials rise along the flow; D u = nu - mu makes f = pot the dual
    let f0 = pot[0];
    let potentials: Vec<f64> = pot.iter().map(|p| p - f0).collect();
    Ok(certify(g, c, mu, nu, flow, potentials, value))
}

fn certify(g: &Graph, c: &[f64], mu: &[f64], nu: &[f64], flow: Vec<f64>, potentials: Vec<f64>, value: f64) -> W1Result {
    let n = g.node_count();
    let dual_value: f64 = (0..n).map(|i| potentials[i] * (nu[i] - mu[i])).sum();
    let mut dual_infeasibility = 0.0f64;
    let mut du = vec![0.0; n];
    for (k, &(i, j)) in g.edges().iter().enumerate() {
        dual_infeasibility = dual_infeasibility.max((potentials[i] - potentials[j]).abs() - c[k]);
        du[i] += flow[k];
        du[j] -= flow[k];
    }
    let residual = (0..n).fold(0.0f64, |acc, i| acc.max((du[i] - (nu[i] - mu[i])).abs()));
    W1Result {
        value,
        flow,
        potentials,
        dual_value,
        gap: value - dual_value,
        dual_infeasibility,
        residual,
    }
}

/// [`w1_graph`] with the default costs `1 / sqrt(w)`.
pub fn w1_graph_default(g: &Graph, mu: &[f64], nu: &[f64]) -> Result<W1Result> {
    w1_graph(g, &default_costs(g), mu, nu)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct W1ActionResult {
    pub value: f64,
    pub converged: bool,
    pub stats: SolveStats,
}

/// Time-dependent recast: minimize `int sum_k (u_k + ubar_k) dt` over
/// nonnegative rate fields with `rho' = div_G (u - ubar)`. The graph
/// divergence carries `sqrt(w)`, so unit rate cost equals edge cost
/// `c_k sqrt(w_k)`; with the default costs this is the plain flux integral.
pub fn w1_action(
    g: &Graph,
    c: &[f64],
    mu: &[f64],
    nu: &[f64],
    n_t: usize,
    cfg: &SolverConfig,
) -> Result<W1ActionResult> {
    check_costs(g.edge_count(), c)?;
    check_marginals(g.node_count(), mu, nu)?;
    let family = EdgeFamily {
        kind: FamilyKind::Spatial,
        edges: g.edges().to_vec(),
        coef: g.sqrt_weights().to_vec(),
    };
    let cost: Vec<f64> = c.iter().zip(g.sqrt_weights()).map(|(ck, s)| ck * s).collect();
    let block = |sign: f64| FluxBlock {
        family: 0,
        sign,
        nonneg: true,
        terms: vec![EnergyTerm::Linear { cost: cost.clone() }],
    };
    let program = Program {
        nodes: g.node_count(),
        n_t,
        start: mu.to_vec(),
        end: nu.to_vec(),
        families: vec![family],
        blocks: vec![block(1.0), block(-1.0)],
    };
    let sol = pdhg_solve(&program, cfg)?;
    Ok(W1ActionResult {
        value: sol.objective,
        converged: sol.stats.converged,
        stats: sol.stats,
    })
}

/// Vector-valued W1: min-cost flow on the layered product with spatial
/// costs `1 / sqrt(w)` and mutation costs `gamma / sqrt(w_F)`. Flows and
/// costs are ordered spatial edges (by channel) then mutation edges (by
/// node).
pub fn w1_vector(spatial: &Graph, mutation: &Graph, gamma: f64, mu: &VectorMass, nu: &VectorMass) -> Result<W1Result> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::BadGamma(gamma));
    }
    let channels = mu.channels();
    if nu.channels() != channels {
        return Err(Error::ChannelCountMismatch {
            expected: channels,
            got: nu.channels(),
        });
    }
    check_len(spatial.node_count(), mu.nodes())?;
    check_len(spatial.node_count(), nu.nodes())?;
    let layered = LayeredGraph::new(spatial.clone(), mutation.clone(), channels)?;
    let (product, costs) = layered_costs(&layered, gamma)?;
    w1_graph(&product, &costs, mu.values(), nu.values())
}

/// Product graph of `layered` in its native edge order, with W1 edge costs.
pub fn layered_costs(layered: &LayeredGraph, gamma: f64) -> Result<(Graph, Vec<f64>)> {
    let spatial = layered.spatial_edges();
    let mutation = layered.mutation_edges();
    let costs = spatial
        .iter()
        .map(|e| 1.0 / e.2.sqrt())
        .chain(mutation.iter().map(|e| gamma / e.2.sqrt()))
        .collect();
    let mut edges = spatial;
    edges.extend(mutation);
    Ok((Graph::with_orientation(layered.node_count(), &edges)?, costs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete_graph, path_graph};

    #[test]
    fn single_edge() {
        let g = Graph::from_edges(&[(0, 1, 1.0)]).unwrap();
        let r = w1_graph(&g, &[1.0], &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((r.value - 1.0).abs() < 1e-14);
        assert_eq!(r.flow, vec![-1.0]);
        assert!(r.gap.abs() < 1e-14);
        assert_eq!(r.potentials[0], 0.0);
    }

    #[test]
    fn path_tree() {
        let g = path_graph(3, 1.0).unwrap();
        let r = w1_graph(&g, &[1.0, 1.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]).unwrap();
        assert!((r.value - 2.0).abs() < 1e-14);
        assert!(r.residual < 1e-14);
    }

    #[test]
    fn triangle_splits() {
        let g = complete_graph(3, 1.0).unwrap();
        let r = w1_graph(&g, &[1.0; 3], &[1.0, 0.0, 0.0], &[0.0, 0.5, 0.5]).unwrap();
        assert!((r.value - 1.0).abs() < 1e-14);
        assert!(r.gap.abs() < 1e-12 && r.dual_infeasibility < 1e-12);
    }

    #[test]
    fn weights_enter_through_default_costs() {
        let g = Graph::from_edges(&[(0, 1, 4.0)]).unwrap();
        let r = w1_graph_default(&g, &[0.75, 0.25], &[0.25, 0.75]).unwrap();
        assert!((r.value - 0.25).abs() < 1e-14);
    }

    #[test]
    fn errors() {
        let g = path_graph(2, 1.0).unwrap();
        assert!(matches!(
            w1_graph(&g, &[1.0], &[1.0, 0.0], &[0.0, 0.9]),
            Err(Error::MassMismatch(..))
        ));
        assert!(w1_graph(&g, &[0.0], &[1.0, 0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn mutation_only_move() {
        let spatial = path_graph(1, 1.0).unwrap();
        let mutation = complete_graph(2, 1.0).unwrap();
        let mu = VectorMass::new(2, vec![1.0, 0.0]).unwrap();
        let nu = VectorMass::new(2, vec![0.0, 1.0]).unwrap();
        let r = w1_vector(&spatial, &mutation, 0.5, &mu, &nu).unwrap();
        assert!((r.value - 0.5).abs() < 1e-14);
    }
}
