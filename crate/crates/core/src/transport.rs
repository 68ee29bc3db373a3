//! Dynamic transport distances on graphs and layered graphs.
//!
//! Four programs are supported, all on a staggered time grid with `n_t`
//! subintervals:
//!
//! * asymmetric graph: two nonnegative flux blocks per edge, the one
//!   leaving the sink weighted by `1/(D2^T rho)` and the one leaving the
//!   source weighted by `1/(D1^T rho)`; a quasi-metric.
//! * symmetric graph: one free flux per edge with mobility
//!   `1/(D2^T rho) + 1/(D1^T rho)`.
//! * asymmetric and symmetric layered: the same constructions on the
//!   spatial and mutation edge sets of a [`LayeredGraph`], with the mutation
//!   energy scaled by `gamma`.
//!
//! The reported distance is the square root of the optimal discrete action.
//! Vector-valued densities on a Euclidean domain are handled as the layered
//! program on a [`crate::graph::grid_graph`].

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::graph::{Graph, LayeredGraph};
use crate::mass::DensityTable;
use crate::solver::{
    pdhg_solve, EdgeFamily, EnergyTerm, FamilyKind, FluxBlock, Program, SolveStats, SolverConfig, Stencil,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    AsymmetricGraph,
    SymmetricGraph,
    AsymmetricLayered,
    SymmetricLayered,
}

impl Variant {
    pub fn is_symmetric(self) -> bool {
        matches!(self, Variant::SymmetricGraph | Variant::SymmetricLayered)
    }

    pub fn is_layered(self) -> bool {
        matches!(self, Variant::AsymmetricLayered | Variant::SymmetricLayered)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::AsymmetricGraph => "asymmetric-graph",
            Variant::SymmetricGraph => "symmetric-graph",
            Variant::AsymmetricLayered => "asymmetric-layered",
            Variant::SymmetricLayered => "symmetric-layered",
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "asymmetric-graph" | "w2a" => Variant::AsymmetricGraph,
            "symmetric-graph" | "w2a-hat" => Variant::SymmetricGraph,
            "asymmetric-layered" | "w2b" | "w2c" => Variant::AsymmetricLayered,
            "symmetric-layered" | "w2b-hat" | "w2c-hat" => Variant::SymmetricLayered,
            other => return Err(Error::InvalidParameter(format!("unknown variant {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Graph(Graph),
    Layered(LayeredGraph),
}

impl Geometry {
    pub fn node_count(&self) -> usize {
        match self {
            Geometry::Graph(g) => g.node_count(),
            Geometry::Layered(l) => l.node_count(),
        }
    }

    pub fn channels(&self) -> usize {
        match self {
            Geometry::Graph(_) => 1,
            Geometry::Layered(l) => l.channels(),
        }
    }
}

impl From<Graph> for Geometry {
    fn from(g: Graph) -> Self {
        Geometry::Graph(g)
    }
}

impl From<LayeredGraph> for Geometry {
    fn from(l: LayeredGraph) -> Self {
        Geometry::Layered(l)
    }
}

/// A fully assembled transport program together with the data it came from.
#[derive(Debug, Clone)]
pub struct TransportProblem {
    pub variant: Variant,
    pub geometry: Geometry,
    /// Mutation cost weight; `None` for graph variants.
    pub gamma: Option<f64>,
    pub n_t: usize,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub program: Program,
}

/// Builds the convex program for `variant` between `mu` and `nu` (composite
/// channel-major order for layered geometries).
pub fn assemble(
    variant: Variant,
    geometry: &Geometry,
    mu: &[f64],
    nu: &[f64],
    gamma: f64,
    n_t: usize,
) -> Result<TransportProblem> {
    if n_t < 2 {
        return Err(Error::BadTimeGrid(n_t));
    }
    let n = geometry.node_count();
    for (name, m) in [("mu", mu), ("nu", nu)] {
        if m.len() != n {
            return Err(Error::MarginalMismatch(format!(
                "{name} has {} entries, geometry has {n} nodes",
                m.len()
            )));
        }
        if let Some((i, v)) = m.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::MarginalMismatch(format!(
                "{name}[{i}] = {v} is not a valid mass"
            )));
        }
    }
    let (a, b) = (mu.iter().sum::<f64>(), nu.iter().sum::<f64>());
    if !(a > 0.0) || (a - b).abs() > 1e-8 * a.max(b) {
        return Err(Error::InfeasibleBoundary(a, b));
    }

    let mut families = Vec::new();
    let mut blocks = Vec::new();
    let mut add_family = |kind: FamilyKind, edges: Vec<(usize, usize, f64)>, scale: f64| {
        if edges.is_empty() {
            return;
        }
        let fam = families.len();
        families.push(EdgeFamily {
            kind,
            edges: edges.iter().map(|&(i, j, _)| (i, j)).collect(),
            coef: edges.iter().map(|e| e.2.sqrt()).collect(),
        });
        if variant.is_symmetric() {
            blocks.push(FluxBlock {
                family: fam,
                sign: 1.0,
                nonneg: false,
                terms: vec![EnergyTerm::Kinetic {
                    stencil: Stencil::Both,
                    scale,
                }],
            });
        } else {
            // u moves mass sink -> source at the sink's rate, ubar the reverse
            blocks.push(FluxBlock {
                family: fam,
                sign: 1.0,
                nonneg: true,
                terms: vec![EnergyTerm::Kinetic {
                    stencil: Stencil::Sink,
                    scale,
                }],
            });
            blocks.push(FluxBlock {
                family: fam,
                sign: -1.0,
                nonneg: true,
                terms: vec![EnergyTerm::Kinetic {
                    stencil: Stencil::Source,
                    scale,
                }],
            });
        }
    };

    let gamma = match (variant.is_layered(), geometry) {
        (false, Geometry::Graph(g)) => {
            add_family(FamilyKind::Spatial, g.edge_list(), 1.0);
            None
        }
        (true, Geometry::Layered(l)) => {
            if !(gamma > 0.0) || !gamma.is_finite() {
                return Err(Error::BadGamma(gamma));
            }
            add_family(FamilyKind::Spatial, l.spatial_edges(), 1.0);
            add_family(FamilyKind::Mutation, l.mutation_edges(), gamma);
            Some(gamma)
        }
        _ => {
            return Err(Error::InvalidParameter(format!(
                "variant {} does not match the geometry",
                variant.as_str()
            )))
        }
    };

    let program = Program {
        nodes: n,
        n_t,
        start: mu.to_vec(),
        end: nu.to_vec(),
        families,
        blocks,
    };
    program.validate()?;
    Ok(TransportProblem {
        variant,
        geometry: geometry.clone(),
        gamma,
        n_t,
        mu: mu.to_vec(),
        nu: nu.to_vec(),
        program,
    })
}

impl TransportProblem {
    pub fn slice_count(&self) -> usize {
        self.n_t + 1
    }

    /// Flux unknowns per midpoint in each family, counting `u` and `ubar`
    /// separately.
    pub fn flux_unknowns_per_midpoint(&self, kind: FamilyKind) -> usize {
        self.program
            .blocks
            .iter()
            .filter(|b| self.program.families[b.family].kind == kind)
            .map(|b| self.program.families[b.family].edges.len())
            .sum()
    }

    /// Same program between other marginals.
    pub fn with_marginals(&self, mu: &[f64], nu: &[f64]) -> Result<TransportProblem> {
        assemble(
            self.variant,
            &self.geometry,
            mu,
            nu,
            self.gamma.unwrap_or(1.0),
            self.n_t,
        )
    }
}

/// Densities at `k / n_t` and fluxes at the midpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub n_t: usize,
    pub channels: usize,
    /// `densities[k]` over composite nodes.
    pub densities: Vec<Vec<f64>>,
    /// One entry per flux block of the program, in block order.
    pub fluxes: Vec<FluxTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxTrace {
    pub family: FamilyKind,
    /// `+1` for fluxes leaving the sink (and free fluxes), `-1` for the
    /// reverse direction.
    pub sign: f64,
    /// `values[k][e]` at midpoint `(k + 1/2) / n_t`.
    pub values: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Density at time `t` in `[0, 1]`, linearly interpolated between slices.
    pub fn density_at(&self, t: f64) -> Vec<f64> {
        let s = (t.clamp(0.0, 1.0)) * self.n_t as f64;
        let k = (s.floor() as usize).min(self.n_t - 1);
        let f = s - k as f64;
        self.densities[k]
            .iter()
            .zip(&self.densities[k + 1])
            .map(|(a, b)| (1.0 - f) * a + f * b)
            .collect()
    }

    /// Per-channel totals of slice `k`.
    pub fn channel_masses(&self, k: usize) -> Vec<f64> {
        let nodes = self.densities[k].len() / self.channels;
        self.densities[k].chunks(nodes).map(|c| c.iter().sum()).collect()
    }

    /// Mass moved between channels: `int sum_e |sqrt(w_e) F_e| dt` over the
    /// mutation edges, netting `u` against `ubar` per edge.
    pub fn mutation_flux_mass(&self, problem: &TransportProblem) -> f64 {
        let mut total = 0.0;
        for (fi, fam) in problem.program.families.iter().enumerate() {
            if fam.kind != FamilyKind::Mutation {
                continue;
            }
            for k in 0..self.n_t {
                for (e, c) in fam.coef.iter().enumerate() {
                    let net: f64 = problem
                        .program
                        .blocks
                        .iter()
                        .zip(&self.fluxes)
                        .filter(|(b, _)| b.family == fi)
                        .map(|(b, tr)| b.sign * tr.values[k][e])
                        .sum();
                    total += (c * net).abs();
                }
            }
        }
        total / self.n_t as f64
    }

    /// Discrete action of the mutation blocks without the `gamma` factor.
    pub fn mutation_action(&self, problem: &TransportProblem) -> f64 {
        block_action(self, problem, |kind| kind == FamilyKind::Mutation, false)
    }

    /// Full discrete action (the squared distance for an optimal trajectory).
    pub fn action(&self, problem: &TransportProblem) -> f64 {
        block_action(self, problem, |_| true, true)
    }
}

fn block_action(
    traj: &Trajectory,
    problem: &TransportProblem,
    include: impl Fn(FamilyKind) -> bool,
    scaled: bool,
) -> f64 {
    let p = &problem.program;
    let mut total = 0.0;
    for (block, trace) in p.blocks.iter().zip(&traj.fluxes) {
        let fam = &p.families[block.family];
        if !include(fam.kind) {
            continue;
        }
        for k in 0..traj.n_t {
            let (lo, hi) = (&traj.densities[k], &traj.densities[k + 1]);
            for (e, &(src, dst)) in fam.edges.iter().enumerate() {
                let f = trace.values[k][e];
                let mid = |i: usize| (0.5 * (lo[i] + hi[i])).max(0.0);
                for term in &block.terms {
                    let (inv, scale) = match term {
                        EnergyTerm::Kinetic { stencil, scale } => {
                            let inv = match stencil {
                                Stencil::Source => 1.0 / mid(src),
                                Stencil::Sink => 1.0 / mid(dst),
                                Stencil::Both => 1.0 / mid(src) + 1.0 / mid(dst),
                            };
                            (inv, *scale)
                        }
                        EnergyTerm::Linear { .. } => continue,
                    };
                    if f != 0.0 {
                        total += if scaled { scale } else { 1.0 } * f * f * inv;
                    }
                }
            }
        }
    }
    total / traj.n_t as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// Largest entry of `rho^{k+1} - rho^k - (1/n_t) div F^k` over all `k`.
    pub continuity: f64,
    /// Largest negative part among densities and nonnegative flux blocks.
    pub nonnegativity: f64,
    /// Relative objective change over the solver's last window.
    pub relative_energy_change: f64,
    /// Largest per-slice deviation of the total mass from `sum(mu)`.
    pub mass_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    /// Square root of the optimal action.
    pub value: f64,
    /// Optimal action.
    pub objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
    pub stats: SolveStats,
}

impl DistanceReport {
    pub fn check_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::MaxIterationsExceeded {
                iterations: self.iterations,
            })
        }
    }
}

/// Solves the assembled program. Non-convergence is reported through
/// `DistanceReport::converged`, with the last iterate returned.
pub fn solve(problem: &TransportProblem, cfg: &SolverConfig) -> Result<(DistanceReport, Trajectory)> {
    let sol = pdhg_solve(&problem.program, cfg)?;
    let traj = Trajectory {
        n_t: problem.n_t,
        channels: problem.geometry.channels(),
        densities: sol.densities,
        fluxes: problem
            .program
            .blocks
            .iter()
            .zip(sol.fluxes)
            .map(|(b, values)| FluxTrace {
                family: problem.program.families[b.family].kind,
                sign: b.sign,
                values,
            })
            .collect(),
    };
    let check = continuity_residual(&traj, problem)?;
    let mut negative = traj.densities.iter().flatten().fold(0.0f64, |acc, v| acc.max(-v));
    for (b, tr) in problem.program.blocks.iter().zip(&traj.fluxes) {
        if b.nonneg {
            negative = tr.values.iter().flatten().fold(negative, |acc, v| acc.max(-v));
        }
    }
    let objective = sol.objective.max(0.0);
    let report = DistanceReport {
        value: objective.sqrt(),
        objective,
        residuals: Residuals {
            continuity: check.residual,
            nonnegativity: negative,
            relative_energy_change: sol.stats.objective_change,
            mass_drift: check.mass_drift.iter().fold(0.0f64, |a, d| a.max(d.abs())),
        },
        iterations: sol.stats.iterations,
        converged: sol.stats.converged,
        wall_time_s: sol.stats.wall_time_s,
        stats: sol.stats,
    };
    Ok((report, traj))
}

/// Convenience wrapper: assemble and solve, returning only the distance.
pub fn distance(
    variant: Variant,
    geometry: &Geometry,
    mu: &[f64],
    nu: &[f64],
    gamma: f64,
    n_t: usize,
    cfg: &SolverConfig,
) -> Result<DistanceReport> {
    let problem = assemble(variant, geometry, mu, nu, gamma, n_t)?;
    Ok(solve(&problem, cfg)?.0)
}

/// `max(W(mu, nu), W(nu, mu))` for the asymmetric graph distance.
pub fn w2a_max_symmetrized(g: &Graph, mu: &[f64], nu: &[f64], n_t: usize, cfg: &SolverConfig) -> Result<f64> {
    let geom = Geometry::Graph(g.clone());
    let forward = distance(Variant::AsymmetricGraph, &geom, mu, nu, 1.0, n_t, cfg)?;
    let backward = distance(Variant::AsymmetricGraph, &geom, nu, mu, 1.0, n_t, cfg)?;
    Ok(forward.value.max(backward.value))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityCheck {
    pub residual: f64,
    /// `sum(rho^k) - sum(mu)` for every slice.
    pub mass_drift: Vec<f64>,
}

/// Discrete continuity defect of a trajectory against the problem's
/// operators.
pub fn continuity_residual(traj: &Trajectory, problem: &TransportProblem) -> Result<ContinuityCheck> {
    let p = &problem.program;
    check_len(p.n_t, traj.n_t)?;
    check_len(p.n_t + 1, traj.densities.len())?;
    check_len(p.blocks.len(), traj.fluxes.len())?;
    for d in &traj.densities {
        check_len(p.nodes, d.len())?;
    }
    for (b, tr) in p.blocks.iter().zip(&traj.fluxes) {
        check_len(p.n_t, tr.values.len())?;
        for v in &tr.values {
            check_len(p.families[b.family].edges.len(), v.len())?;
        }
    }
    let inv_nt = 1.0 / p.n_t as f64;
    let mut residual = 0.0f64;
    let mut defect = vec![0.0; p.nodes];
    for k in 0..p.n_t {
        for i in 0..p.nodes {
            defect[i] = traj.densities[k + 1][i] - traj.densities[k][i];
        }
        for (b, tr) in p.blocks.iter().zip(&traj.fluxes) {
            let fam = &p.families[b.family];
            for (e, (&(src, dst), c)) in fam.edges.iter().zip(&fam.coef).enumerate() {
                let f = inv_nt * b.sign * c * tr.values[k][e];
                defect[src] -= f;
                defect[dst] += f;
            }
        }
        residual = defect.iter().fold(residual, |acc, d| acc.max(d.abs()));
    }
    let total: f64 = problem.mu.iter().sum();
    let mass_drift = traj.densities.iter().map(|d| d.iter().sum::<f64>() - total).collect();
    Ok(ContinuityCheck { residual, mass_drift })
}

/// Largest relative deviation from `W(rho(s), rho(t)) = (t - s) W(mu, nu)`
/// over `(s, t)` in `{(0, 1/2), (1/2, 1), (1/4, 3/4)}`, re-solving between the
/// trajectory's own slices.
pub fn geodesic_deviation(traj: &Trajectory, problem: &TransportProblem, cfg: &SolverConfig) -> Result<f64> {
    let (full, _) = solve(problem, cfg)?;
    if full.value <= 1e-9 {
        return Ok(0.0);
    }
    let total: f64 = problem.mu.iter().sum();
    let slice = |t: f64| -> (f64, Vec<f64>) {
        let k = (t * traj.n_t as f64).round() as usize;
        let clipped: Vec<f64> = traj.densities[k].iter().map(|v| v.max(0.0)).collect();
        let s: f64 = clipped.iter().sum();
        (
            k as f64 / traj.n_t as f64,
            clipped.iter().map(|v| v * total / s).collect(),
        )
    };
    let mut worst = 0.0f64;
    for (s, t) in [(0.0, 0.5), (0.5, 1.0), (0.25, 0.75)] {
        let (ts, a) = slice(s);
        let (tt, b) = slice(t);
        let sub = problem.with_marginals(&a, &b)?;
        let (rep, _) = solve(&sub, cfg)?;
        worst = worst.max((rep.value - (tt - ts) * full.value).abs() / full.value);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub variant: Variant,
    pub gamma: Option<f64>,
    pub n_t: usize,
    pub channels: usize,
    pub value: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub converged: bool,
    pub slices: Vec<String>,
}

/// Writes one CSV per density slice (`slice_0000.csv`, ...) and a
/// `manifest.json`. Slices are written as computed; tiny negative entries
/// are clipped at export and show up in `residuals.nonnegativity`.
pub fn export_trajectory(
    traj: &Trajectory,
    problem: &TransportProblem,
    report: &DistanceReport,
    dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = Vec::new();
    let mut written = Vec::new();
    for (k, d) in traj.densities.iter().enumerate() {
        let name = format!("slice_{k:04}.csv");
        let clipped: Vec<f64> = d.iter().map(|v| v.max(0.0)).collect();
        let path = dir.join(&name);
        DensityTable::from_composite(traj.channels, &clipped).write(&path)?;
        names.push(name);
        written.push(path);
    }
    let manifest = TrajectoryManifest {
        variant: problem.variant,
        gamma: problem.gamma,
        n_t: problem.n_t,
        channels: traj.channels,
        value: report.value,
        residuals: report.residuals.clone(),
        iterations: report.iterations,
        converged: report.converged,
        slices: names,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete_graph, path_graph};

    fn k2() -> Geometry {
        Geometry::Graph(Graph::from_edges(&[(0, 1, 1.0)]).unwrap())
    }

    #[test]
    fn staggered_counts() {
        let p = assemble(Variant::SymmetricGraph, &k2(), &[0.9, 0.1], &[0.1, 0.9], 1.0, 4).unwrap();
        assert_eq!(p.slice_count(), 5);
        assert_eq!(p.program.flux_per_midpoint(), 1);
        let p = assemble(Variant::AsymmetricGraph, &k2(), &[0.9, 0.1], &[0.1, 0.9], 1.0, 4).unwrap();
        assert_eq!(p.program.flux_per_midpoint(), 2);

        let layered = LayeredGraph::new(path_graph(3, 1.0).unwrap(), complete_graph(2, 1.0).unwrap(), 2).unwrap();
        let mu = vec![1.0 / 6.0; 6];
        let p = assemble(Variant::SymmetricLayered, &layered.into(), &mu, &mu, 0.5, 8).unwrap();
        assert_eq!(p.slice_count(), 9);
        assert_eq!(p.program.nodes, 6);
        assert_eq!(p.flux_unknowns_per_midpoint(FamilyKind::Spatial), 4);
        assert_eq!(p.flux_unknowns_per_midpoint(FamilyKind::Mutation), 3);
    }

    #[test]
    fn assembly_errors() {
        assert!(matches!(
            assemble(Variant::SymmetricGraph, &k2(), &[1.0], &[0.5, 0.5], 1.0, 4),
            Err(Error::MarginalMismatch(_))
        ));
        assert!(matches!(
            assemble(Variant::SymmetricGraph, &k2(), &[0.5, 0.5], &[0.5, 0.5], 1.0, 1),
            Err(Error::BadTimeGrid(1))
        ));
        assert!(matches!(
            assemble(Variant::SymmetricGraph, &k2(), &[0.5, 0.5], &[0.5, 0.6], 1.0, 4),
            Err(Error::InfeasibleBoundary(..))
        ));
        let layered = LayeredGraph::with_complete_mutation(path_graph(2, 1.0).unwrap(), 2).unwrap();
        assert!(matches!(
            assemble(
                Variant::SymmetricLayered,
                &layered.into(),
                &[0.25; 4],
                &[0.25; 4],
                0.0,
                4
            ),
            Err(Error::BadGamma(_))
        ));
    }

    #[test]
    fn variant_names() {
        assert_eq!("w2a-hat".parse::<Variant>().unwrap(), Variant::SymmetricGraph);
        assert_eq!(
            "asymmetric-layered".parse::<Variant>().unwrap(),
            Variant::AsymmetricLayered
        );
        assert!("w3".parse::<Variant>().is_err());
    }

    #[test]
    fn constant_trajectory_has_no_residual() {
        let p = assemble(Variant::AsymmetricGraph, &k2(), &[0.3, 0.7], &[0.3, 0.7], 1.0, 4).unwrap();
        let traj = Trajectory {
            n_t: 4,
            channels: 1,
            densities: vec![vec![0.3, 0.7]; 5],
            fluxes: vec![
                FluxTrace {
                    family: FamilyKind::Spatial,
                    sign: 1.0,
                    values: vec![vec![0.0]; 4],
                },
                FluxTrace {
                    family: FamilyKind::Spatial,
                    sign: -1.0,
                    values: vec![vec![0.0]; 4],
                },
            ],
        };
        let check = continuity_residual(&traj, &p).unwrap();
        assert_eq!(check.residual, 0.0);
        assert!(check.mass_drift.iter().all(|d| d.abs() < 1e-15));

        let mut bad = traj.clone();
        bad.densities[2][0] += 0.01;
        let check = continuity_residual(&bad, &p).unwrap();
        assert!(check.residual >= 0.005);

        let mut short = traj;
        short.densities.pop();
        assert!(matches!(
            continuity_residual(&short, &p),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
