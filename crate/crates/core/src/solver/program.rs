use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Which endpoint densities weight a kinetic term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stencil {
    /// `D1^T rho`, the mass at the edge source.
    Source,
    /// `D2^T rho`, the mass at the edge sink.
    Sink,
    /// `1/(D1^T rho) + 1/(D2^T rho)`.
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EnergyTerm {
    /// `scale * F^2 / rho~` with `rho~` picked by the stencil.
    Kinetic { stencil: Stencil, scale: f64 },
    /// `cost_e * F_e`, one cost per family edge.
    Linear { cost: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyKind {
    Spatial,
    Mutation,
}

/// A set of oriented edges sharing one divergence operator. Column `e` of
/// the operator has `+coef[e]` at the source and `-coef[e]` at the sink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeFamily {
    pub kind: FamilyKind,
    pub edges: Vec<(usize, usize)>,
    pub coef: Vec<f64>,
}

/// One flux unknown per family edge and time midpoint, entering the
/// continuity equation with `sign`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxBlock {
    pub family: usize,
    pub sign: f64,
    pub nonneg: bool,
    pub terms: Vec<EnergyTerm>,
}

/// A dynamic transport program on a staggered time grid:
///
/// ```text
/// minimize   (1/n_t) sum_k sum_blocks energy(F_b^k, (rho^k + rho^{k+1}) / 2)
/// subject to rho^{k+1} - rho^k = (1/n_t) sum_b sign_b div_b F_b^k
///            rho^0 = start, rho^{n_t} = end, nonneg blocks >= 0
/// ```
///
/// Densities live at `k / n_t`, fluxes at the midpoints `(k + 1/2) / n_t`.
///
/// The stacked variable used by the projection is
/// `[rho^1 .. rho^{n_t-1}, G^0 .. G^{n_t-1}]` where each `G^k` concatenates
/// the blocks in order and `G = coef * F` edgewise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub nodes: usize,
    pub n_t: usize,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub families: Vec<EdgeFamily>,
    pub blocks: Vec<FluxBlock>,
}

impl Program {
    pub fn validate(&self) -> Result<()> {
        if self.n_t < 2 {
            return Err(Error::BadTimeGrid(self.n_t));
        }
        check_len(self.nodes, self.start.len())?;
        check_len(self.nodes, self.end.len())?;
        for fam in &self.families {
            check_len(fam.edges.len(), fam.coef.len())?;
            for &(i, j) in &fam.edges {
                if i >= self.nodes || j >= self.nodes {
                    return Err(Error::NodeOutOfRange {
                        index: i.max(j),
                        n: self.nodes,
                    });
                }
            }
            if fam.coef.iter().any(|c| !(*c > 0.0)) {
                return Err(Error::InvalidParameter("edge coefficients must be positive".into()));
            }
        }
        for b in &self.blocks {
            let fam = self
                .families
                .get(b.family)
                .ok_or_else(|| Error::InvalidParameter(format!("block references family {}", b.family)))?;
            for t in &b.terms {
                match t {
                    EnergyTerm::Kinetic { scale, .. } if !(*scale > 0.0) => {
                        return Err(Error::InvalidParameter("energy scale must be positive".into()))
                    }
                    EnergyTerm::Linear { cost } => check_len(fam.edges.len(), cost.len())?,
                    _ => {}
                }
            }
        }
        let (a, b) = (self.start.iter().sum::<f64>(), self.end.iter().sum::<f64>());
        if (a - b).abs() > 1e-8 * a.abs().max(b.abs()).max(1.0) {
            return Err(Error::InfeasibleBoundary(a, b));
        }
        Ok(())
    }

    /// Flux unknowns per midpoint, summed over blocks.
    pub fn flux_per_midpoint(&self) -> usize {
        self.blocks.iter().map(|b| self.families[b.family].edges.len()).sum()
    }

    /// Offset of each block inside one midpoint's flux vector.
    pub fn block_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.blocks.len());
        let mut acc = 0;
        for b in &self.blocks {
            off.push(acc);
            acc += self.families[b.family].edges.len();
        }
        off
    }

    pub fn interior_len(&self) -> usize {
        (self.n_t - 1) * self.nodes
    }

    /// Length of the stacked variable.
    pub fn stacked_len(&self) -> usize {
        self.interior_len() + self.n_t * self.flux_per_midpoint()
    }

    /// Number of continuity rows, `n_t * nodes`.
    pub fn constraint_len(&self) -> usize {
        self.n_t * self.nodes
    }

    /// Right-hand side of the continuity rows.
    pub fn continuity_rhs(&self) -> Vec<f64> {
        let n = self.nodes;
        let mut b = vec![0.0; self.constraint_len()];
        for i in 0..n {
            b[i] += self.start[i];
            b[(self.n_t - 1) * n + i] -= self.end[i];
        }
        b
    }

    /// Linear interpolation between the marginals with zero flux, in stacked
    /// form.
    pub fn initial_point(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.stacked_len()];
        for j in 1..self.n_t {
            let t = j as f64 / self.n_t as f64;
            let slice = &mut x[(j - 1) * self.nodes..j * self.nodes];
            for (i, v) in slice.iter_mut().enumerate() {
                *v = (1.0 - t) * self.start[i] + t * self.end[i];
            }
        }
        x
    }
}
