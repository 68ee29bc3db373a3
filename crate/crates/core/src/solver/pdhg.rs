//! First-order primal-dual iteration for [`Program`]s.
//!
//! The program is written as `min_x  I{A x = b}(x) + F(K x + c)` where `x`
//! stacks the interior densities and fluxes, `K` copies each flux and the
//! time-averaged endpoint density into one energy cell, and `F` is the sum of
//! per-cell perspective (or linear) energies. Each iteration applies the
//! cell-wise proximal map through the conjugate (Moreau), then projects the
//! primal step back onto the continuity constraints:
//!
//! ```text
//! y   <- prox_{sigma F*}(y + sigma (K xbar + c))
//! x'  <- P_{Ax=b}(x - tau K^T y)
//! xbar <- 2 x' - x
//! ```
//!
//! Masses are rescaled internally so the mean node density is 1 and the time
//! sum replaces the time average; both are undone in the reported values.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::program::{EnergyTerm, Program, Stencil};
use crate::solver::projection::{norm, ContinuityProjector};
use crate::solver::prox::{prox_linear, prox_perspective_scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Primal step. `None` derives it from the operator-norm estimate.
    pub tau: Option<f64>,
    /// Dual step. `None` derives it from the operator-norm estimate.
    pub sigma: Option<f64>,
    /// Ratio `tau / sigma` used when the steps are derived automatically.
    pub primal_weight: f64,
    /// Bound on the copy residual (normalized units).
    pub feasibility_tol: f64,
    /// Bound on the relative objective change over `objective_window`.
    pub objective_tol: f64,
    pub objective_window: usize,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    /// Seeds the power iteration for the operator norm.
    pub seed: u64,
    pub power_iters: usize,
    /// Halpern averaging with adaptive restarts; plain iteration otherwise.
    pub restarts: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 50_000,
            tau: None,
            sigma: None,
            primal_weight: 1.0,
            feasibility_tol: 1e-6,
            objective_tol: 1e-7,
            objective_window: 50,
            cg_tol: 1e-11,
            cg_max_iters: 20_000,
            seed: 0,
            power_iters: 200,
            restarts: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("primal_weight", self.primal_weight),
            ("feasibility_tol", self.feasibility_tol),
            ("objective_tol", self.objective_tol),
            ("cg_tol", self.cg_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("tau", self.tau), ("sigma", self.sigma)] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if self.max_iters == 0 || self.objective_window == 0 || self.cg_max_iters == 0 {
            return Err(Error::InvalidParameter("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub converged: bool,
    /// Largest mismatch between the energy cells and `K x + c`.
    pub copy_residual: f64,
    /// `|A x - b|_2` of the returned trajectory, in mass units.
    pub continuity_residual: f64,
    /// Relative objective change over the last window.
    pub objective_change: f64,
    /// `(iteration, objective)` every 10 iterations.
    pub energy_trace: Vec<(usize, f64)>,
    pub cg_iterations: usize,
    pub restarts: usize,
    pub wall_time_s: f64,
    pub tau: f64,
    pub sigma: f64,
    pub operator_norm: f64,
}

/// Output of [`pdhg_solve`], in the program's units.
#[derive(Debug, Clone)]
pub struct Solution {
    /// `n_t + 1` density slices.
    pub densities: Vec<Vec<f64>>,
    /// `fluxes[block][k][e]`, the physical flux `F` at midpoint `k`.
    pub fluxes: Vec<Vec<Vec<f64>>>,
    /// Optimal value of the time-averaged energy.
    pub objective: f64,
    pub stats: SolveStats,
}

#[derive(Debug, Clone, Copy)]
struct KineticCell {
    flux: u32,
    node: u32,
    k: u32,
    nonneg: bool,
    a: f64,
}

#[derive(Debug, Clone, Copy)]
struct LinearCell {
    flux: u32,
    nonneg: bool,
    cost: f64,
}

const PAR_THRESHOLD: usize = 16_384;

struct Workspace<'a> {
    program: &'a Program,
    nodes: usize,
    n_t: usize,
    interior: usize,
    start: Vec<f64>,
    end: Vec<f64>,
    kinetic: Vec<KineticCell>,
    linear: Vec<LinearCell>,
    /// Internal flux unknown `j` of a midpoint is `flux_scale[j] * F * mass_scale`.
    flux_scale: Vec<f64>,
}

impl<'a> Workspace<'a> {
    fn new(program: &'a Program, mass_scale: f64) -> Self {
        let n_t = program.n_t;
        let fpm = program.flux_per_midpoint();
        let offsets = program.block_offsets();
        let mut kinetic = Vec::new();
        let mut linear = Vec::new();
        // unit kinetic weight per flux where possible, unit linear cost otherwise
        let mut flux_scale = Vec::with_capacity(fpm);
        for block in &program.blocks {
            let fam = &program.families[block.family];
            for (e, &coef) in fam.coef.iter().enumerate() {
                let mut kin = 0.0;
                let mut lin = 0.0;
                for term in &block.terms {
                    match term {
                        EnergyTerm::Kinetic { scale, .. } => kin += scale,
                        EnergyTerm::Linear { cost } => lin += cost[e],
                    }
                }
                flux_scale.push(if kin > 0.0 {
                    kin.sqrt()
                } else if lin > 0.0 {
                    lin
                } else {
                    coef
                });
            }
        }
        for k in 0..n_t {
            for (b, block) in program.blocks.iter().enumerate() {
                let fam = &program.families[block.family];
                for (e, &(src, dst)) in fam.edges.iter().enumerate() {
                    let flux = (k * fpm + offsets[b] + e) as u32;
                    let fs = flux_scale[offsets[b] + e];
                    for term in &block.terms {
                        match term {
                            EnergyTerm::Kinetic { stencil, scale } => {
                                let a = scale / (fs * fs);
                                let nodes: &[usize] = match stencil {
                                    Stencil::Source => &[src],
                                    Stencil::Sink => &[dst],
                                    Stencil::Both => &[dst, src],
                                };
                                for &node in nodes {
                                    kinetic.push(KineticCell {
                                        flux,
                                        node: node as u32,
                                        k: k as u32,
                                        nonneg: block.nonneg,
                                        a,
                                    });
                                }
                            }
                            EnergyTerm::Linear { cost } => linear.push(LinearCell {
                                flux,
                                nonneg: block.nonneg,
                                cost: cost[e] / fs,
                            }),
                        }
                    }
                }
            }
        }
        Workspace {
            program,
            nodes: program.nodes,
            n_t,
            interior: program.interior_len(),
            start: program.start.iter().map(|v| v * mass_scale).collect(),
            end: program.end.iter().map(|v| v * mass_scale).collect(),
            kinetic,
            linear,
            flux_scale,
        }
    }

    /// Column scales of the continuity constraints in internal variables.
    fn column_scales(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flux_scale.len());
        for block in &self.program.blocks {
            out.extend(&self.program.families[block.family].coef);
        }
        out.iter_mut().zip(&self.flux_scale).for_each(|(c, s)| *c /= s);
        out
    }

    /// Converts a stacked point between the program layout and internal units.
    fn to_internal(&self, x: &mut [f64], mass_scale: f64) {
        let cols = self.column_scales();
        let fpm = cols.len();
        x.iter_mut().for_each(|v| *v *= mass_scale);
        for (i, v) in x[self.interior..].iter_mut().enumerate() {
            *v /= cols[i % fpm];
        }
    }

    #[inline]
    fn density(&self, x: &[f64], k: usize, node: usize, boundary: bool) -> f64 {
        if k == 0 {
            if boundary {
                self.start[node]
            } else {
                0.0
            }
        } else if k == self.n_t {
            if boundary {
                self.end[node]
            } else {
                0.0
            }
        } else {
            x[(k - 1) * self.nodes + node]
        }
    }

    /// Kinetic cells as `(r, q)` pairs and linear cells as `q`.
    fn apply_k(&self, x: &[f64], boundary: bool, kin: &mut [[f64; 2]], lin: &mut [f64]) {
        let flux = &x[self.interior..];
        for (out, c) in kin.iter_mut().zip(&self.kinetic) {
            let k = c.k as usize;
            let node = c.node as usize;
            out[0] = 0.5 * (self.density(x, k, node, boundary) + self.density(x, k + 1, node, boundary));
            out[1] = flux[c.flux as usize];
        }
        for (out, c) in lin.iter_mut().zip(&self.linear) {
            *out = flux[c.flux as usize];
        }
    }

    fn apply_kt(&self, kin: &[[f64; 2]], lin: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let n = self.nodes;
        for (y, c) in kin.iter().zip(&self.kinetic) {
            let k = c.k as usize;
            let node = c.node as usize;
            if k >= 1 {
                out[(k - 1) * n + node] += 0.5 * y[0];
            }
            if k + 1 < self.n_t {
                out[k * n + node] += 0.5 * y[0];
            }
            out[self.interior + c.flux as usize] += y[1];
        }
        for (y, c) in lin.iter().zip(&self.linear) {
            out[self.interior + c.flux as usize] += y;
        }
    }

    fn operator_norm(&self, seed: u64, iters: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = self.program.stacked_len();
        let mut v: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut kin = vec![[0.0; 2]; self.kinetic.len()];
        let mut lin = vec![0.0; self.linear.len()];
        let mut est = 0.0;
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        for _ in 0..iters.max(1) {
            self.apply_k(&v, false, &mut kin, &mut lin);
            let mut w = vec![0.0; len];
            self.apply_kt(&kin, &lin, &mut w);
            let nw = norm(&w);
            if nw == 0.0 {
                break;
            }
            let prev = est;
            est = nw;
            w.iter_mut().for_each(|x| *x /= nw);
            v = w;
            if (est - prev).abs() <= 1e-10 * est {
                break;
            }
        }
        est.sqrt()
    }
}

/// Solves `program` with the primal-dual iteration. A run that hits
/// `max_iters` still returns its last iterate with `stats.converged = false`.
pub fn pdhg_solve(program: &Program, cfg: &SolverConfig) -> Result<Solution> {
    let t0 = Instant::now();
    program.validate()?;
    cfg.validate()?;
    let total_mass: f64 = program.start.iter().sum();
    if !(total_mass > 0.0) {
        return Err(Error::InvalidMass("marginals carry no mass".into()));
    }
    let mass_scale = program.nodes as f64 / total_mass;
    let ws = Workspace::new(program, mass_scale);
    let n_t = program.n_t as f64;
    let len = program.stacked_len();

    let op_norm = ws.operator_norm(cfg.seed, cfg.power_iters).max(1e-12) * 1.02;
    let (tau, sigma) = match (cfg.tau, cfg.sigma) {
        (Some(t), Some(s)) => {
            let excess = (t * s * op_norm * op_norm).sqrt();
            if excess > 1.0 {
                (t / excess, s / excess)
            } else {
                (t, s)
            }
        }
        (Some(t), None) => (t, 1.0 / (t * op_norm * op_norm)),
        (None, Some(s)) => (1.0 / (s * op_norm * op_norm), s),
        (None, None) => (cfg.primal_weight / op_norm, 1.0 / (cfg.primal_weight * op_norm)),
    };

    let b: Vec<f64> = program.continuity_rhs().iter().map(|v| v * mass_scale).collect();
    let mut projector =
        ContinuityProjector::with_column_scales(program, &ws.column_scales(), cfg.cg_tol, cfg.cg_max_iters);
    let mut x = program.initial_point();
    ws.to_internal(&mut x, mass_scale);
    let mut proj_info = projector.project(&mut x, &b)?;
    let mut x_plus = vec![0.0; len];
    let mut x_ext = vec![0.0; len];

    let mut y_kin = vec![[0.0f64; 2]; ws.kinetic.len()];
    let mut y_lin = vec![0.0f64; ws.linear.len()];
    let mut yk_plus = y_kin.clone();
    let mut yl_plus = y_lin.clone();
    let mut u_kin = vec![[0.0f64; 2]; ws.kinetic.len()];
    let mut u_lin = vec![0.0f64; ws.linear.len()];

    // Halpern anchor of the current restart epoch
    let mut anchor_x = x.clone();
    let mut anchor_yk = y_kin.clone();
    let mut anchor_yl = y_lin.clone();
    let mut epoch_len = 0usize;
    let mut epoch_residual = f64::INFINITY;
    let mut last_residual = f64::INFINITY;
    let mut restarts = 0usize;

    let window = cfg.objective_window;
    let mut history: Vec<f64> = Vec::with_capacity(cfg.max_iters.min(1 << 20));
    let mut trace = Vec::new();
    let mut converged = false;
    let mut copy_residual = f64::INFINITY;
    let mut objective_change = f64::INFINITY;
    let mut energy = 0.0;
    let mut iterations = 0;

    for it in 0..cfg.max_iters {
        iterations = it + 1;
        // one primal-dual step z+ = T(z)
        ws.apply_kt(&y_kin, &y_lin, &mut x_plus);
        x_plus.iter_mut().zip(&x).for_each(|(xn, xo)| *xn = xo - tau * *xn);
        proj_info = match projector.project(&mut x_plus, &b) {
            Ok(info) => info,
            Err(Error::CgStall { residual, .. }) if residual <= 1e-6 * (1.0 + norm(&b)) => {
                // accept a slightly inexact step; the final projection is exact
                Default::default()
            }
            Err(e) => return Err(e),
        };
        for ((xe, xn), xo) in x_ext.iter_mut().zip(&x_plus).zip(&x) {
            *xe = 2.0 * xn - xo;
        }
        ws.apply_k(&x_ext, true, &mut u_kin, &mut u_lin);
        yk_plus.copy_from_slice(&y_kin);
        yl_plus.copy_from_slice(&y_lin);
        let (e_kin, r_kin) = dual_step_kinetic(&ws.kinetic, &mut yk_plus, &u_kin, sigma)?;
        let (e_lin, r_lin) = dual_step_linear(&ws.linear, &mut yl_plus, &u_lin, sigma);
        energy = e_kin + e_lin;
        copy_residual = r_kin.max(r_lin);

        if cfg.restarts {
            let dx: f64 = x.iter().zip(&x_plus).map(|(a, b)| (a - b) * (a - b)).sum();
            let dyk: f64 = y_kin
                .iter()
                .zip(&yk_plus)
                .map(|(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
                .sum();
            let dyl: f64 = y_lin.iter().zip(&yl_plus).map(|(a, b)| (a - b) * (a - b)).sum();
            let residual = (dx / tau + (dyk + dyl) / sigma).sqrt();
            epoch_len += 1;
            if epoch_len == 1 {
                epoch_residual = residual;
            }
            let restart = epoch_len > 1
                && (residual <= 0.2 * epoch_residual
                    || (residual <= 0.8 * epoch_residual && residual > last_residual)
                    || epoch_len as f64 >= 0.36 * iterations as f64);
            last_residual = residual;
            if restart {
                x.copy_from_slice(&x_plus);
                y_kin.copy_from_slice(&yk_plus);
                y_lin.copy_from_slice(&yl_plus);
                anchor_x.copy_from_slice(&x);
                anchor_yk.copy_from_slice(&y_kin);
                anchor_yl.copy_from_slice(&y_lin);
                epoch_len = 0;
                last_residual = f64::INFINITY;
                restarts += 1;
            } else {
                // reflected Halpern step toward the anchor
                let w = epoch_len as f64 / (epoch_len + 1) as f64;
                for ((xo, xn), x0) in x.iter_mut().zip(&x_plus).zip(&anchor_x) {
                    *xo = w * (2.0 * xn - *xo) + (1.0 - w) * x0;
                }
                for ((yo, yn), y0) in y_kin.iter_mut().zip(&yk_plus).zip(&anchor_yk) {
                    for c in 0..2 {
                        yo[c] = w * (2.0 * yn[c] - yo[c]) + (1.0 - w) * y0[c];
                    }
                }
                for ((yo, yn), y0) in y_lin.iter_mut().zip(&yl_plus).zip(&anchor_yl) {
                    *yo = w * (2.0 * yn - *yo) + (1.0 - w) * y0;
                }
            }
        } else {
            std::mem::swap(&mut x, &mut x_plus);
            std::mem::swap(&mut y_kin, &mut yk_plus);
            std::mem::swap(&mut y_lin, &mut yl_plus);
        }

        history.push(energy);
        if it % 10 == 0 {
            trace.push((it, energy / (n_t * mass_scale)));
        }
        let scale = energy.abs().max(1e-300);
        objective_change = if history.len() > window {
            (energy - history[history.len() - 1 - window]).abs() / scale
        } else if energy.abs() <= 1e-14 {
            0.0
        } else {
            f64::INFINITY
        };
        let tiny = energy.abs() <= 1e-14 * program.nodes as f64;
        if copy_residual <= cfg.feasibility_tol && (objective_change <= cfg.objective_tol || tiny) {
            converged = true;
            break;
        }
        if !energy.is_finite() {
            return Err(Error::InvalidParameter("solver diverged".into()));
        }
    }
    // the returned point is the last primal-dual step, which the energy and
    // residuals above describe
    let mut x = if cfg.restarts { x_plus } else { x };

    // final tight projection of the returned iterate
    let saved_tol = projector.cg_tol;
    projector.cg_tol = saved_tol.min(1e-12);
    if let Ok(info) = projector.project(&mut x, &b) {
        proj_info = info;
    }

    let nodes = program.nodes;
    let mut densities = Vec::with_capacity(program.n_t + 1);
    densities.push(program.start.clone());
    for j in 1..program.n_t {
        densities.push(x[(j - 1) * nodes..j * nodes].iter().map(|v| v / mass_scale).collect());
    }
    densities.push(program.end.clone());
    let fpm = program.flux_per_midpoint();
    let offsets = program.block_offsets();
    let fluxes = program
        .blocks
        .iter()
        .enumerate()
        .map(|(bi, block)| {
            let m = program.families[block.family].edges.len();
            let fs = &ws.flux_scale[offsets[bi]..offsets[bi] + m];
            (0..program.n_t)
                .map(|k| {
                    let base = ws.interior + k * fpm + offsets[bi];
                    fs.iter()
                        .enumerate()
                        .map(|(e, s)| x[base + e] / (mass_scale * s))
                        .collect()
                })
                .collect()
        })
        .collect();

    let stats = SolveStats {
        iterations,
        converged,
        copy_residual: copy_residual / mass_scale,
        continuity_residual: proj_info.residual / mass_scale,
        objective_change,
        energy_trace: trace,
        cg_iterations: projector.total_iterations(),
        restarts,
        wall_time_s: t0.elapsed().as_secs_f64(),
        tau,
        sigma,
        operator_norm: op_norm,
    };
    Ok(Solution {
        densities,
        fluxes,
        objective: energy / (n_t * mass_scale),
        stats,
    })
}

/// Dual update on kinetic cells; returns the primal energy at the proximal
/// point and the largest copy residual.
fn dual_step_kinetic(cells: &[KineticCell], y: &mut [[f64; 2]], u: &[[f64; 2]], sigma: f64) -> Result<(f64, f64)> {
    let step = |c: &KineticCell, y: &mut [f64; 2], u: &[f64; 2]| -> Result<(f64, f64)> {
        let vr = y[0] + sigma * u[0];
        let vq = y[1] + sigma * u[1];
        let (pr, pq) = prox_perspective_scalar(vr / sigma, vq / sigma, 1.0 / sigma, c.a, c.nonneg)?;
        y[0] = vr - sigma * pr;
        y[1] = vq - sigma * pq;
        let e = if pr > 0.0 { c.a * pq * pq / pr } else { 0.0 };
        Ok((e, (u[0] - pr).abs().max((u[1] - pq).abs())))
    };
    if cells.len() < PAR_THRESHOLD {
        let mut energy = 0.0;
        let mut res = 0.0f64;
        for ((c, yi), ui) in cells.iter().zip(y.iter_mut()).zip(u) {
            let (e, r) = step(c, yi, ui)?;
            energy += e;
            res = res.max(r);
        }
        return Ok((energy, res));
    }
    const CHUNK: usize = 4096;
    let parts: Vec<Result<(f64, f64)>> = cells
        .par_chunks(CHUNK)
        .zip(y.par_chunks_mut(CHUNK))
        .zip(u.par_chunks(CHUNK))
        .map(|((cs, ys), us)| {
            let mut energy = 0.0;
            let mut res = 0.0f64;
            for ((c, yi), ui) in cs.iter().zip(ys.iter_mut()).zip(us) {
                let (e, r) = step(c, yi, ui)?;
                energy += e;
                res = res.max(r);
            }
            Ok((energy, res))
        })
        .collect();
    let mut energy = 0.0;
    let mut res = 0.0f64;
    for p in parts {
        let (e, r) = p?;
        energy += e;
        res = res.max(r);
    }
    Ok((energy, res))
}

fn dual_step_linear(cells: &[LinearCell], y: &mut [f64], u: &[f64], sigma: f64) -> (f64, f64) {
    let mut energy = 0.0;
    let mut res = 0.0f64;
    for ((c, yi), ui) in cells.iter().zip(y.iter_mut()).zip(u) {
        let v = *yi + sigma * ui;
        let p = prox_linear(v / sigma, 1.0 / sigma, c.cost, c.nonneg);
        *yi = v - sigma * p;
        energy += c.cost * p;
        res = res.max((ui - p).abs());
    }
    (energy, res)
}
