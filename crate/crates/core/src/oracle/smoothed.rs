//! Reduced-space solver for the discrete action with denominators shifted
//! by `eps`.
//!
//! For fixed density slices the action splits into one quadratic program
//! per time step, `V_k = min (1/n_t) sum_j kappa_j F_j^2` subject to
//! `B F = n_t (rho^{k+1} - rho^k)`, which is solved through its concave dual
//! by (semismooth) Newton iterations. The outer problem over the interior
//! slices is then minimized by spectral projected gradient on a product of
//! scaled simplices, with gradients from the envelope theorem.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{EnergyTerm, Stencil};
use crate::transport::TransportProblem;

/// Largest stacked unknown count accepted.
pub const SMOOTHED_LIMIT: usize = 5000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedResult {
    /// Square root of `objective`.
    pub value: f64,
    /// Smoothed optimum; a lower bound on the unsmoothed optimum up to
    /// optimization accuracy.
    pub objective: f64,
    /// Unsmoothed action of the returned point minus `objective`, so that
    /// the unsmoothed optimum lies in `[objective, objective + bias_bound]`.
    pub bias_bound: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `|P(x - g) - x|_inf` at the returned point.
    pub projected_gradient: f64,
    pub densities: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
struct Unknown {
    src: usize,
    dst: usize,
    /// Column weight `sign * coef`.
    b: f64,
    nonneg: bool,
    /// `(node, scale)` pairs, `kappa = sum scale / (rho~_node + eps)`.
    terms: Vec<(usize, f64)>,
}

struct Reduced {
    nodes: usize,
    n_t: usize,
    eps: f64,
    unknowns: Vec<Unknown>,
    start: Vec<f64>,
    end: Vec<f64>,
}

struct StepResult {
    value: f64,
    /// Derivative of the step value with respect to each `rho~` entry.
    d_mid: Vec<f64>,
    /// Unsmoothed minus smoothed energy at the optimal flux.
    bias: f64,
}

impl Reduced {
    fn kappa(&self, u: &Unknown, mid: &[f64]) -> f64 {
        u.terms.iter().map(|&(i, s)| s / (mid[i] + self.eps)).sum()
    }

    fn dual_value(&self, phi: &[f64], r: &[f64], kappa: &[f64]) -> f64 {
        let nt = self.n_t as f64;
        let mut v: f64 = phi.iter().zip(r).map(|(a, b)| a * b).sum();
        for (u, &k) in self.unknowns.iter().zip(kappa) {
            let mut y = u.b * (phi[u.src] - phi[u.dst]);
            if u.nonneg {
                y = y.max(0.0);
            }
            v -= nt * y * y / (4.0 * k);
        }
        v
    }

    /// Solves one time step, warm-starting and updating `phi`.
    fn step(&self, mid: &[f64], r: &[f64], phi: &mut [f64]) -> Result<StepResult> {
        let n = self.nodes;
        let nt = self.n_t as f64;
        let kappa: Vec<f64> = self.unknowns.iter().map(|u| self.kappa(u, mid)).collect();
        let r_scale = 1.0 + r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut flux = vec![0.0; self.unknowns.len()];
        let mut converged = false;
        for _ in 0..200 {
            let mut grad = r.to_vec();
            let mut mag: Vec<f64> = r.iter().map(|v| v.abs()).collect();
            let mut hess = DMatrix::<f64>::zeros(n - 1, n - 1);
            for (j, (u, &k)) in self.unknowns.iter().zip(&kappa).enumerate() {
                let y = u.b * (phi[u.src] - phi[u.dst]);
                let active = !u.nonneg || y >= 0.0;
                flux[j] = if active { nt * y / (2.0 * k) } else { 0.0 };
                grad[u.src] -= u.b * flux[j];
                grad[u.dst] += u.b * flux[j];
                mag[u.src] += (u.b * flux[j]).abs();
                mag[u.dst] += (u.b * flux[j]).abs();
                if active {
                    let h = nt * u.b * u.b / (2.0 * k);
                    let (a, c) = (u.src, u.dst);
                    if a > 0 {
                        hess[(a - 1, a - 1)] += h;
                    }
                    if c > 0 {
                        hess[(c - 1, c - 1)] += h;
                    }
                    if a > 0 && c > 0 {
                        hess[(a - 1, c - 1)] -= h;
                        hess[(c - 1, a - 1)] -= h;
                    }
                }
            }
            let gmax = grad[1..].iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let scale = mag.iter().fold(r_scale, |a, v| a.max(*v));
            if gmax <= 1e-12 * scale {
                converged = true;
                break;
            }
            let g = DVector::from_column_slice(&grad[1..]);
            let dir = match hess.clone().cholesky() {
                Some(ch) => ch.solve(&g),
                None => {
                    let shift = 1e-12 * (1.0 + hess.trace());
                    let reg = hess + DMatrix::identity(n - 1, n - 1) * shift;
                    reg.lu().solve(&g).ok_or(Error::Infeasible)?
                }
            };
            let slope: f64 = g.dot(&dir);
            let base = self.dual_value(phi, r, &kappa);
            // the dual value cannot resolve increases below its rounding level
            let slack = 1e-14 * (1.0 + base.abs());
            let mut t = 1.0;
            let mut trial = phi.to_vec();
            loop {
                for i in 1..n {
                    trial[i] = phi[i] + t * dir[i - 1];
                }
                if self.dual_value(&trial, r, &kappa) >= base + 1e-4 * t * slope - slack || t < 1e-12 {
                    break;
                }
                t *= 0.5;
            }
            phi.copy_from_slice(&trial);
        }
        if !converged {
            return Err(Error::MaxIterationsExceeded { iterations: 200 });
        }
        let mut value = 0.0;
        let mut bias = 0.0;
        let mut d_mid = vec![0.0; n];
        for (u, (&f, &k)) in self.unknowns.iter().zip(flux.iter().zip(&kappa)) {
            value += k * f * f / nt;
            if f != 0.0 {
                let mut exact = 0.0;
                for &(i, s) in &u.terms {
                    d_mid[i] -= s * f * f / ((mid[i] + self.eps).powi(2) * nt);
                    exact += if mid[i] > 0.0 { s / mid[i] } else { f64::INFINITY };
                }
                bias += (exact - k) * f * f / nt;
            }
        }
        Ok(StepResult { value, d_mid, bias })
    }

    fn slice<'a>(&'a self, x: &'a [f64], k: usize) -> &'a [f64] {
        let n = self.nodes;
        if k == 0 {
            &self.start
        } else if k == self.n_t {
            &self.end
        } else {
            &x[(k - 1) * n..k * n]
        }
    }

    /// Objective, gradient over interior slices, and smoothing bias.
    fn evaluate(&self, x: &[f64], phis: &mut [Vec<f64>]) -> Result<(f64, Vec<f64>, f64)> {
        let n = self.nodes;
        let nt = self.n_t as f64;
        let mut grad = vec![0.0; x.len()];
        let mut total = 0.0;
        let mut bias = 0.0;
        for k in 0..self.n_t {
            let (lo, hi) = (self.slice(x, k), self.slice(x, k + 1));
            let mid: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
            let r: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| nt * (b - a)).collect();
            let st = self.step(&mid, &r, &mut phis[k])?;
            total += st.value;
            bias += st.bias;
            let phi = &phis[k];
            if k >= 1 {
                let g = &mut grad[(k - 1) * n..k * n];
                for i in 0..n {
                    g[i] += -nt * phi[i] + 0.5 * st.d_mid[i];
                }
            }
            if k + 1 < self.n_t {
                let g = &mut grad[k * n..(k + 1) * n];
                for i in 0..n {
                    g[i] += nt * phi[i] + 0.5 * st.d_mid[i];
                }
            }
        }
        Ok((total, grad, bias))
    }

    fn project(&self, x: &mut [f64], mass: f64) {
        for chunk in x.chunks_mut(self.nodes) {
            project_simplex(chunk, mass);
        }
    }
}

/// Euclidean projection onto `{x >= 0, sum x = mass}` by sorting.
fn project_simplex(x: &mut [f64], mass: f64) {
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        acc += v;
        let t = (acc - mass) / (i + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    x.iter_mut().for_each(|v| *v = (*v - theta).max(0.0));
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Solves the `eps`-smoothed program for `problem` to high accuracy.
pub fn smoothed_dynamic_solve(problem: &TransportProblem, eps: f64) -> Result<SmoothedResult> {
    if !(1e-9..=1e-5).contains(&eps) {
        return Err(Error::InvalidParameter(format!("smoothing {eps} outside [1e-9, 1e-5]")));
    }
    let p = &problem.program;
    let size = p.stacked_len();
    if size > SMOOTHED_LIMIT {
        return Err(Error::ScaleExceeded {
            size,
            limit: SMOOTHED_LIMIT,
        });
    }
    let mut unknowns = Vec::new();
    for block in &p.blocks {
        let fam = &p.families[block.family];
        for (&(src, dst), &coef) in fam.edges.iter().zip(&fam.coef) {
            let mut terms = Vec::new();
            for t in &block.terms {
                match t {
                    EnergyTerm::Kinetic { stencil, scale } => match stencil {
                        Stencil::Source => terms.push((src, *scale)),
                        Stencil::Sink => terms.push((dst, *scale)),
                        Stencil::Both => {
                            terms.push((src, *scale));
                            terms.push((dst, *scale));
                        }
                    },
                    EnergyTerm::Linear { .. } => {
                        return Err(Error::InvalidParameter("smoothed oracle needs kinetic energies".into()))
                    }
                }
            }
            unknowns.push(Unknown {
                src,
                dst,
                b: block.sign * coef,
                nonneg: block.nonneg,
                terms,
            });
        }
    }
    let red = Reduced {
        nodes: p.nodes,
        n_t: p.n_t,
        eps,
        unknowns,
        start: p.start.clone(),
        end: p.end.clone(),
    };
    let n = p.nodes;
    let mass: f64 = p.start.iter().sum();

    let mut x = vec![0.0; (p.n_t - 1) * n];
    for j in 1..p.n_t {
        let t = j as f64 / p.n_t as f64;
        for i in 0..n {
            x[(j - 1) * n + i] = (1.0 - t) * p.start[i] + t * p.end[i];
        }
    }
    let mut phis = vec![vec![0.0; n]; p.n_t];
    let (mut f, mut g, mut bias) = red.evaluate(&x, &mut phis)?;

    let pg_of = |x: &[f64], g: &[f64]| {
        let mut z: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
        red.project(&mut z, mass);
        z.iter().zip(x).fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
    };
    let mut pg = pg_of(&x, &g);
    let mut alpha = if pg > 0.0 {
        1.0 / pg.max(1e-300) * mass * 1e-2
    } else {
        1.0
    };
    let mut history = vec![f];
    let mut converged = false;
    let mut iterations = 0;
    let max_iters = 50_000;
    let pg_tol = 1e-13 * mass;

    while iterations < max_iters {
        if pg <= pg_tol {
            converged = true;
            break;
        }
        if history.len() > 200 {
            let old = history[history.len() - 201];
            if (old - f).abs() <= 1e-15 * f.abs().max(1e-300) {
                converged = true;
                break;
            }
        }
        iterations += 1;
        let mut d: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - alpha * b).collect();
        red.project(&mut d, mass);
        d.iter_mut().zip(&x).for_each(|(di, xi)| *di -= xi);
        let gd: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        if gd >= 0.0 {
            // no descent left at rounding level: accept a near-stationary point
            converged = inf_norm(&d) <= 1e-10 * mass || pg <= 1e-7 * mass;
            break;
        }
        let ref_f = history.iter().rev().take(10).fold(f64::NEG_INFINITY, |a, v| a.max(*v));
        let mut lambda = 1.0;
        let mut phis_trial = phis.clone();
        let (x_new, f_new, g_new, b_new) = loop {
            let xt: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + lambda * b).collect();
            let (ft, gt, bt) = red.evaluate(&xt, &mut phis_trial)?;
            if ft <= ref_f + 1e-4 * lambda * gd || lambda < 1e-12 {
                break (xt, ft, gt, bt);
            }
            let denom = ft - f - lambda * gd;
            let quad = if denom > 0.0 {
                -0.5 * lambda * lambda * gd / denom
            } else {
                0.5 * lambda
            };
            lambda = quad.clamp(0.1 * lambda, 0.5 * lambda);
        };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        alpha = if sy > 0.0 {
            (ss / sy).clamp(1e-30, 1e30)
        } else {
            alpha * 10.0
        };
        x = x_new;
        f = f_new;
        g = g_new;
        bias = b_new;
        phis = phis_trial;
        history.push(f);
        pg = pg_of(&x, &g);
    }

    let mut densities = Vec::with_capacity(p.n_t + 1);
    for k in 0..=p.n_t {
        densities.push(red.slice(&x, k).to_vec());
    }
    Ok(SmoothedResult {
        value: f.max(0.0).sqrt(),
        objective: f,
        bias_bound: bias,
        iterations,
        converged,
        projected_gradient: pg,
        densities,
    })
}
