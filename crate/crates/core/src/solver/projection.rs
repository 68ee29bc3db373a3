//! Euclidean projection onto the continuity constraints `A x = b` through the
//! normal equations `A A^T lambda = A x - b`, solved matrix-free by
//! preconditioned conjugate gradient with warm starts.
//!
//! Every midpoint carries the same flux stencil, so `A A^T = T (x) I + I (x) L`
//! with `T` the path Laplacian in time and `L` the weighted flux Laplacian.
//! Up to [`SPECTRAL_LIMIT`] nodes the preconditioner inverts this sum exactly
//! in the product eigenbasis (cosines in time, a dense eigenbasis of `L` in
//! space); larger problems fall back to the Jacobi diagonal.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{check_len, Error, Result};
use crate::solver::program::Program;

/// Largest node count that gets the spectral preconditioner.
pub const SPECTRAL_LIMIT: usize = 2048;

#[derive(Debug, Clone)]
enum Preconditioner {
    Jacobi(Vec<f64>),
    Spectral {
        /// Time eigenvectors as columns, `n_t x n_t`.
        time: DMatrix<f64>,
        /// Space eigenvectors as columns, `n x n`.
        space: DMatrix<f64>,
        /// Inverse eigenvalues laid out `n_t x n`, zero on the null space.
        inv: DMatrix<f64>,
    },
}

impl Preconditioner {
    fn spectral(n_t: usize, n: usize, flux_edges: &[(u32, u32, f64)]) -> Self {
        let mut lap = DMatrix::zeros(n, n);
        for &(i, j, s) in flux_edges {
            let (i, j, w) = (i as usize, j as usize, s * s);
            lap[(i, i)] += w;
            lap[(j, j)] += w;
            lap[(i, j)] -= w;
            lap[(j, i)] -= w;
        }
        let eig = SymmetricEigen::new(lap);
        let nt = n_t as f64;
        let time = DMatrix::from_fn(n_t, n_t, |k, m| {
            let norm = if m == 0 { (1.0 / nt).sqrt() } else { (2.0 / nt).sqrt() };
            norm * (std::f64::consts::PI * m as f64 * (k as f64 + 0.5) / nt).cos()
        });
        let time_eig: Vec<f64> = (0..n_t)
            .map(|m| 2.0 - 2.0 * (std::f64::consts::PI * m as f64 / nt).cos())
            .collect();
        let top = time_eig
            .iter()
            .chain(eig.eigenvalues.iter())
            .fold(0.0f64, |a, b| a.max(b.abs()));
        let inv = DMatrix::from_fn(n_t, n, |m, q| {
            let l = time_eig[m] + eig.eigenvalues[q];
            if l > 1e-12 * top {
                1.0 / l
            } else {
                0.0
            }
        });
        Preconditioner::Spectral {
            time,
            space: eig.eigenvectors,
            inv,
        }
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Preconditioner::Jacobi(d) => z.iter_mut().zip(r).zip(d).for_each(|((zi, ri), di)| *zi = ri * di),
            Preconditioner::Spectral { time, space, inv } => {
                let (n_t, n) = (inv.nrows(), inv.ncols());
                let rm = DMatrix::from_row_slice(n_t, n, r);
                let mut hat = time.tr_mul(&rm) * space;
                hat.component_mul_assign(inv);
                let back = time * hat * space.transpose();
                for k in 0..n_t {
                    for i in 0..n {
                        z[k * n + i] = back[(k, i)];
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ProjectionInfo {
    pub iterations: usize,
    /// `|A x' - b|_2` after the projection.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct ContinuityProjector {
    nodes: usize,
    n_t: usize,
    interior: usize,
    /// `(src, dst, sign / n_t)` for each flux unknown of one midpoint.
    flux_edges: Vec<(u32, u32, f64)>,
    precond: Preconditioner,
    lambda: Vec<f64>,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    total_iterations: usize,
}

impl ContinuityProjector {
    pub fn new(program: &Program, cg_tol: f64, cg_max_iters: usize) -> Self {
        let ones = vec![1.0; program.flux_per_midpoint()];
        Self::with_column_scales(program, &ones, cg_tol, cg_max_iters)
    }

    /// Same constraints with each flux unknown of a midpoint multiplied by
    /// `scales[j]`, i.e. in the variables `G_j / scales[j]`.
    pub fn with_column_scales(program: &Program, scales: &[f64], cg_tol: f64, cg_max_iters: usize) -> Self {
        let n = program.nodes;
        let n_t = program.n_t;
        let inv_nt = 1.0 / n_t as f64;
        assert_eq!(scales.len(), program.flux_per_midpoint());
        let mut flux_edges = Vec::with_capacity(program.flux_per_midpoint());
        let mut flux_deg = vec![0.0; n];
        let mut col = scales.iter();
        for b in &program.blocks {
            for &(i, j) in &program.families[b.family].edges {
                let s = b.sign * inv_nt * col.next().copied().unwrap_or(1.0);
                flux_edges.push((i as u32, j as u32, s));
                flux_deg[i] += s * s;
                flux_deg[j] += s * s;
            }
        }
        let mut inv_diag = vec![0.0; n_t * n];
        for k in 0..n_t {
            let time = (k >= 1) as usize as f64 + (k + 1 < n_t) as usize as f64;
            for i in 0..n {
                let d = time + flux_deg[i];
                inv_diag[k * n + i] = if d > 0.0 { 1.0 / d } else { 0.0 };
            }
        }
        let precond = if n <= SPECTRAL_LIMIT {
            Preconditioner::spectral(n_t, n, &flux_edges)
        } else {
            Preconditioner::Jacobi(inv_diag)
        };
        ContinuityProjector {
            nodes: n,
            n_t,
            interior: program.interior_len(),
            flux_edges,
            precond,
            lambda: vec![0.0; n_t * n],
            cg_tol,
            cg_max_iters,
            total_iterations: 0,
        }
    }

    pub fn total_iterations(&self) -> usize {
        self.total_iterations
    }

    fn stacked_len(&self) -> usize {
        self.interior + self.n_t * self.flux_edges.len()
    }

    /// `out = A x`.
    pub fn apply_a(&self, x: &[f64], out: &mut [f64]) {
        let n = self.nodes;
        let fpm = self.flux_edges.len();
        for k in 0..self.n_t {
            let row = &mut out[k * n..(k + 1) * n];
            row.iter_mut().for_each(|v| *v = 0.0);
            if k + 1 < self.n_t {
                let next = &x[k * n..(k + 1) * n];
                row.iter_mut().zip(next).for_each(|(r, v)| *r += v);
            }
            if k >= 1 {
                let prev = &x[(k - 1) * n..k * n];
                row.iter_mut().zip(prev).for_each(|(r, v)| *r -= v);
            }
            let g = &x[self.interior + k * fpm..self.interior + (k + 1) * fpm];
            for (&(i, j, s), &v) in self.flux_edges.iter().zip(g) {
                row[i as usize] -= s * v;
                row[j as usize] += s * v;
            }
        }
    }

    /// `out = A^T lambda`.
    pub fn apply_at(&self, lambda: &[f64], out: &mut [f64]) {
        let n = self.nodes;
        let fpm = self.flux_edges.len();
        for j in 1..self.n_t {
            let slice = &mut out[(j - 1) * n..j * n];
            let before = &lambda[(j - 1) * n..j * n];
            let after = &lambda[j * n..(j + 1) * n];
            for ((o, a), b) in slice.iter_mut().zip(before).zip(after) {
                *o = a - b;
            }
        }
        for k in 0..self.n_t {
            let lam = &lambda[k * n..(k + 1) * n];
            let g = &mut out[self.interior + k * fpm..self.interior + (k + 1) * fpm];
            for (o, &(i, j, s)) in g.iter_mut().zip(&self.flux_edges) {
                *o = -s * (lam[i as usize] - lam[j as usize]);
            }
        }
    }

    /// Projects `x` in place onto `{A x = b}`.
    pub fn project(&mut self, x: &mut [f64], b: &[f64]) -> Result<ProjectionInfo> {
        check_len(self.stacked_len(), x.len())?;
        check_len(self.n_t * self.nodes, b.len())?;
        let rows = b.len();
        let mut rhs = vec![0.0; rows];
        self.apply_a(x, &mut rhs);
        rhs.iter_mut().zip(b).for_each(|(r, bb)| *r -= bb);
        // A^T 1 = 0, so only the mean-free part of the right-hand side is
        // reachable; dropping the mean absorbs rounding in the marginal masses.
        let mean = rhs.iter().sum::<f64>() / rows as f64;
        rhs.iter_mut().for_each(|r| *r -= mean);

        let b_norm = norm(b);
        let target = self.cg_tol * (1.0 + b_norm);
        let mut tmp = vec![0.0; x.len()];
        let mut lam = std::mem::take(&mut self.lambda);
        let mut r = vec![0.0; rows];
        self.normal_apply(&lam, &mut tmp, &mut r);
        r.iter_mut().zip(&rhs).for_each(|(ri, hi)| *ri = hi - *ri);
        let mut res = norm(&r);
        if !res.is_finite() {
            lam.iter_mut().for_each(|v| *v = 0.0);
            r.copy_from_slice(&rhs);
            res = norm(&r);
        }
        let mut iterations = 0;
        if res > target {
            let mut z = vec![0.0; rows];
            self.precond.apply(&r, &mut z);
            let mut p = z.clone();
            let mut rz = dot(&r, &z);
            let mut ap = vec![0.0; rows];
            let mut best = res;
            let mut since_best = 0;
            while res > target {
                if iterations >= self.cg_max_iters || since_best > 500 {
                    self.lambda = lam;
                    self.total_iterations += iterations;
                    return Err(Error::CgStall {
                        residual: res,
                        iterations,
                    });
                }
                self.normal_apply(&p, &mut tmp, &mut ap);
                let pap = dot(&p, &ap);
                if !(pap > 0.0) {
                    break;
                }
                let alpha = rz / pap;
                lam.iter_mut().zip(&p).for_each(|(l, pi)| *l += alpha * pi);
                r.iter_mut().zip(&ap).for_each(|(ri, a)| *ri -= alpha * a);
                res = norm(&r);
                iterations += 1;
                if res < best * 0.999 {
                    best = res;
                    since_best = 0;
                } else {
                    since_best += 1;
                }
                self.precond.apply(&r, &mut z);
                let rz_new = dot(&r, &z);
                let beta = rz_new / rz;
                rz = rz_new;
                p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
            }
        }
        self.apply_at(&lam, &mut tmp);
        x.iter_mut().zip(&tmp).for_each(|(xi, t)| *xi -= t);
        self.lambda = lam;
        self.total_iterations += iterations;

        let mut check = vec![0.0; rows];
        self.apply_a(x, &mut check);
        check.iter_mut().zip(b).for_each(|(c, bb)| *c -= bb);
        Ok(ProjectionInfo {
            iterations,
            residual: norm(&check),
        })
    }

    fn normal_apply(&self, lam: &[f64], tmp: &mut [f64], out: &mut [f64]) {
        self.apply_at(lam, tmp);
        self.apply_a(tmp, out);
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
