//! Dense two-phase tableau simplex for small equality-form linear programs.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::graph::Graph;

/// Largest support accepted by [`static_kantorovich`].
pub const KANTOROVICH_LIMIT: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width]
    }

    fn pivot(&mut self, r: usize, col: usize, reduced: &mut [f64]) {
        let p = self.rows[r][col];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                row.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
                row[col] = 0.0;
            }
        }
        let f = reduced[col];
        if f != 0.0 {
            reduced.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
            reduced[col] = 0.0;
        }
        self.basis[r] = col;
    }

    /// Minimizes with the given reduced-cost row over columns `< allowed`.
    fn optimize(&mut self, reduced: &mut [f64], allowed: usize) -> Result<()> {
        let tol = 1e-11;
        let mut degenerate = 0usize;
        for _ in 0..200_000 {
            let bland = degenerate > 50;
            let mut enter = None;
            let mut best = -tol;
            for (j, &d) in reduced.iter().enumerate().take(allowed) {
                if d < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(col) = enter else { return Ok(()) };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a > tol {
                    let ratio = self.rhs(i) / a;
                    let better = match leave {
                        None => true,
                        Some((l, r)) => ratio < r - 1e-14 || (ratio <= r + 1e-14 && self.basis[i] < self.basis[l]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Err(Error::InvalidParameter("linear program is unbounded".into()));
            };
            degenerate = if ratio <= 1e-14 { degenerate + 1 } else { 0 };
            self.pivot(r, col, reduced);
        }
        Err(Error::MaxIterationsExceeded { iterations: 200_000 })
    }
}

/// Minimizes `c^T x` subject to `A x = b`, `x >= 0`.
pub fn solve_standard_form(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution> {
    let n = c.len();
    let m = a.len();
    check_len(m, b.len())?;
    let width = n + m;
    let mut rows = Vec::with_capacity(m);
    for (i, row) in a.iter().enumerate() {
        check_len(n, row.len())?;
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        let mut t = vec![0.0; width + 1];
        for (j, v) in row.iter().enumerate() {
            t[j] = flip * v;
        }
        t[n + i] = 1.0;
        t[width] = flip * b[i];
        rows.push(t);
    }
    let mut tab = Tableau {
        rows,
        basis: (n..n + m).collect(),
        width,
    };

    // phase I: minimize the sum of artificials
    let mut reduced = vec![0.0; width + 1];
    for row in &tab.rows {
        for j in 0..n {
            reduced[j] -= row[j];
        }
    }
    tab.optimize(&mut reduced, n)?;
    let scale = 1.0 + b.iter().map(|v| v.abs()).sum::<f64>();
    let art: f64 = (0..m).filter(|&i| tab.basis[i] >= n).map(|i| tab.rhs(i)).sum();
    if art > 1e-9 * scale {
        return Err(Error::Infeasible);
    }
    // drive remaining artificials out where possible; redundant rows keep them at 0
    for i in 0..m {
        if tab.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| tab.rows[i][j].abs() > 1e-9) {
                let mut dummy = vec![0.0; width + 1];
                tab.pivot(i, j, &mut dummy);
            }
        }
    }

    // phase II
    let mut reduced = vec![0.0; width + 1];
    reduced[..n].copy_from_slice(c);
    for i in 0..m {
        let cb = if tab.basis[i] < n { c[tab.basis[i]] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..=width {
                reduced[j] -= cb * tab.rows[i][j];
            }
        }
    }
    tab.optimize(&mut reduced, n)?;
    let mut x = vec![0.0; n];
    for i in 0..m {
        if tab.basis[i] < n {
            x[tab.basis[i]] = tab.rhs(i).max(0.0);
        }
    }
    let value = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    Ok(LpSolution { value, x })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub value: f64,
    /// `plan[i][j]` mass sent from `i` to `j`.
    pub plan: Vec<Vec<f64>>,
}

/// Exact static transport `min sum C_ij pi_ij` over couplings of `mu`, `nu`.
pub fn static_kantorovich(cost: &[Vec<f64>], mu: &[f64], nu: &[f64]) -> Result<Coupling> {
    let (n1, n2) = (mu.len(), nu.len());
    for size in [n1, n2] {
        if size > KANTOROVICH_LIMIT {
            return Err(Error::ScaleExceeded {
                size,
                limit: KANTOROVICH_LIMIT,
            });
        }
    }
    check_len(n1, cost.len())?;
    for row in cost {
        check_len(n2, row.len())?;
        if row.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("costs must be nonnegative".into()));
        }
    }
    let (a, b) = (mu.iter().sum::<f64>(), nu.iter().sum::<f64>());
    if (a - b).abs() > 1e-10 * a.max(b).max(1.0) || mu.iter().chain(nu).any(|v| !(*v >= 0.0)) {
        return Err(Error::MassMismatch(a, b));
    }
    let vars = n1 * n2;
    let mut rows = Vec::with_capacity(n1 + n2);
    let mut rhs = Vec::with_capacity(n1 + n2);
    for i in 0..n1 {
        let mut r = vec![0.0; vars];
        r[i * n2..(i + 1) * n2].iter_mut().for_each(|v| *v = 1.0);
        rows.push(r);
        rhs.push(mu[i]);
    }
    for j in 0..n2 {
        let mut r = vec![0.0; vars];
        for i in 0..n1 {
            r[i * n2 + j] = 1.0;
        }
        rows.push(r);
        rhs.push(nu[j]);
    }
    let c: Vec<f64> = cost.iter().flatten().copied().collect();
    let sol = solve_standard_form(&c, &rows, &rhs)?;
    Ok(Coupling {
        value: sol.value,
        plan: sol.x.chunks(n2).map(|r| r.to_vec()).collect(),
    })
}

/// Graph W1 as the dense linear program over `u = u+ - u-`.
pub fn dense_w1(g: &Graph, c: &[f64], mu: &[f64], nu: &[f64]) -> Result<LpSolution> {
    let n = g.node_count();
    let m = g.edge_count();
    check_len(m, c.len())?;
    check_len(n, mu.len())?;
    check_len(n, nu.len())?;
    let mut rows = vec![vec![0.0; 2 * m]; n];
    for (k, &(i, j)) in g.edges().iter().enumerate() {
        rows[i][k] = 1.0;
        rows[j][k] = -1.0;
        rows[i][m + k] = -1.0;
        rows[j][m + k] = 1.0;
    }
    let rhs: Vec<f64> = nu.iter().zip(mu).map(|(a, b)| a - b).collect();
    let cost: Vec<f64> = c.iter().chain(c).copied().collect();
    let sol = solve_standard_form(&cost, &rows, &rhs)?;
    let flow = (0..m).map(|k| sol.x[k] - sol.x[m + k]).collect();
    Ok(LpSolution {
        value: sol.value,
        x: flow,
    })
}

/// All-pairs shortest path lengths with edge lengths `c`.
pub fn shortest_path_costs(g: &Graph, c: &[f64]) -> Vec<Vec<f64>> {
    let n = g.node_count();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for (k, &(i, j)) in g.edges().iter().enumerate() {
        d[i][j] = d[i][j].min(c[k]);
        d[j][i] = d[j][i].min(c[k]);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}
