//! Slow, dense reference solvers used to validate the main engine at small
//! scale. Nothing here shares numerical code with [`crate::solver`].

mod lp;
mod smoothed;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::solver::Program;

pub use lp::{
    dense_w1, shortest_path_costs, solve_standard_form, static_kantorovich, Coupling, LpSolution, KANTOROVICH_LIMIT,
};
pub use smoothed::{smoothed_dynamic_solve, SmoothedResult, SMOOTHED_LIMIT};

/// Largest row count accepted by [`dense_projection`].
pub const DENSE_ROW_LIMIT: usize = 2000;

/// Dense continuity matrix and right-hand side in the stacked layout
/// documented on [`Program`].
pub fn continuity_system(program: &Program) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = program.nodes;
    let n_t = program.n_t;
    let rows = program.constraint_len();
    if rows > DENSE_ROW_LIMIT {
        return Err(Error::ScaleExceeded {
            size: rows,
            limit: DENSE_ROW_LIMIT,
        });
    }
    let cols = program.stacked_len();
    let interior = program.interior_len();
    let fpm = program.flux_per_midpoint();
    let mut a = DMatrix::zeros(rows, cols);
    let mut b = DVector::zeros(rows);
    for k in 0..n_t {
        for i in 0..n {
            let row = k * n + i;
            if k + 1 < n_t {
                a[(row, k * n + i)] += 1.0;
            } else {
                b[row] -= program.end[i];
            }
            if k >= 1 {
                a[(row, (k - 1) * n + i)] -= 1.0;
            } else {
                b[row] += program.start[i];
            }
        }
        let mut col = interior + k * fpm;
        for block in &program.blocks {
            for &(src, dst) in &program.families[block.family].edges {
                let s = block.sign / n_t as f64;
                a[(k * n + src, col)] -= s;
                a[(k * n + dst, col)] += s;
                col += 1;
            }
        }
    }
    Ok((a, b))
}

/// Least-squares projection of `x` onto `{A x = b}` through the
/// pseudo-inverse of `A A^T` from a symmetric eigendecomposition;
/// rank-deficient systems get the minimum-norm correction.
pub fn dense_projection(x: &[f64], a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Vec<f64>> {
    if a.nrows() > DENSE_ROW_LIMIT {
        return Err(Error::ScaleExceeded {
            size: a.nrows(),
            limit: DENSE_ROW_LIMIT,
        });
    }
    check_len(a.ncols(), x.len())?;
    check_len(a.nrows(), b.len())?;
    let eig = (a * a.transpose()).symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-10 * top.max(1.0);
    let pinv = |r: &DVector<f64>| {
        let coords = eig.eigenvectors.transpose() * r;
        let scaled = DVector::from_iterator(
            coords.len(),
            coords
                .iter()
                .zip(eig.eigenvalues.iter())
                .map(|(c, l)| if *l > tol { c / l } else { 0.0 }),
        );
        &eig.eigenvectors * scaled
    };
    let mut xv = DVector::from_column_slice(x);
    // one refinement pass removes the rounding left by the first solve
    for _ in 0..2 {
        let resid = a * &xv - b;
        xv -= a.transpose() * pinv(&resid);
    }
    Ok(xv.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_of_feasible_point_is_identity() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let b = DVector::from_column_slice(&[1.0, 1.0]);
        let x = [0.5, 0.5, 0.5];
        let p = dense_projection(&x, &a, &b).unwrap();
        for (u, v) in p.iter().zip(&x) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn rank_deficient_consistent_system() {
        // duplicated row: minimum-norm correction, zero residual
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_column_slice(&[2.0, 2.0]);
        let p = dense_projection(&[0.0, 0.0], &a, &b).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12 && (p[1] - 1.0).abs() < 1e-12);
    }
}
