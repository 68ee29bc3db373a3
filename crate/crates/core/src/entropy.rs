//! Entropy gradient flow in the symmetric graph transport geometry:
//!
//! ```text
//! rho' = -div_G( A(rho)^{-1} grad_G log rho ),
//! A(rho) = diag(D2^T rho)^{-1} + diag(D1^T rho)^{-1}
//! ```
//!
//! a nonlinear heat-like equation whose only interior stationary point on a
//! connected graph is the uniform distribution.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::graph::Graph;

/// Smallest step the integrator will try before giving up.
pub const MIN_STEP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub t: f64,
    pub rho: Vec<f64>,
    pub entropy: f64,
}

fn check_positive(rho: &[f64]) -> Result<()> {
    match rho.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
        Some((index, &value)) => Err(Error::NonpositiveEntry { index, value }),
        None => Ok(()),
    }
}

/// `S(rho) = -sum rho_i log rho_i`.
pub fn entropy(rho: &[f64]) -> Result<f64> {
    check_positive(rho)?;
    Ok(-rho.iter().map(|r| r * r.ln()).sum::<f64>())
}

/// Right-hand side of the flow at `rho`.
pub fn flow_rhs(g: &Graph, rho: &[f64]) -> Result<Vec<f64>> {
    check_len(g.node_count(), rho.len())?;
    check_positive(rho)?;
    let mut out = vec![0.0; rho.len()];
    for (&(i, j), &s) in g.edges().iter().zip(g.sqrt_weights()) {
        let grad = s * (rho[i].ln() - rho[j].ln());
        let a = 1.0 / rho[j] + 1.0 / rho[i];
        let y = s * grad / a;
        out[i] -= y;
        out[j] += y;
    }
    Ok(out)
}

/// Explicit Euler from `rho0` for `steps` steps of size `h`. A step is
/// halved until the new state stays positive and does not lower the
/// entropy; every state records the time actually reached.
pub fn integrate(g: &Graph, rho0: &[f64], h: f64, steps: usize) -> Result<Vec<FlowState>> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!("step {h} must be positive")));
    }
    check_len(g.node_count(), rho0.len())?;
    check_positive(rho0)?;
    let total: f64 = rho0.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidMass(format!("total mass {total}")));
    }
    let mut states = Vec::with_capacity(steps + 1);
    let mut rho = rho0.to_vec();
    let mut s = entropy(&rho)?;
    let mut t = 0.0;
    states.push(FlowState {
        t,
        rho: rho.clone(),
        entropy: s,
    });
    let mut next = vec![0.0; rho.len()];
    for _ in 0..steps {
        let rhs = flow_rhs(g, &rho)?;
        let mut step = h;
        loop {
            for ((n, r), d) in next.iter_mut().zip(&rho).zip(&rhs) {
                *n = r + step * d;
            }
            if next.iter().all(|v| *v > 0.0) {
                let s_next = entropy(&next)?;
                if s_next >= s - 1e-14 {
                    s = s_next;
                    break;
                }
            }
            step *= 0.5;
            if step < MIN_STEP {
                return Err(Error::StepUnderflow(step));
            }
        }
        std::mem::swap(&mut rho, &mut next);
        t += step;
        states.push(FlowState {
            t,
            rho: rho.clone(),
            entropy: s,
        });
    }
    Ok(states)
}

/// CSV with columns `t, rho_0 .. rho_{n-1}, S`.
pub fn states_to_csv(states: &[FlowState]) -> String {
    let mut out = String::from("t");
    let n = states.first().map_or(0, |s| s.rho.len());
    for i in 0..n {
        let _ = write!(out, ",rho_{i}");
    }
    out.push_str(",S\n");
    for st in states {
        let _ = write!(out, "{:e}", st.t);
        for v in &st.rho {
            let _ = write!(out, ",{v:e}");
        }
        let _ = writeln!(out, ",{:e}", st.entropy);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::path_graph;

    #[test]
    fn entropy_values() {
        assert!((entropy(&[0.25; 4]).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert!(entropy(&[1.0 - 1e-12, 1e-12]).unwrap().abs() < 1e-10);
        let want = -0.9 * 0.9f64.ln() - 0.1 * 0.1f64.ln();
        assert!((entropy(&[0.9, 0.1]).unwrap() - want).abs() < 1e-15);
        assert!((want - 0.325083).abs() < 1e-6);
        assert!(matches!(
            entropy(&[1.0, 0.0]),
            Err(Error::NonpositiveEntry { index: 1, .. })
        ));
    }

    #[test]
    fn two_node_rhs() {
        let g = path_graph(2, 1.0).unwrap();
        let d = flow_rhs(&g, &[0.9, 0.1]).unwrap();
        let want = 9f64.ln() * 9.0 / 100.0;
        assert!((d[0] + want).abs() < 1e-15 && (d[1] - want).abs() < 1e-15);
        assert!((want - 0.19775).abs() < 1e-5);
        assert_eq!(flow_rhs(&g, &[0.5, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn uniform_start_is_constant() {
        let g = path_graph(4, 1.0).unwrap();
        let states = integrate(&g, &[0.25; 4], 0.01, 20).unwrap();
        assert_eq!(states.len(), 21);
        assert!(states.iter().all(|s| s.rho == vec![0.25; 4]));
    }

    #[test]
    fn csv_layout() {
        let g = path_graph(2, 1.0).unwrap();
        let states = integrate(&g, &[0.9, 0.1], 0.1, 2).unwrap();
        let csv = states_to_csv(&states);
        assert!(csv.starts_with("t,rho_0,rho_1,S\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
