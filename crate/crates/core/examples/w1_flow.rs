//! Graph W1 distance as a min-cost flow, with its dual certificate and the
//! dynamic (action) formulation for comparison.
//!
//! ```bash
//! cargo run --release --example w1_flow
//! ```

use vomt::graph::{complete_graph, grid_graph};
use vomt::mass::VectorMass;
use vomt::solver::SolverConfig;
use vomt::w1::{default_costs, w1_action, w1_graph, w1_vector};

fn main() -> vomt::Result<()> {
    let g = grid_graph(&[3, 3], 1.0)?;
    let mut mu = vec![0.0; 9];
    let mut nu = vec![0.0; 9];
    mu[0] = 0.7;
    mu[4] = 0.3;
    nu[8] = 0.5;
    nu[6] = 0.5;
    let costs = default_costs(&g);

    let r = w1_graph(&g, &costs, &mu, &nu)?;
    println!("3x3 grid: W1 = {:.6}", r.value);
    println!(
        "  dual value {:.6}, gap {:.1e}, dual infeasibility {:.1e}",
        r.dual_value, r.gap, r.dual_infeasibility
    );
    for (&(i, j), f) in g.edges().iter().zip(&r.flow) {
        if f.abs() > 1e-12 {
            println!("  edge {i} -> {j}: {f:+.3}");
        }
    }

    let a = w1_action(&g, &costs, &mu, &nu, 16, &SolverConfig::default())?;
    println!("action form: {:.6} (converged {})", a.value, a.converged);

    // two channels on a line: moving mass across channels costs gamma
    let line = grid_graph(&[4], 1.0)?;
    let mu = VectorMass::from_channels(&[vec![0.5, 0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 0.5]])?;
    let nu = VectorMass::from_channels(&[vec![0.0, 0.0, 0.0, 0.5], vec![0.5, 0.0, 0.0, 0.0]])?;
    println!("\nswapping two channels on a line of 4 nodes");
    for gamma in [0.1, 1.0, 10.0] {
        let r = w1_vector(&line, &complete_graph(2, 1.0)?, gamma, &mu, &nu)?;
        println!("  gamma {gamma:>5}: W1 = {:.4}", r.value);
    }
    Ok(())
}
