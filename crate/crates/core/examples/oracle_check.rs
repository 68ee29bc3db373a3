//! Cross-checks the first-order solver against the slow, independent
//! reference solver on a small layered problem.
//!
//! ```bash
//! cargo run --release --example oracle_check
//! ```

use vomt::graph::{grid_graph, LayeredGraph};
use vomt::oracle::smoothed_dynamic_solve;
use vomt::solver::SolverConfig;
use vomt::transport::{assemble, solve, Geometry, Variant};

fn main() -> vomt::Result<()> {
    let geometry = Geometry::Layered(LayeredGraph::with_complete_mutation(grid_graph(&[3, 3], 0.5)?, 2)?);
    let weights: Vec<f64> = (0..18).map(|i| 1.0 + (0.7 * i as f64).sin().abs()).collect();
    let total: f64 = weights.iter().sum();
    let mu: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let nu: Vec<f64> = mu.iter().rev().cloned().collect();

    for v in [Variant::SymmetricLayered, Variant::AsymmetricLayered] {
        let p = assemble(v, &geometry, &mu, &nu, 1.0, 8)?;
        let (fast, _) = solve(&p, &SolverConfig::default())?;
        let slow = smoothed_dynamic_solve(&p, 1e-9)?;
        println!(
            "{:<19} solver {:.8} ({:.2}s)   reference {:.8} ({} iterations)   relative difference {:.1e}",
            v.as_str(),
            fast.value,
            fast.wall_time_s,
            slow.value,
            slow.iterations,
            (fast.value - slow.value).abs() / slow.value
        );
    }
    Ok(())
}
