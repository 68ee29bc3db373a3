//! Quadratic transport distances between two densities on a small graph.
//!
//! Solves the symmetric and the asymmetric graph distance on the two-node
//! graph, where closed forms exist, then on a weighted path, and writes the
//! geodesic slices of the last solve to a directory.
//!
//! ```bash
//! cargo run --release --example graph_distance [output-dir]
//! ```

use vomt::graph::{path_graph, Graph};
use vomt::solver::SolverConfig;
use vomt::transport::{assemble, export_trajectory, solve, Geometry, Variant};

fn main() -> vomt::Result<()> {
    let cfg = SolverConfig::default();
    let k2 = Geometry::Graph(Graph::from_edges(&[(0, 1, 1.0)])?);

    println!("two nodes, (0.9, 0.1) -> (0.1, 0.9)");
    for v in [Variant::SymmetricGraph, Variant::AsymmetricGraph] {
        let p = assemble(v, &k2, &[0.9, 0.1], &[0.1, 0.9], 1.0, 64)?;
        let (r, _) = solve(&p, &cfg)?;
        println!("  {:<17} {:.6}  ({} iterations)", v.as_str(), r.value, r.iterations);
    }
    println!("  closed form for the symmetric distance: {:.6}", 2.0 * 0.8f64.asin());

    // the asymmetric distance depends on the direction of travel
    let (mu, nu) = ([0.9, 0.1], [0.5, 0.5]);
    let there = solve(&assemble(Variant::AsymmetricGraph, &k2, &mu, &nu, 1.0, 64)?, &cfg)?.0;
    let back = solve(&assemble(Variant::AsymmetricGraph, &k2, &nu, &mu, 1.0, 64)?, &cfg)?.0;
    println!(
        "\nasymmetric: W(mu, nu) = {:.6}, W(nu, mu) = {:.6}",
        there.value, back.value
    );

    let path = Geometry::Graph(path_graph(5, 2.0)?);
    let mu = [0.6, 0.2, 0.1, 0.05, 0.05];
    let nu = [0.05, 0.05, 0.1, 0.2, 0.6];
    let p = assemble(Variant::SymmetricGraph, &path, &mu, &nu, 1.0, 32)?;
    let (r, traj) = solve(&p, &cfg)?;
    println!("\npath of 5 nodes: distance {:.6}, converged {}", r.value, r.converged);
    println!(
        "continuity residual {:.1e}, mass drift {:.1e}",
        r.residuals.continuity, r.residuals.mass_drift
    );
    for k in (0..=traj.n_t).step_by(8) {
        let row: Vec<String> = traj.densities[k].iter().map(|v| format!("{v:.3}")).collect();
        println!("  t = {:.2}: [{}]", k as f64 / traj.n_t as f64, row.join(", "));
    }

    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| std::env::temp_dir().join("vomt-graph-distance").display().to_string());
    let files = export_trajectory(&traj, &p, &r, &dir)?;
    println!("\nwrote {} files to {dir}", files.len());
    Ok(())
}
