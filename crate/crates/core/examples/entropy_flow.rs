//! Steepest entropy ascent on a graph, next to the linear heat equation
//! started from the same density.
//!
//! ```bash
//! cargo run --release --example entropy_flow
//! ```

use vomt::entropy::{entropy, flow_rhs, integrate};
use vomt::graph::path_graph;

fn main() -> vomt::Result<()> {
    let g = path_graph(4, 1.0)?;
    let rho0 = [0.7, 0.1, 0.15, 0.05];
    println!("initial velocity {:?}", flow_rhs(&g, &rho0)?);

    let h = 1e-2;
    let states = integrate(&g, &rho0, h, 2000)?;
    let mut heat = rho0.to_vec();
    println!(
        "{:>6}  {:>8}  {:>34}  {:>34}",
        "t", "entropy", "entropy flow", "heat flow"
    );
    for (k, s) in states.iter().enumerate() {
        if k % 250 == 0 {
            let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");
            println!(
                "{:>6.2}  {:>8.5}  {:>34}  {:>34}",
                s.t,
                s.entropy,
                fmt(&s.rho),
                fmt(&heat)
            );
        }
        if k + 1 < states.len() {
            heat = g.heat_step(&heat, h)?;
        }
    }
    println!("maximum entropy log(4) = {:.5}", entropy(&[0.25; 4])?);
    Ok(())
}
