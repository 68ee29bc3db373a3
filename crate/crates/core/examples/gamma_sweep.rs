//! Vector-valued interpolation of two bumps that trade places, for a range
//! of mutation costs. Small `gamma` makes relabelling cheap, so the channels
//! exchange mass in place; large `gamma` forces each bump to travel.
//!
//! ```bash
//! cargo run --release --example gamma_sweep
//! ```

use vomt::fixtures::{layered_line, swapped_bumps};
use vomt::solver::SolverConfig;
use vomt::transport::{assemble, solve, Geometry, Variant};

fn main() -> vomt::Result<()> {
    let cells = 32;
    let (mu, nu) = swapped_bumps(cells)?;
    let geometry = Geometry::Layered(layered_line(cells, 2)?);
    let cfg = SolverConfig::default();

    println!(
        "{:>8}  {:>10}  {:>13}  {:>14}  {:>10}",
        "gamma", "distance", "mutation flux", "mutation share", "iterations"
    );
    for gamma in [1e-4, 1e-2, 1.0, 1e2] {
        let p = assemble(
            Variant::SymmetricLayered,
            &geometry,
            mu.values(),
            nu.values(),
            gamma,
            16,
        )?;
        let (r, traj) = solve(&p, &cfg)?;
        let share = gamma * traj.mutation_action(&p) / r.objective;
        println!(
            "{gamma:>8.0e}  {:>10.5}  {:>13.3e}  {:>14.3}  {:>10}",
            r.value,
            traj.mutation_flux_mass(&p),
            share,
            r.iterations
        );
    }
    Ok(())
}
