//! Synthetic marginals shared by the CLI, the examples and the test suites.

use crate::error::Result;
use crate::graph::{grid_graph, LayeredGraph};
use crate::mass::VectorMass;

/// Width of each bump relative to the unit interval.
pub const BUMP_WIDTH: f64 = 0.06;
/// Uniform floor added to every bump before normalization.
pub const BUMP_FLOOR: f64 = 1e-3;

/// Gaussian bump on `cells` cell centers of `[0, 1]`, plus a small floor,
/// scaled to total `mass`.
pub fn bump(cells: usize, center: f64, mass: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..cells)
        .map(|i| {
            let x = (i as f64 + 0.5) / cells as f64;
            (-(x - center).powi(2) / (2.0 * BUMP_WIDTH * BUMP_WIDTH)).exp() + BUMP_FLOOR
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v * mass / total).collect()
}

/// Two channels of equal mass on a 1-D grid: channel 0 sits at `1/4` and
/// channel 1 at `3/4` initially, and the positions are swapped at the end.
/// Moving the bumps costs transport across half the domain; relabelling
/// them costs only mutation.
pub fn swapped_bumps(cells: usize) -> Result<(VectorMass, VectorMass)> {
    let mu = VectorMass::from_channels(&[bump(cells, 0.25, 0.5), bump(cells, 0.75, 0.5)])?;
    let nu = VectorMass::from_channels(&[bump(cells, 0.75, 0.5), bump(cells, 0.25, 0.5)])?;
    Ok((mu, nu))
}

/// One channel moving from `1/4` to `3/4` while the other stays put.
pub fn shifted_bump(cells: usize) -> Result<(VectorMass, VectorMass)> {
    let still = bump(cells, 0.5, 0.5);
    let mu = VectorMass::from_channels(&[bump(cells, 0.25, 0.5), still.clone()])?;
    let nu = VectorMass::from_channels(&[bump(cells, 0.75, 0.5), still])?;
    Ok((mu, nu))
}

/// `cells`-point line with spacing `1 / cells` and `channels` layers joined
/// by the complete mutation graph.
pub fn layered_line(cells: usize, channels: usize) -> Result<LayeredGraph> {
    LayeredGraph::with_complete_mutation(grid_graph(&[cells], 1.0 / cells as f64)?, channels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bumps_are_normalized_and_swapped() {
        let (mu, nu) = swapped_bumps(32).unwrap();
        assert_eq!((mu.channels(), mu.nodes()), (2, 32));
        for c in 0..2 {
            assert!((mu.channel_mass(c) - 0.5).abs() < 1e-14);
            assert!((nu.channel_mass(c) - 0.5).abs() < 1e-14);
        }
        assert_eq!(mu.channel(0), nu.channel(1));
        let b = bump(32, 0.25, 1.0);
        let peak = b.iter().cloned().fold(0.0, f64::max);
        // 1/4 falls between cells 7 and 8
        let argmax = b.iter().position(|v| *v == peak).unwrap();
        assert!(argmax == 7 || argmax == 8);
    }
}
