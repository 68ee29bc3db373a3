mod common;

use common::graph_and_pair;
use proptest::prelude::*;
use vomt::fixtures::{layered_line, swapped_bumps};
use vomt::graph::{path_graph, Graph, LayeredGraph};
use vomt::mass::DensityTable;
use vomt::solver::SolverConfig;
use vomt::transport::{
    assemble, continuity_residual, export_trajectory, solve, Geometry, Trajectory, TrajectoryManifest, Variant,
};

fn quick() -> ProptestConfig {
    ProptestConfig {
        cases: 12,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(quick())]

    #[test]
    fn distinct_marginals_have_positive_distance((g, mu, nu) in graph_and_pair(2, 6)) {
        let cfg = SolverConfig::default();
        let geo = Geometry::Graph(g);
        for v in [Variant::SymmetricGraph, Variant::AsymmetricGraph] {
            let p = assemble(v, &geo, &mu, &nu, 1.0, 16).unwrap();
            let (r, _) = solve(&p, &cfg).unwrap();
            prop_assert!(r.converged);
            prop_assert!(r.value > cfg.feasibility_tol, "{} {}", v.as_str(), r.value);
        }
    }

    #[test]
    fn orientation_does_not_matter(
        (g, mu, nu) in graph_and_pair(2, 5),
        flips in proptest::collection::vec(any::<bool>(), 10),
    ) {
        let cfg = SolverConfig::default();
        let flip: Vec<usize> = (0..g.edge_count()).filter(|&k| flips[k % flips.len()]).collect();
        let h = g.reoriented(&flip).unwrap();
        for v in [Variant::SymmetricGraph, Variant::AsymmetricGraph] {
            let a = solve(&assemble(v, &Geometry::Graph(g.clone()), &mu, &nu, 1.0, 16).unwrap(), &cfg).unwrap().0;
            let b = solve(&assemble(v, &Geometry::Graph(h.clone()), &mu, &nu, 1.0, 16).unwrap(), &cfg).unwrap().0;
            prop_assert!((a.value - b.value).abs() <= 1e-4 * a.value, "{} vs {}", a.value, b.value);
        }
    }

    #[test]
    fn slices_stay_on_the_simplex((g, mu, nu) in graph_and_pair(2, 4)) {
        let cfg = SolverConfig::default();
        let lay = Geometry::Layered(LayeredGraph::with_complete_mutation(g, 2).unwrap());
        let half = |v: &[f64]| v.iter().chain(v).map(|x| 0.5 * x).collect::<Vec<_>>();
        let (mu2, nu2) = (half(&mu), half(&nu));
        for v in [Variant::SymmetricLayered, Variant::AsymmetricLayered] {
            let p = assemble(v, &lay, &mu2, &nu2, 0.5, 8).unwrap();
            let (r, traj) = solve(&p, &cfg).unwrap();
            prop_assert!(r.converged);
            for k in 0..=traj.n_t {
                let total: f64 = traj.densities[k].iter().sum();
                prop_assert!((total - 1.0).abs() <= 1e-8);
                for m in traj.channel_masses(k) {
                    prop_assert!((-1e-8..=1.0 + 1e-8).contains(&m));
                }
            }
        }
    }

    #[test]
    fn asymmetric_flux_uses_one_direction((g, mu, nu) in graph_and_pair(2, 5)) {
        let cfg = SolverConfig::default();
        let p = assemble(Variant::AsymmetricGraph, &Geometry::Graph(g), &mu, &nu, 1.0, 16).unwrap();
        let (r, traj) = solve(&p, &cfg).unwrap();
        prop_assert!(r.converged);
        prop_assert_eq!(traj.fluxes.len(), 2);
        let (fwd, bwd) = (&traj.fluxes[0], &traj.fluxes[1]);
        prop_assert!(fwd.sign * bwd.sign < 0.0);
        for (a, b) in fwd.values.iter().flatten().zip(bwd.values.iter().flatten()) {
            prop_assert!(a.min(*b) <= 1e-5, "both directions active: {a} {b}");
        }
    }
}

fn k2() -> Geometry {
    Geometry::Graph(Graph::from_edges(&[(0, 1, 1.0)]).unwrap())
}

#[test]
fn identical_marginals_give_zero() {
    let cfg = SolverConfig::default();
    let g = Geometry::Graph(path_graph(4, 1.0).unwrap());
    let mu = [0.1, 0.2, 0.3, 0.4];
    for v in [Variant::SymmetricGraph, Variant::AsymmetricGraph] {
        let (r, _) = solve(&assemble(v, &g, &mu, &mu, 1.0, 16).unwrap(), &cfg).unwrap();
        assert!(r.value <= 1e-4, "{}", r.value);
    }
}

#[test]
fn solves_are_deterministic() {
    let cfg = SolverConfig::default();
    let (mu, nu) = swapped_bumps(8).unwrap();
    let lay = Geometry::Layered(layered_line(8, 2).unwrap());
    let p = assemble(Variant::SymmetricLayered, &lay, mu.values(), nu.values(), 1.0, 8).unwrap();
    let (a, ta) = solve(&p, &cfg).unwrap();
    let (b, tb) = solve(&p, &cfg).unwrap();
    assert_eq!(a.iterations, b.iterations);
    assert!((a.objective - b.objective).abs() <= 1e-12);
    assert_eq!(ta, tb);
}

#[test]
fn action_is_midpoint_convex_between_feasible_paths() {
    let p = assemble(Variant::AsymmetricGraph, &k2(), &[0.8, 0.2], &[0.3, 0.7], 1.0, 16).unwrap();
    // truncated runs still return exactly feasible iterates
    let run = |iters: usize| {
        let cfg = SolverConfig {
            max_iters: iters,
            ..SolverConfig::default()
        };
        solve(&p, &cfg).unwrap().1
    };
    let paths: Vec<Trajectory> = [2, 7, 30, 50_000].into_iter().map(run).collect();
    for a in &paths {
        assert!(continuity_residual(a, &p).unwrap().residual <= 1e-10);
        for b in &paths {
            let mut mid = a.clone();
            for (m, y) in mid.densities.iter_mut().flatten().zip(b.densities.iter().flatten()) {
                *m = 0.5 * (*m + y);
            }
            for (m, y) in mid.fluxes.iter_mut().zip(&b.fluxes) {
                for (u, v) in m.values.iter_mut().flatten().zip(y.values.iter().flatten()) {
                    *u = 0.5 * (*u + v);
                }
            }
            let (fa, fb, fm) = (a.action(&p), b.action(&p), mid.action(&p));
            assert!(fm <= 0.5 * (fa + fb) + 1e-10, "{fm} > mean of {fa}, {fb}");
        }
    }
}

#[test]
fn mutation_flux_decreases_with_gamma() {
    let cfg = SolverConfig::default();
    let (mu, nu) = swapped_bumps(12).unwrap();
    let lay = Geometry::Layered(layered_line(12, 2).unwrap());
    let flux: Vec<f64> = [1e-4, 1e-2, 1.0, 1e2]
        .into_iter()
        .map(|gamma| {
            let p = assemble(Variant::SymmetricLayered, &lay, mu.values(), nu.values(), gamma, 8).unwrap();
            let (r, traj) = solve(&p, &cfg).unwrap();
            assert!(r.converged);
            traj.mutation_flux_mass(&p)
        })
        .collect();
    assert!(flux.windows(2).all(|w| w[1] <= w[0]), "{flux:?}");
}

#[test]
fn exported_slices_round_trip() {
    let cfg = SolverConfig::default();
    let (mu, nu) = swapped_bumps(6).unwrap();
    let lay = Geometry::Layered(layered_line(6, 2).unwrap());
    let p = assemble(Variant::AsymmetricLayered, &lay, mu.values(), nu.values(), 1.0, 4).unwrap();
    let (r, traj) = solve(&p, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = export_trajectory(&traj, &p, &r, dir.path()).unwrap();
    assert_eq!(files.len(), traj.n_t + 2);
    let manifest: TrajectoryManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.n_t, 4);
    assert_eq!(manifest.channels, 2);
    assert_eq!(manifest.gamma, Some(1.0));
    for (name, slice) in manifest.slices.iter().zip(&traj.densities) {
        let back = DensityTable::read(dir.path().join(name)).unwrap().composite();
        for (a, b) in back.iter().zip(slice) {
            assert!((a - b.max(0.0)).abs() <= 1e-12);
        }
    }
}
