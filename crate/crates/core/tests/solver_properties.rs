mod common;

use common::graph_and_pair;
use proptest::prelude::*;
use vomt::graph::LayeredGraph;
use vomt::oracle::{continuity_system, dense_projection};
use vomt::solver::ContinuityProjector;
use vomt::transport::{assemble, Geometry, TransportProblem, Variant};

fn problem(variant: Variant) -> impl Strategy<Value = TransportProblem> {
    (graph_and_pair(2, 4), 2usize..=5).prop_map(move |((g, mu, nu), n_t)| {
        let geo = if variant.is_layered() {
            Geometry::Layered(LayeredGraph::with_complete_mutation(g, 2).unwrap())
        } else {
            Geometry::Graph(g)
        };
        let dup = |v: &[f64]| -> Vec<f64> {
            if variant.is_layered() {
                v.iter().chain(v).map(|x| 0.5 * x).collect()
            } else {
                v.to_vec()
            }
        };
        assemble(variant, &geo, &dup(&mu), &dup(&nu), 0.7, n_t).unwrap()
    })
}

fn any_problem() -> impl Strategy<Value = TransportProblem> {
    prop_oneof![
        problem(Variant::SymmetricGraph),
        problem(Variant::AsymmetricGraph),
        problem(Variant::SymmetricLayered),
        problem(Variant::AsymmetricLayered),
    ]
}

fn with_point(p: TransportProblem) -> impl Strategy<Value = (TransportProblem, Vec<f64>)> {
    let len = p.program.stacked_len();
    (Just(p), proptest::collection::vec(-1.0f64..1.0, len))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, ..ProptestConfig::default() })]

    #[test]
    fn projection_matches_dense_oracle((p, x) in any_problem().prop_flat_map(with_point)) {
        let (a, b) = continuity_system(&p.program).unwrap();
        let want = dense_projection(&x, &a, &b).unwrap();
        let mut proj = ContinuityProjector::new(&p.program, 1e-13, 1000);
        let mut got = x.clone();
        let info = proj.project(&mut got, b.as_slice()).unwrap();
        prop_assert!(info.residual <= 1e-10, "residual {}", info.residual);
        let err = got.iter().zip(&want).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
        prop_assert!(err <= 1e-10, "max deviation from dense projection {err}");

        let mut again = got.clone();
        proj.project(&mut again, b.as_slice()).unwrap();
        let moved = again.iter().zip(&got).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
        prop_assert!(moved <= 1e-10);
    }

    #[test]
    fn operator_and_adjoint_agree((p, x) in any_problem().prop_flat_map(with_point), seed in 0u64..1000) {
        let proj = ContinuityProjector::new(&p.program, 1e-12, 100);
        let rows = p.program.constraint_len();
        let lambda: Vec<f64> = (0..rows).map(|i| ((i as u64 * 7919 + seed) % 17) as f64 / 8.0 - 1.0).collect();
        let mut ax = vec![0.0; rows];
        proj.apply_a(&x, &mut ax);
        let mut aty = vec![0.0; x.len()];
        proj.apply_at(&lambda, &mut aty);
        let lhs: f64 = ax.iter().zip(&lambda).map(|(u, v)| u * v).sum();
        let rhs: f64 = x.iter().zip(&aty).map(|(u, v)| u * v).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));

        let (a, _) = continuity_system(&p.program).unwrap();
        let dense = &a * nalgebra::DVector::from_column_slice(&x);
        let err = dense.iter().zip(&ax).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
        prop_assert!(err <= 1e-12);
    }

    #[test]
    fn projection_residual_is_orthogonal_to_the_feasible_set((p, x) in any_problem().prop_flat_map(with_point)) {
        let (a, b) = continuity_system(&p.program).unwrap();
        let mut proj = ContinuityProjector::new(&p.program, 1e-13, 1000);
        let mut xp = x.clone();
        proj.project(&mut xp, b.as_slice()).unwrap();
        // x - x' lies in the row space of A: removing its row-space part
        // through the eigenvectors of A A^T leaves nothing
        let d = nalgebra::DVector::from_iterator(x.len(), x.iter().zip(&xp).map(|(u, v)| u - v));
        let eig = (&a * a.transpose()).symmetric_eigen();
        let top = eig.eigenvalues.amax();
        let mut row_part = nalgebra::DVector::zeros(x.len());
        for (l, v) in eig.eigenvalues.iter().zip(eig.eigenvectors.column_iter()) {
            if *l > 1e-10 * top {
                let u = a.transpose() * v / l.sqrt();
                row_part += &u * u.dot(&d);
            }
        }
        let off = (row_part - &d).amax();
        prop_assert!(off <= 1e-8, "off {off}, |d| {}", d.amax());
    }
}
