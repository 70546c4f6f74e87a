use coexist_core::asymptotics::{q_matrix_eigs, ssc_products, Which};
use coexist_core::exact::{exact_potts, exact_rc, rank2, tree_exact, TreeBoundary};
use coexist_core::graphs::{augment, cycle_counts, sample_pairing_model, MultiGraph};
use coexist_core::numerics::{
    b_plus, bethe_functional, bp_fixed_points, bp_step, critical_line, reduced_bp, ColorLaw, ModelParams,
};
use proptest::prelude::*;

fn critical(d: usize, q: usize, frac: f64) -> ModelParams {
    let b = frac * b_plus(d, q as f64).unwrap();
    let (_, beta) = critical_line(d, q as f64, b, false).unwrap();
    ModelParams::new(d, q as f64, beta, b).unwrap()
}

fn small_graph() -> impl Strategy<Value = MultiGraph> {
    (2usize..=5)
        .prop_flat_map(|n| {
            let pairs: Vec<(u32, u32)> = (0..n as u32).flat_map(|u| (u + 1..n as u32).map(move |v| (u, v))).collect();
            let m = pairs.len();
            (Just(n), Just(pairs), proptest::collection::vec(any::<bool>(), m))
        })
        .prop_map(|(n, pairs, keep)| {
            let edges = pairs.into_iter().zip(keep).filter(|(_, k)| *k).map(|(e, _)| e).collect();
            MultiGraph::new(n, edges).unwrap()
        })
}

fn potts() -> impl Strategy<Value = ModelParams> {
    (3usize..=5, 2usize..=4, 0.05f64..2.0, 0.0f64..1.5)
        .prop_map(|(d, q, beta, b)| ModelParams::new(d, q as f64 + 1.0, beta, b).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bp_step_is_a_law(p in potts(), raw in proptest::collection::vec(0.01f64..1.0, 5)) {
        let q = p.q_int().unwrap();
        let nu = ColorLaw::from_weights(&raw[..q]).unwrap();
        let out = bp_step(&p, &nu).unwrap();
        let s: f64 = out.probs().iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
        prop_assert!(out.probs().iter().all(|x| *x > 0.0));
    }

    #[test]
    fn reduced_map_is_increasing(p in potts(), a in 0.0f64..0.99, da in 0.001f64..0.01) {
        prop_assert!(reduced_bp(&p, a + da) >= reduced_bp(&p, a));
    }

    #[test]
    fn reduced_map_matches_vector_map(p in potts(), a in 0.01f64..0.99) {
        let q = p.q_int().unwrap();
        let nu = ColorLaw::from_reduced(q, a).unwrap();
        let out = bp_step(&p, &nu).unwrap();
        prop_assert!((out.probs()[0] - reduced_bp(&p, a)).abs() < 1e-12);
    }

    #[test]
    fn free_and_wired_bethe_agree_on_critical_line(d in 3usize..=5, q in 3usize..=8, frac in 0.05f64..0.95) {
        let p = critical(d, q, frac);
        let (nf, nw) = bp_fixed_points(&p, 1e-14, 1_000_000).unwrap();
        prop_assert!(nw.probs()[0] > nf.probs()[0]);
        let (pf, pw) = (bethe_functional(&p, &nf).unwrap(), bethe_functional(&p, &nw).unwrap());
        prop_assert!((pf - pw).abs() < 1e-9, "{} {}", pf, pw);
    }

    #[test]
    fn transfer_spectrum_matches_closed_form(d in 3usize..=5, q in 3usize..=7, frac in 0.05f64..0.95) {
        let p = critical(d, q, frac);
        for which in [Which::Free, Which::Wired] {
            let e = q_matrix_eigs(&p, which).unwrap();
            prop_assert!(e.max_abs_closed_vs_numeric() < 1e-9);
            prop_assert!((e.numeric[0] - 1.0).abs() < 1e-10);
        }
        let s = ssc_products(&p, 200).unwrap();
        prop_assert!(s.lambda2_tied);
    }

    #[test]
    fn potts_equals_random_cluster(g in small_graph(), p in potts()) {
        let zp = exact_potts(&g, &p, None).unwrap();
        let zr = exact_rc(&augment(&g).unwrap(), &p).unwrap();
        prop_assert!((zp.log_z - zr.log_z).abs() < 1e-10);
        let q = p.q();
        for (uv, agree) in &zp.pair_agree {
            let conn = zr.connect[uv];
            prop_assert!((agree - ((q - 1.0) / q * conn + 1.0 / q)).abs() < 1e-10);
        }
    }

    #[test]
    fn rank2_never_exceeds_partition_function(g in small_graph(), p in potts()) {
        let z = exact_potts(&g, &p, None).unwrap().log_z;
        let r = rank2(&g, &p, None).unwrap();
        prop_assert!(r.log_z_rank2 <= z + 1e-10);
    }

    #[test]
    fn tree_boundaries_are_ordered(beta in 0.1f64..1.5, b in 0.1f64..1.5, r in 1usize..6) {
        let p = ModelParams::new(3, 3.0, beta, b).unwrap();
        let f = tree_exact(3, r, &p, &TreeBoundary::Free).unwrap().psi_r;
        let w = tree_exact(3, r, &p, &TreeBoundary::Wired).unwrap().psi_r;
        let f2 = tree_exact(3, r + 1, &p, &TreeBoundary::Free).unwrap().psi_r;
        let w2 = tree_exact(3, r + 1, &p, &TreeBoundary::Wired).unwrap().psi_r;
        prop_assert!(f <= f2 + 1e-14 && f2 <= w2 + 1e-14 && w2 <= w + 1e-14);
    }

    #[test]
    fn pairing_model_is_regular_and_seeded(n in 4usize..60, d in 3usize..=5, seed in any::<u64>()) {
        prop_assume!(n * d % 2 == 0);
        let g = sample_pairing_model(n, d, seed).unwrap();
        prop_assert_eq!(g.regular_degree(), Some(d));
        prop_assert_eq!(g.edges().len(), n * d / 2);
        prop_assert_eq!(g, sample_pairing_model(n, d, seed).unwrap());
    }

    #[test]
    fn cycle_graph_has_one_cycle(n in 3usize..12) {
        let c = cycle_counts(&MultiGraph::cycle(n), 12).unwrap();
        for k in 3..=12 {
            prop_assert_eq!(c.count(k), u64::from(k == n));
        }
    }

    #[test]
    fn ghost_augmentation_adds_one_edge_per_vertex(g in small_graph()) {
        let a = augment(&g).unwrap();
        prop_assert_eq!(a.vertex_count(), g.n() + 1);
        prop_assert_eq!(a.edges().len(), g.edges().len() + g.n());
        prop_assert_eq!(a.base_edge_count(), g.edges().len());
    }
}
