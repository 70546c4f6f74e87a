//! Values computed independently (40-digit mpmath, brute-force spin sums,
//! a separate tree recursion) and frozen here.

use approx::assert_relative_eq;
use coexist_core::asymptotics::{gamma_prefactor, ssc_data, tune_mixture, tune_with, upsilon1, upsilon2_at_product};
use coexist_core::exact::{exact_potts, exact_rc, tree_exact, TreeBoundary};
use coexist_core::graphs::{augment, cycle_counts, MultiGraph};
use coexist_core::numerics::{b_plus, bp_step, critical_line, ising_magnetization, ColorLaw, ModelParams};

fn critical(d: usize, q: usize, frac: f64) -> ModelParams {
    let b = frac * b_plus(d, q as f64).unwrap();
    let (_, beta) = critical_line(d, q as f64, b, false).unwrap();
    ModelParams::new(d, q as f64, beta, b).unwrap()
}

#[test]
fn critical_line_at_three_three() {
    let (w0, beta0) = critical_line(3, 3.0, 0.0, true).unwrap();
    assert_relative_eq!(w0, 2.8473221018630726, max_relative = 1e-13);
    assert_relative_eq!(beta0, 1.3473773483293841, max_relative = 1e-13);
    assert_relative_eq!(b_plus(3, 3.0).unwrap(), 0.006166462861748783, max_relative = 1e-10);
}

#[test]
fn bp_step_value() {
    let p = ModelParams::new(3, 3.0, 1.3474, 0.003).unwrap();
    let nu = ColorLaw::new(vec![0.5, 0.25, 0.25]).unwrap();
    let out = bp_step(&p, &nu).unwrap();
    let want = [0.50132380103761922982, 0.24933809948119038509, 0.24933809948119038509];
    for (a, b) in out.probs().iter().zip(want) {
        assert_relative_eq!(*a, b, max_relative = 1e-13);
    }
}

#[test]
fn ising_plus_phase() {
    let (x, xs, m) = ising_magnetization(3, 1.0, 1e-15).unwrap();
    assert_relative_eq!(x, 0.97487074821269843639, max_relative = 1e-12);
    assert_relative_eq!(xs, 0.99587850160424885265, max_relative = 1e-12);
    assert_relative_eq!(m, 0.99175700320849770531, max_relative = 1e-12);
    // Uniqueness side: (d-1) tanh(beta) <= 1.
    assert_eq!(ising_magnetization(3, 0.5, 1e-15).unwrap().2, 0.0);
}

#[test]
fn small_potts_sums() {
    // beta = B = ln 2 makes every weight a power of two.
    let p = ModelParams::new(3, 3.0, 2f64.ln(), 2f64.ln()).unwrap();
    let tri = exact_potts(&MultiGraph::cycle(3), &p, None).unwrap();
    assert_relative_eq!(tri.z, 176.0, max_relative = 1e-13);
    assert_relative_eq!(tri.pair_agree[&(0, 1)], 27.0 / 44.0, max_relative = 1e-13);
    assert_relative_eq!(tri.favored[0], 27.0 / 44.0, max_relative = 1e-13);
    let c4 = MultiGraph::cycle(4);
    let sq = exact_potts(&c4, &p, None).unwrap();
    assert_relative_eq!(sq.z, 962.0, max_relative = 1e-13);
    assert_relative_eq!(sq.pair_agree[&(0, 1)], 284.0 / 481.0, max_relative = 1e-13);
    assert_relative_eq!(sq.favored[0], 298.0 / 481.0, max_relative = 1e-13);
    let rc = exact_rc(&augment(&c4).unwrap(), &p).unwrap();
    assert_relative_eq!(rc.z, 962.0, max_relative = 1e-12);
}

#[test]
fn tree_connection_probabilities() {
    let p = ModelParams::new(3, 3.0, 0.4, 1.0).unwrap();
    let free = [
        0.36417532714874366479,
        0.52131519144229592978,
        0.56228410657973376777,
        0.57297300867315367045,
        0.57577357494862892285,
        0.57650838202974427722,
    ];
    let wired = [
        0.72789148964271286273,
        0.61762307702429324601,
        0.58755293420714514496,
        0.5796042711053248929,
        0.57751422364244794362,
        0.57696532174606520457,
    ];
    for r in 1..=6 {
        let f = tree_exact(3, r, &p, &TreeBoundary::Free).unwrap();
        let w = tree_exact(3, r, &p, &TreeBoundary::Wired).unwrap();
        assert_relative_eq!(f.psi_r, free[r - 1], max_relative = 1e-12);
        assert_relative_eq!(w.psi_r, wired[r - 1], max_relative = 1e-12);
    }
    // Favored-color probability at depth 2 from a direct spin sum.
    let f2 = tree_exact(3, 2, &p, &TreeBoundary::Free).unwrap();
    let w2 = tree_exact(3, 2, &p, &TreeBoundary::Wired).unwrap();
    assert_relative_eq!(f2.root_favored, 0.68087679429486395319, max_relative = 1e-12);
    assert_relative_eq!(w2.root_favored, 0.74508205134952883067, max_relative = 1e-12);
}

#[test]
fn petersen_cycles() {
    let c = cycle_counts(&MultiGraph::petersen(), 9).unwrap();
    let want = [(3, 0), (4, 0), (5, 12), (6, 10), (7, 0), (8, 15), (9, 20)];
    for (k, n) in want {
        assert_eq!(c.count(k), n, "k = {k}");
    }
    assert_eq!(c.girth, Some(5));
}

#[test]
fn prefactor_ratio() {
    // 30-digit mpmath: Sinkhorn maximizer plus a finite-difference Hessian.
    for (d, q, frac, want) in [
        (3, 3, 0.5, 1.8702625558385222),
        (3, 5, 0.5, 3.9173861913886604),
        (4, 3, 0.1, 2.5891914381158564),
    ] {
        let g = gamma_prefactor(&critical(d, q, frac)).unwrap();
        assert_relative_eq!(g.gamma, want, max_relative = 1e-7);
        assert!((g.upsilon1_free - g.upsilon1_wired).abs() < 1e-9);
    }
}

#[test]
fn second_moment_doubles_first() {
    let p = critical(3, 4, 0.5);
    for alpha in [vec![0.25; 4], vec![0.4, 0.2, 0.3, 0.1]] {
        let u1 = upsilon1(&p, &alpha).unwrap().value;
        let u2 = upsilon2_at_product(&p, &alpha).unwrap();
        assert_relative_eq!(u2, 2.0 * u1, max_relative = 1e-12, epsilon = 1e-12);
    }
}

#[test]
fn tuned_plans() {
    // Replayed at 40 digits from a numeric eigensolve of the transfer matrix.
    for (d, q, frac, want) in [
        (3, 5, 0.5, (4, 4, 7, 67, 1.00518118247646)),
        (3, 3, 0.5, (4, 2, 6, 2, 1.00195987613082)),
        (4, 3, 0.1, (5, 4, 4, 4, 1.00347775884202)),
    ] {
        let plan = tune_mixture(&critical(d, q, frac), 0.5, 100).unwrap();
        assert_eq!((plan.d_star, plan.p, plan.k, plan.x), (want.0, want.1, want.2, want.3));
        assert_relative_eq!(plan.predicted_ratio, want.4, max_relative = 1e-7);
        assert!(plan.in_bracket());
    }
}

#[test]
fn planner_rejects_bad_inputs() {
    let p = critical(3, 3, 0.5);
    let ssc = ssc_data(&p, 200).unwrap();
    assert!(tune_with(&p, &ssc, 1.0, 100).is_err());
    assert!(tune_with(&p, &ssc, 0.5, 0).is_err());
    let off = ModelParams::new(3, 3.0, p.beta() + 0.01, p.b()).unwrap();
    assert!(gamma_prefactor(&off).is_err());
}
