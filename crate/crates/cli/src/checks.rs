//! Invariant checks shared by `coexist verify` and the acceptance tests.
//! Each check returns its measurements; callers own the tolerances.

use coexist_core::asymptotics::{
    cavity_chain, cavity_delta, channel_contraction, predicted_ratio, q_matrix_eigs, ssc_data, tune_with, Which,
};
use coexist_core::exact::{
    exact_potts, exact_rc, rank2, set_partitions, sprinkle_domination_check, tree_exact, TreeBoundary,
};
use coexist_core::graphs::{augment, cycle_counts, sample_pairing_model, CycleStats, MultiGraph};
use coexist_core::numerics::{
    b_plus, bethe_functional, bp_fixed_points, critical_line, ising_beta_uni, ising_magnetization, ising_reduction,
    rcm_bp_fixed_points, ModelParams, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use coexist_core::rng::{seeded, DrawStream, Phase, StreamKey};
use coexist_core::sampler::{run_chain_on, sw_sweep, ChainConfig, ChainMode, GraphSpec, InitKind, PairingSpec, ParamsSpec, SpinConfig};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub description: String,
    pub passed: bool,
    pub detail: Value,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.description)
    }
}

fn run(name: &str, description: &str, f: impl FnOnce() -> coexist_core::Result<(bool, Value)>) -> CheckResult {
    let (passed, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, json!({ "error": e.to_string() })),
    };
    CheckResult {
        name: name.into(),
        description: description.into(),
        passed,
        detail,
    }
}

/// `(d, q)` pairs of the critical test grid.
pub const CRITICAL_PAIRS: [(usize, usize); 4] = [(3, 3), (3, 5), (4, 3), (15, 45)];

/// Critical parameters at `B = B_+ k / (per_pair + 1)`, `k = 1..=per_pair`.
pub fn critical_grid(pairs: &[(usize, usize)], per_pair: usize) -> coexist_core::Result<Vec<ModelParams>> {
    let mut out = Vec::new();
    for &(d, q) in pairs {
        let bp = b_plus(d, q as f64)?;
        for k in 1..=per_pair {
            let b = bp * k as f64 / (per_pair + 1) as f64;
            let (_, beta) = critical_line(d, q as f64, b, false)?;
            out.push(ModelParams::new(d, q as f64, beta, b)?);
        }
    }
    Ok(out)
}

fn label(p: &ModelParams) -> String {
    format!("d={} q={} B={:.6e}", p.d(), p.q(), p.b())
}

/// Every connected graph on `n` vertices up to isomorphism, as a simple graph.
pub fn connected_graphs(n: usize) -> Vec<MultiGraph> {
    assert!((1..=7).contains(&n), "enumeration supports 1 <= n <= 7");
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let index: BTreeMap<(usize, usize), usize> = pairs.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let perms = permutations(n);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << pairs.len()) {
        let edges: Vec<(u32, u32)> = (0..pairs.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| (pairs[i].0 as u32, pairs[i].1 as u32))
            .collect();
        if edges.len() + 1 < n {
            continue;
        }
        let g = MultiGraph::new(n, edges).expect("valid");
        if !g.is_connected() {
            continue;
        }
        let canon = perms
            .iter()
            .map(|p| {
                g.edges().iter().fold(0u64, |acc, &(a, b)| {
                    let (x, y) = (p[a as usize], p[b as usize]);
                    acc | 1u64 << index[&(x.min(y), x.max(y))]
                })
            })
            .min()
            .expect("nonempty");
        if seen.insert(canon) {
            out.push(g);
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let mut p: Vec<usize> = (0..n).collect();
    fn heap(k: usize, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(p.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, p, out);
            let j = if k % 2 == 0 { i } else { 0 };
            p.swap(j, k - 1);
        }
    }
    heap(n, &mut p, &mut out);
    out
}

/// Erdos-Renyi graph conditioned on being connected.
pub fn random_connected_graph(rng: &mut DrawStream, n: usize, p: f64) -> MultiGraph {
    loop {
        let mut edges = Vec::new();
        for a in 0..n as u32 {
            for b in a + 1..n as u32 {
                if rng.bernoulli(p) {
                    edges.push((a, b));
                }
            }
        }
        let g = MultiGraph::new(n, edges).expect("valid");
        if g.is_connected() {
            return g;
        }
    }
}

/// Random recursive forest: vertex `v > 0` attaches to a uniform earlier
/// vertex with probability `keep`.
pub fn random_forest(rng: &mut DrawStream, n: usize, keep: f64) -> MultiGraph {
    let edges = (1..n as u32)
        .filter_map(|v| {
            let parent = rng.below(v as u64) as u32;
            rng.bernoulli(keep).then_some((parent, v))
        })
        .collect();
    MultiGraph::new(n, edges).expect("valid")
}

fn random_potts_params(rng: &mut DrawStream) -> ModelParams {
    let q = 3 + rng.below(3) as usize;
    let beta = 2.0 * rng.uniform();
    let b = 2.0 * rng.uniform();
    ModelParams::new(3, q as f64, beta, b).expect("valid")
}

/// Potts and random-cluster partition functions agree.
pub fn potts_rc_equality(n_graphs: usize, draws: usize, max_n: usize, seed: u64, tol: f64) -> CheckResult {
    run("potts_rc_equality", "Potts and random-cluster partition functions coincide", || {
        let mut rng = seeded(seed);
        let mut tasks = Vec::new();
        for _ in 0..n_graphs {
            let n = 2 + rng.below(max_n as u64 - 1) as usize;
            let p = 0.3 + 0.6 * rng.uniform();
            let g = random_connected_graph(&mut rng, n, p);
            for _ in 0..draws {
                tasks.push((g.clone(), random_potts_params(&mut rng)));
            }
        }
        let res: Vec<f64> = tasks
            .par_iter()
            .map(|(g, p)| -> coexist_core::Result<f64> {
                let zp = exact_potts(g, p, None)?;
                let zr = exact_rc(&augment(g)?, p)?;
                Ok(((zp.log_z - zr.log_z).exp_m1()).abs())
            })
            .collect::<coexist_core::Result<_>>()?;
        let worst = res.iter().copied().fold(0.0, f64::max);
        Ok((worst <= tol, json!({ "cases": res.len(), "max_rel_diff": worst, "tol": tol })))
    })
}

/// Pair agreement equals `(q-1)/q * connection + 1/q`; K2 values pinned.
pub fn es_identity(max_n: usize, tol: f64) -> CheckResult {
    run("es_identity", "spin agreement matches cluster connection on every pair", || {
        let p = ModelParams::new(3, 3.0, 2f64.ln(), 2f64.ln())?;
        let k2 = MultiGraph::path(2);
        let zp = exact_potts(&k2, &p, None)?;
        let zr = exact_rc(&augment(&k2)?, &p)?;
        let k2_err = [
            (zp.z - 22.0).abs() / 22.0,
            (zr.z - 22.0).abs() / 22.0,
            (zr.connect[&(0, 1)] - 7.0 / 22.0).abs(),
            (zp.pair_agree[&(0, 1)] - 6.0 / 11.0).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        let params = [ModelParams::new(3, 3.0, 0.7, 0.3)?, ModelParams::new(3, 4.0, 1.1, 0.9)?];
        let graphs: Vec<MultiGraph> = (1..=max_n).flat_map(connected_graphs).collect();
        let worst = graphs
            .par_iter()
            .map(|g| -> coexist_core::Result<f64> {
                let mut w: f64 = 0.0;
                for p in &params {
                    let q = p.q();
                    let zp = exact_potts(g, p, None)?;
                    let zr = exact_rc(&augment(g)?, p)?;
                    for (k, agree) in &zp.pair_agree {
                        w = w.max((agree - ((q - 1.0) / q * zr.connect[k] + 1.0 / q)).abs());
                    }
                }
                Ok(w)
            })
            .collect::<coexist_core::Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        Ok((
            k2_err <= tol && worst <= tol,
            json!({ "k2_max_err": k2_err, "graphs": graphs.len(), "max_residual": worst, "tol": tol }),
        ))
    })
}

/// Rank-2 sum never exceeds the partition function; equality on forests.
pub fn rank2_inequality(n_graphs: usize, max_n: usize, seed: u64, tol: f64) -> CheckResult {
    run("rank2_inequality", "rank-2 sum is below the partition function, equal on forests", || {
        let mut rng = seeded(seed);
        let p_k2 = ModelParams::new(3, 3.0, 2f64.ln(), 2f64.ln())?;
        let k2 = rank2(&MultiGraph::path(2), &p_k2, None)?.z_rank2;
        let k2_ok = (k2 - 22.0).abs() <= tol * 22.0;
        let (mut worst_excess, mut cyclic, mut strict_fail) = (f64::NEG_INFINITY, 0usize, 0usize);
        for _ in 0..n_graphs {
            let n = 2 + rng.below(max_n as u64 - 1) as usize;
            let density = 0.3 + 0.6 * rng.uniform();
            let g = random_connected_graph(&mut rng, n, density);
            let p = random_potts_params(&mut rng);
            let z = exact_potts(&g, &p, None)?.log_z;
            let zt = rank2(&g, &p, None)?.log_z_rank2;
            worst_excess = worst_excess.max((zt - z).exp_m1());
            if g.edges().len() >= g.n() {
                cyclic += 1;
                if zt >= z {
                    strict_fail += 1;
                }
            }
        }
        let mut forest_err: f64 = 0.0;
        for _ in 0..n_graphs {
            let n = 1 + rng.below(max_n as u64) as usize;
            let g = random_forest(&mut rng, n, 0.8);
            let p = random_potts_params(&mut rng);
            let z = exact_potts(&g, &p, None)?.log_z;
            let zt = rank2(&g, &p, None)?.log_z_rank2;
            forest_err = forest_err.max((zt - z).exp_m1().abs());
        }
        Ok((
            k2_ok && worst_excess <= tol && forest_err <= tol && strict_fail == 0,
            json!({
                "k2_rank2": k2,
                "max_rel_excess": worst_excess,
                "cyclic_graphs": cyclic,
                "cyclic_without_strict_gap": strict_fail,
                "forest_max_rel_diff": forest_err,
                "tol": tol,
            }),
        ))
    })
}

/// `Psi(nu_free) = Psi(nu_wired)` on the critical line.
pub fn critical_consistency(grid: &[ModelParams], tol: f64) -> CheckResult {
    run("critical_consistency", "free and wired Bethe values coincide on the critical line", || {
        let diffs: Vec<(String, f64)> = grid
            .par_iter()
            .map(|p| -> coexist_core::Result<(String, f64)> {
                let (nf, nw) = bp_fixed_points(p, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
                Ok((label(p), (bethe_functional(p, &nf)? - bethe_functional(p, &nw)?).abs()))
            })
            .collect::<coexist_core::Result<_>>()?;
        let worst = diffs.iter().map(|x| x.1).fold(0.0, f64::max);
        let (wc0, _) = critical_line(3, 3.0, 0.0, true)?;
        let wc_ok = (wc0 - 2.8473).abs() <= 1e-4;
        Ok((
            worst <= tol && wc_ok,
            json!({ "points": diffs.len(), "max_abs_diff": worst, "w_c_zero_field_3_3": wc0, "tol": tol }),
        ))
    })
}

/// Ising reduction: `beta* > beta_uni` and `2 s - 1 = +-m(beta*)`.
pub fn ising_bridge(grid: &[ModelParams], tol: f64) -> CheckResult {
    run("ising_bridge", "rank-2 reduction lands in the Ising phase-coexistence regime", || {
        let rows: Vec<(bool, f64)> = grid
            .par_iter()
            .map(|p| -> coexist_core::Result<(bool, f64)> {
                let red = ising_reduction(p)?;
                let above = red.beta_star > ising_beta_uni(p.d());
                let rc = rcm_bp_fixed_points(p, DEFAULT_TOL)?;
                let (_, _, m) = ising_magnetization(p.d(), red.beta_star, 1e-15)?;
                let err = (2.0 * rc.s_wired - 1.0 - m).abs().max((2.0 * rc.s_free - 1.0 + m).abs());
                Ok((above, err))
            })
            .collect::<coexist_core::Result<_>>()?;
        let all_above = rows.iter().all(|r| r.0);
        let worst = rows.iter().map(|r| r.1).fold(0.0, f64::max);
        Ok((
            all_above && worst <= tol,
            json!({ "points": rows.len(), "beta_star_above_uniqueness": all_above, "max_abs_err": worst, "tol": tol }),
        ))
    })
}

/// Transfer-matrix spectra: closed forms, top eigenvalue 1 and the
/// non-reconstruction bound.
pub fn eigenvalues(grid: &[ModelParams], tol: f64) -> CheckResult {
    run("eigenvalues", "transfer-matrix spectrum matches closed forms below 1/(d-1)", || {
        let rows: Vec<Value> = grid
            .par_iter()
            .map(|p| -> coexist_core::Result<Value> {
                let rc = rcm_bp_fixed_points(p, DEFAULT_TOL)?;
                let q = p.q();
                let bridge = |b: f64| (1.0 + (q - 1.0) * b) / (1.0 - b);
                let mut v = serde_json::Map::new();
                let bound = 1.0 / (p.d() as f64 - 1.0);
                let (mut eig_err, mut top_err, mut l2_max, mut kappa_max, mut bridge_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
                for (which, b) in [(Which::Free, rc.b_free), (Which::Wired, rc.b_wired)] {
                    let e = q_matrix_eigs(p, which)?;
                    eig_err = eig_err.max(e.max_abs_closed_vs_numeric());
                    top_err = top_err.max((e.numeric[0] - 1.0).abs());
                    l2_max = l2_max.max(e.lambda2());
                    kappa_max = kappa_max.max(channel_contraction(p.beta(), e.nu.q(), e.x_root));
                    bridge_err = bridge_err.max((bridge(b) - e.x_root).abs() / e.x_root);
                }
                v.insert("label".into(), json!(label(p)));
                v.insert("closed_vs_numeric".into(), json!(eig_err));
                v.insert("top_minus_one".into(), json!(top_err));
                v.insert("lambda2_times_dm1".into(), json!(l2_max / bound));
                v.insert("contraction_times_dm1".into(), json!(kappa_max / bound));
                v.insert("ratio_bridge_rel_err".into(), json!(bridge_err));
                Ok(Value::Object(v))
            })
            .collect::<coexist_core::Result<_>>()?;
        let max = |k: &str| rows.iter().map(|r| r[k].as_f64().unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
        let passed = max("closed_vs_numeric") <= tol
            && max("top_minus_one") <= tol
            && max("lambda2_times_dm1") < 1.0
            && max("contraction_times_dm1") < 1.0
            && max("ratio_bridge_rel_err") <= 1e-8;
        Ok((
            passed,
            json!({
                "points": rows.len(),
                "max_closed_vs_numeric": max("closed_vs_numeric"),
                "max_top_minus_one": max("top_minus_one"),
                "max_lambda2_times_dm1": max("lambda2_times_dm1"),
                "max_contraction_times_dm1": max("contraction_times_dm1"),
                "max_ratio_bridge_rel_err": max("ratio_bridge_rel_err"),
                "tol": tol,
            }),
        ))
    })
}

/// Cavity sums: equality at degree d, strict inequalities at d -+ 1 and the
/// ordering chain.
pub fn cavity_ratios(grid: &[ModelParams], tol: f64) -> CheckResult {
    run("cavity_ratios", "cavity sums agree at degree d and separate at d-1 and d+1", || {
        let rows: Vec<(f64, bool, bool)> = grid
            .par_iter()
            .map(|p| -> coexist_core::Result<(f64, bool, bool)> {
                let d = p.d();
                let (f, w) = (cavity_delta(p, Which::Free, d)?, cavity_delta(p, Which::Wired, d)?);
                let lower = cavity_delta(p, Which::Free, d - 1)? > cavity_delta(p, Which::Wired, d - 1)?;
                let upper = cavity_delta(p, Which::Free, d + 1)? < cavity_delta(p, Which::Wired, d + 1)?;
                let chain = cavity_chain(p)?;
                Ok(((f - w).abs() / f.abs().max(w.abs()), lower && upper, chain.strictly_increasing))
            })
            .collect::<coexist_core::Result<_>>()?;
        let worst = rows.iter().map(|r| r.0).fold(0.0, f64::max);
        let ineq = rows.iter().all(|r| r.1);
        let chain = rows.iter().all(|r| r.2);
        Ok((
            worst <= tol && ineq && chain,
            json!({
                "points": rows.len(),
                "max_rel_diff_at_d": worst,
                "strict_inequalities_at_d_pm_1": ineq,
                "ordering_chain_strict": chain,
                "tol": tol,
            }),
        ))
    })
}

/// Off-critical parameters used for the depth-convergence part of
/// [`tree_domination`].
pub fn tree_convergence_params() -> ModelParams {
    ModelParams::new(3, 3.0, 0.4, 1.0).expect("valid")
}

/// Boundary-condition ordering of the root-ghost connection on finite trees,
/// and convergence in the depth.
pub fn tree_domination(gap_tol: f64) -> CheckResult {
    run("tree_domination", "tree boundary conditions are ordered and converge in depth", || {
        let d = 3;
        let bp = b_plus(d, 3.0)?;
        let (_, beta) = critical_line(d, 3.0, 0.5 * bp, false)?;
        let crit = ModelParams::new(d, 3.0, beta, 0.5 * bp)?;
        let mut ordered = true;
        let mut partitions = 0usize;
        for r in 1..=2 {
            let leaves = d * (d - 1usize).pow(r as u32 - 1);
            let free = tree_exact(d, r, &crit, &TreeBoundary::Free)?.psi_r;
            let wired = tree_exact(d, r, &crit, &TreeBoundary::Wired)?.psi_r;
            for part in set_partitions(leaves) {
                let psi = tree_exact(d, r, &crit, &TreeBoundary::Partition(part))?.psi_r;
                ordered &= free <= psi + 1e-14 && psi <= wired + 1e-14;
                partitions += 1;
            }
        }
        let p = tree_convergence_params();
        let target = rcm_bp_fixed_points(&p, DEFAULT_TOL)?;
        let mut free = Vec::new();
        let mut wired = Vec::new();
        for r in 1..=6 {
            free.push(tree_exact(d, r, &p, &TreeBoundary::Free)?.psi_r);
            wired.push(tree_exact(d, r, &p, &TreeBoundary::Wired)?.psi_r);
        }
        let monotone = free.windows(2).all(|w| w[0] <= w[1]) && wired.windows(2).all(|w| w[0] >= w[1]);
        let gap = (free[5] - target.psi_free).abs().max((wired[5] - target.psi_wired).abs());
        Ok((
            ordered && monotone && gap < gap_tol,
            json!({
                "partitions_checked": partitions,
                "ordered": ordered,
                "psi_free_by_depth": free,
                "psi_wired_by_depth": wired,
                "monotone": monotone,
                "gap_at_depth_6": gap,
                "gap_tol": gap_tol,
            }),
        ))
    })
}

/// Sprinkled FK domination on small graphs (including the monotone xi = 0 case).
pub fn sprinkle_domination(max_n: usize) -> CheckResult {
    run("sprinkle_domination", "higher-weight FK dominates lower weight plus sprinkling", || {
        let (q, w1, w2) = (3.0, 2.5, 1.0);
        let (p1, p2) = (w1 / (1.0 + w1), w2 / (1.0 + w2));
        let bound = (p1 - p2) / q;
        let xi = 0.9 * bound / (1.0 + 0.9 * bound);
        let mut worst: f64 = 0.0;
        let mut cases = 0;
        for n in 2..=max_n {
            for g in connected_graphs(n) {
                if g.edges().len() > coexist_core::exact::DOMINATION_EDGE_BUDGET {
                    continue;
                }
                for x in [0.0, xi] {
                    let r = sprinkle_domination_check(&g, q, w1, w2, x)?;
                    worst = worst.max(r.max_violation);
                    cases += 1;
                }
            }
        }
        Ok((
            worst <= coexist_core::exact::DOMINATION_TOL,
            json!({ "cases": cases, "xi": xi, "max_violation": worst }),
        ))
    })
}

/// Batch-means standard error of a 0/1 series.
fn batch_se(xs: &[u8], batches: usize) -> (f64, f64) {
    let n = xs.len();
    let mean = xs.iter().map(|&x| x as f64).sum::<f64>() / n as f64;
    let size = n / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| xs[b * size..(b + 1) * size].iter().map(|&x| x as f64).sum::<f64>() / size as f64)
        .collect();
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}

/// SW pair agreement on every small connected graph against the exact value.
pub fn sw_correctness(max_n: usize, sweeps: u64, max_z: f64, seed: u64) -> CheckResult {
    run("sw_correctness", "Swendsen-Wang pair agreement matches exact enumeration", || {
        let p = ModelParams::new(3, 3.0, 0.8, 0.3)?;
        let graphs: Vec<MultiGraph> = (2..=max_n).flat_map(connected_graphs).collect();
        let burn = 100u64;
        let batches = 100usize;
        let zs: Vec<f64> = graphs
            .par_iter()
            .enumerate()
            .map(|(gi, g)| -> coexist_core::Result<f64> {
                let exact = exact_potts(g, &p, None)?;
                let g_star = augment(g)?;
                let key = StreamKey::new(seed, gi as u64);
                let pairs: Vec<(usize, usize)> = exact.pair_agree.keys().copied().collect();
                let mut series = vec![Vec::with_capacity(sweeps as usize); pairs.len()];
                let mut sigma = SpinConfig::constant(g.n(), 0);
                for s in 0..burn + sweeps {
                    sigma = sw_sweep(&p, &g_star, &sigma, &key, s)?.0;
                    if s >= burn {
                        for (k, &(u, v)) in pairs.iter().enumerate() {
                            series[k].push((sigma.color(u) == sigma.color(v)) as u8);
                        }
                    }
                }
                let mut worst: f64 = 0.0;
                for (k, pair) in pairs.iter().enumerate() {
                    let (mean, se) = batch_se(&series[k], batches);
                    let z = (mean - exact.pair_agree[pair]).abs() / se.max(1e-12);
                    worst = worst.max(z);
                }
                Ok(worst)
            })
            .collect::<coexist_core::Result<_>>()?;
        let worst = zs.iter().copied().fold(0.0, f64::max);
        Ok((
            worst <= max_z,
            json!({ "graphs": graphs.len(), "sweeps": sweeps, "max_z": worst, "z_limit": max_z }),
        ))
    })
}

/// Mean triangle count of the pairing model and the Petersen 5-cycles.
pub fn cycle_statistics(n: usize, d: usize, seeds: u64, max_se: f64, seed: u64) -> CheckResult {
    run("cycle_statistics", "short-cycle counts match their Poisson means", || {
        let counts: Vec<f64> = (0..seeds)
            .into_par_iter()
            .map(|s| -> coexist_core::Result<f64> {
                let g = sample_pairing_model(n, d, seed.wrapping_add(s))?;
                Ok(cycle_counts(&g, 3)?.count(3) as f64)
            })
            .collect::<coexist_core::Result<_>>()?;
        let k = counts.len() as f64;
        let mean = counts.iter().sum::<f64>() / k;
        let sd = (counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
        let se = sd / k.sqrt();
        let target = (d as f64 - 1.0).powi(3) / 6.0;
        let pet = cycle_counts(&MultiGraph::petersen(), 6)?;
        let pet_ok = pet.count(3) == 0 && pet.count(4) == 0 && pet.count(5) == 12;
        Ok((
            (mean - target).abs() <= max_se * se && pet_ok,
            json!({
                "graphs": counts.len(),
                "mean_triangles": mean,
                "se": se,
                "target": target,
                "petersen_5_cycles": pet.count(5),
            }),
        ))
    })
}

/// Giant-component fraction of SW samples at a critical point concentrates
/// near `psi_free` or `psi_wired`.
pub fn coexistence(n: usize, q: usize, sweeps: u64, replicas: u64, eps: f64, min_inside: f64, seed: u64) -> CheckResult {
    run("coexistence", "SW giant fraction sits near one of the two phase values", || {
        let d = 3;
        let b = 0.5 * b_plus(d, q as f64)?;
        let cfg = ChainConfig {
            graph: GraphSpec::Pairing(PairingSpec {
                n,
                d,
                seed,
                girth_min: None,
            }),
            params: ParamsSpec {
                d,
                q: Some(q as f64),
                beta: None,
                b: Some(b),
            },
            sweeps,
            burn_in: None,
            thin: None,
            replicas: Some(replicas),
            seed,
            mode: ChainMode::PottsSw,
            eps_window: None,
            init: Some(InitKind::Split),
        }
        .materialize()?;
        let g = cfg.build_graph(std::path::Path::new("."))?;
        let trace = run_chain_on(&cfg, &g)?;
        let w = trace.windows.clone().ok_or_else(|| coexist_core::Error::InvalidState("no windows".into()))?;
        let (mut f, mut wi) = (0usize, 0usize);
        for r in &trace.records {
            if (r.giant_fraction - w.psi_free).abs() <= eps {
                f += 1;
            } else if (r.giant_fraction - w.psi_wired).abs() <= eps {
                wi += 1;
            }
        }
        let total = trace.records.len() as f64;
        let inside = (f + wi) as f64 / total;
        Ok((
            inside >= min_inside,
            json!({
                "samples": trace.records.len(),
                "psi_free": w.psi_free,
                "psi_wired": w.psi_wired,
                "frac_free": f as f64 / total,
                "frac_wired": wi as f64 / total,
                "frac_inside": inside,
                "min_inside": min_inside,
            }),
        ))
    })
}

/// Zero-field FK-Ising magnetization is bimodal at `+-m(beta)`.
pub fn ising_bimodality(n: usize, beta: f64, sweeps: u64, replicas: u64, tol: f64, seed: u64) -> CheckResult {
    run("ising_bimodality", "FK-Ising magnetization peaks at plus and minus the tree value", || {
        let d = 3;
        let cfg = ChainConfig {
            graph: GraphSpec::Pairing(PairingSpec {
                n,
                d,
                seed,
                girth_min: None,
            }),
            params: ParamsSpec {
                d,
                q: None,
                beta: Some(beta),
                b: None,
            },
            sweeps,
            burn_in: None,
            thin: None,
            replicas: Some(replicas),
            seed,
            mode: ChainMode::FkIsing,
            eps_window: None,
            init: None,
        }
        .materialize()?;
        let g = cfg.build_graph(std::path::Path::new("."))?;
        let trace = run_chain_on(&cfg, &g)?;
        let (_, _, m) = ising_magnetization(d, beta, 1e-14)?;
        let mags: Vec<f64> = trace.records.iter().filter_map(|r| r.magnetization).collect();
        let (lo, hi) = peaks(&mags, 0.01);
        Ok((
            (hi - m).abs() <= tol && (lo + m).abs() <= tol,
            json!({ "samples": mags.len(), "m_tree": m, "peak_negative": lo, "peak_positive": hi, "tol": tol }),
        ))
    })
}

/// Modes of the negative and positive halves of a histogram with bin width `h`.
pub fn peaks(xs: &[f64], h: f64) -> (f64, f64) {
    let bins = (2.0 / h).round() as usize;
    let mut counts = vec![0u64; bins];
    for &x in xs {
        let b = (((x + 1.0) / h).floor() as isize).clamp(0, bins as isize - 1) as usize;
        counts[b] += 1;
    }
    let centre = |b: usize| -1.0 + (b as f64 + 0.5) * h;
    let half = bins / 2;
    let argmax = |r: std::ops::Range<usize>| r.max_by_key(|&b| (counts[b], std::cmp::Reverse(b))).expect("nonempty");
    (centre(argmax(0..half)), centre(argmax(half..bins)))
}

/// Planner bracket on random critical parameters, the trivial plan, and
/// agreement with the conditioning formula.
pub fn tune_bracket(draws: usize, seed: u64) -> CheckResult {
    run("tune_bracket", "mixture planner lands the predicted ratio in its bracket", || {
        let mut rng = seeded(seed);
        let pairs = [(3usize, 3usize), (3, 5), (4, 3), (5, 10)];
        let mut tasks = Vec::new();
        for _ in 0..draws {
            let (d, q) = pairs[rng.below(pairs.len() as u64) as usize];
            let frac = 0.1 + 0.8 * rng.uniform();
            let alpha = 0.02 + 0.96 * rng.uniform();
            let n_slack = [10u64, 100, 1000][rng.below(3) as usize];
            tasks.push((d, q, frac, alpha, n_slack));
        }
        let rows: Vec<Value> = tasks
            .par_iter()
            .map(|&(d, q, frac, alpha, n_slack)| -> coexist_core::Result<Value> {
                let b = frac * b_plus(d, q as f64)?;
                let (_, beta) = critical_line(d, q as f64, b, false)?;
                let p = ModelParams::new(d, q as f64, beta, b)?;
                let ssc = ssc_data(&p, 200)?;
                let plan = tune_with(&p, &ssc, alpha, n_slack)?;
                let mut counts = BTreeMap::new();
                counts.insert(plan.k, plan.x);
                let cs = CycleStats {
                    counts,
                    loops: 0,
                    double_edges: 0,
                    girth: Some(plan.k),
                    k_max: plan.k,
                };
                let replay = predicted_ratio(&ssc, &cs, Some(&plan))?;
                Ok(json!({
                    "d": d, "q": q, "B": b, "alpha": alpha, "n_slack": n_slack,
                    "p": plan.p, "K": plan.k, "x": plan.x,
                    "in_bracket": plan.in_bracket(),
                    "replay_rel_err": (replay / plan.predicted_ratio - 1.0).abs(),
                }))
            })
            .collect::<coexist_core::Result<_>>()?;
        // Trivial case: the target equals the base ratio.
        let bp = b_plus(3, 3.0)?;
        let (_, beta) = critical_line(3, 3.0, 0.5 * bp, false)?;
        let p = ModelParams::new(3, 3.0, beta, 0.5 * bp)?;
        let ssc = ssc_data(&p, 200)?;
        let base = ssc.gamma.as_ref().expect("gamma").gamma * ssc.base_cycle_correction();
        let g = base / (1.0 + 0.5 / 100.0);
        let trivial = tune_with(&p, &ssc, g / (1.0 + g), 100)?;
        let trivial_ok = trivial.p == 0 && trivial.x == 0 && trivial.in_bracket();
        let all_in = rows.iter().all(|r| r["in_bracket"] == json!(true));
        let replay = rows.iter().map(|r| r["replay_rel_err"].as_f64().unwrap_or(1.0)).fold(0.0, f64::max);
        Ok((
            all_in && trivial_ok && replay <= 1e-9,
            json!({ "plans": rows, "trivial_plan_ok": trivial_ok, "max_replay_rel_err": replay }),
        ))
    })
}

/// Two runs of the same small chain are identical.
pub fn determinism_smoke(seed: u64) -> CheckResult {
    run("determinism", "seeded chains reproduce exactly", || {
        let p = ModelParams::new(3, 3.0, 0.9, 0.2)?;
        let g = augment(&sample_pairing_model(50, 3, seed)?)?;
        let go = || -> coexist_core::Result<Vec<u16>> {
            let key = StreamKey::new(seed, 0);
            let mut s = SpinConfig::random(50, 3, &mut key.setup_stream(0));
            for sweep in 0..50 {
                s = sw_sweep(&p, &g, &s, &key, sweep)?.0;
            }
            let mut tail = key.stream(50, Phase::Bonds);
            s.colors.push(tail.below(1000) as u16);
            Ok(s.colors)
        };
        let (a, b) = (go()?, go()?);
        Ok((a == b, json!({ "identical": a == b })))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Fast,
    Full,
}

/// Every check of a verification level, in report order.
pub fn suite(level: Level, seed: u64) -> Vec<CheckResult> {
    let grid = critical_grid(&CRITICAL_PAIRS, 10);
    let with_grid = |f: &dyn Fn(&[ModelParams]) -> CheckResult, name: &str| match &grid {
        Ok(g) => f(g),
        Err(e) => CheckResult {
            name: name.into(),
            description: "critical grid construction".into(),
            passed: false,
            detail: json!({ "error": e.to_string() }),
        },
    };
    let mut out = vec![];
    let full = level == Level::Full;
    out.push(if full { potts_rc_equality(50, 20, 7, seed, 1e-9) } else { potts_rc_equality(10, 3, 6, seed, 1e-9) });
    out.push(es_identity(if full { 6 } else { 5 }, 1e-9));
    out.push(rank2_inequality(if full { 50 } else { 20 }, 6, seed, 1e-9));
    out.push(with_grid(&|g| critical_consistency(g, 1e-8), "critical_consistency"));
    out.push(with_grid(&|g| ising_bridge(g, 1e-8), "ising_bridge"));
    out.push(with_grid(&|g| eigenvalues(g, 1e-10), "eigenvalues"));
    out.push(with_grid(&|g| cavity_ratios(g, 1e-8), "cavity_ratios"));
    out.push(tree_domination(1e-3));
    out.push(sprinkle_domination(if full { 5 } else { 4 }));
    out.push(if full { sw_correctness(6, 100_000, 4.0, seed) } else { sw_correctness(4, 20_000, 4.0, seed) });
    out.push(if full { cycle_statistics(2000, 3, 200, 3.0, seed) } else { cycle_statistics(500, 3, 50, 3.0, seed) });
    if full {
        out.push(coexistence(2000, 8, 20_000, 16, 0.05, 0.9, seed));
        out.push(ising_bimodality(2000, 0.8, 5_000, 8, 0.05, seed));
    }
    out.push(tune_bracket(if full { 20 } else { 5 }, seed));
    out.push(determinism_smoke(seed));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn connected_graph_counts() {
        let counts: Vec<usize> = (1..=5).map(|n| connected_graphs(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 6, 21]);
    }

    #[test]
    fn peaks_find_modes() {
        let xs = [-0.46, -0.46, -0.3, 0.74, 0.74, 0.2];
        let (lo, hi) = peaks(&xs, 0.1);
        assert!((lo + 0.45).abs() < 1e-12 && (hi - 0.75).abs() < 1e-12);
    }
}
