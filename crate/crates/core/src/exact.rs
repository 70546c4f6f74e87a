//! Brute-force ground truth on small instances: Potts and random-cluster
//! partition functions, the rank-2 sum, finite-tree boundary measures and a
//! sprinkling domination check.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::MultiGraph;
use crate::numerics::{bp_fixed_points, rcm_bp_fixed_points, root_marginal, ColorLaw, ModelParams, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::sum::WeightedLogSum;
use crate::unionfind::UnionFind;

/// Largest number of spin configurations [`exact_potts`] will enumerate.
pub const POTTS_BUDGET: u64 = 100_000_000;
/// Largest number of enumerated edges for [`exact_rc`] (base edges) and
/// [`exact_rc_bruteforce`] (all edges of `G*`), and vertex count for [`rank2`].
pub const SUBSET_BUDGET: usize = 26;
/// Largest edge count for [`sprinkle_domination_check`].
pub const DOMINATION_EDGE_BUDGET: usize = 16;
/// Largest leaf count for explicit boundary partitions in [`tree_exact`].
pub const PARTITION_LEAF_BUDGET: usize = 6;

fn pair_index(n: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            v.push((a, b));
        }
    }
    v
}

/// Exact Potts sums on the original vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PottsExact {
    pub z: f64,
    pub log_z: f64,
    /// Sum over colorings whose profile is within `eps` of the free root marginal.
    pub z_free_partial: Option<f64>,
    pub z_wired_partial: Option<f64>,
    /// `P[sigma(u) = sigma(v)]` for `u < v`.
    pub pair_agree: BTreeMap<(usize, usize), f64>,
    /// `P[sigma(v) = 0]`.
    pub favored: Vec<f64>,
}

/// Sums the Potts weight `exp(beta * #monochromatic edges + B * #color-0)`
/// over all `q^n` colorings.
pub fn exact_potts(g: &MultiGraph, params: &ModelParams, window_eps: Option<f64>) -> Result<PottsExact> {
    let q = params.q_int()?;
    let g = g.base();
    let n = g.n();
    let size = (q as f64).powi(n as i32);
    if size > POTTS_BUDGET as f64 {
        return Err(Error::BudgetExceeded {
            what: "Potts enumeration",
            size: size.min(u64::MAX as f64) as u64,
            limit: POTTS_BUDGET,
        });
    }
    let windows = match window_eps {
        Some(eps) => {
            let (nf, nw) = bp_fixed_points(params, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            Some((
                root_marginal(params, &nf)?.probs().to_vec(),
                root_marginal(params, &nw)?.probs().to_vec(),
                eps,
            ))
        }
        None => None,
    };
    let pairs = pair_index(n);
    // Statistics: pairs, then favored-color indicators, then the two windows.
    let (s_fav, s_win) = (pairs.len(), pairs.len() + n);
    let mut acc = WeightedLogSum::new(s_win + 2);
    let mut sigma = vec![0usize; n];
    let mut counts = vec![0usize; q];
    let mut stats: Vec<(usize, f64)> = Vec::new();
    loop {
        let mono = g.edges().iter().filter(|&&(u, v)| sigma[u as usize] == sigma[v as usize]).count();
        counts.iter_mut().for_each(|c| *c = 0);
        sigma.iter().for_each(|&c| counts[c] += 1);
        let log_w = params.beta() * mono as f64 + params.b() * counts[0] as f64;
        stats.clear();
        for (i, &(a, b)) in pairs.iter().enumerate() {
            if sigma[a] == sigma[b] {
                stats.push((i, 1.0));
            }
        }
        for (v, &c) in sigma.iter().enumerate() {
            if c == 0 {
                stats.push((s_fav + v, 1.0));
            }
        }
        if let Some((cf, cw, eps)) = &windows {
            let inside = |t: &[f64]| counts.iter().zip(t).all(|(&c, &x)| (c as f64 / n as f64 - x).abs() < *eps);
            if inside(cf) {
                stats.push((s_win, 1.0));
            }
            if inside(cw) {
                stats.push((s_win + 1, 1.0));
            }
        }
        acc.add(log_w, stats.iter().copied());
        // Odometer step.
        let mut i = 0;
        loop {
            if i == n {
                let log_z = acc.log_z();
                let partial = |k: usize| windows.as_ref().map(|_| acc.log_stat(k).exp());
                return Ok(PottsExact {
                    z: log_z.exp(),
                    log_z,
                    z_free_partial: partial(s_win),
                    z_wired_partial: partial(s_win + 1),
                    pair_agree: pairs.iter().enumerate().map(|(i, &p)| (p, acc.mean(i))).collect(),
                    favored: (0..n).map(|v| acc.mean(s_fav + v)).collect(),
                });
            }
            sigma[i] += 1;
            if sigma[i] < q {
                break;
            }
            sigma[i] = 0;
            i += 1;
        }
    }
}

/// Exact random-cluster sums on `G*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcExact {
    pub z: f64,
    pub log_z: f64,
    /// `phi[u <-> v]` for original vertices `u < v`.
    pub connect: BTreeMap<(usize, usize), f64>,
    /// `phi[v <-> ghost]`.
    pub ghost_connect: Vec<f64>,
}

/// `enumerated` is the number of edges whose states are enumerated.
fn check_rc_graph(g_star: &MultiGraph, enumerated: usize) -> Result<()> {
    if !g_star.is_augmented() {
        return Err(Error::InvalidState("exact_rc expects a ghost-augmented graph".into()));
    }
    if enumerated > SUBSET_BUDGET {
        return Err(Error::BudgetExceeded {
            what: "random-cluster enumeration",
            size: enumerated as u64,
            limit: SUBSET_BUDGET as u64,
        });
    }
    Ok(())
}

/// `Z = sum_eta prod_e w_e^{eta_e} q^{|C(eta)| - 1}`, components counted on
/// `V` plus the ghost.
///
/// Ghost edges are summed in closed form: given the base edges, a component
/// `C` either reaches the ghost (weight `(1+w_g)^{|C|} - 1`) or stays
/// separate (weight `q`), independently of the other components.
pub fn exact_rc(g_star: &MultiGraph, params: &ModelParams) -> Result<RcExact> {
    check_rc_graph(g_star, g_star.base_edge_count())?;
    let n = g_star.n();
    let base_edges = &g_star.edges()[..g_star.base_edge_count()];
    let m = base_edges.len();
    let (q, lw, lg1) = (params.q(), params.w().ln(), params.b()); // log(1 + w_g) = B
    let pairs = pair_index(n);
    let mut acc = WeightedLogSum::new(pairs.len() + n);
    let mut uf = UnionFind::new(n);
    let mut stats: Vec<(usize, f64)> = Vec::new();
    for mask in 0u64..(1u64 << m) {
        uf.reset();
        for (e, &(u, v)) in base_edges.iter().enumerate() {
            if mask >> e & 1 == 1 {
                uf.union(u as usize, v as usize);
            }
        }
        let open = mask.count_ones() as f64;
        let (labels, k) = uf.labels();
        let mut size = vec![0usize; k];
        labels.iter().for_each(|&l| size[l as usize] += 1);
        // Probability that each component reaches the ghost.
        let mut log_w = if open > 0.0 { open * lw } else { 0.0 };
        let mut reach = vec![0.0; k];
        for (c, &s) in size.iter().enumerate() {
            let g = (lg1 * s as f64).exp_m1();
            log_w += (q + g).ln();
            reach[c] = g / (q + g);
        }
        stats.clear();
        for (i, &(a, b)) in pairs.iter().enumerate() {
            let (la, lb) = (labels[a] as usize, labels[b] as usize);
            let p = if la == lb { 1.0 } else { reach[la] * reach[lb] };
            stats.push((i, p));
        }
        for v in 0..n {
            stats.push((pairs.len() + v, reach[labels[v] as usize]));
        }
        acc.add(log_w, stats.iter().copied());
    }
    let log_z = acc.log_z();
    Ok(RcExact {
        z: log_z.exp(),
        log_z,
        connect: pairs.iter().enumerate().map(|(i, &p)| (p, acc.mean(i))).collect(),
        ghost_connect: (0..n).map(|v| acc.mean(pairs.len() + v)).collect(),
    })
}

/// Plain enumeration over every edge of `G*` (ghost edges included).
/// Exponentially slower than [`exact_rc`]; kept as its oracle.
pub fn exact_rc_bruteforce(g_star: &MultiGraph, params: &ModelParams) -> Result<RcExact> {
    check_rc_graph(g_star, g_star.edges().len())?;
    let n = g_star.n();
    let nv = g_star.vertex_count();
    let edges = g_star.edges();
    let base = g_star.base_edge_count();
    let (lq, lw, lwg) = (params.q().ln(), params.w().ln(), params.w_ghost().ln());
    let pairs = pair_index(n);
    let mut acc = WeightedLogSum::new(pairs.len() + n);
    let mut uf = UnionFind::new(nv);
    for mask in 0u64..(1u64 << edges.len()) {
        uf.reset();
        let mut log_w = 0.0;
        for (e, &(u, v)) in edges.iter().enumerate() {
            if mask >> e & 1 == 1 {
                uf.union(u as usize, v as usize);
                log_w += if e < base { lw } else { lwg };
            }
        }
        let (labels, k) = uf.labels();
        log_w += (k as f64 - 1.0) * lq;
        let ghost = labels[n];
        let stats = pairs
            .iter()
            .enumerate()
            .filter(|(_, &(a, b))| labels[a] == labels[b])
            .map(|(i, _)| (i, 1.0))
            .chain((0..n).filter(|&v| labels[v] == ghost).map(|v| (pairs.len() + v, 1.0)))
            .collect::<Vec<_>>();
        acc.add(log_w, stats);
    }
    let log_z = acc.log_z();
    Ok(RcExact {
        z: log_z.exp(),
        log_z,
        connect: pairs.iter().enumerate().map(|(i, &p)| (p, acc.mean(i))).collect(),
        ghost_connect: (0..n).map(|v| acc.mean(pairs.len() + v)).collect(),
    })
}

/// Rank-2 sum and its restriction to `|S|/n` outside both phase windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rank2 {
    pub z_rank2: f64,
    pub log_z_rank2: f64,
    pub z_rank2_window: Option<f64>,
}

/// `sum_S e^{B|S|} (1+w)^{|E(S)|} (q-1)^{n-|S|} (1 + w/(q-1))^{|E(V\S)|}`.
///
/// With `eps`, also the sum over `S` with `|S|/n` at distance at least
/// `eps` from both `s_free` and `s_wired`.
pub fn rank2(g: &MultiGraph, params: &ModelParams, eps: Option<f64>) -> Result<Rank2> {
    let g = g.base();
    let n = g.n();
    if n > SUBSET_BUDGET {
        return Err(Error::BudgetExceeded {
            what: "rank-2 enumeration",
            size: n as u64,
            limit: SUBSET_BUDGET as u64,
        });
    }
    let q = params.q();
    let (l_in, l_out, l_q1) = (params.beta(), (params.w() / (q - 1.0)).ln_1p(), (q - 1.0).ln());
    let centers = match eps {
        Some(_) => {
            let rc = rcm_bp_fixed_points(params, DEFAULT_TOL)?;
            Some((rc.s_free, rc.s_wired))
        }
        None => None,
    };
    let edge_masks: Vec<u64> = g.edges().iter().map(|&(u, v)| (1u64 << u) | (1u64 << v)).collect();
    let mut acc = WeightedLogSum::new(1);
    for s in 0u64..(1u64 << n) {
        let size = s.count_ones() as usize;
        let (mut e_in, mut e_out) = (0usize, 0usize);
        for &em in &edge_masks {
            if em & s == em {
                e_in += 1;
            } else if em & s == 0 {
                e_out += 1;
            }
        }
        let log_w = params.b() * size as f64 + l_in * e_in as f64 + l_q1 * (n - size) as f64 + l_out * e_out as f64;
        let in_window = match (eps, centers) {
            (Some(eps), Some((sf, sw))) => {
                let x = size as f64 / n as f64;
                (x - sf).abs() >= eps && (x - sw).abs() >= eps
            }
            _ => false,
        };
        acc.add(log_w, in_window.then_some((0, 1.0)));
    }
    let log_z = acc.log_z();
    Ok(Rank2 {
        z_rank2: log_z.exp(),
        log_z_rank2: log_z,
        z_rank2_window: eps.map(|_| acc.log_stat(0).exp()),
    })
}

/// All three exact computations on one graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSummary {
    pub potts: PottsExact,
    pub rc: RcExact,
    pub rank2: Rank2,
}

pub fn exact_summary(g: &MultiGraph, params: &ModelParams, eps: Option<f64>) -> Result<ExactSummary> {
    let base = g.base();
    let g_star = crate::graphs::augment(&base)?;
    Ok(ExactSummary {
        potts: exact_potts(&base, params, eps)?,
        rc: exact_rc(&g_star, params)?,
        rank2: rank2(&base, params, eps)?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreeBoundary {
    Free,
    Wired,
    /// Blocks of leaf indices that are wired together (but not to the ghost).
    Partition(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeMeasure {
    pub depth: usize,
    pub boundary: TreeBoundary,
    /// Probability that the root takes the favored color.
    pub root_favored: f64,
    /// Full root marginal (integer `q` only).
    pub root_marginal: Option<ColorLaw>,
    /// Probability that the root is connected to the ghost.
    pub psi_r: f64,
}

/// Largest depth accepted by [`tree_exact`] for free/wired boundaries.
pub const MAX_TREE_DEPTH: usize = 10_000;

/// Random-cluster measure on the depth-`r` tree (root of degree `d`, other
/// internal vertices with `d - 1` children) with ghost edges on every
/// non-leaf vertex.
pub fn tree_exact(d: usize, r: usize, params: &ModelParams, boundary: &TreeBoundary) -> Result<TreeMeasure> {
    if r == 0 {
        return Err(Error::InvalidParams("tree depth must be at least 1".into()));
    }
    if d != params.d() {
        return Err(Error::InvalidParams(format!("tree degree {d} differs from params.d {}", params.d())));
    }
    let q = params.q();
    let psi_r = match boundary {
        TreeBoundary::Free | TreeBoundary::Wired => {
            if r > MAX_TREE_DEPTH {
                return Err(Error::BudgetExceeded {
                    what: "tree depth",
                    size: r as u64,
                    limit: MAX_TREE_DEPTH as u64,
                });
            }
            tree_dp(d, r, params, matches!(boundary, TreeBoundary::Wired))
        }
        TreeBoundary::Partition(blocks) => tree_partition_bruteforce(d, r, params, blocks)?,
    };
    let root_favored = psi_r + (1.0 - psi_r) / q;
    let root_marginal = match params.q_int() {
        Ok(qi) => Some(ColorLaw::from_reduced(qi, root_favored)?),
        Err(_) => None,
    };
    Ok(TreeMeasure {
        depth: r,
        boundary: boundary.clone(),
        root_favored,
        root_marginal,
        psi_r,
    })
}

/// Leaf-to-root recursion over the states (favored & reaches ghost),
/// (favored & not), (one specific other color). All subtrees at one depth
/// are identical, so one state per level suffices.
fn tree_dp(d: usize, r: usize, params: &ModelParams, wired: bool) -> f64 {
    let q = params.q();
    let (p, pg) = (params.p_edge(), params.p_ghost());
    let norm = |s: [f64; 3]| {
        let t = s[0] + s[1] + (q - 1.0) * s[2];
        [s[0] / t, s[1] / t, s[2] / t]
    };
    let merge = |parent: [f64; 3], child: [f64; 3], times: usize| {
        let [mut a, mut b, mut c] = parent;
        let [ac, bc, cc] = child;
        let closed = (1.0 - p) * (ac + bc + (q - 1.0) * cc);
        for _ in 0..times {
            let na = a * (closed + p * (ac + bc)) + b * p * ac;
            let nb = b * (closed + p * bc);
            let nc = c * (closed + p * cc);
            let t = na + nb + (q - 1.0) * nc;
            (a, b, c) = (na / t, nb / t, nc / t);
        }
        [a, b, c]
    };
    let own = [pg, 1.0 - pg, 1.0 - pg];
    let mut state = if wired { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 1.0] };
    for _ in 1..r {
        state = norm(merge(own, state, d - 1));
    }
    let root = merge(own, state, d);
    root[0] / (root[0] + root[1] + (q - 1.0) * root[2])
}

/// Direct enumeration of tree and ghost edges with the leaf blocks glued.
fn tree_partition_bruteforce(d: usize, r: usize, params: &ModelParams, blocks: &[Vec<usize>]) -> Result<f64> {
    // Vertices level by level; root is 0.
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut level = vec![0usize];
    let mut next_id = 1usize;
    let mut internal = Vec::new();
    for depth in 0..r {
        let kids = if depth == 0 { d } else { d - 1 };
        let mut next = Vec::new();
        for &v in &level {
            internal.push(v);
            for _ in 0..kids {
                edges.push((v, next_id));
                next.push(next_id);
                next_id += 1;
            }
        }
        level = next;
    }
    let leaves = level;
    if leaves.len() > PARTITION_LEAF_BUDGET {
        return Err(Error::BudgetExceeded {
            what: "tree boundary partition leaves",
            size: leaves.len() as u64,
            limit: PARTITION_LEAF_BUDGET as u64,
        });
    }
    let mut seen = vec![false; leaves.len()];
    for &i in blocks.iter().flatten() {
        if i >= leaves.len() || std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidParams("partition must cover each leaf exactly once".into()));
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::InvalidParams("partition must cover each leaf exactly once".into()));
    }
    let ghost = next_id;
    let tree_edges = edges.len();
    edges.extend(internal.iter().map(|&v| (v, ghost)));
    let total = edges.len();
    if total > 30 {
        return Err(Error::BudgetExceeded {
            what: "tree edge enumeration",
            size: total as u64,
            limit: 30,
        });
    }
    let (lq, lw, lwg) = (params.q().ln(), params.w().ln(), params.w_ghost().ln());
    let mut acc = WeightedLogSum::new(1);
    let mut uf = UnionFind::new(ghost + 1);
    for mask in 0u64..(1u64 << total) {
        uf.reset();
        for b in blocks {
            for w in b.windows(2) {
                uf.union(leaves[w[0]], leaves[w[1]]);
            }
        }
        let mut log_w = 0.0;
        for (e, &(u, v)) in edges.iter().enumerate() {
            if mask >> e & 1 == 1 {
                uf.union(u, v);
                log_w += if e < tree_edges { lw } else { lwg };
            }
        }
        let (_, k) = uf.labels();
        log_w += k as f64 * lq;
        let hit = uf.same(0, ghost);
        acc.add(log_w, hit.then_some((0, 1.0)));
    }
    Ok(acc.mean(0))
}

/// All set partitions of `0..k` (blocks in canonical order).
pub fn set_partitions(k: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut assign = vec![0usize; k];
    fn rec(i: usize, k: usize, nblocks: usize, assign: &mut Vec<usize>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == k {
            let mut blocks = vec![Vec::new(); nblocks];
            for (x, &b) in assign.iter().enumerate() {
                blocks[b].push(x);
            }
            out.push(blocks);
            return;
        }
        for b in 0..=nblocks {
            assign[i] = b;
            rec(i + 1, k, nblocks.max(b + 1), assign, out);
        }
    }
    rec(0, k, 0, &mut assign, &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    /// Number of increasing events compared.
    pub events: usize,
    /// Largest `E_sprinkled[f] - E_{w1}[f]` (clamped at 0).
    pub max_violation: f64,
    pub pass: bool,
}

/// Tolerance on the domination check.
pub const DOMINATION_TOL: f64 = 1e-12;

/// Sufficient condition for the sprinkling domination, in terms of the open
/// probabilities `p_i = w_i/(1+w_i)`: `xi/(1-xi) < (p1 - p2)/q`.
pub fn domination_condition(q: f64, w1: f64, w2: f64, xi: f64) -> bool {
    let (p1, p2) = (w1 / (1.0 + w1), w2 / (1.0 + w2));
    xi >= 0.0 && xi < 1.0 && xi / (1.0 - xi) < (p1 - p2) / q
}

/// Checks that the FK measure at weight `w1` dominates the FK measure at
/// `w2` superposed with independent `Bernoulli(xi)` edges, on the events
/// "edge e open", "u <-> v" and "largest cluster >= t".
pub fn sprinkle_domination_check(g: &MultiGraph, q: f64, w1: f64, w2: f64, xi: f64) -> Result<DominationReport> {
    let g = g.base();
    let m = g.edges().len();
    if m > DOMINATION_EDGE_BUDGET {
        return Err(Error::BudgetExceeded {
            what: "domination enumeration",
            size: m as u64,
            limit: DOMINATION_EDGE_BUDGET as u64,
        });
    }
    if !(q > 0.0 && w1 >= 0.0 && w2 >= 0.0) {
        return Err(Error::InvalidParams("need q > 0 and nonnegative weights".into()));
    }
    if !domination_condition(q, w1, w2, xi) && !(xi == 0.0 && w1 >= w2) {
        return Err(Error::ConditionUnsatisfied(format!(
            "xi = {xi} violates xi/(1-xi) < (p1-p2)/q for w1 = {w1}, w2 = {w2}, q = {q}"
        )));
    }
    let fk = |w: f64| -> Vec<f64> {
        let log: Vec<f64> = (0u64..1 << m)
            .map(|mask| {
                let open = mask.count_ones() as f64;
                let k = components(&g, mask);
                (if open > 0.0 { open * w.ln() } else { 0.0 }) + k as f64 * q.ln()
            })
            .collect();
        let mx = log.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let v: Vec<f64> = log.iter().map(|l| (l - mx).exp()).collect();
        let z: f64 = v.iter().sum();
        v.into_iter().map(|x| x / z).collect()
    };
    let top = fk(w1);
    let mut low = fk(w2);
    // Superpose Bernoulli(xi) edges one coordinate at a time.
    for e in 0..m {
        let bit = 1u64 << e;
        for mask in 0u64..1 << m {
            if mask & bit != 0 {
                let without = low[(mask ^ bit) as usize];
                low[mask as usize] += xi * without;
            }
        }
        for mask in 0u64..1 << m {
            if mask & bit == 0 {
                low[mask as usize] *= 1.0 - xi;
            }
        }
    }
    let n = g.n();
    let pairs = pair_index(n);
    let n_events = m + pairs.len() + n;
    let mut e_top = vec![0.0; n_events];
    let mut e_low = vec![0.0; n_events];
    for mask in 0u64..1 << m {
        let (pt, pl) = (top[mask as usize], low[mask as usize]);
        let mut uf = UnionFind::new(n);
        for (e, &(u, v)) in g.edges().iter().enumerate() {
            if mask >> e & 1 == 1 {
                uf.union(u as usize, v as usize);
            }
        }
        let mut hit = |i: usize| {
            e_top[i] += pt;
            e_low[i] += pl;
        };
        for e in 0..m {
            if mask >> e & 1 == 1 {
                hit(e);
            }
        }
        for (i, &(a, b)) in pairs.iter().enumerate() {
            if uf.same(a, b) {
                hit(m + i);
            }
        }
        let largest = (0..n).map(|v| uf.set_size(v)).max().unwrap_or(0);
        for t in 1..=largest {
            hit(m + pairs.len() + t - 1);
        }
    }
    let max_violation = e_low.iter().zip(&e_top).map(|(l, t)| (l - t).max(0.0)).fold(0.0, f64::max);
    Ok(DominationReport {
        events: n_events,
        max_violation,
        pass: max_violation <= DOMINATION_TOL,
    })
}

fn components(g: &MultiGraph, mask: u64) -> usize {
    let mut uf = UnionFind::new(g.n());
    let mut k = g.n();
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        if mask >> e & 1 == 1 && uf.union(u as usize, v as usize) {
            k -= 1;
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::augment;

    fn k2_params() -> ModelParams {
        ModelParams::new(3, 3.0, 2f64.ln(), 2f64.ln()).unwrap()
    }

    #[test]
    fn k2_values() {
        let p = k2_params();
        let g = MultiGraph::path(2);
        let potts = exact_potts(&g, &p, None).unwrap();
        assert!((potts.z - 22.0).abs() < 1e-12);
        assert!((potts.pair_agree[&(0, 1)] - 6.0 / 11.0).abs() < 1e-14);
        let rc = exact_rc(&augment(&g).unwrap(), &p).unwrap();
        assert!((rc.z - 22.0).abs() < 1e-12);
        assert!((rc.connect[&(0, 1)] - 7.0 / 22.0).abs() < 1e-14);
        let r2 = rank2(&g, &p, None).unwrap();
        assert!((r2.z_rank2 - 22.0).abs() < 1e-12);
    }

    #[test]
    fn trivial_partition_functions() {
        let p = ModelParams::new(3, 4.0, 0.0, 0.0).unwrap();
        let g = MultiGraph::cycle(4);
        assert!((exact_potts(&g, &p, None).unwrap().z - 256.0).abs() < 1e-9);
        assert!((exact_rc(&augment(&g).unwrap(), &p).unwrap().z - 256.0).abs() < 1e-9);
        let p1 = ModelParams::new(3, 3.0, 0.7, 0.4).unwrap();
        let single = MultiGraph::new(1, vec![]).unwrap();
        let z = exact_potts(&single, &p1, None).unwrap().z;
        assert!((z - (0.4f64.exp() + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let p = ModelParams::new(3, 5.0, 0.3, 0.1).unwrap();
        let g = MultiGraph::cycle(12);
        assert!(matches!(exact_potts(&g, &p, None), Err(Error::BudgetExceeded { .. })));
        let big = augment(&MultiGraph::complete(8)).unwrap();
        assert!(matches!(exact_rc(&big, &p), Err(Error::BudgetExceeded { .. })));
        let k7 = augment(&MultiGraph::complete(7)).unwrap();
        assert!(exact_rc(&k7, &p).is_ok());
        assert!(matches!(exact_rc_bruteforce(&k7, &p), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn analytic_ghost_sum_matches_bruteforce() {
        let p = ModelParams::new(3, 3.5, 0.8, 0.3).unwrap();
        let g = augment(&MultiGraph::cycle(4)).unwrap();
        let a = exact_rc(&g, &p).unwrap();
        let b = exact_rc_bruteforce(&g, &p).unwrap();
        assert!((a.log_z - b.log_z).abs() < 1e-12);
        for (k, v) in &a.connect {
            assert!((v - b.connect[k]).abs() < 1e-12);
        }
        for (x, y) in a.ghost_connect.iter().zip(&b.ghost_connect) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn partitions_of_small_sets() {
        let bell = [1, 1, 2, 5, 15, 52, 203];
        for (k, &b) in bell.iter().enumerate() {
            assert_eq!(set_partitions(k).len(), b);
        }
    }

    #[test]
    fn tree_dp_matches_enumeration() {
        let p = ModelParams::new(3, 3.0, 1.2, 0.2).unwrap();
        for r in 1..=2 {
            let leaves = 3 * 2usize.pow(r as u32 - 1);
            let singletons: Vec<Vec<usize>> = (0..leaves).map(|i| vec![i]).collect();
            let dp = tree_exact(3, r, &p, &TreeBoundary::Free).unwrap().psi_r;
            let bf = tree_exact(3, r, &p, &TreeBoundary::Partition(singletons)).unwrap().psi_r;
            assert!((dp - bf).abs() < 1e-12, "r={r}: {dp} vs {bf}");
        }
    }

    #[test]
    fn single_edge_domination() {
        let g = MultiGraph::path(2);
        let rep = sprinkle_domination_check(&g, 2.0, 2.0, 1.0, 0.05).unwrap();
        assert!(rep.pass);
        assert!(matches!(
            sprinkle_domination_check(&g, 2.0, 2.0, 1.0, 0.3),
            Err(Error::ConditionUnsatisfied(_))
        ));
    }
}
