//! Random regular multigraphs from the pairing model, cycle statistics, ghost
//! augmentation, the second adjacency eigenvalue and degree modification.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded, DrawStream};
use crate::unionfind::UnionFind;

/// Largest cycle length [`cycle_counts`] will enumerate.
pub const MAX_CYCLE_LEN: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiGraph {
    n: usize,
    edges: Vec<(u32, u32)>,
    /// Partner of each half-edge when the graph came from the pairing model.
    pairing: Option<Vec<u32>>,
    /// When set, vertex `n` is the ghost and the last `n` edges join it to
    /// every original vertex in order.
    augmented: bool,
}

impl MultiGraph {
    pub fn new(n: usize, edges: Vec<(u32, u32)>) -> Result<Self> {
        for &(u, v) in &edges {
            if u as usize >= n || v as usize >= n {
                return Err(Error::InvalidParams(format!("edge ({u}, {v}) out of range for n = {n}")));
            }
        }
        Ok(Self {
            n,
            edges,
            pairing: None,
            augmented: false,
        })
    }

    /// Complete graph on `n` vertices.
    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::new();
        for u in 0..n as u32 {
            for v in u + 1..n as u32 {
                edges.push((u, v));
            }
        }
        Self::new(n, edges).expect("valid")
    }

    /// Cycle on `n >= 3` vertices.
    pub fn cycle(n: usize) -> Self {
        let edges = (0..n as u32).map(|i| (i, (i + 1) % n as u32)).collect();
        Self::new(n, edges).expect("valid")
    }

    pub fn path(n: usize) -> Self {
        let edges = (1..n as u32).map(|i| (i - 1, i)).collect();
        Self::new(n, edges).expect("valid")
    }

    pub fn petersen() -> Self {
        let mut edges = Vec::new();
        for i in 0..5u32 {
            edges.push((i, (i + 1) % 5));
            edges.push((i, i + 5));
            edges.push((i + 5, (i + 2) % 5 + 5));
        }
        Self::new(10, edges).expect("valid")
    }

    /// Number of original (non-ghost) vertices.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total vertex count, ghost included.
    pub fn vertex_count(&self) -> usize {
        self.n + self.augmented as usize
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn is_augmented(&self) -> bool {
        self.augmented
    }

    /// Index of the ghost vertex, when present.
    pub fn ghost(&self) -> Option<usize> {
        self.augmented.then_some(self.n)
    }

    /// Number of edges between original vertices.
    pub fn base_edge_count(&self) -> usize {
        self.edges.len() - if self.augmented { self.n } else { 0 }
    }

    pub fn is_ghost_edge(&self, e: usize) -> bool {
        self.augmented && e >= self.base_edge_count()
    }

    pub fn pairing(&self) -> Option<&[u32]> {
        self.pairing.as_deref()
    }

    /// Degrees of all vertices (loops count twice).
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.vertex_count()];
        for &(u, v) in &self.edges {
            deg[u as usize] += 1;
            deg[v as usize] += 1;
        }
        deg
    }

    /// Common degree of the original vertices, if they all agree.
    pub fn regular_degree(&self) -> Option<usize> {
        let base = self.base();
        let deg = base.degrees();
        let d0 = *deg.first()?;
        deg.iter().all(|&x| x == d0).then_some(d0)
    }

    /// True when there are no loops and no parallel edges.
    pub fn is_simple(&self) -> bool {
        let mut seen = std::collections::HashSet::with_capacity(self.edges.len());
        self.edges.iter().all(|&(u, v)| u != v && seen.insert((u.min(v), u.max(v))))
    }

    /// Original graph without the ghost.
    pub fn base(&self) -> MultiGraph {
        if !self.augmented {
            return self.clone();
        }
        MultiGraph {
            n: self.n,
            edges: self.edges[..self.base_edge_count()].to_vec(),
            pairing: self.pairing.clone(),
            augmented: false,
        }
    }

    /// Adjacency lists of `(neighbor, edge index)`; a loop appears twice.
    pub fn adjacency(&self) -> Vec<Vec<(u32, u32)>> {
        let mut adj = vec![Vec::new(); self.vertex_count()];
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            adj[u as usize].push((v, e as u32));
            adj[v as usize].push((u, e as u32));
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        let nv = self.vertex_count();
        if nv == 0 {
            return true;
        }
        let mut uf = UnionFind::new(nv);
        for &(u, v) in &self.edges {
            uf.union(u as usize, v as usize);
        }
        uf.set_size(0) == nv
    }

    /// Edge-list text: header `n m` (plus ` augmented=1`), then `u v` lines.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        write!(s, "{} {}", self.n, self.edges.len()).unwrap();
        if self.augmented {
            s.push_str(" augmented=1");
        }
        s.push('\n');
        for &(u, v) in &self.edges {
            writeln!(s, "{u} {v}").unwrap();
        }
        s
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::ConfigError(format!("edge list: {msg}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| bad("missing header"))?;
        let mut parts = header.split_whitespace();
        let n: usize = parts.next().and_then(|x| x.parse().ok()).ok_or_else(|| bad("bad n"))?;
        let m: usize = parts.next().and_then(|x| x.parse().ok()).ok_or_else(|| bad("bad m"))?;
        let augmented = match parts.next() {
            None | Some("augmented=0") => false,
            Some("augmented=1") => true,
            Some(other) => return Err(bad(&format!("unknown header flag {other}"))),
        };
        let nv = n + augmented as usize;
        let mut edges = Vec::with_capacity(m);
        for line in lines {
            let mut it = line.split_whitespace();
            let u: u32 = it.next().and_then(|x| x.parse().ok()).ok_or_else(|| bad("bad edge line"))?;
            let v: u32 = it.next().and_then(|x| x.parse().ok()).ok_or_else(|| bad("bad edge line"))?;
            if u as usize >= nv || v as usize >= nv {
                return Err(bad("endpoint out of range"));
            }
            edges.push((u, v));
        }
        if edges.len() != m {
            return Err(bad(&format!("header says {m} edges, found {}", edges.len())));
        }
        if augmented {
            if m < n {
                return Err(bad("augmented graph has fewer than n edges"));
            }
            let base = m - n;
            for (i, &(u, v)) in edges[base..].iter().enumerate() {
                if u as usize != i || v as usize != n {
                    return Err(bad("ghost edges must be the trailing (v, n) lines in vertex order"));
                }
            }
            if edges[..base].iter().any(|&(u, v)| u as usize == n || v as usize == n) {
                return Err(bad("ghost vertex used by a base edge"));
            }
        }
        Ok(Self {
            n,
            edges,
            pairing: None,
            augmented,
        })
    }
}

/// Uniform perfect matching of the `n*d` half-edges.
pub fn sample_pairing_model(n: usize, d: usize, seed: u64) -> Result<MultiGraph> {
    let mut rng = seeded(seed);
    pairing_with(n, d, &mut rng)
}

fn pairing_with(n: usize, d: usize, rng: &mut DrawStream) -> Result<MultiGraph> {
    if n == 0 || (n * d) % 2 == 1 {
        return Err(Error::InvalidArity { n, d });
    }
    let h = n * d;
    let mut half: Vec<u32> = (0..h as u32).collect();
    for i in (1..h).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        half.swap(i, j);
    }
    let mut partner = vec![0u32; h];
    let mut edges = Vec::with_capacity(h / 2);
    for pair in half.chunks_exact(2) {
        let (a, b) = (pair[0], pair[1]);
        partner[a as usize] = b;
        partner[b as usize] = a;
        edges.push((a / d as u32, b / d as u32));
    }
    Ok(MultiGraph {
        n,
        edges,
        pairing: Some(partner),
        augmented: false,
    })
}

/// Pairing-model sample conditioned on simplicity, by rejection.
/// Returns the graph and the number of draws used.
pub fn sample_simple(n: usize, d: usize, seed: u64, max_attempts: usize) -> Result<(MultiGraph, usize)> {
    let mut rng = seeded(seed);
    for attempt in 1..=max_attempts {
        let g = pairing_with(n, d, &mut rng)?;
        if g.is_simple() {
            return Ok((g, attempt));
        }
    }
    Err(Error::BudgetExceeded {
        what: "simple pairing-model rejection",
        size: max_attempts as u64,
        limit: max_attempts as u64,
    })
}

/// Pairing-model sample with girth at least `girth_min`.
///
/// Rejection alone is hopeless beyond girth 5 or so (the acceptance rate is
/// about `exp(-sum_{k<g} (d-1)^k/2k)`), so short cycles are removed by
/// random switchings: an edge `uv` on a short cycle and a random edge `xy`
/// are replaced by `ux, vy` (or `uy, vx`) whenever neither new edge closes a
/// short cycle. Each switching removes at least one short cycle and creates
/// none. Returns the graph and the number of switch attempts.
pub fn sample_with_girth(
    n: usize,
    d: usize,
    girth_min: usize,
    seed: u64,
    max_attempts: usize,
) -> Result<(MultiGraph, usize)> {
    let mut rng = seeded(seed);
    let mut g = pairing_with(n, d, &mut rng)?;
    g.pairing = None;
    if girth_min <= 1 {
        return Ok((g, 0));
    }
    let mut adj = g.adjacency();
    let mut attempts = 0usize;
    let mut scan_from = 0usize;
    while let Some(e) = find_short_cycle_edge(&g, &adj, girth_min, scan_from) {
        scan_from = e;
        loop {
            if attempts >= max_attempts {
                return Err(Error::BudgetExceeded {
                    what: "girth switchings",
                    size: attempts as u64,
                    limit: max_attempts as u64,
                });
            }
            attempts += 1;
            let f = rng.below(g.edges.len() as u64) as usize;
            if f == e {
                continue;
            }
            let (u, v) = g.edges[e];
            let (mut x, mut y) = g.edges[f];
            if rng.bernoulli(0.5) {
                std::mem::swap(&mut x, &mut y);
            }
            if try_switch(&mut g, &mut adj, e, f, (u, x), (v, y), girth_min) {
                break;
            }
        }
    }
    Ok((g, attempts))
}

/// First edge (at or after `from`, wrapping) lying on a cycle shorter than `girth_min`.
fn find_short_cycle_edge(
    g: &MultiGraph,
    adj: &[Vec<(u32, u32)>],
    girth_min: usize,
    from: usize,
) -> Option<usize> {
    let m = g.edges.len();
    (0..m).map(|i| (from + i) % m).find(|&e| {
        let (u, v) = g.edges[e];
        u == v || bounded_distance(adj, u as usize, v as usize, girth_min - 2, Some(e as u32)).is_some()
    })
}

/// BFS distance from `s` to `t` if it is at most `limit`, optionally ignoring one edge.
fn bounded_distance(
    adj: &[Vec<(u32, u32)>],
    s: usize,
    t: usize,
    limit: usize,
    skip_edge: Option<u32>,
) -> Option<usize> {
    if s == t {
        return Some(0);
    }
    let mut dist = std::collections::HashMap::new();
    dist.insert(s, 0usize);
    let mut queue = VecDeque::from([s]);
    while let Some(x) = queue.pop_front() {
        let dx = dist[&x];
        if dx >= limit {
            continue;
        }
        for &(y, e) in &adj[x] {
            if Some(e) == skip_edge {
                continue;
            }
            let y = y as usize;
            if y == t {
                return Some(dx + 1);
            }
            if let std::collections::hash_map::Entry::Vacant(slot) = dist.entry(y) {
                slot.insert(dx + 1);
                queue.push_back(y);
            }
        }
    }
    None
}

fn remove_adj(adj: &mut [Vec<(u32, u32)>], e: u32, (u, v): (u32, u32)) {
    for w in [u, v] {
        if let Some(pos) = adj[w as usize].iter().position(|&(_, id)| id == e) {
            adj[w as usize].swap_remove(pos);
        }
    }
}

fn add_adj(adj: &mut [Vec<(u32, u32)>], e: u32, (u, v): (u32, u32)) {
    adj[u as usize].push((v, e));
    adj[v as usize].push((u, e));
}

fn try_switch(
    g: &mut MultiGraph,
    adj: &mut [Vec<(u32, u32)>],
    e: usize,
    f: usize,
    new_e: (u32, u32),
    new_f: (u32, u32),
    girth_min: usize,
) -> bool {
    let (old_e, old_f) = (g.edges[e], g.edges[f]);
    remove_adj(adj, e as u32, old_e);
    remove_adj(adj, f as u32, old_f);
    let closes = |adj: &[Vec<(u32, u32)>], (a, b): (u32, u32)| {
        a == b || bounded_distance(adj, a as usize, b as usize, girth_min - 2, None).is_some()
    };
    let ok = if closes(adj, new_e) {
        false
    } else {
        add_adj(adj, e as u32, new_e);
        if closes(adj, new_f) {
            remove_adj(adj, e as u32, new_e);
            false
        } else {
            add_adj(adj, f as u32, new_f);
            true
        }
    };
    if ok {
        g.edges[e] = new_e;
        g.edges[f] = new_f;
    } else {
        add_adj(adj, e as u32, old_e);
        add_adj(adj, f as u32, old_f);
    }
    ok
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleStats {
    /// Number of simple k-cycles for `3 <= k <= K`.
    pub counts: BTreeMap<usize, u64>,
    pub loops: u64,
    /// Pairs of parallel edges (cycles of length 2).
    pub double_edges: u64,
    /// Shortest cycle length if it is at most `K`.
    pub girth: Option<usize>,
    pub k_max: usize,
}

impl CycleStats {
    pub fn count(&self, k: usize) -> u64 {
        self.counts.get(&k).copied().unwrap_or(0)
    }
}

/// Counts simple cycles of length `3..=k_max`. Parallel edges give distinct
/// cycles, as in the pairing model.
pub fn cycle_counts(g: &MultiGraph, k_max: usize) -> Result<CycleStats> {
    if k_max > MAX_CYCLE_LEN {
        return Err(Error::BudgetExceeded {
            what: "cycle length",
            size: k_max as u64,
            limit: MAX_CYCLE_LEN as u64,
        });
    }
    let base = g.base();
    let adj = base.adjacency();
    let mut raw = vec![0u64; k_max + 1];
    let mut on_path = vec![false; base.n];
    for s in 0..base.n {
        on_path[s] = true;
        dfs_cycles(&adj, s, s, 1, k_max, &mut on_path, &mut raw);
        on_path[s] = false;
    }
    let mut counts = BTreeMap::new();
    for k in 3..=k_max {
        counts.insert(k, raw[k] / 2);
    }
    let loops = base.edges.iter().filter(|(u, v)| u == v).count() as u64;
    let mut mult: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    for &(u, v) in &base.edges {
        if u != v {
            *mult.entry((u.min(v), u.max(v))).or_default() += 1;
        }
    }
    let double_edges = mult.values().map(|&c| c * (c - 1) / 2).sum();
    let girth = if loops > 0 {
        Some(1)
    } else if double_edges > 0 {
        Some(2)
    } else {
        (3..=k_max).find(|k| counts[k] > 0)
    };
    Ok(CycleStats {
        counts,
        loops,
        double_edges,
        girth,
        k_max,
    })
}

/// Extends paths from the minimum vertex `s`; `len` is the vertex count of the path.
fn dfs_cycles(
    adj: &[Vec<(u32, u32)>],
    s: usize,
    cur: usize,
    len: usize,
    k_max: usize,
    on_path: &mut [bool],
    raw: &mut [u64],
) {
    for &(nb, _) in &adj[cur] {
        let nb = nb as usize;
        if nb == s {
            if len >= 3 {
                raw[len] += 1;
            }
        } else if nb > s && !on_path[nb] && len < k_max {
            on_path[nb] = true;
            dfs_cycles(adj, s, nb, len + 1, k_max, on_path, raw);
            on_path[nb] = false;
        }
    }
}

/// Adds the ghost vertex joined to every original vertex.
pub fn augment(g: &MultiGraph) -> Result<MultiGraph> {
    if g.augmented {
        return Err(Error::InvalidState("graph is already augmented".into()));
    }
    let mut edges = g.edges.clone();
    edges.extend((0..g.n as u32).map(|v| (v, g.n as u32)));
    Ok(MultiGraph {
        n: g.n,
        edges,
        pairing: g.pairing.clone(),
        augmented: true,
    })
}

fn adj_matvec(adj: &[Vec<(u32, u32)>], x: &[f64], out: &mut [f64]) {
    for (v, nbrs) in adj.iter().enumerate() {
        out[v] = nbrs.iter().map(|&(u, _)| x[u as usize]).sum();
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) -> f64 {
    let nrm = dot(x, x).sqrt();
    if nrm > 0.0 {
        x.iter_mut().for_each(|v| *v /= nrm);
    }
    nrm
}

/// Largest eigenpair of the adjacency operator restricted to the orthogonal
/// complement of `deflate`, by Lanczos with full reorthogonalization. The
/// Krylov size grows until the Ritz residual is at most `tol`.
fn lanczos_top(
    adj: &[Vec<(u32, u32)>],
    deflate: &[Vec<f64>],
    tol: f64,
) -> Result<(f64, Vec<f64>, f64)> {
    let n = adj.len();
    let dim = n - deflate.len();
    if dim == 0 {
        return Err(Error::InvalidState("no eigenvalues left after deflation".into()));
    }
    let mut rng = seeded(0x5eed);
    let mut start: Vec<f64> = (0..n).map(|_| rng.uniform() - 0.5).collect();
    let project = |x: &mut Vec<f64>, basis: &[Vec<f64>]| {
        for b in basis {
            let c = dot(x, b);
            x.iter_mut().zip(b).for_each(|(xi, bi)| *xi -= c * bi);
        }
    };
    project(&mut start, deflate);
    normalize(&mut start);

    let mut q: Vec<Vec<f64>> = vec![start];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut target = dim.min(40);
    loop {
        while alpha.len() < target {
            let j = alpha.len();
            adj_matvec(adj, &q[j], &mut w);
            let a = dot(&w, &q[j]);
            alpha.push(a);
            let mut r = w.clone();
            // Two passes of Gram-Schmidt keep the basis orthogonal to working precision.
            for _ in 0..2 {
                project(&mut r, deflate);
                project(&mut r, &q);
            }
            let b = normalize(&mut r);
            if alpha.len() == dim || b <= 1e-12 {
                beta.push(0.0);
                break;
            }
            beta.push(b);
            q.push(r);
        }
        let m = alpha.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (idx, &theta) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty");
        let s = eig.eigenvectors.column(idx);
        let resid = (beta[m - 1] * s[m - 1]).abs();
        if resid <= tol || m >= dim || beta[m - 1] == 0.0 {
            let mut vec = vec![0.0; n];
            for (k, qk) in q.iter().take(m).enumerate() {
                vec.iter_mut().zip(qk).for_each(|(v, x)| *v += s[k] * x);
            }
            normalize(&mut vec);
            return Ok((theta, vec, resid));
        }
        target = (2 * m).min(dim);
    }
}

/// Second-largest adjacency eigenvalue of a connected, unaugmented graph.
pub fn second_eigenvalue(g: &MultiGraph, tol: f64) -> Result<f64> {
    if g.augmented {
        return Err(Error::InvalidState("second_eigenvalue expects an unaugmented graph".into()));
    }
    if g.n < 2 {
        return Err(Error::InvalidState("need at least two vertices".into()));
    }
    if !g.is_connected() {
        return Err(Error::NotConnected);
    }
    let adj = g.adjacency();
    let perron = if g.regular_degree().is_some() {
        vec![1.0 / (g.n as f64).sqrt(); g.n]
    } else {
        lanczos_top(&adj, &[], tol * 1e-3)?.1
    };
    Ok(lanczos_top(&adj, &[perron], tol)?.0)
}

/// Deletes `m = p*d_star/2` well-separated edges and attaches `p` new
/// vertices, each to `d_star` of the freed endpoints.
///
/// The freed endpoints, taken in the order `v_1, v_{m+1}, v_2, v_{m+2}, ...`,
/// go round-robin to the new vertices. Returns `(g_hat, g_tilde)`.
pub fn modify_graph(
    g: &MultiGraph,
    p: usize,
    d_star: usize,
    seed: u64,
    min_separation: usize,
) -> Result<(MultiGraph, MultiGraph)> {
    modify_graph_with_budget(g, p, d_star, seed, min_separation, 10_000)
}

pub fn modify_graph_with_budget(
    g: &MultiGraph,
    p: usize,
    d_star: usize,
    seed: u64,
    min_separation: usize,
    max_attempts: usize,
) -> Result<(MultiGraph, MultiGraph)> {
    if g.augmented {
        return Err(Error::InvalidState("modify_graph expects an unaugmented graph".into()));
    }
    if p == 0 {
        return Ok((g.clone(), g.clone()));
    }
    if p % 2 == 1 {
        return Err(Error::InvalidParams(format!("p = {p} must be even")));
    }
    let d = g
        .regular_degree()
        .ok_or_else(|| Error::InvalidParams("graph is not regular".into()))?;
    if !g.is_simple() {
        return Err(Error::InvalidParams("graph is not simple".into()));
    }
    if d_star + 1 != d && d_star != d + 1 {
        return Err(Error::InvalidParams(format!("d_star = {d_star} must be d - 1 or d + 1 (d = {d})")));
    }
    let m = p * d_star / 2;
    let adj = g.adjacency();
    let mut rng = seeded(seed);
    let mut attempts = 0;
    let chosen = loop {
        if attempts >= max_attempts {
            return Err(Error::PlacementFailure { attempts });
        }
        attempts += 1;
        let mut picks: Vec<(u32, u32, u32)> = Vec::with_capacity(m);
        for _ in 0..m {
            let v = rng.below(g.n as u64) as usize;
            let (u, e) = adj[v][rng.below(adj[v].len() as u64) as usize];
            picks.push((v as u32, u, e));
        }
        if placement_ok(&adj, &picks, min_separation) {
            break picks;
        }
    };

    let removed: std::collections::HashSet<u32> = chosen.iter().map(|c| c.2).collect();
    let hat_edges: Vec<(u32, u32)> = g
        .edges
        .iter()
        .enumerate()
        .filter(|(e, _)| !removed.contains(&(*e as u32)))
        .map(|(_, &uv)| uv)
        .collect();
    let g_hat = MultiGraph::new(g.n, hat_edges.clone())?;

    let mut tilde_edges = hat_edges;
    let mut order = Vec::with_capacity(2 * m);
    for &(v, u, _) in &chosen {
        order.push(v);
        order.push(u);
    }
    for (j, &v) in order.iter().enumerate() {
        tilde_edges.push((v, (g.n + j % p) as u32));
    }
    let g_tilde = MultiGraph::new(g.n + p, tilde_edges)?;
    Ok((g_hat, g_tilde))
}

/// Distinct edges, distinct endpoints, and endpoints of different edges at
/// distance at least `min_sep`.
fn placement_ok(adj: &[Vec<(u32, u32)>], picks: &[(u32, u32, u32)], min_sep: usize) -> bool {
    let mut owner = std::collections::HashMap::new();
    for (i, &(v, u, _)) in picks.iter().enumerate() {
        for x in [v, u] {
            if owner.insert(x as usize, i).is_some() {
                return false;
            }
        }
    }
    if min_sep <= 1 {
        return true;
    }
    for (i, &(v, u, _)) in picks.iter().enumerate() {
        for s in [v as usize, u as usize] {
            let mut seen = std::collections::HashSet::from([s]);
            let mut frontier = vec![s];
            for _ in 0..min_sep - 1 {
                let mut next = Vec::new();
                for x in frontier {
                    for &(y, _) in &adj[x] {
                        let y = y as usize;
                        if seen.insert(y) {
                            if owner.get(&y).is_some_and(|&j| j != i) {
                                return false;
                            }
                            next.push(y);
                        }
                    }
                }
                frontier = next;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_graph_spectrum() {
        let l = second_eigenvalue(&MultiGraph::complete(4), 1e-12).unwrap();
        assert!((l + 1.0).abs() < 1e-10);
    }

    #[test]
    fn cycle_spectrum() {
        for n in [5, 8, 13] {
            let l = second_eigenvalue(&MultiGraph::cycle(n), 1e-12).unwrap();
            let expect = 2.0 * (2.0 * std::f64::consts::PI / n as f64).cos();
            assert!((l - expect).abs() < 1e-9, "n={n}: {l} vs {expect}");
        }
    }

    #[test]
    fn disconnected_is_rejected() {
        let g = MultiGraph::new(4, vec![(0, 1), (2, 3)]).unwrap();
        assert_eq!(second_eigenvalue(&g, 1e-10), Err(Error::NotConnected));
    }

    #[test]
    fn cycles_of_small_graphs() {
        let k4 = cycle_counts(&MultiGraph::complete(4), 4).unwrap();
        assert_eq!(k4.count(3), 4);
        assert_eq!(k4.count(4), 3);
        let pet = cycle_counts(&MultiGraph::petersen(), 6).unwrap();
        assert_eq!(pet.girth, Some(5));
        assert_eq!(pet.count(5), 12);
        let tree = cycle_counts(&MultiGraph::path(6), 8).unwrap();
        assert_eq!(tree.girth, None);
        assert!(cycle_counts(&MultiGraph::path(3), 13).is_err());
    }

    #[test]
    fn parallel_edges_count_separately() {
        // Triangle with one doubled side: two distinct triangles.
        let g = MultiGraph::new(3, vec![(0, 1), (0, 1), (1, 2), (2, 0)]).unwrap();
        let s = cycle_counts(&g, 3).unwrap();
        assert_eq!(s.count(3), 2);
        assert_eq!(s.double_edges, 1);
        assert_eq!(s.girth, Some(2));
    }

    #[test]
    fn augmentation() {
        let k2 = MultiGraph::path(2);
        let a = augment(&k2).unwrap();
        assert_eq!(a.edges(), &[(0, 1), (0, 2), (1, 2)]);
        assert_eq!(augment(&a), Err(Error::InvalidState("graph is already augmented".into())));
        let single = augment(&MultiGraph::new(1, vec![]).unwrap()).unwrap();
        assert_eq!(single.edges().len(), 1);
    }

    #[test]
    fn edge_list_round_trip() {
        let g = augment(&sample_pairing_model(10, 3, 4).unwrap()).unwrap();
        let text = g.to_edge_list();
        let back = MultiGraph::from_edge_list(&text).unwrap();
        assert_eq!(back.to_edge_list(), text);
        assert_eq!(back.edges(), g.edges());
        assert!(back.is_augmented());
    }

    #[test]
    fn odd_arity_rejected() {
        assert_eq!(sample_pairing_model(3, 3, 0), Err(Error::InvalidArity { n: 3, d: 3 }));
    }

    #[test]
    fn girth_conditioning() {
        let (g, _) = sample_with_girth(200, 3, 6, 11, 100_000).unwrap();
        assert_eq!(g.regular_degree(), Some(3));
        let s = cycle_counts(&g, 5).unwrap();
        assert_eq!(s.girth, None);
    }

    #[test]
    fn modification_degrees() {
        let (g, _) = sample_simple(400, 3, 9, 1000).unwrap();
        for d_star in [2, 4] {
            let (hat, tilde) = modify_graph(&g, 4, d_star, 5, 4).unwrap();
            let m = 4 * d_star / 2;
            assert_eq!(hat.edges().len(), g.edges().len() - m);
            assert_eq!(tilde.edges().len(), g.edges().len() + m);
            let dh = hat.degrees();
            assert_eq!(dh.iter().filter(|&&x| x == 2).count(), 2 * m);
            let dt = tilde.degrees();
            assert!(dt[..400].iter().all(|&x| x == 3));
            assert!(dt[400..].iter().all(|&x| x == d_star));
        }
    }
}
