//! Edwards–Sokal coupled Monte Carlo: Swendsen–Wang sweeps for the Potts
//! model with a field (through the ghost vertex), FK-Ising sweeps, a
//! single-site heat-bath kernel for cross-checks, and chain plumbing.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{augment, sample_pairing_model, sample_with_girth, MultiGraph};
use crate::numerics::{
    bp_fixed_points, critical_line, rcm_bp_fixed_points, root_marginal, ModelParams, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::rng::{DrawStream, Phase, StreamKey};
use crate::unionfind::UnionFind;

/// Colors of the original vertices; the ghost is implicitly color 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinConfig {
    pub colors: Vec<u16>,
}

impl SpinConfig {
    pub fn constant(n: usize, c: u16) -> Self {
        Self { colors: vec![c; n] }
    }

    pub fn random(n: usize, q: usize, rng: &mut DrawStream) -> Self {
        Self {
            colors: (0..n).map(|_| rng.below(q as u64) as u16).collect(),
        }
    }

    /// Color of vertex `v`, with `v == n` meaning the ghost.
    pub fn color(&self, v: usize) -> u16 {
        self.colors.get(v).copied().unwrap_or(0)
    }

    /// Fraction of vertices carrying each color.
    pub fn profile(&self, q: usize) -> Vec<f64> {
        let mut counts = vec![0usize; q];
        for &c in &self.colors {
            counts[c as usize] += 1;
        }
        let n = self.colors.len().max(1) as f64;
        counts.into_iter().map(|c| c as f64 / n).collect()
    }
}

/// Open/closed state of every edge plus its component structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BondConfig {
    open: Vec<bool>,
    labels: Vec<u32>,
    sizes: Vec<u32>,
    /// Label of the component holding the ghost (augmented graphs only).
    ghost_label: Option<u32>,
    n: usize,
}

impl BondConfig {
    pub fn new(g: &MultiGraph, open: Vec<bool>) -> Result<Self> {
        if open.len() != g.edges().len() {
            return Err(Error::InvalidState(format!(
                "{} bond bits for {} edges",
                open.len(),
                g.edges().len()
            )));
        }
        let mut uf = UnionFind::new(g.vertex_count());
        for (&(u, v), &o) in g.edges().iter().zip(&open) {
            if o {
                uf.union(u as usize, v as usize);
            }
        }
        let (labels, k) = uf.labels();
        let mut sizes = vec![0u32; k];
        for &l in &labels {
            sizes[l as usize] += 1;
        }
        Ok(Self {
            ghost_label: g.ghost().map(|gh| labels[gh]),
            open,
            labels,
            sizes,
            n: g.n(),
        })
    }

    pub fn all_closed(g: &MultiGraph) -> Self {
        Self::new(g, vec![false; g.edges().len()]).expect("sized")
    }

    pub fn all_open(g: &MultiGraph) -> Self {
        Self::new(g, vec![true; g.edges().len()]).expect("sized")
    }

    pub fn open(&self) -> &[bool] {
        &self.open
    }

    pub fn open_count(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    /// Component label of every vertex (ghost included).
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn component_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn component_sizes(&self) -> &[u32] {
        &self.sizes
    }

    pub fn ghost_label(&self) -> Option<u32> {
        self.ghost_label
    }

    /// Label of the giant: the ghost's component, or the largest one when
    /// there is no ghost (ties go to the lowest label).
    fn giant_label(&self) -> Option<u32> {
        self.ghost_label.or_else(|| {
            let mut best: Option<(u32, u32)> = None;
            for (l, &s) in self.sizes.iter().enumerate() {
                if best.is_none_or(|(_, bs)| s > bs) {
                    best = Some((l as u32, s));
                }
            }
            best.map(|b| b.0)
        })
    }

    /// Fraction of original vertices in the giant.
    pub fn giant_fraction(&self) -> f64 {
        let Some(l) = self.giant_label() else { return 0.0 };
        let ghost_in = self.ghost_label.is_some() as u32;
        (self.sizes[l as usize] - ghost_in) as f64 / self.n.max(1) as f64
    }

    /// Sizes of the non-giant clusters.
    pub fn cluster_sizes(&self) -> Vec<u32> {
        let giant = self.giant_label();
        self.sizes
            .iter()
            .enumerate()
            .filter(|(l, _)| Some(*l as u32) != giant)
            .map(|(_, &s)| s)
            .collect()
    }

    pub fn max_non_giant(&self) -> u32 {
        self.cluster_sizes().into_iter().max().unwrap_or(0)
    }
}

fn require_augmented(g: &MultiGraph) -> Result<()> {
    if g.is_augmented() {
        Ok(())
    } else {
        Err(Error::InvalidState("expected a ghost-augmented graph".into()))
    }
}

/// Opens each monochromatic edge of `G*` with its open probability.
///
/// Edge `e` consumes draw `e` of the stream whether or not it is eligible.
pub fn es_bonds_given_spins(
    params: &ModelParams,
    g_star: &MultiGraph,
    sigma: &SpinConfig,
    rng: &mut DrawStream,
) -> Result<BondConfig> {
    require_augmented(g_star)?;
    params.q_int()?;
    let (pe, pg) = (params.p_edge(), params.p_ghost());
    let base = g_star.base_edge_count();
    let open: Vec<bool> = g_star
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &(u, v))| {
            let u01 = rng.uniform();
            let p = if e < base { pe } else { pg };
            sigma.color(u as usize) == sigma.color(v as usize) && u01 < p
        })
        .collect();
    let eta = BondConfig::new(g_star, open)?;
    debug_assert!(bichromatic_open_edges(g_star, sigma, &eta) == 0);
    Ok(eta)
}

/// Number of open edges whose endpoints disagree (must be zero after
/// [`es_bonds_given_spins`]).
pub fn bichromatic_open_edges(g: &MultiGraph, sigma: &SpinConfig, eta: &BondConfig) -> usize {
    g.edges()
        .iter()
        .zip(eta.open())
        .filter(|(&(u, v), &o)| o && sigma.color(u as usize) != sigma.color(v as usize))
        .count()
}

/// Colors the ghost's component 0 and every other component uniformly.
///
/// Components draw in label order, one draw each.
pub fn es_spins_given_bonds(q: usize, g_star: &MultiGraph, eta: &BondConfig, rng: &mut DrawStream) -> SpinConfig {
    let ghost = eta.ghost_label();
    let comp_color: Vec<u16> = (0..eta.component_count())
        .map(|l| {
            let c = rng.below(q as u64) as u16;
            if Some(l as u32) == ghost {
                0
            } else {
                c
            }
        })
        .collect();
    SpinConfig {
        colors: (0..g_star.n()).map(|v| comp_color[eta.labels()[v] as usize]).collect(),
    }
}

/// One Swendsen–Wang sweep: bonds given spins, then spins given bonds.
pub fn sw_sweep(
    params: &ModelParams,
    g_star: &MultiGraph,
    sigma: &SpinConfig,
    key: &StreamKey,
    sweep: u64,
) -> Result<(SpinConfig, BondConfig)> {
    let q = params.q_int()?;
    let eta = es_bonds_given_spins(params, g_star, sigma, &mut key.stream(sweep, Phase::Bonds))?;
    let next = es_spins_given_bonds(q, g_star, &eta, &mut key.stream(sweep, Phase::Spins));
    Ok((next, eta))
}

/// One FK-Ising (zero field, `q = 2`) sweep: color clusters `+-1`, then reopen
/// monochromatic edges with probability `w/(1+w)`. Returns the new bonds and
/// the intermediate `+-1` spins.
pub fn fk_ising_sweep(
    w_ising: f64,
    g: &MultiGraph,
    eta: &BondConfig,
    key: &StreamKey,
    sweep: u64,
) -> Result<(BondConfig, Vec<i8>)> {
    if g.is_augmented() {
        return Err(Error::InvalidState("FK-Ising sweep expects an unaugmented graph".into()));
    }
    if !(w_ising.is_finite() && w_ising >= 0.0) {
        return Err(Error::InvalidParams(format!("w = {w_ising} must be >= 0")));
    }
    let mut srng = key.stream(sweep, Phase::Spins);
    let comp_spin: Vec<i8> = (0..eta.component_count())
        .map(|_| if srng.below(2) == 0 { 1 } else { -1 })
        .collect();
    let spins: Vec<i8> = eta.labels().iter().map(|&l| comp_spin[l as usize]).collect();
    let p = w_ising / (1.0 + w_ising);
    let mut brng = key.stream(sweep, Phase::Bonds);
    let open: Vec<bool> = g
        .edges()
        .iter()
        .map(|&(u, v)| {
            let u01 = brng.uniform();
            spins[u as usize] == spins[v as usize] && u01 < p
        })
        .collect();
    Ok((BondConfig::new(g, open)?, spins))
}

/// Opens each closed edge independently with probability `xi`.
pub fn bernoulli_sprinkle(g: &MultiGraph, eta: &BondConfig, xi: f64, rng: &mut DrawStream) -> Result<BondConfig> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::InvalidParams(format!("xi = {xi} must lie in [0, 1]")));
    }
    let open: Vec<bool> = eta.open().iter().map(|&o| rng.uniform() < xi || o).collect();
    BondConfig::new(g, open)
}

/// Single-site heat-bath sweep in vertex order (slow cross-check kernel).
pub fn glauber_sweep(params: &ModelParams, g: &MultiGraph, sigma: &SpinConfig, rng: &mut DrawStream) -> Result<SpinConfig> {
    let q = params.q_int()?;
    let base = g.base();
    let adj = base.adjacency();
    let mut s = sigma.clone();
    let mut logw = vec![0.0; q];
    for v in 0..base.n() {
        logw.iter_mut().for_each(|x| *x = 0.0);
        logw[0] = params.b();
        for &(u, _) in &adj[v] {
            // A loop contributes a constant to every color and can be skipped.
            if u as usize != v {
                logw[s.colors[u as usize] as usize] += params.beta();
            }
        }
        let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logw.iter().map(|x| (x - m).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.uniform() * total;
        let mut c = q - 1;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                c = i;
                break;
            }
            u -= w;
        }
        s.colors[v] = c as u16;
    }
    Ok(s)
}

/// Reference windows around the free and wired phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseWindows {
    pub nu_check_free: Vec<f64>,
    pub nu_check_wired: Vec<f64>,
    pub psi_free: f64,
    pub psi_wired: f64,
    pub eps: f64,
}

impl PhaseWindows {
    /// Windows at `params`; `eps` defaults to half the smallest coordinate
    /// gap between the two root marginals.
    pub fn from_params(params: &ModelParams, eps: Option<f64>) -> Result<Self> {
        let (nf, nw) = bp_fixed_points(params, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        let cf = root_marginal(params, &nf)?;
        let cw = root_marginal(params, &nw)?;
        let rc = rcm_bp_fixed_points(params, DEFAULT_TOL)?;
        let eps = eps.unwrap_or_else(|| default_eps(cf.probs(), cw.probs()));
        Ok(Self {
            nu_check_free: cf.probs().to_vec(),
            nu_check_wired: cw.probs().to_vec(),
            psi_free: rc.psi_free,
            psi_wired: rc.psi_wired,
            eps,
        })
    }
}

pub fn default_eps(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(f64::INFINITY, f64::min)
}

/// Observables of one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub color_profile: Vec<f64>,
    pub giant_fraction: f64,
    pub max_non_giant: u32,
    pub magnetization: Option<f64>,
    /// Minus the number of monochromatic base edges, per vertex.
    pub energy: f64,
    pub in_v_free: bool,
    pub in_v_wired: bool,
    pub in_e_free: bool,
    pub in_e_wired: bool,
}

pub fn observe(q: usize, g: &MultiGraph, sigma: &SpinConfig, eta: &BondConfig, windows: Option<&PhaseWindows>) -> Observation {
    let color_profile = sigma.profile(q);
    let giant_fraction = eta.giant_fraction();
    let mono = g.edges()[..g.base_edge_count()]
        .iter()
        .filter(|&&(u, v)| sigma.color(u as usize) == sigma.color(v as usize))
        .count();
    let in_v = |target: &[f64], eps: f64| color_profile.iter().zip(target).all(|(l, t)| (l - t).abs() < eps);
    let (mut vf, mut vw, mut ef, mut ew) = (false, false, false, false);
    if let Some(w) = windows {
        vf = in_v(&w.nu_check_free, w.eps);
        vw = in_v(&w.nu_check_wired, w.eps);
        ef = (giant_fraction - w.psi_free).abs() <= w.eps;
        ew = (giant_fraction - w.psi_wired).abs() <= w.eps;
    }
    Observation {
        magnetization: None,
        energy: -(mono as f64) / g.n().max(1) as f64,
        max_non_giant: eta.max_non_giant(),
        color_profile,
        giant_fraction,
        in_v_free: vf,
        in_v_wired: vw,
        in_e_free: ef,
        in_e_wired: ew,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainMode {
    PottsSw,
    FkIsing,
    Glauber,
}

/// Starting state of each replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// Even replicas start ordered (all color 0 / all open), odd ones disordered.
    #[default]
    Split,
    Ordered,
    Disordered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairingSpec {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    #[serde(default)]
    pub girth_min: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    File(PathBuf),
    Pairing(PairingSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub d: usize,
    #[serde(default)]
    pub q: Option<f64>,
    /// Omitted means the critical inverse temperature at `B` (Potts modes).
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(rename = "B", default)]
    pub b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub graph: GraphSpec,
    pub params: ParamsSpec,
    pub sweeps: u64,
    #[serde(default)]
    pub burn_in: Option<u64>,
    #[serde(default)]
    pub thin: Option<u64>,
    #[serde(default)]
    pub replicas: Option<u64>,
    pub seed: u64,
    pub mode: ChainMode,
    #[serde(default)]
    pub eps_window: Option<f64>,
    #[serde(default)]
    pub init: Option<InitKind>,
}

/// Girth-switching budget for graph construction in chain configs.
const GIRTH_SWITCH_BUDGET: usize = 1_000_000;

impl ChainConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ConfigError(e.to_string()))
    }

    /// Config with every default filled in and the inverse temperature resolved.
    pub fn materialize(&self) -> Result<ChainConfig> {
        let mut c = self.clone();
        if c.sweeps == 0 {
            return Err(Error::ConfigError("sweeps must be positive".into()));
        }
        let burn = c.burn_in.unwrap_or(c.sweeps / 10);
        if burn >= c.sweeps {
            return Err(Error::ConfigError("burn_in must be smaller than sweeps".into()));
        }
        c.burn_in = Some(burn);
        let thin = c.thin.unwrap_or(1);
        if thin == 0 {
            return Err(Error::ConfigError("thin must be positive".into()));
        }
        c.thin = Some(thin);
        let reps = c.replicas.unwrap_or(1);
        if reps == 0 {
            return Err(Error::ConfigError("replicas must be positive".into()));
        }
        c.replicas = Some(reps);
        c.init = Some(c.init.unwrap_or_default());
        match c.mode {
            ChainMode::FkIsing => {
                if c.params.beta.is_none_or(|b| !(b.is_finite() && b > 0.0)) {
                    return Err(Error::ConfigError("fk_ising mode needs a positive beta".into()));
                }
                if c.params.q.is_some_and(|q| q != 2.0) || c.params.b.is_some_and(|b| b != 0.0) {
                    return Err(Error::ConfigError("fk_ising mode is the zero-field q = 2 model".into()));
                }
                c.params.q = Some(2.0);
                c.params.b = Some(0.0);
            }
            ChainMode::PottsSw | ChainMode::Glauber => {
                let q = c.params.q.ok_or_else(|| Error::ConfigError("params.q is required".into()))?;
                let b = c.params.b.unwrap_or(0.0);
                c.params.b = Some(b);
                if c.params.beta.is_none() {
                    let (_, bc) = critical_line(c.params.d, q, b, false).map_err(|e| Error::ConfigError(e.to_string()))?;
                    c.params.beta = Some(bc);
                }
                let p = self.model_params_of(&c)?;
                p.q_int().map_err(|e| Error::ConfigError(e.to_string()))?;
            }
        }
        if let GraphSpec::Pairing(ps) = &c.graph {
            if ps.d != c.params.d {
                return Err(Error::ConfigError(format!(
                    "graph degree {} differs from params.d {}",
                    ps.d, c.params.d
                )));
            }
        }
        Ok(c)
    }

    fn model_params_of(&self, c: &ChainConfig) -> Result<ModelParams> {
        ModelParams::new(
            c.params.d,
            c.params.q.unwrap_or(f64::NAN),
            c.params.beta.unwrap_or(f64::NAN),
            c.params.b.unwrap_or(0.0),
        )
        .map_err(|e| Error::ConfigError(e.to_string()))
    }

    /// Model parameters of a materialized Potts config.
    pub fn model_params(&self) -> Result<ModelParams> {
        self.model_params_of(self)
    }

    /// Builds the graph; relative file paths resolve against `base_dir`.
    pub fn build_graph(&self, base_dir: &Path) -> Result<MultiGraph> {
        match &self.graph {
            GraphSpec::File(p) => {
                let path = if p.is_absolute() { p.clone() } else { base_dir.join(p) };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::ConfigError(format!("{}: {e}", path.display())))?;
                let g = MultiGraph::from_edge_list(&text)?;
                Ok(g.base())
            }
            GraphSpec::Pairing(ps) => match ps.girth_min {
                Some(gm) if gm > 1 => Ok(sample_with_girth(ps.n, ps.d, gm, ps.seed, GIRTH_SWITCH_BUDGET)?.0),
                _ => sample_pairing_model(ps.n, ps.d, ps.seed),
            },
        }
    }
}

/// One retained sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub replica: u64,
    pub sweep: u64,
    pub giant_fraction: f64,
    pub color_profile: Vec<f64>,
    pub magnetization: Option<f64>,
    pub energy: f64,
    pub max_non_giant: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub seed: u64,
    pub sweeps: u64,
    pub burn_in: u64,
    pub thin: u64,
    /// Records of every replica, replica-major.
    pub records: Vec<TraceRecord>,
    pub windows: Option<PhaseWindows>,
}

impl ChainTrace {
    pub fn replica_records(&self, replica: u64) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(move |r| r.replica == replica)
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Number of sweeps kept after burn-in and thinning.
pub fn retained_count(sweeps: u64, burn_in: u64, thin: u64) -> u64 {
    (sweeps - burn_in).div_ceil(thin)
}

/// Runs every replica of a chain; `base_dir` resolves graph file paths.
pub fn run_chain(config: &ChainConfig, base_dir: &Path) -> Result<ChainTrace> {
    let c = config.materialize()?;
    let g = c.build_graph(base_dir)?;
    run_chain_on(&c, &g)
}

/// Runs a materialized config on a given (unaugmented) graph.
pub fn run_chain_on(c: &ChainConfig, g: &MultiGraph) -> Result<ChainTrace> {
    let (burn, thin, reps) = (
        c.burn_in.expect("materialized"),
        c.thin.expect("materialized"),
        c.replicas.expect("materialized"),
    );
    let g = g.base();
    let (windows, per_replica): (Option<PhaseWindows>, Vec<Result<Vec<TraceRecord>>>) = match c.mode {
        ChainMode::FkIsing => {
            let beta = c.params.beta.expect("materialized");
            let w = (2.0 * beta).exp_m1();
            let out = (0..reps)
                .into_par_iter()
                .map(|r| run_fk_replica(c, &g, w, r, burn, thin))
                .collect();
            (None, out)
        }
        ChainMode::PottsSw | ChainMode::Glauber => {
            let params = c.model_params()?;
            let windows = PhaseWindows::from_params(&params, c.eps_window).ok();
            let g_star = augment(&g)?;
            let out = (0..reps)
                .into_par_iter()
                .map(|r| run_potts_replica(c, &params, &g_star, r, burn, thin, windows.as_ref()))
                .collect();
            (windows, out)
        }
    };
    let mut records = Vec::new();
    for r in per_replica {
        records.extend(r?);
    }
    Ok(ChainTrace {
        seed: c.seed,
        sweeps: c.sweeps,
        burn_in: burn,
        thin,
        records,
        windows,
    })
}

fn starts_ordered(init: InitKind, replica: u64) -> bool {
    match init {
        InitKind::Split => replica % 2 == 0,
        InitKind::Ordered => true,
        InitKind::Disordered => false,
    }
}

fn run_potts_replica(
    c: &ChainConfig,
    params: &ModelParams,
    g_star: &MultiGraph,
    replica: u64,
    burn: u64,
    thin: u64,
    windows: Option<&PhaseWindows>,
) -> Result<Vec<TraceRecord>> {
    let q = params.q_int()?;
    let key = StreamKey::new(c.seed, replica);
    let n = g_star.n();
    let mut sigma = if starts_ordered(c.init.unwrap_or_default(), replica) {
        SpinConfig::constant(n, 0)
    } else {
        SpinConfig::random(n, q, &mut key.setup_stream(0))
    };
    let mut records = Vec::with_capacity(retained_count(c.sweeps, burn, thin) as usize);
    for sweep in 0..c.sweeps {
        let eta = match c.mode {
            ChainMode::Glauber => {
                sigma = glauber_sweep(params, g_star, &sigma, &mut key.stream(sweep, Phase::Spins))?;
                // Bond layer drawn only for the observables.
                es_bonds_given_spins(params, g_star, &sigma, &mut key.stream(sweep, Phase::Bonds))?
            }
            _ => {
                // (new spins, bonds they were drawn from) is an ES-coupled pair.
                let (next, eta) = sw_sweep(params, g_star, &sigma, &key, sweep)?;
                sigma = next;
                eta
            }
        };
        if sweep >= burn && (sweep - burn) % thin == 0 {
            let obs = observe(q, g_star, &sigma, &eta, windows);
            records.push(TraceRecord {
                replica,
                sweep,
                giant_fraction: obs.giant_fraction,
                color_profile: obs.color_profile,
                magnetization: None,
                energy: obs.energy,
                max_non_giant: obs.max_non_giant,
            });
        }
    }
    Ok(records)
}

fn run_fk_replica(c: &ChainConfig, g: &MultiGraph, w: f64, replica: u64, burn: u64, thin: u64) -> Result<Vec<TraceRecord>> {
    let key = StreamKey::new(c.seed, replica);
    let mut eta = if starts_ordered(c.init.unwrap_or_default(), replica) {
        BondConfig::all_open(g)
    } else {
        BondConfig::all_closed(g)
    };
    let n = g.n().max(1) as f64;
    let mut records = Vec::with_capacity(retained_count(c.sweeps, burn, thin) as usize);
    for sweep in 0..c.sweeps {
        let (next, spins) = fk_ising_sweep(w, g, &eta, &key, sweep)?;
        if sweep >= burn && (sweep - burn) % thin == 0 {
            // Spins are a sample from the Ising marginal given the old bonds.
            let plus = spins.iter().filter(|&&s| s > 0).count() as f64 / n;
            let mag = spins.iter().map(|&s| s as f64).sum::<f64>() / n;
            let mono = g
                .edges()
                .iter()
                .filter(|&&(u, v)| spins[u as usize] == spins[v as usize])
                .count();
            records.push(TraceRecord {
                replica,
                sweep,
                giant_fraction: eta.giant_fraction(),
                color_profile: vec![plus, 1.0 - plus],
                magnetization: Some(mag),
                energy: -(mono as f64) / n,
                max_non_giant: eta.max_non_giant(),
            });
        }
        eta = next;
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::MultiGraph;

    fn k2_star() -> MultiGraph {
        augment(&MultiGraph::path(2)).unwrap()
    }

    #[test]
    fn zero_couplings_close_everything() {
        let p = ModelParams::new(3, 3.0, 0.0, 0.0).unwrap();
        let g = k2_star();
        let key = StreamKey::new(1, 0);
        for s in 0..100 {
            let eta = es_bonds_given_spins(&p, &g, &SpinConfig::constant(2, 0), &mut key.stream(s, Phase::Bonds)).unwrap();
            assert_eq!(eta.open_count(), 0);
        }
    }

    #[test]
    fn bonds_need_augmented_graph() {
        let p = ModelParams::new(3, 3.0, 1.0, 0.0).unwrap();
        let g = MultiGraph::path(2);
        let r = es_bonds_given_spins(&p, &g, &SpinConfig::constant(2, 0), &mut StreamKey::new(0, 0).stream(0, Phase::Bonds));
        assert!(matches!(r, Err(Error::InvalidState(_))));
    }

    #[test]
    fn open_everything_gives_all_favored() {
        let g = k2_star();
        let eta = BondConfig::all_open(&g);
        let s = es_spins_given_bonds(3, &g, &eta, &mut StreamKey::new(0, 0).stream(0, Phase::Spins));
        assert_eq!(s.colors, vec![0, 0]);
        assert_eq!(eta.giant_fraction(), 1.0);
    }

    #[test]
    fn observation_of_constant_state() {
        let g = k2_star();
        let s = SpinConfig::constant(2, 0);
        let o = observe(3, &g, &s, &BondConfig::all_open(&g), None);
        assert_eq!(o.color_profile, vec![1.0, 0.0, 0.0]);
        assert_eq!(o.giant_fraction, 1.0);
    }

    #[test]
    fn sprinkle_is_monotone() {
        let g = MultiGraph::cycle(10);
        let mut rng = StreamKey::new(5, 0).setup_stream(1);
        let mut eta = BondConfig::all_closed(&g);
        for _ in 0..50 {
            let next = bernoulli_sprinkle(&g, &eta, 0.05, &mut rng).unwrap();
            assert!(eta.open().iter().zip(next.open()).all(|(a, b)| !a || *b));
            eta = next;
        }
    }

    #[test]
    fn retained_counts() {
        assert_eq!(retained_count(100, 10, 1), 90);
        assert_eq!(retained_count(100, 10, 4), 23);
    }
}
