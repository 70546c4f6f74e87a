//! Belief propagation on the d-regular tree, the Bethe functional, the
//! critical line, random-cluster pre-messages and the two-spin reduction.
//!
//! Color-symmetric laws are handled in the reduced coordinate `a = nu(0)`,
//! with the remaining `q - 1` colors sharing `(1 - a)/(q - 1)` each. The
//! reduced maps are valid for real `q > 2`; anything that touches the full
//! probability vector requires integer `q`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default stopping tolerance for fixed-point iterations.
pub const DEFAULT_TOL: f64 = 1e-13;
/// Default iteration cap for fixed-point iterations.
pub const DEFAULT_MAX_ITER: usize = 1_000_000;
/// Default tolerance on the Bethe-functional gap for a critical point.
pub const DEFAULT_TOL_CRIT: f64 = 1e-9;
/// Default sup-distance below which the free and wired fixed points count as
/// one. Near `B_+` both iterations slow down and stop a few `1e-13` apart,
/// while distinct fixed points separate like `sqrt(B_+ - B)`.
pub const DEFAULT_TOL_SEPARATION: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    d: usize,
    q: f64,
    beta: f64,
    b: f64,
}

impl ModelParams {
    pub fn new(d: usize, q: f64, beta: f64, b: f64) -> Result<Self> {
        if d < 3 {
            return Err(Error::InvalidParams(format!("degree d = {d} must be at least 3")));
        }
        if !(q.is_finite() && q > 2.0) {
            return Err(Error::InvalidParams(format!("q = {q} must be a finite real > 2")));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidParams(format!("beta = {beta} must be finite and >= 0")));
        }
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::InvalidParams(format!("B = {b} must be finite and >= 0")));
        }
        Ok(Self { d, q, beta, b })
    }

    /// Same model with a different inverse temperature.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.d, self.q, beta, self.b)
    }

    pub fn d(&self) -> usize {
        self.d
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    /// Edge weight `e^beta - 1`.
    pub fn w(&self) -> f64 {
        self.beta.exp_m1()
    }
    /// Ghost-edge weight `e^B - 1`.
    pub fn w_ghost(&self) -> f64 {
        self.b.exp_m1()
    }
    /// Open probability of an ordinary edge, `1 - e^{-beta}`.
    pub fn p_edge(&self) -> f64 {
        -(-self.beta).exp_m1()
    }
    /// Open probability of a ghost edge, `1 - e^{-B}`.
    pub fn p_ghost(&self) -> f64 {
        -(-self.b).exp_m1()
    }

    pub fn is_potts_integer(&self) -> bool {
        self.q.fract() == 0.0 && self.q <= u16::MAX as f64
    }

    /// Number of colors, for operations that live on the spin space.
    pub fn q_int(&self) -> Result<usize> {
        if self.is_potts_integer() {
            Ok(self.q as usize)
        } else {
            Err(Error::UnsupportedSpinSpace(self.q))
        }
    }
}

/// Probability vector on the colors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorLaw {
    probs: Vec<f64>,
    reduced: Option<(f64, f64)>,
}

impl ColorLaw {
    /// Validates nonnegativity and normalization (to 1e-12).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParams("empty color law".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidParams("color law has a negative or non-finite entry".into()));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParams(format!("color law sums to {s}")));
        }
        let reduced = if probs[1..].iter().all(|p| *p == probs.get(1).copied().unwrap_or(0.0)) {
            probs.get(1).map(|b| (probs[0], *b))
        } else {
            None
        };
        Ok(Self { probs, reduced })
    }

    /// Normalizes a nonnegative weight vector.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let s: f64 = weights.iter().sum();
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::NumericalFailure(format!("degenerate normalizer {s}")));
        }
        let probs: Vec<f64> = weights.iter().map(|w| w / s).collect();
        Self::new(probs)
    }

    /// Symmetric law `(a, b, ..., b)` with `b = (1 - a)/(q - 1)`.
    pub fn from_reduced(q: usize, a: f64) -> Result<Self> {
        if q < 2 || !(0.0..=1.0).contains(&a) {
            return Err(Error::InvalidParams(format!("bad reduced law q = {q}, a = {a}")));
        }
        let b = (1.0 - a) / (q - 1) as f64;
        let mut probs = vec![b; q];
        probs[0] = a;
        Ok(Self {
            probs,
            reduced: Some((a, b)),
        })
    }

    pub fn uniform(q: usize) -> Self {
        Self::from_reduced(q, 1.0 / q as f64).expect("q >= 2")
    }

    /// Point mass on the favored color.
    pub fn delta1(q: usize) -> Self {
        Self::from_reduced(q, 1.0).expect("q >= 2")
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn q(&self) -> usize {
        self.probs.len()
    }

    /// `(a, b)` when colors `1..q` share a common probability.
    pub fn reduced(&self) -> Option<(f64, f64)> {
        self.reduced
    }

    pub fn sup_dist(&self, other: &ColorLaw) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_law(params: &ModelParams, nu: &ColorLaw) -> Result<usize> {
    let q = params.q_int()?;
    if nu.q() != q {
        return Err(Error::InvalidParams(format!(
            "color law has {} entries, model has q = {q}",
            nu.q()
        )));
    }
    Ok(q)
}

/// `log (K nu)_i` with `K_ij = e^{beta [i == j]}`.
fn log_k_nu(beta: f64, nu: &[f64]) -> Vec<f64> {
    let w = beta.exp_m1();
    nu.iter().map(|p| (1.0 + w * p).ln()).collect()
}

/// Normalizes `exp(log_w)` stably.
fn normalize_logs(log_w: &[f64]) -> Result<ColorLaw> {
    let m = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::NumericalFailure("degenerate normalizer".into()));
    }
    let weights: Vec<f64> = log_w.iter().map(|l| (l - m).exp()).collect();
    ColorLaw::from_weights(&weights)
}

fn cavity_law(params: &ModelParams, nu: &ColorLaw, k: usize) -> Result<ColorLaw> {
    check_law(params, nu)?;
    let lk = log_k_nu(params.beta, nu.probs());
    let logs: Vec<f64> = lk
        .iter()
        .enumerate()
        .map(|(i, l)| if i == 0 { params.b } else { 0.0 } + k as f64 * l)
        .collect();
    let mut out = normalize_logs(&logs)?;
    // Keep the color symmetry exact when the input has it.
    if let Some((a, _)) = nu.reduced() {
        let ra = reduced_cavity(params, a, k);
        out = ColorLaw::from_reduced(nu.q(), ra)?;
    }
    Ok(out)
}

/// One belief-propagation step on the full vector.
pub fn bp_step(params: &ModelParams, nu: &ColorLaw) -> Result<ColorLaw> {
    cavity_law(params, nu, params.d - 1)
}

/// Root marginal: like [`bp_step`] with all `d` children.
pub fn root_marginal(params: &ModelParams, nu: &ColorLaw) -> Result<ColorLaw> {
    cavity_law(params, nu, params.d)
}

/// Reduced cavity map with `k` children: new `nu(0)` given `nu(0) = a`.
///
/// Valid for real `q`.
pub fn reduced_cavity(params: &ModelParams, a: f64, k: usize) -> f64 {
    let q = params.q;
    let e = params.beta.exp();
    let b = (1.0 - a) / (q - 1.0);
    let s1 = e * a + (q - 1.0) * b;
    let s2 = a + (e + q - 2.0) * b;
    let r = (s2 / s1).powi(k as i32);
    1.0 / (1.0 + (q - 1.0) * (-params.b).exp() * r)
}

/// Reduced BP map `a -> BP(a)`.
pub fn reduced_bp(params: &ModelParams, a: f64) -> f64 {
    reduced_cavity(params, a, params.d - 1)
}

/// Reduced root marginal `a -> nu_check(0)`.
pub fn reduced_root_marginal(params: &ModelParams, a: f64) -> f64 {
    reduced_cavity(params, a, params.d)
}

/// Fixed point of an increasing map, approached monotonically from `start`.
///
/// Uses Aitken extrapolation when plain iteration is slow; an extrapolated
/// point is kept only if it stays on the same side of the fixed point, so
/// the iterates remain monotone and the limit is the nearest fixed point.
pub(crate) fn monotone_fixed_point<F: Fn(f64) -> f64>(
    f: F,
    start: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let upward = f(start) >= start;
    let mut a = start;
    let mut res = f64::INFINITY;
    let mut it = 0usize;
    while it < max_iter {
        let a1 = f(a);
        let a2 = f(a1);
        it += 2;
        let (d1, d2) = ((a1 - a).abs(), (a2 - a1).abs());
        res = d2;
        // Stop once the step is below tol and the geometric tail estimate
        // d2 * rho / (1 - rho) is too, or the steps are rounding noise
        // (at the ulp floor, changing direction, or growing).
        if d2 <= tol {
            let rho = if d1 > 0.0 { d2 / d1 } else { 0.0 };
            let noise = d2 <= 8.0 * f64::EPSILON * a2.abs().max(f64::MIN_POSITIVE)
                || (a2 - a1) * (a1 - a) < 0.0
                || rho > 1.5;
            if noise || d2 * rho <= tol * (1.0 - rho) {
                return Ok(a2);
            }
        }
        let mut next = a2;
        let denom = a2 - 2.0 * a1 + a;
        if denom != 0.0 {
            let c = a - (a1 - a) * (a1 - a) / denom;
            if c.is_finite() && (0.0..=1.0).contains(&c) {
                let fc = f(c);
                it += 1;
                // Rounding slack: an exact extrapolation may land a few ulps past the root.
                let slack = 4.0 * f64::EPSILON;
                let same_side = if upward {
                    c >= a2 && fc >= c - slack
                } else {
                    c <= a2 && fc <= c + slack
                };
                if same_side {
                    next = c;
                }
            }
        }
        a = next;
    }
    Err(Error::ConvergenceFailure {
        iterations: it,
        residual: res,
    })
}

/// Free and wired BP fixed points, iterated in the reduced coordinate from
/// the uniform law and the point mass on color 0.
pub fn bp_fixed_points(
    params: &ModelParams,
    tol: f64,
    max_iter: usize,
) -> Result<(ColorLaw, ColorLaw)> {
    let q = params.q_int()?;
    let (af, aw) = reduced_fixed_points(params, tol, max_iter)?;
    Ok((ColorLaw::from_reduced(q, af)?, ColorLaw::from_reduced(q, aw)?))
}

/// Reduced free and wired fixed points `(a_free, a_wired)`; real `q` allowed.
pub fn reduced_fixed_points(params: &ModelParams, tol: f64, max_iter: usize) -> Result<(f64, f64)> {
    let f = |a: f64| reduced_bp(params, a);
    let af = monotone_fixed_point(f, 1.0 / params.q, tol, max_iter)?;
    let aw = monotone_fixed_point(f, 1.0, tol, max_iter)?;
    Ok((af, aw))
}

/// Plain full-vector BP iteration, kept as a cross-check of the reduced path.
pub fn bp_fixed_point_full(
    params: &ModelParams,
    start: &ColorLaw,
    tol: f64,
    max_iter: usize,
) -> Result<ColorLaw> {
    check_law(params, start)?;
    // Strip the symmetry tag so the generic vector path is exercised.
    let mut nu = ColorLaw {
        probs: start.probs.clone(),
        reduced: None,
    };
    let mut res = f64::INFINITY;
    for it in 0..max_iter {
        let mut next = bp_step(params, &nu)?;
        next.reduced = None;
        res = next.sup_dist(&nu);
        nu = next;
        if res <= tol {
            return Ok(nu);
        }
        let _ = it;
    }
    Err(Error::ConvergenceFailure {
        iterations: max_iter,
        residual: res,
    })
}

/// Bethe functional with the field carried by the vertex term only:
/// `log sum_i e^{B[i=0]} (K nu)_i^d - (d/2) log(nu^T K nu)`.
pub fn bethe_functional(params: &ModelParams, nu: &ColorLaw) -> Result<f64> {
    check_law(params, nu)?;
    if nu.probs().iter().any(|p| *p <= 0.0) {
        return Err(Error::DomainError("Bethe functional needs a strictly positive law".into()));
    }
    let d = params.d as f64;
    let lk = log_k_nu(params.beta, nu.probs());
    let terms: Vec<f64> = lk
        .iter()
        .enumerate()
        .map(|(i, l)| if i == 0 { params.b } else { 0.0 } + d * l)
        .collect();
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let vertex = m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
    let w = params.w();
    let quad: f64 = 1.0 + w * nu.probs().iter().map(|p| p * p).sum::<f64>();
    Ok(vertex - 0.5 * d * quad.ln())
}

/// Bethe functional of the symmetric law with `nu(0) = a`; real `q` allowed.
pub fn reduced_bethe(params: &ModelParams, a: f64) -> f64 {
    let q = params.q;
    let d = params.d as f64;
    let w = params.w();
    let b = (1.0 - a) / (q - 1.0);
    let l1 = params.b + d * (1.0 + w * a).ln();
    let l2 = (q - 1.0).ln() + d * (1.0 + w * b).ln();
    let m = l1.max(l2);
    let vertex = m + ((l1 - m).exp() + (l2 - m).exp()).ln();
    let quad = 1.0 + w * (a * a + (q - 1.0) * b * b);
    vertex - 0.5 * d * quad.ln()
}

/// `w_c(B)` without window checks; finite up to and including `B_+`.
pub fn critical_weight_raw(d: usize, q: f64, b: f64) -> f64 {
    let x = (q - 1.0) * (-b).exp();
    let y = x.powf(2.0 / d as f64);
    (y - 1.0) / (1.0 - y / (q - 1.0))
}

fn check_dq(d: usize, q: f64) -> Result<()> {
    if d < 3 {
        return Err(Error::InvalidParams(format!("degree d = {d} must be at least 3")));
    }
    if !(q.is_finite() && q > 2.0) {
        return Err(Error::InvalidParams(format!("q = {q} must be a finite real > 2")));
    }
    Ok(())
}

/// Critical weight and inverse temperature `(w_c, beta_crit)` at field `b`.
///
/// `b = 0` is accepted only with `allow_zero_field` (the zero-field limit).
pub fn critical_line(d: usize, q: f64, b: f64, allow_zero_field: bool) -> Result<(f64, f64)> {
    check_dq(d, q)?;
    if !b.is_finite() || b < 0.0 || (b == 0.0 && !allow_zero_field) {
        return Err(Error::DomainError(format!("field B = {b} must be positive")));
    }
    let bp = b_plus(d, q)?;
    if b >= bp {
        return Err(Error::OutsideCriticalWindow { b, b_plus: bp });
    }
    let w = critical_weight_raw(d, q, b);
    Ok((w, w.ln_1p()))
}

/// Upper end `B_+` of the coexistence window, by bisection on `[1e-12, 50]`.
pub fn b_plus(d: usize, q: f64) -> Result<f64> {
    check_dq(d, q)?;
    let dd = d as f64;
    let target = (dd / (dd - 2.0)).powi(2);
    let resid = |b: f64| {
        let w = critical_weight_raw(d, q, b);
        (1.0 + w) * (1.0 + w / (q - 1.0)) - target
    };
    let (mut lo, mut hi) = (1e-12, 50.0);
    let (rlo, rhi) = (resid(lo), resid(hi));
    if !(rlo > 0.0 && rhi < 0.0) {
        return Err(Error::SolverFailure(format!(
            "B_+ not bracketed on [1e-12, 50] (residuals {rlo:e}, {rhi:e})"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if resid(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Uniqueness,
    Disordered,
    Ordered,
    Critical,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::Uniqueness => "uniqueness",
            Regime::Disordered => "disordered",
            Regime::Ordered => "ordered",
            Regime::Critical => "critical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub params: ModelParams,
    pub nu_free: ColorLaw,
    pub nu_wired: ColorLaw,
    pub psi_free_val: f64,
    pub psi_wired_val: f64,
    pub regime: Regime,
    pub w_c: Option<f64>,
    pub beta_crit: Option<f64>,
    pub b_plus: Option<f64>,
    /// Regimes at `beta -/+ 1e-3`, reported for critical points.
    pub neighbors: Option<(Regime, Regime)>,
}

const NEIGHBOR_STEP: f64 = 1e-3;

fn regime_of(params: &ModelParams, tol: f64, tol_crit: f64) -> Result<(Regime, ColorLaw, ColorLaw, f64, f64)> {
    let (nf, nw) = bp_fixed_points(params, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let pf = bethe_functional(params, &nf)?;
    let pw = bethe_functional(params, &nw)?;
    let regime = if nf.sup_dist(&nw) <= tol {
        Regime::Uniqueness
    } else if (pf - pw).abs() <= tol_crit {
        Regime::Critical
    } else if pf > pw {
        Regime::Disordered
    } else {
        Regime::Ordered
    };
    Ok((regime, nf, nw, pf, pw))
}

/// Classifies a parameter point with the default critical tolerance.
pub fn classify_regime(params: &ModelParams, tol: f64) -> Result<PhasePoint> {
    classify_regime_with(params, tol, DEFAULT_TOL_CRIT)
}

pub fn classify_regime_with(params: &ModelParams, tol: f64, tol_crit: f64) -> Result<PhasePoint> {
    let (regime, nu_free, nu_wired, psi_free_val, psi_wired_val) = regime_of(params, tol, tol_crit)?;
    let bp = b_plus(params.d, params.q)?;
    let (w_c, beta_crit, b_plus_v) = if params.b < bp {
        let (w, bc) = critical_line(params.d, params.q, params.b, true)?;
        (Some(w), Some(bc), Some(bp))
    } else {
        (None, None, None)
    };
    let neighbors = if regime == Regime::Critical {
        let lo = params.with_beta((params.beta - NEIGHBOR_STEP).max(0.0))?;
        let hi = params.with_beta(params.beta + NEIGHBOR_STEP)?;
        Some((regime_of(&lo, tol, tol_crit)?.0, regime_of(&hi, tol, tol_crit)?.0))
    } else {
        None
    };
    Ok(PhasePoint {
        params: *params,
        nu_free,
        nu_wired,
        psi_free_val,
        psi_wired_val,
        regime,
        w_c,
        beta_crit,
        b_plus: b_plus_v,
        neighbors,
    })
}

/// Random-cluster pre-message fixed points on the tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcmBp {
    pub gamma: f64,
    pub b_free: f64,
    pub b_wired: f64,
    pub psi_free: f64,
    pub psi_wired: f64,
    pub s_free: f64,
    pub s_wired: f64,
}

/// Pre-message map with `k` children, all carrying message `b`.
pub fn bp_hat(params: &ModelParams, b: f64, k: usize) -> f64 {
    let q = params.q;
    let w = params.w();
    let gamma = w / (w + q);
    let r = ((1.0 - gamma * b) / (1.0 + (q - 1.0) * gamma * b)).powi(k as i32);
    let e = (-params.b).exp();
    (1.0 - e * r) / (1.0 + (q - 1.0) * e * r)
}

/// Iterates the pre-message map from 0 and from 1.
pub fn rcm_bp_fixed_points(params: &ModelParams, tol: f64) -> Result<RcmBp> {
    let k = params.d - 1;
    let f = |b: f64| bp_hat(params, b, k);
    let b_free = monotone_fixed_point(f, 0.0, tol, DEFAULT_MAX_ITER)?;
    let b_wired = monotone_fixed_point(f, 1.0, tol, DEFAULT_MAX_ITER)?;
    let psi_free = bp_hat(params, b_free, params.d);
    let psi_wired = bp_hat(params, b_wired, params.d);
    let q = params.q;
    let s = |psi: f64| (q - 1.0) / q * psi + 1.0 / q;
    let w = params.w();
    Ok(RcmBp {
        gamma: w / (w + q),
        b_free,
        b_wired,
        psi_free,
        psi_wired,
        s_free: s(psi_free),
        s_wired: s(psi_wired),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsingReduction {
    pub beta_star: f64,
    pub k_coef: f64,
    pub h_coef: f64,
    pub beta_uni: f64,
    pub x_val: f64,
    pub x_star_val: f64,
    pub m_val: f64,
}

/// Uniqueness threshold `artanh(1/(d-1))` of the zero-field Ising model.
pub fn ising_beta_uni(d: usize) -> f64 {
    (1.0 / (d as f64 - 1.0)).atanh()
}

pub fn ising_reduction(params: &ModelParams) -> Result<IsingReduction> {
    let w = params.w();
    if w <= 0.0 {
        return Err(Error::InvalidParams("Ising reduction needs beta > 0".into()));
    }
    let q = params.q;
    let beta_star = 0.25 * ((1.0 + w) * (1.0 + w / (q - 1.0))).ln();
    let k_coef = 0.25 * ((1.0 + w) / (1.0 + w / (q - 1.0))).ln();
    let h_coef = 0.5 * (params.b - (q - 1.0).ln());
    let (x_val, x_star_val, m_val) = ising_magnetization(params.d, beta_star, 1e-15)?;
    Ok(IsingReduction {
        beta_star,
        k_coef,
        h_coef,
        beta_uni: ising_beta_uni(params.d),
        x_val,
        x_star_val,
        m_val,
    })
}

/// Zero-field Ising on the d-regular tree: `(x, x_star, m)` at inverse
/// temperature `beta`, with `x` the largest message fixed point and `m` the
/// root magnetization of the plus phase.
pub fn ising_magnetization(d: usize, beta: f64, tol: f64) -> Result<(f64, f64, f64)> {
    if d < 3 {
        return Err(Error::InvalidParams(format!("degree d = {d} must be at least 3")));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::DomainError(format!("beta = {beta} must be positive")));
    }
    let k = d as f64 - 1.0;
    if k * beta.tanh() <= 1.0 {
        return Ok((0.5, 0.5, 0.0));
    }
    // In s = log t the message map is g(s) = (d-1) log((e^{2b+s}+1)/(e^s+e^{2b})).
    // g(s) - s is positive on (0, s*) and negative beyond.
    let log_ratio = |s: f64| {
        let two_b = 2.0 * beta;
        let num = log_add(two_b + s, 0.0);
        let den = log_add(s, two_b);
        num - den
    };
    let gap = |s: f64| k * log_ratio(s) - s;
    let mut lo = 0.0;
    let mut hi = 2.0 * k * beta + 1.0;
    if gap(hi) >= 0.0 {
        return Err(Error::SolverFailure("Ising message root not bracketed".into()));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol * hi.max(1.0) {
            break;
        }
    }
    let s = 0.5 * (lo + hi);
    let x = logistic(s);
    let x_star = logistic((k + 1.0) * log_ratio(s));
    Ok((x, x_star, 2.0 * x_star - 1.0))
}

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `e^s / (1 + e^s)`.
fn logistic(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_weights() {
        let p = ModelParams::new(3, 3.0, 0.7, 0.2).unwrap();
        assert!((p.w() - (0.7f64.exp() - 1.0)).abs() < 1e-12 * (1.0 + p.w()));
        assert!((p.p_edge() - p.w() / (1.0 + p.w())).abs() < 1e-12);
        assert!((p.p_ghost() - p.w_ghost() / (1.0 + p.w_ghost())).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ModelParams::new(2, 3.0, 1.0, 0.0).is_err());
        assert!(ModelParams::new(3, 2.0, 1.0, 0.0).is_err());
        assert!(ModelParams::new(3, 3.0, -1.0, 0.0).is_err());
        assert!(ModelParams::new(3, 3.0, 1.0, f64::NAN).is_err());
        let p = ModelParams::new(3, 2.5, 1.0, 0.0).unwrap();
        assert_eq!(p.q_int(), Err(Error::UnsupportedSpinSpace(2.5)));
        assert!(bp_step(&p, &ColorLaw::uniform(3)).is_err());
    }

    #[test]
    fn field_only_step() {
        let p = ModelParams::new(3, 3.0, 0.0, 2f64.ln()).unwrap();
        let nu = ColorLaw::new(vec![0.2, 0.5, 0.3]).unwrap();
        let out = bp_step(&p, &nu).unwrap();
        for (x, y) in out.probs().iter().zip([0.5, 0.25, 0.25]) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn reduced_matches_full_iteration() {
        let p = ModelParams::new(3, 4.0, 1.1, 0.05).unwrap();
        let (f, w) = bp_fixed_points(&p, 1e-14, 100_000).unwrap();
        let ff = bp_fixed_point_full(&p, &ColorLaw::uniform(4), 1e-14, 100_000).unwrap();
        let wf = bp_fixed_point_full(&p, &ColorLaw::delta1(4), 1e-14, 100_000).unwrap();
        assert!(f.sup_dist(&ff) < 1e-11);
        assert!(w.sup_dist(&wf) < 1e-11);
    }

    #[test]
    fn reduced_bethe_matches_full() {
        let p = ModelParams::new(4, 5.0, 0.9, 0.3).unwrap();
        let nu = ColorLaw::from_reduced(5, 0.4).unwrap();
        let full = bethe_functional(&p, &nu).unwrap();
        assert!((full - reduced_bethe(&p, 0.4)).abs() < 1e-13);
    }

    #[test]
    fn bethe_needs_positive_law() {
        let p = ModelParams::new(3, 3.0, 0.5, 0.0).unwrap();
        let r = bethe_functional(&p, &ColorLaw::delta1(3));
        assert!(matches!(r, Err(Error::DomainError(_))));
    }

    #[test]
    fn critical_line_window_errors() {
        assert!(matches!(critical_line(3, 3.0, 0.0, false), Err(Error::DomainError(_))));
        assert!(matches!(
            critical_line(3, 3.0, 1.0, false),
            Err(Error::OutsideCriticalWindow { .. })
        ));
        assert!(critical_line(3, 3.0, 0.0, true).is_ok());
    }

    #[test]
    fn aitken_keeps_monotone_side() {
        // Slow contraction towards 0.3 from below.
        let f = |a: f64| 0.3 + 0.999 * (a - 0.3);
        let r = monotone_fixed_point(f, 0.0, 1e-14, 1_000_000).unwrap();
        assert!((r - 0.3).abs() < 1e-12, "{r}");
    }
}
