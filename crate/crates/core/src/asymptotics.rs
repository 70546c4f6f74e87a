//! Small-subgraph-conditioning constants, the free/wired prefactor ratio,
//! cavity ratios and the mixture-weight planner for random regular graphs
//! at a critical point.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::CycleStats;
use crate::numerics::{bp_fixed_points, critical_line, root_marginal, ColorLaw, ModelParams, DEFAULT_MAX_ITER, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    Free,
    Wired,
}

impl Which {
    pub fn label(&self) -> &'static str {
        match self {
            Which::Free => "free",
            Which::Wired => "wired",
        }
    }
}

/// Relative tolerance on `beta - beta_crit(B)` for "critical" input.
pub const CRITICAL_REL_TOL: f64 = 1e-8;

/// Rejects parameters off the critical line.
pub fn require_critical(params: &ModelParams) -> Result<f64> {
    let (_, beta_c) = critical_line(params.d(), params.q(), params.b(), false)
        .map_err(|e| Error::OutsideCriticalLine(e.to_string()))?;
    let beta = params.beta();
    if (beta - beta_c).abs() > CRITICAL_REL_TOL * beta.max(1.0) {
        return Err(Error::OutsideCriticalLine(format!(
            "beta = {beta} but beta_crit(B = {}) = {beta_c}",
            params.b()
        )));
    }
    Ok(beta_c)
}

/// `log p(x) - log x` for the BP ratio map
/// `p(x) = e^B ((e^beta x + q - 1)/(e^beta + x + q - 2))^{d-1}`.
fn ratio_gap(params: &ModelParams, lx: f64) -> f64 {
    let (e, q) = (params.beta().exp(), params.q());
    let x = lx.exp();
    params.b() + (params.d() as f64 - 1.0) * ((e * x + q - 1.0).ln() - (e + x + q - 2.0).ln()) - lx
}

/// Positive fixed points of the ratio map, ascending.
pub fn ratio_roots(params: &ModelParams) -> Result<Vec<f64>> {
    // Fixed points satisfy x in [e^B, e^B (e^beta)^{d-1}] up to the q terms;
    // a generous log grid brackets every sign change.
    let (lo, hi) = (-30.0f64, 30.0 + params.b() + params.d() as f64 * params.beta());
    let steps = 20_000;
    let mut roots = Vec::new();
    let mut prev_l = lo;
    let mut prev = ratio_gap(params, lo);
    for s in 1..=steps {
        let l = lo + (hi - lo) * s as f64 / steps as f64;
        let cur = ratio_gap(params, l);
        if cur == 0.0 {
            roots.push(l.exp());
        } else if prev != 0.0 && (prev < 0.0) != (cur < 0.0) {
            let (mut a, mut b) = (prev_l, l);
            let fa_neg = prev < 0.0;
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if (ratio_gap(params, m) < 0.0) == fa_neg {
                    a = m;
                } else {
                    b = m;
                }
            }
            roots.push((0.5 * (a + b)).exp());
        }
        prev_l = l;
        prev = cur;
    }
    if roots.is_empty() {
        return Err(Error::SolverFailure("no positive root of the ratio map".into()));
    }
    Ok(roots)
}

/// Eigen-data of the transfer matrix at one BP fixed point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QEigs {
    pub which: Which,
    /// BP fixed point `nu`.
    pub nu: ColorLaw,
    /// Ratio `nu(0)/nu(1)` from the scalar root solve.
    pub x_root: f64,
    pub b_matrix: Vec<Vec<f64>>,
    pub q_matrix: Vec<Vec<f64>>,
    /// Closed-form eigenvalues, descending: `1, lambda_2, lambda_3 (x q-2)`.
    pub closed: Vec<f64>,
    /// Symmetric eigensolver output, descending.
    pub numeric: Vec<f64>,
}

impl QEigs {
    pub fn lambda2(&self) -> f64 {
        self.closed_lambda2_lambda3().0
    }

    pub fn lambda3(&self) -> f64 {
        self.closed_lambda2_lambda3().1
    }

    fn closed_lambda2_lambda3(&self) -> (f64, f64) {
        closed_eigs(self.b_beta(), self.q(), self.x_root)
    }

    fn q(&self) -> usize {
        self.nu.q()
    }

    fn b_beta(&self) -> f64 {
        // B_00 = e^{beta + 2B/d}, B_11 = e^beta.
        self.b_matrix[1][1].ln()
    }

    pub fn max_abs_closed_vs_numeric(&self) -> f64 {
        self.closed
            .iter()
            .zip(&self.numeric)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `(lambda_2, lambda_3)` in closed form from the ratio `x`.
pub fn closed_eigs(beta: f64, q: usize, x: f64) -> (f64, f64) {
    let e = beta.exp();
    let qf = q as f64;
    let l2 = e * x / (e * x + qf - 1.0) - x / (e + x + qf - 2.0);
    let l3 = (e - 1.0) / (e + x + qf - 2.0);
    (l2, l3)
}

fn potts_b_matrix(params: &ModelParams, q: usize) -> DMatrix<f64> {
    let t = params.b() / params.d() as f64;
    DMatrix::from_fn(q, q, |i, j| {
        let diag = if i == j { params.beta() } else { 0.0 };
        (diag + t * ((i == 0) as u8 as f64 + (j == 0) as u8 as f64)).exp()
    })
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Transfer matrix `Q_ij = B_ij sqrt(v_i v_j) / sqrt([->i][->j])` with
/// `[->i] = sum_s v_s B_is` and `v` the BP fixed point with the field share
/// `e^{B/d}` of color 0 divided out (the matrix `B` already carries it).
pub fn q_matrix(params: &ModelParams, nu: &ColorLaw) -> DMatrix<f64> {
    let q = nu.q();
    let bm = potts_b_matrix(params, q);
    let t = (params.b() / params.d() as f64).exp();
    let mut v: Vec<f64> = nu.probs().to_vec();
    v[0] /= t;
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    let arrow: Vec<f64> = (0..q).map(|i| (0..q).map(|s| v[s] * bm[(i, s)]).sum()).collect();
    DMatrix::from_fn(q, q, |i, j| bm[(i, j)] * (v[i] * v[j]).sqrt() / (arrow[i] * arrow[j]).sqrt())
}

fn sorted_desc(v: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = v.into_iter().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

pub fn q_matrix_eigs(params: &ModelParams, which: Which) -> Result<QEigs> {
    let q = params.q_int()?;
    let (nf, nw) = bp_fixed_points(params, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let nu = match which {
        Which::Free => nf,
        Which::Wired => nw,
    };
    let roots = ratio_roots(params)?;
    let x_root = match which {
        Which::Free => roots[0],
        Which::Wired => *roots.last().expect("nonempty"),
    };
    let qm = q_matrix(params, &nu);
    let numeric = sorted_desc(SymmetricEigen::new(qm.clone()).eigenvalues.iter().copied());
    let (l2, l3) = closed_eigs(params.beta(), q, x_root);
    let closed = sorted_desc(std::iter::once(1.0).chain(std::iter::once(l2)).chain(std::iter::repeat_n(l3, q - 2)));
    Ok(QEigs {
        which,
        nu,
        x_root,
        b_matrix: to_rows(&potts_b_matrix(params, q)),
        q_matrix: to_rows(&qm),
        closed,
        numeric,
    })
}

/// Broadcast-channel contraction `1/2 max_{i,j} sum_k |M_ik - M_jk|` of the
/// tree channel at ratio `x`.
pub fn channel_contraction(beta: f64, q: usize, x: f64) -> f64 {
    let e = beta.exp();
    let qf = q as f64;
    let row = |i: usize| -> Vec<f64> {
        (0..q)
            .map(|k| {
                if i == 0 {
                    if k == 0 {
                        e * x / (e * x + qf - 1.0)
                    } else {
                        1.0 / (e * x + qf - 1.0)
                    }
                } else if k == 0 {
                    x / (e + x + qf - 2.0)
                } else {
                    (if i == k { e } else { 1.0 }) / (e + x + qf - 2.0)
                }
            })
            .collect()
    };
    let rows: Vec<Vec<f64>> = (0..q).map(row).collect();
    let mut best: f64 = 0.0;
    for i in 0..q {
        for j in i + 1..q {
            let tv: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b).abs()).sum();
            best = best.max(0.5 * tv);
        }
    }
    best
}

/// `theta_k = (d-1)^k / (2k)`.
pub fn theta(d: usize, k: usize) -> f64 {
    (d as f64 - 1.0).powi(k as i32) / (2.0 * k as f64)
}

/// `sum_{k>=3} u^k/(2k) = (-log(1-u) - u - u^2/2)/2` for `|u| < 1`.
fn cycle_series_limit(u: f64) -> f64 {
    if u.abs() < 0.25 {
        (3..80).map(|k| u.powi(k) / (2.0 * k as f64)).sum()
    } else {
        0.5 * (-(-u).ln_1p() - u - 0.5 * u * u)
    }
}

/// Small-subgraph-conditioning data at a critical point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SscData {
    pub d: usize,
    pub q: usize,
    pub free: QEigs,
    pub wired: QEigs,
    /// `lambda_2` agrees on both sides (it does on the critical line); the
    /// common value is then used for both so that it cancels exactly in
    /// `delta_k^f - delta_k^w`.
    pub lambda2_tied: bool,
    /// Eigenvalues `j >= 2` used for `delta_k`, per side.
    pub spectrum_free: Vec<f64>,
    pub spectrum_wired: Vec<f64>,
    pub k_tail: usize,
    /// `log prod_{k>=3} e^{-theta_k delta_k}` in closed form.
    pub log_prod_free: f64,
    pub log_prod_wired: f64,
    /// The same sum truncated at `k_tail`.
    pub partial_log_prod_free: f64,
    pub partial_log_prod_wired: f64,
    /// Certified bounds on the truncation error.
    pub tail_bound_free: f64,
    pub tail_bound_wired: f64,
    pub gamma: Option<GammaPrefactor>,
}

impl SscData {
    pub fn theta(&self, k: usize) -> f64 {
        theta(self.d, k)
    }

    pub fn delta(&self, which: Which, k: usize) -> f64 {
        let s = match which {
            Which::Free => &self.spectrum_free,
            Which::Wired => &self.spectrum_wired,
        };
        s.iter().map(|l| l.powi(k as i32)).sum()
    }

    /// `delta_k^f - delta_k^w`, eigenvalue by eigenvalue.
    pub fn delta_diff(&self, k: usize) -> f64 {
        self.spectrum_free
            .iter()
            .zip(&self.spectrum_wired)
            .map(|(a, b)| a.powi(k as i32) - b.powi(k as i32))
            .sum()
    }

    /// Per-cycle factor `(1 + delta_k^f)/(1 + delta_k^w)`.
    pub fn cycle_factor(&self, k: usize) -> f64 {
        1.0 + self.delta_diff(k) / (1.0 + self.delta(Which::Wired, k))
    }

    /// `exp(-sum_{k>=3} theta_k (delta_k^f - delta_k^w))`.
    pub fn base_cycle_correction(&self) -> f64 {
        (self.log_prod_free - self.log_prod_wired).exp()
    }
}

const LAMBDA2_TIE_TOL: f64 = 1e-9;

/// Eigenvalues, `theta_k`, `delta_k` and the cycle products.
pub fn ssc_products(params: &ModelParams, k_tail: usize) -> Result<SscData> {
    let q = params.q_int()?;
    let d = params.d();
    if k_tail < 3 {
        return Err(Error::InvalidParams("k_tail must be at least 3".into()));
    }
    let free = q_matrix_eigs(params, Which::Free)?;
    let wired = q_matrix_eigs(params, Which::Wired)?;
    let (mut l2f, l3f) = (free.lambda2(), free.lambda3());
    let (mut l2w, l3w) = (wired.lambda2(), wired.lambda3());
    let lambda2_tied = (l2f - l2w).abs() <= LAMBDA2_TIE_TOL * l2f.abs().max(l2w.abs()).max(1e-300);
    if lambda2_tied {
        let m = 0.5 * (l2f + l2w);
        (l2f, l2w) = (m, m);
    }
    let spec = |l2: f64, l3: f64| std::iter::once(l2).chain(std::iter::repeat_n(l3, q - 2)).collect::<Vec<_>>();
    let (spectrum_free, spectrum_wired) = (spec(l2f, l3f), spec(l2w, l3w));
    let dm1 = d as f64 - 1.0;
    for l in spectrum_free.iter().chain(&spectrum_wired) {
        let u = dm1 * l.abs();
        if u >= 1.0 {
            return Err(Error::DivergentRegime(u));
        }
    }
    let limit = |s: &[f64]| -s.iter().map(|l| cycle_series_limit(dm1 * l)).sum::<f64>();
    let partial = |s: &[f64]| -> f64 { -(3..=k_tail).map(|k| theta(d, k) * s.iter().map(|l| l.powi(k as i32)).sum::<f64>()).sum::<f64>() };
    let tail = |s: &[f64]| -> f64 {
        s.iter()
            .map(|l| {
                let u = dm1 * l.abs();
                u.powi(k_tail as i32 + 1) / (2.0 * (k_tail as f64 + 1.0) * (1.0 - u))
            })
            .sum()
    };
    Ok(SscData {
        d,
        q,
        lambda2_tied,
        k_tail,
        log_prod_free: limit(&spectrum_free),
        log_prod_wired: limit(&spectrum_wired),
        partial_log_prod_free: partial(&spectrum_free),
        partial_log_prod_wired: partial(&spectrum_wired),
        tail_bound_free: tail(&spectrum_free),
        tail_bound_wired: tail(&spectrum_wired),
        spectrum_free,
        spectrum_wired,
        free,
        wired,
        gamma: None,
    })
}

/// Everything, including the prefactor ratio (critical input only).
pub fn ssc_data(params: &ModelParams, k_tail: usize) -> Result<SscData> {
    let mut s = ssc_products(params, k_tail)?;
    s.gamma = Some(gamma_prefactor(params)?);
    Ok(s)
}

/// Maximizer data of the first-moment functional at a color profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Upsilon1 {
    pub value: f64,
    /// Edge-color matrix maximizer `x*`.
    pub x: Vec<Vec<f64>>,
    /// Scaling vector `mu` with `x*_ij` proportional to `K_ij mu_i mu_j`.
    pub mu: Vec<f64>,
}

/// Solves `mu_i ((e^beta - 1) mu_i + 1) = C alpha_i` with `sum mu = 1`.
fn solve_mu(w: f64, alpha: &[f64]) -> Vec<f64> {
    let mu_of = |c: f64| -> Vec<f64> { alpha.iter().map(|&a| 2.0 * c * a / (1.0 + (1.0 + 4.0 * w * c * a).sqrt())).collect() };
    let total = |c: f64| mu_of(c).iter().sum::<f64>();
    let (mut lo, mut hi) = (0.0, 1.0);
    while total(hi) < 1.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut mu = mu_of(0.5 * (lo + hi));
    let s: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|m| *m /= s);
    mu
}

fn check_profile(q: usize, alpha: &[f64]) -> Result<()> {
    if alpha.len() != q || alpha.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::DomainError("profile must be a strictly positive vector of length q".into()));
    }
    Ok(())
}

/// `Upsilon_1(alpha) = max_x [(d-1) sum a log a + d (1/2 sum x log B - 1/2 sum x log x)]`
/// over symmetric `x` with row sums `alpha`.
pub fn upsilon1(params: &ModelParams, alpha: &[f64]) -> Result<Upsilon1> {
    let q = params.q_int()?;
    check_profile(q, alpha)?;
    let (d, w, beta) = (params.d() as f64, params.w(), params.beta());
    let mu = solve_mu(w, alpha);
    let s = 1.0 + w * mu.iter().map(|m| m * m).sum::<f64>();
    let bm = potts_b_matrix(params, q);
    let mut x = vec![vec![0.0; q]; q];
    let mut acc = 0.0;
    for i in 0..q {
        for j in 0..q {
            let k = if i == j { beta.exp() } else { 1.0 };
            let xij = k * mu[i] * mu[j] / s;
            x[i][j] = xij;
            acc += 0.5 * xij * (bm[(i, j)].ln() - xij.ln());
        }
    }
    let ent: f64 = alpha.iter().map(|a| a * a.ln()).sum();
    Ok(Upsilon1 {
        value: (d - 1.0) * ent + d * acc,
        x,
        mu,
    })
}

/// Second-moment functional evaluated at the product maximizers
/// `gamma = alpha alpha^T`, `y_ikjl = x*_ij x*_kl`.
pub fn upsilon2_at_product(params: &ModelParams, alpha: &[f64]) -> Result<f64> {
    let q = params.q_int()?;
    let u = upsilon1(params, alpha)?;
    let bm = potts_b_matrix(params, q);
    let d = params.d() as f64;
    let mut gamma_term = 0.0;
    for i in 0..q {
        for k in 0..q {
            let g = alpha[i] * alpha[k];
            gamma_term += g * g.ln();
        }
    }
    let mut pair_term = 0.0;
    for i in 0..q {
        for k in 0..q {
            for j in 0..q {
                for l in 0..q {
                    let y = u.x[i][j] * u.x[k][l];
                    pair_term += 0.5 * y * (bm[(i, j)] * bm[(k, l)]).ln() - 0.5 * y * y.ln();
                }
            }
        }
    }
    Ok((d - 1.0) * gamma_term + d * pair_term)
}

/// Gradient of `Upsilon_1` up to an additive constant:
/// `(d-1) log alpha_i - d log mu_i + B [i = 0]`.
pub fn upsilon1_gradient(params: &ModelParams, alpha: &[f64]) -> Result<Vec<f64>> {
    let q = params.q_int()?;
    check_profile(q, alpha)?;
    let d = params.d() as f64;
    let mu = solve_mu(params.w(), alpha);
    Ok((0..q)
        .map(|i| (d - 1.0) * alpha[i].ln() - d * mu[i].ln() + if i == 0 { params.b() } else { 0.0 })
        .collect())
}

/// Hessian of `Upsilon_1` on the simplex, in the coordinates obtained by
/// dropping `dropped`, by finite differences of the analytic gradient.
pub fn upsilon1_hessian(params: &ModelParams, alpha: &[f64], dropped: usize, h: f64) -> Result<DMatrix<f64>> {
    let q = alpha.len();
    let kept: Vec<usize> = (0..q).filter(|&i| i != dropped).collect();
    let reduced_grad = |a: &[f64]| -> Result<Vec<f64>> {
        let g = upsilon1_gradient(params, a)?;
        Ok(kept.iter().map(|&i| g[i] - g[dropped]).collect())
    };
    let m = kept.len();
    let mut hm = DMatrix::zeros(m, m);
    // Five-point stencil (Richardson-extrapolated central difference).
    let shifted = |i: usize, t: f64| -> Result<Vec<f64>> {
        let mut a = alpha.to_vec();
        a[i] += t;
        a[dropped] -= t;
        reduced_grad(&a)
    };
    for (col, &i) in kept.iter().enumerate() {
        let (p1, m1) = (shifted(i, h)?, shifted(i, -h)?);
        let (p2, m2) = (shifted(i, 2.0 * h)?, shifted(i, -2.0 * h)?);
        for row in 0..m {
            hm[(row, col)] = (8.0 * (p1[row] - m1[row]) - (p2[row] - m2[row])) / (12.0 * h);
        }
    }
    Ok(0.5 * (&hm + hm.transpose()))
}

/// Default finite-difference step for the Hessian.
pub const HESSIAN_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSide {
    pub nu_check: Vec<f64>,
    pub upsilon1: f64,
    pub det_neg_hessian: f64,
    /// `prod_{j>=2} (1 + lambda_j)`.
    pub eig_product: f64,
}

/// Ratio `Gamma` of the free and wired first-moment prefactors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaPrefactor {
    pub free: GammaSide,
    pub wired: GammaSide,
    pub upsilon1_free: f64,
    pub upsilon1_wired: f64,
    pub gamma: f64,
    /// `Gamma` with the Hessian step halved.
    pub gamma_half_step: f64,
    /// Largest entrywise change of either Hessian under step halving.
    pub hessian_fd_change: f64,
    /// `|Gamma(drop first coordinate) - Gamma(drop last)|`.
    pub coordinate_band: f64,
}

fn side(params: &ModelParams, which: Which, dropped: usize, h: f64) -> Result<(GammaSide, DMatrix<f64>)> {
    let (nf, nw) = bp_fixed_points(params, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let nu = match which {
        Which::Free => nf,
        Which::Wired => nw,
    };
    let check = root_marginal(params, &nu)?;
    let alpha = check.probs().to_vec();
    let u = upsilon1(params, &alpha)?;
    let hess = upsilon1_hessian(params, &alpha, dropped, h)?;
    let eig = SymmetricEigen::new(hess.clone());
    if eig.eigenvalues.iter().any(|&l| !(l < 0.0)) {
        return Err(Error::NumericalFailure(format!(
            "Hessian at the {} profile is not negative definite: {:?}",
            which.label(),
            eig.eigenvalues.as_slice()
        )));
    }
    let det = (-&hess).determinant();
    let qe = q_matrix_eigs(params, which)?;
    let eig_product = qe.closed.iter().skip(1).map(|l| 1.0 + l).product();
    Ok((
        GammaSide {
            nu_check: alpha,
            upsilon1: u.value,
            det_neg_hessian: det,
            eig_product,
        },
        hess,
    ))
}

fn gamma_from(f: &GammaSide, w: &GammaSide) -> f64 {
    let pf: f64 = f.nu_check.iter().product::<f64>() * f.eig_product;
    let pw: f64 = w.nu_check.iter().product::<f64>() * w.eig_product;
    (pw / pf).sqrt() * (w.det_neg_hessian / f.det_neg_hessian).sqrt()
}

/// `Gamma = M_free / M_wired` with
/// `M = (prod_i nu_check_i prod_{j>=2} (1 + lambda_j))^{-1/2} det(-Hess Upsilon_1)^{-1/2}`
/// (the `e^{n Upsilon_1}` factors cancel on the critical line).
pub fn gamma_prefactor(params: &ModelParams) -> Result<GammaPrefactor> {
    require_critical(params)?;
    let q = params.q_int()?;
    let last = q - 1;
    let (f, hf) = side(params, Which::Free, last, HESSIAN_STEP)?;
    let (w, hw) = side(params, Which::Wired, last, HESSIAN_STEP)?;
    let gamma = gamma_from(&f, &w);
    let (f2, hf2) = side(params, Which::Free, last, 0.5 * HESSIAN_STEP)?;
    let (w2, hw2) = side(params, Which::Wired, last, 0.5 * HESSIAN_STEP)?;
    let hessian_fd_change = (&hf - &hf2).amax().max((&hw - &hw2).amax());
    let (f0, _) = side(params, Which::Free, 0, HESSIAN_STEP)?;
    let (w0, _) = side(params, Which::Wired, 0, HESSIAN_STEP)?;
    Ok(GammaPrefactor {
        upsilon1_free: f.upsilon1,
        upsilon1_wired: w.upsilon1,
        gamma,
        gamma_half_step: gamma_from(&f2, &w2),
        hessian_fd_change,
        coordinate_band: (gamma_from(&f0, &w0) - gamma).abs(),
        free: f,
        wired: w,
    })
}

fn k_nu(params: &ModelParams, nu: &[f64]) -> (Vec<f64>, f64) {
    let w = params.w();
    let kn: Vec<f64> = nu.iter().map(|p| 1.0 + w * p).collect();
    let quad = 1.0 + w * nu.iter().map(|p| p * p).sum::<f64>();
    (kn, quad)
}

/// `Delta = sum_i e^{B[i=0]} (K nu)_i^{d*} / (nu^T K nu)^{d*/2}` at the
/// free or wired BP fixed point.
pub fn cavity_delta(params: &ModelParams, which: Which, d_star: usize) -> Result<f64> {
    require_critical(params)?;
    let d = params.d();
    if d_star + 1 < d || d_star > d + 1 {
        return Err(Error::InvalidParams(format!("d_star = {d_star} must be within 1 of d = {d}")));
    }
    let (nf, nw) = bp_fixed_points(params, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let nu = match which {
        Which::Free => nf,
        Which::Wired => nw,
    };
    Ok(delta_at(params, nu.probs(), d_star))
}

fn delta_at(params: &ModelParams, nu: &[f64], d_star: usize) -> f64 {
    let (kn, quad) = k_nu(params, nu);
    let ds = d_star as f64;
    let num: f64 = kn
        .iter()
        .enumerate()
        .map(|(i, k)| (if i == 0 { params.b() } else { 0.0 } + ds * k.ln()).exp())
        .sum();
    num / quad.powf(0.5 * ds)
}

/// Intermediate quantities of the cavity-ratio comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavityChain {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    /// `C1 P^d + C2 Q^d`.
    pub t: f64,
    /// `C1 R^d + C2 S^d`, equal to `t` on the critical line.
    pub t_alt: f64,
    pub c1: f64,
    pub c2: f64,
    /// `[S^d, Q^d, T/(C1+C2), P^d, R^d, T/C1]`.
    pub chain: Vec<f64>,
    pub strictly_increasing: bool,
}

pub fn cavity_chain(params: &ModelParams) -> Result<CavityChain> {
    require_critical(params)?;
    params.q_int()?;
    let (nf, nw) = bp_fixed_points(params, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let (kf, qf) = k_nu(params, nf.probs());
    let (kw, qw) = k_nu(params, nw.probs());
    let (p, q) = (kf[0] * qw.sqrt(), kf[1] * qw.sqrt());
    let (r, s) = (kw[0] * qf.sqrt(), kw[1] * qf.sqrt());
    let c1 = params.b().exp();
    let c2 = params.q() - 1.0;
    let d = params.d() as i32;
    let t = c1 * p.powi(d) + c2 * q.powi(d);
    let t_alt = c1 * r.powi(d) + c2 * s.powi(d);
    let chain = vec![s.powi(d), q.powi(d), t / (c1 + c2), p.powi(d), r.powi(d), t / c1];
    let strictly_increasing = chain.windows(2).all(|w| w[0] < w[1]) && chain[0] > 0.0;
    Ok(CavityChain {
        p,
        q,
        r,
        s,
        t,
        t_alt,
        c1,
        c2,
        chain,
        strictly_increasing,
    })
}

/// Mixture plan: `p` modification vertices of degree `d_star` and `x`
/// cycles of length `k` on a graph with no shorter cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavityPlan {
    pub d_star: usize,
    pub p: u64,
    pub k: usize,
    pub x: u64,
    pub alpha: f64,
    pub n_slack: u64,
    pub target_gamma: f64,
    pub predicted_ratio: f64,
    pub base_ratio: f64,
    /// `Delta_{d*,free} / Delta_{d*,wired}`.
    pub rho: f64,
    /// `(1 + delta_k^f)/(1 + delta_k^w)`.
    pub cycle_factor: f64,
    pub delta_dm1_free: f64,
    pub delta_dm1_wired: f64,
    pub delta_dp1_free: f64,
    pub delta_dp1_wired: f64,
    /// Ratio after each stage: base, after modification, after cycles.
    pub trajectory: Vec<(String, f64)>,
}

impl CavityPlan {
    pub fn in_bracket(&self) -> bool {
        let g = self.target_gamma;
        self.predicted_ratio >= g && self.predicted_ratio < (1.0 + 1.0 / self.n_slack as f64) * g
    }
}

/// `Z_free / Z_wired` predicted from the conditioning formula for a graph
/// with the given cycle counts, optionally after a plan's modification.
pub fn predicted_ratio(ssc: &SscData, cycles: &CycleStats, plan: Option<&CavityPlan>) -> Result<f64> {
    let gamma = ssc
        .gamma
        .as_ref()
        .ok_or_else(|| Error::InvalidState("conditioning data lacks the prefactor ratio".into()))?
        .gamma;
    if let Some(pl) = plan {
        if cycles.k_max < pl.k {
            return Err(Error::InvalidParams(format!(
                "cycle counts reach k = {} but the plan needs k = {}",
                cycles.k_max, pl.k
            )));
        }
    }
    let mut log_r = gamma.ln() + ssc.log_prod_free - ssc.log_prod_wired;
    for (&k, &x) in &cycles.counts {
        if x > 0 {
            log_r += x as f64 * ssc.cycle_factor(k).ln();
        }
    }
    if let Some(pl) = plan {
        log_r += pl.p as f64 * pl.rho.ln();
    }
    Ok(log_r.exp())
}

/// Largest cycle length the planner will consider.
pub const PLAN_K_CAP: usize = 1000;
/// Largest modification size the planner will consider.
pub const PLAN_P_CAP: u64 = 1_000_000;

/// Chooses `(d_star, p, K, x)` so that the predicted free/wired ratio lands
/// in `[gamma, (1 + 1/n_slack) gamma)` with `gamma = alpha/(1 - alpha)`.
pub fn tune_mixture(params: &ModelParams, alpha: f64, n_slack: u64) -> Result<CavityPlan> {
    let ssc = ssc_data(params, 200)?;
    tune_with(params, &ssc, alpha, n_slack)
}

pub fn tune_with(params: &ModelParams, ssc: &SscData, alpha: f64, n_slack: u64) -> Result<CavityPlan> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParams(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if n_slack == 0 {
        return Err(Error::InvalidParams("n_slack must be positive".into()));
    }
    let d = params.d();
    let target = alpha / (1.0 - alpha);
    let slack = 1.0 + 1.0 / n_slack as f64;
    let gamma = ssc.gamma.as_ref().ok_or_else(|| Error::InvalidState("missing prefactor".into()))?.gamma;
    let base = gamma * ssc.base_cycle_correction();
    let delta_dm1_free = cavity_delta(params, Which::Free, d - 1)?;
    let delta_dm1_wired = cavity_delta(params, Which::Wired, d - 1)?;
    let delta_dp1_free = cavity_delta(params, Which::Free, d + 1)?;
    let delta_dp1_wired = cavity_delta(params, Which::Wired, d + 1)?;

    // Sign of delta_k^f - delta_k^w for large k: the dominant eigenvalue
    // decides, and when lambda_2 ties the next one does.
    let (f, w) = (&ssc.spectrum_free, &ssc.spectrum_wired);
    let mut sign = 0.0;
    for (a, b) in f.iter().zip(w) {
        if (a - b).abs() > 1e-12 {
            sign = (a.abs() - b.abs()).signum();
            break;
        }
    }
    if sign == 0.0 {
        return Err(Error::PlanFailure("free and wired spectra coincide".into()));
    }
    let cycles_raise = sign > 0.0;
    // Modification must move the ratio against the cycles.
    let (d_star, rho) = if cycles_raise {
        (d + 1, delta_dp1_free / delta_dp1_wired)
    } else {
        (d - 1, delta_dm1_free / delta_dm1_wired)
    };
    let mk = |p: u64, k: usize, x: u64, r_k: f64, pred: f64, traj: Vec<(String, f64)>| CavityPlan {
        d_star,
        p,
        k,
        x,
        alpha,
        n_slack,
        target_gamma: target,
        predicted_ratio: pred,
        base_ratio: base,
        rho,
        cycle_factor: r_k,
        delta_dm1_free,
        delta_dm1_wired,
        delta_dp1_free,
        delta_dp1_wired,
        trajectory: traj,
    };
    if base >= target && base < slack * target {
        return Ok(mk(0, 3, 0, ssc.cycle_factor(3), base, vec![("base".into(), base)]));
    }
    if (cycles_raise && rho >= 1.0) || (!cycles_raise && rho <= 1.0) {
        return Err(Error::PlanFailure(format!("modification ratio {rho} does not oppose the cycle factors")));
    }
    // Smallest even p putting the ratio on the side the cycles can correct.
    let lr = rho.ln();
    let need_p = |b: f64| -> bool {
        if cycles_raise {
            b >= target
        } else {
            b < target
        }
    };
    let mut p = 0u64;
    let mut after_p = base;
    while need_p(after_p) {
        p += 2;
        if p > PLAN_P_CAP {
            return Err(Error::PlanFailure(format!("no modification size up to {PLAN_P_CAP}")));
        }
        after_p = (base.ln() + p as f64 * lr).exp();
    }
    // Cycle length with a per-cycle factor finer than the slack.
    let (k, r_k) = (3..=PLAN_K_CAP)
        .map(|k| (k, ssc.cycle_factor(k)))
        .find(|&(_, r)| if cycles_raise { r > 1.0 && r < slack } else { r < 1.0 && r > 1.0 / slack })
        .ok_or_else(|| Error::PlanFailure(format!("no cycle length up to {PLAN_K_CAP} with factor inside the slack")))?;
    let lrk = r_k.ln();
    let ratio_at = |x: u64| (after_p.ln() + x as f64 * lrk).exp();
    let mut x = if cycles_raise {
        ((target / after_p).ln() / lrk).ceil().max(0.0) as u64
    } else {
        ((slack * target / after_p).ln() / lrk).floor().max(0.0) as u64
    };
    // Integer rounding guard.
    for _ in 0..4 {
        let r = ratio_at(x);
        if r < target && cycles_raise {
            x += 1;
        } else if r >= slack * target && !cycles_raise {
            x += 1;
        } else if x > 0 && cycles_raise && ratio_at(x - 1) >= target {
            x -= 1;
        } else if x > 0 && !cycles_raise && ratio_at(x - 1) < slack * target {
            x -= 1;
        } else {
            break;
        }
    }
    let pred = ratio_at(x);
    let plan = mk(
        p,
        k,
        x,
        r_k,
        pred,
        vec![("base".into(), base), ("after_modification".into(), after_p), ("after_cycles".into(), pred)],
    );
    if !plan.in_bracket() {
        return Err(Error::PlanFailure(format!(
            "predicted ratio {pred} misses [{target}, {})",
            slack * target
        )));
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::b_plus;

    fn crit(d: usize, q: usize, frac: f64) -> ModelParams {
        let b = b_plus(d, q as f64).unwrap() * frac;
        let (_, bc) = critical_line(d, q as f64, b, false).unwrap();
        ModelParams::new(d, q as f64, bc, b).unwrap()
    }

    #[test]
    fn q_matrix_forms_agree() {
        let p = crit(3, 4, 0.5);
        let (nf, _) = bp_fixed_points(&p, 1e-14, 1_000_000).unwrap();
        let qm = q_matrix(&p, &nf);
        let k = |i: usize, j: usize| if i == j { p.beta().exp() } else { 1.0 };
        let nu = nf.probs();
        let kn: Vec<f64> = (0..4).map(|i| (0..4).map(|j| k(i, j) * nu[j]).sum()).collect();
        for i in 0..4 {
            for j in 0..4 {
                let alt = k(i, j) * (nu[i] * nu[j]).sqrt() / (kn[i] * kn[j]).sqrt();
                assert!((qm[(i, j)] - alt).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn ratio_roots_match_bp() {
        let p = crit(3, 3, 0.5);
        let roots = ratio_roots(&p).unwrap();
        assert_eq!(roots.len(), 3);
        let (nf, nw) = bp_fixed_points(&p, 1e-15, 1_000_000).unwrap();
        let xf = nf.probs()[0] / nf.probs()[1];
        let xw = nw.probs()[0] / nw.probs()[1];
        assert!((roots[0] - xf).abs() < 1e-9 * xf);
        assert!((roots[2] - xw).abs() < 1e-9 * xw);
    }

    #[test]
    fn off_critical_is_rejected() {
        let p = crit(3, 3, 0.5);
        let off = p.with_beta(p.beta() + 0.01).unwrap();
        assert!(matches!(gamma_prefactor(&off), Err(Error::OutsideCriticalLine(_))));
        assert!(matches!(cavity_delta(&off, Which::Free, 3), Err(Error::OutsideCriticalLine(_))));
    }

    #[test]
    fn series_limit_matches_sum() {
        for u in [-0.9, -0.3, 0.1, 0.2, 0.3, 0.9] {
            let direct: f64 = (3..5000).map(|k| (u as f64).powi(k) / (2.0 * k as f64)).sum();
            assert!((cycle_series_limit(u) - direct).abs() < 1e-14, "u={u}");
        }
    }
}
