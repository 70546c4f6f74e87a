use std::path::{Path, PathBuf};

use coexist_core::asymptotics::{ssc_data, tune_with, CavityPlan, GammaPrefactor};
use coexist_core::graphs::second_eigenvalue;
use coexist_core::numerics::{b_plus, classify_regime, critical_line, critical_weight_raw, ising_magnetization, ModelParams};
use coexist_core::sampler::{run_chain_on, ChainMode, GraphSpec};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::checks::{peaks, suite, CheckResult, Level};
use crate::config::{CoexistConfig, PhaseDiagramConfig, TuneConfig};
use crate::error::{CliError, Result};
use crate::provenance::{json_with_provenance, Provenance};

pub const PHASE_DIAGRAM_CSV: &str = "phase_diagram.csv";
pub const CRITICAL_CURVE_CSV: &str = "critical_curve.csv";
pub const TRACE_JSONL: &str = "trace.jsonl";
pub const SUMMARY_JSON: &str = "summary.json";
pub const PLAN_JSON: &str = "plan.json";
pub const VERIFY_JSON: &str = "verify_report.json";

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Config(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn phase_diagram(cfg: &PhaseDiagramConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let cfg = cfg.materialize()?;
    let prov = Provenance::new("phase-diagram", &cfg)?;
    let (betas, bs) = (cfg.beta.values()?, cfg.b.values()?);
    let tol = cfg.tol.expect("materialized");
    let cells: Vec<(f64, f64)> = betas.iter().flat_map(|&be| bs.iter().map(move |&b| (be, b))).collect();
    let rows: Vec<Vec<String>> = cells
        .par_iter()
        .map(|&(beta, b)| {
            let cell = ModelParams::new(cfg.d, cfg.q, beta, b).and_then(|p| classify_regime(&p, tol));
            match cell {
                Ok(pt) => vec![
                    beta.to_string(),
                    b.to_string(),
                    pt.regime.label().to_string(),
                    pt.psi_free_val.to_string(),
                    pt.psi_wired_val.to_string(),
                    pt.nu_free.probs()[0].to_string(),
                    pt.nu_wired.probs()[0].to_string(),
                    String::new(),
                ],
                Err(e) => vec![
                    beta.to_string(),
                    b.to_string(),
                    "error".into(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.to_string(),
                ],
            }
        })
        .collect();
    let grid = csv_text(
        &["beta", "B", "regime", "psi_free", "psi_wired", "nu_free_0", "nu_wired_0", "error"],
        &rows,
    )?;
    let bp = b_plus(cfg.d, cfg.q)?;
    let m = cfg.critical_points.expect("materialized");
    let mut curve = Vec::with_capacity(m + 1);
    for k in 0..m {
        let b = bp * k as f64 / m as f64;
        let (wc, beta) = critical_line(cfg.d, cfg.q, b, true)?;
        curve.push(vec!["critical".to_string(), b.to_string(), beta.to_string(), wc.to_string()]);
    }
    // The curve ends at B_+, where the two fixed points merge.
    let wc = critical_weight_raw(cfg.d, cfg.q, bp);
    curve.push(vec!["b_plus".to_string(), bp.to_string(), wc.ln_1p().to_string(), wc.to_string()]);
    let curve = csv_text(&["series", "B", "beta", "w"], &curve)?;
    Ok(vec![
        write(out, PHASE_DIAGRAM_CSV, &format!("{}{grid}", prov.csv_line()))?,
        write(out, CRITICAL_CURVE_CSV, &format!("{}{curve}", prov.csv_line()))?,
    ])
}

#[derive(Debug, Serialize)]
struct Histogram {
    lo: f64,
    hi: f64,
    counts: Vec<u64>,
}

fn histogram(xs: impl Iterator<Item = f64>, lo: f64, hi: f64, bins: usize) -> Histogram {
    let mut counts = vec![0u64; bins];
    for x in xs {
        let b = (((x - lo) / (hi - lo) * bins as f64).floor() as isize).clamp(0, bins as isize - 1) as usize;
        counts[b] += 1;
    }
    Histogram { lo, hi, counts }
}

/// Absolute graph paths so the provenance header is location independent.
fn absolutize(cfg: &mut CoexistConfig, base_dir: &Path) {
    if let GraphSpec::File(p) = &mut cfg.chain.graph {
        if p.is_relative() {
            *p = base_dir.join(&*p);
        }
    }
}

pub fn coexist(cfg: &CoexistConfig, seed: Option<u64>, base_dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let mut cfg = cfg.materialize(seed)?;
    absolutize(&mut cfg, base_dir);
    let prov = Provenance::new("coexist", &cfg)?;
    let chain = &cfg.chain;
    let g = chain.build_graph(base_dir)?;
    let d = chain.params.d;
    let threshold = 2.0 * (d as f64 - 1.0).sqrt() + 0.1;
    let certificate = if cfg.certify.expect("materialized") {
        match second_eigenvalue(&g, 1e-8) {
            Ok(l) => json!({ "lambda": l, "threshold": threshold, "certified": l.abs() <= threshold }),
            Err(e) => json!({ "error": e.to_string(), "threshold": threshold, "certified": false }),
        }
    } else {
        json!(null)
    };
    let trace = run_chain_on(chain, &g)?;
    let mut jsonl = prov.jsonl_line();
    {
        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf).map_err(|e| CliError::io(out.join(TRACE_JSONL), e))?;
        jsonl.push_str(std::str::from_utf8(&buf).expect("utf-8"));
    }
    let bins = cfg.histogram_bins.expect("materialized");
    let eps = cfg.eps.expect("materialized");
    let giant = histogram(trace.records.iter().map(|r| r.giant_fraction), 0.0, 1.0, bins);
    let total = trace.records.len().max(1) as f64;
    let mut summary = json!({
        "n": g.n(),
        "d": d,
        "mode": chain.mode,
        "retained_samples": trace.records.len(),
        "giant_fraction_histogram": giant,
        "spectral_certificate": certificate,
    });
    if let Some(w) = &trace.windows {
        let f = trace.records.iter().filter(|r| (r.giant_fraction - w.psi_free).abs() <= eps).count() as f64;
        let wi = trace
            .records
            .iter()
            .filter(|r| (r.giant_fraction - w.psi_free).abs() > eps && (r.giant_fraction - w.psi_wired).abs() <= eps)
            .count() as f64;
        let gh = &summary["giant_fraction_histogram"]["counts"];
        let counts: Vec<u64> = serde_json::from_value(gh.clone()).unwrap_or_default();
        let mid = |b: usize| (b as f64 + 0.5) / bins as f64;
        let split = 0.5 * (w.psi_free + w.psi_wired);
        let mode = |keep: &dyn Fn(f64) -> bool| {
            (0..bins)
                .filter(|&b| keep(mid(b)))
                .max_by_key(|&b| (counts[b], std::cmp::Reverse(b)))
                .map(mid)
        };
        summary["psi_free"] = json!(w.psi_free);
        summary["psi_wired"] = json!(w.psi_wired);
        summary["eps"] = json!(eps);
        summary["frac_free_window"] = json!(f / total);
        summary["frac_wired_window"] = json!(wi / total);
        summary["frac_outside"] = json!(1.0 - (f + wi) / total);
        summary["empirical_peak_free"] = json!(mode(&|x| x < split));
        summary["empirical_peak_wired"] = json!(mode(&|x| x >= split));
    }
    if chain.mode == ChainMode::FkIsing {
        let beta = chain.params.beta.expect("materialized");
        let (_, _, m) = ising_magnetization(d, beta, 1e-14)?;
        let mags: Vec<f64> = trace.records.iter().filter_map(|r| r.magnetization).collect();
        let (lo, hi) = peaks(&mags, 0.01);
        summary["m_tree"] = json!(m);
        summary["magnetization_histogram"] = json!(histogram(mags.iter().copied(), -1.0, 1.0, 2 * bins));
        summary["magnetization_peaks"] = json!([lo, hi]);
    }
    Ok(vec![
        write(out, TRACE_JSONL, &jsonl)?,
        write(out, SUMMARY_JSON, &json_with_provenance(&prov, &summary)?)?,
    ])
}

#[derive(Debug, Serialize)]
struct SideSummary {
    lambda2: f64,
    lambda3: f64,
    x_ratio: f64,
    log_cycle_product: f64,
    tail_bound: f64,
}

#[derive(Debug, Serialize)]
struct TuneReport {
    params: serde_json::Value,
    gamma: GammaPrefactor,
    free: SideSummary,
    wired: SideSummary,
    lambda2_tied: bool,
    plan: CavityPlan,
    bracket: serde_json::Value,
    recipe: serde_json::Value,
}

pub fn tune(cfg: &TuneConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let cfg = cfg.materialize()?;
    let prov = Provenance::new("tune", &cfg)?;
    let p = cfg.params()?;
    let ssc = ssc_data(&p, cfg.k_tail.expect("materialized"))?;
    let plan = tune_with(&p, &ssc, cfg.alpha, cfg.n_slack)?;
    let side = |f: bool| SideSummary {
        lambda2: if f { ssc.spectrum_free[0] } else { ssc.spectrum_wired[0] },
        lambda3: if f { ssc.free.lambda3() } else { ssc.wired.lambda3() },
        x_ratio: if f { ssc.free.x_root } else { ssc.wired.x_root },
        log_cycle_product: if f { ssc.log_prod_free } else { ssc.log_prod_wired },
        tail_bound: if f { ssc.tail_bound_free } else { ssc.tail_bound_wired },
    };
    let upper = (1.0 + 1.0 / cfg.n_slack as f64) * plan.target_gamma;
    let report = TuneReport {
        params: json!({ "d": p.d(), "q": p.q(), "beta": p.beta(), "B": p.b() }),
        gamma: ssc.gamma.clone().expect("computed"),
        free: side(true),
        wired: side(false),
        lambda2_tied: ssc.lambda2_tied,
        bracket: json!({
            "lower": plan.target_gamma,
            "upper": upper,
            "predicted_ratio": plan.predicted_ratio,
            "holds": plan.in_bracket(),
        }),
        recipe: json!({
            "girth_min": plan.k,
            "cycles": { "length": plan.k, "count": plan.x },
            "modification": { "vertices": plan.p, "degree": plan.d_star },
            "spectral_threshold": 2.0 * (p.d() as f64 - 1.0).sqrt() + 0.1,
        }),
        plan,
    };
    Ok(vec![write(out, PLAN_JSON, &json_with_provenance(&prov, &report)?)?])
}

#[derive(Debug, Serialize)]
struct VerifyOptions {
    level: Level,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    passed: bool,
    checks: Vec<CheckResult>,
}

/// Runs the suite and writes the report; `Ok(false)` when a check failed.
pub fn verify(level: Level, seed: u64, out: &Path) -> Result<(bool, Vec<CheckResult>, PathBuf)> {
    let prov = Provenance::new("verify", &VerifyOptions { level, seed })?;
    let checks = suite(level, seed);
    let passed = checks.iter().all(|c| c.passed);
    let report = VerifyReport {
        passed,
        checks: checks.clone(),
    };
    let path = write(out, VERIFY_JSON, &json_with_provenance(&prov, &report)?)?;
    Ok((passed, checks, path))
}

/// Regenerates `from` into `out` using its provenance header and compares bytes.
pub fn reproduce(from: &Path, out: &Path) -> Result<(bool, PathBuf)> {
    let text = std::fs::read_to_string(from).map_err(|e| CliError::io(from, e))?;
    let prov = Provenance::from_artifact(&text)?;
    let bad = |e: serde_json::Error| CliError::Config(format!("provenance config: {e}"));
    let produced = match prov.command.as_str() {
        "phase-diagram" => phase_diagram(&serde_json::from_value(prov.config.clone()).map_err(bad)?, out)?,
        "coexist" => coexist(
            &serde_json::from_value(prov.config.clone()).map_err(bad)?,
            None,
            Path::new("/"),
            out,
        )?,
        "tune" => tune(&serde_json::from_value(prov.config.clone()).map_err(bad)?, out)?,
        "verify" => {
            let level: Level = serde_json::from_value(prov.config["level"].clone()).map_err(bad)?;
            let seed = prov.config["seed"].as_u64().ok_or_else(|| CliError::Config("verify seed missing".into()))?;
            vec![verify(level, seed, out)?.2]
        }
        other => return Err(CliError::Config(format!("unknown command \"{other}\" in provenance"))),
    };
    let name = from.file_name().ok_or_else(|| CliError::Config("input has no file name".into()))?;
    let regenerated = produced
        .into_iter()
        .find(|p| p.file_name() == Some(name))
        .ok_or_else(|| CliError::Config(format!("command does not produce {}", name.to_string_lossy())))?;
    let again = std::fs::read(&regenerated).map_err(|e| CliError::io(&regenerated, e))?;
    Ok((again == text.as_bytes(), regenerated))
}
