//! Versioned run configurations. Every config is materialized (all defaults
//! filled in) before it is run and written into the provenance header.

use std::path::Path;

use coexist_core::numerics::{b_plus, critical_line, ModelParams};
use coexist_core::sampler::ChainConfig;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const PHASE_DIAGRAM_SCHEMA: &str = "coexist.phase-diagram/1";
pub const COEXIST_SCHEMA: &str = "coexist.coexist/1";
pub const TUNE_SCHEMA: &str = "coexist.tune/1";

/// A 1-d grid: either an explicit list or `steps` evenly spaced points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Range { min: f64, max: f64, steps: usize },
    Values(Vec<f64>),
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            Grid::Values(v) => v.clone(),
            Grid::Range { min, max, steps } => {
                if *steps == 0 || !(min <= max) {
                    return Err(CliError::Config(format!("bad grid range {min}..{max} with {steps} steps")));
                }
                if *steps == 1 {
                    vec![*min]
                } else {
                    (0..*steps).map(|i| min + (max - min) * i as f64 / (*steps - 1) as f64).collect()
                }
            }
        };
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Config("grid must be nonempty and finite".into()));
        }
        Ok(v)
    }
}

fn check_schema(found: &str, expected: &str) -> Result<()> {
    if found != expected {
        return Err(CliError::Config(format!("schema \"{found}\" is not \"{expected}\"")));
    }
    Ok(())
}

pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseDiagramConfig {
    pub schema: String,
    pub d: usize,
    pub q: f64,
    pub beta: Grid,
    #[serde(rename = "B")]
    pub b: Grid,
    /// Points on the critical curve between 0 and `B_+`.
    #[serde(default)]
    pub critical_points: Option<usize>,
    /// Sup-distance below which the two BP fixed points count as one.
    #[serde(default)]
    pub tol: Option<f64>,
}

impl PhaseDiagramConfig {
    pub fn materialize(&self) -> Result<Self> {
        check_schema(&self.schema, PHASE_DIAGRAM_SCHEMA)?;
        let mut c = self.clone();
        c.critical_points = Some(c.critical_points.unwrap_or(200));
        c.tol = Some(c.tol.unwrap_or(coexist_core::numerics::DEFAULT_TOL_SEPARATION));
        ModelParams::new(c.d, c.q, 0.0, 0.0)?.q_int()?;
        c.beta.values()?;
        c.b.values()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoexistConfig {
    pub schema: String,
    pub chain: ChainConfig,
    #[serde(default)]
    pub histogram_bins: Option<usize>,
    /// Window half-width around `psi_free` and `psi_wired` for the summary.
    #[serde(default)]
    pub eps: Option<f64>,
    /// Run the spectral-gap certificate on the sampled graph.
    #[serde(default)]
    pub certify: Option<bool>,
}

/// Largest graph accepted by `coexist`.
pub const COEXIST_MAX_N: usize = 100_000;

impl CoexistConfig {
    pub fn materialize(&self, seed: Option<u64>) -> Result<Self> {
        check_schema(&self.schema, COEXIST_SCHEMA)?;
        let mut c = self.clone();
        if let Some(s) = seed {
            c.chain.seed = s;
        }
        c.chain = c.chain.materialize()?;
        if let coexist_core::sampler::GraphSpec::Pairing(p) = &c.chain.graph {
            if p.n > COEXIST_MAX_N {
                return Err(CliError::Config(format!("n = {} exceeds {COEXIST_MAX_N}", p.n)));
            }
        }
        let bins = c.histogram_bins.unwrap_or(50);
        if bins == 0 {
            return Err(CliError::Config("histogram_bins must be positive".into()));
        }
        c.histogram_bins = Some(bins);
        c.eps = Some(c.eps.unwrap_or(0.05));
        c.certify = Some(c.certify.unwrap_or(true));
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneConfig {
    pub schema: String,
    pub d: usize,
    pub q: f64,
    /// External field; exclusive with `B_fraction`.
    #[serde(rename = "B", default)]
    pub b: Option<f64>,
    /// External field as a fraction of `B_+`.
    #[serde(rename = "B_fraction", default)]
    pub b_fraction: Option<f64>,
    pub alpha: f64,
    pub n_slack: u64,
    #[serde(default)]
    pub k_tail: Option<usize>,
}

impl TuneConfig {
    pub fn materialize(&self) -> Result<Self> {
        check_schema(&self.schema, TUNE_SCHEMA)?;
        let mut c = self.clone();
        let b = match (c.b, c.b_fraction) {
            (Some(b), None) => b,
            (None, Some(f)) => b_plus(c.d, c.q)? * f,
            (Some(b), Some(f)) => {
                let bp = b_plus(c.d, c.q)?;
                if (b - bp * f).abs() > 1e-15 * bp.max(1.0) {
                    return Err(CliError::Config("give either B or B_fraction".into()));
                }
                b
            }
            (None, None) => return Err(CliError::Config("B or B_fraction is required".into())),
        };
        c.b = Some(b);
        c.b_fraction = None;
        c.k_tail = Some(c.k_tail.unwrap_or(200));
        if !(c.alpha > 0.0 && c.alpha < 1.0) {
            return Err(CliError::Config(format!("alpha = {} must lie in (0, 1)", c.alpha)));
        }
        if c.n_slack == 0 {
            return Err(CliError::Config("n_slack must be positive".into()));
        }
        Ok(c)
    }

    /// Critical parameters of a materialized config.
    pub fn params(&self) -> Result<ModelParams> {
        let b = self.b.ok_or_else(|| CliError::Config("B missing".into()))?;
        let (_, beta) = critical_line(self.d, self.q, b, false)?;
        Ok(ModelParams::new(self.d, self.q, beta, b)?)
    }
}
