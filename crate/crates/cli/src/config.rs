//! Run configuration: a TOML schema describing the problem (catalog term
//! names plus parameters), the integrator, analysis toggles and the
//! randomized-check budget.

use std::path::Path;

use serde::Deserialize;

use proxflow::catalog;
use proxflow::integrator::{IntegratorConfig, Method};
use proxflow::problem::{max_valid_eta, CompositeProblem};

/// Harness errors, mapped to exit codes by the binary: parse and validation
/// failures exit 2, check failures exit 1.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] proxflow::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One batch run: problem, integrator, analysis toggles, check budget.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub checks: ChecksSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub x0: Vec<f64>,
    pub eta: EtaSpec,
    #[serde(default)]
    pub coercive: bool,
    pub known_minimizer: Option<Vec<f64>>,
    pub f: ProxConfig,
    pub g: SmoothConfig,
}

/// Step size: a number, or `"auto"` for `0.9 * max_valid_eta(beta)`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum EtaSpec {
    Value(f64),
    Keyword(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProxConfig {
    Zero,
    L1 { weight: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    L2Squared { weight: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SmoothConfig {
    Zero,
    Quadratic { a: Vec<Vec<f64>>, b: Vec<f64> },
    Cosine { amplitude: f64, q: Vec<Vec<f64>> },
    Quartic { box_radius: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_tol")]
    pub abs_tol: f64,
    #[serde(default = "default_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_stop_residual")]
    pub stop_residual: f64,
    #[serde(default = "default_max_samples")]
    pub max_samples: usize,
}

fn default_method() -> String {
    "adaptive-rk45".into()
}
fn default_step() -> f64 {
    0.01
}
fn default_tol() -> f64 {
    1e-9
}
fn default_t_max() -> f64 {
    1e3
}
fn default_stop_residual() -> f64 {
    1e-9
}
fn default_max_samples() -> usize {
    1_000_000
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self {
            method: default_method(),
            step: default_step(),
            abs_tol: default_tol(),
            rel_tol: default_tol(),
            t_max: default_t_max(),
            stop_residual: default_stop_residual(),
            max_samples: default_max_samples(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "yes")]
    pub energy: bool,
    #[serde(default = "yes")]
    pub velocity: bool,
    #[serde(default = "yes")]
    pub limits: bool,
    #[serde(default = "yes")]
    pub tail: bool,
    #[serde(default = "yes")]
    pub rate: bool,
    /// When set, `--compare-discrete` asserts the continuous and discrete
    /// limits agree within this distance.
    pub same_limit_tol: Option<f64>,
}

fn yes() -> bool {
    true
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            energy: true,
            velocity: true,
            limits: true,
            tail: true,
            rate: true,
            same_limit_tol: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSection {
    #[serde(default = "yes")]
    pub enabled: bool,
    /// Sampling box for randomized checks; defaults to `x0 +/- 2` per
    /// coordinate. Instances whose Lipschitz constant is only valid on a box
    /// must set this explicitly.
    pub domain: Option<Vec<[f64; 2]>>,
    #[serde(default = "default_pairs")]
    pub lipschitz_pairs: usize,
    #[serde(default = "default_pairs")]
    pub prox_pairs: usize,
    #[serde(default = "default_char_points")]
    pub characterization_points: usize,
    #[serde(default = "default_field_pairs")]
    pub field_pairs: usize,
}

fn default_pairs() -> usize {
    1000
}
fn default_char_points() -> usize {
    100
}
fn default_field_pairs() -> usize {
    10_000
}

impl Default for ChecksSection {
    fn default() -> Self {
        Self {
            enabled: true,
            domain: None,
            lipschitz_pairs: default_pairs(),
            prox_pairs: default_pairs(),
            characterization_points: default_char_points(),
            field_pairs: default_field_pairs(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Builds the composite problem; all validation failures (dimensions,
    /// the step condition, malformed terms) surface as `Invalid`.
    pub fn build_problem(&self) -> Result<CompositeProblem, HarnessError> {
        let invalid = |e: proxflow::Error| HarnessError::Invalid(e.to_string());
        let dim = self.problem.x0.len();
        if dim == 0 {
            return Err(HarnessError::Invalid("x0 must be nonempty".into()));
        }

        let f = match &self.problem.f {
            ProxConfig::Zero => catalog::prox_term_zero(dim),
            ProxConfig::L1 { weight } => catalog::prox_term_l1(dim, *weight),
            ProxConfig::Box { lo, hi } => {
                if lo.len() != dim || hi.len() != dim {
                    return Err(HarnessError::Invalid(format!(
                        "box bounds must have length {dim}"
                    )));
                }
                catalog::prox_term_box(lo, hi)
            }
            ProxConfig::L2Squared { weight } => catalog::prox_term_l2_squared(dim, *weight),
        }
        .map_err(invalid)?;

        let g = match &self.problem.g {
            SmoothConfig::Zero => catalog::smooth_term_zero(dim),
            SmoothConfig::Quadratic { a, b } => {
                if a.len() != dim || b.len() != dim {
                    return Err(HarnessError::Invalid(format!(
                        "quadratic term must be {dim}x{dim} with a length-{dim} linear part"
                    )));
                }
                catalog::smooth_term_quadratic(a.clone(), b.clone())
            }
            SmoothConfig::Cosine { amplitude, q } => {
                if q.len() != dim {
                    return Err(HarnessError::Invalid(format!(
                        "cosine quadratic part must be {dim}x{dim}"
                    )));
                }
                catalog::smooth_term_cosine_quadratic(*amplitude, q.clone())
            }
            SmoothConfig::Quartic { box_radius } => catalog::smooth_term_quartic(dim, *box_radius),
        }
        .map_err(invalid)?;

        let eta = self.resolve_eta(g.lipschitz_beta())?;
        let mut problem = CompositeProblem::new(f, g, eta, self.problem.x0.clone())
            .map_err(invalid)?
            .with_coercive(self.problem.coercive);
        if let Some(m) = &self.problem.known_minimizer {
            problem = problem.with_known_minimizer(m.clone()).map_err(invalid)?;
        }
        Ok(problem)
    }

    fn resolve_eta(&self, beta: f64) -> Result<f64, HarnessError> {
        match &self.problem.eta {
            EtaSpec::Value(v) => Ok(*v),
            EtaSpec::Keyword(k) if k == "auto" => {
                let eta_star =
                    max_valid_eta(beta).map_err(|e| HarnessError::Invalid(e.to_string()))?;
                if eta_star.is_infinite() {
                    Ok(1.0)
                } else {
                    Ok(0.9 * eta_star)
                }
            }
            EtaSpec::Keyword(k) => Err(HarnessError::Invalid(format!(
                "eta must be a number or \"auto\", got \"{k}\""
            ))),
        }
    }

    pub fn integrator_config(&self) -> Result<IntegratorConfig, HarnessError> {
        let method = match self.integrator.method.as_str() {
            "euler" => Method::Euler,
            "rk4" => Method::Rk4,
            "adaptive-rk45" => Method::AdaptiveRk45,
            other => {
                return Err(HarnessError::Invalid(format!(
                    "unknown integrator method \"{other}\" (euler | rk4 | adaptive-rk45)"
                )))
            }
        };
        let cfg = IntegratorConfig {
            method,
            step: self.integrator.step,
            abs_tol: self.integrator.abs_tol,
            rel_tol: self.integrator.rel_tol,
            t_max: self.integrator.t_max,
            stop_residual: self.integrator.stop_residual,
            max_samples: self.integrator.max_samples,
        };
        cfg.validate()
            .map_err(|e| HarnessError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    /// Sampling box for the randomized checks.
    pub fn check_domain(&self) -> Vec<(f64, f64)> {
        match &self.checks.domain {
            Some(d) => d.iter().map(|&[lo, hi]| (lo, hi)).collect(),
            None => self
                .problem
                .x0
                .iter()
                .map(|&x| (x - 2.0, x + 2.0))
                .collect(),
        }
    }
}
