//! Composite problems `f + g` and the step-size condition.
//!
//! `f` is a proper, convex, lower semicontinuous term given through its
//! evaluation and proximal map; `g` is a differentiable term with a
//! `beta`-Lipschitz gradient. The flow and all diagnostics require the step
//! size `eta` to satisfy `eta*beta*(3 + eta*beta) < 1`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Evaluation map; returns `f64::INFINITY` outside the domain.
pub type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Gradient map.
pub type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// Proximal map `(point, eta) -> argmin_u f(u) + ||u - point||^2 / (2 eta)`.
pub type ProxFn = Arc<dyn Fn(&[f64], f64) -> Result<Vec<f64>> + Send + Sync>;

/// A convex nonsmooth term with its exact proximal map.
///
/// Maps must be pure; terms are immutable after construction and can be
/// shared across threads.
#[derive(Clone)]
pub struct ProxTerm {
    name: String,
    dim: usize,
    evaluate: EvalFn,
    prox: ProxFn,
}

impl fmt::Debug for ProxTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProxTerm")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .finish()
    }
}

impl ProxTerm {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        evaluate: EvalFn,
        prox: ProxFn,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        Ok(Self {
            name: name.into(),
            dim,
            evaluate,
            prox,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Extended-real evaluation; `+inf` marks points outside the domain.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        assert_eq!(
            x.len(),
            self.dim,
            "prox term {}: dimension mismatch",
            self.name
        );
        (self.evaluate)(x)
    }

    /// The proximal map of `eta * f` at `y`.
    pub fn prox(&self, y: &[f64], eta: f64) -> Result<Vec<f64>> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::NonPositiveEta(eta));
        }
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: y.len(),
            });
        }
        (self.prox)(y, eta)
    }
}

/// A differentiable term with a Lipschitz gradient.
///
/// `lipschitz_beta` is supplied by the constructor, not estimated; the
/// quadratic constructor in the catalog derives it from the spectral norm.
#[derive(Clone)]
pub struct SmoothTerm {
    name: String,
    dim: usize,
    lipschitz_beta: f64,
    evaluate: EvalFn,
    gradient: GradFn,
}

impl fmt::Debug for SmoothTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothTerm")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("lipschitz_beta", &self.lipschitz_beta)
            .finish()
    }
}

impl SmoothTerm {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        lipschitz_beta: f64,
        evaluate: EvalFn,
        gradient: GradFn,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if !(lipschitz_beta >= 0.0) || !lipschitz_beta.is_finite() {
            return Err(Error::InvalidBeta(lipschitz_beta));
        }
        Ok(Self {
            name: name.into(),
            dim,
            lipschitz_beta,
            evaluate,
            gradient,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz_beta(&self) -> f64 {
        self.lipschitz_beta
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        assert_eq!(
            x.len(),
            self.dim,
            "smooth term {}: dimension mismatch",
            self.name
        );
        (self.evaluate)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(
            x.len(),
            self.dim,
            "smooth term {}: dimension mismatch",
            self.name
        );
        (self.gradient)(x)
    }
}

/// Returns true iff `eta * beta * (3 + eta * beta) < 1`, evaluated exactly in
/// floating point.
pub fn validate_step(eta: f64, beta: f64) -> Result<bool> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::NonPositiveEta(eta));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidBeta(beta));
    }
    Ok(eta * beta * (3.0 + eta * beta) < 1.0)
}

/// The unique positive root `eta*` of `eta*beta*(3 + eta*beta) = 1`.
///
/// Any `r * eta*` with `r < 1` passes [`validate_step`]. For `beta = 0` the
/// condition holds for every step size and the function returns infinity.
pub fn max_valid_eta(beta: f64) -> Result<f64> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidBeta(beta));
    }
    if beta == 0.0 {
        return Ok(f64::INFINITY);
    }
    // With u = eta*beta the condition reads u^2 + 3u - 1 = 0.
    let u = (-3.0 + 13.0f64.sqrt()) / 2.0;
    Ok(u / beta)
}

/// The pair `(f, g)` together with the step size and the initial point.
#[derive(Debug, Clone)]
pub struct CompositeProblem {
    f: ProxTerm,
    g: SmoothTerm,
    eta: f64,
    x0: Vec<f64>,
    coercive: bool,
    known_minimizer: Option<Vec<f64>>,
}

impl CompositeProblem {
    /// Builds a problem, enforcing matching dimensions and the step condition.
    pub fn new(f: ProxTerm, g: SmoothTerm, eta: f64, x0: Vec<f64>) -> Result<Self> {
        if g.dim() != f.dim() {
            return Err(Error::DimensionMismatch {
                expected: f.dim(),
                got: g.dim(),
            });
        }
        if x0.len() != f.dim() {
            return Err(Error::DimensionMismatch {
                expected: f.dim(),
                got: x0.len(),
            });
        }
        let beta = g.lipschitz_beta();
        if !validate_step(eta, beta)? {
            return Err(Error::StepCondition {
                eta,
                beta,
                value: eta * beta * (3.0 + eta * beta),
            });
        }
        Ok(Self {
            f,
            g,
            eta,
            x0,
            coercive: false,
            known_minimizer: None,
        })
    }

    /// Marks the objective as coercive; this is an assertion by the caller
    /// and gates the boundedness diagnostic only.
    pub fn with_coercive(mut self, coercive: bool) -> Self {
        self.coercive = coercive;
        self
    }

    pub fn with_known_minimizer(mut self, x: Vec<f64>) -> Result<Self> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        self.known_minimizer = Some(x);
        Ok(self)
    }

    pub fn f(&self) -> &ProxTerm {
        &self.f
    }

    pub fn g(&self) -> &SmoothTerm {
        &self.g
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn beta(&self) -> f64 {
        self.g.lipschitz_beta()
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    pub fn coercive(&self) -> bool {
        self.coercive
    }

    pub fn known_minimizer(&self) -> Option<&[f64]> {
        self.known_minimizer.as_deref()
    }

    /// `(f + g)(x)`; `+inf` propagates from `f`.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.f.evaluate(x) + self.g.evaluate(x))
    }

    /// The energy-decrease constant `1/eta - beta*(3 + eta*beta)`; positive
    /// whenever the step condition holds.
    pub fn dissipation_constant(&self) -> f64 {
        let beta = self.beta();
        1.0 / self.eta - beta * (3.0 + self.eta * beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use approx::assert_abs_diff_eq;

    #[test]
    fn validate_step_examples() {
        assert!(validate_step(0.1, 0.0).unwrap());
        assert!(validate_step(0.30, 1.0).unwrap());
        assert!(!validate_step(0.31, 1.0).unwrap());
        assert!(!validate_step(1.0, 1.0).unwrap());
        assert!(validate_step(0.0, 1.0).is_err());
        assert!(validate_step(-0.1, 1.0).is_err());
        assert!(validate_step(0.1, -1.0).is_err());
    }

    #[test]
    fn max_valid_eta_matches_quadratic_formula() {
        // Oracle: positive root of (eta*beta)^2 + 3*(eta*beta) - 1 = 0 solved
        // per beta by the quadratic formula on beta^2 eta^2 + 3 beta eta - 1.
        let root = |beta: f64| {
            let a = beta * beta;
            let b = 3.0 * beta;
            (-b + (b * b + 4.0 * a).sqrt()) / (2.0 * a)
        };
        assert_abs_diff_eq!(max_valid_eta(1.0).unwrap(), root(1.0), epsilon = 1e-14);
        assert_abs_diff_eq!(
            max_valid_eta(1.0).unwrap(),
            0.302775637731995,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(max_valid_eta(2.0).unwrap(), root(2.0), epsilon = 1e-14);
        assert_abs_diff_eq!(
            max_valid_eta(2.0).unwrap(),
            0.151387818865997,
            epsilon = 1e-12
        );
        assert_eq!(max_valid_eta(0.0).unwrap(), f64::INFINITY);
        assert!(max_valid_eta(-0.5).is_err());
    }

    #[test]
    fn scaled_root_passes_validation() {
        for beta in [0.3, 1.0, 2.0, 7.5] {
            let eta_star = max_valid_eta(beta).unwrap();
            for r in [0.1, 0.5, 0.9, 0.99, 0.999999] {
                assert!(
                    validate_step(r * eta_star, beta).unwrap(),
                    "r = {r}, beta = {beta}"
                );
            }
            assert!(!validate_step(1.01 * eta_star, beta).unwrap());
        }
    }

    #[test]
    fn objective_examples() {
        let f = catalog::prox_term_l1(2, 1.0).unwrap();
        let g = catalog::smooth_term_half_sq_norm(2).unwrap();
        let p = CompositeProblem::new(f, g, 0.1, vec![0.0, 0.0]).unwrap();
        // hand evaluation: |1| + |-2| + (1 + 4)/2
        assert_abs_diff_eq!(p.objective(&[1.0, -2.0]).unwrap(), 5.5, epsilon = 1e-15);
        assert!(p.objective(&[1.0]).is_err());

        let f = catalog::prox_term_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let g = catalog::smooth_term_zero(2).unwrap();
        let p = CompositeProblem::new(f, g, 0.1, vec![0.5, 0.5]).unwrap();
        assert_eq!(p.objective(&[2.0, 0.5]).unwrap(), f64::INFINITY);

        let f = catalog::prox_term_zero(2).unwrap();
        let g = catalog::smooth_term_zero(2).unwrap();
        let p = CompositeProblem::new(f, g, 1.0, vec![0.0, 0.0]).unwrap();
        assert_eq!(p.objective(&[3.0, -4.0]).unwrap(), 0.0);
    }

    #[test]
    fn construction_enforces_step_condition() {
        let f = catalog::prox_term_zero(1).unwrap();
        let g = catalog::smooth_term_half_sq_norm(1).unwrap(); // beta = 1
        assert!(CompositeProblem::new(f.clone(), g.clone(), 0.5, vec![1.0]).is_err());
        let eta_star = max_valid_eta(1.0).unwrap();
        assert!(CompositeProblem::new(f, g, 0.99 * eta_star, vec![1.0]).is_ok());
    }

    #[test]
    fn construction_enforces_dimensions() {
        let f = catalog::prox_term_zero(2).unwrap();
        let g = catalog::smooth_term_zero(3).unwrap();
        assert!(CompositeProblem::new(f, g, 0.1, vec![0.0, 0.0]).is_err());
        let f = catalog::prox_term_zero(2).unwrap();
        let g = catalog::smooth_term_zero(2).unwrap();
        assert!(CompositeProblem::new(f, g, 0.1, vec![0.0]).is_err());
    }

    #[test]
    fn dissipation_constant_positive_under_step_condition() {
        let f = catalog::prox_term_zero(1).unwrap();
        let g = catalog::smooth_term_quadratic(vec![vec![2.0]], vec![0.0]).unwrap();
        let eta = 0.9 * max_valid_eta(g.lipschitz_beta()).unwrap();
        let p = CompositeProblem::new(f, g, eta, vec![1.0]).unwrap();
        assert!(p.dissipation_constant() > 0.0);
    }
}
