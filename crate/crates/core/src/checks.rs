//! Randomized operator-level property checks.
//!
//! These back both the test suite and the harness exit gate: gradient
//! Lipschitz sampling, firm nonexpansiveness of proximal maps, the
//! subdifferential characterization of the prox, the field Lipschitz bound,
//! and the fixed-point residual of a declared minimizer.

use rand::Rng;
use serde::Serialize;

use crate::dynamics;
use crate::error::Result;
use crate::linalg;
use crate::problem::{CompositeProblem, ProxTerm, SmoothTerm};

/// Outcome of one randomized check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// Worst observed margin; interpretation depends on the check.
    pub worst: f64,
    pub detail: String,
}

fn sample(domain: &[(f64, f64)], rng: &mut impl Rng) -> Vec<f64> {
    domain
        .iter()
        .map(|&(lo, hi)| rng.gen_range(lo..hi))
        .collect()
}

/// `||grad g(x) - grad g(y)|| <= beta ||x - y||` on random pairs from
/// `domain`, with 1e-10 relative slack.
pub fn gradient_lipschitz(
    term: &SmoothTerm,
    domain: &[(f64, f64)],
    pairs: usize,
    rng: &mut impl Rng,
) -> CheckOutcome {
    let beta = term.lipschitz_beta();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let x = sample(domain, rng);
        let y = sample(domain, rng);
        let d = linalg::dist(&x, &y);
        if d == 0.0 {
            continue;
        }
        let dg = linalg::dist(&term.gradient(&x), &term.gradient(&y));
        let excess = (dg - beta * d) / (beta * d).max(1e-300);
        worst = worst.max(excess);
    }
    CheckOutcome {
        name: format!("gradient-lipschitz[{}]", term.name()),
        passed: worst <= 1e-10,
        worst,
        detail: format!("max relative excess over beta = {beta} on {pairs} pairs"),
    }
}

/// Firm nonexpansiveness: `||p1 - p2||^2 <= <p1 - p2, y1 - y2>` for the prox
/// at random pairs; implies the 1-Lipschitz property of the operator.
pub fn firm_nonexpansive(
    term: &ProxTerm,
    eta: f64,
    domain: &[(f64, f64)],
    pairs: usize,
    rng: &mut impl Rng,
) -> Result<CheckOutcome> {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let y1 = sample(domain, rng);
        let y2 = sample(domain, rng);
        let p1 = term.prox(&y1, eta)?;
        let p2 = term.prox(&y2, eta)?;
        let dp = linalg::sub(&p1, &p2);
        let dy = linalg::sub(&y1, &y2);
        let lhs = linalg::dot(&dp, &dp);
        let rhs = linalg::dot(&dp, &dy);
        let scale = 1.0 + linalg::dot(&dy, &dy);
        worst = worst.max((lhs - rhs) / scale);
    }
    Ok(CheckOutcome {
        name: format!("firm-nonexpansive[{}]", term.name()),
        passed: worst <= 1e-12,
        worst,
        detail: format!(
            "max scaled violation of <dp, dy> >= ||dp||^2 on {pairs} pairs, eta = {eta}"
        ),
    })
}

/// The subdifferential characterization: with `p = prox(y, eta)`, the vector
/// `(y - p)/eta` must satisfy `f(u) >= f(p) + <(y - p)/eta, u - p>` at
/// sampled `u` (tolerance 1e-9, scaled).
pub fn prox_characterization(
    term: &ProxTerm,
    eta: f64,
    domain: &[(f64, f64)],
    points: usize,
    probes_per_point: usize,
    rng: &mut impl Rng,
) -> Result<CheckOutcome> {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..points {
        let y = sample(domain, rng);
        let p = term.prox(&y, eta)?;
        let fp = term.evaluate(&p);
        let g: Vec<f64> = y.iter().zip(&p).map(|(yi, pi)| (yi - pi) / eta).collect();
        for _ in 0..probes_per_point {
            let u = sample(domain, rng);
            let fu = term.evaluate(&u);
            if !fu.is_finite() {
                continue; // the inequality is trivial at +inf
            }
            let lin: f64 = g
                .iter()
                .zip(u.iter().zip(&p))
                .map(|(gi, (ui, pi))| gi * (ui - pi))
                .sum();
            let scale = 1.0 + fu.abs() + fp.abs() + lin.abs();
            worst = worst.max((fp + lin - fu) / scale);
        }
    }
    Ok(CheckOutcome {
        name: format!("prox-characterization[{}]", term.name()),
        passed: worst <= 1e-9,
        worst,
        detail: format!(
            "max scaled violation of the subgradient inequality on {points}x{probes_per_point} samples"
        ),
    })
}

/// `||field(x1) - field(x2)|| <= (2 + eta*beta) ||x1 - x2||` on random pairs.
pub fn field_lipschitz(
    problem: &CompositeProblem,
    domain: &[(f64, f64)],
    pairs: usize,
    rng: &mut impl Rng,
) -> Result<CheckOutcome> {
    let bound = 2.0 + problem.eta() * problem.beta();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let x = sample(domain, rng);
        let y = sample(domain, rng);
        let d = linalg::dist(&x, &y);
        if d == 0.0 {
            continue;
        }
        let dv = linalg::dist(
            &dynamics::field(problem, &x)?,
            &dynamics::field(problem, &y)?,
        );
        worst = worst.max(dv / d - bound);
    }
    Ok(CheckOutcome {
        name: "field-lipschitz".into(),
        passed: worst <= bound * 1e-9,
        worst,
        detail: format!("max ratio excess over 2 + eta*beta = {bound} on {pairs} pairs"),
    })
}

/// A declared minimizer must be a fixed point of the flow within
/// [`dynamics::CRITICALITY_TOL`].
pub fn known_minimizer_residual(problem: &CompositeProblem) -> Result<Option<CheckOutcome>> {
    let Some(xstar) = problem.known_minimizer() else {
        return Ok(None);
    };
    let resid = dynamics::criticality_residual(problem, xstar)?;
    Ok(Some(CheckOutcome {
        name: "known-minimizer-residual".into(),
        passed: resid <= dynamics::CRITICALITY_TOL,
        worst: resid,
        detail: "||field(known_minimizer)||".into(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, Term};
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn catalog_terms_pass_all_checks() {
        let mut rng = StdRng::seed_from_u64(0xC0FFEE);
        for entry in catalog::catalog() {
            match &entry.term {
                Term::Prox(t) => {
                    for eta in [0.1, 1.0, 3.0] {
                        let fne = firm_nonexpansive(t, eta, &entry.oracle_domain, 2000, &mut rng)
                            .unwrap();
                        assert!(
                            fne.passed,
                            "{}: {} worst {}",
                            t.name(),
                            fne.detail,
                            fne.worst
                        );
                        let ch =
                            prox_characterization(t, eta, &entry.oracle_domain, 50, 20, &mut rng)
                                .unwrap();
                        assert!(ch.passed, "{}: {} worst {}", t.name(), ch.detail, ch.worst);
                    }
                }
                Term::Smooth(t) => {
                    let gl = gradient_lipschitz(t, &entry.oracle_domain, 1000, &mut rng);
                    assert!(gl.passed, "{}: {} worst {}", t.name(), gl.detail, gl.worst);
                }
            }
        }
    }

    #[test]
    fn known_minimizer_check() {
        let f = catalog::prox_term_zero(1).unwrap();
        let g = catalog::smooth_term_half_sq_norm(1).unwrap();
        let p = crate::problem::CompositeProblem::new(f, g, 0.1, vec![1.0])
            .unwrap()
            .with_known_minimizer(vec![0.0])
            .unwrap();
        let out = known_minimizer_residual(&p).unwrap().unwrap();
        assert!(out.passed);

        let p_wrong = {
            let f = catalog::prox_term_zero(1).unwrap();
            let g = catalog::smooth_term_half_sq_norm(1).unwrap();
            crate::problem::CompositeProblem::new(f, g, 0.1, vec![1.0])
                .unwrap()
                .with_known_minimizer(vec![0.5])
                .unwrap()
        };
        let out = known_minimizer_residual(&p_wrong).unwrap().unwrap();
        assert!(!out.passed);
    }
}
