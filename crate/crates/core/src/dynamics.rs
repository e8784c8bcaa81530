//! The flow field, the regularized energy, the subgradient witness and the
//! discrete forward-backward iteration.
//!
//! The continuous dynamics are `xdot = prox_{eta f}(x - eta grad g(x)) - x`;
//! the right-hand side is globally `(2 + eta*beta)`-Lipschitz. Velocities are
//! always obtained by evaluating this field, never by differencing states.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::CompositeProblem;

fn check_dim(problem: &CompositeProblem, x: &[f64]) -> Result<()> {
    if x.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// The right-hand side `prox_{eta f}(x - eta grad g(x)) - x`.
///
/// This value is `xdot` at state `x`.
pub fn field(problem: &CompositeProblem, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(problem, x)?;
    let eta = problem.eta();
    let grad = problem.g().gradient(x);
    let mut y = x.to_vec();
    linalg::axpy(&mut y, -eta, &grad);
    let mut p = problem.f().prox(&y, eta)?;
    for (pi, xi) in p.iter_mut().zip(x) {
        *pi -= xi;
    }
    Ok(p)
}

/// `||field(x)||`; zero (to tolerance) certifies a critical point of `f + g`.
pub fn criticality_residual(problem: &CompositeProblem, x: &[f64]) -> Result<f64> {
    Ok(linalg::norm(&field(problem, x)?))
}

/// Default absolute tolerance on `||field(x)||` for calling a point critical.
pub const CRITICALITY_TOL: f64 = 1e-8;

/// The regularized energy `H(u, v) = (f + g)(u) + ||u - v||^2 / (2 eta)`.
pub fn energy(problem: &CompositeProblem, u: &[f64], v: &[f64]) -> Result<f64> {
    check_dim(problem, u)?;
    check_dim(problem, v)?;
    let coupling = {
        let d = linalg::dist(u, v);
        d * d / (2.0 * problem.eta())
    };
    Ok(problem.objective(u)? + coupling)
}

/// The subgradient of `H` selected along the flow at state `x`:
/// `z = (grad g(xdot + x) - grad g(x), -xdot / eta)`.
#[derive(Debug, Clone, Serialize)]
pub struct SubgradientWitness {
    /// First block, `grad g(xdot + x) - grad g(x)`.
    pub smooth_part: Vec<f64>,
    /// Second block, `-xdot / eta`.
    pub velocity_part: Vec<f64>,
    /// Euclidean norm of the stacked pair.
    pub norm: f64,
}

pub fn subgradient_witness(problem: &CompositeProblem, x: &[f64]) -> Result<SubgradientWitness> {
    let xdot = field(problem, x)?;
    subgradient_witness_at(problem, x, &xdot)
}

/// Same as [`subgradient_witness`] with a precomputed velocity.
pub fn subgradient_witness_at(
    problem: &CompositeProblem,
    x: &[f64],
    xdot: &[f64],
) -> Result<SubgradientWitness> {
    check_dim(problem, x)?;
    check_dim(problem, xdot)?;
    let u = linalg::add(xdot, x);
    let smooth_part = linalg::sub(&problem.g().gradient(&u), &problem.g().gradient(x));
    let velocity_part: Vec<f64> = xdot.iter().map(|v| -v / problem.eta()).collect();
    let norm = (linalg::dot(&smooth_part, &smooth_part)
        + linalg::dot(&velocity_part, &velocity_part))
    .sqrt();
    Ok(SubgradientWitness {
        smooth_part,
        velocity_part,
        norm,
    })
}

/// One energy sample along a trajectory: `u = xdot + x`, `v = x`,
/// `H = (f + g)(u) + ||u - v||^2 / (2 eta)` and the witness-norm bound
/// `(beta + 1/eta) ||xdot||`.
#[derive(Debug, Clone, Serialize)]
pub struct EnergySample {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub h: f64,
    pub subgrad_norm_bound: f64,
}

impl EnergySample {
    pub fn at(problem: &CompositeProblem, t: f64, x: &[f64], xdot: &[f64]) -> Result<Self> {
        check_dim(problem, x)?;
        check_dim(problem, xdot)?;
        let u = linalg::add(xdot, x);
        let h = energy(problem, &u, x)?;
        let bound = (problem.beta() + 1.0 / problem.eta()) * linalg::norm(xdot);
        Ok(Self {
            t,
            u,
            v: x.to_vec(),
            h,
            subgrad_norm_bound: bound,
        })
    }
}

/// The flow field as an operator, carrying its Lipschitz bound `2 + eta*beta`.
#[derive(Debug, Clone, Copy)]
pub struct FlowField<'a> {
    problem: &'a CompositeProblem,
}

impl<'a> FlowField<'a> {
    pub fn new(problem: &'a CompositeProblem) -> Self {
        Self { problem }
    }

    pub fn lipschitz_bound(&self) -> f64 {
        2.0 + self.problem.eta() * self.problem.beta()
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        field(self.problem, x)
    }
}

/// Applies the discrete forward-backward map `x <- prox_{eta f}(x - eta grad g(x))`
/// `k` times.
///
/// Each application is computed as `x + field(x)`, so a single step is
/// bit-identical to unit-step explicit Euler.
pub fn fb_iterate(problem: &CompositeProblem, x: &[f64], k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "fb_iterate requires at least one step".into(),
        ));
    }
    check_dim(problem, x)?;
    let mut x = x.to_vec();
    for _ in 0..k {
        let v = field(problem, &x)?;
        for (xi, vi) in x.iter_mut().zip(&v) {
            *xi += vi;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::problem::CompositeProblem;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn linear_problem(eta: f64, dim: usize) -> CompositeProblem {
        CompositeProblem::new(
            catalog::prox_term_zero(dim).unwrap(),
            catalog::smooth_term_half_sq_norm(dim).unwrap(),
            eta,
            vec![1.0; dim],
        )
        .unwrap()
    }

    fn lasso_problem() -> CompositeProblem {
        let f = catalog::prox_term_l1(2, 0.8).unwrap();
        let g =
            catalog::smooth_term_quadratic(vec![vec![3.0, 0.4], vec![0.4, 2.0]], vec![-1.0, 0.5])
                .unwrap();
        let eta = 0.9 * crate::problem::max_valid_eta(g.lipschitz_beta()).unwrap();
        CompositeProblem::new(f, g, eta, vec![1.0, -1.0]).unwrap()
    }

    #[test]
    fn field_of_isotropic_quadratic_is_minus_eta_x() {
        let p = linear_problem(0.1, 3);
        let x = [1.0, -2.0, 0.5];
        let v = field(&p, &x).unwrap();
        for (vi, xi) in v.iter().zip(&x) {
            assert_abs_diff_eq!(*vi, -0.1 * xi, epsilon = 1e-16);
        }
    }

    #[test]
    fn field_vanishes_at_box_interior_stationary_point() {
        // grad g = 0 at the box center, clamp fixes interior points
        let f = catalog::prox_term_box(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        let g = catalog::smooth_term_half_sq_norm(2).unwrap();
        let p = CompositeProblem::new(f, g, 0.2, vec![0.5, 0.5]).unwrap();
        let v = field(&p, &[0.0, 0.0]).unwrap();
        assert_eq!(v, vec![0.0, 0.0]);
    }

    #[test]
    fn lasso_fixed_point_has_tiny_residual() {
        let p = lasso_problem();
        // drive the discrete iteration to machine precision, then check the
        // criticality residual there
        let mut x = p.x0().to_vec();
        for _ in 0..200_000 {
            let next = fb_iterate(&p, &x, 1).unwrap();
            let step = linalg::dist(&next, &x);
            x = next;
            if step < 1e-16 {
                break;
            }
        }
        assert!(criticality_residual(&p, &x).unwrap() < 1e-10);
        // the solution of this instance keeps the second coordinate at zero
        assert_eq!(x[1], 0.0);
        assert_abs_diff_eq!(x[0], 1.0 / 15.0, epsilon = 1e-9);
    }

    #[test]
    fn residual_zero_at_unconstrained_quadratic_minimum() {
        let f = catalog::prox_term_zero(2).unwrap();
        let a = vec![vec![2.0, 0.5], vec![0.5, 1.0]];
        let b = vec![-1.0, 0.3];
        let g = catalog::smooth_term_quadratic(a, b).unwrap();
        let eta = 0.9 * crate::problem::max_valid_eta(g.lipschitz_beta()).unwrap();
        let p = CompositeProblem::new(f, g, eta, vec![0.0, 0.0]).unwrap();
        // solve A x = -b by hand (2x2)
        let det = 2.0 * 1.0 - 0.5 * 0.5;
        let x = [
            (1.0 * 1.0 - 0.5 * (-0.3)) / det,
            (2.0 * (-0.3) - 0.5 * 1.0) / det,
        ];
        assert!(criticality_residual(&p, &x).unwrap() < 1e-12);
        let mut rng = StdRng::seed_from_u64(1);
        let r: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
        assert!(criticality_residual(&p, &r).unwrap() > 1e-3);
    }

    #[test]
    fn energy_examples() {
        let p = linear_problem(0.1, 2);
        let u = [0.4, -0.2];
        assert_abs_diff_eq!(
            energy(&p, &u, &u).unwrap(),
            p.objective(&u).unwrap(),
            epsilon = 1e-16
        );

        let f = catalog::prox_term_zero(1).unwrap();
        let g = catalog::smooth_term_zero(1).unwrap();
        let p0 = CompositeProblem::new(f, g, 0.5, vec![0.0]).unwrap();
        assert_abs_diff_eq!(energy(&p0, &[1.0], &[0.0]).unwrap(), 1.0, epsilon = 1e-16);

        let f = catalog::prox_term_box(&[0.0], &[1.0]).unwrap();
        let g = catalog::smooth_term_zero(1).unwrap();
        let pb = CompositeProblem::new(f, g, 0.5, vec![0.5]).unwrap();
        assert_eq!(energy(&pb, &[2.0], &[0.5]).unwrap(), f64::INFINITY);
        assert!(energy(&pb, &[2.0, 1.0], &[0.5]).is_err());
    }

    #[test]
    fn prox_failure_propagates_through_field_and_integration() {
        // a nonsmooth slot whose prox always fails
        let f = crate::problem::ProxTerm::new(
            "broken",
            1,
            std::sync::Arc::new(|_: &[f64]| 0.0),
            std::sync::Arc::new(|_: &[f64], _| {
                Err(crate::error::Error::ProxConvergence {
                    residual: 1.0,
                    iterations: 1,
                })
            }),
        )
        .unwrap();
        let g = catalog::smooth_term_zero(1).unwrap();
        let p = CompositeProblem::new(f, g, 0.5, vec![1.0]).unwrap();
        assert!(matches!(
            field(&p, &[1.0]),
            Err(crate::error::Error::ProxConvergence { .. })
        ));
        assert!(fb_iterate(&p, &[1.0], 3).is_err());
        assert!(
            crate::integrator::integrate(&p, &crate::integrator::IntegratorConfig::default())
                .is_err()
        );
    }

    #[test]
    fn witness_vanishes_at_fixed_point() {
        let p = linear_problem(0.1, 2);
        let w = subgradient_witness(&p, &[0.0, 0.0]).unwrap();
        assert_eq!(w.norm, 0.0);
        assert_eq!(w.smooth_part, vec![0.0, 0.0]);
        assert_eq!(w.velocity_part, vec![0.0, 0.0]);
    }

    #[test]
    fn witness_with_constant_gradient() {
        // linear g: beta = 0, the smooth block cancels exactly
        let f = catalog::prox_term_l1(2, 0.3).unwrap();
        let g =
            catalog::smooth_term_quadratic(vec![vec![0.0, 0.0], vec![0.0, 0.0]], vec![0.7, -0.2])
                .unwrap();
        let p = CompositeProblem::new(f, g, 0.5, vec![1.0, 1.0]).unwrap();
        let x = [0.9, -1.4];
        let w = subgradient_witness(&p, &x).unwrap();
        assert_eq!(w.smooth_part, vec![0.0, 0.0]);
        let xdot = field(&p, &x).unwrap();
        assert_abs_diff_eq!(w.norm, linalg::norm(&xdot) / 0.5, epsilon = 1e-15);
    }

    #[test]
    fn witness_bound_holds_on_random_states() {
        let p = lasso_problem();
        let bound_factor = p.beta() + 1.0 / p.eta();
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..100 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let w = subgradient_witness(&p, &x).unwrap();
            let xdot = field(&p, &x).unwrap();
            let bound = bound_factor * linalg::norm(&xdot);
            assert!(
                w.norm <= bound * (1.0 + 1e-12),
                "norm {} exceeds bound {}",
                w.norm,
                bound
            );
        }
    }

    #[test]
    fn fb_single_step_is_bitwise_x_plus_field() {
        let p = lasso_problem();
        let x = [0.3, -0.7];
        let one = fb_iterate(&p, &x, 1).unwrap();
        let v = field(&p, &x).unwrap();
        for i in 0..2 {
            assert_eq!(one[i].to_bits(), (x[i] + v[i]).to_bits());
        }
        assert!(fb_iterate(&p, &x, 0).is_err());
    }

    #[test]
    fn fb_on_isotropic_quadratic_is_geometric() {
        let p = linear_problem(0.1, 1);
        for k in [1usize, 5, 20] {
            let xk = fb_iterate(&p, &[1.0], k).unwrap();
            assert_abs_diff_eq!(xk[0], 0.9f64.powi(k as i32), epsilon = 1e-12);
        }
    }

    #[test]
    fn fb_objective_nonincreasing_on_lasso() {
        let p = lasso_problem();
        let mut x = p.x0().to_vec();
        let mut prev = p.objective(&x).unwrap();
        for _ in 0..500 {
            x = fb_iterate(&p, &x, 1).unwrap();
            let obj = p.objective(&x).unwrap();
            assert!(obj <= prev + 1e-12, "objective increased: {obj} > {prev}");
            prev = obj;
        }
    }

    #[test]
    fn problems_are_shareable_across_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<CompositeProblem>();
        assert_send_sync::<crate::problem::ProxTerm>();
        assert_send_sync::<crate::problem::SmoothTerm>();

        let p = std::sync::Arc::new(lasso_problem());
        let handles: Vec<_> = (0..4)
            .map(|k| {
                let p = p.clone();
                std::thread::spawn(move || {
                    let mut acc = 0.0;
                    for i in 0..200 {
                        let x = [0.1 * k as f64 + 0.01 * i as f64, -0.5];
                        acc += linalg::norm(&field(&p, &x).unwrap());
                    }
                    acc
                })
            })
            .collect();
        for h in handles {
            assert!(h.join().unwrap().is_finite());
        }
    }

    #[test]
    fn field_lipschitz_bound_on_random_pairs() {
        for p in [lasso_problem(), linear_problem(0.25, 2)] {
            let ff = FlowField::new(&p);
            let bound = ff.lipschitz_bound();
            let mut rng = StdRng::seed_from_u64(9);
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-4.0..4.0)).collect();
                let y: Vec<f64> = (0..2).map(|_| rng.gen_range(-4.0..4.0)).collect();
                let d = linalg::dist(&x, &y);
                if d == 0.0 {
                    continue;
                }
                let dv = linalg::dist(&ff.eval(&x).unwrap(), &ff.eval(&y).unwrap());
                assert!(
                    dv <= bound * d * (1.0 + 1e-9),
                    "ratio {} exceeds {}",
                    dv / d,
                    bound
                );
            }
        }
    }
}
