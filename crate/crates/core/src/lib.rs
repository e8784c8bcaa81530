// Validation uses `!(x > 0.0)` so NaN parameters fail; index loops walk
// matrices and adjacent samples two-sided, where enumerate() reads worse.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

//! Continuous-time forward-backward dynamics for composite minimization.
//!
//! The library integrates the implicit system
//!
//! ```text
//! xdot(t) + x(t) = prox_{eta f}( x(t) - eta grad g(x(t)) ),    x(0) = x0,
//! ```
//!
//! for a convex nonsmooth term `f` (given through its proximal map) and a
//! smooth term `g` with a `beta`-Lipschitz gradient, under the step condition
//! `eta*beta*(3 + eta*beta) < 1`. On top of the integrator it provides the
//! diagnostics that certify the qualitative behaviour of the flow along a
//! computed trajectory: monotone decay of the regularized energy
//! `H(u, v) = (f + g)(u) + ||u - v||^2 / (2 eta)`, the subgradient-norm
//! bound, velocity decay, criticality of the terminal point, trajectory
//! length, and the decay-rate classification (finite-time / exponential /
//! polynomial) driven by the fitted Lojasiewicz exponent.
//!
//! Modules:
//! - [`problem`]: composite problems and the step-size condition
//! - [`catalog`]: closed-form proximal operators and smooth terms
//! - [`dynamics`]: the flow field, energy, witnesses, discrete iteration
//! - [`integrator`]: fixed-step and adaptive integration, dense output
//! - [`analysis`]: trajectory diagnostics and rate fitting
//! - [`checks`]: randomized operator-level property checks
//!
//! ```
//! use proxflow::{catalog, CompositeProblem};
//! use proxflow::integrator::{integrate, IntegratorConfig, Termination};
//! use proxflow::analysis::{energy_trace, limit_report};
//!
//! // l1-regularized quadratic, integrated until the flow is stationary
//! let f = catalog::prox_term_l1(2, 0.8)?;
//! let g = catalog::smooth_term_quadratic(
//!     vec![vec![3.0, 0.4], vec![0.4, 2.0]],
//!     vec![-1.0, 0.5],
//! )?;
//! let eta = 0.9 * proxflow::max_valid_eta(g.lipschitz_beta())?;
//! let problem = CompositeProblem::new(f, g, eta, vec![1.0, -1.0])?;
//!
//! let traj = integrate(&problem, &IntegratorConfig::default())?;
//! assert_eq!(traj.terminated_by, Termination::Residual);
//!
//! let report = limit_report(&problem, &traj)?;
//! assert!(report.criticality_residual <= 1e-9);
//! assert!(energy_trace(&problem, &traj)?.violations.is_empty());
//! # Ok::<(), proxflow::Error>(())
//! ```

pub mod analysis;
pub mod catalog;
pub mod checks;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod linalg;
pub mod problem;

pub use error::{Error, Result};
pub use problem::{max_valid_eta, validate_step, CompositeProblem, ProxTerm, SmoothTerm};
