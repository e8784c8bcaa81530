//! Trajectory diagnostics: energy dissipation, the subgradient-norm bound,
//! velocity decay, terminal criticality, trajectory length, and decay-rate
//! classification.
//!
//! Statements that hold on `[0, +inf)` for the exact flow are verified here
//! as finite-horizon surrogates on residual-terminated runs. Quadrature is
//! trapezoidal on the adaptive grid refined by Hermite interpolation to at
//! least [`ANALYSIS_MIN_POINTS`] samples; where a problem handle is
//! available, velocities at interpolated states are recomputed through the
//! flow field rather than interpolated.

use serde::Serialize;

use crate::dynamics::{self, EnergySample};
use crate::error::{Error, Result};
use crate::integrator::{densify, Termination, Trajectory};
use crate::linalg;
use crate::problem::CompositeProblem;

/// Minimum number of samples used for quadrature and fitting.
pub const ANALYSIS_MIN_POINTS: usize = 20_000;

/// Default integrator tolerance assumed by the energy slack when the caller
/// does not supply the actual configuration.
pub const DEFAULT_TOL: f64 = 1e-9;

fn check_match(problem: &CompositeProblem, traj: &Trajectory) -> Result<()> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    if traj.dim() != problem.dim() {
        return Err(Error::MismatchedTrajectory {
            traj_dim: traj.dim(),
            problem_dim: problem.dim(),
        });
    }
    Ok(())
}

/// Densified trajectory with velocities recomputed through the field at
/// every grid point.
struct FieldFlow {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    velocities: Vec<Vec<f64>>,
}

fn field_flow(problem: &CompositeProblem, traj: &Trajectory) -> Result<FieldFlow> {
    check_match(problem, traj)?;
    let dense = densify(traj, ANALYSIS_MIN_POINTS)?;
    let velocities = dense
        .states
        .iter()
        .map(|x| dynamics::field(problem, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(FieldFlow {
        times: dense.times,
        states: dense.states,
        velocities,
    })
}

// --- energy dissipation ------------------------------------------------------

/// Sampled energies plus the per-interval dissipation check.
#[derive(Debug, Clone)]
pub struct EnergyTrace {
    pub samples: Vec<EnergySample>,
    /// `1/eta - beta*(3 + eta*beta)`; positive under the step condition.
    pub dissipation_constant: f64,
    /// Intervals `(t, magnitude)` where the decrease inequality failed.
    pub violations: Vec<(f64, f64)>,
}

/// Checks `H(u_{i+1}, v_{i+1}) - H(u_i, v_i) <= -c * int ||xdot||^2` on every
/// interval, with trapezoidal quadrature, a relative slack of `10 * rel_tol`
/// on the quadrature term and an absolute floor of
/// `10 * (abs_tol + rel_tol * |H|)` absorbing rounding near stationarity.
///
/// Violations are recorded, not fatal.
pub fn energy_trace(problem: &CompositeProblem, traj: &Trajectory) -> Result<EnergyTrace> {
    energy_trace_with_tol(problem, traj, DEFAULT_TOL, DEFAULT_TOL)
}

pub fn energy_trace_with_tol(
    problem: &CompositeProblem,
    traj: &Trajectory,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<EnergyTrace> {
    let flow = field_flow(problem, traj)?;
    let c = problem.dissipation_constant();
    let mut samples = Vec::with_capacity(flow.times.len());
    for i in 0..flow.times.len() {
        samples.push(EnergySample::at(
            problem,
            flow.times[i],
            &flow.states[i],
            &flow.velocities[i],
        )?);
    }
    let slack_rel = 10.0 * rel_tol;
    let mut violations = Vec::new();
    for i in 0..samples.len().saturating_sub(1) {
        let dt = flow.times[i + 1] - flow.times[i];
        let s0 = linalg::norm(&flow.velocities[i]);
        let s1 = linalg::norm(&flow.velocities[i + 1]);
        let quad = 0.5 * (s0 * s0 + s1 * s1) * dt;
        let lhs = samples[i + 1].h - samples[i].h;
        let rhs = -c * quad * (1.0 - slack_rel);
        let floor = 10.0 * (abs_tol + rel_tol * (samples[i].h.abs() + samples[i + 1].h.abs()));
        if lhs - rhs > floor {
            violations.push((flow.times[i], lhs - rhs));
        }
    }
    Ok(EnergyTrace {
        samples,
        dissipation_constant: c,
        violations,
    })
}

/// Worst relative excess of the witness norm over `(beta + 1/eta) ||xdot||`
/// across all (densified) samples. Nonpositive means the bound holds
/// everywhere; the contract allows a relative slack of 1e-12.
#[derive(Debug, Clone, Serialize)]
pub struct SubgradientBoundReport {
    pub samples: usize,
    pub max_relative_excess: f64,
}

pub fn subgradient_bound_report(
    problem: &CompositeProblem,
    traj: &Trajectory,
) -> Result<SubgradientBoundReport> {
    let flow = field_flow(problem, traj)?;
    let factor = problem.beta() + 1.0 / problem.eta();
    let mut worst = f64::NEG_INFINITY;
    for (x, v) in flow.states.iter().zip(&flow.velocities) {
        let w = dynamics::subgradient_witness_at(problem, x, v)?;
        let bound = factor * linalg::norm(v);
        let excess = if bound > 0.0 {
            (w.norm - bound) / bound
        } else if w.norm == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(excess);
    }
    Ok(SubgradientBoundReport {
        samples: flow.times.len(),
        max_relative_excess: worst,
    })
}

// --- velocity decay ----------------------------------------------------------

/// Running tail supremum of `||xdot||` and tail L2 mass; both nonincreasing
/// by construction.
#[derive(Debug, Clone)]
pub struct VelocityDecay {
    pub times: Vec<f64>,
    pub sup_tail: Vec<f64>,
    pub l2_tail: Vec<f64>,
}

impl VelocityDecay {
    /// Total L2 mass `int_0^T ||xdot||^2 dt`.
    pub fn l2_total(&self) -> f64 {
        self.l2_tail.first().copied().unwrap_or(0.0)
    }

    pub fn final_sup(&self) -> f64 {
        self.sup_tail.last().copied().unwrap_or(0.0)
    }
}

pub fn velocity_decay(traj: &Trajectory) -> Result<VelocityDecay> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let dense = densify(traj, ANALYSIS_MIN_POINTS)?;
    let speeds: Vec<f64> = dense.velocities.iter().map(|v| linalg::norm(v)).collect();
    let n = speeds.len();
    let mut sup_tail = vec![0.0; n];
    let mut l2_tail = vec![0.0; n];
    sup_tail[n - 1] = speeds[n - 1];
    for i in (0..n - 1).rev() {
        sup_tail[i] = speeds[i].max(sup_tail[i + 1]);
        let dt = dense.times[i + 1] - dense.times[i];
        l2_tail[i] =
            l2_tail[i + 1] + 0.5 * (speeds[i] * speeds[i] + speeds[i + 1] * speeds[i + 1]) * dt;
    }
    Ok(VelocityDecay {
        times: dense.times,
        sup_tail,
        l2_tail,
    })
}

// --- trajectory length ---------------------------------------------------------

/// Finite-horizon tail length `sigma(t) = int_t^T ||xdot(s)|| ds` and the
/// per-sample check `||x(t) - x(T)|| <= sigma(t) + slack`.
#[derive(Debug, Clone)]
pub struct TailLength {
    pub times: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Samples `(t, magnitude)` where the distance bound exceeded
    /// `sigma + slack`.
    pub bound_violations: Vec<(f64, f64)>,
    /// Worst value of `||x(t) - x(T)|| - sigma(t)` (nonpositive when the
    /// bound holds without slack).
    pub max_bound_gap: f64,
}

impl TailLength {
    pub fn sigma_total(&self) -> f64 {
        self.sigma.first().copied().unwrap_or(0.0)
    }
}

pub fn tail_length(traj: &Trajectory) -> Result<TailLength> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let dense = densify(traj, ANALYSIS_MIN_POINTS)?;
    let speeds: Vec<f64> = dense.velocities.iter().map(|v| linalg::norm(v)).collect();
    let n = speeds.len();
    let mut sigma = vec![0.0; n];
    let mut dt_max = 0.0f64;
    for i in (0..n.saturating_sub(1)).rev() {
        let dt = dense.times[i + 1] - dense.times[i];
        dt_max = dt_max.max(dt);
        sigma[i] = sigma[i + 1] + 0.5 * (speeds[i] + speeds[i + 1]) * dt;
    }

    // Quadrature slack: trapezoid error is bounded through the total
    // variation of the speed slope, dt_max^2/12 * int |s''| plus a rounding
    // floor.
    let mut tv = 0.0;
    let mut prev_slope: Option<f64> = None;
    for i in 0..n.saturating_sub(1) {
        let dt = dense.times[i + 1] - dense.times[i];
        if dt > 0.0 {
            let slope = (speeds[i + 1] - speeds[i]) / dt;
            if let Some(p) = prev_slope {
                tv += (slope - p).abs();
            }
            prev_slope = Some(slope);
        }
    }
    let slack = dt_max * dt_max / 12.0 * tv + 1e-12 * (1.0 + sigma.first().copied().unwrap_or(0.0));

    let x_end = dense.states.last().unwrap();
    let mut violations = Vec::new();
    let mut max_gap = f64::NEG_INFINITY;
    for i in 0..n {
        let d = linalg::dist(&dense.states[i], x_end);
        let gap = d - sigma[i];
        max_gap = max_gap.max(gap);
        if gap > slack {
            violations.push((dense.times[i], gap));
        }
    }
    Ok(TailLength {
        times: dense.times,
        sigma,
        bound_violations: violations,
        max_bound_gap: max_gap,
    })
}

// --- limit report --------------------------------------------------------------

/// Certificate that the sampled sublevel bound behind the coercivity
/// argument held along the run.
#[derive(Debug, Clone, Serialize)]
pub struct BoundednessCertificate {
    /// `H(xdot(0) + x0, x0)`, the sublevel threshold.
    pub initial_energy: f64,
    /// Largest `(f + g)(xdot + x)` seen along the run.
    pub max_objective_along_flow: f64,
    pub holds: bool,
}

/// Terminal-point diagnostics for a finished run.
#[derive(Debug, Clone, Serialize)]
pub struct LimitReport {
    pub final_time: f64,
    pub final_state: Vec<f64>,
    pub criticality_residual: f64,
    /// `(f + g)` at the final state.
    pub objective: f64,
    /// `H(xdot + x, x) - (f + g)(x)` at the final state; collapses to zero
    /// as the velocity vanishes.
    pub energy_gap: f64,
    pub max_state_norm: f64,
    pub terminated_by: Termination,
    /// Present when the problem is flagged coercive.
    pub boundedness: Option<BoundednessCertificate>,
}

pub fn limit_report(problem: &CompositeProblem, traj: &Trajectory) -> Result<LimitReport> {
    check_match(problem, traj)?;
    let x_end = traj.final_state();
    let v_end = dynamics::field(problem, x_end)?;
    let residual = linalg::norm(&v_end);
    let objective = problem.objective(x_end)?;
    let u_end = linalg::add(&v_end, x_end);
    let energy_gap = dynamics::energy(problem, &u_end, x_end)? - objective;
    let max_state_norm = traj
        .states
        .iter()
        .map(|x| linalg::norm(x))
        .fold(0.0f64, f64::max);

    let boundedness = if problem.coercive() {
        let v0 = &traj.velocities[0];
        let u0 = linalg::add(v0, &traj.states[0]);
        let initial_energy = dynamics::energy(problem, &u0, &traj.states[0])?;
        let mut max_obj = f64::NEG_INFINITY;
        for (x, v) in traj.states.iter().zip(&traj.velocities) {
            let u = linalg::add(v, x);
            max_obj = max_obj.max(problem.objective(&u)?);
        }
        let slack = 1e-9 * (1.0 + initial_energy.abs());
        Some(BoundednessCertificate {
            initial_energy,
            max_objective_along_flow: max_obj,
            holds: max_obj <= initial_energy + slack,
        })
    } else {
        None
    };

    Ok(LimitReport {
        final_time: traj.final_time(),
        final_state: x_end.to_vec(),
        criticality_residual: residual,
        objective,
        energy_gap,
        max_state_norm,
        terminated_by: traj.terminated_by,
        boundedness,
    })
}

// --- rate classification ---------------------------------------------------------

/// Decay regime of `||x(t) - limit||`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateRegime {
    FiniteTime,
    Exponential,
    Polynomial,
}

/// Fitted decay law for the classified regime.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum RateLaw {
    /// `||x(t) - limit|| <= a * exp(-b t)`.
    Exponential { a: f64, b: f64 },
    /// `||x(t) - limit|| <= (c t + d)^power` with `power < 0`.
    Polynomial { c: f64, d: f64, power: f64 },
    /// The velocity hit exact numerical zero at `t_zero` and stayed there.
    FiniteTime { t_zero: f64 },
}

/// Estimated Lojasiewicz exponent and the classified decay regime.
#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    /// Exponent estimated from regressing `log |H - H_lim|` on
    /// `log ||z||`; quadratic-like energies give 1/2.
    pub theta: f64,
    /// Constant making `|H - H_lim|^theta <= C ||z||` hold on the window.
    pub c_theta: f64,
    pub regime: RateRegime,
    pub law: RateLaw,
    pub fit_window: (f64, f64),
    /// Coefficient of determination of the decay-law regression (for
    /// finite-time, of the exponent regression).
    pub r_squared: f64,
}

/// Outcome of [`fit_rate`]; `Inconclusive` is a valid result, not an error.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
pub enum RateOutcome {
    Conclusive(RateFit),
    Inconclusive {
        reason: String,
        theta_estimate: Option<f64>,
    },
}

/// The exponent band classified as exponential decay; the trichotomy is
/// open/closed at 1/2 and cannot be resolved exactly from data.
pub const THETA_EXPONENTIAL_BAND: (f64, f64) = (0.45, 0.55);

fn linreg(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    (slope, intercept, r2)
}

const MIN_WINDOW_POINTS: usize = 20;

/// Classifies the decay of `||x(t) - limit||` along the trajectory.
///
/// The Lojasiewicz exponent is estimated by regressing
/// `log(H(u, v) - H_lim)` against `log ||z||` (the subgradient witness), with
/// `H_lim` the objective at the final flow point `xdot(T) + x(T)`. The fit
/// window drops the first 20% of samples, values within `100 * eps * scale`
/// of the limit, and the tail where the surrogate limit's own resolution
/// (ten times the last raw step's change) dominates.
///
/// Finite-time is reported only when the velocity hits exact numerical zero
/// before the end; an exponent estimate below the exponential band without
/// that witness is inconclusive (indistinguishable from fast exponential
/// decay in floating point).
pub fn fit_rate(
    problem: &CompositeProblem,
    traj: &Trajectory,
    limit: &[f64],
) -> Result<RateOutcome> {
    check_match(problem, traj)?;
    if limit.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: limit.len(),
        });
    }
    if traj.len() < 3 {
        return Err(Error::DegenerateWindow(
            "trajectory has fewer than 3 samples".into(),
        ));
    }

    let raw_speeds: Vec<f64> = traj.velocities.iter().map(|v| linalg::norm(v)).collect();
    if raw_speeds.iter().all(|&s| s == 0.0) {
        return Ok(RateOutcome::Inconclusive {
            reason: "stationary trajectory: no decay to fit".into(),
            theta_estimate: None,
        });
    }

    let flow = field_flow(problem, traj)?;
    let n = flow.times.len();
    let dists: Vec<f64> = flow.states.iter().map(|x| linalg::dist(x, limit)).collect();
    if !dists.iter().any(|&d| d < 1e-3) {
        return Ok(RateOutcome::Inconclusive {
            reason: "trajectory never comes within 1e-3 of the limit".into(),
            theta_estimate: None,
        });
    }

    // Energy and witness-norm series.
    let mut hs = Vec::with_capacity(n);
    let mut zs = Vec::with_capacity(n);
    for i in 0..n {
        let u = linalg::add(&flow.velocities[i], &flow.states[i]);
        hs.push(dynamics::energy(problem, &u, &flow.states[i])?);
        zs.push(
            dynamics::subgradient_witness_at(problem, &flow.states[i], &flow.velocities[i])?.norm,
        );
    }
    let u_end = linalg::add(flow.velocities.last().unwrap(), flow.states.last().unwrap());
    let h_lim = problem.objective(&u_end)?;

    // Floors: numerical noise and the resolution of the surrogate limit.
    let h_scale = hs
        .iter()
        .filter(|h| h.is_finite())
        .fold(0.0f64, |a, &b| a.max(b.abs()));
    let x_scale = flow
        .states
        .iter()
        .map(|x| linalg::norm(x))
        .fold(0.0f64, f64::max)
        .max(1e-30);
    let k = traj.len();
    let last_dx = linalg::dist(&traj.states[k - 1], &traj.states[k - 2]);
    let raw_h_last = {
        let u = linalg::add(&traj.velocities[k - 1], &traj.states[k - 1]);
        dynamics::energy(problem, &u, &traj.states[k - 1])?
    };
    let raw_h_prev = {
        let u = linalg::add(&traj.velocities[k - 2], &traj.states[k - 2]);
        dynamics::energy(problem, &u, &traj.states[k - 2])?
    };
    let h_guard = 100.0 * f64::EPSILON * h_scale + 10.0 * (raw_h_last - raw_h_prev).abs();
    let dist_guard = 100.0 * f64::EPSILON * x_scale + 10.0 * last_dx;

    let start = n / 5;

    // Exponent regression: log(H - H_lim) on log ||z||.
    let mut lz = Vec::new();
    let mut lh = Vec::new();
    let mut window_t = (f64::INFINITY, f64::NEG_INFINITY);
    for i in start..n {
        let dh = hs[i] - h_lim;
        if dh > h_guard && zs[i] > 0.0 && dh.is_finite() {
            lz.push(zs[i].ln());
            lh.push(dh.ln());
            window_t.0 = window_t.0.min(flow.times[i]);
            window_t.1 = window_t.1.max(flow.times[i]);
        }
    }
    if lz.len() < MIN_WINDOW_POINTS {
        return Err(Error::DegenerateWindow(format!(
            "only {} usable energy samples after transient and floor exclusions",
            lz.len()
        )));
    }
    let (slope_h, _icept_h, r2_h) = linreg(&lz, &lh);
    if !(slope_h > 0.0) {
        return Ok(RateOutcome::Inconclusive {
            reason: "energy/subgradient regression has nonpositive slope".into(),
            theta_estimate: None,
        });
    }
    let theta = 1.0 / slope_h;
    let c_theta = lz
        .iter()
        .zip(&lh)
        .map(|(z, h)| (theta * h - z).exp())
        .fold(0.0f64, f64::max);

    // Exact-zero velocity tail (the only numerical witness for finite time).
    let zero_tail_start = raw_speeds
        .iter()
        .rposition(|&s| s != 0.0)
        .map(|i| i + 1)
        .filter(|&i| i < raw_speeds.len());

    if theta < THETA_EXPONENTIAL_BAND.0 {
        if let Some(idx) = zero_tail_start {
            return Ok(RateOutcome::Conclusive(RateFit {
                theta,
                c_theta,
                regime: RateRegime::FiniteTime,
                law: RateLaw::FiniteTime {
                    t_zero: traj.times[idx],
                },
                fit_window: window_t,
                r_squared: r2_h,
            }));
        }
        return Ok(RateOutcome::Inconclusive {
            reason: "exponent below the exponential band but velocity never hit exact zero: \
                     finite-time and fast exponential decay are indistinguishable here"
                .into(),
            theta_estimate: Some(theta),
        });
    }

    // Decay-law window on distances.
    let mut ts = Vec::new();
    let mut lds = Vec::new();
    let mut window_t = (f64::INFINITY, f64::NEG_INFINITY);
    for i in start..n {
        if dists[i] > dist_guard && flow.times[i] > 0.0 {
            ts.push(flow.times[i]);
            lds.push(dists[i].ln());
            window_t.0 = window_t.0.min(flow.times[i]);
            window_t.1 = window_t.1.max(flow.times[i]);
        }
    }
    if ts.len() < MIN_WINDOW_POINTS {
        return Err(Error::DegenerateWindow(format!(
            "only {} usable distance samples after transient and floor exclusions",
            ts.len()
        )));
    }

    if theta <= THETA_EXPONENTIAL_BAND.1 {
        let (slope, intercept, r2) = linreg(&ts, &lds);
        if !(slope < 0.0) {
            return Ok(RateOutcome::Inconclusive {
                reason: "distance does not decay exponentially in the fit window".into(),
                theta_estimate: Some(theta),
            });
        }
        Ok(RateOutcome::Conclusive(RateFit {
            theta,
            c_theta,
            regime: RateRegime::Exponential,
            law: RateLaw::Exponential {
                a: intercept.exp(),
                b: -slope,
            },
            fit_window: window_t,
            r_squared: r2,
        }))
    } else {
        let lts: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
        let (power, intercept, r2) = linreg(&lts, &lds);
        if !(power < 0.0) {
            return Ok(RateOutcome::Inconclusive {
                reason: "distance does not follow a decaying power law in the fit window".into(),
                theta_estimate: Some(theta),
            });
        }
        // dist ~ (c t + d)^power; c from the asymptote, d by matching the
        // first window sample.
        let c = (intercept / power).exp();
        let d = {
            let d0 = lds[0].exp().powf(1.0 / power) - c * ts[0];
            if d0.is_finite() && d0 > 0.0 {
                d0
            } else {
                0.0
            }
        };
        Ok(RateOutcome::Conclusive(RateFit {
            theta,
            c_theta,
            regime: RateRegime::Polynomial,
            law: RateLaw::Polynomial { c, d, power },
            fit_window: window_t,
            r_squared: r2,
        }))
    }
}

/// Per-sample diagnostic row for CSV export:
/// `(t, H, ||xdot||, ||z||, sigma, dist-to-limit)`.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub h: f64,
    pub speed: f64,
    pub witness_norm: f64,
    pub sigma: f64,
    pub dist_to_limit: f64,
}

/// Assembles the per-sample trace used by the harness CSV output.
pub fn trace_rows(
    problem: &CompositeProblem,
    traj: &Trajectory,
    limit: &[f64],
) -> Result<Vec<TraceRow>> {
    let flow = field_flow(problem, traj)?;
    let n = flow.times.len();
    let speeds: Vec<f64> = flow.velocities.iter().map(|v| linalg::norm(v)).collect();
    let mut sigma = vec![0.0; n];
    for i in (0..n.saturating_sub(1)).rev() {
        let dt = flow.times[i + 1] - flow.times[i];
        sigma[i] = sigma[i + 1] + 0.5 * (speeds[i] + speeds[i + 1]) * dt;
    }
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let u = linalg::add(&flow.velocities[i], &flow.states[i]);
        rows.push(TraceRow {
            t: flow.times[i],
            h: dynamics::energy(problem, &u, &flow.states[i])?,
            speed: speeds[i],
            witness_norm: dynamics::subgradient_witness_at(
                problem,
                &flow.states[i],
                &flow.velocities[i],
            )?
            .norm,
            sigma: sigma[i],
            dist_to_limit: linalg::dist(&flow.states[i], limit),
        });
    }
    Ok(rows)
}
