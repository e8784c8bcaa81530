//! Numerical integration of `xdot = field(x)` with fixed-step Euler/RK4 and
//! an adaptive Dormand-Prince 5(4) pair, plus cubic Hermite dense output.
//!
//! Stored velocities are always exact field evaluations at the stored
//! states, so they can be recomputed bit for bit and dense output needs no
//! differencing.

use serde::Serialize;

use crate::dynamics::field;
use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::CompositeProblem;

/// Integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Euler,
    Rk4,
    AdaptiveRk45,
}

/// Integrator parameters.
///
/// `step` applies to the fixed-step methods, the tolerances to the adaptive
/// one. Integration stops at `t_max`, or as soon as `||field(x)|| <=
/// stop_residual`, or when `max_samples` states have been stored.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub step: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub t_max: f64,
    pub stop_residual: f64,
    pub max_samples: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::AdaptiveRk45,
            step: 0.01,
            abs_tol: 1e-9,
            rel_tol: 1e-9,
            t_max: 1e3,
            stop_residual: 1e-9,
            max_samples: 1_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "t_max must be positive and finite, got {}",
                self.t_max
            )));
        }
        if !(self.stop_residual >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "stop_residual must be nonnegative, got {}",
                self.stop_residual
            )));
        }
        if self.max_samples < 2 {
            return Err(Error::InvalidConfig(
                "max_samples must be at least 2".into(),
            ));
        }
        match self.method {
            Method::Euler | Method::Rk4 => {
                if !(self.step > 0.0) || !self.step.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "fixed-step methods need step > 0, got {}",
                        self.step
                    )));
                }
            }
            Method::AdaptiveRk45 => {
                if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "adaptive method needs positive tolerances, got abs {} rel {}",
                        self.abs_tol, self.rel_tol
                    )));
                }
            }
        }
        Ok(())
    }

    /// Explicit Euler is only stable for steps below `1/(2 + eta*beta)`;
    /// returns a guidance message when the configured step exceeds it.
    pub fn stability_warning(&self, problem: &CompositeProblem) -> Option<String> {
        if self.method != Method::Euler {
            return None;
        }
        let limit = 1.0 / (2.0 + problem.eta() * problem.beta());
        if self.step >= limit {
            Some(format!(
                "euler step {} is at or above the stability guidance 1/(2 + eta*beta) = {:.6}",
                self.step, limit
            ))
        } else {
            None
        }
    }
}

/// Why the integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TMax,
    Residual,
    SampleCap,
}

/// A computed solution: sample times, states and the field evaluated at each
/// state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub terminated_by: Termination,
}

/// JSON-facing run summary (terminal state, residual, sample count, stop
/// reason).
#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySummary {
    pub terminal_state: Vec<f64>,
    pub residual: f64,
    pub samples: usize,
    pub terminated_by: Termination,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map(|s| s.as_slice()).unwrap_or(&[])
    }

    pub fn summary(&self) -> TrajectorySummary {
        TrajectorySummary {
            terminal_state: self.final_state().to_vec(),
            residual: self
                .velocities
                .last()
                .map(|v| linalg::norm(v))
                .unwrap_or(f64::NAN),
            samples: self.len(),
            terminated_by: self.terminated_by,
        }
    }

    /// CSV with header `t,x_1..x_n,xdot_1..xdot_n`, 17 significant digits so
    /// values round-trip exactly.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let n = self.dim();
        let mut header = String::from("t");
        for i in 1..=n {
            header.push_str(&format!(",x_{i}"));
        }
        for i in 1..=n {
            header.push_str(&format!(",xdot_{i}"));
        }
        writeln!(w, "{header}")?;
        for ((t, x), v) in self.times.iter().zip(&self.states).zip(&self.velocities) {
            let mut line = format!("{t:.16e}");
            for xi in x {
                line.push_str(&format!(",{xi:.16e}"));
            }
            for vi in v {
                line.push_str(&format!(",{vi:.16e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Integrates the flow from `problem.x0()` under `config`.
pub fn integrate(problem: &CompositeProblem, config: &IntegratorConfig) -> Result<Trajectory> {
    config.validate()?;
    match config.method {
        Method::Euler => fixed_step(problem, config, 1),
        Method::Rk4 => fixed_step(problem, config, 4),
        Method::AdaptiveRk45 => dormand_prince(problem, config),
    }
}

fn push_sample(
    traj: &mut Trajectory,
    t: f64,
    x: Vec<f64>,
    v: Vec<f64>,
    stop_residual: f64,
) -> Result<bool> {
    if !linalg::all_finite(&x) || !linalg::all_finite(&v) {
        return Err(Error::Divergence { t });
    }
    let stop = linalg::norm(&v) <= stop_residual;
    traj.times.push(t);
    traj.states.push(x);
    traj.velocities.push(v);
    Ok(stop)
}

fn fixed_step(
    problem: &CompositeProblem,
    config: &IntegratorConfig,
    stages: usize,
) -> Result<Trajectory> {
    let h = config.step;
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        velocities: Vec::new(),
        terminated_by: Termination::TMax,
    };
    let mut x = problem.x0().to_vec();
    let mut v = field(problem, &x)?;
    if push_sample(&mut traj, 0.0, x.clone(), v.clone(), config.stop_residual)? {
        traj.terminated_by = Termination::Residual;
        return Ok(traj);
    }

    let mut k: u64 = 0;
    loop {
        let t = k as f64 * h;
        if t >= config.t_max {
            traj.terminated_by = Termination::TMax;
            return Ok(traj);
        }
        // shorten the last step to land exactly on t_max
        let h_step = h.min(config.t_max - t);
        let t_next = if h_step < h {
            config.t_max
        } else {
            (k + 1) as f64 * h
        };

        let mut x_next = x.clone();
        if stages == 1 {
            linalg::axpy(&mut x_next, h_step, &v);
        } else {
            // classic RK4
            let k1 = v.clone();
            let mut y = x.clone();
            linalg::axpy(&mut y, 0.5 * h_step, &k1);
            let k2 = field(problem, &y)?;
            let mut y = x.clone();
            linalg::axpy(&mut y, 0.5 * h_step, &k2);
            let k3 = field(problem, &y)?;
            let mut y = x.clone();
            linalg::axpy(&mut y, h_step, &k3);
            let k4 = field(problem, &y)?;
            for i in 0..x.len() {
                x_next[i] += h_step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }

        let v_next = field(problem, &x_next)?;
        x = x_next;
        v = v_next;
        k += 1;
        if push_sample(
            &mut traj,
            t_next,
            x.clone(),
            v.clone(),
            config.stop_residual,
        )? {
            traj.terminated_by = Termination::Residual;
            return Ok(traj);
        }
        if traj.len() >= config.max_samples {
            traj.terminated_by = Termination::SampleCap;
            return Ok(traj);
        }
    }
}

// Dormand-Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn dormand_prince(problem: &CompositeProblem, config: &IntegratorConfig) -> Result<Trajectory> {
    let n = problem.dim();
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        velocities: Vec::new(),
        terminated_by: Termination::TMax,
    };
    let mut t = 0.0f64;
    let mut x = problem.x0().to_vec();
    let mut v = field(problem, &x)?; // FSAL: k1 of the next step
    if push_sample(&mut traj, t, x.clone(), v.clone(), config.stop_residual)? {
        traj.terminated_by = Termination::Residual;
        return Ok(traj);
    }

    // initial step heuristic; rejections adjust it quickly
    let mut h = {
        let scale = (1.0 + linalg::norm(&x)) / (1.0 + linalg::norm(&v));
        (0.01 * scale).min(config.t_max / 10.0).max(1e-8)
    };

    let mut k = vec![vec![0.0f64; n]; 7];
    loop {
        if t >= config.t_max {
            traj.terminated_by = Termination::TMax;
            return Ok(traj);
        }
        h = h.min(config.t_max - t);
        let h_floor = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < h_floor {
            return Err(Error::StepUnderflow { t });
        }

        k[0].copy_from_slice(&v);
        for s in 1..7 {
            let mut y = x.clone();
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = DP_A[s - 1][j];
                if a != 0.0 {
                    linalg::axpy(&mut y, h * a, kj);
                }
            }
            if !linalg::all_finite(&y) {
                return Err(Error::Divergence { t: t + DP_C[s] * h });
            }
            k[s] = field(problem, &y)?;
        }

        // 5th-order solution and embedded error estimate
        let mut x5 = x.clone();
        for (j, kj) in k.iter().enumerate() {
            if DP_B5[j] != 0.0 {
                linalg::axpy(&mut x5, h * DP_B5[j], kj);
            }
        }
        let mut err_norm = 0.0f64;
        for i in 0..n {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += (DP_B5[j] - DP_B4[j]) * kj[i];
            }
            e *= h;
            let tol = config.abs_tol + config.rel_tol * x[i].abs().max(x5[i].abs());
            err_norm = err_norm.max((e / tol).abs());
        }

        if err_norm <= 1.0 {
            // accept; FSAL gives field(x5) as k7 only when all b5 weights hit
            // stage 7, which they do for this tableau (b5[6] = 0 and c7 = 1),
            // so k[6] was evaluated at x5 exactly.
            t += h;
            x = x5;
            v = field(problem, &x)?;
            if push_sample(&mut traj, t, x.clone(), v.clone(), config.stop_residual)? {
                traj.terminated_by = Termination::Residual;
                return Ok(traj);
            }
            if traj.len() >= config.max_samples {
                traj.terminated_by = Termination::SampleCap;
                return Ok(traj);
            }
        }

        let scale = if err_norm == 0.0 {
            5.0
        } else {
            (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= scale;
    }
}

/// Cubic Hermite evaluation on one segment; returns (state, velocity).
fn hermite(
    t: f64,
    t0: f64,
    t1: f64,
    x0: &[f64],
    v0: &[f64],
    x1: &[f64],
    v1: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let d00 = (6.0 * s2 - 6.0 * s) / h;
    let d10 = 3.0 * s2 - 4.0 * s + 1.0;
    let d01 = (-6.0 * s2 + 6.0 * s) / h;
    let d11 = 3.0 * s2 - 2.0 * s;
    let n = x0.len();
    let mut state = Vec::with_capacity(n);
    let mut vel = Vec::with_capacity(n);
    for i in 0..n {
        state.push(h00 * x0[i] + h10 * h * v0[i] + h01 * x1[i] + h11 * h * v1[i]);
        vel.push(d00 * x0[i] + d10 * v0[i] + d01 * x1[i] + d11 * v1[i]);
    }
    (state, vel)
}

/// Dense output onto an arbitrary increasing grid within `[0, final_time]`.
///
/// Grid points that coincide exactly with stored sample times copy the
/// stored state and velocity; everything else is cubic Hermite from the
/// bracketing samples (state error `O(h^4)`, velocity error `O(h^3)` on
/// smooth segments).
pub fn resample(traj: &Trajectory, grid: &[f64]) -> Result<Trajectory> {
    if grid.is_empty() {
        return Ok(Trajectory {
            times: Vec::new(),
            states: Vec::new(),
            velocities: Vec::new(),
            terminated_by: traj.terminated_by,
        });
    }
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let t_end = traj.final_time();
    let t0 = traj.times[0];
    let mut out = Trajectory {
        times: Vec::with_capacity(grid.len()),
        states: Vec::with_capacity(grid.len()),
        velocities: Vec::with_capacity(grid.len()),
        terminated_by: traj.terminated_by,
    };
    let mut seg = 0usize;
    let mut prev = f64::NEG_INFINITY;
    for &t in grid {
        if !(t >= t0 && t <= t_end) {
            return Err(Error::GridOutOfRange { t, t_end });
        }
        if t < prev {
            return Err(Error::InvalidParameter(
                "resample grid must be nondecreasing".into(),
            ));
        }
        prev = t;
        while seg + 1 < traj.times.len() && traj.times[seg + 1] < t {
            seg += 1;
        }
        // seg brackets t: times[seg] <= t <= times[seg+1] (or t == last time)
        if t == traj.times[seg] {
            out.times.push(t);
            out.states.push(traj.states[seg].clone());
            out.velocities.push(traj.velocities[seg].clone());
            continue;
        }
        if seg + 1 < traj.times.len() && t == traj.times[seg + 1] {
            out.times.push(t);
            out.states.push(traj.states[seg + 1].clone());
            out.velocities.push(traj.velocities[seg + 1].clone());
            continue;
        }
        let (state, vel) = hermite(
            t,
            traj.times[seg],
            traj.times[seg + 1],
            &traj.states[seg],
            &traj.velocities[seg],
            &traj.states[seg + 1],
            &traj.velocities[seg + 1],
        );
        out.times.push(t);
        out.states.push(state);
        out.velocities.push(vel);
    }
    Ok(out)
}

/// Refines the trajectory grid by splitting every interval into equal parts
/// until at least `min_points` samples exist. Original knots are kept bit for
/// bit; inserted points are Hermite interpolants.
pub fn densify(traj: &Trajectory, min_points: usize) -> Result<Trajectory> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    if traj.len() < 2 || traj.len() >= min_points {
        return Ok(traj.clone());
    }
    let intervals = traj.len() - 1;
    let per = (min_points - 1).div_ceil(intervals);
    let mut grid = Vec::with_capacity(intervals * per + 1);
    for i in 0..intervals {
        let (a, b) = (traj.times[i], traj.times[i + 1]);
        grid.push(a);
        for j in 1..per {
            grid.push(a + (b - a) * j as f64 / per as f64);
        }
    }
    grid.push(traj.times[intervals]);
    resample(traj, &grid)
}
