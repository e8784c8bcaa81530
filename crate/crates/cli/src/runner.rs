//! Executes one configured run: integrate, analyze, verify, write artifacts.
//!
//! Artifacts per run directory: `trajectory.csv` (t, states, velocities),
//! `diagnostics.csv` (t, H, ||xdot||, ||z||, sigma, dist-to-limit),
//! `analysis.json` (machine-readable report), `summary.txt` (one line per
//! check), and `fb_iterates.csv` plus a joint report when the discrete
//! baseline is requested.

use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use proxflow::analysis::{
    energy_trace_with_tol, fit_rate, limit_report, subgradient_bound_report, tail_length,
    trace_rows, velocity_decay, RateOutcome,
};
use proxflow::checks::{
    field_lipschitz, firm_nonexpansive, gradient_lipschitz, known_minimizer_residual,
    prox_characterization, CheckOutcome,
};
use proxflow::dynamics::{criticality_residual, fb_iterate};
use proxflow::integrator::{integrate, Termination};
use proxflow::linalg;
use proxflow::problem::CompositeProblem;

use crate::config::{HarnessError, RunConfig};

/// Command-line overrides applied on top of a configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub t_max: Option<f64>,
    pub stop_residual: Option<f64>,
    pub seed: Option<u64>,
    pub compare_discrete: bool,
}

/// Result of one run; `passed` is the exit-code gate.
#[derive(Debug)]
pub struct RunOutcome {
    pub name: String,
    pub passed: bool,
    pub failed: Vec<String>,
    pub outdir: PathBuf,
}

#[derive(Serialize)]
struct EnergyJson {
    dissipation_constant: f64,
    intervals: usize,
    violations: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct VelocityJson {
    l2_total: f64,
    final_sup: f64,
}

#[derive(Serialize)]
struct TailJson {
    sigma_total: f64,
    max_bound_gap: f64,
    violations: usize,
}

#[derive(Serialize)]
struct DiscreteJson {
    iterations: usize,
    converged: bool,
    final_state: Vec<f64>,
    residual: f64,
    distance_to_continuous: f64,
    tol: Option<f64>,
}

#[derive(Serialize)]
struct Report {
    name: String,
    seed: u64,
    eta: f64,
    beta: f64,
    dissipation_constant: f64,
    stability_warning: Option<String>,
    integrator: proxflow::integrator::IntegratorConfig,
    trajectory: proxflow::integrator::TrajectorySummary,
    limit: Option<proxflow::analysis::LimitReport>,
    energy: Option<EnergyJson>,
    velocity: Option<VelocityJson>,
    tail: Option<TailJson>,
    subgradient_bound: Option<proxflow::analysis::SubgradientBoundReport>,
    rate: Option<RateOutcome>,
    checks: Vec<CheckOutcome>,
    discrete: Option<DiscreteJson>,
    passed: bool,
    failed_checks: Vec<String>,
}

struct Gate {
    lines: Vec<String>,
    failed: Vec<String>,
}

impl Gate {
    fn new() -> Self {
        Self {
            lines: Vec::new(),
            failed: Vec::new(),
        }
    }

    fn record(&mut self, name: &str, passed: bool, detail: String) {
        self.lines.push(format!(
            "check {name}: {} ({detail})",
            if passed { "pass" } else { "FAIL" }
        ));
        if !passed {
            self.failed.push(name.to_string());
        }
    }

    fn record_outcome(&mut self, out: &CheckOutcome) {
        self.record(
            &out.name,
            out.passed,
            format!("worst {:.3e}; {}", out.worst, out.detail),
        );
    }
}

/// Runs one configuration and writes its artifacts under `outdir`.
pub fn run(
    cfg: &RunConfig,
    outdir: &Path,
    overrides: &Overrides,
) -> Result<RunOutcome, HarnessError> {
    let problem = cfg.build_problem()?;
    let mut icfg = cfg.integrator_config()?;
    if let Some(t) = overrides.t_max {
        icfg.t_max = t;
    }
    if let Some(r) = overrides.stop_residual {
        icfg.stop_residual = r;
    }
    let seed = overrides.seed.unwrap_or(cfg.seed);

    fs::create_dir_all(outdir)?;
    let stability_warning = icfg.stability_warning(&problem);

    let traj = integrate(&problem, &icfg)?;
    {
        let mut file = io::BufWriter::new(fs::File::create(outdir.join("trajectory.csv"))?);
        traj.write_csv(&mut file)?;
    }

    let mut gate = Gate::new();
    let mut report = Report {
        name: cfg.name.clone(),
        seed,
        eta: problem.eta(),
        beta: problem.beta(),
        dissipation_constant: problem.dissipation_constant(),
        stability_warning: stability_warning.clone(),
        integrator: icfg,
        trajectory: traj.summary(),
        limit: None,
        energy: None,
        velocity: None,
        tail: None,
        subgradient_bound: None,
        rate: None,
        checks: Vec::new(),
        discrete: None,
        passed: false,
        failed_checks: Vec::new(),
    };
    if let Some(w) = &stability_warning {
        gate.lines.push(format!("warning: {w}"));
    }

    let limit = limit_report(&problem, &traj)?;
    if cfg.analysis.limits {
        if traj.terminated_by == Termination::Residual {
            gate.record(
                "terminal-criticality",
                limit.criticality_residual <= icfg.stop_residual,
                format!(
                    "residual {:.3e} vs stop {:.3e}",
                    limit.criticality_residual, icfg.stop_residual
                ),
            );
        } else {
            gate.lines.push(format!(
                "note: run terminated by {:?}, terminal residual {:.3e}",
                traj.terminated_by, limit.criticality_residual
            ));
        }
        if let Some(cert) = &limit.boundedness {
            gate.record(
                "boundedness-certificate",
                cert.holds,
                format!(
                    "max (f+g) along flow {:.6e} vs initial energy {:.6e}",
                    cert.max_objective_along_flow, cert.initial_energy
                ),
            );
        }
        if let Some(out) = known_minimizer_residual(&problem)? {
            gate.record_outcome(&out);
            report.checks.push(out);
        }
    }

    if cfg.analysis.energy {
        let trace = energy_trace_with_tol(&problem, &traj, icfg.abs_tol, icfg.rel_tol)?;
        gate.record(
            "energy-dissipation",
            trace.violations.is_empty(),
            format!(
                "{} violations over {} intervals, constant {:.6e}",
                trace.violations.len(),
                trace.samples.len().saturating_sub(1),
                trace.dissipation_constant
            ),
        );
        report.energy = Some(EnergyJson {
            dissipation_constant: trace.dissipation_constant,
            intervals: trace.samples.len().saturating_sub(1),
            violations: trace.violations,
        });

        let sb = subgradient_bound_report(&problem, &traj)?;
        gate.record(
            "subgradient-bound",
            sb.max_relative_excess <= 1e-12,
            format!("max relative excess {:.3e}", sb.max_relative_excess),
        );
        report.subgradient_bound = Some(sb);
    }

    if cfg.analysis.velocity {
        let vd = velocity_decay(&traj)?;
        let mut ok = true;
        if traj.terminated_by == Termination::Residual {
            ok = vd.final_sup() <= icfg.stop_residual;
        }
        gate.record(
            "velocity-decay",
            ok,
            format!(
                "L2 total {:.6e}, final sup {:.3e}",
                vd.l2_total(),
                vd.final_sup()
            ),
        );
        report.velocity = Some(VelocityJson {
            l2_total: vd.l2_total(),
            final_sup: vd.final_sup(),
        });
    }

    if cfg.analysis.tail {
        let tl = tail_length(&traj)?;
        gate.record(
            "trajectory-length-bound",
            tl.bound_violations.is_empty(),
            format!(
                "sigma(0) {:.6e}, max gap {:.3e}, {} violations",
                tl.sigma_total(),
                tl.max_bound_gap,
                tl.bound_violations.len()
            ),
        );
        report.tail = Some(TailJson {
            sigma_total: tl.sigma_total(),
            max_bound_gap: tl.max_bound_gap,
            violations: tl.bound_violations.len(),
        });
    }

    if cfg.analysis.rate {
        // a degenerate fit window (e.g. a run that starts at the minimizer)
        // is reported, not treated as a failed run
        match fit_rate(&problem, &traj, &limit.final_state) {
            Ok(outcome) => {
                match &outcome {
                    RateOutcome::Conclusive(fit) => gate.lines.push(format!(
                        "rate: {:?}, theta {:.4}, r^2 {:.6}",
                        fit.regime, fit.theta, fit.r_squared
                    )),
                    RateOutcome::Inconclusive { reason, .. } => {
                        gate.lines.push(format!("rate: inconclusive ({reason})"))
                    }
                }
                report.rate = Some(outcome);
            }
            Err(proxflow::Error::DegenerateWindow(reason)) => {
                gate.lines.push(format!("rate: no fit ({reason})"));
            }
            Err(e) => return Err(e.into()),
        }
    }

    if cfg.checks.enabled {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let domain = cfg.check_domain();
        let outcomes = vec![
            gradient_lipschitz(problem.g(), &domain, cfg.checks.lipschitz_pairs, &mut rng),
            firm_nonexpansive(
                problem.f(),
                problem.eta(),
                &domain,
                cfg.checks.prox_pairs,
                &mut rng,
            )?,
            prox_characterization(
                problem.f(),
                problem.eta(),
                &domain,
                cfg.checks.characterization_points,
                10,
                &mut rng,
            )?,
            field_lipschitz(&problem, &domain, cfg.checks.field_pairs, &mut rng)?,
        ];
        for out in outcomes {
            gate.record_outcome(&out);
            report.checks.push(out);
        }
    }

    // Per-sample diagnostics.
    {
        let rows = trace_rows(&problem, &traj, &limit.final_state)?;
        let mut file = io::BufWriter::new(fs::File::create(outdir.join("diagnostics.csv"))?);
        writeln!(file, "t,h,speed,witness_norm,sigma,dist_to_limit")?;
        for r in rows {
            writeln!(
                file,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.t, r.h, r.speed, r.witness_norm, r.sigma, r.dist_to_limit
            )?;
        }
    }

    if overrides.compare_discrete {
        let discrete = discrete_baseline(&problem, outdir)?;
        let dist = linalg::dist(&discrete.final_state, &limit.final_state);
        if let Some(tol) = cfg.analysis.same_limit_tol {
            gate.record(
                "discrete-continuous-agreement",
                dist <= tol && discrete.residual <= 1e-6,
                format!(
                    "limits {dist:.3e} apart, fb residual {:.3e}",
                    discrete.residual
                ),
            );
        } else {
            gate.lines.push(format!(
                "note: discrete baseline {dist:.3e} from continuous limit (no tolerance set)"
            ));
        }
        report.discrete = Some(DiscreteJson {
            tol: cfg.analysis.same_limit_tol,
            distance_to_continuous: dist,
            ..discrete
        });
    }

    report.limit = Some(limit);
    report.passed = gate.failed.is_empty();
    report.failed_checks = gate.failed.clone();

    fs::write(
        outdir.join("analysis.json"),
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;

    let mut summary = io::BufWriter::new(fs::File::create(outdir.join("summary.txt"))?);
    writeln!(summary, "run {}", cfg.name)?;
    writeln!(
        summary,
        "eta = {:.6e}, beta = {:.6e}, dissipation constant = {:.6e}",
        problem.eta(),
        problem.beta(),
        problem.dissipation_constant()
    )?;
    writeln!(
        summary,
        "terminated by {:?} at t = {:.6e} with residual {:.3e} ({} samples)",
        traj.terminated_by,
        traj.final_time(),
        report.trajectory.residual,
        traj.len()
    )?;
    for line in &gate.lines {
        writeln!(summary, "{line}")?;
    }
    writeln!(
        summary,
        "result: {}",
        if report.passed { "PASS" } else { "FAIL" }
    )?;

    Ok(RunOutcome {
        name: cfg.name.clone(),
        passed: report.passed,
        failed: gate.failed,
        outdir: outdir.to_path_buf(),
    })
}

const FB_ITERATION_CAP: usize = 2_000_000;
const FB_CSV_ROW_CAP: usize = 20_000;

/// Runs the discrete forward-backward iteration from `x0` to machine
/// precision (or the iteration cap) and writes the iterates.
fn discrete_baseline(
    problem: &CompositeProblem,
    outdir: &Path,
) -> Result<DiscreteJson, HarnessError> {
    let mut x = problem.x0().to_vec();
    let mut iterates = vec![x.clone()];
    let mut converged = false;
    for _ in 0..FB_ITERATION_CAP {
        let next = fb_iterate(problem, &x, 1)?;
        let step = linalg::dist(&next, &x);
        x = next;
        iterates.push(x.clone());
        if step <= 1e-15 * (1.0 + linalg::norm(&x)) {
            converged = true;
            break;
        }
    }
    let stride = iterates.len().div_ceil(FB_CSV_ROW_CAP).max(1);
    let mut file = io::BufWriter::new(fs::File::create(outdir.join("fb_iterates.csv"))?);
    let dim = problem.dim();
    let header: Vec<String> = (1..=dim).map(|i| format!("x_{i}")).collect();
    writeln!(file, "k,{}", header.join(","))?;
    for (k, xk) in iterates.iter().enumerate() {
        if k % stride == 0 || k == iterates.len() - 1 {
            let cols: Vec<String> = xk.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(file, "{k},{}", cols.join(","))?;
        }
    }
    Ok(DiscreteJson {
        iterations: iterates.len() - 1,
        converged,
        residual: criticality_residual(problem, &x)?,
        final_state: x,
        distance_to_continuous: f64::NAN,
        tol: None,
    })
}
