//! Acceptance suite: one test per criterion, each printing a pass line with
//! its tolerance. Criteria with runtime budgets measure and enforce them.

use std::sync::OnceLock;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use proxflow::analysis::{
    energy_trace_with_tol, fit_rate, limit_report, subgradient_bound_report, tail_length,
    velocity_decay, RateLaw, RateOutcome, RateRegime,
};
use proxflow::catalog;
use proxflow::checks::firm_nonexpansive;
use proxflow::dynamics::{criticality_residual, fb_iterate, field};
use proxflow::integrator::{integrate, IntegratorConfig, Method, Termination, Trajectory};
use proxflow::linalg;
use proxflow::problem::{max_valid_eta, validate_step, CompositeProblem};
use proxflow_cli::config::RunConfig;
use proxflow_cli::corpus::corpus;

struct CorpusRun {
    cfg: RunConfig,
    problem: CompositeProblem,
    icfg: IntegratorConfig,
    traj: Trajectory,
}

/// Corpus trajectories shared by the criteria that do not carry their own
/// runtime budget.
fn corpus_runs() -> &'static Vec<CorpusRun> {
    static RUNS: OnceLock<Vec<CorpusRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        corpus()
            .unwrap()
            .into_iter()
            .map(|cfg| {
                let problem = cfg.build_problem().unwrap();
                let icfg = cfg.integrator_config().unwrap();
                let traj = integrate(&problem, &icfg).unwrap();
                CorpusRun {
                    cfg,
                    problem,
                    icfg,
                    traj,
                }
            })
            .collect()
    })
}

fn fb_oracle(problem: &CompositeProblem, cap: usize) -> Vec<f64> {
    let mut x = problem.x0().to_vec();
    for _ in 0..cap {
        let next = fb_iterate(problem, &x, 1).unwrap();
        let step = linalg::dist(&next, &x);
        x = next;
        if step <= 1e-15 * (1.0 + linalg::norm(&x)) {
            break;
        }
    }
    x
}

#[test]
fn acceptance_01_analytic_solution_match() {
    let start = Instant::now();
    let x0 = vec![1.3, -0.7, 0.4];
    let p = CompositeProblem::new(
        catalog::prox_term_zero(3).unwrap(),
        catalog::smooth_term_half_sq_norm(3).unwrap(),
        0.1,
        x0.clone(),
    )
    .unwrap();
    let traj = integrate(
        &p,
        &IntegratorConfig {
            method: Method::Rk4,
            step: 0.01,
            t_max: 50.0,
            stop_residual: 0.0,
            ..Default::default()
        },
    )
    .unwrap();
    let mut max_err = 0.0f64;
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let decay = (-0.1 * t).exp();
        for (xi, x0i) in state.iter().zip(&x0) {
            max_err = max_err.max((xi - x0i * decay).abs());
        }
    }
    let elapsed = start.elapsed();
    assert!(max_err <= 1e-8, "max error {max_err:e} above 1e-8");
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, budget 1 s");
    println!(
        "acceptance 01 (analytic-solution match): PASS — max error {max_err:.3e} <= 1e-8 over \
         [0, 50], {elapsed:?}"
    );
}

#[test]
fn acceptance_02_step_condition_gate() {
    // boundary within 1e-12 of the quadratic root, per beta
    for beta in [1.0, 2.0, 3.5] {
        let eta_star = max_valid_eta(beta).unwrap();
        // independent oracle: quadratic formula on beta^2 eta^2 + 3 beta eta - 1
        let oracle =
            (-3.0 * beta + (9.0 * beta * beta + 4.0 * beta * beta).sqrt()) / (2.0 * beta * beta);
        assert!(
            (eta_star - oracle).abs() <= 1e-12 * oracle,
            "beta {beta}: {eta_star} vs oracle {oracle}"
        );
        assert!(validate_step(eta_star * (1.0 - 1e-12), beta).unwrap());
        assert!(!validate_step(eta_star * (1.0 + 1e-12), beta).unwrap());
    }

    // construction fails at or above the boundary, succeeds at 0.99 eta*
    let make = |eta: f64| {
        CompositeProblem::new(
            catalog::prox_term_zero(1).unwrap(),
            catalog::smooth_term_half_sq_norm(1).unwrap(),
            eta,
            vec![1.0],
        )
    };
    let eta_star = max_valid_eta(1.0).unwrap();
    assert!(make(eta_star * 1.000001).is_err());
    assert!(make(2.0).is_err());
    assert!(make(0.99 * eta_star).is_ok());
    println!(
        "acceptance 02 (step-condition gate): PASS — boundary within 1e-12 of the quadratic \
         root, construction gated"
    );
}

#[test]
fn acceptance_03_energy_dissipation_on_corpus() {
    let start = Instant::now();
    let mut total_intervals = 0usize;
    let configs = corpus().unwrap();
    assert!(configs.len() >= 6);
    for cfg in &configs {
        let problem = cfg.build_problem().unwrap();
        let icfg = cfg.integrator_config().unwrap();
        let traj = integrate(&problem, &icfg).unwrap();
        let trace = energy_trace_with_tol(&problem, &traj, icfg.abs_tol, icfg.rel_tol).unwrap();
        assert!(
            trace.violations.is_empty(),
            "{}: {} dissipation violations, first {:?}",
            cfg.name,
            trace.violations.len(),
            trace.violations.first()
        );
        assert!(trace.dissipation_constant > 0.0);
        total_intervals += trace.samples.len() - 1;
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 30.0,
        "took {elapsed:?}, budget 30 s"
    );
    println!(
        "acceptance 03 (energy dissipation): PASS — zero violations over {total_intervals} \
         intervals across {} problems, {elapsed:?}",
        configs.len()
    );
}

#[test]
fn acceptance_04_subgradient_bound_on_corpus() {
    let mut worst = f64::NEG_INFINITY;
    for run in corpus_runs() {
        let rep = subgradient_bound_report(&run.problem, &run.traj).unwrap();
        assert!(
            rep.max_relative_excess <= 1e-12,
            "{}: relative excess {:e}",
            run.cfg.name,
            rep.max_relative_excess
        );
        worst = worst.max(rep.max_relative_excess);
    }
    println!(
        "acceptance 04 (subgradient bound): PASS — ||z|| <= (beta + 1/eta)||xdot|| at all \
         samples, worst relative excess {worst:.3e} (slack 1e-12)"
    );
}

#[test]
fn acceptance_05_criticality_of_limits() {
    let convex = [
        "quadratic-decay",
        "lasso",
        "box-quadratic",
        "halfline",
        "quartic-box",
    ];
    let mut checked = 0;
    for run in corpus_runs() {
        if run.traj.terminated_by != Termination::Residual {
            continue;
        }
        let resid = criticality_residual(&run.problem, run.traj.final_state()).unwrap();
        assert!(
            resid <= 1e-9,
            "{}: terminal residual {resid:e}",
            run.cfg.name
        );
        if convex.contains(&run.cfg.name.as_str()) {
            let oracle = fb_oracle(&run.problem, 2_000_000);
            let obj_flow = run.problem.objective(run.traj.final_state()).unwrap();
            let obj_oracle = run.problem.objective(&oracle).unwrap();
            assert!(
                (obj_flow - obj_oracle).abs() <= 1e-8,
                "{}: objective {obj_flow} vs oracle {obj_oracle}",
                run.cfg.name
            );
        }
        checked += 1;
    }
    assert!(checked >= 5, "only {checked} residual-terminated runs");
    println!(
        "acceptance 05 (criticality of limits): PASS — {checked} residual-terminated runs end \
         with ||field|| <= 1e-9; convex objectives match the discrete oracle within 1e-8"
    );
}

#[test]
fn acceptance_06_velocity_decay() {
    for run in corpus_runs() {
        let vd = velocity_decay(&run.traj).unwrap();
        for w in vd.sup_tail.windows(2) {
            assert!(w[1] <= w[0], "{}: sup tail not monotone", run.cfg.name);
        }
        for w in vd.l2_tail.windows(2) {
            assert!(w[1] <= w[0], "{}: L2 tail not monotone", run.cfg.name);
        }
        if run.traj.terminated_by == Termination::Residual {
            assert!(vd.final_sup() <= run.icfg.stop_residual);
        }
    }

    // analytic L2 mass on the linear problem
    let eta = 0.1;
    let x0 = vec![1.3, -0.7];
    let p = CompositeProblem::new(
        catalog::prox_term_zero(2).unwrap(),
        catalog::smooth_term_half_sq_norm(2).unwrap(),
        eta,
        x0.clone(),
    )
    .unwrap();
    let traj = integrate(
        &p,
        &IntegratorConfig {
            method: Method::Rk4,
            step: 0.01,
            t_max: 200.0,
            stop_residual: 1e-9,
            ..Default::default()
        },
    )
    .unwrap();
    let vd = velocity_decay(&traj).unwrap();
    let analytic = eta * linalg::dot(&x0, &x0) / 2.0;
    let rel = (vd.l2_total() - analytic).abs() / analytic;
    assert!(rel <= 1e-6, "relative L2 error {rel:e}");
    println!(
        "acceptance 06 (velocity decay): PASS — tails nonincreasing on every run; linear-problem \
         L2 mass matches eta*||x0||^2/2 within {rel:.3e} (tolerance 1e-6)"
    );
}

#[test]
fn acceptance_07_rate_trichotomy() {
    let start = Instant::now();

    // strongly convex quadratic
    let quad = corpus()
        .unwrap()
        .into_iter()
        .find(|c| c.name == "quadratic-decay")
        .unwrap();
    let problem = quad.build_problem().unwrap();
    let traj = integrate(&problem, &quad.integrator_config().unwrap()).unwrap();
    let limit = limit_report(&problem, &traj).unwrap();
    let fit = match fit_rate(&problem, &traj, &limit.final_state).unwrap() {
        RateOutcome::Conclusive(f) => f,
        other => panic!("quadratic fit inconclusive: {other:?}"),
    };
    assert_eq!(fit.regime, RateRegime::Exponential);
    assert!(
        (0.45..=0.55).contains(&fit.theta),
        "theta {} outside [0.45, 0.55]",
        fit.theta
    );
    assert!(fit.r_squared > 0.99, "r^2 {}", fit.r_squared);
    let theta_quad = fit.theta;
    let r2_quad = fit.r_squared;

    // quartic on a box: polynomial regime with power -(1 - theta)/(2 theta - 1)
    // = -1/2 for theta = 3/4
    let quartic = corpus()
        .unwrap()
        .into_iter()
        .find(|c| c.name == "quartic-box")
        .unwrap();
    let problem = quartic.build_problem().unwrap();
    let traj = integrate(&problem, &quartic.integrator_config().unwrap()).unwrap();
    let limit = limit_report(&problem, &traj).unwrap();
    let fit = match fit_rate(&problem, &traj, &limit.final_state).unwrap() {
        RateOutcome::Conclusive(f) => f,
        other => panic!("quartic fit inconclusive: {other:?}"),
    };
    assert_eq!(fit.regime, RateRegime::Polynomial);
    let power = match fit.law {
        RateLaw::Polynomial { power, .. } => power,
        other => panic!("unexpected law {other:?}"),
    };
    assert!(
        (power - (-0.5)).abs() <= 0.1,
        "fitted power {power} not within 0.1 of -0.5"
    );

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "took {elapsed:?}, budget 60 s"
    );
    println!(
        "acceptance 07 (rate trichotomy): PASS — quadratic: exponential, theta {theta_quad:.4} in \
         [0.45, 0.55], r^2 {r2_quad:.5} > 0.99; quartic: polynomial, power {power:.4} within 0.1 \
         of -0.5; {elapsed:?}"
    );
}

#[test]
fn acceptance_08_prox_oracle_equivalence() {
    const STEP_1D: f64 = 1e-4;
    const STEP_2D: f64 = 1e-3;

    fn grid_prox_1d(f: impl Fn(f64) -> f64, y: f64, eta: f64, step: f64) -> f64 {
        let (lo, hi) = (-4.0, 4.0);
        let n = ((hi - lo) / step).round() as usize;
        let mut best_t = lo;
        let mut best_v = f64::INFINITY;
        for k in 0..=n {
            let t = lo + k as f64 * step;
            let v = f(t) + (t - y) * (t - y) / (2.0 * eta);
            if v < best_v {
                best_v = v;
                best_t = t;
            }
        }
        best_t
    }

    let mut rng = StdRng::seed_from_u64(808);
    for _ in 0..1000 {
        let y = rng.gen_range(-3.0..3.0);
        let eta = rng.gen_range(0.1..2.0);

        let p = catalog::prox_l1(&[y], eta, 1.0).unwrap()[0];
        let o = grid_prox_1d(|u| u.abs(), y, eta, STEP_1D);
        assert!(
            (p - o).abs() <= 2.0 * STEP_1D,
            "l1 y={y} eta={eta}: {p} vs {o}"
        );

        let p = catalog::prox_indicator_box(&[y], eta, &[0.0], &[1.0]).unwrap()[0];
        let o = grid_prox_1d(
            |u| {
                if (0.0..=1.0).contains(&u) {
                    0.0
                } else {
                    f64::INFINITY
                }
            },
            y,
            eta,
            STEP_1D,
        );
        assert!(
            (p - o).abs() <= 2.0 * STEP_1D,
            "box y={y} eta={eta}: {p} vs {o}"
        );

        let p = catalog::prox_l2_squared(&[y], eta, 1.0).unwrap()[0];
        let o = grid_prox_1d(|u| 0.5 * u * u, y, eta, STEP_1D);
        assert!(
            (p - o).abs() <= 2.0 * STEP_1D,
            "l2 y={y} eta={eta}: {p} vs {o}"
        );
    }

    // 2-D spot checks on the finer contract grid
    for _ in 0..4 {
        let y = [rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2)];
        let eta = rng.gen_range(0.2..1.5);
        let p = catalog::prox_l1(&y, eta, 0.7).unwrap();
        let (lo, hi) = (-1.5, 1.5);
        let n = ((hi - lo) / STEP_2D).round() as usize;
        let mut best = (lo, lo);
        let mut best_v = f64::INFINITY;
        for i in 0..=n {
            let a = lo + i as f64 * STEP_2D;
            let base = 0.7 * a.abs() + (a - y[0]) * (a - y[0]) / (2.0 * eta);
            for j in 0..=n {
                let b = lo + j as f64 * STEP_2D;
                let v = base + 0.7 * b.abs() + (b - y[1]) * (b - y[1]) / (2.0 * eta);
                if v < best_v {
                    best_v = v;
                    best = (a, b);
                }
            }
        }
        assert!((p[0] - best.0).abs() <= 2.0 * STEP_2D);
        assert!((p[1] - best.1).abs() <= 2.0 * STEP_2D);
    }

    // firm nonexpansiveness, 10 000 pairs per catalog prox term
    let mut terms = 0;
    for entry in catalog::catalog() {
        if let catalog::Term::Prox(t) = &entry.term {
            let out = firm_nonexpansive(t, 0.7, &entry.oracle_domain, 10_000, &mut rng).unwrap();
            assert!(out.passed, "{}: {} ({:e})", t.name(), out.detail, out.worst);
            terms += 1;
        }
    }
    println!(
        "acceptance 08 (prox oracle equivalence): PASS — 1000 grid comparisons per 1-D closed \
         form within 2x grid step, 2-D spot checks, firm nonexpansiveness on 10000 pairs across \
         {terms} terms"
    );
}

#[test]
fn acceptance_09_discrete_continuous_bridge() {
    let lasso = corpus()
        .unwrap()
        .into_iter()
        .find(|c| c.name == "lasso")
        .unwrap();
    let problem = lasso.build_problem().unwrap();

    // single-step identity, bitwise
    let mut rng = StdRng::seed_from_u64(99);
    for _ in 0..50 {
        let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let one = fb_iterate(&problem, &x, 1).unwrap();
        let v = field(&problem, &x).unwrap();
        for i in 0..2 {
            assert_eq!(one[i].to_bits(), (x[i] + v[i]).to_bits());
        }
    }

    // unit-step explicit Euler reproduces the discrete iteration exactly
    let k = 25;
    let traj = integrate(
        &problem,
        &IntegratorConfig {
            method: Method::Euler,
            step: 1.0,
            t_max: k as f64,
            stop_residual: 0.0,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(traj.len(), k + 1);
    for step in 1..=k {
        let fb = fb_iterate(&problem, problem.x0(), step).unwrap();
        for (i, fbi) in fb.iter().enumerate() {
            assert_eq!(
                traj.states[step][i].to_bits(),
                fbi.to_bits(),
                "state {step} component {i} differs"
            );
        }
    }
    println!(
        "acceptance 09 (discrete/continuous bridge): PASS — fb step == x + field(x) bitwise; \
         unit-step Euler reproduces {k} forward-backward iterates exactly"
    );
}

#[test]
fn acceptance_10_trajectory_length_bound() {
    let mut samples = 0usize;
    for run in corpus_runs() {
        let tl = tail_length(&run.traj).unwrap();
        assert!(
            tl.bound_violations.is_empty(),
            "{}: {} violations of ||x(t) - x(T)|| <= sigma(t) + slack, first {:?}",
            run.cfg.name,
            tl.bound_violations.len(),
            tl.bound_violations.first()
        );
        samples += tl.times.len();
    }
    println!(
        "acceptance 10 (trajectory-length bound): PASS — ||x(t) - x(T)|| <= sigma(t) + quadrature \
         slack at all {samples} samples across the corpus"
    );
}
