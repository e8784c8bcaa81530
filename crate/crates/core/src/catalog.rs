//! Closed-form proximal operators and smooth terms used as the test corpus.
//!
//! Every closed form here is cross-checked in the test suite against a
//! brute-force grid minimization of `u -> f(u) + ||u - y||^2 / (2 eta)` and
//! against the subdifferential characterization of the proximal point.

use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::{EvalFn, ProxTerm, SmoothTerm};

/// Componentwise soft threshold: `sign(y_i) * max(|y_i| - eta*weight, 0)`.
///
/// At the kink `|y_i| = eta*weight` the output is exactly `0.0`.
pub fn prox_l1(y: &[f64], eta: f64, weight: f64) -> Result<Vec<f64>> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::NonPositiveEta(eta));
    }
    if !(weight >= 0.0) || !weight.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "l1 weight must be nonnegative, got {weight}"
        )));
    }
    let t = eta * weight;
    Ok(y.iter()
        .map(|&yi| {
            let s = yi.abs() - t;
            if s > 0.0 {
                yi.signum() * s
            } else {
                0.0
            }
        })
        .collect())
}

/// Componentwise clamp onto `[lo, hi]`; independent of `eta`.
pub fn prox_indicator_box(y: &[f64], eta: f64, lo: &[f64], hi: &[f64]) -> Result<Vec<f64>> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::NonPositiveEta(eta));
    }
    if lo.len() != y.len() || hi.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: lo.len().min(hi.len()),
        });
    }
    for (i, (&l, &h)) in lo.iter().zip(hi).enumerate() {
        if l > h {
            return Err(Error::InvalidBox {
                index: i,
                lo: l,
                hi: h,
            });
        }
    }
    Ok(y.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&yi, (&l, &h))| yi.max(l).min(h))
        .collect())
}

/// Prox of `weight/2 * ||.||^2`: shrinkage `y / (1 + eta*weight)`.
pub fn prox_l2_squared(y: &[f64], eta: f64, weight: f64) -> Result<Vec<f64>> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::NonPositiveEta(eta));
    }
    if !(weight >= 0.0) || !weight.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "l2 weight must be nonnegative, got {weight}"
        )));
    }
    let c = 1.0 + eta * weight;
    Ok(y.iter().map(|&yi| yi / c).collect())
}

const PROX_NUMERIC_EVAL_CAP: usize = 100_000;

/// Stopping tolerance for [`prox_numeric`] that the catalog constructors use.
pub const PROX_NUMERIC_DEFAULT_TOL: f64 = 1e-10;

/// Proximal map for a convex term given only through evaluation.
///
/// Minimizes the `1/eta`-strongly convex subproblem by cyclic exact line
/// minimization along coordinates (golden-section on a bracketing triple;
/// `+inf` values are handled, so indicator terms work). Exact for
/// coordinate-separable terms, which covers the catalog; the returned point
/// is always validated against the subgradient inequality of the prox
/// characterization, and a residual above `tol` is an error.
pub fn prox_numeric(f: impl Fn(&[f64]) -> f64, y: &[f64], eta: f64, tol: f64) -> Result<Vec<f64>> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::NonPositiveEta(eta));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "prox tolerance must be positive, got {tol}"
        )));
    }
    let n = y.len();
    let phi = |u: &[f64]| -> f64 {
        let mut q = 0.0;
        for (ui, yi) in u.iter().zip(y) {
            q += (ui - yi) * (ui - yi);
        }
        f(u) + q / (2.0 * eta)
    };

    let mut evals = 0usize;
    let mut u = feasible_start(&phi, y, &mut evals)?;

    // Cyclic sweeps of exact 1-D minimizations. The line tolerance sits well
    // below `tol` because coordinate errors are amplified by 1/eta in the
    // subgradient residual.
    let line_tol = (tol * 1e-3).max(1e-14);
    loop {
        let mut sweep_move = 0.0f64;
        for i in 0..n {
            let before = u[i];
            let line = |t: f64| {
                let mut v = u.clone();
                v[i] = t;
                phi(&v)
            };
            let t_star = line_minimize(&line, u[i], line_tol, &mut evals);
            u[i] = t_star;
            sweep_move = sweep_move.max((t_star - before).abs());
        }
        if sweep_move <= tol.max(1e-14) || evals > PROX_NUMERIC_EVAL_CAP {
            break;
        }
    }

    // Residual check: (y - u)/eta must satisfy the subgradient inequality
    // f(w) >= f(u) + <(y - u)/eta, w - u> on sampled w.
    let g: Vec<f64> = y.iter().zip(&u).map(|(yi, ui)| (yi - ui) / eta).collect();
    let fu = f(&u);
    let mut worst = 0.0f64;
    let mut rng = StdRng::seed_from_u64(0x70f1);
    let radius = 1.0 + linalg::norm(&u);
    let probe = |w: &[f64], worst: &mut f64| {
        let fw = f(w);
        if fw.is_finite() {
            let lin: f64 = g
                .iter()
                .zip(w.iter().zip(&u))
                .map(|(gi, (wi, ui))| gi * (wi - ui))
                .sum();
            let scale = 1.0 + fu.abs() + fw.abs() + lin.abs();
            let violation = (fu + lin - fw) / scale;
            if violation > *worst {
                *worst = violation;
            }
        }
    };
    for _ in 0..100 {
        let w: Vec<f64> = u
            .iter()
            .map(|ui| ui + radius * rng.gen_range(-1.0..1.0))
            .collect();
        probe(&w, &mut worst);
    }
    // Coordinate probes catch kink directions.
    for i in 0..n {
        for d in [-1.0, 1.0, -1e-3, 1e-3] {
            let mut w = u.clone();
            w[i] += d * radius;
            probe(&w, &mut worst);
        }
    }
    if worst > tol.max(1e-12) {
        return Err(Error::ProxConvergence {
            residual: worst,
            iterations: evals,
        });
    }
    Ok(u)
}

/// Finds a point with finite subproblem value, starting from `y` and falling
/// back to random probes on growing boxes around it.
fn feasible_start(phi: &impl Fn(&[f64]) -> f64, y: &[f64], evals: &mut usize) -> Result<Vec<f64>> {
    *evals += 1;
    if phi(y).is_finite() {
        return Ok(y.to_vec());
    }
    let n = y.len();
    if n > 8 {
        return Err(Error::InvalidParameter(
            "prox_numeric: no finite starting point found (domain probe limited to dim <= 8)"
                .into(),
        ));
    }
    let mut rng = StdRng::seed_from_u64(0xFEA5_1B1E);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for level in 0..8 {
        let radius = (1.0 + linalg::norm(y)) * (2.0f64).powi(level);
        for _ in 0..4000 {
            let w: Vec<f64> = y
                .iter()
                .map(|yi| yi + radius * rng.gen_range(-1.0..1.0))
                .collect();
            *evals += 1;
            let v = phi(&w);
            if v.is_finite() && best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, w));
            }
        }
        if best.is_some() {
            break;
        }
    }
    best.map(|(_, w)| w).ok_or(Error::ProxConvergence {
        residual: f64::INFINITY,
        iterations: *evals,
    })
}

/// Exact minimization of a convex extended-real function on a line.
///
/// Expands a bracket around `start` (which must have a finite value), shrinks
/// a bracketing triple `(a, c, b)` with `psi(c) <= min(psi(a), psi(b))` by
/// golden-section steps, then polishes smooth minima with a parabolic vertex
/// fit. Value comparisons alone locate a smooth minimizer only to about
/// sqrt(eps); the vertex fit over a window where value noise is negligible
/// recovers full precision (exactly, for locally linear-plus-quadratic
/// functions), while sharp minima are already resolved by the golden phase.
fn line_minimize(psi: &impl Fn(f64) -> f64, start: f64, tol: f64, evals: &mut usize) -> f64 {
    let mut c = start;
    let mut fc = psi(c);
    *evals += 1;
    debug_assert!(fc.is_finite());

    let mut step = 1.0 + start.abs() * 1e-3;
    let (mut a, mut b);
    // Expand until both ends are worse than the interior point.
    loop {
        a = c - step;
        b = c + step;
        let fa = psi(a);
        let fb = psi(b);
        *evals += 2;
        if fa > fc && fb > fc {
            break;
        }
        if fa <= fc && fa <= fb {
            c = a;
            fc = fa;
        } else if fb.is_finite() {
            c = b;
            fc = fb;
        }
        step *= 2.0;
        if step > 1e18 {
            break;
        }
    }

    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    while (b - a) > tol * (1.0 + c.abs()) {
        // Probe inside the larger of the two subintervals.
        let (x, left) = if c - a > b - c {
            (c - (1.0 - INV_PHI) * (c - a), true)
        } else {
            (c + (1.0 - INV_PHI) * (b - c), false)
        };
        let fx = psi(x);
        *evals += 1;
        if fx < fc {
            if left {
                b = c;
            } else {
                a = c;
            }
            c = x;
            fc = fx;
        } else if left {
            a = x;
        } else {
            b = x;
        }
        if *evals > PROX_NUMERIC_EVAL_CAP {
            break;
        }
    }

    // Parabolic polish, preferring the smallest window that yields a sane
    // vertex. A window straddling a kink produces a visibly worse value and
    // is rejected.
    let noise = 10.0 * f64::EPSILON * (1.0 + fc.abs());
    for h_rel in [1e-4, 1e-3, 1e-2] {
        let h = h_rel * (1.0 + c.abs());
        let fm = psi(c - h);
        let fp = psi(c + h);
        *evals += 2;
        if !fm.is_finite() || !fp.is_finite() {
            continue;
        }
        let denom = fp - 2.0 * fc + fm;
        if denom <= 0.0 {
            continue;
        }
        let v = c - 0.5 * h * (fp - fm) / denom;
        if (v - c).abs() > h {
            continue;
        }
        let fv = psi(v);
        *evals += 1;
        if fv.is_finite() && fv <= fc + noise {
            return v;
        }
    }
    c
}

// --- ProxTerm constructors -------------------------------------------------

/// The zero term; its prox is the identity.
pub fn prox_term_zero(dim: usize) -> Result<ProxTerm> {
    ProxTerm::new(
        "zero",
        dim,
        Arc::new(|_: &[f64]| 0.0),
        Arc::new(|y: &[f64], _eta| Ok(y.to_vec())),
    )
}

/// Weighted l1 norm `weight * ||x||_1`.
pub fn prox_term_l1(dim: usize, weight: f64) -> Result<ProxTerm> {
    if !(weight >= 0.0) || !weight.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "l1 weight must be nonnegative, got {weight}"
        )));
    }
    ProxTerm::new(
        "l1",
        dim,
        Arc::new(move |x: &[f64]| weight * x.iter().map(|v| v.abs()).sum::<f64>()),
        Arc::new(move |y: &[f64], eta| prox_l1(y, eta, weight)),
    )
}

/// Indicator of the box `[lo, hi]`; bounds may be infinite.
pub fn prox_term_box(lo: &[f64], hi: &[f64]) -> Result<ProxTerm> {
    if lo.len() != hi.len() {
        return Err(Error::DimensionMismatch {
            expected: lo.len(),
            got: hi.len(),
        });
    }
    for (i, (&l, &h)) in lo.iter().zip(hi).enumerate() {
        if l > h {
            return Err(Error::InvalidBox {
                index: i,
                lo: l,
                hi: h,
            });
        }
    }
    let lo_e = lo.to_vec();
    let hi_e = hi.to_vec();
    let lo_p = lo.to_vec();
    let hi_p = hi.to_vec();
    ProxTerm::new(
        "box",
        lo.len(),
        Arc::new(move |x: &[f64]| {
            let inside = x
                .iter()
                .zip(lo_e.iter().zip(&hi_e))
                .all(|(&xi, (&l, &h))| xi >= l && xi <= h);
            if inside {
                0.0
            } else {
                f64::INFINITY
            }
        }),
        Arc::new(move |y: &[f64], eta| prox_indicator_box(y, eta, &lo_p, &hi_p)),
    )
}

/// `weight/2 * ||x||^2` as a nonsmooth-slot term.
pub fn prox_term_l2_squared(dim: usize, weight: f64) -> Result<ProxTerm> {
    if !(weight >= 0.0) || !weight.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "l2 weight must be nonnegative, got {weight}"
        )));
    }
    ProxTerm::new(
        "l2_squared",
        dim,
        Arc::new(move |x: &[f64]| 0.5 * weight * linalg::dot(x, x)),
        Arc::new(move |y: &[f64], eta| prox_l2_squared(y, eta, weight)),
    )
}

/// Wraps an evaluation-only convex term; the prox is computed numerically.
pub fn prox_term_numeric(
    name: impl Into<String>,
    dim: usize,
    evaluate: EvalFn,
    tol: f64,
) -> Result<ProxTerm> {
    let eval_for_prox = evaluate.clone();
    ProxTerm::new(
        name,
        dim,
        evaluate,
        Arc::new(move |y: &[f64], eta| prox_numeric(|u| (eval_for_prox)(u), y, eta, tol)),
    )
}

// --- SmoothTerm constructors -----------------------------------------------

/// The zero smooth term (`beta = 0`).
pub fn smooth_term_zero(dim: usize) -> Result<SmoothTerm> {
    SmoothTerm::new(
        "zero",
        dim,
        0.0,
        Arc::new(|_: &[f64]| 0.0),
        Arc::new(|x: &[f64]| vec![0.0; x.len()]),
    )
}

/// `1/2 ||x||^2`, the unit isotropic quadratic (`beta = 1`).
pub fn smooth_term_half_sq_norm(dim: usize) -> Result<SmoothTerm> {
    SmoothTerm::new(
        "half_sq_norm",
        dim,
        1.0,
        Arc::new(|x: &[f64]| 0.5 * linalg::dot(x, x)),
        Arc::new(|x: &[f64]| x.to_vec()),
    )
}

/// `g(x) = 1/2 x'Ax + b'x` for symmetric `A`.
///
/// `beta` is the spectral norm of `A` computed by power iteration (tolerance
/// 1e-10, at most 10000 iterations) and inflated by one part in 1e9 so the
/// stored constant is an upper bound on the true one.
pub fn smooth_term_quadratic(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<SmoothTerm> {
    linalg::check_symmetric(&a)?;
    let n = a.len();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let beta = linalg::spectral_norm_sym(&a, 1e-10, 10_000)? * (1.0 + 1e-9);
    let a_eval = a.clone();
    let b_eval = b.clone();
    let a_grad = a;
    let b_grad = b;
    SmoothTerm::new(
        "quadratic",
        n,
        beta,
        Arc::new(move |x: &[f64]| {
            0.5 * linalg::dot(&linalg::mat_vec(&a_eval, x), x) + linalg::dot(&b_eval, x)
        }),
        Arc::new(move |x: &[f64]| {
            let mut g = linalg::mat_vec(&a_grad, x);
            linalg::axpy(&mut g, 1.0, &b_grad);
            g
        }),
    )
}

/// `g(x) = 1/2 x'Qx + a * sum_i cos(x_i)` for symmetric PSD `Q`.
///
/// Nonconvex for `a > 0`; `beta = ||Q||_2 + a`.
pub fn smooth_term_cosine_quadratic(amplitude: f64, q: Vec<Vec<f64>>) -> Result<SmoothTerm> {
    if !(amplitude > 0.0) || !amplitude.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "cosine amplitude must be positive, got {amplitude}"
        )));
    }
    linalg::check_symmetric(&q)?;
    let n = q.len();
    let beta = linalg::spectral_norm_sym(&q, 1e-10, 10_000)? * (1.0 + 1e-9) + amplitude;
    let q_eval = q.clone();
    let q_grad = q;
    SmoothTerm::new(
        "cosine_quadratic",
        n,
        beta,
        Arc::new(move |x: &[f64]| {
            0.5 * linalg::dot(&linalg::mat_vec(&q_eval, x), x)
                + amplitude * x.iter().map(|v| v.cos()).sum::<f64>()
        }),
        Arc::new(move |x: &[f64]| {
            let mut g = linalg::mat_vec(&q_grad, x);
            for (gi, xi) in g.iter_mut().zip(x) {
                *gi -= amplitude * xi.sin();
            }
            g
        }),
    )
}

/// `g(x) = 1/4 sum_i x_i^4` with `beta = 3 * radius^2`.
///
/// The gradient is Lipschitz with this constant only on the box
/// `[-radius, radius]^n`; pair it with the box indicator so trajectories stay
/// where the constant is valid.
pub fn smooth_term_quartic(dim: usize, radius: f64) -> Result<SmoothTerm> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "quartic box radius must be positive, got {radius}"
        )));
    }
    SmoothTerm::new(
        "quartic",
        dim,
        3.0 * radius * radius,
        Arc::new(|x: &[f64]| 0.25 * x.iter().map(|v| v * v * v * v).sum::<f64>()),
        Arc::new(|x: &[f64]| x.iter().map(|v| v * v * v).collect()),
    )
}

// --- Catalog ---------------------------------------------------------------

/// A catalog term, either slot.
#[derive(Debug, Clone)]
pub enum Term {
    Prox(ProxTerm),
    Smooth(SmoothTerm),
}

/// A term together with the bounding box used by brute-force oracles and
/// randomized property checks.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub term: Term,
    pub oracle_domain: Vec<(f64, f64)>,
    pub description: String,
}

/// Representative instances of every catalog constructor; the test-suite
/// oracles and the harness checks iterate over these.
pub fn catalog() -> Vec<CatalogEntry> {
    let entry = |term, lo: f64, hi: f64, dim: usize, description: &str| CatalogEntry {
        term,
        oracle_domain: vec![(lo, hi); dim],
        description: description.to_string(),
    };
    vec![
        entry(
            Term::Prox(prox_term_zero(1).unwrap()),
            -4.0,
            4.0,
            1,
            "zero term, prox is the identity",
        ),
        entry(
            Term::Prox(prox_term_l1(1, 1.0).unwrap()),
            -4.0,
            4.0,
            1,
            "unit-weight l1, 1-D",
        ),
        entry(
            Term::Prox(prox_term_l1(2, 0.7).unwrap()),
            -1.5,
            1.5,
            2,
            "weighted l1, 2-D",
        ),
        entry(
            Term::Prox(prox_term_box(&[0.0], &[1.0]).unwrap()),
            -4.0,
            4.0,
            1,
            "unit interval indicator",
        ),
        entry(
            Term::Prox(prox_term_box(&[0.0, -0.5], &[1.0, 0.5]).unwrap()),
            -1.5,
            1.5,
            2,
            "box indicator, 2-D",
        ),
        entry(
            Term::Prox(prox_term_l2_squared(1, 1.0).unwrap()),
            -4.0,
            4.0,
            1,
            "squared norm, 1-D",
        ),
        entry(
            Term::Smooth(smooth_term_half_sq_norm(2).unwrap()),
            -5.0,
            5.0,
            2,
            "isotropic quadratic",
        ),
        entry(
            Term::Smooth(
                smooth_term_quadratic(vec![vec![3.0, 0.4], vec![0.4, 2.0]], vec![-1.0, 0.5])
                    .unwrap(),
            ),
            -5.0,
            5.0,
            2,
            "anisotropic quadratic with a linear part",
        ),
        entry(
            Term::Smooth(
                smooth_term_cosine_quadratic(1.0, vec![vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap(),
            ),
            -5.0,
            5.0,
            2,
            "nonconvex cosine plus quadratic",
        ),
        entry(
            Term::Smooth(smooth_term_quartic(1, 1.0).unwrap()),
            -1.0,
            1.0,
            1,
            "separable quartic, valid on the unit box",
        ),
    ]
}
