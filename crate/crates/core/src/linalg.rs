//! Small dense linear algebra on `f64` slices.
//!
//! Problems in this crate are desk-scale (a handful of dimensions), so
//! vectors are plain slices and matrices are row-major `Vec<Vec<f64>>`.

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Euclidean distance between two points.
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `y += s * x`, in place.
pub fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Row-major matrix times vector.
pub fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| dot(row, x)).collect()
}

/// Checks that `a` is square with side `n`.
pub fn check_square(a: &[Vec<f64>]) -> Result<usize> {
    let n = a.len();
    for (i, row) in a.iter().enumerate() {
        if row.len() != n {
            return Err(Error::NotSquare {
                row: i,
                len: row.len(),
                expected: n,
            });
        }
    }
    Ok(n)
}

/// Checks symmetry of a square matrix up to exact equality of entries.
pub fn check_symmetric(a: &[Vec<f64>]) -> Result<()> {
    let n = check_square(a)?;
    for i in 0..n {
        for j in (i + 1)..n {
            if a[i][j] != a[j][i] {
                return Err(Error::AsymmetricMatrix {
                    i,
                    j,
                    aij: a[i][j],
                    aji: a[j][i],
                });
            }
        }
    }
    Ok(())
}

/// Spectral norm of a symmetric matrix by power iteration.
///
/// Converges when two successive norm estimates agree to `tol` (relative to
/// `max(1, estimate)`); errors out at `max_iter`.
pub fn spectral_norm_sym(a: &[Vec<f64>], tol: f64, max_iter: usize) -> Result<f64> {
    let n = check_square(a)?;
    if n == 0 {
        return Ok(0.0);
    }
    // Deterministic quasi-random start; a second start guards against an
    // unlucky vector orthogonal to the dominant eigenspace.
    for salt in 0..2u64 {
        let mut v: Vec<f64> = (0..n)
            .map(|i| 0.5 + splitmix(i as u64 + 1 + salt * 0x9e37))
            .collect();
        let nv = norm(&v);
        for x in v.iter_mut() {
            *x /= nv;
        }
        let mut lambda = 0.0f64;
        for _ in 0..max_iter {
            let w = mat_vec(a, &v);
            let nw = norm(&w);
            if nw == 0.0 {
                // v is in the kernel; retry with the other start.
                break;
            }
            let prev = lambda;
            lambda = nw;
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / nw;
            }
            if (lambda - prev).abs() <= tol * lambda.max(1.0) {
                return Ok(lambda);
            }
        }
        if salt == 1 {
            // Both starts hit the kernel immediately: the matrix is zero on
            // two independent pseudo-random vectors, treat it as zero.
            let frob: f64 = a.iter().flatten().map(|x| x * x).sum();
            if frob == 0.0 {
                return Ok(0.0);
            }
        }
    }
    Err(Error::PowerIteration {
        iterations: max_iter,
    })
}

fn splitmix(seed: u64) -> f64 {
    let mut z = seed.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z = z ^ (z >> 31);
    (z >> 11) as f64 / (1u64 << 53) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn spectral_norm_identity() {
        let a = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_abs_diff_eq!(
            spectral_norm_sym(&a, 1e-10, 10_000).unwrap(),
            1.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn spectral_norm_matches_closed_form_2x2() {
        // eigenvalues of [[3, 0.4], [0.4, 2]]: (5 +/- sqrt(25 - 4*5.84)) / 2
        let a = vec![vec![3.0, 0.4], vec![0.4, 2.0]];
        let disc: f64 = 25.0 - 4.0 * (3.0 * 2.0 - 0.4 * 0.4);
        let expected = (5.0 + disc.sqrt()) / 2.0;
        assert_abs_diff_eq!(
            spectral_norm_sym(&a, 1e-10, 10_000).unwrap(),
            expected,
            epsilon = 1e-9
        );
    }

    #[test]
    fn spectral_norm_negative_dominant() {
        let a = vec![vec![-4.0, 0.0], vec![0.0, 1.0]];
        assert_abs_diff_eq!(
            spectral_norm_sym(&a, 1e-10, 10_000).unwrap(),
            4.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn spectral_norm_zero_matrix() {
        let a = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        assert_eq!(spectral_norm_sym(&a, 1e-10, 10_000).unwrap(), 0.0);
    }

    #[test]
    fn asymmetric_rejected() {
        let a = vec![vec![1.0, 2.0], vec![3.0, 1.0]];
        assert!(check_symmetric(&a).is_err());
    }
}
