//! Dense complex Hermitian linear algebra: cyclic Jacobi eigensolver,
//! shifted Cholesky positivity test and small helpers.
//!
//! The matrices here are density operators of a few hundred rows at most, so
//! a pure-Rust Jacobi sweep is both fast enough and dependency-free.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::{Error, Result};

pub fn trace(m: &Array2<Complex64>) -> Complex64 {
    m.diag().sum()
}

/// Largest absolute deviation from Hermiticity, max |m - m†|.
pub fn hermiticity_defect(m: &Array2<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Symmetrize to the nearest Hermitian matrix, (m + m†)/2.
pub fn hermitize(m: &Array2<Complex64>) -> Array2<Complex64> {
    let n = m.nrows();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = 0.5 * (m[(i, j)] + m[(j, i)].conj());
        }
    }
    out
}

/// Eigen-decomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order together with the matrix whose
/// columns are the corresponding orthonormal eigenvectors.
pub fn eigh(matrix: &Array2<Complex64>) -> Result<(Array1<f64>, Array2<Complex64>)> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::DimensionMismatch {
            left: n,
            right: matrix.ncols(),
        });
    }
    let mut a = matrix.clone();
    let mut v: Array2<Complex64> = Array2::eye(n);
    let scale: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
    let tol = 1e-14 * scale;

    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.norm() <= 1e-300 {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let phase = apq / apq.norm();
                let tau = (aqq - app) / (2.0 * apq.norm());
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Rotation G: G[p][p] = c, G[p][q] = s*phase,
                //             G[q][p] = -s*conj(phase), G[q][q] = c.
                // Update A <- G† A G and V <- V G.
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c - akq * s * phase.conj();
                    a[(k, q)] = akp * s * phase + akq * c;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c - aqk * s * phase;
                    a[(q, k)] = apk * s * phase.conj() + aqk * c;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * s * phase.conj();
                    v[(k, q)] = vkp * s * phase + vkq * c;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
    let values = Array1::from_iter(order.iter().map(|&i| diag[i]));
    let mut vectors = Array2::zeros((n, n));
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            vectors[(row, new_col)] = v[(row, old_col)];
        }
    }
    Ok((values, vectors))
}

/// Cheap positive-semidefiniteness test: attempts a Cholesky factorization
/// of `m + shift * I`. Succeeding certifies the minimum eigenvalue is at
/// least roughly `-shift`.
pub fn is_psd_within(m: &Array2<Complex64>, shift: f64) -> bool {
    let n = m.nrows();
    let mut l: Array2<Complex64> = Array2::zeros((n, n));
    for j in 0..n {
        let mut diag = m[(j, j)].re + shift;
        for k in 0..j {
            diag -= l[(j, k)].norm_sqr();
        }
        if diag < 0.0 {
            return false;
        }
        let dsqrt = diag.sqrt();
        l[(j, j)] = Complex64::new(dsqrt, 0.0);
        if dsqrt == 0.0 {
            // Zero pivot: remaining column must vanish for PSD to hold.
            for i in (j + 1)..n {
                let mut val = m[(i, j)];
                for k in 0..j {
                    val -= l[(i, k)] * l[(j, k)].conj();
                }
                if val.norm() > 1e-10 * (1.0 + shift) {
                    return false;
                }
                l[(i, j)] = Complex64::new(0.0, 0.0);
            }
            continue;
        }
        for i in (j + 1)..n {
            let mut val = m[(i, j)];
            for k in 0..j {
                val -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = val / dsqrt;
        }
    }
    true
}

/// Hermitian matrix function: applies `f` to the eigenvalues.
pub fn hermitian_map(m: &Array2<Complex64>, f: impl Fn(f64) -> f64) -> Result<Array2<Complex64>> {
    let (vals, vecs) = eigh(m)?;
    let n = m.nrows();
    let mut scaled = vecs.clone();
    for (j, &lambda) in vals.iter().enumerate() {
        let flambda = f(lambda);
        for i in 0..n {
            scaled[(i, j)] *= flambda;
        }
    }
    let vdag = conj_transpose(&vecs);
    Ok(scaled.dot(&vdag))
}

pub fn conj_transpose(m: &Array2<Complex64>) -> Array2<Complex64> {
    let (r, c) = m.dim();
    let mut out = Array2::zeros((c, r));
    for i in 0..r {
        for j in 0..c {
            out[(j, i)] = m[(i, j)].conj();
        }
    }
    out
}
