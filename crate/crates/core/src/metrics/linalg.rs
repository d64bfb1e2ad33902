use crate::error::{shape_err, Error, Result};
use crate::nn::Matrix;

pub const JACOBI_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns the eigenvalues and a matrix whose columns are the eigenvectors.
/// Iterates until the off-diagonal Frobenius norm falls below
/// `JACOBI_TOL` relative to the matrix norm.
pub fn symmetric_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = m.rows();
    if m.cols() != n {
        return Err(shape_err(
            "symmetric_eigen",
            "square matrix",
            format!("{:?}", m.shape()),
        ));
    }
    let mut a = m.clone();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_sq().sqrt().max(f64::MIN_POSITIVE);
    let mut residual = off_diagonal_norm(&a);
    let mut sweeps = 0;
    while residual > JACOBI_TOL * scale {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, residual });
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        sweeps += 1;
        residual = off_diagonal_norm(&a);
    }
    Ok(((0..n).map(|i| a[(i, i)]).collect(), v))
}

/// Principal square root of a symmetric positive semi-definite matrix;
/// negative eigenvalues are clamped to zero.
pub fn psd_sqrt(m: &Matrix) -> Result<Matrix> {
    let (vals, vecs) = symmetric_eigen(m)?;
    let n = vals.len();
    let roots: Vec<f64> = vals.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let scaled = Matrix::from_vec(
        n,
        n,
        (0..n * n).map(|k| vecs.data()[k] * roots[k % n]).collect(),
    )?;
    scaled.matmul_t(&vecs)
}
