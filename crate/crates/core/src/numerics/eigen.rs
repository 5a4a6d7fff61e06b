//! Symmetric eigendecomposition by cyclic Jacobi rotations.
//!
//! A rotation is applied to the pair `(p, q)` only while the off-diagonal
//! entry is significant relative to the geometric mean of the two diagonal
//! entries; the sweep loop terminates once a full sweep performs no
//! rotation. This gives eigenvalues with high relative accuracy for the
//! small dense covariance matrices used throughout the crate.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

const MAX_SWEEPS: usize = 100;

/// Eigenpairs sorted by descending eigenvalue; eigenvectors are the columns
/// of `vectors`.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymEig {
    /// `V diag(λ) Vᵀ`
    pub fn reconstruct(&self) -> Matrix {
        let n = self.values.len();
        let mut out = Matrix::zeros(n, n);
        for (k, &lambda) in self.values.iter().enumerate() {
            for i in 0..n {
                let vik = self.vectors[(i, k)] * lambda;
                if vik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += vik * self.vectors[(j, k)];
                }
            }
        }
        out
    }
}

pub fn sym_eig(a: &Matrix) -> Result<SymEig> {
    if !a.is_square() {
        return Err(Error::Domain(format!(
            "sym_eig needs a square matrix, got {:?}",
            a.shape()
        )));
    }
    if !a.all_finite() {
        return Err(Error::Domain("sym_eig input has non-finite entries".into()));
    }
    let n = a.rows();
    let scale = a.max_abs();
    if a.asymmetry() > 1e-10 * scale {
        return Err(Error::Domain(format!(
            "matrix is not symmetric (max asymmetry {:e})",
            a.asymmetry()
        )));
    }

    let mut m = a.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    let mut v = Matrix::identity(n);
    let floor = f64::MIN_POSITIVE.max(f64::EPSILON * 1e-6 * scale);

    let mut converged = n < 2;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let threshold = f64::EPSILON * (m[(p, p)] * m[(q, q)]).abs().sqrt();
                if apq.abs() <= threshold.max(floor) {
                    continue;
                }
                rotated = true;
                rotate(&mut m, &mut v, p, q);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::Numerical {
            msg: "Jacobi eigensolver did not converge".into(),
            iterations: sweeps,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, dst)] = v[(i, src)];
        }
    }
    Ok(SymEig { values, vectors })
}

/// Applies the rotation that annihilates `m[(p, q)]`: `m ← JᵀmJ`, `v ← vJ`.
fn rotate(m: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let n = m.rows();
    let apq = m[(p, q)];
    let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Lower-triangular Cholesky factor of an SPD matrix; `None` if a pivot is
/// not strictly positive.
pub fn cholesky(a: &Matrix) -> Option<Matrix> {
    let n = a.rows();
    if !a.is_square() {
        return None;
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Some(l)
}

/// Solves `L X = B` for lower-triangular `L`.
pub fn forward_substitute(l: &Matrix, b: &Matrix) -> Matrix {
    let n = l.rows();
    let mut x = b.clone();
    for col in 0..b.cols() {
        for i in 0..n {
            let mut s = x[(i, col)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = s / l[(i, i)];
        }
    }
    x
}
