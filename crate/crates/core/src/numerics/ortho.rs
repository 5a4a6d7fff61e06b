use crate::error::{Error, Result};
use crate::numerics::matrix::{axpy, dot, norm};
use crate::numerics::Matrix;

/// Relative residual below which a column counts as linearly dependent.
const RANK_TOL: f64 = 1e-10;

/// Removes from `v` its components along each basis vector, twice over
/// (modified Gram–Schmidt plus one re-orthogonalization pass).
fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, v);
            axpy(-c, b, v);
        }
    }
}

/// Orthonormalizes the columns of `a` in order.
pub fn orthonormalize_columns(a: &Matrix) -> Result<Matrix> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(a.cols());
    for j in 0..a.cols() {
        let mut v = a.column(j);
        let original = norm(&v);
        project_out(&mut v, &basis);
        let residual = norm(&v);
        if original == 0.0 || residual <= RANK_TOL * original {
            return Err(Error::Domain(format!(
                "column {j} is linearly dependent on the preceding columns"
            )));
        }
        v.iter_mut().for_each(|x| *x /= residual);
        basis.push(v);
    }
    if basis.is_empty() {
        return Ok(Matrix::zeros(a.rows(), 0));
    }
    Matrix::from_columns(&basis)
}

/// Orthonormal basis (d × (d − d′)) of the orthogonal complement of the
/// column span of `s` (d × d′).
///
/// Candidates are the canonical axes, picked greedily by largest residual
/// after projecting out the basis built so far.
pub fn orthonormal_complement(s: &Matrix) -> Result<Matrix> {
    let d = s.rows();
    let k = s.cols();
    if k >= d {
        return Err(Error::Domain(format!(
            "complement of a {k}-dimensional subspace of R^{d} is empty"
        )));
    }
    let q = orthonormalize_columns(s)?;
    let mut basis: Vec<Vec<f64>> = (0..k).map(|j| q.column(j)).collect();
    let mut complement = Vec::with_capacity(d - k);

    for _ in 0..(d - k) {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for axis in 0..d {
            let mut v = vec![0.0; d];
            v[axis] = 1.0;
            project_out(&mut v, &basis);
            let r = norm(&v);
            if best.as_ref().is_none_or(|(br, _)| r > *br) {
                best = Some((r, v));
            }
        }
        let (r, mut v) = best.expect("d > 0");
        if r <= RANK_TOL {
            return Err(Error::Numerical {
                msg: "could not extend basis to the full space".into(),
                iterations: complement.len(),
            });
        }
        v.iter_mut().for_each(|x| *x /= r);
        basis.push(v.clone());
        complement.push(v);
    }
    Matrix::from_columns(&complement)
}
