//! PCA of normal data, encoding-dimension selection, and the noise priors
//! fed to the generator.
//!
//! The orthogonal prior projects data windows onto a basis `N` whose leading
//! columns lie in the orthogonal complement of the top-`d′` principal
//! subspace `S`, so generated samples are pushed toward directions normal
//! data barely occupies.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{dot, sym_eig, Matrix, RandomStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `d×d`, columns are principal directions by descending variance.
    pub directions: Matrix,
    pub eigenvalues: Vec<f64>,
    pub ratios: Vec<f64>,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// The top-`k` directions as a `d×k` matrix.
    pub fn leading(&self, k: usize) -> Matrix {
        self.directions.columns_range(0, k)
    }

    pub fn total_variance(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }
}

/// PCA via the eigendecomposition of the `1/(n−1)` sample covariance.
pub fn fit_pca(windows: &[Vec<f64>]) -> Result<PcaModel> {
    let Some(first) = windows.first() else {
        return domain("PCA needs at least one window");
    };
    let d = first.len();
    if d == 0 {
        return domain("PCA needs nonempty windows");
    }
    if windows.len() < d + 1 {
        return domain(format!(
            "PCA in dimension {d} needs at least {} windows, got {}",
            d + 1,
            windows.len()
        ));
    }
    if windows.iter().any(|w| w.len() != d) {
        return domain("windows have inconsistent lengths");
    }
    if windows.iter().flatten().any(|v| !v.is_finite()) {
        return domain("windows contain non-finite values");
    }
    let n = windows.len() as f64;
    let mut mean = vec![0.0; d];
    for w in windows {
        for (m, v) in mean.iter_mut().zip(w) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let mut cov = Matrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for w in windows {
        for i in 0..d {
            centered[i] = w[i] - mean[i];
        }
        let c = cov.as_mut_slice();
        for i in 0..d {
            let ci = centered[i];
            for j in i..d {
                c[i * d + j] += ci * centered[j];
            }
        }
    }
    let c = cov.as_mut_slice();
    for i in 0..d {
        for j in i..d {
            let v = c[i * d + j] / (n - 1.0);
            c[i * d + j] = v;
            c[j * d + i] = v;
        }
    }
    let eig = sym_eig(&cov)?;
    // rounding can leave tiny negative eigenvalues on rank-deficient data
    let eigenvalues: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();
    if !(total > 0.0) {
        return domain("normal windows have zero variance; PCA is undefined");
    }
    let ratios = eigenvalues.iter().map(|v| v / total).collect();
    Ok(PcaModel {
        mean,
        directions: eig.vectors,
        eigenvalues,
        ratios,
    })
}

/// Smallest `d′` whose cumulative explained-variance ratio reaches
/// `threshold`.
pub fn select_encoding_dim(ratios: &[f64], threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return domain(format!("variance threshold must lie in (0, 1), got {threshold}"));
    }
    let mut cum = 0.0;
    for (i, r) in ratios.iter().enumerate() {
        cum += r;
        if cum >= threshold - 1e-12 {
            return Ok(i + 1);
        }
    }
    Ok(ratios.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    Orthogonal,
    Gaussian,
}

impl std::str::FromStr for PriorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orthogonal" => Ok(PriorKind::Orthogonal),
            "gaussian" => Ok(PriorKind::Gaussian),
            other => domain(format!("unknown prior '{other}' (expected orthogonal or gaussian)")),
        }
    }
}

impl std::fmt::Display for PriorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PriorKind::Orthogonal => "orthogonal",
            PriorKind::Gaussian => "gaussian",
        })
    }
}

/// Basis `N` (`d×d′`) and projection rule for the orthogonal prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspacePrior {
    pub basis: Matrix,
    /// Number of leading columns taken from the orthogonal complement of `S`.
    pub complement_count: usize,
    pub mean: Vec<f64>,
    /// Subtract `mean` before projecting. Off reproduces `z = Nᵀx` literally.
    pub centered: bool,
}

impl SubspacePrior {
    pub fn from_basis(basis: Matrix, complement_count: usize, mean: Vec<f64>, centered: bool) -> Result<Self> {
        if basis.rows() != mean.len() || complement_count > basis.cols() {
            return domain("prior basis, complement count and mean are inconsistent");
        }
        if basis.orthonormality_defect() > 1e-8 {
            return domain("prior basis columns are not orthonormal");
        }
        Ok(Self {
            basis,
            complement_count,
            mean,
            centered,
        })
    }

    pub fn data_dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn encoding_dim(&self) -> usize {
        self.basis.cols()
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.data_dim() {
            return domain(format!(
                "window has length {}, prior expects {}",
                x.len(),
                self.data_dim()
            ));
        }
        if self.centered {
            let c: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
            self.basis.tr_matvec(&c)
        } else {
            self.basis.tr_matvec(x)
        }
    }
}

/// Builds `N` from a fitted PCA.
///
/// With `2d′ > d`, `N = [trailing d−d′ directions | top 2d′−d directions]`;
/// otherwise all `d′` columns come from the complement, taking the
/// directions `d′..2d′`.
pub fn build_prior_basis(pca: &PcaModel, encoding_dim: usize, centered: bool) -> Result<SubspacePrior> {
    let d = pca.dim();
    let dp = encoding_dim;
    if dp == 0 || dp >= d {
        return domain(format!(
            "encoding dimension must satisfy 1 <= d' < d = {d}, got {dp}; the complement would be empty"
        ));
    }
    let (basis, complement_count) = if 2 * dp > d {
        let mut cols: Vec<Vec<f64>> = (dp..d).map(|j| pca.directions.column(j)).collect();
        cols.extend((0..2 * dp - d).map(|j| pca.directions.column(j)));
        (Matrix::from_columns(&cols)?, d - dp)
    } else {
        (pca.directions.columns_range(dp, 2 * dp), dp)
    };
    SubspacePrior::from_basis(basis, complement_count, pca.mean.clone(), centered)
}

/// `z = Nᵀx` for `batch` windows drawn uniformly with replacement.
pub fn sample_orthogonal_prior(
    prior: &SubspacePrior,
    source: &[Vec<f64>],
    batch: usize,
    rng: &mut RandomStream,
) -> Result<Vec<Vec<f64>>> {
    if source.is_empty() {
        return domain("orthogonal prior needs at least one source window");
    }
    (0..batch)
        .map(|_| prior.project(&source[rng.index(source.len())]))
        .collect()
}

pub fn sample_gaussian_prior(dim: usize, batch: usize, rng: &mut RandomStream) -> Vec<Vec<f64>> {
    (0..batch)
        .map(|_| (0..dim).map(|_| rng.gaussian()).collect())
        .collect()
}

/// Cosines of the principal angles between the column spans of two
/// orthonormal-column matrices, ascending.
pub fn principal_cosines(a: &Matrix, b: &Matrix) -> Result<Vec<f64>> {
    let m = a.tr_matmul(b)?;
    let g = m.tr_matmul(&m)?;
    let mut c: Vec<f64> = sym_eig(&g)?
        .values
        .iter()
        .map(|v| v.max(0.0).sqrt().min(1.0))
        .collect();
    c.reverse();
    Ok(c)
}

/// Mean squared norm of the complement coordinates of centered data.
pub fn mean_complement_energy(prior: &SubspacePrior, windows: &[Vec<f64>]) -> Result<f64> {
    if windows.is_empty() {
        return domain("no windows");
    }
    let mut total = 0.0;
    for w in windows {
        let c: Vec<f64> = w.iter().zip(&prior.mean).map(|(a, m)| a - m).collect();
        for j in 0..prior.complement_count {
            let p = dot(&prior.basis.column(j), &c);
            total += p * p;
        }
    }
    Ok(total / windows.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(rng: &mut RandomStream, n: usize, scales: &[f64]) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| scales.iter().map(|s| s * rng.gaussian()).collect())
            .collect()
    }

    #[test]
    fn line_data_has_single_component() {
        let mut rng = RandomStream::new(1);
        let dir = [1.0, 2.0, -2.0].map(|v: f64| v / 3.0);
        let data: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                let t = rng.gaussian();
                dir.iter().map(|d| 0.5 + t * d).collect()
            })
            .collect();
        let pca = fit_pca(&data).unwrap();
        assert!((pca.ratios[0] - 1.0).abs() < 1e-10);
        assert!(pca.ratios[1..].iter().all(|r| r.abs() < 1e-10));
        assert!((pca.ratios.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(pca.directions.orthonormality_defect() < 1e-10);
    }

    #[test]
    fn isotropic_ratios() {
        let mut rng = RandomStream::new(2);
        let pca = fit_pca(&cloud(&mut rng, 10_000, &[1.0; 4])).unwrap();
        for r in &pca.ratios {
            assert!((0.22..=0.28).contains(r), "{r}");
        }
        assert!(pca.ratios.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn centered_projections_have_zero_mean() {
        let mut rng = RandomStream::new(3);
        let data: Vec<Vec<f64>> = cloud(&mut rng, 200, &[3.0, 1.0, 0.5])
            .into_iter()
            .map(|v| v.iter().map(|x| x + 7.0).collect())
            .collect();
        let pca = fit_pca(&data).unwrap();
        for j in 0..3 {
            let dir = pca.directions.column(j);
            let mean: f64 = data
                .iter()
                .map(|x| {
                    let c: Vec<f64> = x.iter().zip(&pca.mean).map(|(a, m)| a - m).collect();
                    dot(&c, &dir)
                })
                .sum::<f64>()
                / data.len() as f64;
            assert!(mean.abs() < 1e-10);
        }
    }

    #[test]
    fn too_few_samples() {
        assert!(fit_pca(&[vec![0.0, 1.0], vec![1.0, 0.0]]).is_err());
        assert!(fit_pca(&[]).is_err());
    }

    #[test]
    fn encoding_dim_selection() {
        assert_eq!(select_encoding_dim(&[0.6, 0.35, 0.05], 0.9).unwrap(), 2);
        assert_eq!(select_encoding_dim(&[1.0, 0.0, 0.0], 0.9).unwrap(), 1);
        assert_eq!(select_encoding_dim(&[0.6, 0.35, 0.05], 0.99).unwrap(), 3);
        assert!(select_encoding_dim(&[1.0], 1.0).is_err());
    }

    /// Symmetric grid along the first axes, so the sample covariance is
    /// exactly diagonal.
    fn axis_pca(d: usize, scales: &[f64]) -> PcaModel {
        let mut data = Vec::new();
        for a in [-1.0, 0.0, 1.0] {
            for b in [-1.0, 0.0, 1.0] {
                let mut x = vec![0.0; d];
                x[0] = scales[0] * a;
                x[1] = scales[1] * b;
                data.push(x);
            }
        }
        fit_pca(&data).unwrap()
    }

    fn assert_axis(col: &[f64], axis: usize) {
        for (i, v) in col.iter().enumerate() {
            let expect = if i == axis { 1.0 } else { 0.0 };
            assert!((v.abs() - expect).abs() < 1e-12, "{col:?} vs e{axis}");
        }
    }

    #[test]
    fn mixed_basis_when_two_dp_exceeds_d() {
        // S spans e1, e2; e3 carries no variance
        let pca = axis_pca(3, &[3.0, 2.0, 0.0]);
        let prior = build_prior_basis(&pca, 2, true).unwrap();
        assert_eq!(prior.complement_count, 1);
        assert_axis(&prior.basis.column(0), 2);
        assert_axis(&prior.basis.column(1), 0);
        let s = pca.leading(2);
        let comp = prior.basis.columns_range(0, 1);
        assert!(comp.tr_matmul(&s).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn complement_only_when_two_dp_equals_d() {
        let pca = axis_pca(4, &[4.0, 3.0, 0.0, 0.0]);
        let prior = build_prior_basis(&pca, 2, true).unwrap();
        assert_eq!(prior.complement_count, 2);
        let s = pca.leading(2);
        assert!(prior.basis.tr_matmul(&s).unwrap().max_abs() < 1e-10);
        assert!(prior.basis.orthonormality_defect() < 1e-10);
        assert!(build_prior_basis(&pca, 4, true).is_err());
        assert!(build_prior_basis(&pca, 0, true).is_err());
    }

    #[test]
    fn literal_projection_example() {
        let basis = Matrix::from_columns(&[vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]]).unwrap();
        let prior = SubspacePrior::from_basis(basis, 1, vec![0.0; 3], false).unwrap();
        let z = prior.project(&[0.2, 0.7, 0.4]).unwrap();
        assert_eq!(z, vec![0.4, 0.2]);
    }

    #[test]
    fn data_in_subspace_projects_to_zero() {
        let mut rng = RandomStream::new(5);
        let data = cloud(&mut rng, 300, &[2.0, 1.0, 0.0, 0.0]);
        let pca = fit_pca(&data).unwrap();
        let prior = build_prior_basis(&pca, 2, true).unwrap();
        let z = sample_orthogonal_prior(&prior, &data, 20, &mut rng).unwrap();
        assert!(z.iter().flatten().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn orthogonal_sampling_is_seeded() {
        let mut rng = RandomStream::new(6);
        let data = cloud(&mut rng, 100, &[2.0, 1.0, 0.3]);
        let prior = build_prior_basis(&fit_pca(&data).unwrap(), 2, true).unwrap();
        let a = sample_orthogonal_prior(&prior, &data, 10, &mut RandomStream::new(9)).unwrap();
        let b = sample_orthogonal_prior(&prior, &data, 10, &mut RandomStream::new(9)).unwrap();
        assert_eq!(a, b);
        assert!(sample_orthogonal_prior(&prior, &[], 1, &mut rng).is_err());
    }

    #[test]
    fn gaussian_prior_moments() {
        let mut rng = RandomStream::new(7);
        let z = sample_gaussian_prior(3, 100_000, &mut rng);
        for j in 0..3 {
            let mean = z.iter().map(|v| v[j]).sum::<f64>() / z.len() as f64;
            assert!(mean.abs() < 0.02);
        }
        let n = 10_000;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for v in &z[..n] {
            sxy += v[0] * v[1];
            sxx += v[0] * v[0];
            syy += v[1] * v[1];
        }
        assert!((sxy / (sxx * syy).sqrt()).abs() < 0.03);
        assert_eq!(
            sample_gaussian_prior(2, 5, &mut RandomStream::new(1)),
            sample_gaussian_prior(2, 5, &mut RandomStream::new(1))
        );
    }

    #[test]
    fn residual_energy_bound_and_subspace_inequality() {
        let mut rng = RandomStream::new(8);
        let data = cloud(&mut rng, 500, &[3.0, 2.0, 1.0, 0.5, 0.2]);
        let pca = fit_pca(&data).unwrap();
        let dp = select_encoding_dim(&pca.ratios, 0.9).unwrap();
        let prior = build_prior_basis(&pca, dp, true).unwrap();
        let cum: f64 = pca.ratios[..dp].iter().sum();
        let bound = pca.total_variance() * (1.0 - cum);
        let energy = mean_complement_energy(&prior, &data).unwrap();
        // the 1/n average sits just below the 1/(n-1) eigenvalue sum
        assert!(energy <= bound + 1e-9, "{energy} > {bound}");
        let cos = principal_cosines(&pca.leading(dp), &prior.basis).unwrap();
        assert!(cos[0] < 1.0 - 1e-8);
    }
}
