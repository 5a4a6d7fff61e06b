//! Kernel two-sample test on covariance descriptors of encodings.
//!
//! Each descriptor `C = U R Uᵀ` is stored as a point of Stiefel × SPD; the
//! distance between points is the sum (ℓ1 product metric) of a Stiefel
//! distance on `U` and the affine-invariant distance on `R`, and the kernel
//! is `exp(−d²)`. This kernel is not positive definite in general, so the
//! biased MMD² estimate below can come out negative.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::ganae::GanAeModel;
use crate::numerics::{cholesky, forward_substitute, norm, sym_eig, Matrix, RandomStream};

/// Diagonal shift retried when a factor is too close to singular to
/// factorize. Applying it unconditionally would break congruence invariance
/// at the 1e-8 level, so it is a fallback only.
pub const SPD_RIDGE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldPoint {
    /// `d′ × k`, orthonormal columns.
    pub u: Matrix,
    /// `k × k` symmetric positive definite.
    pub r: Matrix,
}

impl ManifoldPoint {
    pub fn rank(&self) -> usize {
        self.u.cols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.u.rows()
    }

    /// `U R Uᵀ`
    pub fn descriptor(&self) -> Matrix {
        self.u
            .matmul(&self.r)
            .and_then(|ur| ur.matmul(&self.u.transpose()))
            .expect("shapes chain by construction")
    }

    fn cmp_total(&self, other: &Self) -> Ordering {
        let a = self.u.as_slice().iter().chain(self.r.as_slice());
        let b = other.u.as_slice().iter().chain(other.r.as_slice());
        for (x, y) in a.zip(b) {
            match x.total_cmp(y) {
                Ordering::Equal => {}
                o => return o,
            }
        }
        Ordering::Equal
    }
}

/// Flips each column so its largest-magnitude entry is positive (first
/// such entry on ties).
fn fix_signs(u: &mut Matrix) {
    for j in 0..u.cols() {
        let col = u.column(j);
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            let flipped: Vec<f64> = col.iter().map(|v| -v).collect();
            u.set_column(j, &flipped);
        }
    }
}

/// Rank-`k` factorization of a symmetric PSD matrix: `U` holds the top-`k`
/// eigenvectors, `R` the matching eigenvalues on its diagonal.
pub fn psd_factorize(c: &Matrix, k: usize) -> Result<ManifoldPoint> {
    if !c.is_square() || k == 0 || k > c.rows() {
        return domain(format!("cannot take a rank-{k} factor of a {:?} matrix", c.shape()));
    }
    let eig = sym_eig(c)?;
    let top = eig.values[0];
    if !(top > 0.0) {
        return domain("matrix has no positive eigenvalue");
    }
    if eig.values.iter().any(|&v| v < -1e-10 * top) {
        return domain("matrix is not positive semidefinite");
    }
    if !(eig.values[k - 1] > 1e-10 * top) {
        return domain(format!(
            "matrix has numerical rank below {k}; use a smaller rank or windowed descriptors"
        ));
    }
    let mut u = eig.vectors.columns_range(0, k);
    fix_signs(&mut u);
    Ok(ManifoldPoint {
        u,
        r: Matrix::diag(&eig.values[..k]),
    })
}

/// `y yᵀ` as `(y/‖y‖, [‖y‖²])`, computed without an eigensolver.
pub fn rank_one_point(y: &[f64]) -> Result<ManifoldPoint> {
    let n = norm(y);
    if !(n > 0.0) || !n.is_finite() {
        return domain("encoding has zero or non-finite norm; its descriptor has rank 0");
    }
    let mut u = Matrix::from_columns(&[y.iter().map(|v| v / n).collect()])?;
    fix_signs(&mut u);
    Ok(ManifoldPoint {
        u,
        r: Matrix::diag(&[n * n]),
    })
}

/// How encodings become descriptors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum DescriptorMode {
    /// One rank-1 descriptor `y yᵀ` per encoding.
    PerSample,
    /// Mean of `y yᵀ` over non-overlapping blocks of `w` encodings, factored
    /// at rank `min(w, d′)`; a trailing partial block is dropped.
    Window { w: usize },
}

impl FromStr for DescriptorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "per-sample" {
            return Ok(Self::PerSample);
        }
        match s.strip_prefix("window:").map(str::parse::<usize>) {
            Some(Ok(w)) if w >= 1 => Ok(Self::Window { w }),
            _ => domain(format!("unknown descriptor mode '{s}' (expected per-sample or window:<w>)")),
        }
    }
}

impl fmt::Display for DescriptorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PerSample => f.write_str("per-sample"),
            Self::Window { w } => write!(f, "window:{w}"),
        }
    }
}

pub fn descriptors(encodings: &[Vec<f64>], mode: DescriptorMode) -> Result<Vec<ManifoldPoint>> {
    match mode {
        DescriptorMode::PerSample => encodings.iter().map(|y| rank_one_point(y)).collect(),
        DescriptorMode::Window { w } => {
            if w == 0 {
                return domain("window size must be at least 1");
            }
            let Some(dp) = encodings.first().map(Vec::len) else {
                return Ok(Vec::new());
            };
            let k = w.min(dp);
            encodings
                .chunks_exact(w)
                .map(|block| {
                    let mut c = Matrix::zeros(dp, dp);
                    for y in block {
                        if y.len() != dp {
                            return domain("encodings differ in length");
                        }
                        for i in 0..dp {
                            for j in 0..dp {
                                c[(i, j)] += y[i] * y[j] / w as f64;
                            }
                        }
                    }
                    psd_factorize(&c, k)
                })
                .collect()
        }
    }
}

fn check_spd(x: &Matrix, name: &str) -> Result<()> {
    if !x.is_square() || !x.all_finite() || x.asymmetry() > 1e-10 * x.max_abs().max(1.0) {
        return domain(format!("{name} is not a finite symmetric matrix"));
    }
    Ok(())
}

/// Cholesky factor of `x`, or of `x + SPD_RIDGE·I` when `x` alone fails.
fn factor(x: &Matrix, name: &str) -> Result<(Matrix, Matrix)> {
    if let Some(l) = cholesky(x) {
        return Ok((x.clone(), l));
    }
    let mut shifted = x.clone();
    for i in 0..x.rows() {
        shifted[(i, i)] += SPD_RIDGE;
    }
    match cholesky(&shifted) {
        Some(l) => Ok((shifted, l)),
        None => domain(format!("{name} is not positive definite")),
    }
}

/// Affine-invariant distance `sqrt(Σ ln² λ_i)` over the generalized
/// eigenvalues of `(X, Y)`.
pub fn spd_distance(x: &Matrix, y: &Matrix) -> Result<f64> {
    check_spd(x, "first argument")?;
    check_spd(y, "second argument")?;
    if x.shape() != y.shape() {
        return domain("SPD matrices differ in size");
    }
    if x.rows() == 1 {
        let (a, b) = (x[(0, 0)], y[(0, 0)]);
        if !(a > 0.0 && b > 0.0) {
            return domain("1×1 SPD entries must be positive");
        }
        return Ok((a.ln() - b.ln()).abs());
    }
    let (_, l) = factor(x, "first argument")?;
    let (y, _) = factor(y, "second argument")?;
    // M = L⁻¹ Y L⁻ᵀ
    let a = forward_substitute(&l, &y);
    let m = forward_substitute(&l, &a.transpose());
    let mut sym = m.clone();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            sym[(i, j)] = 0.5 * (m[(i, j)] + m[(j, i)]);
        }
    }
    let eig = sym_eig(&sym)?;
    if eig.values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Numerical {
            msg: "generalized eigenvalue is not positive".into(),
            iterations: 0,
        });
    }
    Ok(eig.values.iter().map(|v| v.ln().powi(2)).sum::<f64>().sqrt())
}

fn check_stiefel(u: &Matrix, name: &str) -> Result<()> {
    if u.cols() == 0 || u.cols() > u.rows() || !u.all_finite() {
        return domain(format!("{name} has shape {:?}, not a Stiefel frame", u.shape()));
    }
    let defect = u.orthonormality_defect();
    if defect > 1e-6 {
        return domain(format!("{name} columns are not orthonormal (defect {defect:.2e})"));
    }
    Ok(())
}

/// Subspace distance between frames. For `k = 1` this is `arccos|u₁ᵀu₂|`,
/// evaluated as `2·atan2(‖u₁ − s u₂‖, ‖u₁ + s u₂‖)` with `s = sign(u₁ᵀu₂)`
/// so it is exactly invariant to flipping either vector. For `k > 1` it is
/// `sqrt(Σ θ_i²)` over the principal angles.
pub fn stiefel_distance(u1: &Matrix, u2: &Matrix) -> Result<f64> {
    if u1.shape() != u2.shape() {
        return domain(format!("frames differ in shape: {:?} vs {:?}", u1.shape(), u2.shape()));
    }
    check_stiefel(u1, "first frame")?;
    check_stiefel(u2, "second frame")?;
    if u1.cols() == 1 {
        let (a, b) = (u1.as_slice(), u2.as_slice());
        let s = if crate::numerics::dot(a, b) < 0.0 { -1.0 } else { 1.0 };
        let minus: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - s * y).collect();
        let plus: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + s * y).collect();
        return Ok(2.0 * norm(&minus).atan2(norm(&plus)));
    }
    // sin² of the principal angles are the eigenvalues of RᵀR with
    // R = U₂ − U₁(U₁ᵀU₂), which stays accurate for small angles
    let proj = u1.matmul(&u1.tr_matmul(u2)?)?;
    let resid = u2.sub(&proj)?;
    let rtr = resid.tr_matmul(&resid)?;
    let mut sym = rtr.clone();
    for i in 0..rtr.rows() {
        for j in 0..rtr.cols() {
            sym[(i, j)] = 0.5 * (rtr[(i, j)] + rtr[(j, i)]);
        }
    }
    let eig = sym_eig(&sym)?;
    Ok(eig
        .values
        .iter()
        .map(|&s2| {
            let s2 = s2.clamp(0.0, 1.0);
            s2.sqrt().atan2((1.0 - s2).sqrt()).powi(2)
        })
        .sum::<f64>()
        .sqrt())
}

/// `d_St(U₁, U₂) + d_SPD(R₁, R₂)`
pub fn product_distance(p1: &ManifoldPoint, p2: &ManifoldPoint) -> Result<f64> {
    if p1.u.shape() != p2.u.shape() {
        return domain("manifold points differ in shape");
    }
    // canonical argument order makes the value bitwise symmetric
    let (a, b) = if p1.cmp_total(p2) == Ordering::Greater { (p2, p1) } else { (p1, p2) };
    Ok(stiefel_distance(&a.u, &b.u)? + spd_distance(&a.r, &b.r)?)
}

/// `exp(−d²)` with the ℓ1 product distance.
pub fn product_kernel(p1: &ManifoldPoint, p2: &ManifoldPoint) -> Result<f64> {
    let d = product_distance(p1, p2)?;
    Ok((-d * d).exp())
}

/// Biased estimate `(1/N₁²)ΣK(A,A) − (2/(N₁N₂))ΣK(A,B) + (1/N₂²)ΣK(B,B)`.
pub fn mmd_squared(a: &[ManifoldPoint], b: &[ManifoldPoint]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return domain("both sets must be nonempty");
    }
    let mean = |x: &[ManifoldPoint], y: &[ManifoldPoint]| -> Result<f64> {
        let mut s = 0.0;
        for p in x {
            for q in y {
                s += product_kernel(p, q)?;
            }
        }
        Ok(s / (x.len() * y.len()) as f64)
    };
    Ok(mean(a, a)? - 2.0 * mean(a, b)? + mean(b, b)?)
}

/// `2·sqrt(1/max(N₁, N₂))·(1 + sqrt(−ln α))`
pub fn mmd_threshold(n1: usize, n2: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    let n = n1.max(n2);
    if n == 0 {
        return domain("both sets must be nonempty");
    }
    Ok(2.0 * (1.0 / n as f64).sqrt() * (1.0 + (-alpha.ln()).sqrt()))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectionRule {
    /// Reject when the statistic exceeds the threshold.
    #[default]
    Exceeds,
    /// Reject when the statistic is below the threshold, as printed in the
    /// source text of the method.
    LiteralInequality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub n1: usize,
    pub n2: usize,
    pub alpha: f64,
    pub mmd_squared: f64,
    /// `sqrt(max(MMD², 0))`
    pub statistic: f64,
    pub threshold: f64,
    pub rule: RejectionRule,
    pub reject: bool,
}

pub fn two_sample_test(
    a: &[ManifoldPoint],
    b: &[ManifoldPoint],
    alpha: f64,
    rule: RejectionRule,
) -> Result<TestOutcome> {
    let threshold = mmd_threshold(a.len(), b.len(), alpha)?;
    let mmd2 = mmd_squared(a, b)?;
    let statistic = mmd2.max(0.0).sqrt();
    let reject = match rule {
        RejectionRule::Exceeds => statistic > threshold,
        RejectionRule::LiteralInequality => statistic < threshold,
    };
    Ok(TestOutcome {
        n1: a.len(),
        n2: b.len(),
        alpha,
        mmd_squared: mmd2,
        statistic,
        threshold,
        rule,
        reject,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTestConfig {
    pub alpha: f64,
    pub mode: DescriptorMode,
    pub rule: RejectionRule,
    /// Encodings per set, before grouping into descriptors.
    pub samples: usize,
    pub seed: u64,
}

impl Default for GroupTestConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            mode: DescriptorMode::PerSample,
            rule: RejectionRule::Exceeds,
            samples: 200,
            seed: 0,
        }
    }
}

/// Encoded windows against encoded generator output `E(G(z))`, `z` drawn
/// from the model's prior with `windows` as the projection source.
pub fn model_group_test(model: &GanAeModel, windows: &[Vec<f64>], cfg: &GroupTestConfig) -> Result<TestOutcome> {
    if windows.is_empty() || cfg.samples == 0 {
        return domain("group test needs at least one window and one sample");
    }
    let mut rng = RandomStream::new(cfg.seed);
    let mut idx: Vec<usize> = (0..windows.len()).collect();
    rng.shuffle(&mut idx);
    let picked: Vec<Vec<f64>> = idx.iter().cycle().take(cfg.samples).map(|&i| windows[i].clone()).collect();
    let data = model.encode_all(&picked)?;
    let zs = model.sample_prior(windows, cfg.samples, &mut rng)?;
    let generated = zs
        .iter()
        .map(|z| model.encode(&model.generate(z)?))
        .collect::<Result<Vec<_>>>()?;
    let a = descriptors(&data, cfg.mode)?;
    let b = descriptors(&generated, cfg.mode)?;
    two_sample_test(&a, &b, cfg.alpha, cfg.rule)
}
