//! ν-SVM baseline trained on labeled windows.
//!
//! Normal windows are the `+1` class and faulty windows `−1`. The decision
//! value is `f(x) = Σ α_i c_i k(x_i, x) − b` with `0 ≤ α_i ≤ 1/ℓ` and
//! `Σ α_i = ν`; a decision of exactly zero is classified as a fault.

mod cv;
mod kernel;
mod solver;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::simulator::{Normalization, WindowSpec};
use solver::{solve_nu, Gram};

pub use cv::{cross_validate_nu, stratified_folds, CvResult, NuScore, DEFAULT_NU_GRID};
pub use kernel::{kernel_eval, kernel_gradient, KernelSpec};

pub const MODEL_KIND: &str = "svm-model";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stopping tolerance on the maximal violating-pair gap.
    pub eps: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: KernelSpec,
    pub nu: f64,
    /// Training set size ℓ.
    pub n_train: usize,
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i c_i` per support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
    /// Functional margin of the free support vectors; dividing a decision
    /// value by it removes the dependence on ℓ.
    pub margin: f64,
    pub iterations: usize,
    pub normalization: Option<Normalization>,
    pub window: Option<WindowSpec>,
}

/// `2·min(ℓ₊, ℓ₋)/ℓ`, the largest feasible ν.
pub fn nu_upper_bound(normal: &[bool]) -> f64 {
    let pos = normal.iter().filter(|&&n| n).count();
    let neg = normal.len() - pos;
    2.0 * pos.min(neg) as f64 / normal.len().max(1) as f64
}

fn check_inputs(xs: &[Vec<f64>], normal: &[bool]) -> Result<usize> {
    if xs.len() != normal.len() {
        return domain(format!("{} points but {} labels", xs.len(), normal.len()));
    }
    let Some(first) = xs.first() else {
        return domain("training set is empty");
    };
    let d = first.len();
    if xs.iter().any(|x| x.len() != d || x.iter().any(|v| !v.is_finite())) {
        return domain("training points must share one length and be finite");
    }
    Ok(d)
}

fn signs(normal: &[bool]) -> Vec<f64> {
    normal.iter().map(|&n| if n { 1.0 } else { -1.0 }).collect()
}

pub fn train_nu_svc(
    xs: &[Vec<f64>],
    normal: &[bool],
    kernel: KernelSpec,
    nu: f64,
    solver: &SolverConfig,
) -> Result<SvmModel> {
    check_inputs(xs, normal)?;
    kernel.validate()?;
    if !normal.iter().any(|&n| n) || normal.iter().all(|&n| n) {
        return domain("both classes must be present");
    }
    let bound = nu_upper_bound(normal);
    if !(nu > 0.0 && nu < 1.0) {
        return domain(format!("nu must lie in (0, 1), got {nu}"));
    }
    if nu > bound {
        return domain(format!(
            "nu = {nu} is infeasible: it must not exceed 2·min(l+, l-)/l = {bound:.6}"
        ));
    }
    let y = signs(normal);
    let gram = Gram::new(xs, kernel);
    let sol = solve_nu(&gram, &y, nu, solver.eps, solver.max_iter)?;
    log::debug!("nu-SVC: {} iterations, final gap {:.3e}", sol.iterations, sol.gap);
    let l = xs.len() as f64;
    let (mut support_vectors, mut coef) = (Vec::new(), Vec::new());
    for (i, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(xs[i].clone());
            coef.push(a * y[i] / l);
        }
    }
    Ok(SvmModel {
        kernel,
        nu,
        n_train: xs.len(),
        support_vectors,
        coef,
        bias: sol.rho / l,
        margin: sol.r / l,
        iterations: sol.iterations,
        normalization: None,
        window: None,
    })
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return domain(format!("model expects {} features, got {}", self.dim(), x.len()));
        }
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.coef)
            .map(|(sv, c)| c * self.kernel.eval_raw(sv, x))
            .sum::<f64>()
            - self.bias)
    }

    /// Decision value divided by the margin.
    pub fn normalized_decision(&self, x: &[f64]) -> Result<f64> {
        Ok(self.decision_value(x)? / self.margin)
    }

    /// `(is_normal, decision value)`; zero counts as fault.
    pub fn predict(&self, x: &[f64]) -> Result<(bool, f64)> {
        let f = self.decision_value(x)?;
        Ok((f > 0.0, f))
    }

    /// `∂f/∂x`.
    pub fn decision_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; x.len()];
        for (sv, c) in self.support_vectors.iter().zip(&self.coef) {
            for (gi, ki) in g.iter_mut().zip(kernel_gradient(&self.kernel, x, sv)?) {
                *gi += c * ki;
            }
        }
        Ok(g)
    }

    /// `Σ α_i c_i` over the support vectors.
    pub fn coefficient_sum(&self) -> f64 {
        self.coef.iter().sum()
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        crate::artifact::save(path, MODEL_KIND, self)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let m: Self = crate::artifact::load(path, MODEL_KIND)?;
        m.kernel.validate()?;
        if m.coef.len() != m.support_vectors.len() {
            return domain("support vector and coefficient counts differ");
        }
        Ok(m)
    }
}

/// `δ = min_i c_i f(x_i)`, the smallest signed functional margin.
pub fn margin_delta(model: &SvmModel, xs: &[Vec<f64>], normal: &[bool]) -> Result<f64> {
    check_inputs(xs, normal)?;
    xs.iter()
        .zip(normal)
        .map(|(x, &n)| Ok(if n { 1.0 } else { -1.0 } * model.decision_value(x)?))
        .try_fold(f64::INFINITY, |acc, v: Result<f64>| Ok(acc.min(v?)))
}

/// Maximal violating-pair gap of the dual at the model's coefficients,
/// evaluated on its training set (in the solver's unscaled units).
pub fn kkt_violation(model: &SvmModel, xs: &[Vec<f64>], normal: &[bool]) -> Result<f64> {
    check_inputs(xs, normal)?;
    let y = signs(normal);
    let l = xs.len() as f64;
    // recover a_i = ℓ|coef| by matching support vectors in order
    let mut alpha = vec![0.0; xs.len()];
    let mut next = 0;
    for (i, x) in xs.iter().enumerate() {
        if next < model.support_vectors.len() && model.support_vectors[next] == *x {
            alpha[i] = model.coef[next].abs() * l;
            next += 1;
        }
    }
    if next != model.support_vectors.len() {
        return domain("support vectors are not an ordered subset of the training set");
    }
    let grad: Vec<f64> = (0..xs.len())
        .map(|i| {
            (0..xs.len())
                .filter(|&j| alpha[j] != 0.0)
                .map(|j| y[i] * y[j] * model.kernel.eval_raw(&xs[i], &xs[j]) * alpha[j])
                .sum()
        })
        .collect();
    let mut gap = f64::NEG_INFINITY;
    for class in [1.0, -1.0] {
        let mut up = f64::NEG_INFINITY;
        let mut down = f64::NEG_INFINITY;
        for i in (0..xs.len()).filter(|&i| y[i] == class) {
            if alpha[i] < 1.0 {
                up = up.max(-grad[i]);
            }
            if alpha[i] > 0.0 {
                down = down.max(grad[i]);
            }
        }
        gap = gap.max(up + down);
    }
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomStream;

    fn blobs(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = RandomStream::new(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let normal = i % 2 == 0;
            let c = if normal { 1.5 } else { -1.5 };
            xs.push(vec![c + 0.3 * rng.gaussian(), c + 0.3 * rng.gaussian()]);
            ys.push(normal);
        }
        (xs, ys)
    }

    fn xor() -> (Vec<Vec<f64>>, Vec<bool>) {
        (
            vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![true, true, false, false],
        )
    }

    #[test]
    fn separable_blobs() {
        let (xs, ys) = blobs(1, 100);
        let m = train_nu_svc(&xs, &ys, KernelSpec::default(), 0.2, &SolverConfig::default()).unwrap();
        for (x, &n) in xs.iter().zip(&ys) {
            assert_eq!(m.predict(x).unwrap().0, n);
        }
        assert!(margin_delta(&m, &xs, &ys).unwrap() > 0.0);
        assert!(m.coefficient_sum().abs() <= 1e-8);
        assert!(kkt_violation(&m, &xs, &ys).unwrap() <= 1e-3);
        assert!(m.coef.iter().all(|c| c.abs() <= 1.0 / 100.0 + 1e-15));
        let total: f64 = m.coef.iter().map(|c| c.abs()).sum();
        assert!((total - 0.2).abs() < 1e-12);
    }

    #[test]
    fn xor_with_rbf() {
        let (xs, ys) = xor();
        let m = train_nu_svc(&xs, &ys, KernelSpec::default(), 0.1, &SolverConfig::default()).unwrap();
        for (x, &n) in xs.iter().zip(&ys) {
            assert_eq!(m.predict(x).unwrap().0, n);
        }
    }

    #[test]
    fn infeasible_nu_names_bound() {
        let xs = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let ys = vec![true, false, false, false];
        let err = train_nu_svc(&xs, &ys, KernelSpec::default(), 0.6, &SolverConfig::default()).unwrap_err();
        assert!(err.to_string().contains("0.5"), "{err}");
        assert!(train_nu_svc(&xs, &[true; 4], KernelSpec::default(), 0.1, &SolverConfig::default()).is_err());
    }

    #[test]
    fn label_flip_negates_decision() {
        let (xs, ys) = blobs(4, 40);
        let flipped: Vec<bool> = ys.iter().map(|n| !n).collect();
        let cfg = SolverConfig { eps: 1e-10, ..SolverConfig::default() };
        let a = train_nu_svc(&xs, &ys, KernelSpec::default(), 0.3, &cfg).unwrap();
        let b = train_nu_svc(&xs, &flipped, KernelSpec::default(), 0.3, &cfg).unwrap();
        for p in [[0.0, 0.0], [1.0, -0.5], [3.0, 3.0]] {
            let (fa, fb) = (a.decision_value(&p).unwrap(), b.decision_value(&p).unwrap());
            assert!((fa + fb).abs() < 1e-6, "{fa} {fb}");
        }
    }

    #[test]
    fn far_point_takes_bias_sign() {
        let (xs, ys) = blobs(2, 40);
        let m = train_nu_svc(&xs, &ys, KernelSpec::default(), 0.3, &SolverConfig::default()).unwrap();
        let f = m.decision_value(&[100.0, -100.0]).unwrap();
        assert!((f + m.bias).abs() < 1e-12);
    }

    #[test]
    fn zero_decision_is_fault() {
        let m = SvmModel {
            kernel: KernelSpec::default(),
            nu: 0.5,
            n_train: 2,
            support_vectors: vec![vec![0.0]],
            coef: vec![0.0],
            bias: 0.0,
            margin: 1.0,
            iterations: 0,
            normalization: None,
            window: None,
        };
        assert_eq!(m.predict(&[0.0]).unwrap(), (false, 0.0));
        assert!(m.predict(&[0.0, 1.0]).is_err());
    }
}
