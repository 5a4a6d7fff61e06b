use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::RandomStream;
use crate::svm::{nu_upper_bound, train_nu_svc, KernelSpec, SolverConfig};

pub const DEFAULT_NU_GRID: [f64; 5] = [0.5, 0.6, 0.7, 0.8, 0.9];
const MAX_ATTEMPTS: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuScore {
    pub nu: f64,
    /// Mean held-out accuracy over folds; `None` when ν is infeasible on
    /// some training fold.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best_nu: f64,
    pub best_accuracy: f64,
    pub table: Vec<NuScore>,
    pub folds: usize,
    /// Seed of the fold assignment actually used.
    pub fold_seed: u64,
}

/// Fold index per point: each class is shuffled and dealt round-robin.
pub fn stratified_folds(normal: &[bool], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = RandomStream::new(seed);
    let mut assignment = vec![0; normal.len()];
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..normal.len()).filter(|&i| normal[i] == class).collect();
        rng.shuffle(&mut idx);
        for (k, i) in idx.into_iter().enumerate() {
            assignment[i] = k % folds;
        }
    }
    assignment
}

fn folds_ok(normal: &[bool], assignment: &[usize], folds: usize) -> bool {
    (0..folds).all(|f| {
        let has = |inside: bool, class: bool| {
            assignment
                .iter()
                .zip(normal)
                .any(|(&a, &n)| (a == f) == inside && n == class)
        };
        has(true, true) && has(true, false) && has(false, true) && has(false, false)
    })
}

/// Stratified k-fold accuracy for each ν in `grid`; ties go to the smaller ν.
pub fn cross_validate_nu(
    xs: &[Vec<f64>],
    normal: &[bool],
    kernel: KernelSpec,
    grid: &[f64],
    folds: usize,
    seed: u64,
    solver: &SolverConfig,
) -> Result<CvResult> {
    if folds < 2 {
        return domain("cross-validation needs at least 2 folds");
    }
    if grid.is_empty() {
        return domain("nu grid is empty");
    }
    if xs.len() != normal.len() {
        return domain("points and labels differ in length");
    }
    let mut found = None;
    for attempt in 0..MAX_ATTEMPTS {
        let fold_seed = seed.wrapping_add(attempt);
        let a = stratified_folds(normal, folds, fold_seed);
        if folds_ok(normal, &a, folds) {
            found = Some((fold_seed, a));
            break;
        }
    }
    let Some((fold_seed, assignment)) = found else {
        return Err(Error::Domain(format!(
            "could not build {folds} folds with both classes on each side after {MAX_ATTEMPTS} attempts"
        )));
    };

    let mut table = Vec::with_capacity(grid.len());
    for &nu in grid {
        let mut total = 0.0;
        let mut feasible = true;
        for f in 0..folds {
            let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for i in 0..xs.len() {
                if assignment[i] == f {
                    vx.push(xs[i].clone());
                    vy.push(normal[i]);
                } else {
                    tx.push(xs[i].clone());
                    ty.push(normal[i]);
                }
            }
            if nu > nu_upper_bound(&ty) {
                feasible = false;
                break;
            }
            let model = train_nu_svc(&tx, &ty, kernel, nu, solver)?;
            let mut correct = 0usize;
            for (x, &n) in vx.iter().zip(&vy) {
                if model.predict(x)?.0 == n {
                    correct += 1;
                }
            }
            total += correct as f64 / vx.len() as f64;
        }
        table.push(NuScore {
            nu,
            accuracy: feasible.then(|| total / folds as f64),
        });
    }
    let mut best: Option<(f64, f64)> = None;
    for s in &table {
        if let Some(acc) = s.accuracy {
            let better = match best {
                None => true,
                Some((bn, ba)) => acc > ba || (acc == ba && s.nu < bn),
            };
            if better {
                best = Some((s.nu, acc));
            }
        }
    }
    let Some((best_nu, best_accuracy)) = best else {
        return domain("no nu in the grid is feasible for these class proportions");
    };
    Ok(CvResult {
        best_nu,
        best_accuracy,
        table,
        folds,
        fold_seed,
    })
}
