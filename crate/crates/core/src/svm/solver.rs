//! Two-variable decomposition for the ν-SVC dual
//!
//! ```text
//! min ½ aᵀQa   s.t.  0 ≤ a_i ≤ 1,  Σ_{c_i=+1} a_i = Σ_{c_i=−1} a_i = νℓ/2
//! ```
//!
//! with `Q_ij = c_i c_j k(x_i, x_j)`. Both working-set members always share
//! a class, so each class sum (and hence `Σ a_i c_i`) is preserved by every
//! update. Selection uses second-order gain.

use crate::error::{Error, Result};
use crate::svm::kernel::KernelSpec;

const TAU: f64 = 1e-12;
/// Above this many entries the kernel matrix is not stored.
const FULL_GRAM_LIMIT: usize = 16_000_000;

pub(crate) struct Gram<'a> {
    xs: &'a [Vec<f64>],
    spec: KernelSpec,
    full: Option<Vec<f64>>,
    diag: Vec<f64>,
}

impl<'a> Gram<'a> {
    pub fn new(xs: &'a [Vec<f64>], spec: KernelSpec) -> Self {
        let n = xs.len();
        let diag = xs.iter().map(|x| spec.eval_raw(x, x)).collect();
        let full = (n * n <= FULL_GRAM_LIMIT).then(|| {
            let mut k = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = spec.eval_raw(&xs[i], &xs[j]);
                    k[i * n + j] = v;
                    k[j * n + i] = v;
                }
            }
            k
        });
        Self { xs, spec, full, diag }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.diag[i]
    }

    /// Row `i` of the kernel matrix.
    pub fn row(&self, i: usize) -> std::borrow::Cow<'_, [f64]> {
        let n = self.len();
        match &self.full {
            Some(k) => std::borrow::Cow::Borrowed(&k[i * n..(i + 1) * n]),
            None => std::borrow::Cow::Owned(self.xs.iter().map(|x| self.spec.eval_raw(&self.xs[i], x)).collect()),
        }
    }
}

pub(crate) struct NuSolution {
    pub alpha: Vec<f64>,
    /// Bias `ρ = (r₊ − r₋)/2`; the decision is `Σ a_i c_i k(x_i, x) − ρ`.
    pub rho: f64,
    /// Margin `r = (r₊ + r₋)/2`.
    pub r: f64,
    pub iterations: usize,
    /// Maximal violating-pair gap at exit.
    pub gap: f64,
}

/// `y` holds ±1. The caller checks feasibility of `ν`.
pub(crate) fn solve_nu(gram: &Gram<'_>, y: &[f64], nu: f64, eps: f64, max_iter: usize) -> Result<NuSolution> {
    let n = gram.len();
    let upper = 1.0;
    let mut alpha = vec![0.0; n];
    let mut sum_pos = nu * n as f64 / 2.0;
    let mut sum_neg = sum_pos;
    for i in 0..n {
        let budget = if y[i] > 0.0 { &mut sum_pos } else { &mut sum_neg };
        alpha[i] = budget.min(upper);
        *budget -= alpha[i];
    }

    // G = Q a
    let mut grad = vec![0.0; n];
    for j in 0..n {
        if alpha[j] != 0.0 {
            let row = gram.row(j);
            for i in 0..n {
                grad[i] += y[i] * y[j] * row[i] * alpha[j];
            }
        }
    }

    let is_upper = |a: f64| a >= upper;
    let is_lower = |a: f64| a <= 0.0;
    let mut iterations = 0;
    let mut gap;
    loop {
        // first member: maximal violation within each class
        let (mut gmaxp, mut ip) = (f64::NEG_INFINITY, None);
        let (mut gmaxn, mut inn) = (f64::NEG_INFINITY, None);
        for t in 0..n {
            if y[t] > 0.0 {
                if !is_upper(alpha[t]) && -grad[t] >= gmaxp {
                    gmaxp = -grad[t];
                    ip = Some(t);
                }
            } else if !is_lower(alpha[t]) && grad[t] >= gmaxn {
                gmaxn = grad[t];
                inn = Some(t);
            }
        }
        let row_p = ip.map(|i| gram.row(i));
        let row_n = inn.map(|i| gram.row(i));
        let (mut gmaxp2, mut gmaxn2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut best: Option<usize> = None;
        let mut best_obj = f64::INFINITY;
        for j in 0..n {
            if y[j] > 0.0 {
                if !is_lower(alpha[j]) {
                    gmaxp2 = gmaxp2.max(grad[j]);
                    if let (Some(i), Some(row)) = (ip, &row_p) {
                        let diff = gmaxp + grad[j];
                        if diff > 0.0 {
                            let quad = gram.diag(i) + gram.diag(j) - 2.0 * row[j];
                            let obj = -(diff * diff) / quad.max(TAU);
                            if obj <= best_obj {
                                best = Some(j);
                                best_obj = obj;
                            }
                        }
                    }
                }
            } else if !is_upper(alpha[j]) {
                gmaxn2 = gmaxn2.max(-grad[j]);
                if let (Some(i), Some(row)) = (inn, &row_n) {
                    let diff = gmaxn - grad[j];
                    if diff > 0.0 {
                        let quad = gram.diag(i) + gram.diag(j) - 2.0 * row[j];
                        let obj = -(diff * diff) / quad.max(TAU);
                        if obj <= best_obj {
                            best = Some(j);
                            best_obj = obj;
                        }
                    }
                }
            }
        }
        gap = (gmaxp + gmaxp2).max(gmaxn + gmaxn2);
        let Some(j) = best else { break };
        if gap < eps {
            break;
        }
        if iterations >= max_iter {
            return Err(Error::Solver(format!(
                "nu-SVC did not converge in {max_iter} iterations (violation {gap:.3e})"
            )));
        }
        iterations += 1;
        let i = if y[j] > 0.0 { ip } else { inn }.expect("violating pair has a first member");
        drop(row_p);
        drop(row_n);

        let qi = gram.row(i);
        let qj = gram.row(j);
        let quad = (gram.diag(i) + gram.diag(j) - 2.0 * qi[j]).max(TAU);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let delta = (grad[i] - grad[j]) / quad;
        let sum = old_i + old_j;
        let mut ai = old_i - delta;
        let mut aj = old_j + delta;
        if sum > upper {
            if ai > upper {
                ai = upper;
                aj = sum - upper;
            }
        } else if aj < 0.0 {
            aj = 0.0;
            ai = sum;
        }
        if sum > upper {
            if aj > upper {
                aj = upper;
                ai = sum - upper;
            }
        } else if ai < 0.0 {
            ai = 0.0;
            aj = sum;
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (dai, daj) = (ai - old_i, aj - old_j);
        for k in 0..n {
            grad[k] += y[k] * (y[i] * qi[k] * dai + y[j] * qj[k] * daj);
        }
    }

    let (rho, r) = nu_rho(&alpha, &grad, y, upper);
    Ok(NuSolution {
        alpha,
        rho,
        r,
        iterations,
        gap,
    })
}

/// Per-class offsets from free variables, or the midpoint of the bound
/// interval when a class has none.
fn nu_rho(alpha: &[f64], grad: &[f64], y: &[f64], upper: f64) -> (f64, f64) {
    let mut acc = [(0usize, 0.0f64, f64::INFINITY, f64::NEG_INFINITY); 2];
    for i in 0..alpha.len() {
        let c = &mut acc[usize::from(y[i] < 0.0)];
        if alpha[i] >= upper {
            c.3 = c.3.max(grad[i]);
        } else if alpha[i] <= 0.0 {
            c.2 = c.2.min(grad[i]);
        } else {
            c.0 += 1;
            c.1 += grad[i];
        }
    }
    let r_of = |(free, sum, ub, lb): (usize, f64, f64, f64)| {
        if free > 0 {
            sum / free as f64
        } else if ub.is_finite() && lb.is_finite() {
            (ub + lb) / 2.0
        } else if ub.is_finite() {
            ub
        } else {
            lb
        }
    };
    let r1 = r_of(acc[0]);
    let r2 = r_of(acc[1]);
    ((r1 - r2) / 2.0, (r1 + r2) / 2.0)
}
