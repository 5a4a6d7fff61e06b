//! The optimal discriminator for fixed data and noise distributions, and a
//! tabular discriminator trained by ascent on `V`'s discriminator terms.

use crate::error::{domain, Result};
use crate::neural::sigmoid;

fn check(p_data: &[f64], p_noise: &[f64]) -> Result<()> {
    if p_data.len() != p_noise.len() || p_data.is_empty() {
        return domain("distributions must share a nonempty support");
    }
    if p_data.iter().chain(p_noise).any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return domain("probabilities must be finite and nonnegative");
    }
    Ok(())
}

/// `D*(x) = p_data(x) / (p_data(x) + p_noise(x))` on each support point.
pub fn optimal_discriminator(p_data: &[f64], p_noise: &[f64]) -> Result<Vec<f64>> {
    check(p_data, p_noise)?;
    p_data
        .iter()
        .zip(p_noise)
        .enumerate()
        .map(|(i, (&a, &b))| {
            if a + b == 0.0 {
                domain(format!("support point {i} has zero mass under both distributions"))
            } else {
                Ok(a / (a + b))
            }
        })
        .collect()
}

/// `Σ p_data log D + Σ p_noise log(1 − D)`, the part of `V` that depends on
/// `D` when the encoder and generator are frozen.
pub fn discriminator_objective(p_data: &[f64], p_noise: &[f64], d: &[f64]) -> f64 {
    p_data
        .iter()
        .zip(p_noise)
        .zip(d)
        .map(|((&a, &b), &di)| {
            let mut v = 0.0;
            if a > 0.0 {
                v += a * di.ln();
            }
            if b > 0.0 {
                v += b * (1.0 - di).ln();
            }
            v
        })
        .sum()
}

/// A discriminator with one free logit per support point, trained by Adam
/// ascent on the exact expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDiscriminator {
    pub logits: Vec<f64>,
}

impl TabularDiscriminator {
    pub fn new(points: usize) -> Self {
        Self {
            logits: vec![0.0; points],
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.logits.iter().map(|&l| sigmoid(l)).collect()
    }

    /// Runs `steps` ascent steps; returns the final objective.
    pub fn fit(&mut self, p_data: &[f64], p_noise: &[f64], steps: usize, lr: f64) -> Result<f64> {
        check(p_data, p_noise)?;
        if p_data.len() != self.logits.len() {
            return domain("support size does not match the table");
        }
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let n = self.logits.len();
        let mut m = vec![0.0; n];
        let mut v = vec![0.0; n];
        for t in 1..=steps {
            for i in 0..n {
                // d/dl [a log σ(l) + b log(1 − σ(l))] = a(1 − σ) − bσ
                let s = sigmoid(self.logits[i]);
                let g = p_data[i] * (1.0 - s) - p_noise[i] * s;
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                let mh = m[i] / (1.0 - b1.powi(t as i32));
                let vh = v[i] / (1.0 - b2.powi(t as i32));
                self.logits[i] += lr * mh / (vh.sqrt() + eps);
            }
        }
        Ok(discriminator_objective(p_data, p_noise, &self.values()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_cases() {
        let d = optimal_discriminator(&[0.3, 0.8, 0.5], &[0.3, 0.2, 0.0]).unwrap();
        assert_eq!(d[0], 0.5);
        assert!((d[1] - 0.8).abs() < 1e-15);
        assert_eq!(d[2], 1.0);
        assert!(optimal_discriminator(&[0.0, 1.0], &[0.0, 1.0]).is_err());
        assert!(optimal_discriminator(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn optimum_beats_perturbations() {
        let pd = [0.1, 0.4, 0.5];
        let pn = [0.6, 0.3, 0.1];
        let star = optimal_discriminator(&pd, &pn).unwrap();
        let best = discriminator_objective(&pd, &pn, &star);
        for i in 0..3 {
            for delta in [-0.05, 0.05] {
                let mut d = star.clone();
                d[i] += delta;
                assert!(discriminator_objective(&pd, &pn, &d) < best);
            }
        }
    }
}
