use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{dot, squared_distance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    /// `exp(−‖x − y‖² / (2σ²))`
    Rbf { sigma: f64 },
    /// `(scale · x·y + coef0)^degree`
    Polynomial { degree: u32, coef0: f64, scale: f64 },
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::Rbf { sigma: 1.0 }
    }
}

impl KernelSpec {
    pub fn cubic() -> Self {
        KernelSpec::Polynomial {
            degree: 3,
            coef0: 1.0,
            scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                domain(format!("rbf sigma must be positive, got {sigma}"))
            }
            KernelSpec::Polynomial { degree: 0, .. } => domain("polynomial degree must be at least 1"),
            KernelSpec::Polynomial { coef0, scale, .. } if !(coef0.is_finite() && scale.is_finite()) => {
                domain("polynomial coefficients must be finite")
            }
            _ => Ok(()),
        }
    }

    /// Unchecked evaluation for hot loops.
    #[inline]
    pub(crate) fn eval_raw(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Rbf { sigma } => (-squared_distance(x, y) / (2.0 * sigma * sigma)).exp(),
            KernelSpec::Polynomial { degree, coef0, scale } => (scale * dot(x, y) + coef0).powi(degree as i32),
        }
    }
}

/// Accepts `rbf`, `rbf:<sigma>`, `poly`, `poly:<degree>:<coef0>:<scale>`.
impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| -> Result<f64> {
            t.parse()
                .map_err(|_| Error::Domain(format!("invalid number '{t}' in kernel '{s}'")))
        };
        let spec = match parts.as_slice() {
            ["rbf"] => KernelSpec::default(),
            ["rbf", sigma] => KernelSpec::Rbf { sigma: num(sigma)? },
            ["poly"] | ["cubic"] => KernelSpec::cubic(),
            ["poly", degree, coef0, scale] => KernelSpec::Polynomial {
                degree: degree
                    .parse()
                    .map_err(|_| Error::Domain(format!("invalid degree '{degree}'")))?,
                coef0: num(coef0)?,
                scale: num(scale)?,
            },
            _ => return domain(format!("unknown kernel '{s}' (expected rbf[:sigma] or poly[:deg:coef0:scale])")),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Rbf { sigma } => write!(f, "rbf:{sigma}"),
            KernelSpec::Polynomial { degree, coef0, scale } => write!(f, "poly:{degree}:{coef0}:{scale}"),
        }
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return domain(format!("kernel inputs differ in length ({} vs {})", x.len(), y.len()));
    }
    Ok(spec.eval_raw(x, y))
}

/// `∂k(x, y)/∂x`.
pub fn kernel_gradient(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let k = kernel_eval(spec, x, y)?;
    Ok(match *spec {
        KernelSpec::Rbf { sigma } => {
            let s2 = sigma * sigma;
            x.iter().zip(y).map(|(a, b)| -k * (a - b) / s2).collect()
        }
        KernelSpec::Polynomial { degree, coef0, scale } => {
            let base = scale * dot(x, y) + coef0;
            let outer = degree as f64 * base.powi(degree as i32 - 1) * scale;
            y.iter().map(|b| outer * b).collect()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_values() {
        let rbf = KernelSpec::default();
        assert_eq!(kernel_eval(&rbf, &[0.3, 0.1], &[0.3, 0.1]).unwrap(), 1.0);
        let v = kernel_eval(&rbf, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        let p = kernel_eval(&KernelSpec::cubic(), &[1.0, 0.0], &[1.0, 5.0]).unwrap();
        assert_eq!(p, 8.0);
        assert!(kernel_eval(&rbf, &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn parse_and_display() {
        for s in ["rbf:1", "rbf:0.5", "poly:3:1:1", "poly:2:0:0.5"] {
            let k: KernelSpec = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        assert_eq!("rbf".parse::<KernelSpec>().unwrap(), KernelSpec::Rbf { sigma: 1.0 });
        assert!("rbf:-1".parse::<KernelSpec>().is_err());
        assert!("poly:0:1:1".parse::<KernelSpec>().is_err());
        assert!("linear".parse::<KernelSpec>().is_err());
    }
}
