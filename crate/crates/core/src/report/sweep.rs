use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::ganae::{train, TrainConfig};
use crate::report::{evaluate, RateConvention};
use crate::simulator::WindowSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub fault_tpr: Option<f64>,
    pub normal_tpr: Option<f64>,
    pub first_test_recon: Option<f64>,
    pub final_test_recon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub dim: usize,
    pub mean_fault_tpr: Option<f64>,
    pub mean_normal_tpr: Option<f64>,
    pub mean_final_test_recon: Option<f64>,
    pub seeds: Vec<SeedOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn is_nondecreasing_fault_tpr(&self) -> bool {
        let v: Vec<Option<f64>> = self.rows.iter().map(|r| r.mean_fault_tpr).collect();
        v.windows(2).all(|w| matches!(w, [Some(a), Some(b)] if b >= a))
    }
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.collect::<Option<Vec<f64>>>()?;
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Trains one pipeline per `(dim, seed)` on `normal` and scores it on
/// `test`; rows follow `dims`, seeds follow `seeds`.
pub fn encoding_dim_sweep(
    normal: &[Vec<f64>],
    test: &WindowSet,
    dims: &[usize],
    base: &TrainConfig,
    seeds: &[u64],
) -> Result<SweepTable> {
    if dims.is_empty() || seeds.is_empty() {
        return domain("sweep needs at least one dimension and one seed");
    }
    let d = normal.first().map_or(0, Vec::len);
    if let Some(&bad) = dims.iter().find(|&&k| k == 0 || k >= d) {
        return domain(format!("encoding dimension {bad} must lie in 1..{d}"));
    }
    let mut rows = Vec::with_capacity(dims.len());
    for &dim in dims {
        let mut outcomes = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let annotate = |e: Error| Error::Training(format!("sweep dim {dim}, seed {seed}: {e}"));
            let cfg = TrainConfig {
                encoding_dim: Some(dim),
                seed,
                ..base.clone()
            };
            let trained = train(&cfg, normal).map_err(annotate)?;
            let model = &trained.model;
            let report = evaluate("sweep", test, RateConvention::Empirical, |x| Ok(model.detect(x)?.0))
                .map_err(annotate)?;
            log::info!(
                "sweep dim={dim} seed={seed}: fault TPR {:?}, normal TPR {:?}",
                report.fault_detection_rate(),
                report.normal_pass_rate()
            );
            outcomes.push(SeedOutcome {
                seed,
                fault_tpr: report.fault_detection_rate(),
                normal_tpr: report.normal_pass_rate(),
                first_test_recon: trained.trace.first().and_then(|e| e.test_recon),
                final_test_recon: trained.trace.last().and_then(|e| e.test_recon),
            });
        }
        rows.push(SweepRow {
            dim,
            mean_fault_tpr: mean(outcomes.iter().map(|o| o.fault_tpr)),
            mean_normal_tpr: mean(outcomes.iter().map(|o| o.normal_tpr)),
            mean_final_test_recon: mean(outcomes.iter().map(|o| o.final_test_recon)),
            seeds: outcomes,
        });
    }
    Ok(SweepTable { rows })
}
