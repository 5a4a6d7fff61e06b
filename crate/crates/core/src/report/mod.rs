//! Confusion accounting with normal as the positive class, the
//! encoding-dimension sweep, and text / JSON / SVG rendering.

mod confusion;
mod render;
mod sweep;

pub use confusion::{
    confusion_from_predictions, Confusion, ConfusionReport, LabelTally, RateConvention, Rates,
};
pub use render::{render_reports, render_sweep, ReportFormat, REPORTS_KIND, SWEEP_KIND};
pub use sweep::{encoding_dim_sweep, SeedOutcome, SweepRow, SweepTable};

use crate::error::Result;
use crate::simulator::{Label, WindowSet};

/// Runs `is_normal` over every window and tallies against the labels.
pub fn evaluate(
    name: &str,
    windows: &WindowSet,
    convention: RateConvention,
    mut is_normal: impl FnMut(&[f64]) -> Result<bool>,
) -> Result<ConfusionReport> {
    let predicted = windows
        .windows
        .iter()
        .map(|x| {
            Ok(if is_normal(x)? {
                Label::Normal
            } else {
                Label::Fault("detected".into())
            })
        })
        .collect::<Result<Vec<_>>>()?;
    confusion_from_predictions(name, &windows.labels, &predicted, convention)
}
