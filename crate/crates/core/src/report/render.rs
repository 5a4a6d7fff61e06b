use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::report::{ConfusionReport, SweepTable};

pub const REPORTS_KIND: &str = "confusion-reports";
pub const SWEEP_KIND: &str = "sweep-table";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Text,
    /// Versioned JSON document.
    Structured,
    Svg,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Self::Text),
            "structured" | "json" => Ok(Self::Structured),
            "svg" => Ok(Self::Svg),
            _ => domain(format!("unknown report format '{s}' (expected text, structured or svg)")),
        }
    }
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{:.2}%", 100.0 * x))
}

fn pct_cell(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.2}%"))
}

fn text_report(out: &mut String, r: &ConfusionReport) {
    let c = r.counts;
    let rows = c.row_percentages();
    let _ = writeln!(out, "== {} (aggregate rates: {})", r.name, r.convention);
    let _ = writeln!(out, "{:<14}{:>16}{:>16}", "", "pred normal", "pred fault");
    let _ = writeln!(out, "{:<14}{:>16}{:>16}", "true normal", pct_cell(rows[0][0]), pct_cell(rows[0][1]));
    let _ = writeln!(out, "{:<14}{:>16}{:>16}", "true fault", pct_cell(rows[1][0]), pct_cell(rows[1][1]));
    let _ = writeln!(out, "counts: TP={} FN={} FP={} TN={}", c.tp, c.fn_, c.fp, c.tn);
    for (name, v) in r.rates.named() {
        let _ = writeln!(out, "{name:<4}{:>12}", pct(v));
    }
    if !r.per_label.is_empty() {
        let _ = writeln!(out, "per true label (correctly classified):");
        for (label, t) in &r.per_label {
            let _ = writeln!(out, "  {label:<24}{:>7}/{:<7}{:>10}", t.correct, t.total, pct(t.rate()));
        }
    }
}

pub fn render_reports(reports: &[ConfusionReport], format: ReportFormat) -> Result<String> {
    if reports.is_empty() {
        return domain("nothing to render");
    }
    match format {
        ReportFormat::Text => {
            let mut out = String::new();
            for (i, r) in reports.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                text_report(&mut out, r);
            }
            Ok(out)
        }
        ReportFormat::Structured => crate::artifact::to_string(REPORTS_KIND, &reports),
        ReportFormat::Svg => domain("svg output is available for sweep tables only"),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.6}"))
}

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 48.0;

fn svg_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn sweep_svg(table: &SweepTable) -> String {
    let metrics: [(&str, &str, Vec<Option<f64>>); 3] = [
        ("mean fault TPR", "#c0392b", table.rows.iter().map(|r| r.mean_fault_tpr).collect()),
        ("mean normal TPR", "#2471a3", table.rows.iter().map(|r| r.mean_normal_tpr).collect()),
        ("mean test reconstruction", "#7d7d7d", table.rows.iter().map(|r| r.mean_final_test_recon).collect()),
    ];
    let y_max = metrics
        .iter()
        .flat_map(|(_, _, v)| v.iter().flatten())
        .fold(1.0f64, |a, &b| a.max(b));
    let n = table.rows.len();
    let x_of = |i: usize| {
        if n == 1 {
            WIDTH / 2.0
        } else {
            MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / (n - 1) as f64
        }
    };
    let y_of = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * v / y_max;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"  <title>Detection rates by encoding dimension</title>"#);
    let (x0, y0) = (MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(s, r#"  <line x1="{x0}" y1="{y0}" x2="{}" y2="{y0}" stroke="black"/>"#, WIDTH - MARGIN);
    let _ = writeln!(s, r#"  <line x1="{x0}" y1="{y0}" x2="{x0}" y2="{MARGIN}" stroke="black"/>"#);
    for (i, row) in table.rows.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"  <text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
            x_of(i),
            y0 + 16.0,
            row.dim
        );
    }
    let _ = writeln!(
        s,
        r#"  <text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">encoding dimension</text>"#,
        WIDTH / 2.0,
        HEIGHT - 8.0
    );
    let _ = writeln!(s, r#"  <text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{y_max:.2}</text>"#, x0 - 4.0, MARGIN + 4.0);
    let _ = writeln!(s, r#"  <text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">0</text>"#, x0 - 4.0, y0 + 4.0);
    for (k, (name, color, values)) in metrics.iter().enumerate() {
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| format!("{:.2},{:.2}", x_of(i), y_of(v))))
            .collect();
        let _ = writeln!(
            s,
            r#"  <polyline fill="none" stroke="{color}" stroke-width="2" points="{}"><title>{}</title></polyline>"#,
            points.join(" "),
            svg_escape(name)
        );
        let _ = writeln!(
            s,
            r#"  <text x="{:.2}" y="{:.2}" font-size="11" fill="{color}">{}</text>"#,
            MARGIN + 8.0,
            MARGIN - 24.0 + 12.0 * k as f64,
            svg_escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn render_sweep(table: &SweepTable, format: ReportFormat) -> Result<String> {
    if table.rows.is_empty() {
        return domain("nothing to render");
    }
    match format {
        ReportFormat::Text => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "{:>6}{:>18}{:>18}{:>22}",
                "dim", "mean fault TPR", "mean normal TPR", "mean test recon"
            );
            for r in &table.rows {
                let _ = writeln!(
                    out,
                    "{:>6}{:>18}{:>18}{:>22}",
                    r.dim,
                    pct(r.mean_fault_tpr),
                    pct(r.mean_normal_tpr),
                    opt(r.mean_final_test_recon)
                );
            }
            Ok(out)
        }
        ReportFormat::Structured => crate::artifact::to_string(SWEEP_KIND, table),
        ReportFormat::Svg => Ok(sweep_svg(table)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::{Confusion, RateConvention, SweepRow};

    fn table() -> SweepTable {
        SweepTable {
            rows: [2usize, 8, 32]
                .iter()
                .enumerate()
                .map(|(i, &dim)| SweepRow {
                    dim,
                    mean_fault_tpr: Some(0.2 * i as f64),
                    mean_normal_tpr: Some(0.9),
                    mean_final_test_recon: Some(0.05),
                    seeds: vec![],
                })
                .collect(),
        }
    }

    #[test]
    fn text_rows_are_row_normalized() {
        let r = ConfusionReport::new("pca", Confusion::from_rates(0.923, 0.728, 10_000), RateConvention::EqualPriors);
        let text = render_reports(&[r], ReportFormat::Text).unwrap();
        let normal_row = text.lines().find(|l| l.starts_with("true normal")).unwrap();
        let fault_row = text.lines().find(|l| l.starts_with("true fault")).unwrap();
        assert!(normal_row.contains("92.30%") && normal_row.contains("7.70%"));
        assert!(fault_row.contains("27.20%") && fault_row.contains("72.80%"));
        assert!(text.contains("ACC       82.55%"));
    }

    #[test]
    fn svg_only_for_sweeps() {
        let r = ConfusionReport::new("x", Confusion::default(), RateConvention::Empirical);
        assert!(render_reports(&[r], ReportFormat::Svg).is_err());
        assert!(render_reports(&[], ReportFormat::Text).is_err());
        let svg = render_sweep(&table(), ReportFormat::Svg).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!("pdf".parse::<ReportFormat>().is_err());
    }

    #[test]
    fn sweep_text_has_a_row_per_dim() {
        let text = render_sweep(&table(), ReportFormat::Text).unwrap();
        assert_eq!(text.lines().count(), 4);
    }
}
