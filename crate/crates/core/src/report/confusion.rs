use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::simulator::Label;

/// How aggregate rates weigh the two classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateConvention {
    /// Ratios of the raw counts.
    #[default]
    Empirical,
    /// ACC, PPV, NPV, FDR and FOR as if both classes were equally frequent,
    /// i.e. computed from TPR and TNR alone.
    EqualPriors,
}

impl FromStr for RateConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "empirical" => Ok(Self::Empirical),
            "equal-priors" => Ok(Self::EqualPriors),
            _ => domain(format!("unknown rate convention '{s}' (expected empirical or equal-priors)")),
        }
    }
}

impl fmt::Display for RateConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Empirical => "empirical",
            Self::EqualPriors => "equal-priors",
        })
    }
}

/// 2×2 counts with normal as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    /// Normal predicted normal.
    pub tp: u64,
    /// Normal predicted fault.
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// Fault predicted normal.
    pub fp: u64,
    /// Fault predicted fault.
    pub tn: u64,
}

/// Derived rates as fractions; `None` where the denominator is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub acc: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
    pub fdr: Option<f64>,
    #[serde(rename = "for")]
    pub for_: Option<f64>,
}

impl Rates {
    pub fn named(&self) -> [(&'static str, Option<f64>); 9] {
        [
            ("TPR", self.tpr),
            ("TNR", self.tnr),
            ("FPR", self.fpr),
            ("FNR", self.fnr),
            ("ACC", self.acc),
            ("PPV", self.ppv),
            ("NPV", self.npv),
            ("FDR", self.fdr),
            ("FOR", self.for_),
        ]
    }
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b > 0.0).then(|| a / b)
}

fn complement(p: Option<f64>) -> Option<f64> {
    p.map(|v| 1.0 - v)
}

impl Confusion {
    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.fp + self.tn
    }

    pub fn total(&self) -> u64 {
        self.positives() + self.negatives()
    }

    pub fn record(&mut self, truth_normal: bool, predicted_normal: bool) {
        match (truth_normal, predicted_normal) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn from_flags(truth_normal: &[bool], predicted_normal: &[bool]) -> Result<Self> {
        if truth_normal.len() != predicted_normal.len() {
            return domain(format!(
                "{} truth labels but {} predictions",
                truth_normal.len(),
                predicted_normal.len()
            ));
        }
        let mut c = Self::default();
        for (&t, &p) in truth_normal.iter().zip(predicted_normal) {
            c.record(t, p);
        }
        Ok(c)
    }

    /// Counts that reproduce given class-conditional rates on `per_class`
    /// samples per class (rounded to whole counts).
    pub fn from_rates(tpr: f64, tnr: f64, per_class: u64) -> Self {
        let tp = (tpr * per_class as f64).round() as u64;
        let tn = (tnr * per_class as f64).round() as u64;
        Self {
            tp,
            fn_: per_class - tp,
            fp: per_class - tn,
            tn,
        }
    }

    pub fn rates(&self, convention: RateConvention) -> Rates {
        let (tp, fn_, fp, tn) = (self.tp as f64, self.fn_ as f64, self.fp as f64, self.tn as f64);
        let tpr = ratio(tp, tp + fn_);
        let tnr = ratio(tn, tn + fp);
        let fnr = complement(tpr);
        let fpr = complement(tnr);
        let (acc, ppv, npv) = match convention {
            RateConvention::Empirical => (
                ratio(tp + tn, tp + tn + fp + fn_),
                ratio(tp, tp + fp),
                ratio(tn, tn + fn_),
            ),
            RateConvention::EqualPriors => match (tpr, tnr) {
                (Some(a), Some(b)) => (
                    Some((a + b) / 2.0),
                    ratio(a, a + (1.0 - b)),
                    ratio(b, b + (1.0 - a)),
                ),
                _ => (None, None, None),
            },
        };
        Rates {
            tpr,
            tnr,
            fpr,
            fnr,
            acc,
            ppv,
            npv,
            fdr: complement(ppv),
            for_: complement(npv),
        }
    }

    /// Row-normalized layout: `[[TPR, FNR], [FPR, TNR]]` in percent, rows by
    /// true class (normal, fault).
    pub fn row_percentages(&self) -> [[Option<f64>; 2]; 2] {
        let r = self.rates(RateConvention::Empirical);
        let pct = |v: Option<f64>| v.map(|x| 100.0 * x);
        [[pct(r.tpr), pct(r.fnr)], [pct(r.fpr), pct(r.tnr)]]
    }
}

/// Detection outcome per true label, e.g. how many `fault:bias_y0` windows
/// were flagged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelTally {
    pub correct: u64,
    pub total: u64,
}

impl LabelTally {
    pub fn rate(&self) -> Option<f64> {
        ratio(self.correct as f64, self.total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub name: String,
    pub counts: Confusion,
    pub convention: RateConvention,
    pub rates: Rates,
    pub per_label: BTreeMap<String, LabelTally>,
}

impl ConfusionReport {
    pub fn new(name: impl Into<String>, counts: Confusion, convention: RateConvention) -> Self {
        Self {
            name: name.into(),
            counts,
            convention,
            rates: counts.rates(convention),
            per_label: BTreeMap::new(),
        }
    }

    /// Recomputes `rates` after changing counts or convention.
    pub fn refresh(&mut self) {
        self.rates = self.counts.rates(self.convention);
    }

    /// Fraction of faulty windows flagged as faults.
    pub fn fault_detection_rate(&self) -> Option<f64> {
        self.rates.tnr
    }

    /// Fraction of normal windows passed as normal.
    pub fn normal_pass_rate(&self) -> Option<f64> {
        self.rates.tpr
    }
}

/// Tallies true labels against predictions; any fault label predicts fault.
pub fn confusion_from_predictions(
    name: &str,
    truth: &[Label],
    predicted: &[Label],
    convention: RateConvention,
) -> Result<ConfusionReport> {
    if truth.len() != predicted.len() {
        return domain(format!("{} truth labels but {} predictions", truth.len(), predicted.len()));
    }
    for l in truth.iter().chain(predicted) {
        l.validate()?;
    }
    let mut counts = Confusion::default();
    let mut per_label: BTreeMap<String, LabelTally> = BTreeMap::new();
    for (t, p) in truth.iter().zip(predicted) {
        counts.record(t.is_normal(), p.is_normal());
        let e = per_label.entry(t.to_string()).or_default();
        e.total += 1;
        if t.is_normal() == p.is_normal() {
            e.correct += 1;
        }
    }
    let mut report = ConfusionReport::new(name, counts, convention);
    report.per_label = per_label;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(s: &str) -> Vec<Label> {
        s.chars()
            .map(|c| if c == 'N' { Label::Normal } else { Label::Fault("x".into()) })
            .collect()
    }

    #[test]
    fn hand_tally() {
        let r = confusion_from_predictions("t", &labels("NNNFF"), &labels("NNFFF"), RateConvention::Empirical).unwrap();
        assert_eq!(r.counts, Confusion { tp: 2, fn_: 1, fp: 0, tn: 2 });
        assert!((r.rates.tpr.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.rates.tnr, Some(1.0));
        assert_eq!(r.per_label["normal"], LabelTally { correct: 2, total: 3 });
        assert_eq!(r.per_label["fault:x"], LabelTally { correct: 2, total: 2 });
    }

    #[test]
    fn all_correct() {
        let t = labels("NNNNNFFFFF");
        let r = confusion_from_predictions("t", &t, &t, RateConvention::Empirical).unwrap();
        assert_eq!((r.rates.tpr, r.rates.tnr, r.rates.acc), (Some(1.0), Some(1.0), Some(1.0)));
    }

    #[test]
    fn empty_denominators_are_undefined() {
        let r = Confusion { tp: 3, fn_: 0, fp: 0, tn: 0 }.rates(RateConvention::Empirical);
        assert_eq!(r.tnr, None);
        assert_eq!(r.fpr, None);
        assert_eq!(r.npv, None);
        assert_eq!(r.for_, None);
        assert_eq!(r.ppv, Some(1.0));
        assert!(Confusion::default().rates(RateConvention::EqualPriors).acc.is_none());
    }

    #[test]
    fn length_mismatch() {
        assert!(confusion_from_predictions("t", &labels("NN"), &labels("N"), RateConvention::Empirical).is_err());
        assert!(Confusion::from_flags(&[true], &[]).is_err());
    }

    #[test]
    fn conventions_agree_on_balanced_counts() {
        let c = Confusion::from_rates(0.923, 0.728, 10_000);
        let a = c.rates(RateConvention::Empirical);
        let b = c.rates(RateConvention::EqualPriors);
        for ((_, x), (_, y)) in a.named().iter().zip(b.named().iter()) {
            assert!((x.unwrap() - y.unwrap()).abs() < 1e-12);
        }
    }
}
