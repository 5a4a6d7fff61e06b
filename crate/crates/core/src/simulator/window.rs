use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::dataset::{Dataset, Label};

/// Per-channel min/max over normal records, channel order `u0.., y0..`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalization {
    /// Statistics over the normal records of `raw` only.
    pub fn fit(raw: &Dataset) -> Result<Self> {
        let c = raw.channels();
        let mut min = vec![f64::INFINITY; c];
        let mut max = vec![f64::NEG_INFINITY; c];
        let mut seen = false;
        for r in raw.records.iter().filter(|r| r.label.is_normal()) {
            seen = true;
            for (i, &v) in r.u.iter().chain(&r.y).enumerate() {
                min[i] = min[i].min(v);
                max[i] = max[i].max(v);
            }
        }
        if !seen {
            return Err(Error::Domain(
                "normalization needs at least one normal record".into(),
            ));
        }
        Ok(Self { min, max })
    }

    pub fn channels(&self) -> usize {
        self.min.len()
    }

    /// Indices of channels with `max == min`.
    pub fn constant_channels(&self) -> Vec<usize> {
        (0..self.channels())
            .filter(|&i| self.max[i] == self.min[i])
            .collect()
    }

    /// Min-max scaling; constant channels map to 0.5. Values outside the
    /// normal range are kept as-is (not clamped).
    #[inline]
    pub fn scale(&self, channel: usize, v: f64) -> f64 {
        let span = self.max[channel] - self.min[channel];
        if span == 0.0 {
            0.5
        } else {
            (v - self.min[channel]) / span
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub length: usize,
    pub stride: usize,
}

/// Flattened, normalized windows of `length` consecutive records, each of
/// dimension `length · (m + q)` laid out record by record.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub spec: WindowSpec,
    pub normalization: Normalization,
    pub windows: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    pub warnings: Vec<String>,
}

impl WindowSet {
    pub fn dim(&self) -> usize {
        self.spec.length * self.normalization.channels()
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn normal_windows(&self) -> Vec<Vec<f64>> {
        self.windows
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| l.is_normal())
            .map(|(w, _)| w.clone())
            .collect()
    }

    /// Keeps windows whose label satisfies `keep`.
    pub fn filter(&self, keep: impl Fn(&Label) -> bool) -> WindowSet {
        let (windows, labels) = self
            .windows
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| keep(l))
            .map(|(w, l)| (w.clone(), l.clone()))
            .unzip();
        WindowSet {
            spec: self.spec,
            normalization: self.normalization.clone(),
            windows,
            labels,
            warnings: self.warnings.clone(),
        }
    }
}

/// Windows `raw` with normalization statistics fitted on its normal records.
pub fn window_normalize(raw: &Dataset, length: usize, stride: usize) -> Result<WindowSet> {
    let norm = Normalization::fit(raw)?;
    window_with(raw, WindowSpec { length, stride }, &norm)
}

/// Windows `raw` using previously fitted statistics.
///
/// A window is labeled normal iff all its records are; otherwise it takes
/// the first fault label it contains.
pub fn window_with(raw: &Dataset, spec: WindowSpec, norm: &Normalization) -> Result<WindowSet> {
    if spec.length == 0 || spec.stride == 0 {
        return Err(Error::Domain("window length and stride must be at least 1".into()));
    }
    if norm.channels() != raw.channels() {
        return Err(Error::Domain(format!(
            "normalization covers {} channels, dataset has {}",
            norm.channels(),
            raw.channels()
        )));
    }
    if raw.len() < spec.length {
        return Err(Error::Domain(format!(
            "dataset has {} records, fewer than the window length {}",
            raw.len(),
            spec.length
        )));
    }
    let warnings: Vec<String> = norm
        .constant_channels()
        .into_iter()
        .map(|c| format!("channel {c} is constant on normal data; mapped to 0.5"))
        .collect();
    for w in &warnings {
        log::warn!("{w}");
    }

    let mut windows = Vec::new();
    let mut labels = Vec::new();
    let mut start = 0;
    while start + spec.length <= raw.len() {
        let slice = &raw.records[start..start + spec.length];
        let mut flat = Vec::with_capacity(spec.length * raw.channels());
        for r in slice {
            flat.extend(
                r.u.iter()
                    .chain(&r.y)
                    .enumerate()
                    .map(|(c, &v)| norm.scale(c, v)),
            );
        }
        let label = slice
            .iter()
            .find(|r| !r.label.is_normal())
            .map_or(Label::Normal, |r| r.label.clone());
        windows.push(flat);
        labels.push(label);
        start += spec.stride;
    }
    Ok(WindowSet {
        spec,
        normalization: norm.clone(),
        windows,
        labels,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::dataset::Record;

    fn rec(t: f64, u: f64, y: f64, label: Label) -> Record {
        Record {
            t,
            u: vec![u],
            y: vec![y],
            label,
        }
    }

    #[test]
    fn single_record_windows() {
        let ds = Dataset::new(
            1,
            1,
            vec![
                rec(0.0, 10.0, 1.0, Label::Normal),
                rec(1.0, 20.0, 3.0, Label::Normal),
                rec(2.0, 30.0, 2.0, Label::Normal),
            ],
        )
        .unwrap();
        let ws = window_normalize(&ds, 1, 1).unwrap();
        assert_eq!(ws.len(), 3);
        assert_eq!(ws.windows[1], vec![0.5, 1.0]);
        assert!(ws.windows.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn labels_and_layout() {
        let f = Label::Fault("x".into());
        let ds = Dataset::new(
            1,
            1,
            vec![
                rec(0.0, 0.0, 0.0, Label::Normal),
                rec(1.0, 1.0, 2.0, Label::Normal),
                rec(2.0, 2.0, 4.0, f.clone()),
                rec(3.0, 0.5, 1.0, Label::Normal),
            ],
        )
        .unwrap();
        let ws = window_normalize(&ds, 2, 1).unwrap();
        assert_eq!(ws.dim(), 4);
        assert_eq!(ws.labels, vec![Label::Normal, f.clone(), f]);
        assert_eq!(ws.windows[0], vec![0.0, 0.0, 1.0, 1.0]);
        // the faulty record exceeds the normal range and is not clamped
        assert_eq!(ws.windows[1], vec![1.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn constant_channel_warns() {
        let ds = Dataset::new(
            1,
            1,
            vec![rec(0.0, 5.0, 1.0, Label::Normal), rec(1.0, 5.0, 2.0, Label::Normal)],
        )
        .unwrap();
        let ws = window_normalize(&ds, 1, 1).unwrap();
        assert_eq!(ws.windows[0][0], 0.5);
        assert_eq!(ws.warnings.len(), 1);
    }

    #[test]
    fn too_short_rejected() {
        let ds = Dataset::new(1, 1, vec![rec(0.0, 1.0, 1.0, Label::Normal)]).unwrap();
        assert!(window_normalize(&ds, 2, 1).is_err());
        assert!(window_normalize(&ds, 1, 0).is_err());
    }
}
