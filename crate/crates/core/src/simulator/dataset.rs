use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Normal,
    Fault(String),
}

impl Label {
    pub fn is_normal(&self) -> bool {
        matches!(self, Label::Normal)
    }

    pub fn validate(&self) -> Result<()> {
        if let Label::Fault(name) = self {
            let ok = !name.is_empty()
                && name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
            if !ok {
                return Err(Error::Domain(format!(
                    "fault name '{name}' must be nonempty ASCII alphanumerics, '_', '-' or '.'"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Normal => f.write_str("normal"),
            Label::Fault(name) => write!(f, "fault:{name}"),
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "normal" {
            return Ok(Label::Normal);
        }
        match s.strip_prefix("fault:") {
            Some(name) => {
                let label = Label::Fault(name.to_string());
                label.validate()?;
                Ok(label)
            }
            None => Err(Error::Domain(format!(
                "label '{s}' is neither 'normal' nor 'fault:<name>'"
            ))),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    /// Seconds since the start of the run.
    pub t: f64,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub label: Label,
}

/// Labeled multichannel time series of measured inputs and outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    m: usize,
    q: usize,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn new(m: usize, q: usize, records: Vec<Record>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if r.u.len() != m || r.y.len() != q {
                return Err(Error::Domain(format!(
                    "record {i} has arity ({}, {}), expected ({m}, {q})",
                    r.u.len(),
                    r.y.len()
                )));
            }
            if !r.t.is_finite() || r.u.iter().chain(&r.y).any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("record {i} has non-finite values")));
            }
            r.label.validate()?;
        }
        Ok(Self { m, q, records })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Channels per record, `m + q`.
    pub fn channels(&self) -> usize {
        self.m + self.q
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend((0..self.m).map(|i| format!("u{i}")));
        h.extend((0..self.q).map(|i| format!("y{i}")));
        h.push("label".into());
        h
    }

    /// Writes `t,u0..,y0..,label` with shortest round-trip float formatting.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(file)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().from_writer(w);
        wtr.write_record(self.header()).map_err(csv_io)?;
        for r in &self.records {
            let mut row = Vec::with_capacity(self.channels() + 2);
            row.push(format_float(r.t));
            row.extend(r.u.iter().chain(&r.y).map(|v| format_float(*v)));
            row.push(r.label.to_string());
            wtr.write_record(&row).map_err(csv_io)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file)
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(r);
        let mut rows = rdr.records();
        let header = match rows.next() {
            Some(h) => h.map_err(|e| parse_err(1, e.to_string()))?,
            None => return Err(parse_err(1, "missing header")),
        };
        let (m, q) = parse_header(&header)?;
        let width = m + q + 2;
        let mut records = Vec::new();
        for (idx, row) in rows.enumerate() {
            let line = idx + 2;
            let row = row.map_err(|e| parse_err(line, e.to_string()))?;
            if row.len() != width {
                return Err(parse_err(
                    line,
                    format!("expected {width} columns, found {}", row.len()),
                ));
            }
            let mut values = Vec::with_capacity(width - 1);
            for (col, field) in row.iter().take(width - 1).enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(line, format!("column {col}: '{field}' is not a number")))?;
                if !v.is_finite() {
                    return Err(parse_err(line, format!("column {col}: non-finite value '{field}'")));
                }
                values.push(v);
            }
            let label: Label = row[width - 1]
                .parse()
                .map_err(|e: Error| parse_err(line, e.to_string()))?;
            records.push(Record {
                t: values[0],
                u: values[1..1 + m].to_vec(),
                y: values[1 + m..].to_vec(),
                label,
            });
        }
        Dataset::new(m, q, records)
    }
}

fn parse_header(h: &csv::StringRecord) -> Result<(usize, usize)> {
    let fields: Vec<&str> = h.iter().collect();
    if fields.len() < 2 || fields[0] != "t" || fields[fields.len() - 1] != "label" {
        return Err(parse_err(1, "header must be 't,u0..,y0..,label'"));
    }
    let middle = &fields[1..fields.len() - 1];
    let m = middle.iter().take_while(|f| f.starts_with('u')).count();
    let q = middle.len() - m;
    for (i, f) in middle[..m].iter().enumerate() {
        if *f != format!("u{i}") {
            return Err(parse_err(1, format!("expected column 'u{i}', found '{f}'")));
        }
    }
    for (i, f) in middle[m..].iter().enumerate() {
        if *f != format!("y{i}") {
            return Err(parse_err(1, format!("expected column 'y{i}', found '{f}'")));
        }
    }
    Ok((m, q))
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomStream;

    fn random_dataset(rng: &mut RandomStream, n: usize) -> Dataset {
        let records = (0..n)
            .map(|i| Record {
                t: i as f64 * 60.0,
                u: vec![rng.gaussian() * 1e3, rng.uniform()],
                y: vec![rng.gaussian(), rng.gaussian() * 1e-7, -rng.uniform()],
                label: if i % 3 == 0 {
                    Label::Fault("bias_y0".into())
                } else {
                    Label::Normal
                },
            })
            .collect();
        Dataset::new(2, 3, records).unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let mut rng = RandomStream::new(8);
        let ds = random_dataset(&mut rng, 50);
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,u0,u1,y0,y1,y2,label\n"));
        assert!(text.contains(",fault:bias_y0\n"));
    }

    #[test]
    fn wrong_column_count_names_line() {
        let text = "t,u0,y0,label\n0,1,2,normal\n60,1,normal\n";
        match Dataset::read_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nan_and_bad_labels_rejected() {
        let nan = "t,u0,y0,label\n0,NaN,2,normal\n";
        assert!(matches!(Dataset::read_csv(nan.as_bytes()), Err(Error::Parse { line: 2, .. })));
        let label = "t,u0,y0,label\n0,1,2,broken\n";
        assert!(matches!(Dataset::read_csv(label.as_bytes()), Err(Error::Parse { line: 2, .. })));
        let header = "t,y0,u0,label\n";
        assert!(matches!(Dataset::read_csv(header.as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn label_parsing() {
        assert_eq!("normal".parse::<Label>().unwrap(), Label::Normal);
        assert_eq!(
            "fault:stuck_u1".parse::<Label>().unwrap(),
            Label::Fault("stuck_u1".into())
        );
        assert!("fault:".parse::<Label>().is_err());
        assert!("fault:a b".parse::<Label>().is_err());
    }
}
