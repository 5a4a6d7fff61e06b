//! `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Each `fault.kind`
//! line opens a new fault; the `fault.*` keys that follow apply to it.
//!
//! ```text
//! n = 4
//! m = 2
//! p = 2
//! q = 3
//! horizon = 2000
//! sample_period_s = 60
//! seed = 7
//! fault.kind = sensor_bias
//! fault.channel = 0
//! fault.offset = 2.0
//! fault.start = 100
//! fault.end = 200
//! ```

use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::simulator::system::{ClosedLoopSystem, FaultKind, FaultSpec};

/// Parsed `(line, key, value)` triples in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    pub entries: Vec<(usize, String, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected 'key = value', found '{line}'"),
                });
            };
            let key = k.trim();
            if key.is_empty() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "empty key".into(),
                });
            }
            entries.push((i + 1, key.to_string(), v.trim().to_string()));
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

pub(crate) fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid value '{value}' for '{key}'"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum KindTag {
    SensorBias,
    SetpointOffset,
    StuckActuator,
}

#[derive(Debug, Clone)]
struct PartialFault {
    line: usize,
    kind: KindTag,
    channel: Option<usize>,
    offset: Option<f64>,
    level: Option<f64>,
    start: Option<usize>,
    end: Option<usize>,
    name: Option<String>,
}

impl PartialFault {
    fn finish(self) -> Result<FaultSpec> {
        let missing = |key: &str| Error::Parse {
            line: self.line,
            msg: format!("fault opened here is missing 'fault.{key}'"),
        };
        let channel = self.channel.ok_or_else(|| missing("channel"))?;
        let start = self.start.ok_or_else(|| missing("start"))?;
        let end = self.end.ok_or_else(|| missing("end"))?;
        let kind = match self.kind {
            KindTag::SensorBias => FaultKind::SensorBias {
                channel,
                offset: self.offset.ok_or_else(|| missing("offset"))?,
            },
            KindTag::SetpointOffset => FaultKind::SetpointOffset {
                channel,
                offset: self.offset.ok_or_else(|| missing("offset"))?,
            },
            // `fault.offset` is accepted as the level fraction for stuck actuators
            KindTag::StuckActuator => FaultKind::StuckActuator {
                channel,
                level: self
                    .level
                    .or(self.offset)
                    .ok_or_else(|| missing("level"))?,
            },
        };
        let spec = FaultSpec::new(kind, start, end);
        Ok(match self.name {
            Some(n) => spec.named(n),
            None => spec,
        })
    }
}

/// Everything needed for one `simulate` run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub q: usize,
    pub horizon: usize,
    pub sample_period_s: f64,
    pub seed: u64,
    pub faults: Vec<FaultSpec>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 4,
            m: 2,
            p: 2,
            q: 3,
            horizon: 2000,
            sample_period_s: 60.0,
            seed: 0,
            faults: Vec::new(),
        }
    }
}

impl SimulationConfig {
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let mut cfg = Self::default();
        let mut pending: Option<PartialFault> = None;
        for (line, key, value) in &kv.entries {
            let line = *line;
            if let Some(sub) = key.strip_prefix("fault.") {
                if sub == "kind" {
                    if let Some(done) = pending.take() {
                        cfg.faults.push(done.finish()?);
                    }
                    let kind = match value.as_str() {
                        "sensor_bias" | "sensor-bias" => KindTag::SensorBias,
                        "setpoint_offset" | "setpoint-offset" => KindTag::SetpointOffset,
                        "stuck_actuator" | "stuck-actuator" => KindTag::StuckActuator,
                        other => {
                            return Err(Error::Parse {
                                line,
                                msg: format!("unknown fault kind '{other}'"),
                            })
                        }
                    };
                    pending = Some(PartialFault {
                        line,
                        kind,
                        channel: None,
                        offset: None,
                        level: None,
                        start: None,
                        end: None,
                        name: None,
                    });
                    continue;
                }
                let Some(f) = pending.as_mut() else {
                    return Err(Error::Parse {
                        line,
                        msg: format!("'{key}' appears before any 'fault.kind'"),
                    });
                };
                match sub {
                    "channel" => f.channel = Some(parse_value(line, key, value)?),
                    "offset" => f.offset = Some(parse_value(line, key, value)?),
                    "level" => f.level = Some(parse_value(line, key, value)?),
                    "start" => f.start = Some(parse_value(line, key, value)?),
                    "end" => f.end = Some(parse_value(line, key, value)?),
                    "name" => f.name = Some(value.clone()),
                    _ => {
                        return Err(Error::Parse {
                            line,
                            msg: format!("unknown key '{key}'"),
                        })
                    }
                }
                continue;
            }
            match key.as_str() {
                "n" => cfg.n = parse_value(line, key, value)?,
                "m" => cfg.m = parse_value(line, key, value)?,
                "p" => cfg.p = parse_value(line, key, value)?,
                "q" => cfg.q = parse_value(line, key, value)?,
                "horizon" => cfg.horizon = parse_value(line, key, value)?,
                "sample_period_s" => cfg.sample_period_s = parse_value(line, key, value)?,
                "seed" => cfg.seed = parse_value(line, key, value)?,
                _ => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unknown key '{key}'"),
                    })
                }
            }
        }
        if let Some(done) = pending.take() {
            cfg.faults.push(done.finish()?);
        }
        Ok(cfg)
    }

    pub fn system(&self) -> Result<ClosedLoopSystem> {
        let mut sys = ClosedLoopSystem::standard(self.n, self.m, self.p, self.q)?;
        sys.sample_period_s = self.sample_period_s;
        sys.validate()?;
        Ok(sys)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_keys() {
        let text = "# plant\nn = 4\nm = 2\np = 2\nq = 3\nhorizon = 500\nsample_period_s = 60\nseed = 9\n\
                    fault.kind = sensor_bias\nfault.channel = 0\nfault.offset = 2.0\nfault.start = 100\nfault.end = 200\n\
                    fault.kind = stuck_actuator\nfault.channel = 1\nfault.level = 0.25\nfault.start = 300\nfault.end = 350\nfault.name = valve\n";
        let cfg = SimulationConfig::from_key_values(&KeyValues::parse(text).unwrap()).unwrap();
        assert_eq!(cfg.horizon, 500);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.faults.len(), 2);
        assert_eq!(cfg.faults[0].name, "bias_y0");
        assert_eq!(
            cfg.faults[1].kind,
            FaultKind::StuckActuator {
                channel: 1,
                level: 0.25
            }
        );
        assert_eq!(cfg.faults[1].name, "valve");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad_value = "n = four\n";
        assert!(matches!(
            SimulationConfig::from_key_values(&KeyValues::parse(bad_value).unwrap()),
            Err(Error::Parse { line: 1, .. })
        ));
        let orphan = "horizon = 10\nfault.channel = 1\n";
        assert!(matches!(
            SimulationConfig::from_key_values(&KeyValues::parse(orphan).unwrap()),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(KeyValues::parse("a\n"), Err(Error::Parse { line: 1, .. })));
        let incomplete = "fault.kind = sensor_bias\nfault.channel = 0\n";
        assert!(SimulationConfig::from_key_values(&KeyValues::parse(incomplete).unwrap()).is_err());
    }
}
