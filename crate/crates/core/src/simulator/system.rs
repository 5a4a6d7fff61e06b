use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, RandomStream};
use crate::simulator::dataset::{Dataset, Label, Record};

/// Discrete closed loop
///
/// ```text
/// x[k+1] = A x[k] + B u[k] + E d[k]
/// y[k]   = C x[k] + F d[k] + v[k]
/// u[k]   = sat(PI(setpoint[k] − y_meas[k]))
/// ```
///
/// with one PI loop per actuator, each regulating one output channel, and a
/// smooth `tanh` saturation mapping the controller command into
/// `[u_min, u_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopSystem {
    pub a: Matrix,
    pub b: Matrix,
    pub e: Matrix,
    pub c: Matrix,
    pub f: Matrix,
    /// Output channel regulated by each control loop.
    pub controlled: Vec<usize>,
    pub kp: Vec<f64>,
    pub ki: Vec<f64>,
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
    pub setpoint: SquareWave,
    pub disturbance: DisturbanceSpec,
    pub measurement_noise: Vec<f64>,
    pub sample_period_s: f64,
    /// Simulation aborts once any true output leaves `[-envelope, envelope]`.
    pub envelope: f64,
    pub initial_state: Vec<f64>,
}

/// Per-loop square-wave setpoint: `high` for the first half of each period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareWave {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
    pub period_steps: usize,
}

impl SquareWave {
    pub fn at(&self, step: usize, lane: usize) -> f64 {
        if (step % self.period_steps) < self.period_steps / 2 {
            self.high[lane]
        } else {
            self.low[lane]
        }
    }
}

/// `d_i[k] = mean_i + amplitude_i sin(2π k / period_i + phase_i) + noise_i ξ`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSpec {
    pub mean: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub period_steps: Vec<f64>,
    pub phase: Vec<f64>,
    pub noise_std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FaultKind {
    /// Adds `offset` to the measurement of output `channel`; the plant and
    /// the recorded truth are unaffected, the controller sees the biased value.
    SensorBias { channel: usize, offset: f64 },
    /// Shifts the setpoint of control loop `channel` by `offset`.
    SetpointOffset { channel: usize, offset: f64 },
    /// Holds actuator `channel` at `u_min + level·(u_max − u_min)`.
    StuckActuator { channel: usize, level: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub name: String,
    pub kind: FaultKind,
    /// First active step.
    pub start: usize,
    /// Last active step (inclusive).
    pub end: usize,
}

impl FaultSpec {
    pub fn new(kind: FaultKind, start: usize, end: usize) -> Self {
        let name = match &kind {
            FaultKind::SensorBias { channel, .. } => format!("bias_y{channel}"),
            FaultKind::SetpointOffset { channel, .. } => format!("setpoint_{channel}"),
            FaultKind::StuckActuator { channel, .. } => format!("stuck_u{channel}"),
        };
        Self {
            name,
            kind,
            start,
            end,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    #[inline]
    pub fn active(&self, step: usize) -> bool {
        self.start <= step && step <= self.end
    }

    pub fn label(&self) -> Label {
        Label::Fault(self.name.clone())
    }

    pub fn validate(&self, system: &ClosedLoopSystem, horizon: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Domain(format!("fault '{}': {msg}", self.name)));
        match self.kind {
            FaultKind::SensorBias { channel, offset } => {
                if channel >= system.q() {
                    return bad(format!("output channel {channel} out of range (q = {})", system.q()));
                }
                if !offset.is_finite() {
                    return bad("non-finite offset".into());
                }
            }
            FaultKind::SetpointOffset { channel, offset } => {
                if channel >= system.m() {
                    return bad(format!("control loop {channel} out of range (m = {})", system.m()));
                }
                if !offset.is_finite() {
                    return bad("non-finite offset".into());
                }
            }
            FaultKind::StuckActuator { channel, level } => {
                if channel >= system.m() {
                    return bad(format!("actuator {channel} out of range (m = {})", system.m()));
                }
                if !(0.0..=1.0).contains(&level) {
                    return bad(format!("stuck level {level} outside [0, 1]"));
                }
            }
        }
        if self.start > self.end {
            return bad(format!("window [{}, {}] is empty", self.start, self.end));
        }
        if self.end >= horizon {
            return bad(format!("window end {} beyond horizon {horizon}", self.end));
        }
        Label::Fault(self.name.clone()).validate()
    }
}

impl ClosedLoopSystem {
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.b.cols()
    }

    pub fn p(&self) -> usize {
        self.e.cols()
    }

    pub fn q(&self) -> usize {
        self.c.rows()
    }

    /// Structured plant family for arbitrary dimensions.
    ///
    /// The first `m` states are regulated zones, the rest are slow thermal
    /// masses; disturbance 0 is an outdoor-temperature-like sinusoid, the
    /// first `q − m` outputs measure disturbances directly and the last `m`
    /// outputs are the regulated zones. Requires `n ≥ m ≥ 1`, `q ≥ m`,
    /// `p ≥ 1`.
    pub fn standard(n: usize, m: usize, p: usize, q: usize) -> Result<Self> {
        if m == 0 || n < m || q < m || p == 0 {
            return Err(Error::Domain(format!(
                "standard plant needs n >= m >= 1, q >= m, p >= 1 (got n={n}, m={m}, p={p}, q={q})"
            )));
        }
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = if i < m { 0.85 } else { 0.92 };
        }
        for i in 0..m {
            if i + 1 < m {
                a[(i, i + 1)] = 0.02;
                a[(i + 1, i)] = 0.02;
            }
            if m + i < n {
                a[(i, m + i)] = 0.08;
                a[(m + i, i)] = 0.05;
            }
        }
        for i in m..n {
            if i + 1 < n {
                a[(i, i + 1)] = 0.01;
                a[(i + 1, i)] = 0.01;
            }
        }
        let mut b = Matrix::zeros(n, m);
        for j in 0..m {
            b[(j, j)] = 0.3;
        }
        let mut e = Matrix::zeros(n, p);
        for i in 0..n {
            e[(i, 0)] = if i < m { 0.05 } else { 0.01 };
        }
        for k in 1..p {
            e[((k - 1) % m, k)] = 0.1;
        }
        let mut c = Matrix::zeros(q, n);
        let mut f = Matrix::zeros(q, p);
        let monitored = q - m;
        for i in 0..monitored {
            f[(i, i % p)] = 1.0;
        }
        let controlled: Vec<usize> = (0..m).map(|j| monitored + j).collect();
        for (j, &out) in controlled.iter().enumerate() {
            c[(out, j)] = 1.0;
        }
        let disturbance = DisturbanceSpec {
            mean: (0..p).map(|k| if k == 0 { 10.0 } else { 1.0 }).collect(),
            amplitude: (0..p).map(|k| if k == 0 { 8.0 } else { 0.5 }).collect(),
            period_steps: (0..p).map(|k| 1440.0 / (k + 1) as f64).collect(),
            phase: (0..p).map(|k| 0.7 * k as f64).collect(),
            noise_std: (0..p).map(|k| if k == 0 { 0.3 } else { 0.2 }).collect(),
        };
        let setpoint = SquareWave {
            low: (0..m).map(|j| 20.0 + j as f64).collect(),
            high: (0..m).map(|j| 22.0 + j as f64).collect(),
            period_steps: 480,
        };
        let mut initial_state = vec![0.0; n];
        for (i, s) in initial_state.iter_mut().enumerate() {
            *s = if i < m { setpoint.high[i] } else { 17.0 };
        }
        Ok(Self {
            a,
            b,
            e,
            c,
            f,
            controlled,
            kp: vec![1.0; m],
            ki: vec![0.05; m],
            u_min: vec![0.0; m],
            u_max: vec![20.0; m],
            setpoint,
            disturbance,
            measurement_noise: vec![0.05; q],
            sample_period_s: 60.0,
            envelope: 100.0,
            initial_state,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m, p, q) = (self.n(), self.m(), self.p(), self.q());
        let shapes_ok = self.a.shape() == (n, n)
            && self.b.rows() == n
            && self.e.rows() == n
            && self.c.cols() == n
            && self.f.shape() == (q, p)
            && self.controlled.len() == m
            && self.kp.len() == m
            && self.ki.len() == m
            && self.u_min.len() == m
            && self.u_max.len() == m
            && self.setpoint.low.len() == m
            && self.setpoint.high.len() == m
            && self.disturbance.mean.len() == p
            && self.disturbance.amplitude.len() == p
            && self.disturbance.period_steps.len() == p
            && self.disturbance.phase.len() == p
            && self.disturbance.noise_std.len() == p
            && self.measurement_noise.len() == q
            && self.initial_state.len() == n;
        if !shapes_ok {
            return Err(Error::Domain("closed-loop system dimensions are inconsistent".into()));
        }
        if self.controlled.iter().any(|&o| o >= q) {
            return Err(Error::Domain("controlled output index out of range".into()));
        }
        if self.u_min.iter().zip(&self.u_max).any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::Domain("actuator range must satisfy u_min < u_max".into()));
        }
        if self.setpoint.period_steps < 2 {
            return Err(Error::Domain("setpoint period must be at least 2 steps".into()));
        }
        if !(self.sample_period_s > 0.0) || !(self.envelope > 0.0) {
            return Err(Error::Domain("sample period and envelope must be positive".into()));
        }
        Ok(())
    }

    fn saturate(&self, j: usize, command: f64) -> f64 {
        let mid = 0.5 * (self.u_min[j] + self.u_max[j]);
        let half = 0.5 * (self.u_max[j] - self.u_min[j]);
        mid + half * ((command - mid) / half).tanh()
    }

    pub fn stuck_value(&self, j: usize, level: f64) -> f64 {
        self.u_min[j] + level * (self.u_max[j] - self.u_min[j])
    }
}

/// Runs the closed loop for `horizon` steps and records measured `(u, y)`.
///
/// The random stream is consumed identically with or without faults, so
/// paired runs with the same seed share every noise sample.
pub fn simulate(system: &ClosedLoopSystem, horizon: usize, faults: &[FaultSpec], seed: u64) -> Result<Dataset> {
    system.validate()?;
    if horizon == 0 {
        return Err(Error::Domain("horizon must be at least 1 step".into()));
    }
    for fault in faults {
        fault.validate(system, horizon)?;
    }
    let (m, p, q) = (system.m(), system.p(), system.q());
    let mut rng = RandomStream::new(seed);
    let mut x = system.initial_state.clone();
    let mut integral = vec![0.0; m];
    let mut records = Vec::with_capacity(horizon);
    let tau = std::f64::consts::TAU;

    for k in 0..horizon {
        let d: Vec<f64> = (0..p)
            .map(|i| {
                let spec = &system.disturbance;
                spec.mean[i]
                    + spec.amplitude[i] * (tau * k as f64 / spec.period_steps[i] + spec.phase[i]).sin()
                    + spec.noise_std[i] * rng.gaussian()
            })
            .collect();
        let noise: Vec<f64> = (0..q).map(|i| system.measurement_noise[i] * rng.gaussian()).collect();

        let cx = system.c.matvec(&x)?;
        let fd = system.f.matvec(&d)?;
        let y_true: Vec<f64> = (0..q).map(|i| cx[i] + fd[i] + noise[i]).collect();
        if let Some(i) = y_true.iter().position(|v| !v.is_finite() || v.abs() > system.envelope) {
            return Err(Error::Simulation {
                step: k,
                msg: format!(
                    "output y{i} = {} left the envelope ±{}",
                    y_true[i], system.envelope
                ),
            });
        }

        let active: Vec<&FaultSpec> = faults.iter().filter(|f| f.active(k)).collect();
        let mut y_meas = y_true.clone();
        for f in &active {
            if let FaultKind::SensorBias { channel, offset } = f.kind {
                y_meas[channel] += offset;
            }
        }

        let mut u = vec![0.0; m];
        for j in 0..m {
            let mut sp = system.setpoint.at(k, j);
            for f in &active {
                if let FaultKind::SetpointOffset { channel, offset } = f.kind {
                    if channel == j {
                        sp += offset;
                    }
                }
            }
            let err = sp - y_meas[system.controlled[j]];
            let mid = 0.5 * (system.u_min[j] + system.u_max[j]);
            // integrator clamp keeps the command inside a few saturation widths
            let limit = 2.0 * (system.u_max[j] - system.u_min[j]) / system.ki[j].max(1e-12);
            integral[j] = (integral[j] + err).clamp(-limit, limit);
            let command = mid + system.kp[j] * err + system.ki[j] * integral[j];
            u[j] = system.saturate(j, command);
            for f in &active {
                if let FaultKind::StuckActuator { channel, level } = f.kind {
                    if channel == j {
                        u[j] = system.stuck_value(j, level);
                    }
                }
            }
        }

        let label = active.first().map_or(Label::Normal, |f| f.label());
        records.push(Record {
            t: k as f64 * system.sample_period_s,
            u: u.clone(),
            y: y_meas,
            label,
        });

        let ax = system.a.matvec(&x)?;
        let bu = system.b.matvec(&u)?;
        let ed = system.e.matvec(&d)?;
        for i in 0..x.len() {
            x[i] = ax[i] + bu[i] + ed[i];
        }
    }
    Dataset::new(m, q, records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plant() -> ClosedLoopSystem {
        ClosedLoopSystem::standard(4, 2, 2, 3).unwrap()
    }

    #[test]
    fn no_faults_all_normal() {
        let ds = simulate(&plant(), 500, &[], 3).unwrap();
        assert_eq!(ds.records.len(), 500);
        assert!(ds.records.iter().all(|r| r.label == Label::Normal));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = simulate(&plant(), 300, &[], 9).unwrap();
        let b = simulate(&plant(), 300, &[], 9).unwrap();
        assert_eq!(a, b);
        let c = simulate(&plant(), 300, &[], 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn bias_on_monitored_channel_is_exact() {
        let sys = plant();
        let fault = FaultSpec::new(FaultKind::SensorBias { channel: 0, offset: 2.0 }, 100, 200);
        let base = simulate(&sys, 400, &[], 5).unwrap();
        let faulty = simulate(&sys, 400, &[fault], 5).unwrap();
        for k in 0..400 {
            let diff = faulty.records[k].y[0] - base.records[k].y[0];
            if (100..=200).contains(&k) {
                // bitwise equality fails only through rounding of y + 2 - y
                assert!((diff - 2.0).abs() < 1e-12, "step {k}: {diff}");
                assert_eq!(faulty.records[k].label.to_string(), "fault:bias_y0");
            } else {
                assert_eq!(diff, 0.0, "step {k}");
                assert_eq!(faulty.records[k].label, Label::Normal);
            }
        }
    }

    #[test]
    fn bias_on_controlled_channel_propagates_only_forward() {
        let sys = plant();
        let fault = FaultSpec::new(FaultKind::SensorBias { channel: 1, offset: -2.0 }, 100, 200);
        let base = simulate(&sys, 300, &[], 5).unwrap();
        let faulty = simulate(&sys, 300, &[fault], 5).unwrap();
        for k in 0..100 {
            assert_eq!(base.records[k], faulty.records[k]);
        }
        // at onset the plant has not reacted yet
        assert_eq!(faulty.records[100].y[1] - base.records[100].y[1], -2.0);
        assert_eq!(faulty.records[100].y[2], base.records[100].y[2]);
        // feedback moves the actuator afterwards
        assert!((101..=200).any(|k| faulty.records[k].u[0] != base.records[k].u[0]));
    }

    #[test]
    fn stuck_actuator_holds_level() {
        let sys = plant();
        let fault = FaultSpec::new(FaultKind::StuckActuator { channel: 1, level: 0.5 }, 50, 80);
        let ds = simulate(&sys, 120, &[fault], 1).unwrap();
        let expected = 0.5 * (sys.u_max[1] - sys.u_min[1]) + sys.u_min[1];
        for k in 50..=80 {
            assert_eq!(ds.records[k].u[1], expected);
        }
        assert_ne!(ds.records[81].u[1], expected);
    }

    #[test]
    fn invalid_faults_rejected() {
        let sys = plant();
        let bad = [
            FaultSpec::new(FaultKind::SensorBias { channel: 3, offset: 1.0 }, 0, 10),
            FaultSpec::new(FaultKind::StuckActuator { channel: 0, level: 1.5 }, 0, 10),
            FaultSpec::new(FaultKind::SetpointOffset { channel: 2, offset: 1.0 }, 0, 10),
            FaultSpec::new(FaultKind::SensorBias { channel: 0, offset: 1.0 }, 20, 10),
            FaultSpec::new(FaultKind::SensorBias { channel: 0, offset: 1.0 }, 0, 100),
        ];
        for f in bad {
            assert!(matches!(simulate(&sys, 100, &[f], 0), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn envelope_violation_names_step() {
        let mut sys = plant();
        sys.a = Matrix::identity(4).scale(1.5);
        match simulate(&sys, 1000, &[], 0) {
            Err(Error::Simulation { step, .. }) => assert!(step > 0),
            other => panic!("expected simulation error, got {other:?}"),
        }
    }

    #[test]
    fn tracks_setpoint_in_steady_state() {
        let sys = plant();
        let ds = simulate(&sys, 2000, &[], 4).unwrap();
        // mean tracking error over the last settled half-period of each cycle
        let mut err = 0.0;
        let mut count = 0;
        for k in 1000..2000 {
            let phase = k % sys.setpoint.period_steps;
            if phase > 120 && phase < 240 {
                err += (ds.records[k].y[1] - sys.setpoint.at(k, 0)).abs();
                count += 1;
            }
        }
        assert!(err / (count as f64) < 0.5, "mean tracking error {}", err / count as f64);
    }

    #[test]
    fn sample_period_sets_timestamps() {
        let ds = simulate(&plant(), 3, &[], 0).unwrap();
        let ts: Vec<f64> = ds.records.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![0.0, 60.0, 120.0]);
    }
}
