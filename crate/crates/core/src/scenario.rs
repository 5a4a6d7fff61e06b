//! Benchmark scenario on the standard synthetic plant: one long normal run
//! for unsupervised training, separate labeled runs for testing, and a
//! labeled set for the supervised baseline drawn from the same number of
//! simulated steps.
//!
//! Every fault run starts faulty right after burn-in and stays faulty, so
//! no window mixes a fault with its recovery transient.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ganae::{train, TrainConfig};
use crate::numerics::RandomStream;
use crate::prior::PriorKind;
use crate::report::{evaluate, ConfusionReport, RateConvention};
use crate::simulator::{
    simulate, window_normalize, window_with, ClosedLoopSystem, Dataset, FaultKind, FaultSpec, Label, WindowSet,
    WindowSpec,
};
use crate::svm::{cross_validate_nu, train_nu_svc, CvResult, KernelSpec, SolverConfig, DEFAULT_NU_GRID};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Steps simulated and discarded before recording.
    pub burn_in: usize,
    /// Recorded steps of normal operation for training.
    pub train_steps: usize,
    /// Recorded steps per test run (one normal run plus one per fault).
    pub test_steps: usize,
    pub window: WindowSpec,
    pub faults: Vec<(String, FaultKind)>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            burn_in: 300,
            train_steps: 3000,
            test_steps: 1500,
            window: WindowSpec { length: 8, stride: 2 },
            faults: vec![
                ("bias_y0".into(), FaultKind::SensorBias { channel: 0, offset: 4.0 }),
                ("setpoint_1".into(), FaultKind::SetpointOffset { channel: 1, offset: 2.0 }),
                ("stuck_u0".into(), FaultKind::StuckActuator { channel: 0, level: 0.25 }),
            ],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    /// Normal-only windows; their normalization is shared by all sets.
    pub train: WindowSet,
    /// Labeled windows for the supervised baseline.
    pub labeled: WindowSet,
    pub test: WindowSet,
}

fn plant() -> Result<ClosedLoopSystem> {
    ClosedLoopSystem::standard(4, 2, 2, 3)
}

fn run(
    system: &ClosedLoopSystem,
    cfg: &ScenarioConfig,
    steps: usize,
    fault: Option<(&str, &FaultKind)>,
    seed: u64,
) -> Result<Dataset> {
    let horizon = cfg.burn_in + steps;
    let faults: Vec<FaultSpec> = fault
        .map(|(name, kind)| FaultSpec::new(kind.clone(), cfg.burn_in, horizon - 1).named(name))
        .into_iter()
        .collect();
    let mut ds = simulate(system, horizon, &faults, seed)?;
    ds.records.drain(..cfg.burn_in);
    Ok(ds)
}

/// Windows each run separately so no window straddles two runs.
fn window_runs(runs: &[Dataset], spec: WindowSpec, train: &WindowSet) -> Result<WindowSet> {
    let mut out: Option<WindowSet> = None;
    for r in runs {
        let w = window_with(r, spec, &train.normalization)?;
        match out.as_mut() {
            None => out = Some(w),
            Some(o) => {
                o.windows.extend(w.windows);
                o.labels.extend(w.labels);
                o.warnings.extend(w.warnings);
            }
        }
    }
    Ok(out.expect("at least one run"))
}

pub fn build_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    let system = plant()?;
    let mut seeds = RandomStream::substream(seed, 0x5ce0);
    let train_raw = run(&system, cfg, cfg.train_steps, None, seeds.next_u64())?;
    let train = window_normalize(&train_raw, cfg.window.length, cfg.window.stride)?;

    // same step budget as the unsupervised training run: half normal, half
    // split evenly over the fault types
    let nf = cfg.faults.len().max(1);
    let half = cfg.train_steps / 2;
    let mut labeled_runs = vec![run(&system, cfg, half, None, seeds.next_u64())?];
    for (name, kind) in &cfg.faults {
        labeled_runs.push(run(&system, cfg, half / nf, Some((name, kind)), seeds.next_u64())?);
    }
    let labeled = window_runs(&labeled_runs, cfg.window, &train)?;

    let mut test_runs = vec![run(&system, cfg, cfg.test_steps, None, seeds.next_u64())?];
    for (name, kind) in &cfg.faults {
        test_runs.push(run(&system, cfg, cfg.test_steps, Some((name, kind)), seeds.next_u64())?);
    }
    let test = window_runs(&test_runs, cfg.window, &train)?;
    Ok(Scenario { train, labeled, test })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonOutcome {
    pub seed: u64,
    pub orthogonal: ConfusionReport,
    pub gaussian: ConfusionReport,
    pub svm: ConfusionReport,
    pub svm_cv: CvResult,
}

/// Trains both GAN-AE priors and the cross-validated ν-SVM on one scenario
/// and scores all three on its test windows.
pub fn compare_detectors(
    scenario: &Scenario,
    base: &TrainConfig,
    kernel: KernelSpec,
    seed: u64,
) -> Result<ComparisonOutcome> {
    let normal = scenario.train.normal_windows();
    let mut reports = Vec::with_capacity(2);
    for prior in [PriorKind::Orthogonal, PriorKind::Gaussian] {
        let cfg = TrainConfig { prior, seed, ..base.clone() };
        let model = train(&cfg, &normal)?.model;
        let name = format!("ganae-{prior}");
        reports.push(evaluate(&name, &scenario.test, RateConvention::Empirical, |x| Ok(model.detect(x)?.0))?);
    }
    let flags: Vec<bool> = scenario.labeled.labels.iter().map(Label::is_normal).collect();
    let solver = SolverConfig::default();
    let svm_cv = cross_validate_nu(&scenario.labeled.windows, &flags, kernel, &DEFAULT_NU_GRID, 5, seed, &solver)?;
    let svm = train_nu_svc(&scenario.labeled.windows, &flags, kernel, svm_cv.best_nu, &solver)?;
    let svm_report = evaluate("nu-svm", &scenario.test, RateConvention::Empirical, |x| Ok(svm.predict(x)?.0))?;
    let gaussian = reports.pop().expect("two priors");
    let orthogonal = reports.pop().expect("two priors");
    Ok(ComparisonOutcome {
        seed,
        orthogonal,
        gaussian,
        svm: svm_report,
        svm_cv,
    })
}
