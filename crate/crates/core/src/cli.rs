//! Command-line driver. Each subcommand reads only files written by earlier
//! subcommands (or a plant config) and writes its artifact plus
//! `<out>.config.json` holding the fully resolved settings.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ganae::{train, GanAeModel, TrainConfig};
use crate::grouptest::{model_group_test, DescriptorMode, GroupTestConfig, RejectionRule, TestOutcome};
use crate::prior::PriorKind;
use crate::report::{
    encoding_dim_sweep, evaluate, render_reports, render_sweep, ConfusionReport, RateConvention, ReportFormat,
    SweepTable, REPORTS_KIND, SWEEP_KIND,
};
use crate::simulator::{simulate, window_normalize, window_with, Dataset, KeyValues, Label, SimulationConfig, WindowSet, WindowSpec};
use crate::svm::{cross_validate_nu, train_nu_svc, CvResult, KernelSpec, SolverConfig, SvmModel, DEFAULT_NU_GRID};

pub const GROUP_TEST_KIND: &str = "group-test";

#[derive(Debug, Parser)]
#[command(name = "faultgan", version, about = "Fault detection from normal-operation data")]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the closed-loop plant and write a CSV.
    Simulate(SimulateArgs),
    /// Train the GAN-based autoencoder on the normal rows of a CSV.
    TrainGanae(TrainGanaeArgs),
    /// Train the ν-SVM baseline on a labeled CSV.
    TrainSvm(TrainSvmArgs),
    /// Score a CSV with a trained model and write a confusion report.
    Detect(DetectArgs),
    /// Two-sample test between encoded data and encoded generator output.
    GroupTest(GroupTestArgs),
    /// Train over several encoding dimensions and seeds.
    Sweep(SweepArgs),
    /// Re-render a report or sweep document.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    /// Window length in samples.
    #[arg(long, default_value_t = 8)]
    pub window: usize,
    #[arg(long, default_value_t = 2)]
    pub stride: usize,
}

impl WindowArgs {
    fn spec(&self) -> WindowSpec {
        WindowSpec {
            length: self.window,
            stride: self.stride,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// `key = value` plant and fault file; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides `seed` from the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `horizon` from the config file.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainGanaeArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "orthogonal")]
    pub prior: PriorKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Encoding dimension; chosen from explained variance when omitted.
    #[arg(long)]
    pub encoding_dim: Option<usize>,
    #[arg(long, default_value_t = 40)]
    pub epochs: usize,
    /// Discriminator output at or above this is classified normal.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub warm_start_epochs: usize,
    /// Project raw rather than mean-centered windows in the orthogonal prior.
    #[arg(long)]
    pub uncentered: bool,
    #[command(flatten)]
    pub windows: WindowArgs,
}

#[derive(Debug, Args)]
pub struct TrainSvmArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// `rbf`, `rbf:<sigma>`, `poly` or `poly:<degree>:<coef0>:<scale>`.
    #[arg(long, default_value = "rbf")]
    pub kernel: KernelSpec,
    /// Fixed ν; skips cross-validation.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Comma-separated ν values for cross-validation.
    #[arg(long, value_delimiter = ',')]
    pub nu_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub windows: WindowArgs,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// A GAN-AE or ν-SVM model file.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "empirical")]
    pub convention: RateConvention,
    #[arg(long, default_value = "structured")]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct GroupTestArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// `per-sample` or `window:<w>`.
    #[arg(long, default_value = "per-sample")]
    pub mode: DescriptorMode,
    /// Reject when the statistic is below the threshold instead of above.
    #[arg(long)]
    pub literal_inequality: bool,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Written to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Normal-operation training CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Labeled evaluation CSV.
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "2,8,32")]
    pub dims: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub seeds: Vec<u64>,
    #[arg(long, default_value = "orthogonal")]
    pub prior: PriorKind,
    #[arg(long, default_value_t = 40)]
    pub epochs: usize,
    #[arg(long, default_value = "structured")]
    pub format: ReportFormat,
    #[command(flatten)]
    pub windows: WindowArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A document written by `detect` or `sweep`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "text")]
    pub format: ReportFormat,
    /// Written to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

pub fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::TrainGanae(a) => cmd_train_ganae(a),
        Command::TrainSvm(a) => cmd_train_svm(a),
        Command::Detect(a) => cmd_detect(a),
        Command::GroupTest(a) => cmd_group_test(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Domain(format!("input file '{}' does not exist", path.display())))
    }
}

fn require_out_dir(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(Error::Domain(format!(
            "output directory '{}' does not exist",
            dir.display()
        ))),
        _ => Ok(()),
    }
}

fn config_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".config.json");
    PathBuf::from(s)
}

fn write_config<T: Serialize>(out: &Path, command: &str, settings: &T) -> Result<()> {
    #[derive(Serialize)]
    struct Effective<'a, T> {
        command: &'a str,
        settings: &'a T,
    }
    let mut text = serde_json::to_string_pretty(&Effective { command, settings })?;
    text.push('\n');
    log::info!("effective config for {command}: {text}");
    std::fs::write(config_path(out), text)?;
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn document_kind(text: &str) -> Result<String> {
    let v: serde_json::Value = serde_json::from_str(text)?;
    v.get("kind")
        .and_then(|k| k.as_str())
        .map(str::to_owned)
        .ok_or_else(|| Error::Schema("document has no 'kind' field".into()))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    if let Some(c) = &a.config {
        require_file(c)?;
    }
    require_out_dir(&a.out)?;
    let mut cfg = match &a.config {
        Some(p) => SimulationConfig::from_key_values(&KeyValues::load(p)?)?,
        None => SimulationConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(h) = a.horizon {
        cfg.horizon = h;
    }
    let ds = simulate(&cfg.system()?, cfg.horizon, &cfg.faults, cfg.seed)?;
    ds.save(&a.out)?;
    write_config(&a.out, "simulate", &cfg)
}

#[derive(Serialize)]
struct TrainGanaeSettings<'a> {
    data: &'a Path,
    window: WindowSpec,
    /// Encoding dimension actually used.
    encoding_dim: usize,
    train: &'a TrainConfig,
    final_objective: Option<f64>,
    final_test_recon: Option<f64>,
}

fn normal_training_windows(data: &Path, spec: WindowSpec) -> Result<WindowSet> {
    let ds = Dataset::load(data)?;
    let normal = Dataset::new(ds.m(), ds.q(), ds.records.into_iter().filter(|r| r.label.is_normal()).collect())?;
    if normal.is_empty() {
        return Err(Error::Domain(format!("'{}' has no normal rows to train on", data.display())));
    }
    window_normalize(&normal, spec.length, spec.stride)
}

fn cmd_train_ganae(a: &TrainGanaeArgs) -> Result<()> {
    require_file(&a.data)?;
    require_out_dir(&a.out)?;
    let spec = a.windows.spec();
    let ws = normal_training_windows(&a.data, spec)?;
    let cfg = TrainConfig {
        encoding_dim: a.encoding_dim,
        hidden: a.hidden,
        epochs: a.epochs,
        batch_size: a.batch_size,
        lr: a.lr,
        prior: a.prior,
        centered: !a.uncentered,
        seed: a.seed,
        warm_start_epochs: a.warm_start_epochs,
        threshold: a.threshold,
        ..TrainConfig::default()
    };
    let trained = train(&cfg, &ws.windows)?;
    let mut model = trained.model;
    model.normalization = Some(ws.normalization.clone());
    model.window = Some(spec);
    model.save(&a.out)?;
    let last = trained.trace.last();
    write_config(
        &a.out,
        "train-ganae",
        &TrainGanaeSettings {
            data: &a.data,
            window: spec,
            encoding_dim: model.encoding_dim(),
            train: &cfg,
            final_objective: last.map(|e| e.objective),
            final_test_recon: last.and_then(|e| e.test_recon),
        },
    )
}

#[derive(Serialize)]
struct TrainSvmSettings<'a> {
    data: &'a Path,
    window: WindowSpec,
    kernel: KernelSpec,
    nu: f64,
    solver: SolverConfig,
    cross_validation: Option<CvResult>,
    iterations: usize,
}

fn cmd_train_svm(a: &TrainSvmArgs) -> Result<()> {
    require_file(&a.data)?;
    require_out_dir(&a.out)?;
    a.kernel.validate()?;
    let spec = a.windows.spec();
    let ws = window_normalize(&Dataset::load(&a.data)?, spec.length, spec.stride)?;
    let flags: Vec<bool> = ws.labels.iter().map(Label::is_normal).collect();
    let solver = SolverConfig::default();
    let (nu, cv) = match a.nu {
        Some(nu) => (nu, None),
        None => {
            let grid = a.nu_grid.clone().unwrap_or_else(|| DEFAULT_NU_GRID.to_vec());
            let cv = cross_validate_nu(&ws.windows, &flags, a.kernel, &grid, a.folds, a.seed, &solver)?;
            (cv.best_nu, Some(cv))
        }
    };
    let mut model = train_nu_svc(&ws.windows, &flags, a.kernel, nu, &solver)?;
    model.normalization = Some(ws.normalization.clone());
    model.window = Some(spec);
    model.save(&a.out)?;
    write_config(
        &a.out,
        "train-svm",
        &TrainSvmSettings {
            data: &a.data,
            window: spec,
            kernel: a.kernel,
            nu,
            solver,
            cross_validation: cv,
            iterations: model.iterations,
        },
    )
}

enum Detector {
    GanAe(GanAeModel),
    Svm(SvmModel),
}

impl Detector {
    fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match document_kind(&text)?.as_str() {
            crate::ganae::MODEL_KIND => {
                let m: GanAeModel = crate::artifact::from_str(crate::ganae::MODEL_KIND, &text)?;
                m.validate()?;
                Ok(Self::GanAe(m))
            }
            crate::svm::MODEL_KIND => Ok(Self::Svm(crate::artifact::from_str(crate::svm::MODEL_KIND, &text)?)),
            other => Err(Error::Schema(format!("'{}' holds a '{other}' document, not a model", path.display()))),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::GanAe(_) => "ganae",
            Self::Svm(_) => "nu-svm",
        }
    }

    fn windows(&self, data: &Path) -> Result<WindowSet> {
        let (norm, spec) = match self {
            Self::GanAe(m) => (&m.normalization, m.window),
            Self::Svm(m) => (&m.normalization, m.window),
        };
        let (Some(norm), Some(spec)) = (norm, spec) else {
            return Err(Error::Schema("model carries no normalization or window settings".into()));
        };
        window_with(&Dataset::load(data)?, spec, norm)
    }

    fn is_normal(&self, x: &[f64]) -> Result<bool> {
        Ok(match self {
            Self::GanAe(m) => m.detect(x)?.0,
            Self::Svm(m) => m.predict(x)?.0,
        })
    }
}

#[derive(Serialize)]
struct DetectSettings<'a> {
    model: &'a Path,
    data: &'a Path,
    detector: &'a str,
    convention: RateConvention,
    format: ReportFormat,
}

fn cmd_detect(a: &DetectArgs) -> Result<()> {
    require_file(&a.model)?;
    require_file(&a.data)?;
    require_out_dir(&a.out)?;
    let detector = Detector::load(&a.model)?;
    let ws = detector.windows(&a.data)?;
    let report = evaluate(detector.name(), &ws, a.convention, |x| detector.is_normal(x))?;
    std::fs::write(&a.out, render_reports(&[report], a.format)?)?;
    write_config(
        &a.out,
        "detect",
        &DetectSettings {
            model: &a.model,
            data: &a.data,
            detector: detector.name(),
            convention: a.convention,
            format: a.format,
        },
    )
}

#[derive(Serialize)]
struct GroupTestSettings<'a> {
    model: &'a Path,
    data: &'a Path,
    test: &'a GroupTestConfig,
}

fn cmd_group_test(a: &GroupTestArgs) -> Result<()> {
    require_file(&a.model)?;
    require_file(&a.data)?;
    if let Some(o) = &a.out {
        require_out_dir(o)?;
    }
    let Detector::GanAe(model) = Detector::load(&a.model)? else {
        return Err(Error::Domain("group test needs a GAN-AE model".into()));
    };
    let ws = Detector::GanAe(model.clone()).windows(&a.data)?;
    let cfg = GroupTestConfig {
        alpha: a.alpha,
        mode: a.mode,
        rule: if a.literal_inequality {
            RejectionRule::LiteralInequality
        } else {
            RejectionRule::Exceeds
        },
        samples: a.samples,
        seed: a.seed,
    };
    let outcome: TestOutcome = model_group_test(&model, &ws.windows, &cfg)?;
    emit(a.out.as_deref(), &crate::artifact::to_string(GROUP_TEST_KIND, &outcome)?)?;
    let settings = GroupTestSettings {
        model: &a.model,
        data: &a.data,
        test: &cfg,
    };
    match &a.out {
        Some(o) => write_config(o, "group-test", &settings),
        None => {
            log::info!("effective config for group-test: {}", serde_json::to_string(&settings)?);
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct SweepSettings<'a> {
    data: &'a Path,
    test: &'a Path,
    dims: &'a [usize],
    seeds: &'a [u64],
    window: WindowSpec,
    base: &'a TrainConfig,
    format: ReportFormat,
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    require_file(&a.data)?;
    require_file(&a.test)?;
    require_out_dir(&a.out)?;
    let spec = a.windows.spec();
    let ws = normal_training_windows(&a.data, spec)?;
    let test = window_with(&Dataset::load(&a.test)?, spec, &ws.normalization)?;
    let base = TrainConfig {
        epochs: a.epochs,
        prior: a.prior,
        ..TrainConfig::default()
    };
    let table = encoding_dim_sweep(&ws.windows, &test, &a.dims, &base, &a.seeds)?;
    std::fs::write(&a.out, render_sweep(&table, a.format)?)?;
    write_config(
        &a.out,
        "sweep",
        &SweepSettings {
            data: &a.data,
            test: &a.test,
            dims: &a.dims,
            seeds: &a.seeds,
            window: spec,
            base: &base,
            format: a.format,
        },
    )
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    require_file(&a.input)?;
    if let Some(o) = &a.out {
        require_out_dir(o)?;
    }
    let text = std::fs::read_to_string(&a.input)?;
    let rendered = match document_kind(&text)?.as_str() {
        REPORTS_KIND => {
            let reports: Vec<ConfusionReport> = crate::artifact::from_str(REPORTS_KIND, &text)?;
            render_reports(&reports, a.format)?
        }
        SWEEP_KIND => {
            let table: SweepTable = crate::artifact::from_str(SWEEP_KIND, &text)?;
            render_sweep(&table, a.format)?
        }
        other => return Err(Error::Schema(format!("cannot render a '{other}' document"))),
    };
    emit(a.out.as_deref(), &rendered)
}
