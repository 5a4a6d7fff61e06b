//! Finite-difference and closed-form oracles shared by the integration
//! tests and the acceptance run.
#![allow(dead_code)]

use faultgan::ganae::oracle::{optimal_discriminator, TabularDiscriminator};
use faultgan::ganae::{eval_objective_v, objective_gradients, GanAeModel};
use faultgan::grouptest::ManifoldPoint;
use faultgan::neural::{Activation, MlpGrads, MlpParams};
use faultgan::numerics::{dot, orthonormalize_columns, Matrix, RandomStream};
use faultgan::prior::PriorKind;
use faultgan::svm::{kernel_eval, kernel_gradient, train_nu_svc, KernelSpec, SolverConfig};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Entrywise relative error; magnitudes below `1e-4` are compared on an
/// absolute scale so that near-zero partials do not amplify roundoff.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

fn central(mut f: impl FnMut(f64) -> f64, x0: f64) -> f64 {
    (f(x0 + FD_STEP) - f(x0 - FD_STEP)) / (2.0 * FD_STEP)
}

fn uniform_vecs(rng: &mut RandomStream, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.uniform()).collect()).collect()
}

fn gaussian_vecs(rng: &mut RandomStream, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.gaussian()).collect()).collect()
}

/// A toy model with `d ∈ 4..=8`, `d′ ∈ 1..=3` plus data and prior batches.
pub fn toy_gan(seed: u64) -> (GanAeModel, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = RandomStream::new(seed);
    let d = 4 + (seed % 5) as usize;
    let dp = 1 + (seed % 3) as usize;
    let model = GanAeModel::init(d, dp, 6, PriorKind::Gaussian, None, &mut rng).unwrap();
    let xs = uniform_vecs(&mut rng, 6, d);
    let zs = gaussian_vecs(&mut rng, 5, dp);
    (model, xs, zs)
}

fn net_mut(model: &mut GanAeModel, which: usize) -> &mut MlpParams {
    match which {
        0 => &mut model.encoder,
        1 => &mut model.generator,
        _ => &mut model.discriminator,
    }
}

/// Max relative error of `∂V/∂θ` over every parameter of E, G and D.
pub fn gan_gradient_error(seed: u64) -> f64 {
    let (model, xs, zs) = toy_gan(seed);
    let (_, grads) = objective_gradients(&model, &xs, &zs).unwrap();
    let analytic: [&MlpGrads; 3] = [&grads.encoder, &grads.generator, &grads.discriminator];
    let mut worst = 0.0f64;
    for (which, g) in analytic.iter().enumerate() {
        for (i, &a) in g.iter().enumerate() {
            let mut m = model.clone();
            let x0 = *net_mut(&mut m, which).iter().nth(i).unwrap();
            let n = central(
                |v| {
                    *net_mut(&mut m, which).iter_mut().nth(i).unwrap() = v;
                    eval_objective_v(&m, &xs, &zs).unwrap()
                },
                x0,
            );
            worst = worst.max(rel_err(a, n));
        }
    }
    worst
}

/// Max relative error of parameter and input gradients of `w · net(x)` for a
/// random net with up to 4 layers and widths up to 32.
pub fn mlp_gradient_error(seed: u64) -> f64 {
    let mut rng = RandomStream::new(seed);
    let layers = 1 + rng.index(4);
    let sizes: Vec<usize> = (0..=layers).map(|_| 1 + rng.index(32)).collect();
    let acts = [Activation::Tanh, Activation::Sigmoid, Activation::Identity];
    let activations: Vec<Activation> = (0..layers).map(|_| acts[rng.index(3)]).collect();
    let net = MlpParams::xavier(&sizes, &activations, &mut rng).unwrap();
    let x: Vec<f64> = (0..sizes[0]).map(|_| rng.uniform()).collect();
    let w: Vec<f64> = (0..sizes[layers]).map(|_| rng.gaussian()).collect();
    let cache = net.forward(&x).unwrap();
    let (grads, input_grad) = net.backward(&cache, &w).unwrap();
    let loss = |n: &MlpParams, x: &[f64]| dot(&n.predict(x).unwrap(), &w);
    let mut worst = 0.0f64;
    for (i, &a) in grads.iter().enumerate() {
        let mut m = net.clone();
        let x0 = *m.iter().nth(i).unwrap();
        let n = central(
            |v| {
                *m.iter_mut().nth(i).unwrap() = v;
                loss(&m, &x)
            },
            x0,
        );
        worst = worst.max(rel_err(a, n));
    }
    for (j, &a) in input_grad.iter().enumerate() {
        let mut xp = x.clone();
        let n = central(
            |v| {
                xp[j] = v;
                loss(&net, &xp)
            },
            x[j],
        );
        worst = worst.max(rel_err(a, n));
    }
    worst
}

/// Max relative error of `∂f/∂x` for a trained ν-SVC and of `∂k/∂x` for its
/// kernel, on random probe points.
pub fn svm_gradient_error(seed: u64) -> f64 {
    let mut rng = RandomStream::new(seed);
    let d = 2 + (seed % 7) as usize;
    let kernel = if seed.is_multiple_of(2) {
        KernelSpec::Rbf {
            sigma: rng.uniform_range(0.5, 2.0),
        }
    } else {
        KernelSpec::cubic()
    };
    let mut xs = Vec::new();
    let mut normal = Vec::new();
    for i in 0..30 {
        let shift = if i % 2 == 0 { 0.3 } else { 0.7 };
        xs.push((0..d).map(|_| shift + 0.25 * rng.gaussian()).collect::<Vec<f64>>());
        normal.push(i % 2 == 0);
    }
    let model = train_nu_svc(&xs, &normal, kernel, 0.4, &SolverConfig::default()).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let p: Vec<f64> = (0..d).map(|_| rng.uniform()).collect();
        let g = model.decision_gradient(&p).unwrap();
        let kg = kernel_gradient(&kernel, &p, &xs[0]).unwrap();
        for j in 0..d {
            let mut q = p.clone();
            let n = central(
                |v| {
                    q[j] = v;
                    model.decision_value(&q).unwrap()
                },
                p[j],
            );
            worst = worst.max(rel_err(g[j], n));
            let nk = central(
                |v| {
                    q[j] = v;
                    kernel_eval(&kernel, &q, &xs[0]).unwrap()
                },
                p[j],
            );
            worst = worst.max(rel_err(kg[j], nk));
        }
    }
    worst
}

/// Strictly positive distribution on `n` points.
pub fn random_distribution(rng: &mut RandomStream, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| 0.05 + rng.uniform()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

/// Max-abs gap between a tabular discriminator trained by ascent and the
/// closed-form optimum on a 10-point support.
pub fn tabular_oracle_error(seed: u64) -> f64 {
    let mut rng = RandomStream::new(seed);
    let p_data = random_distribution(&mut rng, 10);
    let p_noise = random_distribution(&mut rng, 10);
    let target = optimal_discriminator(&p_data, &p_noise).unwrap();
    let mut table = TabularDiscriminator::new(10);
    table.fit(&p_data, &p_noise, 4000, 0.05).unwrap();
    table
        .values()
        .iter()
        .zip(&target)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Random point with `U` from a QR of a Gaussian matrix and `R = AAᵀ + 0.1I`.
pub fn random_point(rng: &mut RandomStream, dp: usize, k: usize) -> ManifoldPoint {
    let g = Matrix::new(dp, k, (0..dp * k).map(|_| rng.gaussian()).collect()).unwrap();
    let u = orthonormalize_columns(&g).unwrap();
    let a = Matrix::new(k, k, (0..k * k).map(|_| rng.gaussian()).collect()).unwrap();
    let mut r = a.matmul(&a.transpose()).unwrap();
    for i in 0..k {
        r[(i, i)] += 0.1;
    }
    ManifoldPoint { u, r }
}

/// Smallest eigenvalue of the product-kernel Gram matrix.
pub fn gram_min_eigenvalue(points: &[ManifoldPoint]) -> f64 {
    let n = points.len();
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = faultgan::grouptest::product_kernel(&points[i], &points[j]).unwrap();
        }
    }
    *faultgan::numerics::sym_eig(&g).unwrap().values.last().unwrap()
}

pub const NORMAL_CFG: &str = "horizon = 1200\nseed = 3\n";
pub const FAULT_CFG: &str = "horizon = 1200\nseed = 4\n\
    fault.kind = sensor_bias\nfault.channel = 0\nfault.offset = 4\nfault.start = 500\nfault.end = 1199\n";

/// Runs the binary in `dir`; returns the exit code and stderr.
pub fn faultgan(dir: &std::path::Path, args: &[&str]) -> (i32, String) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_faultgan"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

/// Every subcommand in order, each consuming only earlier outputs. Returns
/// the artifact file names written.
pub fn run_pipeline(dir: &std::path::Path) -> Vec<String> {
    std::fs::write(dir.join("normal.cfg"), NORMAL_CFG).unwrap();
    std::fs::write(dir.join("fault.cfg"), FAULT_CFG).unwrap();
    let steps: &[&[&str]] = &[
        &["simulate", "--config", "normal.cfg", "--out", "train.csv"],
        &["simulate", "--config", "fault.cfg", "--out", "test.csv"],
        &["train-ganae", "--data", "train.csv", "--prior", "orthogonal", "--seed", "7", "--epochs", "4", "--out", "model.txt"],
        &["train-svm", "--data", "test.csv", "--nu-grid", "0.5,0.7", "--folds", "3", "--seed", "1", "--out", "svm.txt"],
        &["detect", "--model", "model.txt", "--data", "test.csv", "--out", "report.json"],
        &["detect", "--model", "svm.txt", "--data", "test.csv", "--out", "svm_report.json"],
        &["group-test", "--model", "model.txt", "--data", "test.csv", "--alpha", "0.05", "--out", "group.json"],
        &["sweep", "--data", "train.csv", "--test", "test.csv", "--dims", "2,4", "--seeds", "0,1", "--epochs", "2", "--out", "sweep.json"],
        &["report", "--input", "report.json", "--format", "text", "--out", "report.txt"],
        &["report", "--input", "sweep.json", "--format", "svg", "--out", "sweep.svg"],
    ];
    for args in steps {
        let (code, err) = faultgan(dir, args);
        assert_eq!(code, 0, "{args:?} failed: {err}");
    }
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| !n.ends_with(".cfg"))
        .collect();
    names.sort();
    names
}

/// Runs the pipeline in two fresh directories and lists files whose bytes
/// differ (or that exist in only one run).
pub fn pipeline_differences() -> Vec<String> {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let na = run_pipeline(a.path());
    let nb = run_pipeline(b.path());
    let mut diffs: Vec<String> = na.iter().filter(|n| !nb.contains(n)).cloned().collect();
    for n in na.iter().filter(|n| nb.contains(n)) {
        if std::fs::read(a.path().join(n)).unwrap() != std::fs::read(b.path().join(n)).unwrap() {
            diffs.push(n.clone());
        }
    }
    diffs
}
