use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::ganae::model::{term_gradients, GanAeModel, ModelGrads};
use crate::neural::{adam_step, recon_aggregate, recon_loss, AdamConfig, AdamState, LossMode, StepDirection};
use crate::numerics::RandomStream;
use crate::prior::{build_prior_basis, fit_pca, select_encoding_dim, PriorKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// `None` selects `d′` from the explained-variance threshold.
    pub encoding_dim: Option<usize>,
    pub variance_threshold: f64,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub prior: PriorKind,
    /// Project mean-centered windows in the orthogonal prior.
    pub centered: bool,
    pub seed: u64,
    pub train_fraction: f64,
    /// Reconstruction-only epochs run before joint training.
    pub warm_start_epochs: usize,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            encoding_dim: None,
            variance_threshold: 0.9,
            hidden: 64,
            epochs: 40,
            batch_size: 32,
            lr: 1e-3,
            prior: PriorKind::Orthogonal,
            centered: true,
            seed: 0,
            train_fraction: 0.9,
            warm_start_epochs: 0,
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return domain("batch size must be at least 1");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return domain("learning rate must be finite and nonnegative");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return domain("train fraction must lie in (0, 1]");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return domain("detection threshold must lie in (0, 1)");
        }
        Ok(())
    }

    fn adam(&self, direction: StepDirection) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            direction,
            ..AdamConfig::default()
        }
    }
}

/// Adam state for each of the three networks.
#[derive(Debug, Clone)]
pub struct Optimizers {
    pub encoder: AdamState,
    pub generator: AdamState,
    pub discriminator: AdamState,
}

impl Optimizers {
    pub fn new(model: &GanAeModel) -> Self {
        Self {
            encoder: AdamState::new(&model.encoder),
            generator: AdamState::new(&model.generator),
            discriminator: AdamState::new(&model.discriminator),
        }
    }
}

fn apply(model: &mut GanAeModel, grads: &ModelGrads, opt: &mut Optimizers, adam: &AdamConfig) -> Result<()> {
    adam_step(&mut model.encoder, &grads.encoder, &mut opt.encoder, adam)?;
    adam_step(&mut model.generator, &grads.generator, &mut opt.generator, adam)?;
    adam_step(&mut model.discriminator, &grads.discriminator, &mut opt.discriminator, adam)
}

/// One joint ascent step on `V` over all parameters, with a fresh prior
/// batch the size of `batch`. Returns `V` at the pre-step parameters.
pub fn train_step(
    model: &mut GanAeModel,
    opt: &mut Optimizers,
    lr: f64,
    batch: &[Vec<f64>],
    prior_source: &[Vec<f64>],
    rng: &mut RandomStream,
) -> Result<f64> {
    let zs = model.sample_prior(prior_source, batch.len(), rng)?;
    let (terms, grads) = term_gradients(model, batch, &zs)?;
    let adam = AdamConfig {
        lr,
        direction: StepDirection::Ascent,
        ..AdamConfig::default()
    };
    apply(model, &grads.total(), opt, &adam)?;
    Ok(terms.total())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    /// 1-based.
    pub epoch: usize,
    /// Mean pre-step `V` over the epoch's batches.
    pub objective: f64,
    /// `(1/(m√d)) Σ ‖x − G(E(x))‖²` over the train split after the epoch.
    pub train_recon: f64,
    /// Same aggregate over the held-out split; `None` when it is empty.
    pub test_recon: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: GanAeModel,
    pub trace: Vec<EpochTrace>,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

pub fn recon_error(model: &GanAeModel, windows: &[Vec<f64>]) -> Result<f64> {
    let raw = windows
        .iter()
        .map(|x| recon_loss(x, &model.reconstruct(x)?, LossMode::Raw))
        .collect::<Result<Vec<_>>>()?;
    Ok(recon_aggregate(&raw, model.data_dim()))
}

/// Seeded shuffle split into `(train, test)` index lists.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    RandomStream::substream(seed, 1).shuffle(&mut idx);
    let n_train = ((n as f64) * train_fraction).round() as usize;
    let n_train = n_train.clamp(1.min(n), n);
    let test = idx.split_off(n_train);
    (idx, test)
}

/// Fits the prior on the train split of `normal`, initializes the networks
/// and runs `cfg.epochs` epochs of joint ascent.
pub fn train(cfg: &TrainConfig, normal: &[Vec<f64>]) -> Result<Trained> {
    cfg.validate()?;
    if normal.is_empty() {
        return domain("training needs normal windows");
    }
    let d = normal[0].len();
    if normal.iter().any(|x| x.len() != d) {
        return domain("training windows have inconsistent lengths");
    }
    let (train_idx, test_idx) = split_indices(normal.len(), cfg.train_fraction, cfg.seed);
    let train_set: Vec<Vec<f64>> = train_idx.iter().map(|&i| normal[i].clone()).collect();
    let test_set: Vec<Vec<f64>> = test_idx.iter().map(|&i| normal[i].clone()).collect();

    let pca = fit_pca(&train_set)?;
    let dp = match cfg.encoding_dim {
        Some(k) => k,
        None => select_encoding_dim(&pca.ratios, cfg.variance_threshold)?,
    };
    if dp == 0 || dp >= d {
        return domain(format!("encoding dimension {dp} must lie in 1..{d}"));
    }
    let prior = match cfg.prior {
        PriorKind::Orthogonal => Some(build_prior_basis(&pca, dp, cfg.centered)?),
        PriorKind::Gaussian => None,
    };
    let mut init_rng = RandomStream::substream(cfg.seed, 0);
    let mut model = GanAeModel::init(d, dp, cfg.hidden, cfg.prior, prior, &mut init_rng)?;
    model.threshold = cfg.threshold;

    let mut rng = RandomStream::substream(cfg.seed, 2);
    let mut opt = Optimizers::new(&model);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    if cfg.warm_start_epochs > 0 {
        let adam = cfg.adam(StepDirection::Ascent);
        let mut warm = Optimizers::new(&model);
        for _ in 0..cfg.warm_start_epochs {
            rng.shuffle(&mut order);
            for chunk in order.chunks(cfg.batch_size) {
                let batch: Vec<Vec<f64>> = chunk.iter().map(|&i| train_set[i].clone()).collect();
                // the reconstruction term does not depend on z; any prior batch works
                let zs = vec![vec![0.0; dp]];
                let (_, g) = term_gradients(&model, &batch, &zs)?;
                apply(&mut model, &g.reconstruction, &mut warm, &adam)?;
            }
        }
    }

    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        let mut sum = 0.0;
        let mut steps = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Vec<f64>> = chunk.iter().map(|&i| train_set[i].clone()).collect();
            let v = train_step(&mut model, &mut opt, cfg.lr, &batch, &train_set, &mut rng)
                .map_err(|e| Error::Training(format!("epoch {epoch}: {e}")))?;
            sum += v;
            steps += 1;
        }
        let objective = sum / steps as f64;
        if !objective.is_finite() {
            return Err(Error::Training(format!("objective diverged at epoch {epoch}")));
        }
        let train_recon = recon_error(&model, &train_set)?;
        let test_recon = if test_set.is_empty() {
            None
        } else {
            Some(recon_error(&model, &test_set)?)
        };
        log::debug!("epoch {epoch}: V={objective:.5} train_recon={train_recon:.5} test_recon={test_recon:?}");
        trace.push(EpochTrace {
            epoch,
            objective,
            train_recon,
            test_recon,
        });
    }
    Ok(Trained {
        model,
        trace,
        train_indices: train_idx,
        test_indices: test_idx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ganae::model::{eval_objective_v, objective_upper_bound};

    fn blob(rng: &mut RandomStream, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                let t = rng.uniform();
                (0..d)
                    .map(|j| (0.2 + 0.6 * t * (j as f64 + 1.0) / d as f64 + 0.02 * rng.gaussian()).clamp(0.0, 1.0))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn zero_epochs_is_initialization() {
        let mut rng = RandomStream::new(1);
        let data = blob(&mut rng, 60, 6);
        let cfg = TrainConfig {
            epochs: 0,
            encoding_dim: Some(2),
            hidden: 8,
            ..TrainConfig::default()
        };
        let a = train(&cfg, &data).unwrap();
        assert!(a.trace.is_empty());
        let b = train(&cfg, &data).unwrap();
        assert_eq!(a.model, b.model);
        let mut init_rng = RandomStream::substream(cfg.seed, 0);
        let fresh = GanAeModel::init(6, 2, 8, PriorKind::Orthogonal, a.model.prior.clone(), &mut init_rng).unwrap();
        assert_eq!(a.model.encoder, fresh.encoder);
        assert_eq!(a.model.discriminator, fresh.discriminator);
    }

    #[test]
    fn trace_length_and_bound() {
        let mut rng = RandomStream::new(2);
        let data = blob(&mut rng, 80, 6);
        for prior in [PriorKind::Orthogonal, PriorKind::Gaussian] {
            let cfg = TrainConfig {
                epochs: 3,
                encoding_dim: Some(4),
                hidden: 8,
                prior,
                ..TrainConfig::default()
            };
            let t = train(&cfg, &data).unwrap();
            assert_eq!(t.trace.len(), 3);
            assert_eq!(t.trace.iter().map(|e| e.epoch).collect::<Vec<_>>(), vec![1, 2, 3]);
            assert!(t.trace.iter().all(|e| e.objective <= objective_upper_bound()));
            assert_eq!(t.train_indices.len() + t.test_indices.len(), 80);
        }
    }

    #[test]
    fn zero_lr_leaves_parameters() {
        let mut rng = RandomStream::new(3);
        let data = blob(&mut rng, 40, 5);
        let cfg = TrainConfig {
            epochs: 0,
            encoding_dim: Some(3),
            hidden: 6,
            ..TrainConfig::default()
        };
        let mut model = train(&cfg, &data).unwrap().model;
        let before = model.clone();
        let mut opt = Optimizers::new(&model);
        let v = train_step(&mut model, &mut opt, 0.0, &data[..8], &data, &mut rng).unwrap();
        assert!(v.is_finite());
        assert_eq!(model, before);
    }

    #[test]
    fn small_step_increases_objective() {
        let mut rng = RandomStream::new(4);
        let data = blob(&mut rng, 40, 6);
        let mut wins = 0;
        for seed in 0..100u64 {
            let mut r = RandomStream::new(seed);
            let mut model = GanAeModel::init(6, 2, 8, PriorKind::Gaussian, None, &mut r).unwrap();
            let xs = &data[..10];
            let zs = model.sample_prior(&data, 10, &mut r).unwrap();
            let before = eval_objective_v(&model, xs, &zs).unwrap();
            let (_, g) = term_gradients(&model, xs, &zs).unwrap();
            let mut opt = Optimizers::new(&model);
            let adam = AdamConfig {
                lr: 1e-4,
                direction: StepDirection::Ascent,
                ..AdamConfig::default()
            };
            apply(&mut model, &g.total(), &mut opt, &adam).unwrap();
            if eval_objective_v(&model, xs, &zs).unwrap() > before {
                wins += 1;
            }
        }
        assert!(wins >= 95, "{wins}/100");
    }

    #[test]
    fn split_is_seeded_partition() {
        let (a, b) = split_indices(50, 0.9, 3);
        assert_eq!((a.len(), b.len()), (45, 5));
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        assert_eq!(split_indices(50, 0.9, 3), (a, b));
    }
}
