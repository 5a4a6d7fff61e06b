use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::neural::{Activation, ForwardCache, LossMode, MlpGrads, MlpParams};
use crate::numerics::{squared_distance, RandomStream};
use crate::prior::{sample_gaussian_prior, sample_orthogonal_prior, PriorKind, SubspacePrior};
use crate::simulator::{Normalization, WindowSpec};

/// Clamp applied to discriminator outputs before taking logs.
pub const LOG_EPS: f64 = 1e-7;

/// Largest value `V` can take once `D` is clamped to `[ε, 1−ε]`.
pub fn objective_upper_bound() -> f64 {
    1.0 + 2.0 * (1.0 - LOG_EPS).ln()
}

/// Encoder, generator/decoder and discriminator plus what is needed to
/// apply them to new raw data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanAeModel {
    pub encoder: MlpParams,
    pub generator: MlpParams,
    pub discriminator: MlpParams,
    pub prior_kind: PriorKind,
    /// Present for the orthogonal prior.
    pub prior: Option<SubspacePrior>,
    pub normalization: Option<Normalization>,
    pub window: Option<WindowSpec>,
    /// `D(x) ≥ threshold` is classified normal.
    pub threshold: f64,
}

impl GanAeModel {
    /// Fresh Xavier-initialized networks with the default architectures:
    /// E `d→h→d′`, G `d′→h→d` (sigmoid out), D `d→h→h/2→1` (sigmoid out).
    pub fn init(
        data_dim: usize,
        encoding_dim: usize,
        hidden: usize,
        prior_kind: PriorKind,
        prior: Option<SubspacePrior>,
        rng: &mut RandomStream,
    ) -> Result<Self> {
        if encoding_dim == 0 || data_dim == 0 || hidden < 2 {
            return domain("data, encoding and hidden sizes must be positive (hidden >= 2)");
        }
        if let Some(p) = &prior {
            if p.data_dim() != data_dim || p.encoding_dim() != encoding_dim {
                return domain("prior basis shape does not match the networks");
            }
        }
        if prior_kind == PriorKind::Orthogonal && prior.is_none() {
            return domain("orthogonal prior requires a subspace basis");
        }
        use Activation::*;
        let encoder = MlpParams::xavier(&[data_dim, hidden, encoding_dim], &[Tanh, Identity], rng)?;
        let generator = MlpParams::xavier(&[encoding_dim, hidden, data_dim], &[Tanh, Sigmoid], rng)?;
        let discriminator = MlpParams::xavier(
            &[data_dim, hidden, hidden / 2, 1],
            &[Tanh, Tanh, Sigmoid],
            rng,
        )?;
        Ok(Self {
            encoder,
            generator,
            discriminator,
            prior_kind,
            prior,
            normalization: None,
            window: None,
            threshold: 0.5,
        })
    }

    pub fn data_dim(&self) -> usize {
        self.encoder.input_size()
    }

    pub fn encoding_dim(&self) -> usize {
        self.encoder.output_size()
    }

    /// Checks the dimension chain `d → d′ → d` and `d → 1`.
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.generator.validate()?;
        self.discriminator.validate()?;
        let d = self.data_dim();
        if self.generator.input_size() != self.encoding_dim()
            || self.generator.output_size() != d
            || self.discriminator.input_size() != d
            || self.discriminator.output_size() != 1
        {
            return domain("encoder, generator and discriminator dimensions do not chain");
        }
        if let Some(p) = &self.prior {
            if p.data_dim() != d || p.encoding_dim() != self.encoding_dim() {
                return domain("prior basis shape does not match the networks");
            }
        }
        if self.prior_kind == PriorKind::Orthogonal && self.prior.is_none() {
            return domain("orthogonal prior requires a subspace basis");
        }
        Ok(())
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.encoder.predict(x)
    }

    pub fn encode_all(&self, windows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        windows.iter().map(|x| self.encode(x)).collect()
    }

    pub fn generate(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.generator.predict(z)
    }

    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.generate(&self.encode(x)?)
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(self.discriminator.predict(x)?[0])
    }

    /// `(is_normal, D(x))`.
    pub fn detect(&self, x: &[f64]) -> Result<(bool, f64)> {
        let s = self.score(x)?;
        Ok((s >= self.threshold, s))
    }

    /// Draws `n` prior samples; `source` supplies the data windows the
    /// orthogonal prior projects.
    pub fn sample_prior(&self, source: &[Vec<f64>], n: usize, rng: &mut RandomStream) -> Result<Vec<Vec<f64>>> {
        match (self.prior_kind, &self.prior) {
            (PriorKind::Orthogonal, Some(p)) => sample_orthogonal_prior(p, source, n, rng),
            (PriorKind::Orthogonal, None) => domain("orthogonal prior requires a subspace basis"),
            (PriorKind::Gaussian, _) => Ok(sample_gaussian_prior(self.encoding_dim(), n, rng)),
        }
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        crate::artifact::save(path, MODEL_KIND, self)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let m: Self = crate::artifact::load(path, MODEL_KIND)?;
        m.validate()?;
        Ok(m)
    }
}

pub const MODEL_KIND: &str = "ganae-model";

fn clamp_prob(p: f64) -> f64 {
    p.clamp(LOG_EPS, 1.0 - LOG_EPS)
}

fn inside_clamp(p: f64) -> bool {
    p > LOG_EPS && p < 1.0 - LOG_EPS
}

/// The three batch-mean terms of `V`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms {
    /// `mean (1 − L̂(x, G(E(x))))`
    pub reconstruction: f64,
    /// `mean log D(x)`
    pub real: f64,
    /// `mean log(1 − D(G(z)))`
    pub generated: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.reconstruction + self.real + self.generated
    }
}

/// `∂V/∂θ` for every network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub encoder: MlpGrads,
    pub generator: MlpGrads,
    pub discriminator: MlpGrads,
}

impl ModelGrads {
    pub fn zeros_like(model: &GanAeModel) -> Self {
        Self {
            encoder: MlpGrads::zeros_like(&model.encoder),
            generator: MlpGrads::zeros_like(&model.generator),
            discriminator: MlpGrads::zeros_like(&model.discriminator),
        }
    }

    pub fn add_assign(&mut self, other: &ModelGrads) {
        self.encoder.add_assign(&other.encoder);
        self.generator.add_assign(&other.generator);
        self.discriminator.add_assign(&other.discriminator);
    }

    pub fn all_finite(&self) -> bool {
        self.encoder.all_finite() && self.generator.all_finite() && self.discriminator.all_finite()
    }
}

fn check_batches(model: &GanAeModel, xs: &[Vec<f64>], zs: &[Vec<f64>]) -> Result<()> {
    if xs.is_empty() || zs.is_empty() {
        return domain("objective needs nonempty data and prior batches");
    }
    let d = model.data_dim();
    let dp = model.encoding_dim();
    if let Some(x) = xs.iter().find(|x| x.len() != d) {
        return domain(format!("data vector has length {}, model expects {d}", x.len()));
    }
    if let Some(z) = zs.iter().find(|z| z.len() != dp) {
        return domain(format!("prior vector has length {}, model expects {dp}", z.len()));
    }
    Ok(())
}

/// Batch-mean estimate of `V`, term by term.
pub fn objective_terms(model: &GanAeModel, xs: &[Vec<f64>], zs: &[Vec<f64>]) -> Result<ObjectiveTerms> {
    check_batches(model, xs, zs)?;
    let mut t = ObjectiveTerms {
        reconstruction: 0.0,
        real: 0.0,
        generated: 0.0,
    };
    for x in xs {
        let rec = model.reconstruct(x)?;
        t.reconstruction += 1.0 - crate::neural::recon_loss(x, &rec, LossMode::Normalized)?;
        t.real += clamp_prob(model.score(x)?).ln();
    }
    for z in zs {
        let g = model.generate(z)?;
        t.generated += (1.0 - clamp_prob(model.score(&g)?)).ln();
    }
    t.reconstruction /= xs.len() as f64;
    t.real /= xs.len() as f64;
    t.generated /= zs.len() as f64;
    Ok(t)
}

pub fn eval_objective_v(model: &GanAeModel, xs: &[Vec<f64>], zs: &[Vec<f64>]) -> Result<f64> {
    Ok(objective_terms(model, xs, zs)?.total())
}

/// Per-term gradients of `V`: reconstruction, real-data and generated.
#[derive(Debug, Clone, PartialEq)]
pub struct TermGrads {
    pub reconstruction: ModelGrads,
    pub real: ModelGrads,
    pub generated: ModelGrads,
}

impl TermGrads {
    pub fn total(&self) -> ModelGrads {
        let mut t = self.reconstruction.clone();
        t.add_assign(&self.real);
        t.add_assign(&self.generated);
        t
    }
}

/// Exact gradient of each term of `V` with respect to all parameters.
///
/// Each term is checked separately so a non-finite gradient can be
/// attributed.
pub fn term_gradients(model: &GanAeModel, xs: &[Vec<f64>], zs: &[Vec<f64>]) -> Result<(ObjectiveTerms, TermGrads)> {
    let terms = objective_terms(model, xs, zs)?;
    let d = model.data_dim() as f64;
    let bx = xs.len() as f64;
    let bz = zs.len() as f64;

    let mut rec = ModelGrads::zeros_like(model);
    let mut real = ModelGrads::zeros_like(model);
    let mut gen = ModelGrads::zeros_like(model);

    for x in xs {
        let ce = model.encoder.forward(x)?;
        let cg = model.generator.forward(ce.output())?;
        let out = cg.output();
        let raw = squared_distance(x, out);
        if raw / d < 1.0 {
            // ∂(1 − ‖x−x′‖²/d)/∂x′
            let g: Vec<f64> = out
                .iter()
                .zip(x)
                .map(|(o, xi)| -2.0 * (o - xi) / (d * bx))
                .collect();
            let g_enc = model.generator.backward_into(&cg, &g, &mut rec.generator)?;
            model.encoder.backward_into(&ce, &g_enc, &mut rec.encoder)?;
        }

        let cd = model.discriminator.forward(x)?;
        let p = cd.output()[0];
        if inside_clamp(p) {
            model
                .discriminator
                .backward_into(&cd, &[1.0 / (p * bx)], &mut real.discriminator)?;
        }
    }
    for z in zs {
        let cg = model.generator.forward(z)?;
        let cd: ForwardCache = model.discriminator.forward(cg.output())?;
        let p = cd.output()[0];
        if inside_clamp(p) {
            let g_x = model
                .discriminator
                .backward_into(&cd, &[-1.0 / ((1.0 - p) * bz)], &mut gen.discriminator)?;
            model.generator.backward_into(&cg, &g_x, &mut gen.generator)?;
        }
    }

    for (name, value, grads) in [
        ("reconstruction", terms.reconstruction, &rec),
        ("real-data log D", terms.real, &real),
        ("generated log(1 - D)", terms.generated, &gen),
    ] {
        if !value.is_finite() || !grads.all_finite() {
            return Err(Error::Training(format!("non-finite value or gradient in the {name} term")));
        }
    }
    Ok((
        terms,
        TermGrads {
            reconstruction: rec,
            real,
            generated: gen,
        },
    ))
}

/// `V` and its exact gradient with respect to all parameters.
pub fn objective_gradients(model: &GanAeModel, xs: &[Vec<f64>], zs: &[Vec<f64>]) -> Result<(ObjectiveTerms, ModelGrads)> {
    let (terms, g) = term_gradients(model, xs, zs)?;
    Ok((terms, g.total()))
}
