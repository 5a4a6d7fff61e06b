//! Encoder/generator/discriminator model trained by joint gradient ascent on
//!
//! ```text
//! V = E_x[(1 − L̂(x, G(E(x)))) + log D(x)] + E_z[log(1 − D(G(z)))]
//! ```
//!
//! with `L̂(x, x′) = min(‖x − x′‖²/d, 1)`. All three networks climb the same
//! objective, so the generator learns to place prior samples where the
//! discriminator can reject them while still decoding encodings of normal
//! data. The trained discriminator is the fault detector.

mod model;
pub mod oracle;
mod train;

pub use model::{
    eval_objective_v, objective_gradients, objective_terms, objective_upper_bound, term_gradients, GanAeModel,
    ModelGrads, ObjectiveTerms, TermGrads, LOG_EPS, MODEL_KIND,
};
pub use train::{recon_error, split_indices, train, train_step, EpochTrace, Optimizers, TrainConfig, Trained};
