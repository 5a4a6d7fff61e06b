//! Fault detection for closed-loop dynamical systems trained on normal
//! operating data only.
//!
//! The pipeline simulates (or loads) multichannel time series, windows and
//! normalizes them, fits a PCA subspace prior, and trains an
//! encoder/generator/discriminator triple by joint ascent on a single
//! objective. The trained discriminator flags faulty windows; encodings feed
//! a kernel two-sample test on Stiefel × SPD covariance descriptors. A ν-SVM
//! trained on labeled data serves as the supervised baseline.

pub mod artifact;
pub mod cli;
pub mod error;
pub mod ganae;
pub mod grouptest;
pub mod neural;
pub mod numerics;
pub mod prior;
pub mod report;
pub mod scenario;
pub mod simulator;
pub mod svm;

pub use error::{Error, Result};
pub use numerics::{Matrix, RandomStream};
