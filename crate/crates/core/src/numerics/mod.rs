//! Dense linear algebra, eigensolver and seeded random streams.

mod eigen;
mod matrix;
mod ortho;
mod rng;

pub use eigen::{cholesky, forward_substitute, sym_eig, SymEig};
pub use matrix::{axpy, dot, norm, squared_distance, Matrix};
pub use ortho::{orthonormal_complement, orthonormalize_columns};
pub use rng::RandomStream;
