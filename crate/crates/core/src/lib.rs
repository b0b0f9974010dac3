//! SVD denoising for nearest-neighbor search on noisy low-rank data.
//!
//! Data points and a query lie in an unknown `k`-dimensional subspace of
//! `R^d`; every coordinate is observed with i.i.d. Gaussian noise of level σ.
//! The split-SVD solver in [`algorithms`] recovers a `(1+ε)`-approximate
//! nearest neighbor of the *clean* data for σ up to roughly `k^{-1/4}`,
//! well past the point where the noisy nearest neighbor has changed.
//!
//! Modules:
//! - [`linalg`]: truncated SVD, projection, singular values.
//! - [`model`]: latent/noisy instances and the synthetic generator.
//! - [`container`]: SNNS1 binary instance files.
//! - [`algorithms`]: split-SVD, naive and oracle solvers, distance estimates, K-NN.
//! - [`thresholds`]: σ caps and the regime classifier.
//! - [`lowerbounds`]: KL/TV calculators and swap-game experiments.
//! - [`ingest`]: GloVe/MNIST loaders and real-data preprocessing.
//! - [`harness`]: success-rate sweeps, noise thresholds, CSV/SVG output.
//! - [`cli`]: the `spectral-nns` command line.

pub mod algorithms;
pub mod cli;
pub mod container;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod linalg;
pub mod lowerbounds;
pub mod model;
pub mod par;
pub mod rng;
pub mod thresholds;

pub use error::{Error, Result};
