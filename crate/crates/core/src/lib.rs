//! Neural prior estimation for long-tailed classification.
//!
//! Prior estimation modules (linear maps from backbone features to one score
//! per class) are trained next to a classifier with a one-way logistic loss
//! that only ever pushes the true-class score in one direction. Because the
//! pressure saturates at a rate set by class frequency, the averaged module
//! output ends up tracking the class log-prior, and subtracting it from the
//! classifier logits gives a learned, feature-conditioned logit adjustment.
//!
//! Modules:
//! - [`numerics`]: matrices, activations, Lambert W, SGD, gradient checks.
//! - [`data`]: synthetic long-tailed datasets and the dataset CSV format.
//! - [`model`]: backbone, classifier head, prior estimation bank, losses,
//!   adjustment, folding, and the LA / cRT baselines.
//! - [`theory`]: the collapsed per-class objective and its Lambert-W minimizer.
//! - [`harness`]: configuration, training loops, metrics, sweeps, CSV output.

pub mod data;
pub mod error;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod theory;

pub use error::{Error, Result};
