//! Vehicle attribute classification and re-identification.
//!
//! * [`arch`] describes the residual and inception networks and runs them.
//! * [`train`] holds the softmax/cross-entropy losses, Adam, the training
//!   loop and checkpoint files.
//! * [`dataset`] covers manifests, the synthetic vehicle generator, ROI
//!   cropping and quality degradation.
//! * [`eval`] computes accuracy, confusion matrices, two-net score fusion and
//!   unit-sphere class centroids.
//! * [`reid`] classifies best-shot images and answers attribute queries over
//!   an index of them.

pub mod arch;
mod binio;
pub mod dataset;
mod error;
pub mod eval;
pub mod hash;
pub mod reid;
pub mod train;

pub use error::{Error, Result};
pub use vehreid_tensor::{Tape, Tensor, TensorError, Var};
