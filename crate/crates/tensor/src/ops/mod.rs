//! Forward and adjoint kernels behind the [`Tape`](crate::Tape) operations.
//!
//! Kernels are plain functions over tensors and slices so they can be
//! benchmarked and tested without a tape.

pub mod conv;
pub mod elementwise;
pub mod linear;
pub mod loss;
pub mod norm;
pub mod pool;
pub mod shape;
