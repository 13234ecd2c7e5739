//! Dense 64-bit tensors and a tape-based reverse-mode differentiation engine.
//!
//! Image tensors use the `[batch, channel, height, width]` row-major layout.
//! Every operation that participates in training is recorded on a [`Tape`];
//! [`Tape::backward`] walks the record in reverse and fills the gradient of
//! each leaf created with `requires_grad = true`.
//!
//! ```
//! use vehreid_tensor::{Tape, Tensor};
//!
//! let mut tape = Tape::new();
//! let x = tape.leaf(Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap(), true);
//! let sq = tape.mul(x, x).unwrap();
//! let loss = tape.sum(sq);
//! tape.backward(loss).unwrap();
//! assert_eq!(tape.grad(x).unwrap().data(), &[2.0, 4.0, 6.0]);
//! ```

mod error;
pub mod gemm;
pub mod gradcheck;
pub mod ops;
mod tape;
mod tensor;

pub use error::{Result, TensorError};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
