//! Dense 64-bit matrix arithmetic, seeded randomness, activations and a
//! central-difference gradient checker.
//!
//! Every reduction in this module runs sequentially in index order, so results
//! are bitwise reproducible for a given platform and seed.

mod activation;
mod adam;
mod gradcheck;
mod matrix;
mod rng;

pub use adam::Adam;
pub use activation::{log_sum_exp, sample_gumbel, sigmoid, softmax, softmax_unchecked, softplus};
pub use gradcheck::grad_check;
pub use matrix::{dot, Matrix};
pub use rng::{gumbel_from_uniform, Rng, GUMBEL_EPS};
