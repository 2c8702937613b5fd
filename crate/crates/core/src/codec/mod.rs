//! Compositional-code compression of an embedding table.
//!
//! Each item is represented by `n` discrete components, each picking one of
//! `k` codeword rows; the item's embedding is the sum of its picked rows.
//! Codes are learned end-to-end through a Gumbel-softmax relaxation of the
//! per-component choice, then hardened by argmax.

mod forward;
mod train;
mod types;

pub use forward::{encoder_forward, gumbel_relax, harden, reconstruct_item, reconstruct_table, relax_with_noise};
pub use train::{loss_and_grad, model_cr, relative_mse, train_codec, CodecGrad, CodecTraining};
pub use types::{ln_code_capacity, CodeMatrix, CodebookStore, CodecConfig, CodecEncoder, TAU_DEFAULT, TAU_EXPERIMENT};
