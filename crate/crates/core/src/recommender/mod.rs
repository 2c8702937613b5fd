//! Minimal session recommender over an item embedding table.
//!
//! Prec@K here is the hit rate: the fraction of pairs whose label is in the top K.

mod checkpoint;
mod eval;
mod model;
mod train;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use eval::{contribution, evaluate, evaluate_many, evaluate_table, ranks, Metrics};
pub use model::{rank_of, score_all, top_k, EncoderKind, RecModel, SessionEncoder};
pub use train::{loss_and_grad, train, RecGrad, TrainConfig};
