//! Communication-efficient updating of compressed item-embedding tables for
//! on-device session recommenders.
//!
//! The cloud trains a session recommender, compresses its item embedding
//! table into compositional codes plus codebooks, and ships the result to a
//! device. Later updates retrain only a slice of the codebook rows (chosen
//! stack- or queue-wise) and ship those rows with the new codes as a compact,
//! CRC-protected delta frame.

pub mod adaptive;
pub mod codec;
mod error;
pub mod numkit;
pub mod pipeline;
pub mod recommender;
pub mod sessiondata;
pub mod updater;
pub mod wire;

pub use error::{Error, Result};
