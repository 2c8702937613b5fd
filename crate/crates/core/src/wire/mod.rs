//! Binary formats: update delta frames, compressed-model files and
//! embedding-table checkpoints.
//!
//! # Delta frame (`.odup`)
//!
//! All integers little-endian.
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 4 | magic `"ODUP"` |
//! | 4 | 1 | version = 1 |
//! | 5 | 1 | strategy (0 full, 1 stack, 2 queue) |
//! | 6 | 2 | zero |
//! | 8 | 4 | epoch |
//! | 12 | 4 | vocab `\|V\|` |
//! | 16 | 2 | n |
//! | 18 | 2 | k |
//! | 20 | 4 | d |
//! | 24 | 4 | β |
//! | 28 | ⌈\|V\|·n·b / 8⌉ | codes, `b = ⌈log2 k⌉` bits each (1 when k = 1), item-major, MSB first, zero-padded |
//! | … | 4β | slot list, u32 row indices in application order |
//! | … | 4βd | replaced rows, f32 row-major |
//! | … | 4 | CRC-32 (IEEE) of all preceding bytes |
//!
//! Stack top is the most recently inserted row; after deployment that is the
//! highest row index. Queue front is the oldest row (row 0 after deployment).
//!
//! # Compressed model (`.odcm`)
//!
//! `"ODCM"`, version u8 = 1, three zero bytes, u32 |V|, u32 d, u16 n, u16 k,
//! packed codes as above, `nk·d` f32 store rows, CRC-32.
//!
//! # Embedding checkpoint (`.odck`)
//!
//! `"ODCK"`, version u8 = 1, encoder kind u8 (0 mean-pool, 1 last-item
//! gated), two zero bytes, gate logit f32, then the table section
//! (u32 rows, u32 cols, `rows·cols` f32 row-major), CRC-32.

mod binio;
mod bits;
mod frame;
mod model_file;

pub(crate) use binio::{check_crc, expect_magic, ByteReader, ByteWriter};
pub use bits::{code_bits, pack_codes, packed_len, unpack_codes};
pub use frame::{
    decode_delta, delta_bytes, delta_bytes_one_hot, encode_delta, table_bytes, DELTA_HEADER_LEN, DELTA_MAGIC,
    DELTA_VERSION,
};
pub(crate) use model_file::{read_table, write_table};
pub use model_file::{
    compressed_model_bytes, decode_model, decode_table_section, encode_model, encode_table_section, MODEL_MAGIC,
    MODEL_VERSION,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("buffer truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },

    #[error("{extra} trailing bytes after a {expected}-byte frame")]
    TrailingBytes { expected: usize, extra: usize },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),

    #[error("unknown strategy byte {0}")]
    UnknownStrategy(u8),

    #[error("reserved header bytes are not zero")]
    ReservedNonZero,

    #[error("CRC mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { stored: u32, computed: u32 },

    #[error("code {value} at position {position} is out of range for k = {k}")]
    CodeOutOfRange { position: usize, value: u16, k: usize },

    #[error("slot {slot} is out of range for nk = {nk}")]
    SlotOutOfRange { slot: u32, nk: usize },

    #[error("slot {0} appears twice")]
    DuplicateSlot(u32),

    #[error("invalid dimensions: {0}")]
    BadDimensions(String),

    #[error("non-finite float in payload")]
    NonFinite,
}
