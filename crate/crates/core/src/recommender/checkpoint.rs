use crate::error::{Error, Result};
use crate::wire::{check_crc, expect_magic, read_table, write_table, ByteReader, ByteWriter, WireError};

use super::model::{EncoderKind, RecModel, SessionEncoder};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"ODCK";
pub const CHECKPOINT_VERSION: u8 = 1;

pub fn encode_checkpoint(model: &RecModel) -> Result<Vec<u8>> {
    let mut w = ByteWriter::with_capacity(20 + 4 * model.embeddings.as_slice().len());
    w.bytes(&CHECKPOINT_MAGIC);
    w.u8(CHECKPOINT_VERSION);
    w.u8(model.encoder.kind.code());
    w.u16(0);
    w.f32(model.encoder.gate_logit as f32);
    write_table(&mut w, &model.embeddings)?;
    Ok(w.seal())
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<RecModel> {
    let body = check_crc(bytes)?;
    let mut r = ByteReader::new(body);
    expect_magic(&mut r, &CHECKPOINT_MAGIC)?;
    let version = r.u8()?;
    if version != CHECKPOINT_VERSION {
        return Err(WireError::UnsupportedVersion(version).into());
    }
    let kind = r.u8()?;
    let kind = EncoderKind::from_code(kind).ok_or_else(|| Error::Data(format!("unknown encoder kind {kind}")))?;
    if r.u16()? != 0 {
        return Err(WireError::ReservedNonZero.into());
    }
    let gate = r.f32()?;
    if !gate.is_finite() {
        return Err(WireError::NonFinite.into());
    }
    let table = read_table(&mut r)?;
    if r.remaining() != 0 {
        return Err(WireError::TrailingBytes {
            expected: bytes.len() - r.remaining(),
            extra: r.remaining(),
        }
        .into());
    }
    if table.rows() == 0 || table.cols() < 2 {
        return Err(WireError::BadDimensions(format!("{}x{} table", table.rows(), table.cols())).into());
    }
    Ok(RecModel::from_table(
        table,
        SessionEncoder {
            kind,
            gate_logit: gate as f64,
        },
    ))
}
