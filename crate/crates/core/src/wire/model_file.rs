use crate::codec::{CodeMatrix, CodebookStore};
use crate::error::{Error, Result};
use crate::numkit::Matrix;

use super::{check_crc, code_bits, expect_magic, pack_codes, packed_len, unpack_codes, ByteReader, ByteWriter, WireError};

pub const MODEL_MAGIC: [u8; 4] = *b"ODCM";
pub const MODEL_VERSION: u8 = 1;

const MODEL_HEADER_LEN: usize = 20;

pub fn compressed_model_bytes(vocab: usize, d: usize, n: usize, k: usize) -> usize {
    MODEL_HEADER_LEN + packed_len(vocab * n, code_bits(k)) + 4 * n * k * d + 4
}

/// Writes the table section: u32 rows, u32 cols, f32 row-major values.
pub(crate) fn write_table(w: &mut ByteWriter, table: &Matrix) -> Result<()> {
    let rows = u32::try_from(table.rows()).map_err(|_| Error::invalid("too many rows"))?;
    let cols = u32::try_from(table.cols()).map_err(|_| Error::invalid("too many columns"))?;
    w.u32(rows);
    w.u32(cols);
    for &v in table.as_slice() {
        w.f32(v as f32);
    }
    Ok(())
}

pub(crate) fn read_table(r: &mut ByteReader<'_>) -> Result<Matrix, WireError> {
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let count = rows
        .checked_mul(cols)
        .filter(|c| c.checked_mul(4).is_some_and(|b| b <= r.remaining()))
        .ok_or(WireError::Truncated {
            needed: r.position() + rows.saturating_mul(cols).saturating_mul(4),
            available: r.position() + r.remaining(),
        })?;
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        let v = r.f32()?;
        if !v.is_finite() {
            return Err(WireError::NonFinite);
        }
        data.push(v as f64);
    }
    Ok(Matrix::from_vec(rows, cols, data).expect("length and finiteness checked"))
}

/// Standalone table section followed by a CRC.
pub fn encode_table_section(table: &Matrix) -> Result<Vec<u8>> {
    let mut w = ByteWriter::with_capacity(8 + table.as_slice().len() * 4 + 4);
    write_table(&mut w, table)?;
    Ok(w.seal())
}

pub fn decode_table_section(bytes: &[u8]) -> Result<Matrix, WireError> {
    let body = check_crc(bytes)?;
    let mut r = ByteReader::new(body);
    let m = read_table(&mut r)?;
    if r.remaining() != 0 {
        return Err(WireError::TrailingBytes {
            expected: bytes.len() - r.remaining(),
            extra: r.remaining(),
        });
    }
    Ok(m)
}

/// Serializes a deployed compressed model (codes + full store).
pub fn encode_model(store: &CodebookStore, codes: &CodeMatrix) -> Result<Vec<u8>> {
    if codes.n() != store.n() || codes.k() != store.k() {
        return Err(Error::invalid("codes and store disagree on n/k"));
    }
    let (vocab, d, n, k) = (codes.vocab(), store.d(), store.n(), store.k());
    let mut w = ByteWriter::with_capacity(compressed_model_bytes(vocab, d, n, k));
    w.bytes(&MODEL_MAGIC);
    w.u8(MODEL_VERSION);
    w.bytes(&[0, 0, 0]);
    w.u32(u32::try_from(vocab).map_err(|_| Error::invalid("vocab too large"))?);
    w.u32(u32::try_from(d).map_err(|_| Error::invalid("d too large"))?);
    w.u16(u16::try_from(n).map_err(|_| Error::invalid("n too large"))?);
    w.u16(u16::try_from(k).map_err(|_| Error::invalid("k too large"))?);
    w.bytes(&pack_codes(codes.as_slice(), code_bits(k)));
    for &v in store.rows().as_slice() {
        w.f32(v as f32);
    }
    Ok(w.seal())
}

pub fn decode_model(bytes: &[u8]) -> Result<(CodebookStore, CodeMatrix), WireError> {
    let mut r = ByteReader::new(bytes);
    expect_magic(&mut r, &MODEL_MAGIC)?;
    let version = r.u8()?;
    if version != MODEL_VERSION {
        return Err(WireError::UnsupportedVersion(version));
    }
    let reserved = r.take(3)?;
    let vocab = r.u32()? as usize;
    let d = r.u32()? as usize;
    let n = r.u16()? as usize;
    let k = r.u16()? as usize;
    if vocab == 0 || d == 0 || n == 0 || k == 0 {
        return Err(WireError::BadDimensions(format!("vocab={vocab} d={d} n={n} k={k}")));
    }
    let expected = (vocab as u128 * n as u128 * code_bits(k) as u128).div_ceil(8)
        + MODEL_HEADER_LEN as u128
        + 4 * (n * k) as u128 * d as u128
        + 4;
    if (bytes.len() as u128) < expected {
        return Err(WireError::Truncated {
            needed: usize::try_from(expected).unwrap_or(usize::MAX),
            available: bytes.len(),
        });
    }
    if bytes.len() as u128 > expected {
        return Err(WireError::TrailingBytes {
            expected: expected as usize,
            extra: bytes.len() - expected as usize,
        });
    }
    check_crc(bytes)?;
    if reserved != [0, 0, 0] {
        return Err(WireError::ReservedNonZero);
    }
    let bits = code_bits(k);
    let codes = unpack_codes(r.take(packed_len(vocab * n, bits))?, vocab * n, bits);
    if let Some(position) = codes.iter().position(|&c| c as usize >= k) {
        return Err(WireError::CodeOutOfRange {
            position,
            value: codes[position],
            k,
        });
    }
    let mut rows = Vec::with_capacity(n * k * d);
    for _ in 0..n * k * d {
        let v = r.f32()?;
        if !v.is_finite() {
            return Err(WireError::NonFinite);
        }
        rows.push(v as f64);
    }
    let store = CodebookStore::new(n, k, Matrix::from_vec(n * k, d, rows).expect("checked")).expect("checked");
    let codes = CodeMatrix::new(vocab, n, k, codes).expect("checked");
    Ok((store, codes))
}
