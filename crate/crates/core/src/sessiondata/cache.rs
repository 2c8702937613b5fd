//! Binary dataset snapshot so ingestion and slicing run once.
//!
//! Layout (little-endian): `"ODDS"`, version u8 = 1, three zero bytes,
//! u32 vocab-table length, then per entry u32 byte length + UTF-8 id;
//! u32 dataset vocab size; u32 slice count; then every slice followed by the
//! test set, each as u32 slice id, u32 pair count and per pair u32 label,
//! u32 prefix length, u32 prefix items; trailing CRC-32.

use crate::error::{Error, Result};
use crate::wire::{check_crc, expect_magic, ByteReader, ByteWriter, WireError};

use super::{Pair, SessionDataset, SlicedData, Vocab};

pub const CACHE_MAGIC: [u8; 4] = *b"ODDS";
pub const CACHE_VERSION: u8 = 1;

fn u32_of(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::invalid(format!("{v} exceeds the cache's 32-bit fields")))
}

fn write_dataset(w: &mut ByteWriter, ds: &SessionDataset) -> Result<()> {
    w.u32(ds.slice_id);
    w.u32(u32_of(ds.pairs.len())?);
    for p in &ds.pairs {
        w.u32(u32_of(p.label)?);
        w.u32(u32_of(p.prefix.len())?);
        for &i in &p.prefix {
            w.u32(u32_of(i)?);
        }
    }
    Ok(())
}

fn read_dataset(r: &mut ByteReader<'_>, vocab_size: usize) -> Result<SessionDataset, WireError> {
    let slice_id = r.u32()?;
    let count = r.u32()? as usize;
    let mut pairs = Vec::with_capacity(count.min(r.remaining() / 8));
    for _ in 0..count {
        let label = r.u32()? as usize;
        let len = r.u32()? as usize;
        if len > r.remaining() / 4 {
            return Err(WireError::Truncated {
                needed: r.position() + len * 4,
                available: r.position() + r.remaining(),
            });
        }
        let mut prefix = Vec::with_capacity(len);
        for _ in 0..len {
            prefix.push(r.u32()? as usize);
        }
        if label >= vocab_size || prefix.iter().any(|&i| i >= vocab_size) || prefix.is_empty() {
            return Err(WireError::BadDimensions(format!("pair references items outside vocab {vocab_size}")));
        }
        pairs.push(Pair { prefix, label });
    }
    Ok(SessionDataset {
        pairs,
        vocab_size,
        slice_id,
    })
}

pub fn write_cache(vocab: &Vocab, data: &SlicedData) -> Result<Vec<u8>> {
    let mut w = ByteWriter::default();
    w.bytes(&CACHE_MAGIC);
    w.u8(CACHE_VERSION);
    w.bytes(&[0, 0, 0]);
    w.u32(u32_of(vocab.len())?);
    for id in vocab.ids() {
        w.u32(u32_of(id.len())?);
        w.bytes(id.as_bytes());
    }
    w.u32(u32_of(data.vocab_size)?);
    w.u32(u32_of(data.slices.len())?);
    for ds in data.slices.iter().chain(std::iter::once(&data.test)) {
        write_dataset(&mut w, ds)?;
    }
    Ok(w.seal())
}

pub fn read_cache(bytes: &[u8]) -> Result<(Vocab, SlicedData)> {
    let body = check_crc(bytes)?;
    let mut r = ByteReader::new(body);
    expect_magic(&mut r, &CACHE_MAGIC)?;
    let version = r.u8()?;
    if version != CACHE_VERSION {
        return Err(WireError::UnsupportedVersion(version).into());
    }
    r.take(3)?;
    let n_ids = r.u32()? as usize;
    let mut ids = Vec::with_capacity(n_ids.min(r.remaining() / 4));
    for _ in 0..n_ids {
        let len = r.u32()? as usize;
        let raw = r.take(len)?;
        ids.push(
            String::from_utf8(raw.to_vec()).map_err(|_| Error::Data("vocabulary entry is not UTF-8".into()))?,
        );
    }
    let vocab_size = r.u32()? as usize;
    let n_slices = r.u32()? as usize;
    let mut slices = Vec::with_capacity(n_slices.min(1024));
    for _ in 0..n_slices {
        slices.push(read_dataset(&mut r, vocab_size)?);
    }
    let test = read_dataset(&mut r, vocab_size)?;
    if r.remaining() != 0 {
        return Err(WireError::TrailingBytes {
            expected: bytes.len() - r.remaining(),
            extra: r.remaining(),
        }
        .into());
    }
    Ok((
        Vocab::from_ids(ids),
        SlicedData {
            vocab_size,
            slices,
            test,
        },
    ))
}
