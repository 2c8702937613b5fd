use crate::codec::CodeMatrix;
use crate::error::{Error, Result};
use crate::numkit::Matrix;
use crate::updater::{Strategy, UpdateDelta};

use super::{check_crc, code_bits, expect_magic, pack_codes, packed_len, unpack_codes, ByteReader, ByteWriter, WireError};

pub const DELTA_MAGIC: [u8; 4] = *b"ODUP";
pub const DELTA_VERSION: u8 = 1;
pub const DELTA_HEADER_LEN: usize = 28;

/// Exact encoded length of a delta frame.
pub fn delta_bytes(vocab: usize, n: usize, k: usize, d: usize, beta: usize) -> usize {
    DELTA_HEADER_LEN + packed_len(vocab * n, code_bits(k)) + 4 * beta + 4 * beta * d + 4
}

/// Frame length if codes were sent as a one-hot bit matrix (`|V|·nk` bits).
pub fn delta_bytes_one_hot(vocab: usize, n: usize, k: usize, d: usize, beta: usize) -> usize {
    DELTA_HEADER_LEN + (vocab * n * k).div_ceil(8) + 4 * beta + 4 * beta * d + 4
}

/// Bytes of an uncompressed f32 embedding table.
pub fn table_bytes(vocab: usize, d: usize) -> usize {
    vocab * d * 4
}

fn narrow<T: TryFrom<usize>>(v: usize, what: &str) -> Result<T> {
    T::try_from(v).map_err(|_| Error::invalid(format!("{what} = {v} does not fit the frame header")))
}

/// Serializes a delta. Row values are written as `f32`.
pub fn encode_delta(delta: &UpdateDelta) -> Result<Vec<u8>> {
    delta.validate()?;
    let codes = &delta.codes;
    let (vocab, n, k, d, beta) = (codes.vocab(), codes.n(), codes.k(), delta.d(), delta.beta());
    let total = delta_bytes(vocab, n, k, d, beta);
    let mut w = ByteWriter::with_capacity(total);
    w.bytes(&DELTA_MAGIC);
    w.u8(DELTA_VERSION);
    w.u8(delta.strategy.wire_code());
    w.u16(0);
    w.u32(delta.epoch);
    w.u32(narrow(vocab, "vocab")?);
    w.u16(narrow(n, "n")?);
    w.u16(narrow(k, "k")?);
    w.u32(narrow(d, "d")?);
    w.u32(narrow(beta, "beta")?);
    w.bytes(&pack_codes(codes.as_slice(), code_bits(k)));
    for &s in &delta.slots {
        w.u32(s as u32);
    }
    for &v in delta.new_rows.as_slice() {
        w.f32(v as f32);
    }
    let out = w.seal();
    debug_assert_eq!(out.len(), total);
    Ok(out)
}

/// Parses and validates a delta frame.
///
/// Checks run in this order: length floor, magic, version, header
/// dimensions, exact length, CRC, strategy and reserved bytes, code range,
/// slot range and uniqueness, float finiteness.
pub fn decode_delta(bytes: &[u8]) -> Result<UpdateDelta, WireError> {
    if bytes.len() < DELTA_HEADER_LEN + 4 {
        return Err(WireError::Truncated {
            needed: DELTA_HEADER_LEN + 4,
            available: bytes.len(),
        });
    }
    let mut r = ByteReader::new(bytes);
    expect_magic(&mut r, &DELTA_MAGIC)?;
    let version = r.u8()?;
    if version != DELTA_VERSION {
        return Err(WireError::UnsupportedVersion(version));
    }
    let strategy_byte = r.u8()?;
    let reserved = r.u16()?;
    let epoch = r.u32()?;
    let vocab = r.u32()? as usize;
    let n = r.u16()? as usize;
    let k = r.u16()? as usize;
    let d = r.u32()? as usize;
    let beta = r.u32()? as usize;
    if vocab == 0 || n == 0 || k == 0 || d == 0 {
        return Err(WireError::BadDimensions(format!("vocab={vocab} n={n} k={k} d={d}")));
    }
    let nk = n * k;
    if beta == 0 || beta > nk {
        return Err(WireError::BadDimensions(format!("beta={beta} outside [1, {nk}]")));
    }
    let expected = (vocab as u128 * n as u128 * code_bits(k) as u128).div_ceil(8)
        + DELTA_HEADER_LEN as u128
        + 4 * beta as u128 * (d as u128 + 1)
        + 4;
    if (bytes.len() as u128) < expected {
        return Err(WireError::Truncated {
            needed: usize::try_from(expected).unwrap_or(usize::MAX),
            available: bytes.len(),
        });
    }
    let expected = expected as usize;
    if bytes.len() > expected {
        return Err(WireError::TrailingBytes {
            expected,
            extra: bytes.len() - expected,
        });
    }
    check_crc(bytes)?;
    let strategy = Strategy::from_wire(strategy_byte).ok_or(WireError::UnknownStrategy(strategy_byte))?;
    if reserved != 0 {
        return Err(WireError::ReservedNonZero);
    }
    if strategy == Strategy::Full && beta != nk {
        return Err(WireError::BadDimensions(format!("full frame with beta={beta}, nk={nk}")));
    }

    let bits = code_bits(k);
    let packed = r.take(packed_len(vocab * n, bits))?;
    let codes = unpack_codes(packed, vocab * n, bits);
    if let Some(position) = codes.iter().position(|&c| c as usize >= k) {
        return Err(WireError::CodeOutOfRange {
            position,
            value: codes[position],
            k,
        });
    }
    let mut seen = vec![false; nk];
    let mut slots = Vec::with_capacity(beta);
    for _ in 0..beta {
        let s = r.u32()?;
        let idx = s as usize;
        if idx >= nk {
            return Err(WireError::SlotOutOfRange { slot: s, nk });
        }
        if std::mem::replace(&mut seen[idx], true) {
            return Err(WireError::DuplicateSlot(s));
        }
        slots.push(idx);
    }
    let mut rows = Vec::with_capacity(beta * d);
    for _ in 0..beta * d {
        let v = r.f32()?;
        if !v.is_finite() {
            return Err(WireError::NonFinite);
        }
        rows.push(v as f64);
    }
    debug_assert_eq!(r.remaining(), 4);

    let codes = CodeMatrix::new(vocab, n, k, codes).expect("codes validated above");
    let new_rows = Matrix::from_vec(beta, d, rows).expect("rows validated above");
    Ok(UpdateDelta {
        epoch,
        strategy,
        codes,
        slots,
        new_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Rng;

    fn random_delta(rng: &mut Rng, vocab: usize, n: usize, k: usize, d: usize, beta: usize) -> UpdateDelta {
        let codes: Vec<u16> = (0..vocab * n).map(|_| rng.below(k) as u16).collect();
        let mut slots: Vec<usize> = (0..n * k).collect();
        rng.shuffle(&mut slots);
        slots.truncate(beta);
        let rows: Vec<f64> = (0..beta * d).map(|_| rng.normal() as f32 as f64).collect();
        UpdateDelta {
            epoch: 7,
            strategy: Strategy::Queue,
            codes: CodeMatrix::new(vocab, n, k, codes).unwrap(),
            slots,
            new_rows: Matrix::from_vec(beta, d, rows).unwrap(),
        }
    }

    #[test]
    fn layout_size_example() {
        assert_eq!(delta_bytes(1000, 8, 16, 32, 16), 6144);
        let delta = random_delta(&mut Rng::new(1), 1000, 8, 16, 32, 16);
        assert_eq!(encode_delta(&delta).unwrap().len(), 6144);
    }

    #[test]
    fn lastfm_scale_bytes() {
        let bytes = delta_bytes(10_000, 20, 32, 128, 64);
        assert_eq!(bytes, 158_056);
        assert_eq!(table_bytes(10_000, 128), 5_120_000);
        let ratio = table_bytes(10_000, 128) as f64 / bytes as f64;
        assert!((ratio - 32.39).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn beta_difference() {
        let (n, k, d) = (4, 8, 16);
        let nk = n * k;
        let diff = delta_bytes(100, n, k, d, nk) - delta_bytes(100, n, k, d, 1);
        assert_eq!(diff, (nk - 1) * d * 4 + (nk - 1) * 4);
    }

    #[test]
    fn header_fields() {
        let delta = random_delta(&mut Rng::new(2), 5, 2, 4, 3, 2);
        let bytes = encode_delta(&delta).unwrap();
        assert_eq!(&bytes[0..4], b"ODUP");
        assert_eq!(bytes[4], 1);
        assert_eq!(bytes[5], 2);
        assert_eq!(&bytes[6..8], &[0, 0]);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 7);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 5);
        assert_eq!(u16::from_le_bytes(bytes[16..18].try_into().unwrap()), 2);
        assert_eq!(u16::from_le_bytes(bytes[18..20].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[24..28].try_into().unwrap()), 2);
        // 5 items × 2 codes × 2 bits = 20 bits → 3 bytes; then the slot list
        let slot0 = u32::from_le_bytes(bytes[31..35].try_into().unwrap());
        assert_eq!(slot0 as usize, delta.slots[0]);
    }

    #[test]
    fn roundtrip_and_idempotence() {
        let mut rng = Rng::new(3);
        for _ in 0..20 {
            let n = 1 + rng.below(4);
            let k = 1 + rng.below(40);
            let beta = 1 + rng.below(n * k);
            let vocab = 1 + rng.below(50);
            let d = 1 + rng.below(8);
            let delta = random_delta(&mut rng, vocab, n, k, d, beta);
            let bytes = encode_delta(&delta).unwrap();
            let back = decode_delta(&bytes).unwrap();
            assert_eq!(back, delta);
            assert_eq!(encode_delta(&back).unwrap(), bytes);
        }
    }

    #[test]
    fn truncation_and_trailing() {
        let bytes = encode_delta(&random_delta(&mut Rng::new(4), 10, 2, 4, 3, 2)).unwrap();
        assert!(matches!(decode_delta(&bytes[..bytes.len() - 1]), Err(WireError::Truncated { .. })));
        assert!(matches!(decode_delta(&bytes[..10]), Err(WireError::Truncated { .. })));
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(matches!(decode_delta(&longer), Err(WireError::TrailingBytes { .. })));
    }

    fn reseal(mut bytes: Vec<u8>) -> Vec<u8> {
        let body = bytes.len() - 4;
        let crc = crc32fast::hash(&bytes[..body]);
        bytes[body..].copy_from_slice(&crc.to_le_bytes());
        bytes
    }

    #[test]
    fn semantic_checks_after_crc() {
        // k = 3 uses 2 bits, so the value 3 is representable but out of range
        let delta = random_delta(&mut Rng::new(5), 4, 1, 3, 2, 1);
        let mut bytes = encode_delta(&delta).unwrap();
        bytes[28] |= 0b1100_0000;
        assert!(matches!(decode_delta(&reseal(bytes)), Err(WireError::CodeOutOfRange { position: 0, value: 3, k: 3 })));

        let mut bytes = encode_delta(&delta).unwrap();
        bytes[29..33].copy_from_slice(&99u32.to_le_bytes());
        assert!(matches!(decode_delta(&reseal(bytes)), Err(WireError::SlotOutOfRange { slot: 99, nk: 3 })));

        let mut bytes = encode_delta(&delta).unwrap();
        bytes[5] = 9;
        assert!(matches!(decode_delta(&reseal(bytes)), Err(WireError::UnknownStrategy(9))));

        let mut bytes = encode_delta(&delta).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode_delta(&bytes), Err(WireError::BadMagic { .. })));

        let mut bytes = encode_delta(&delta).unwrap();
        bytes[4] = 2;
        assert!(matches!(decode_delta(&bytes), Err(WireError::UnsupportedVersion(2))));
    }

    #[test]
    fn payload_bit_flip_is_crc_error() {
        let bytes = encode_delta(&random_delta(&mut Rng::new(6), 6, 2, 4, 2, 3)).unwrap();
        for bit in DELTA_HEADER_LEN * 8..bytes.len() * 8 {
            let mut c = bytes.clone();
            c[bit / 8] ^= 1 << (bit % 8);
            assert!(matches!(decode_delta(&c), Err(WireError::CrcMismatch { .. })), "bit {bit}");
        }
        for bit in 0..DELTA_HEADER_LEN * 8 {
            let mut c = bytes.clone();
            c[bit / 8] ^= 1 << (bit % 8);
            assert!(decode_delta(&c).is_err(), "header bit {bit}");
        }
    }

    #[test]
    fn k_one_uses_one_bit() {
        let delta = random_delta(&mut Rng::new(7), 9, 2, 1, 2, 1);
        let bytes = encode_delta(&delta).unwrap();
        assert_eq!(bytes.len(), DELTA_HEADER_LEN + 3 + 4 + 8 + 4);
        assert_eq!(decode_delta(&bytes).unwrap(), delta);
    }
}
