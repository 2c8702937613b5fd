/// Bits per code component: `⌈log2 k⌉`, at least 1.
pub fn code_bits(k: usize) -> u32 {
    if k <= 2 {
        1
    } else {
        usize::BITS - (k - 1).leading_zeros()
    }
}

/// Byte length of `count` packed values at `bits` each.
pub fn packed_len(count: usize, bits: u32) -> usize {
    (count * bits as usize).div_ceil(8)
}

/// Packs values MSB-first into a continuous bitstream, zero-padded to a byte.
pub fn pack_codes(values: &[u16], bits: u32) -> Vec<u8> {
    let mut out = vec![0u8; packed_len(values.len(), bits)];
    let mut bitpos = 0usize;
    for &v in values {
        for b in (0..bits).rev() {
            if (v >> b) & 1 == 1 {
                out[bitpos / 8] |= 0x80 >> (bitpos % 8);
            }
            bitpos += 1;
        }
    }
    out
}

/// Inverse of [`pack_codes`]. `bytes` must hold at least `packed_len(count, bits)` bytes.
pub fn unpack_codes(bytes: &[u8], count: usize, bits: u32) -> Vec<u16> {
    let mut out = Vec::with_capacity(count);
    let mut bitpos = 0usize;
    for _ in 0..count {
        let mut v = 0u16;
        for _ in 0..bits {
            let bit = (bytes[bitpos / 8] >> (7 - bitpos % 8)) & 1;
            v = (v << 1) | bit as u16;
            bitpos += 1;
        }
        out.push(v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bit_widths() {
        assert_eq!(code_bits(1), 1);
        assert_eq!(code_bits(2), 1);
        assert_eq!(code_bits(3), 2);
        assert_eq!(code_bits(16), 4);
        assert_eq!(code_bits(17), 5);
        assert_eq!(code_bits(32), 5);
        assert_eq!(code_bits(65535), 16);
    }

    #[test]
    fn msb_first_layout() {
        // 5,3,4 at 3 bits: 101 011 100, then 7 bits of padding
        let bytes = pack_codes(&[5, 3, 4], 3);
        assert_eq!(bytes, vec![0b1010_1110, 0b0000_0000]);
        let bytes = pack_codes(&[1, 0, 1, 1, 0, 0, 0, 1, 1], 1);
        assert_eq!(bytes, vec![0b1011_0001, 0b1000_0000]);
    }

    proptest! {
        #[test]
        fn pack_roundtrip(k in 1usize..5000, raw in proptest::collection::vec(any::<u16>(), 0..200)) {
            let bits = code_bits(k);
            let vals: Vec<u16> = raw.iter().map(|v| (*v as usize % k) as u16).collect();
            let packed = pack_codes(&vals, bits);
            prop_assert_eq!(packed.len(), packed_len(vals.len(), bits));
            prop_assert_eq!(unpack_codes(&packed, vals.len(), bits), vals);
        }
    }
}
