#![allow(dead_code)]

use odup_core::codec::CodeMatrix;
use odup_core::numkit::{Matrix, Rng};
use odup_core::updater::{Strategy, UpdateDelta};

/// A frame-valid delta with f32-exact rows and distinct slots.
pub fn random_delta(rng: &mut Rng, vocab: usize, n: usize, k: usize, d: usize, beta: usize, strategy: Strategy) -> UpdateDelta {
    let codes: Vec<u16> = (0..vocab * n).map(|_| rng.below(k) as u16).collect();
    let mut slots: Vec<usize> = (0..n * k).collect();
    rng.shuffle(&mut slots);
    slots.truncate(beta);
    let rows: Vec<f64> = (0..beta * d).map(|_| rng.normal() as f32 as f64).collect();
    UpdateDelta {
        epoch: 1 + rng.below(1000) as u32,
        strategy,
        codes: CodeMatrix::new(vocab, n, k, codes).unwrap(),
        slots,
        new_rows: Matrix::from_vec(beta, d, rows).unwrap(),
    }
}

/// Random delta shape: `(vocab, n, k, d, beta, strategy)`.
pub fn random_shape(rng: &mut Rng) -> (usize, usize, usize, usize, usize, Strategy) {
    let n = 1 + rng.below(6);
    let k = 1 + rng.below(64);
    let vocab = 1 + rng.below(300);
    let d = 1 + rng.below(16);
    let strategy = [Strategy::Full, Strategy::Stack, Strategy::Queue][rng.below(3)];
    let beta = if strategy == Strategy::Full { n * k } else { 1 + rng.below(n * k) };
    (vocab, n, k, d, beta, strategy)
}

pub fn bits(m: &Matrix) -> Vec<u64> {
    m.as_slice().iter().map(|v| v.to_bits()).collect()
}
