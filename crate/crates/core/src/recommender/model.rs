use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{dot, sigmoid, Matrix, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderKind {
    /// `s = mean(x_i)`
    MeanPool,
    /// `s = g·x_last + (1 − g)·mean(x_i)`, `g = sigmoid(gate_logit)`
    LastItemGated,
}

impl EncoderKind {
    pub fn code(self) -> u8 {
        match self {
            EncoderKind::MeanPool => 0,
            EncoderKind::LastItemGated => 1,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(EncoderKind::MeanPool),
            1 => Some(EncoderKind::LastItemGated),
            _ => None,
        }
    }
}

impl std::str::FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean-pool" | "mean" => Ok(EncoderKind::MeanPool),
            "last-item-gated" | "gated" => Ok(EncoderKind::LastItemGated),
            other => Err(Error::invalid(format!("unknown encoder kind {other:?}"))),
        }
    }
}

/// The non-embedding part of the recommender: how a prefix becomes a session vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionEncoder {
    pub kind: EncoderKind,
    pub gate_logit: f64,
}

impl SessionEncoder {
    pub fn mean_pool() -> Self {
        Self {
            kind: EncoderKind::MeanPool,
            gate_logit: 0.0,
        }
    }

    pub fn gated(gate_logit: f64) -> Self {
        Self {
            kind: EncoderKind::LastItemGated,
            gate_logit,
        }
    }

    pub fn gate(&self) -> f64 {
        sigmoid(self.gate_logit)
    }

    /// Session vector for `prefix` under `table`.
    pub fn encode(&self, table: &Matrix, prefix: &[usize]) -> Result<Vec<f64>> {
        if prefix.is_empty() {
            return Err(Error::invalid("empty session prefix"));
        }
        if let Some(&bad) = prefix.iter().find(|&&i| i >= table.rows()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                limit: table.rows(),
            });
        }
        Ok(self.encode_unchecked(table, prefix))
    }

    pub(crate) fn encode_unchecked(&self, table: &Matrix, prefix: &[usize]) -> Vec<f64> {
        let mut s = mean_rows(table, prefix);
        if self.kind == EncoderKind::LastItemGated {
            let g = self.gate();
            let last = table.row(*prefix.last().unwrap());
            for (sv, &xv) in s.iter_mut().zip(last) {
                *sv = g * xv + (1.0 - g) * *sv;
            }
        }
        s
    }
}

pub(crate) fn mean_rows(table: &Matrix, idx: &[usize]) -> Vec<f64> {
    let mut s = vec![0.0; table.cols()];
    for &i in idx {
        for (sv, &xv) in s.iter_mut().zip(table.row(i)) {
            *sv += xv;
        }
    }
    let inv = 1.0 / idx.len() as f64;
    for sv in &mut s {
        *sv *= inv;
    }
    s
}

/// Item embedding table plus session encoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecModel {
    pub embeddings: Matrix,
    pub encoder: SessionEncoder,
    /// When set, training leaves the gate untouched.
    pub gate_frozen: bool,
}

impl RecModel {
    /// Embeddings uniform in `[−0.1, 0.1]`, gate at 0.5.
    pub fn new(vocab: usize, d: usize, kind: EncoderKind, rng: &mut Rng) -> Result<Self> {
        if vocab == 0 || d < 2 {
            return Err(Error::invalid("need |V| >= 1 and d >= 2"));
        }
        Ok(Self {
            embeddings: Matrix::uniform(vocab, d, -0.1, 0.1, rng),
            encoder: SessionEncoder {
                kind,
                gate_logit: 0.0,
            },
            gate_frozen: false,
        })
    }

    pub fn from_table(embeddings: Matrix, encoder: SessionEncoder) -> Self {
        Self {
            embeddings,
            encoder,
            gate_frozen: false,
        }
    }

    pub fn vocab(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn d(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn encode_session(&self, prefix: &[usize]) -> Result<Vec<f64>> {
        self.encoder.encode(&self.embeddings, prefix)
    }

    pub fn score_all(&self, s: &[f64]) -> Result<Vec<f64>> {
        score_all(&self.embeddings, s)
    }
}

/// `score_v = X_v · s` for every item.
pub fn score_all(table: &Matrix, s: &[f64]) -> Result<Vec<f64>> {
    if s.len() != table.cols() {
        return Err(Error::invalid(format!("session vector has {} dims, table has {}", s.len(), table.cols())));
    }
    Ok(table.iter_rows().map(|row| dot(row, s)).collect())
}

/// 1-based rank of `item` under descending score, ties to the lower index.
pub fn rank_of(scores: &[f64], item: usize) -> usize {
    let target = scores[item];
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(i, &v)| v > target || (v == target && i < item))
        .count()
}

/// The `k` best items, best first.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> Matrix {
        Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 1.0]]).unwrap()
    }

    #[test]
    fn single_item_session_is_that_item() {
        let t = table();
        for enc in [SessionEncoder::mean_pool(), SessionEncoder::gated(-1.3)] {
            assert_eq!(enc.encode(&t, &[2]).unwrap(), vec![3.0, 1.0]);
        }
    }

    #[test]
    fn mean_and_gate_limit() {
        let t = table();
        assert_eq!(SessionEncoder::mean_pool().encode(&t, &[0, 1]).unwrap(), vec![0.5, 1.0]);
        // g = sigmoid(800) = 1 exactly in f64
        assert_eq!(SessionEncoder::gated(800.0).encode(&t, &[0, 2, 1]).unwrap(), vec![0.0, 2.0]);
        assert!(SessionEncoder::mean_pool().encode(&t, &[]).is_err());
        assert!(SessionEncoder::mean_pool().encode(&t, &[3]).is_err());
    }

    #[test]
    fn hand_ranking() {
        let t = table();
        // s = (1, 1): scores 1, 2, 4 → ranking 2, 1, 0
        let scores = score_all(&t, &[1.0, 1.0]).unwrap();
        assert_eq!(scores, vec![1.0, 2.0, 4.0]);
        assert_eq!(top_k(&scores, 3), vec![2, 1, 0]);
        assert_eq!(rank_of(&scores, 0), 3);
    }

    #[test]
    fn zero_session_ranks_by_index() {
        let scores = score_all(&table(), &[0.0, 0.0]).unwrap();
        assert_eq!(top_k(&scores, 3), vec![0, 1, 2]);
        assert_eq!(rank_of(&scores, 1), 2);
    }

    #[test]
    fn self_similarity_ranks_first() {
        let mut rng = Rng::new(3);
        let mut rows = Vec::new();
        for _ in 0..20 {
            let v: Vec<f64> = (0..5).map(|_| rng.normal()).collect();
            let norm = dot(&v, &v).sqrt();
            rows.push(v.iter().map(|x| x / norm).collect::<Vec<_>>());
        }
        let t = Matrix::from_rows(&rows).unwrap();
        for v in 0..20 {
            let scores = score_all(&t, t.row(v)).unwrap();
            assert_eq!(rank_of(&scores, v), 1);
        }
    }
}
