use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{dot, Matrix};
use crate::sessiondata::{Pair, SessionDataset};

use super::model::{rank_of, RecModel, SessionEncoder};

/// Prec@K (hit rate) and NDCG@K.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub k: usize,
    pub prec: f64,
    pub ndcg: f64,
}

/// Per-pair contributions `(hit, ndcg)` for a 1-based rank.
pub fn contribution(rank: usize, k: usize) -> (f64, f64) {
    if rank <= k {
        (1.0, 1.0 / ((rank + 1) as f64).log2())
    } else {
        (0.0, 0.0)
    }
}

const CHUNK: usize = 256;

fn label_rank(table: &Matrix, encoder: &SessionEncoder, pair: &Pair, scores: &mut [f64]) -> usize {
    let s = encoder.encode_unchecked(table, &pair.prefix);
    for (sc, row) in scores.iter_mut().zip(table.iter_rows()) {
        *sc = dot(row, &s);
    }
    rank_of(scores, pair.label)
}

/// Label ranks for every pair, computed across threads in fixed-size chunks.
pub fn ranks(table: &Matrix, encoder: &SessionEncoder, data: &SessionDataset) -> Result<Vec<usize>> {
    for p in &data.pairs {
        if p.prefix.is_empty() {
            return Err(Error::invalid("pair with empty prefix"));
        }
        if let Some(&bad) = p.prefix.iter().chain(std::iter::once(&p.label)).find(|&&i| i >= table.rows()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                limit: table.rows(),
            });
        }
    }
    let chunks: Vec<&[Pair]> = data.pairs.chunks(CHUNK).collect();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(chunks.len().max(1));
    let mut out = vec![Vec::new(); chunks.len()];
    std::thread::scope(|scope| {
        let mut slots: Vec<&mut [Vec<usize>]> = Vec::new();
        let per = chunks.len().div_ceil(workers.max(1)).max(1);
        let mut rest = out.as_mut_slice();
        while !rest.is_empty() {
            let take = per.min(rest.len());
            let (head, tail) = rest.split_at_mut(take);
            slots.push(head);
            rest = tail;
        }
        for (w, slot) in slots.into_iter().enumerate() {
            let chunks = &chunks;
            scope.spawn(move || {
                let mut scores = vec![0.0; table.rows()];
                for (j, dst) in slot.iter_mut().enumerate() {
                    *dst = chunks[w * per + j]
                        .iter()
                        .map(|p| label_rank(table, encoder, p, &mut scores))
                        .collect();
                }
            });
        }
    });
    Ok(out.into_iter().flatten().collect())
}

/// Metrics at each cutoff in `ks` from one ranking pass.
pub fn evaluate_many(table: &Matrix, encoder: &SessionEncoder, data: &SessionDataset, ks: &[usize]) -> Result<Vec<Metrics>> {
    for &k in ks {
        if k == 0 || k > table.rows() {
            return Err(Error::invalid(format!("K = {k} must lie in [1, {}]", table.rows())));
        }
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset("no session pairs".into()));
    }
    let ranks = ranks(table, encoder, data)?;
    let n = ranks.len() as f64;
    Ok(ks
        .iter()
        .map(|&k| {
            let (mut hit, mut ndcg) = (0.0, 0.0);
            for &r in &ranks {
                let (h, g) = contribution(r, k);
                hit += h;
                ndcg += g;
            }
            Metrics {
                k,
                prec: hit / n,
                ndcg: ndcg / n,
            }
        })
        .collect())
}

/// Evaluation of an embedding table (e.g. one reconstituted on a device).
pub fn evaluate_table(table: &Matrix, encoder: &SessionEncoder, data: &SessionDataset, k: usize) -> Result<Metrics> {
    Ok(evaluate_many(table, encoder, data, &[k])?[0])
}

pub fn evaluate(model: &RecModel, data: &SessionDataset, k: usize) -> Result<Metrics> {
    evaluate_table(&model.embeddings, &model.encoder, data, k)
}
