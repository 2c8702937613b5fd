use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{dot, softmax_unchecked, Adam, Matrix, Rng};
use crate::sessiondata::{Pair, SessionDataset};

use super::model::{mean_rows, EncoderKind, RecModel, SessionEncoder};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            epochs: 25,
            batch: 100,
            l2: 1e-5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr <= 1.0) {
            return Err(Error::Config(format!("lr must lie in [0, 1], got {}", self.lr)));
        }
        if self.batch == 0 {
            return Err(Error::Config("batch must be at least 1".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::Config(format!("l2 must be non-negative, got {}", self.l2)));
        }
        Ok(())
    }
}

/// Gradient of the batch objective w.r.t. the table and the gate logit.
#[derive(Clone, Debug)]
pub struct RecGrad {
    pub table: Matrix,
    pub gate_logit: f64,
}

/// Mean softmax cross-entropy over `pairs` plus `l2·ΣX²`.
pub fn loss_and_grad(table: &Matrix, encoder: &SessionEncoder, pairs: &[&Pair], l2: f64) -> (f64, RecGrad) {
    let (vocab, d) = table.shape();
    let mut grad = Matrix::zeros(vocab, d);
    let mut dgate = 0.0;
    let mut ce = 0.0;
    let inv_b = 1.0 / pairs.len() as f64;
    let g = encoder.gate();
    let mut z = vec![0.0; vocab];
    let mut ds = vec![0.0; d];

    for pair in pairs {
        let prefix = &pair.prefix;
        let mean = mean_rows(table, prefix);
        let s = encoder.encode_unchecked(table, prefix);
        for (zv, row) in z.iter_mut().zip(table.iter_rows()) {
            *zv = dot(row, &s);
        }
        let label_logit = z[pair.label];
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        ce += lse - label_logit;
        softmax_unchecked(&mut z, 1.0);
        z[pair.label] -= 1.0;

        ds.iter_mut().for_each(|v| *v = 0.0);
        let gd = grad.as_mut_slice();
        for (v, &dz) in z.iter().enumerate() {
            let dz = dz * inv_b;
            let row = table.row(v);
            let grow = &mut gd[v * d..(v + 1) * d];
            for j in 0..d {
                grow[j] += dz * s[j];
                ds[j] += dz * row[j];
            }
        }

        let mean_w = match encoder.kind {
            EncoderKind::MeanPool => 1.0,
            EncoderKind::LastItemGated => 1.0 - g,
        } / prefix.len() as f64;
        for &i in prefix {
            for (gv, &dv) in grad.row_mut(i).iter_mut().zip(&ds) {
                *gv += mean_w * dv;
            }
        }
        if encoder.kind == EncoderKind::LastItemGated {
            let last = *prefix.last().unwrap();
            let xl = table.row(last);
            let mut dg = 0.0;
            for j in 0..d {
                dg += ds[j] * (xl[j] - mean[j]);
            }
            dgate += dg * g * (1.0 - g);
            for (gv, &dv) in grad.row_mut(last).iter_mut().zip(&ds) {
                *gv += g * dv;
            }
        }
    }

    let mut loss = ce * inv_b;
    if l2 > 0.0 {
        loss += l2 * table.frobenius_sq();
        for (gv, &xv) in grad.as_mut_slice().iter_mut().zip(table.as_slice()) {
            *gv += 2.0 * l2 * xv;
        }
    }
    (
        loss,
        RecGrad {
            table: grad,
            gate_logit: dgate,
        },
    )
}

fn check_dataset(model: &RecModel, data: &SessionDataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("no session pairs".into()));
    }
    for p in &data.pairs {
        if p.prefix.is_empty() {
            return Err(Error::invalid("pair with empty prefix"));
        }
        for &i in p.prefix.iter().chain(std::iter::once(&p.label)) {
            if i >= model.vocab() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    limit: model.vocab(),
                });
            }
        }
    }
    Ok(())
}

/// Mini-batch Adam on the table (and the gate unless frozen). Returns mean batch loss per epoch.
pub fn train(model: &mut RecModel, data: &SessionDataset, cfg: &TrainConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    check_dataset(model, data)?;
    let learn_gate = model.encoder.kind == EncoderKind::LastItemGated && !model.gate_frozen;
    let mut rng = Rng::new(cfg.seed);
    let mut opt = Adam::new(model.embeddings.as_slice().len(), cfg.lr);
    let mut gate_opt = Adam::new(1, cfg.lr);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch) {
            let pairs: Vec<&Pair> = chunk.iter().map(|&i| &data.pairs[i]).collect();
            let (loss, grad) = loss_and_grad(&model.embeddings, &model.encoder, &pairs, cfg.l2);
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged {
                    stage: "recommender",
                    epoch,
                });
            }
            total += loss;
            batches += 1;
            opt.step(model.embeddings.as_mut_slice(), grad.table.as_slice());
            if learn_gate {
                let mut g = [model.encoder.gate_logit];
                gate_opt.step(&mut g, &[grad.gate_logit]);
                model.encoder.gate_logit = g[0];
            }
        }
        if !model.embeddings.is_finite() || !model.encoder.gate_logit.is_finite() {
            return Err(Error::TrainingDiverged {
                stage: "recommender",
                epoch,
            });
        }
        curve.push(total / batches as f64);
    }
    Ok(curve)
}
