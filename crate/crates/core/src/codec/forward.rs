use crate::error::{Error, Result};
use crate::numkit::{dot, sigmoid, softmax_unchecked, softplus, Matrix, Rng, GUMBEL_EPS};

use super::{CodeMatrix, CodebookStore, CodecEncoder};

/// Intermediate values of one item's forward pass, kept for backprop.
pub(crate) struct ItemTrace {
    pub h: Vec<f64>,
    pub pre: Vec<f64>,
    pub alpha: Vec<f64>,
    pub relaxed: Vec<f64>,
}

/// `h = tanh(φᵀx + b)`, `α_i = softmax(softplus(φ'ᵀh + b')_i)` per codebook group.
pub(crate) fn alpha_into(enc: &CodecEncoder, x: &[f64], h: &mut Vec<f64>, pre: &mut Vec<f64>, alpha: &mut Vec<f64>) {
    let hidden = enc.hidden();
    let nk = enc.nk();
    h.clear();
    h.extend_from_slice(&enc.b);
    for (c, &xc) in x.iter().enumerate() {
        for (hj, &w) in h.iter_mut().zip(enc.phi.row(c)) {
            *hj += xc * w;
        }
    }
    for hj in h.iter_mut() {
        *hj = hj.tanh();
    }
    pre.clear();
    pre.extend_from_slice(&enc.b_prime);
    for j in 0..hidden {
        let hj = h[j];
        for (p, &w) in pre.iter_mut().zip(enc.phi_prime.row(j)) {
            *p += hj * w;
        }
    }
    alpha.clear();
    alpha.extend(pre.iter().map(|&v| softplus(v)));
    debug_assert_eq!(alpha.len(), nk);
    for group in alpha.chunks_exact_mut(enc.k) {
        softmax_unchecked(group, 1.0);
    }
}

/// Code-assignment probabilities for one embedding, as an `n × k` matrix
/// whose rows each sum to 1.
pub fn encoder_forward(enc: &CodecEncoder, x: &[f64]) -> Result<Matrix> {
    if x.len() != enc.d() {
        return Err(Error::invalid(format!("embedding has {} dims, encoder expects {}", x.len(), enc.d())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("embedding contains non-finite values"));
    }
    let (mut h, mut pre, mut alpha) = (Vec::new(), Vec::new(), Vec::new());
    alpha_into(enc, x, &mut h, &mut pre, &mut alpha);
    Matrix::from_vec(enc.n, enc.k, alpha)
}

/// `softmax((log α + G) / τ)` with the given noise; zero probabilities are floored at `ε`.
pub fn relax_with_noise(alpha_group: &[f64], noise: &[f64], tau: f64) -> Vec<f64> {
    let mut y: Vec<f64> = alpha_group
        .iter()
        .zip(noise)
        .map(|(&a, &g)| a.max(GUMBEL_EPS).ln() + g)
        .collect();
    softmax_unchecked(&mut y, tau);
    y
}

/// Gumbel-softmax relaxation of one k-way assignment with fresh noise.
pub fn gumbel_relax(alpha_group: &[f64], rng: &mut Rng, tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(Error::invalid("tau must be positive"));
    }
    if alpha_group.is_empty() || alpha_group.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return Err(Error::invalid("alpha must be a finite probability vector"));
    }
    let noise = crate::numkit::sample_gumbel(rng, alpha_group.len());
    Ok(relax_with_noise(alpha_group, &noise, tau))
}

/// `e_v = Σ_i E_i(code_i)`: the sum of rows `i·k + code_i`.
pub fn reconstruct_item(store: &CodebookStore, code: &[u16]) -> Result<Vec<f64>> {
    if code.len() != store.n() {
        return Err(Error::invalid(format!("code has {} components, store has {} codebooks", code.len(), store.n())));
    }
    let mut out = vec![0.0; store.d()];
    for (i, &c) in code.iter().enumerate() {
        let c = c as usize;
        if c >= store.k() {
            return Err(Error::IndexOutOfRange { index: c, limit: store.k() });
        }
        for (o, &v) in out.iter_mut().zip(store.row(i * store.k() + c)) {
            *o += v;
        }
    }
    Ok(out)
}

/// `X = OE` evaluated as a gather-sum over each item's codes.
pub fn reconstruct_table(store: &CodebookStore, codes: &CodeMatrix) -> Result<Matrix> {
    if codes.n() != store.n() || codes.k() != store.k() {
        return Err(Error::invalid("code matrix and store disagree on n/k"));
    }
    let mut data = Vec::with_capacity(codes.vocab() * store.d());
    for v in 0..codes.vocab() {
        data.extend(reconstruct_item(store, codes.row(v))?);
    }
    Matrix::from_vec(codes.vocab(), store.d(), data)
}

/// Per-group argmax of `α` (no noise, no temperature); ties go to the lowest index.
pub fn harden(enc: &CodecEncoder, target: &Matrix) -> Result<CodeMatrix> {
    if target.cols() != enc.d() {
        return Err(Error::invalid("target dimension does not match encoder"));
    }
    let (mut h, mut pre, mut alpha) = (Vec::new(), Vec::new(), Vec::new());
    let mut codes = Vec::with_capacity(target.rows() * enc.n);
    for x in target.iter_rows() {
        alpha_into(enc, x, &mut h, &mut pre, &mut alpha);
        codes.extend(alpha.chunks_exact(enc.k).map(|g| argmax(g) as u16));
    }
    CodeMatrix::new(target.rows(), enc.n, enc.k, codes)
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Forward trace with the relaxation driven by `noise` (length `nk`).
pub(crate) fn trace_item(enc: &CodecEncoder, x: &[f64], noise: Option<&[f64]>, tau: f64) -> ItemTrace {
    let (mut h, mut pre, mut alpha) = (Vec::new(), Vec::new(), Vec::new());
    alpha_into(enc, x, &mut h, &mut pre, &mut alpha);
    let k = enc.k;
    let mut relaxed = Vec::with_capacity(alpha.len());
    for (i, group) in alpha.chunks_exact(k).enumerate() {
        let g = match noise {
            Some(n) => relax_with_noise(group, &n[i * k..(i + 1) * k], tau),
            None => relax_with_noise(group, &vec![0.0; k], tau),
        };
        relaxed.extend(g);
    }
    ItemTrace { h, pre, alpha, relaxed }
}

/// Soft reconstruction `Σ_r o_r E_r`.
pub(crate) fn soft_embedding(store: &CodebookStore, weights: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; store.d()];
    for (r, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (o, &v) in e.iter_mut().zip(store.row(r)) {
            *o += w * v;
        }
    }
    e
}

/// Hard one-hot of the per-group argmax of `relaxed`.
pub(crate) fn hard_weights(relaxed: &[f64], k: usize) -> Vec<f64> {
    let mut w = vec![0.0; relaxed.len()];
    for (i, g) in relaxed.chunks_exact(k).enumerate() {
        w[i * k + argmax(g)] = 1.0;
    }
    w
}

/// Backpropagates `de = ∂L/∂e` through one item, accumulating into `grad_enc` and `grad_store`.
pub(crate) fn backward_item(
    enc: &CodecEncoder,
    store: &CodebookStore,
    x: &[f64],
    tr: &ItemTrace,
    forward_weights: &[f64],
    de: &[f64],
    tau: f64,
    grad_enc: &mut CodecEncoder,
    grad_store: &mut Matrix,
) {
    let k = enc.k;
    let nk = enc.nk();
    for (r, &w) in forward_weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (g, &dv) in grad_store.row_mut(r).iter_mut().zip(de) {
            *g += w * dv;
        }
    }
    // ∂L/∂o_r = E_r · de
    let d_relaxed: Vec<f64> = (0..nk).map(|r| dot(store.row(r), de)).collect();
    let mut d_pre = vec![0.0; nk];
    for i in 0..enc.n {
        let span = i * k..(i + 1) * k;
        let o = &tr.relaxed[span.clone()];
        let d_o = &d_relaxed[span.clone()];
        let alpha = &tr.alpha[span.clone()];
        // o = softmax(y/τ), y = log α + G
        let od: f64 = dot(o, d_o);
        let dy: Vec<f64> = o.iter().zip(d_o).map(|(&om, &dm)| om * (dm - od) / tau).collect();
        // log α = ℓ − logsumexp(ℓ)
        let sum_dy: f64 = dy.iter().sum();
        for (m, r) in span.enumerate() {
            let d_logit = dy[m] - alpha[m] * sum_dy;
            d_pre[r] = d_logit * sigmoid(tr.pre[r]);
        }
    }
    let hidden = enc.hidden();
    let mut dh = vec![0.0; hidden];
    for j in 0..hidden {
        let hj = tr.h[j];
        let wrow = enc.phi_prime.row(j);
        dh[j] = dot(wrow, &d_pre);
        for (g, &dp) in grad_enc.phi_prime.row_mut(j).iter_mut().zip(&d_pre) {
            *g += hj * dp;
        }
    }
    for (g, &dp) in grad_enc.b_prime.iter_mut().zip(&d_pre) {
        *g += dp;
    }
    let dz: Vec<f64> = dh.iter().zip(&tr.h).map(|(&d, &h)| d * (1.0 - h * h)).collect();
    for (c, &xc) in x.iter().enumerate() {
        for (g, &dzj) in grad_enc.phi.row_mut(c).iter_mut().zip(&dz) {
            *g += xc * dzj;
        }
    }
    for (g, &dzj) in grad_enc.b.iter_mut().zip(&dz) {
        *g += dzj;
    }
}
