use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{Matrix, Rng};

/// Temperature used when code learning was first described (default).
pub const TAU_DEFAULT: f64 = 0.1;
/// Temperature listed with the experiment hyperparameters.
pub const TAU_EXPERIMENT: f64 = 0.2;

/// Natural log of `C(nk, n)`, summed term by term to avoid overflow.
pub fn ln_code_capacity(n: usize, k: usize) -> f64 {
    let total = n * k;
    (1..=n)
        .map(|i| ((total - n + i) as f64).ln() - (i as f64).ln())
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodecConfig {
    /// Number of codebooks.
    pub n: usize,
    /// Codewords per codebook.
    pub k: usize,
    /// Embedding dimension.
    pub d: usize,
    pub tau: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    /// Add Gumbel noise to the relaxation during training.
    pub gumbel_noise: bool,
    /// Forward with hard one-hot codes, backward through the soft relaxation.
    pub straight_through: bool,
}

impl CodecConfig {
    pub fn new(n: usize, k: usize, d: usize) -> Self {
        Self {
            n,
            k,
            d,
            tau: TAU_DEFAULT,
            lr: 0.003,
            epochs: 400,
            batch: 64,
            seed: 0,
            gumbel_noise: true,
            straight_through: false,
        }
    }

    pub fn nk(&self) -> usize {
        self.n * self.k
    }

    /// Checks shapes and the code capacity `C(nk, n) > vocab`.
    pub fn validate(&self, vocab: usize) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.d == 0 {
            return Err(Error::invalid("n, k and d must be positive"));
        }
        if self.k > u16::MAX as usize || self.n > u16::MAX as usize {
            return Err(Error::invalid("n and k must fit in 16 bits"));
        }
        if self.nk() % 2 != 0 {
            return Err(Error::invalid("n*k must be even (encoder hidden width is nk/2)"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid("tau must be positive"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) || self.batch == 0 {
            return Err(Error::invalid("lr must be >= 0 and batch >= 1"));
        }
        if ln_code_capacity(self.n, self.k) <= (vocab as f64).ln() {
            return Err(Error::Capacity {
                slots: self.nk(),
                n: self.n,
                vocab,
            });
        }
        Ok(())
    }

    /// Soft size warnings: `n ≪ d` and `nk ≪ |V|`.
    pub fn warnings(&self, vocab: usize) -> Vec<String> {
        let mut w = Vec::new();
        if self.n * 2 > self.d {
            w.push(format!("n={} is not much smaller than d={}", self.n, self.d));
        }
        if self.nk() * 2 > vocab {
            w.push(format!("nk={} is not much smaller than |V|={vocab}", self.nk()));
        }
        w
    }
}

/// `n` codebooks of `k` rows each, stacked into one `(nk)×d` matrix.
/// Row `r` belongs to codebook `r / k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodebookStore {
    n: usize,
    k: usize,
    rows: Matrix,
}

impl CodebookStore {
    pub fn new(n: usize, k: usize, rows: Matrix) -> Result<Self> {
        if rows.rows() != n * k {
            return Err(Error::invalid(format!(
                "store has {} rows, expected n*k = {}",
                rows.rows(),
                n * k
            )));
        }
        if !rows.is_finite() {
            return Err(Error::invalid("store rows must be finite"));
        }
        Ok(Self { n, k, rows })
    }

    pub fn zeros(n: usize, k: usize, d: usize) -> Self {
        Self {
            n,
            k,
            rows: Matrix::zeros(n * k, d),
        }
    }

    /// Rows uniform in `[−0.1, 0.1]`.
    pub fn random(n: usize, k: usize, d: usize, rng: &mut Rng) -> Self {
        Self {
            n,
            k,
            rows: Matrix::uniform(n * k, d, -0.1, 0.1, rng),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.rows.cols()
    }

    pub fn nk(&self) -> usize {
        self.n * self.k
    }

    pub fn rows(&self) -> &Matrix {
        &self.rows
    }

    pub fn rows_mut(&mut self) -> &mut Matrix {
        &mut self.rows
    }

    pub fn row(&self, r: usize) -> &[f64] {
        self.rows.row(r)
    }

    pub fn codebook_of(&self, r: usize) -> usize {
        r / self.k
    }
}

/// Discrete codes: `n` components in `[0, k)` per item.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeMatrix {
    vocab: usize,
    n: usize,
    k: usize,
    codes: Vec<u16>,
}

impl CodeMatrix {
    pub fn new(vocab: usize, n: usize, k: usize, codes: Vec<u16>) -> Result<Self> {
        if codes.len() != vocab * n {
            return Err(Error::invalid(format!(
                "code matrix has {} entries, expected {}x{}",
                codes.len(),
                vocab,
                n
            )));
        }
        if let Some(pos) = codes.iter().position(|&c| c as usize >= k) {
            return Err(Error::IndexOutOfRange {
                index: codes[pos] as usize,
                limit: k,
            });
        }
        Ok(Self { vocab, n, k, codes })
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, v: usize) -> &[u16] {
        &self.codes[v * self.n..(v + 1) * self.n]
    }

    pub fn get(&self, v: usize, i: usize) -> usize {
        self.codes[v * self.n + i] as usize
    }

    pub fn as_slice(&self) -> &[u16] {
        &self.codes
    }

    /// Dense one-hot form `O ∈ {0,1}^{|V|×nk}`.
    pub fn one_hot(&self) -> Matrix {
        let mut o = Matrix::zeros(self.vocab, self.n * self.k);
        for v in 0..self.vocab {
            for i in 0..self.n {
                o.set(v, i * self.k + self.get(v, i), 1.0);
            }
        }
        o
    }
}

/// Two-layer code-assignment network, hidden width `nk/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodecEncoder {
    pub n: usize,
    pub k: usize,
    /// `d × (nk/2)`
    pub phi: Matrix,
    pub b: Vec<f64>,
    /// `(nk/2) × nk`
    pub phi_prime: Matrix,
    pub b_prime: Vec<f64>,
}

impl CodecEncoder {
    /// Glorot-uniform weights, zero biases.
    pub fn random(d: usize, n: usize, k: usize, rng: &mut Rng) -> Self {
        let nk = n * k;
        let hidden = nk / 2;
        let a1 = (6.0 / (d + hidden) as f64).sqrt();
        let a2 = (6.0 / (hidden + nk) as f64).sqrt();
        Self {
            n,
            k,
            phi: Matrix::uniform(d, hidden, -a1, a1, rng),
            b: vec![0.0; hidden],
            phi_prime: Matrix::uniform(hidden, nk, -a2, a2, rng),
            b_prime: vec![0.0; nk],
        }
    }

    pub fn zeros(d: usize, n: usize, k: usize) -> Self {
        let nk = n * k;
        Self {
            n,
            k,
            phi: Matrix::zeros(d, nk / 2),
            b: vec![0.0; nk / 2],
            phi_prime: Matrix::zeros(nk / 2, nk),
            b_prime: vec![0.0; nk],
        }
    }

    pub fn d(&self) -> usize {
        self.phi.rows()
    }

    pub fn hidden(&self) -> usize {
        self.phi.cols()
    }

    pub fn nk(&self) -> usize {
        self.n * self.k
    }

    pub fn param_count(&self) -> usize {
        self.phi.as_slice().len() + self.b.len() + self.phi_prime.as_slice().len() + self.b_prime.len()
    }

    /// Parameters flattened as `[phi, b, phi_prime, b_prime]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend_from_slice(self.phi.as_slice());
        out.extend_from_slice(&self.b);
        out.extend_from_slice(self.phi_prime.as_slice());
        out.extend_from_slice(&self.b_prime);
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut rest = flat;
        for dst in [
            self.phi.as_mut_slice(),
            &mut self.b[..],
            self.phi_prime.as_mut_slice(),
            &mut self.b_prime[..],
        ] {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        }
    }
}
