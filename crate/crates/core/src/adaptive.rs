//! Drift measurement between embedding tables and the drift-to-ratio rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{Matrix, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    Full,
    Count { n1: usize, n2: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    /// Median pairwise distance over the pooled sample.
    Median,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmdConfig {
    pub sampling: Sampling,
    pub bandwidth: Bandwidth,
    pub seed: u64,
    /// Draw the same row indices from both tables instead of sampling each independently.
    pub paired: bool,
}

impl Default for MmdConfig {
    fn default() -> Self {
        Self {
            sampling: Sampling::Full,
            bandwidth: Bandwidth::Median,
            seed: 0,
            paired: false,
        }
    }
}

impl MmdConfig {
    pub fn validate(&self) -> Result<()> {
        if let Sampling::Count { n1, n2 } = self.sampling {
            if n1 < 2 || n2 < 2 {
                return Err(Error::Config("MMD sample counts must be at least 2".into()));
            }
        }
        if let Bandwidth::Fixed(s) = self.bandwidth {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("MMD bandwidth must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub c: f64,
    pub skip_threshold: f64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            c: 0.2,
            skip_threshold: 1e-6,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c <= 1.0) {
            return Err(Error::Config(format!("C must lie in (0, 1], got {}", self.c)));
        }
        if !(self.skip_threshold >= 0.0) {
            return Err(Error::Config("skip threshold must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RatioChoice {
    Skip,
    Ratio(u64),
}

fn sample_rows(rows: usize, count: usize, rng: &mut Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..rows).collect();
    if count >= rows {
        return idx;
    }
    for i in 0..count {
        let j = i + rng.below(rows - i);
        idx.swap(i, j);
    }
    idx.truncate(count);
    idx
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn median(mut v: Vec<f64>) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (_, &mut hi, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        hi
    } else {
        let lo = v[..mid].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// Biased squared MMD under `exp(−‖x−y‖² / 2σ²)`, clamped at 0.
pub fn mmd2(x: &Matrix, y: &Matrix, cfg: &MmdConfig) -> Result<f64> {
    cfg.validate()?;
    if x.cols() != y.cols() {
        return Err(Error::ShapeMismatch {
            op: "mmd2",
            left: x.shape(),
            right: y.shape(),
        });
    }
    if x.rows() == 0 || y.rows() == 0 {
        return Err(Error::invalid("mmd2 needs non-empty tables"));
    }
    let mut rng = Rng::new(cfg.seed);
    let (ix, iy) = match (cfg.sampling, cfg.paired) {
        (Sampling::Full, false) => ((0..x.rows()).collect(), (0..y.rows()).collect()),
        (sampling, true) => {
            if x.rows() != y.rows() {
                return Err(Error::invalid("paired MMD sampling needs tables with equal row counts"));
            }
            let n = match sampling {
                Sampling::Full => x.rows(),
                Sampling::Count { n1, n2 } => n1.min(n2),
            };
            let idx = sample_rows(x.rows(), n, &mut rng);
            (idx.clone(), idx)
        }
        (Sampling::Count { n1, n2 }, false) => {
            let a = sample_rows(x.rows(), n1, &mut rng);
            let b = sample_rows(y.rows(), n2, &mut rng);
            (a, b)
        }
    };

    let pooled: Vec<&[f64]> = ix.iter().map(|&i| x.row(i)).chain(iy.iter().map(|&i| y.row(i))).collect();
    let n1 = ix.len();
    let m = pooled.len();
    let mut d2 = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            d2.push(sq_dist(pooled[i], pooled[j]));
        }
    }
    let sigma = match cfg.bandwidth {
        Bandwidth::Fixed(s) => s,
        Bandwidth::Median => {
            let med = median(d2.iter().map(|v| v.sqrt()).collect());
            if med > 0.0 {
                med
            } else {
                1.0
            }
        }
    };
    let inv = 1.0 / (2.0 * sigma * sigma);
    let n2 = m - n1;
    // Diagonal terms contribute k(x,x) = 1 to each within-sample sum.
    let (mut kxx, mut kyy, mut kxy) = (n1 as f64, n2 as f64, 0.0);
    let mut p = 0;
    for i in 0..m {
        for j in i + 1..m {
            let kv = (-d2[p] * inv).exp();
            p += 1;
            match (i < n1, j < n1) {
                (true, true) => kxx += 2.0 * kv,
                (false, false) => kyy += 2.0 * kv,
                _ => kxy += kv,
            }
        }
    }
    let (a, b) = (n1 as f64, n2 as f64);
    let v = kxx / (a * a) + kyy / (b * b) - 2.0 * kxy / (a * b);
    Ok(v.max(0.0))
}

/// Ceiling that ignores overshoot below one part in 10⁸ (e.g. `5.00000002 → 5`).
fn ceil_snapped(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= 1e-8 * v.abs() {
        r
    } else {
        v.ceil()
    }
}

/// `r = ⌈1 / (C·(2σ(mmd) − 1))⌉`, or `Skip` when `mmd ≤ skip_threshold`.
pub fn choose_ratio(mmd: f64, cfg: &AdaptiveConfig) -> RatioChoice {
    if !(mmd > cfg.skip_threshold) {
        return RatioChoice::Skip;
    }
    // 2σ(m) − 1 = tanh(m/2)
    let denom = cfg.c * (0.5 * mmd).tanh();
    if denom <= 0.0 {
        return RatioChoice::Skip;
    }
    let r = ceil_snapped(1.0 / denom);
    if r >= u64::MAX as f64 {
        RatioChoice::Ratio(u64::MAX)
    } else {
        RatioChoice::Ratio(r as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    fn noisy(x: &Matrix, s: f64, seed: u64) -> Matrix {
        let mut rng = Rng::new(seed);
        let data = x.as_slice().iter().map(|v| v + s * rng.normal()).collect();
        Matrix::from_vec(x.rows(), x.cols(), data).unwrap()
    }

    #[test]
    fn identical_tables() {
        let x = Matrix::uniform(120, 8, -1.0, 1.0, &mut Rng::new(1));
        assert!(mmd2(&x, &x, &MmdConfig::default()).unwrap() <= 1e-12);
        let paired = MmdConfig {
            sampling: Sampling::Count { n1: 50, n2: 50 },
            paired: true,
            ..MmdConfig::default()
        };
        assert!(mmd2(&x, &x, &paired).unwrap() <= 1e-12);
    }

    #[test]
    fn single_points_closed_form() {
        let a = Matrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        let fixed = MmdConfig {
            bandwidth: Bandwidth::Fixed(2.0),
            ..MmdConfig::default()
        };
        let want = 2.0 - 2.0 * (-25.0f64 / 8.0).exp();
        assert!((mmd2(&a, &b, &fixed).unwrap() - want).abs() < 1e-15);
        // median heuristic: σ = ‖a − b‖ = 5
        let want = 2.0 - 2.0 * (-0.5f64).exp();
        assert!((mmd2(&a, &b, &MmdConfig::default()).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn grows_with_noise() {
        let x = Matrix::uniform(300, 16, -0.5, 0.5, &mut Rng::new(4));
        let cfg = MmdConfig::default();
        let vals: Vec<f64> = [0.01, 0.05, 0.1, 0.5, 1.0]
            .iter()
            .map(|&s| mmd2(&x, &noisy(&x, s, 7), &cfg).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]), "{vals:?}");
    }

    #[test]
    fn sampled_is_deterministic_and_symmetric() {
        let x = Matrix::uniform(200, 4, -1.0, 1.0, &mut Rng::new(1));
        let y = Matrix::uniform(150, 4, -0.5, 1.5, &mut Rng::new(2));
        let cfg = MmdConfig {
            sampling: Sampling::Count { n1: 40, n2: 60 },
            ..MmdConfig::default()
        };
        assert_eq!(mmd2(&x, &y, &cfg).unwrap(), mmd2(&x, &y, &cfg).unwrap());
        let full = MmdConfig::default();
        let (a, b) = (mmd2(&x, &y, &full).unwrap(), mmd2(&y, &x, &full).unwrap());
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn rejects_mismatch() {
        let x = Matrix::zeros(3, 2);
        let y = Matrix::zeros(3, 4);
        assert!(mmd2(&x, &y, &MmdConfig::default()).is_err());
        let bad = MmdConfig {
            bandwidth: Bandwidth::Fixed(0.0),
            ..MmdConfig::default()
        };
        assert!(mmd2(&x, &x, &bad).is_err());
    }

    #[test]
    fn ratio_examples() {
        let cfg = AdaptiveConfig::default();
        assert_eq!(choose_ratio(0.0, &cfg), RatioChoice::Skip);
        assert_eq!(choose_ratio(1e-7, &cfg), RatioChoice::Skip);
        assert_eq!(choose_ratio(0.5, &cfg), RatioChoice::Ratio(21));
        assert_eq!(choose_ratio(20.0, &cfg), RatioChoice::Ratio(5));
        assert_eq!(choose_ratio(1e6, &cfg), RatioChoice::Ratio(5));
    }

    proptest! {
        #[test]
        fn ratio_monotone_and_bounded(a in 2e-6f64..50.0, b in 2e-6f64..50.0, c in 0.05f64..1.0) {
            let cfg = AdaptiveConfig { c, skip_threshold: 1e-6 };
            let floor = (1.0 / c).ceil() as u64;
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            match (choose_ratio(lo, &cfg), choose_ratio(hi, &cfg)) {
                (RatioChoice::Ratio(rl), RatioChoice::Ratio(rh)) => {
                    prop_assert!(rh <= rl);
                    prop_assert!(rh + 1 >= floor);
                }
                other => prop_assert!(false, "{other:?}"),
            }
        }
    }
}
