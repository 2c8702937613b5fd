use crate::error::{Error, Result};

use super::Rng;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for &x in v {
        s += (x - m).exp();
    }
    m + s.ln()
}

/// Temperature softmax, stabilized by subtracting the maximum.
pub fn softmax(v: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::invalid("softmax of empty vector"));
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::invalid(format!("temperature must be > 0, got {temperature}")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("softmax input contains non-finite values"));
    }
    let mut out = v.to_vec();
    softmax_unchecked(&mut out, temperature);
    Ok(out)
}

/// In-place softmax for hot loops; inputs must already be finite.
pub fn softmax_unchecked(v: &mut [f64], temperature: f64) {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for x in v.iter_mut() {
        *x = ((*x - m) / temperature).exp();
        s += *x;
    }
    for x in v.iter_mut() {
        *x /= s;
    }
}

pub fn sample_gumbel(rng: &mut Rng, count: usize) -> Vec<f64> {
    (0..count).map(|_| rng.gumbel()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_uniform_on_ties() {
        let p = softmax(&[0.0, 0.0, 0.0], 1.0).unwrap();
        for x in p {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_argmax_limit() {
        let p = softmax(&[10.0, 0.0, 0.0], 0.01).unwrap();
        assert!(p[0] >= 1.0 - 1e-9);
    }

    #[test]
    fn softmax_reference_values() {
        // e^{1,2,3} / (e + e² + e³), evaluated in extended precision.
        let p = softmax(&[1.0, 2.0, 3.0], 1.0).unwrap();
        let want = [0.090_030_573_170_380_46, 0.244_728_471_054_797_64, 0.665_240_955_774_821_9];
        for (a, b) in p.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_rejects_bad_input() {
        assert!(softmax(&[1.0, f64::INFINITY], 1.0).is_err());
        assert!(softmax(&[1.0], 0.0).is_err());
        assert!(softmax(&[], 1.0).is_err());
    }

    #[test]
    fn gumbel_at_half() {
        assert!((super::super::gumbel_from_uniform(0.5) - 0.366_512_920_581_664_3).abs() < 1e-12);
    }

    #[test]
    fn gumbel_deterministic() {
        let a = sample_gumbel(&mut Rng::new(5), 32);
        let b = sample_gumbel(&mut Rng::new(5), 32);
        assert_eq!(a, b);
        assert!(a.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn softplus_stable() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
    }
}
