use crate::error::{Error, Result};

/// Compares an analytic gradient against central differences.
///
/// Returns `max_i |num_i − ana_i| / max(1e-8, |ana_i| + |num_i|)`.
pub fn grad_check<F>(mut f: F, analytic: &[f64], point: &[f64], h: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if analytic.len() != point.len() {
        return Err(Error::invalid(format!(
            "gradient has {} entries, point has {}",
            analytic.len(),
            point.len()
        )));
    }
    if !(h > 0.0) {
        return Err(Error::invalid("step must be positive"));
    }
    let mut x = point.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let up = f(&x);
        x[i] = orig - h;
        let down = f(&x);
        x[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::invalid(format!("objective not finite near coordinate {i}")));
        }
        let numeric = (up - down) / (2.0 * h);
        let denom = (analytic[i].abs() + numeric.abs()).max(1e-8);
        worst = worst.max((numeric - analytic[i]).abs() / denom);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{sigmoid, Rng};

    #[test]
    fn quadratic_is_exact() {
        let err = grad_check(|x| x[0] * x[0], &[6.0], &[3.0], 1e-5).unwrap();
        assert!(err <= 1e-8, "{err}");
    }

    #[test]
    fn sigmoid_sum() {
        let mut rng = Rng::new(11);
        let p: Vec<f64> = (0..10).map(|_| rng.range(-3.0, 3.0)).collect();
        let g: Vec<f64> = p.iter().map(|&x| sigmoid(x) * (1.0 - sigmoid(x))).collect();
        let err = grad_check(|x| x.iter().map(|&v| sigmoid(v)).sum(), &g, &p, 1e-5).unwrap();
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn doubled_gradient_gives_one_third() {
        let p = [0.7, -1.2];
        let g: Vec<f64> = p.iter().map(|x| 2.0 * (2.0 * x)).collect();
        let err = grad_check(|x| x[0] * x[0] + x[1] * x[1], &g, &p, 1e-5).unwrap();
        assert!((err - 1.0 / 3.0).abs() < 1e-6, "{err}");
    }

    #[test]
    fn non_finite_objective_errors() {
        assert!(grad_check(|x| 1.0 / (x[0] - x[0]), &[0.0], &[1.0], 1e-3).is_err());
    }
}
