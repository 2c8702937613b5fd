/// Adam with the usual moments (`β1 = 0.9`, `β2 = 0.999`, `ε = 1e-8`) and bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.step_rows(params, grads, params.len().max(1), None);
    }

    /// Step that leaves rows with `trainable[row] == false` untouched, moments included.
    pub fn step_rows(&mut self, params: &mut [f64], grads: &[f64], row_len: usize, trainable: Option<&[bool]>) {
        debug_assert_eq!(params.len(), grads.len());
        debug_assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (i, (p, &g)) in params.iter_mut().zip(grads).enumerate() {
            if let Some(mask) = trainable {
                if !mask[i / row_len] {
                    continue;
                }
            }
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            *p -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}
