use morpho_core::{Scalar, Tensor};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected moments, one slot per parameter tensor.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub cfg: AdamConfig,
    step: u32,
    m: Vec<Option<Tensor<T>>>,
    v: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(cfg: AdamConfig, slots: usize) -> Self {
        Self {
            cfg,
            step: 0,
            m: vec![None; slots],
            v: vec![None; slots],
        }
    }

    pub fn steps(&self) -> u32 {
        self.step
    }

    /// Update every parameter that has a gradient; others are untouched.
    pub fn update(&mut self, params: &mut [&mut Tensor<T>], grads: &[Option<Tensor<T>>]) {
        assert_eq!(params.len(), self.m.len(), "one Adam slot per parameter");
        self.step += 1;
        let c = self.cfg;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let step_size = T::lit(c.lr * (1.0 - c.beta2.powi(self.step as i32)).sqrt() / (1.0 - c.beta1.powi(self.step as i32)));
        let eps = T::lit(c.eps * (1.0 - c.beta2.powi(self.step as i32)).sqrt());
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let Some(g) = g else { continue };
            let m = self.m[k].get_or_insert_with(|| Tensor::zeros_like(g));
            let v = self.v[k].get_or_insert_with(|| Tensor::zeros_like(g));
            for (((w, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                *mi = b1 * *mi + (T::one() - b1) * gi;
                *vi = b2 * *vi + (T::one() - b2) * gi * gi;
                *w -= step_size * *mi / (vi.sqrt() + eps);
            }
        }
    }
}
