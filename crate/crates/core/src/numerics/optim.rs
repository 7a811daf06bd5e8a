use serde::{Deserialize, Serialize};

use super::ParamStore;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adaptive moment estimation state for one [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Self {
        let first: Vec<Vec<f64>> = store.iter().map(|p| vec![0.0; p.value.len()]).collect();
        let second = first.clone();
        Self { config, step: 0, first, second }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update from the accumulated gradients, then zeroes them.
    pub fn step(&mut self, store: &mut ParamStore) {
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for ((p, m), v) in store.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            debug_assert_eq!(m.len(), p.value.len());
            let grad = p.grad.data();
            let value = p.value.data_mut();
            for i in 0..value.len() {
                let g = grad[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        store.zero_grad();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Tape, Tensor};

    #[test]
    fn zero_gradient_leaves_parameter_unchanged() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::vector(vec![0.3, -0.7]));
        let mut adam = Adam::new(AdamConfig::default(), &store);
        adam.step(&mut store);
        assert_eq!(store.value(id).data(), &[0.3, -0.7]);
    }

    #[test]
    fn constant_gradient_moves_against_its_sign() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::vector(vec![0.0, 0.0]));
        let mut adam = Adam::new(AdamConfig::default(), &store);
        let mut prev = store.value(id).clone();
        for _ in 0..50 {
            store.get_mut(id).grad = Tensor::vector(vec![2.0, -0.5]);
            adam.step(&mut store);
            let cur = store.value(id).clone();
            assert!(cur.data()[0] < prev.data()[0]);
            assert!(cur.data()[1] > prev.data()[1]);
            prev = cur;
        }
    }

    #[test]
    fn quadratic_bowl_converges() {
        let mut store = ParamStore::new();
        let id = store.add("x", Tensor::vector(vec![0.2, -0.05, -0.05]));
        let target = Tensor::vector(vec![0.1, 0.05, -0.15]);
        let mut adam = Adam::new(AdamConfig::default(), &store);
        let mut loss = f64::INFINITY;
        for _ in 0..500 {
            let mut tape = Tape::new();
            let bound = tape.bind(&store);
            let t = tape.constant(target.clone());
            let d = tape.sub(bound.var(id), t).unwrap();
            let sq = tape.mul(d, d).unwrap();
            let l = tape.sum(sq).unwrap();
            loss = tape.value(l).item();
            let g = tape.backward(l).unwrap();
            store.accumulate(&bound, &g).unwrap();
            adam.step(&mut store);
        }
        assert!(loss < 1e-6, "loss {loss}");
    }
}
