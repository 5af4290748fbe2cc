//! Adaptive moment estimation over flat parameter lists.

use super::mat::Mat;

pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step_count: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    /// One update over parameters and matching gradients. Parameter order
    /// must stay fixed across calls; moment state is sized on first use.
    pub fn step(&mut self, params: &mut [&mut Mat], grads: &[&Mat]) {
        assert_eq!(params.len(), grads.len());
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.second = params.iter().map(|p| vec![0.0; p.len()]).collect();
        }
        self.step_count += 1;
        let bias1 = 1.0 - self.beta1.powi(self.step_count as i32);
        let bias2 = 1.0 - self.beta2.powi(self.step_count as i32);

        for (idx, (param, grad)) in params.iter_mut().zip(grads).enumerate() {
            assert_eq!(param.len(), grad.len(), "parameter {idx} shape changed");
            let m = &mut self.first[idx];
            let v = &mut self.second[idx];
            for (j, (p, g)) in param
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .enumerate()
            {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g * g;
                let m_hat = m[j] / bias1;
                let v_hat = v[j] / bias2;
                *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}
