//! Adam optimizer over a parameter set.

use ndarray::Array2;

use super::params::ParamSet;

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Array2<f64>>,
    pub v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(params: &ParamSet, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: params.values().iter().map(|p| Array2::zeros(p.dim())).collect(),
            v: params.values().iter().map(|p| Array2::zeros(p.dim())).collect(),
        }
    }

    /// Applies one update from per-tensor gradients.
    pub fn apply(&mut self, params: &mut ParamSet, grads: &[Array2<f64>]) {
        assert_eq!(grads.len(), params.len());
        self.step += 1;
        let bias1 = 1.0 - self.beta1.powi(self.step as i32);
        let bias2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = &grads[i];
            self.m[i].zip_mut_with(g, |m, &gv| *m = self.beta1 * *m + (1.0 - self.beta1) * gv);
            self.v[i]
                .zip_mut_with(g, |v, &gv| *v = self.beta2 * *v + (1.0 - self.beta2) * gv * gv);
            let p = params.value_mut(i);
            for ((pv, &mv), &vv) in p.iter_mut().zip(self.m[i].iter()).zip(self.v[i].iter()) {
                let m_hat = mv / bias1;
                let v_hat = vv / bias2;
                *pv -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}
