//! Plain SGD and Adam. Parameters live outside any tape as raw tensors; the
//! caller feeds gradients captured from a finished backward pass.

use crate::tensor::Tensor;
use crate::AdError;

pub struct Sgd {
    pub lr: f64,
}

impl Sgd {
    pub fn new(lr: f64) -> Sgd {
        Sgd { lr }
    }

    pub fn step(&self, param: &mut Tensor, grad: &Tensor) -> Result<(), AdError> {
        if param.shape() != grad.shape() {
            return Err(AdError::ShapeMismatch {
                op: "sgd_step",
                lhs: param.shape().to_vec(),
                rhs: grad.shape().to_vec(),
            });
        }
        for (p, &g) in param.data_mut().iter_mut().zip(grad.data()) {
            *p -= self.lr * g;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> AdamConfig {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction. One instance tracks one parameter set, keyed by
/// position: `step` must be called with the same tensors in the same order
/// every iteration.
pub struct Adam {
    cfg: AdamConfig,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Adam {
        Adam { cfg, t: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor]) -> Result<(), AdError> {
        if params.len() != grads.len() {
            return Err(AdError::BadArg(format!(
                "adam: {} params but {} grads",
                params.len(),
                grads.len()
            )));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.numel()]).collect();
            self.v = params.iter().map(|p| vec![0.0; p.numel()]).collect();
        }
        if self.m.len() != params.len() {
            return Err(AdError::BadArg("adam: parameter count changed".into()));
        }
        self.t += 1;
        let bc1 = 1.0 - self.cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.cfg.beta2.powi(self.t as i32);
        for (i, (param, grad)) in params.iter_mut().zip(grads).enumerate() {
            if param.shape() != grad.shape() {
                return Err(AdError::ShapeMismatch {
                    op: "adam_step",
                    lhs: param.shape().to_vec(),
                    rhs: grad.shape().to_vec(),
                });
            }
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for ((p, &g), (mj, vj)) in
                param.data_mut().iter_mut().zip(grad.data()).zip(m.iter_mut().zip(v.iter_mut()))
            {
                *mj = self.cfg.beta1 * *mj + (1.0 - self.cfg.beta1) * g;
                *vj = self.cfg.beta2 * *vj + (1.0 - self.cfg.beta2) * g * g;
                let mhat = *mj / bc1;
                let vhat = *vj / bc2;
                *p -= self.cfg.lr * mhat / (vhat.sqrt() + self.cfg.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_descends_quadratic() {
        // f(x) = x^2, grad 2x; from x=1 with lr=0.1 the first step lands on 0.8.
        let mut x = Tensor::scalar(1.0);
        let opt = Sgd::new(0.1);
        let g = Tensor::scalar(2.0 * x.item());
        opt.step(&mut x, &g).unwrap();
        assert!((x.item() - 0.8).abs() < 1e-15);
        for _ in 0..99 {
            let g = Tensor::scalar(2.0 * x.item());
            opt.step(&mut x, &g).unwrap();
        }
        assert!(x.item().abs() < 1e-9);
    }

    #[test]
    fn adam_first_step_magnitude_is_lr() {
        // With bias correction the first update is lr * g/|g| up to eps.
        let mut x = Tensor::scalar(5.0);
        let mut opt = Adam::new(AdamConfig { lr: 0.01, ..AdamConfig::default() });
        let g = Tensor::scalar(123.4);
        opt.step(&mut [&mut x], &[&g]).unwrap();
        assert!((x.item() - (5.0 - 0.01)).abs() < 1e-6);
    }

    #[test]
    fn adam_converges_on_quadratic() {
        let mut x = Tensor::scalar(3.0);
        let mut opt = Adam::new(AdamConfig { lr: 0.1, ..AdamConfig::default() });
        for _ in 0..600 {
            let g = Tensor::scalar(2.0 * x.item());
            opt.step(&mut [&mut x], &[&g]).unwrap();
        }
        assert!(x.item().abs() < 1e-3, "x = {}", x.item());
    }
}
