use serde::{Deserialize, Serialize};

use super::net::{cast, uncast, Scalar};

/// Adam with bias correction over a list of flat tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam<F> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<Vec<F>>,
    pub v: Vec<Vec<F>>,
}

impl<F: Scalar> Adam<F> {
    pub fn new(shapes: &[usize]) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: shapes.iter().map(|&n| vec![F::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![F::zero(); n]).collect(),
        }
    }

    /// One update; gradients are multiplied by `grad_scale` first (used for
    /// norm clipping).
    pub fn step(&mut self, params: Vec<&mut [F]>, grads: Vec<&[F]>, lr: f64, grad_scale: f64) {
        assert_eq!(params.len(), self.m.len(), "parameter tensor count changed");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let step_size = lr * bc2.sqrt() / bc1;
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((pi, &gi), mi), vi) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                let g = uncast(gi) * grad_scale;
                let mn = self.beta1 * uncast(*mi) + (1.0 - self.beta1) * g;
                let vn = self.beta2 * uncast(*vi) + (1.0 - self.beta2) * g * g;
                *mi = cast(mn);
                *vi = cast(vn);
                *pi = cast(uncast(*pi) - step_size * mn / (vn.sqrt() + self.eps * bc2.sqrt()));
            }
        }
    }
}
