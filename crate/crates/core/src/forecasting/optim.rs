//! Adam and RMSprop on a flat parameter vector, plus global-norm clipping.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Optimizer {
    Adam,
    RMSprop,
}

impl Optimizer {
    pub fn name(self) -> &'static str {
        match self {
            Optimizer::Adam => "Adam",
            Optimizer::RMSprop => "RMSprop",
        }
    }
}

const EPS: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: Optimizer,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl OptimizerState {
    pub fn new(kind: Optimizer, lr: f64, n: usize) -> Self {
        Self { kind, lr, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        match self.kind {
            Optimizer::Adam => {
                let (b1, b2): (f64, f64) = (0.9, 0.999);
                let c1 = 1.0 - b1.powi(self.t);
                let c2 = 1.0 - b2.powi(self.t);
                for i in 0..theta.len() {
                    let g = grad[i];
                    self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
                    self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
                    theta[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + EPS);
                }
            }
            Optimizer::RMSprop => {
                let rho = 0.9;
                for i in 0..theta.len() {
                    let g = grad[i];
                    self.v[i] = rho * self.v[i] + (1.0 - rho) * g * g;
                    theta[i] -= self.lr * g / (self.v[i].sqrt() + EPS);
                }
            }
        }
    }
}

/// Rescales `grad` so its L2 norm is at most `max_norm`; returns the norm
/// before clipping.
pub fn clip_global_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}
