use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    RmsProp,
    AdaGrad,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rmsprop" => Ok(OptimizerKind::RmsProp),
            "adagrad" => Ok(OptimizerKind::AdaGrad),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

/// In-place parameter update from a gradient.
pub trait Optimizer {
    fn step(&mut self, params: &mut [f64], grad: &[f64]);
}

/// `acc = rho * acc + (1 - rho) g^2`, `p -= lr * g / (sqrt(acc) + eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp {
    pub lr: f64,
    pub rho: f64,
    pub eps: f64,
    acc: Vec<f64>,
}

impl RmsProp {
    pub fn new(len: usize, lr: f64, rho: f64, eps: f64) -> Self {
        RmsProp {
            lr,
            rho,
            eps,
            acc: vec![0.0; len],
        }
    }

    /// Starts every accumulator at `initial` instead of zero.
    pub fn with_initial_accumulator(mut self, initial: f64) -> Self {
        self.acc.fill(initial);
        self
    }

    pub fn accumulator(&self) -> &[f64] {
        &self.acc
    }
}

impl Optimizer for RmsProp {
    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.acc.len());
        assert_eq!(grad.len(), self.acc.len());
        for ((p, g), a) in params.iter_mut().zip(grad).zip(&mut self.acc) {
            *a = self.rho * *a + (1.0 - self.rho) * g * g;
            *p -= self.lr * g / (a.sqrt() + self.eps);
        }
    }
}

/// `acc += g^2`, `p -= lr * g / (sqrt(acc) + eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaGrad {
    pub lr: f64,
    pub eps: f64,
    acc: Vec<f64>,
}

impl AdaGrad {
    pub fn new(len: usize, lr: f64, eps: f64) -> Self {
        AdaGrad {
            lr,
            eps,
            acc: vec![0.0; len],
        }
    }
}

impl Optimizer for AdaGrad {
    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.acc.len());
        assert_eq!(grad.len(), self.acc.len());
        for ((p, g), a) in params.iter_mut().zip(grad).zip(&mut self.acc) {
            *a += g * g;
            *p -= self.lr * g / (a.sqrt() + self.eps);
        }
    }
}

/// Rescales `grad` so its L2 norm is at most `max_norm`. Returns the norm
/// before clipping.
pub fn clip_global_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmsprop_first_step() {
        let mut opt = RmsProp::new(1, 0.01, 0.9, 1e-8);
        let mut p = [0.5];
        opt.step(&mut p, &[0.2]);
        assert!((opt.accumulator()[0] - 0.004).abs() < 1e-15);
        let expected = 0.5 - 0.01 * 0.2 / (0.004f64.sqrt() + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] - 0.468377).abs() < 1e-6);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut opt = RmsProp::new(3, 0.01, 0.9, 1e-8);
        let mut p = [1.0, -2.0, 3.0];
        opt.step(&mut p, &[0.0; 3]);
        assert_eq!(p, [1.0, -2.0, 3.0]);
        let mut ada = AdaGrad::new(3, 0.1, 1e-8);
        ada.step(&mut p, &[0.0; 3]);
        assert_eq!(p, [1.0, -2.0, 3.0]);
    }

    #[test]
    fn adagrad_first_step_is_signed_lr() {
        let mut ada = AdaGrad::new(2, 0.1, 0.0);
        let mut p = [0.0, 0.0];
        ada.step(&mut p, &[3.0, -0.5]);
        assert!((p[0] + 0.1).abs() < 1e-15);
        assert!((p[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn clipping() {
        let mut g = [3.0, 4.0];
        assert_eq!(clip_global_norm(&mut g, 5.0), 5.0);
        assert_eq!(g, [3.0, 4.0]);
        let mut g = [30.0, 40.0];
        clip_global_norm(&mut g, 5.0);
        assert!((g[0] - 3.0).abs() < 1e-12 && (g[1] - 4.0).abs() < 1e-12);
    }
}
