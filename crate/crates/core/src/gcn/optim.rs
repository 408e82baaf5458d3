use super::model::{GcnModel, Gradients};
use crate::error::{Error, Result};

/// SGD with classical momentum: `v <- m v + g`, `w <- w - lr v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    pub velocity: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new(model: &GcnModel, lr: f64, momentum: f64) -> Result<Self> {
        if !(lr >= 0.0 && lr.is_finite()) || !(0.0..1.0).contains(&momentum) {
            return Err(Error::Config(format!("invalid optimizer lr={lr} momentum={momentum}")));
        }
        Ok(Self { lr, momentum, velocity: model.blobs().iter().map(|b| vec![0.0; b.len()]).collect() })
    }

    pub fn step(&mut self, model: &mut GcnModel, grads: &Gradients) {
        for ((w, v), g) in model.blobs_mut().into_iter().zip(&mut self.velocity).zip(&grads.0) {
            sgd_update(w, v, g, self.lr, self.momentum);
        }
    }
}

pub fn sgd_update(weights: &mut [f64], velocity: &mut [f64], grads: &[f64], lr: f64, momentum: f64) {
    for ((w, v), g) in weights.iter_mut().zip(velocity.iter_mut()).zip(grads) {
        *v = momentum * *v + g;
        *w -= lr * *v;
    }
}
