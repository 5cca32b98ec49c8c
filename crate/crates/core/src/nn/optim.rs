use crate::error::{Error, Result};

/// SGD with classical momentum: `v = momentum * v + g; w -= lr * v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    pub velocity: Vec<Vec<f64>>,
    pub steps: usize,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64) -> Result<Self> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate must be >= 0, got {lr}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidArgument(format!("momentum must be in [0, 1), got {momentum}")));
        }
        Ok(Self { lr, momentum, velocity: Vec::new(), steps: 0 })
    }

    pub fn step(&mut self, weights: &mut [Vec<f64>], grads: &[Vec<f64>]) -> Result<()> {
        if grads.len() != weights.len() || grads.iter().zip(weights.iter()).any(|(g, w)| g.len() != w.len()) {
            return Err(Error::Shape {
                expected: format!("{} gradient tensors matching the weights", weights.len()),
                actual: format!("{} tensors", grads.len()),
            });
        }
        for (layer, g) in grads.iter().enumerate() {
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::Divergence {
                    step: self.steps,
                    detail: format!("non-finite gradient {} in weight tensor {layer} at index {i}", g[i]),
                });
            }
        }
        if self.velocity.is_empty() {
            self.velocity = weights.iter().map(|w| vec![0.0; w.len()]).collect();
        }
        for ((w, g), v) in weights.iter_mut().zip(grads).zip(&mut self.velocity) {
            for ((wi, &gi), vi) in w.iter_mut().zip(g).zip(v.iter_mut()) {
                *vi = self.momentum * *vi + gi;
                *wi -= self.lr * *vi;
            }
        }
        self.steps += 1;
        Ok(())
    }
}
