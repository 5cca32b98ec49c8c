//! Mini-batch SGD training loop for one network branch.
//!
//! Per-sample gradients are computed in parallel and summed in sample order,
//! and the epoch shuffle is drawn from `(seed, epoch)` alone, so a run is
//! bit-reproducible and a resumed run follows the uninterrupted trajectory.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::checkpoint::Checkpoint;
use crate::nn::layers::l2_loss;
use crate::nn::{Network, Sgd, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch: usize,
    /// Divide the L2 loss by the number of output cells.
    pub normalize_loss: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lr: 1e-3, momentum: 0.9, epochs: 50, batch: 8, normalize_loss: true, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub input: Tensor,
    pub target: Tensor,
}

/// Mean loss and mean weight gradient over `samples`.
pub fn loss_and_grad(net: &Network, samples: &[&TrainSample], normalize: bool) -> Result<(f64, Vec<Vec<f64>>)> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let per_sample: Vec<Result<(f64, Vec<Vec<f64>>)>> = samples
        .par_iter()
        .map(|s| {
            let trace = net.forward_trace(&s.input)?;
            let (loss, g) = l2_loss(trace.output(), &s.target, normalize)?;
            Ok((loss, net.backward(&trace, &g)?))
        })
        .collect();
    let mut total = 0.0;
    let mut grads: Vec<Vec<f64>> = net.weights.iter().map(|w| vec![0.0; w.len()]).collect();
    for r in per_sample {
        let (loss, g) = r?;
        total += loss;
        for (acc, gi) in grads.iter_mut().zip(&g) {
            for (a, v) in acc.iter_mut().zip(gi) {
                *a += v;
            }
        }
    }
    let n = samples.len() as f64;
    for acc in &mut grads {
        for a in acc.iter_mut() {
            *a /= n;
        }
    }
    Ok((total / n, grads))
}

/// Mean loss over a dataset without gradients.
pub fn dataset_loss(net: &Network, samples: &[TrainSample], normalize: bool) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let losses: Vec<Result<f64>> = samples
        .par_iter()
        .map(|s| {
            let out = net.forward(&s.input)?;
            Ok(l2_loss(&out, &s.target, normalize)?.0)
        })
        .collect();
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / samples.len() as f64)
}

fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Training state of one branch.
#[derive(Debug, Clone, PartialEq)]
pub struct Trainer {
    pub net: Network,
    pub opt: Sgd,
    /// Number of completed epochs.
    pub epoch: usize,
    pub config: TrainConfig,
}

impl Trainer {
    pub fn new(net: Network, config: TrainConfig) -> Result<Self> {
        if config.batch == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        Ok(Self { net, opt: Sgd::new(config.lr, config.momentum)?, epoch: 0, config })
    }

    /// Continues from a checkpoint, restoring weights, momentum and epoch.
    pub fn resume(ck: &Checkpoint, config: TrainConfig) -> Result<Self> {
        let mut t = Self::new(ck.network()?, config)?;
        t.epoch = ck.epoch;
        if !ck.velocity.is_empty() {
            if ck.velocity.len() != ck.weights.len() || ck.velocity.iter().zip(&ck.weights).any(|(v, w)| v.len() != w.len()) {
                return Err(Error::Checkpoint("velocity shapes do not match the weights".into()));
            }
            t.opt.velocity = ck.velocity.clone();
        }
        Ok(t)
    }

    pub fn checkpoint(&self, config: serde_json::Value) -> Checkpoint {
        let mut ck = Checkpoint::new(&self.net, self.config.seed, self.epoch);
        ck.velocity = self.opt.velocity.clone();
        ck.config = config;
        ck
    }

    /// One pass over `data`; returns the mean mini-batch loss seen during the pass.
    pub fn run_epoch(&mut self, data: &[TrainSample]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::InvalidArgument("empty training set".into()));
        }
        let order = epoch_order(self.config.seed, self.epoch, data.len());
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(self.config.batch) {
            let batch: Vec<&TrainSample> = chunk.iter().map(|&i| &data[i]).collect();
            let (loss, grads) = loss_and_grad(&self.net, &batch, self.config.normalize_loss)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { step: self.opt.steps, detail: format!("loss is {loss}") });
            }
            self.opt.step(&mut self.net.weights, &grads)?;
            total += loss;
            batches += 1;
        }
        self.epoch += 1;
        Ok(total / batches as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Branch;
    use crate::nn::{build_network, ArchConfig};

    fn toy_data(n: usize) -> (Network, Vec<TrainSample>) {
        let spec = build_network(Branch::Vertical, &ArchConfig::compact(2)).unwrap();
        let net = Network::init(spec, 3);
        let shape = net.spec.shape_trace((1, 32, 32)).unwrap();
        let (_, oh, ow) = *shape.last().unwrap();
        let data = (0..n)
            .map(|i| {
                let input = Tensor::from_vec(1, 32, 32, (0..1024).map(|k| (((k * 31 + i * 7) % 13) as f64) / 1300.0).collect()).unwrap();
                let mut target = Tensor::zeros(1, oh, ow);
                target.data[(i * 5) % (oh * ow)] = 1.0;
                TrainSample { input, target }
            })
            .collect();
        (net, data)
    }

    #[test]
    fn zero_lr_keeps_loss_constant() {
        let (net, data) = toy_data(4);
        let mut t = Trainer::new(net, TrainConfig { lr: 0.0, batch: 2, ..Default::default() }).unwrap();
        let a = t.run_epoch(&data).unwrap();
        let b = t.run_epoch(&data).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let (net, data) = toy_data(6);
        let cfg = TrainConfig { lr: 1e-2, batch: 4, seed: 11, ..Default::default() };
        let mut full = Trainer::new(net.clone(), cfg).unwrap();
        for _ in 0..3 {
            full.run_epoch(&data).unwrap();
        }
        let mut first = Trainer::new(net, cfg).unwrap();
        first.run_epoch(&data).unwrap();
        let ck = Checkpoint::from_json(&first.checkpoint(serde_json::Value::Null).to_json().unwrap()).unwrap();
        let mut resumed = Trainer::resume(&ck, cfg).unwrap();
        for _ in 0..2 {
            resumed.run_epoch(&data).unwrap();
        }
        assert_eq!(resumed.net.weights, full.net.weights);
        assert_eq!(resumed.epoch, 3);
    }

    #[test]
    fn batch_gradient_is_mean_of_samples() {
        let (net, data) = toy_data(2);
        let (l0, g0) = loss_and_grad(&net, &[&data[0]], true).unwrap();
        let (l1, g1) = loss_and_grad(&net, &[&data[1]], true).unwrap();
        let (l, g) = loss_and_grad(&net, &[&data[0], &data[1]], true).unwrap();
        assert!((l - 0.5 * (l0 + l1)).abs() < 1e-15);
        for ((a, b), c) in g.iter().flatten().zip(g0.iter().flatten()).zip(g1.iter().flatten()) {
            assert!((a - 0.5 * (b + c)).abs() <= 1e-12 * a.abs().max(b.abs()).max(c.abs()));
        }
    }
}
