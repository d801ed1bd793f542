use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{standard_normal, Vae, Workspace};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Monte-Carlo noise draws per datum.
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 64,
            epochs: 200,
            mc_samples: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || self.batch_size == 0 || self.mc_samples == 0 {
            return Err(Error::InvalidParams(format!("bad training config {self:?}")));
        }
        Ok(())
    }
}

/// Adam with the usual `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Real> Adam<T> {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T]) {
        self.t += 1;
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let c1 = T::lit(1.0 / (1.0 - self.beta1.powi(self.t)));
        let c2 = T::lit(1.0 / (1.0 - self.beta2.powi(self.t)));
        let lr = T::lit(self.lr);
        let eps = T::lit(self.eps);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * g * g;
            let mh = self.m[i] * c1;
            let vh = self.v[i] * c2;
            params[i] -= lr * mh / (vh.sqrt() + eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub loss: f64,
    pub recon: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochLoss>,
}

/// Mini-batch Adam over shuffled epochs on row-major `rows x input_dim`
/// training data. The last partial batch of each epoch is kept. `progress`
/// is called after every epoch.
pub fn train<T: Real>(
    vae: &mut Vae<T>,
    data: &[T],
    cfg: &TrainConfig,
    mut progress: impl FnMut(&EpochLoss),
) -> Result<TrainReport> {
    cfg.validate()?;
    let m = vae.arch.input_dim;
    let zd = vae.arch.z_dim;
    if data.is_empty() || data.len() % m != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{} training values are not whole {m}-wide rows",
            data.len()
        )));
    }
    let rows = data.len() / m;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(vae.n_params(), cfg.learning_rate);
    let mut grad = vec![T::zero(); vae.n_params()];
    let mut ws = Workspace::default();
    let mut order: Vec<usize> = (0..rows).collect();
    let mut batch_x: Vec<T> = Vec::with_capacity(cfg.batch_size * m);
    let scale = T::lit(1.0 / cfg.mc_samples as f64);
    let mut report = TrainReport { epochs: Vec::new() };

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut sum, mut sum_recon, mut sum_kl) = (0.0, 0.0, 0.0);
        for chunk in order.chunks(cfg.batch_size) {
            batch_x.clear();
            for &r in chunk {
                batch_x.extend_from_slice(&data[r * m..(r + 1) * m]);
            }
            grad.iter_mut().for_each(|g| *g = T::zero());
            for _ in 0..cfg.mc_samples {
                let eps: Vec<T> = standard_normal(&mut rng, chunk.len() * zd);
                let parts = vae
                    .loss_and_grad(&batch_x, &eps, scale, &mut grad, &mut ws)
                    .map_err(|_| Error::Diverged { epoch })?;
                let w = chunk.len() as f64 / cfg.mc_samples as f64;
                sum += parts.total * w;
                sum_recon += parts.recon * w;
                sum_kl += parts.kl * w;
            }
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            adam.step(&mut vae.params, &grad);
        }
        let entry = EpochLoss {
            epoch,
            loss: sum / rows as f64,
            recon: sum_recon / rows as f64,
            kl: sum_kl / rows as f64,
        };
        if !entry.loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        progress(&entry);
        report.epochs.push(entry);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vae::VaeArch;

    fn toy_data(rows: usize, m: usize) -> Vec<f64> {
        // Two latent factors spread over m features.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f: Vec<f64> = standard_normal(&mut rng, rows * 2);
        (0..rows)
            .flat_map(|r| {
                let (a, b) = (f[2 * r], f[2 * r + 1]);
                (0..m).map(move |j| a * (j as f64 * 0.3).sin() + b * (j as f64 * 0.2).cos())
            })
            .collect()
    }

    fn arch(m: usize) -> VaeArch {
        VaeArch {
            input_dim: m,
            z_dim: 2,
            hidden: vec![16, 8],
            leaky_slope: 0.01,
        }
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let mut vae = Vae::<f64>::init(arch(10), 2).unwrap();
        let before = vae.params.clone();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 2,
            ..TrainConfig::default()
        };
        train(&mut vae, &toy_data(50, 10), &cfg, |_| {}).unwrap();
        assert_eq!(vae.params, before);
    }

    #[test]
    fn seeded_training_is_reproducible() {
        let data = toy_data(40, 10);
        let cfg = TrainConfig {
            learning_rate: 1e-3,
            epochs: 3,
            batch_size: 16,
            seed: 5,
            ..TrainConfig::default()
        };
        let mut a = Vae::<f32>::init(arch(10), 3).unwrap();
        let mut b = a.clone();
        let data: Vec<f32> = data.iter().map(|&v| v as f32).collect();
        train(&mut a, &data, &cfg, |_| {}).unwrap();
        train(&mut b, &data, &cfg, |_| {}).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn loss_decreases_on_toy_problem() {
        let data = toy_data(1000, 12);
        let cfg = TrainConfig {
            learning_rate: 1e-3,
            epochs: 50,
            batch_size: 64,
            seed: 1,
            ..TrainConfig::default()
        };
        let mut vae = Vae::<f64>::init(arch(12), 4).unwrap();
        let report = train(&mut vae, &data, &cfg, |_| {}).unwrap();
        let losses: Vec<f64> = report.epochs.iter().map(|e| e.loss).collect();
        let smooth: Vec<f64> = losses.windows(5).map(|w| w.iter().sum::<f64>() / 5.0).collect();
        for w in smooth.windows(2) {
            assert!(w[1] <= w[0], "{smooth:?}");
        }
        assert!(smooth.last().unwrap() < &(0.5 * smooth[0]));
    }
}
