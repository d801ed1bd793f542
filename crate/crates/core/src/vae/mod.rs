//! Fully-connected variational autoencoder with hand-written backpropagation.
//!
//! The encoder maps a feature vector through leaky-ReLU layers to a
//! `2 * z_dim` head split into mean and log-variance; the decoder mirrors the
//! hidden widths back to the feature width with a linear output layer.

mod checkpoint;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use train::{train, Adam, EpochLoss, TrainConfig, TrainReport};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-dimension Gaussian `N(mu_i, sigma_i^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentGaussian<T> {
    pub mu: Vec<T>,
    pub sigma: Vec<T>,
}

impl<T: Real> LatentGaussian<T> {
    pub fn standard(z_dim: usize) -> Self {
        LatentGaussian {
            mu: vec![T::zero(); z_dim],
            sigma: vec![T::one(); z_dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// `z = mu + sigma * eps`.
pub fn reparameterize<T: Real>(lg: &LatentGaussian<T>, eps: &[T]) -> Result<Vec<T>> {
    if eps.len() != lg.dim() {
        return Err(Error::DimensionMismatch(format!(
            "eps of length {} for a {}-dimensional latent",
            eps.len(),
            lg.dim()
        )));
    }
    Ok(lg
        .mu
        .iter()
        .zip(&lg.sigma)
        .zip(eps)
        .map(|((&m, &s), &e)| m + s * e)
        .collect())
}

/// Closed-form `KL(N(mu, sigma^2) || N(0, I))`.
pub fn kl_standard<T: Real>(lg: &LatentGaussian<T>) -> T {
    let half = T::lit(0.5);
    lg.mu
        .iter()
        .zip(&lg.sigma)
        .map(|(&m, &s)| half * (m * m + s * s - T::one() - T::lit(2.0) * s.ln()))
        .sum()
}

fn default_slope() -> f64 {
    0.01
}

/// Layer widths of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeArch {
    pub input_dim: usize,
    pub z_dim: usize,
    /// Encoder hidden widths, outermost first; the decoder mirrors them.
    pub hidden: Vec<usize>,
    #[serde(default = "default_slope")]
    pub leaky_slope: f64,
}

impl VaeArch {
    pub fn new(input_dim: usize, z_dim: usize) -> Self {
        VaeArch {
            input_dim,
            z_dim,
            hidden: vec![512, 256, 128],
            leaky_slope: default_slope(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.z_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::InvalidParams(format!("degenerate architecture {self:?}")));
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::InvalidParams("leaky slope outside [0, 1)".into()));
        }
        Ok(())
    }

    fn encoder_dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim];
        d.extend(&self.hidden);
        d.push(2 * self.z_dim);
        d
    }

    fn decoder_dims(&self) -> Vec<usize> {
        let mut d = vec![self.z_dim];
        d.extend(self.hidden.iter().rev());
        d.push(self.input_dim);
        d
    }
}

/// Dense layer view into the flat parameter vector. Weights are `n_out x n_in`
/// row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Layer {
    n_in: usize,
    n_out: usize,
    w: usize,
    b: usize,
}

fn build_layers(arch: &VaeArch) -> (Vec<Layer>, usize, usize) {
    let mut layers = Vec::new();
    let mut offset = 0;
    let mut push = |dims: &[usize], layers: &mut Vec<Layer>| {
        for w in dims.windows(2) {
            layers.push(Layer {
                n_in: w[0],
                n_out: w[1],
                w: offset,
                b: offset + w[0] * w[1],
            });
            offset += w[0] * w[1] + w[1];
        }
    };
    push(&arch.encoder_dims(), &mut layers);
    let n_enc = layers.len();
    push(&arch.decoder_dims(), &mut layers);
    let total = layers.last().map_or(0, |l| l.b + l.n_out);
    (layers, n_enc, total)
}

/// Network weights plus their layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Vae<T> {
    pub arch: VaeArch,
    pub params: Vec<T>,
    layers: Vec<Layer>,
    n_enc: usize,
}

/// Reusable activation and gradient buffers for batched passes.
#[derive(Debug, Default, Clone)]
pub struct Workspace<T> {
    acts: Vec<Vec<T>>,
    delta: Vec<T>,
    delta_next: Vec<T>,
    z: Vec<T>,
    sigma: Vec<T>,
}

/// Batch-averaged loss split into its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

impl<T: Real> Vae<T> {
    /// He-normal hidden weights, zero biases, unit-gain head weights.
    pub fn init(arch: VaeArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let (layers, n_enc, total) = build_layers(&arch);
        let mut params = vec![T::zero(); total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (i, l) in layers.iter().enumerate() {
            let head = i + 1 == n_enc || i + 1 == layers.len();
            let gain = if head { 1.0 } else { 2.0 };
            let std = (gain / l.n_in as f64).sqrt();
            let dist = Normal::new(0.0, std).expect("positive std");
            for p in &mut params[l.w..l.b] {
                *p = T::lit(dist.sample(&mut rng));
            }
        }
        Ok(Vae {
            arch,
            params,
            layers,
            n_enc,
        })
    }

    /// Wraps an existing parameter vector, checking its length.
    pub fn from_params(arch: VaeArch, params: Vec<T>) -> Result<Self> {
        arch.validate()?;
        let (layers, n_enc, total) = build_layers(&arch);
        if params.len() != total {
            return Err(Error::DimensionMismatch(format!(
                "{} parameters for an architecture needing {total}",
                params.len()
            )));
        }
        Ok(Vae {
            arch,
            params,
            layers,
            n_enc,
        })
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Errors unless the network maps `input_dim` features to `z_dim` latents.
    pub fn check_layout(&self, input_dim: usize, z_dim: usize) -> Result<()> {
        if self.arch.input_dim != input_dim || self.arch.z_dim != z_dim {
            return Err(Error::DimensionMismatch(format!(
                "network is {}->{} but {}->{} was expected",
                self.arch.input_dim, self.arch.z_dim, input_dim, z_dim
            )));
        }
        Ok(())
    }

    /// Zeroes the weights and biases of the encoder head.
    pub fn zero_encoder_head(&mut self) {
        let l = self.layers[self.n_enc - 1];
        for p in &mut self.params[l.w..l.b + l.n_out] {
            *p = T::zero();
        }
    }

    fn dense(&self, l: Layer, x: &[T], batch: usize, out: &mut Vec<T>, act: bool) {
        out.clear();
        out.reserve(batch * l.n_out);
        let bias = &self.params[l.b..l.b + l.n_out];
        for _ in 0..batch {
            out.extend_from_slice(bias);
        }
        let w = &self.params[l.w..l.b];
        if batch == 1 {
            // Matrix-vector products are faster as plain dot products.
            for (o, row) in out.iter_mut().zip(w.chunks_exact(l.n_in)) {
                *o += dot(row, x);
            }
        } else {
            T::gemm(
                batch,
                l.n_in,
                l.n_out,
                T::one(),
                x,
                l.n_in as isize,
                1,
                w,
                1,
                l.n_in as isize,
                T::one(),
                out,
                l.n_out as isize,
                1,
            );
        }
        if act {
            let slope = T::lit(self.arch.leaky_slope);
            for v in out.iter_mut() {
                if *v < T::zero() {
                    *v *= slope;
                }
            }
        }
    }

    /// Runs layers `range` on `x`, storing every layer output in `acts`.
    fn run(&self, range: std::ops::Range<usize>, x: &[T], batch: usize, acts: &mut [Vec<T>]) {
        let last = range.end - 1;
        for (slot, i) in range.clone().enumerate() {
            let (before, rest) = acts.split_at_mut(slot);
            let input = if slot == 0 { x } else { &before[slot - 1] };
            self.dense(self.layers[i], input, batch, &mut rest[0], i != last);
        }
    }

    fn split_head(&self, head: &[T], batch: usize) -> Result<Vec<LatentGaussian<T>>> {
        let z = self.arch.z_dim;
        let half = T::lit(0.5);
        let out: Vec<LatentGaussian<T>> = head
            .chunks_exact(2 * z)
            .take(batch)
            .map(|row| LatentGaussian {
                mu: row[..z].to_vec(),
                sigma: row[z..].iter().map(|&lv| (half * lv).exp()).collect(),
            })
            .collect();
        if out
            .iter()
            .any(|g| g.mu.iter().chain(&g.sigma).any(|v| !v.is_finite()) || g.sigma.iter().any(|&s| s == T::zero()))
        {
            return Err(Error::NonFinite("encoder output"));
        }
        Ok(out)
    }

    fn check_input(&self, x: &[T], width: usize) -> Result<usize> {
        if width == 0 || x.len() % width != 0 {
            return Err(Error::DimensionMismatch(format!(
                "input of length {} is not a whole number of {width}-wide rows",
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input"));
        }
        Ok(x.len() / width)
    }

    pub fn encode(&self, x: &[T]) -> Result<LatentGaussian<T>> {
        if x.len() != self.arch.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "feature of length {} for a {}-wide encoder",
                x.len(),
                self.arch.input_dim
            )));
        }
        Ok(self.encode_batch(x)?.remove(0))
    }

    /// Encodes row-major `rows x input_dim` data.
    pub fn encode_batch(&self, x: &[T]) -> Result<Vec<LatentGaussian<T>>> {
        let batch = self.check_input(x, self.arch.input_dim)?;
        let mut acts = vec![Vec::new(); self.n_enc];
        self.run(0..self.n_enc, x, batch, &mut acts);
        self.split_head(&acts[self.n_enc - 1], batch)
    }

    pub fn decode(&self, z: &[T]) -> Result<Vec<T>> {
        if z.len() != self.arch.z_dim {
            return Err(Error::DimensionMismatch(format!(
                "latent of length {} for a {}-dimensional decoder",
                z.len(),
                self.arch.z_dim
            )));
        }
        self.decode_batch(z)
    }

    /// Decodes row-major `rows x z_dim` latents.
    pub fn decode_batch(&self, z: &[T]) -> Result<Vec<T>> {
        let batch = self.check_input(z, self.arch.z_dim)?;
        let n = self.layers.len();
        let mut acts = vec![Vec::new(); n - self.n_enc];
        self.run(self.n_enc..n, z, batch, &mut acts);
        let out = acts.pop().unwrap_or_default();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("decoder output"));
        }
        Ok(out)
    }

    /// Negative ELBO of one sample with one noise draw, and its gradient.
    pub fn elbo_loss(&self, x: &[T], eps: &[T]) -> Result<(T, Vec<T>)> {
        let mut grad = vec![T::zero(); self.params.len()];
        let mut ws = Workspace::default();
        let parts = self.loss_and_grad(x, eps, T::one(), &mut grad, &mut ws)?;
        Ok((T::lit(parts.total), grad))
    }

    /// Batch-mean negative ELBO (squared error summed over features plus KL)
    /// for row-major `x` and matching `eps`. Adds `scale * dLoss/dparams`
    /// into `grad`.
    pub fn loss_and_grad(
        &self,
        x: &[T],
        eps: &[T],
        scale: T,
        grad: &mut [T],
        ws: &mut Workspace<T>,
    ) -> Result<LossParts> {
        let m = self.arch.input_dim;
        let zd = self.arch.z_dim;
        let batch = self.check_input(x, m)?;
        if eps.len() != batch * zd || grad.len() != self.params.len() {
            return Err(Error::DimensionMismatch("eps or gradient buffer has the wrong shape".into()));
        }
        let n = self.layers.len();
        ws.acts.resize(n, Vec::new());

        // Forward.
        self.run(0..self.n_enc, x, batch, &mut ws.acts[..self.n_enc]);
        let half = T::lit(0.5);
        ws.z.clear();
        ws.sigma.clear();
        let mut kl = 0.0;
        for (r, head) in ws.acts[self.n_enc - 1].chunks_exact(2 * zd).enumerate() {
            for j in 0..zd {
                let (mu, lv) = (head[j], head[zd + j]);
                let s = (half * lv).exp();
                ws.sigma.push(s);
                ws.z.push(mu + s * eps[r * zd + j]);
                kl += (half * (mu * mu + s * s - T::one() - lv)).as_f64();
            }
        }
        self.run(self.n_enc..n, &ws.z, batch, &mut ws.acts[self.n_enc..]);
        let recon_out = &ws.acts[n - 1];
        let mut recon = 0.0;
        let inv_b = T::one() / T::lit(batch as f64);
        ws.delta.clear();
        for (&y, &t) in recon_out.iter().zip(x) {
            let e = y - t;
            recon += (e * e).as_f64();
            ws.delta.push(T::lit(2.0) * e * inv_b * scale);
        }
        let recon = recon / batch as f64;
        let kl = kl / batch as f64;
        if !(recon.is_finite() && kl.is_finite()) {
            return Err(Error::NonFinite("loss"));
        }

        // Backward through the decoder down to dL/dz.
        let slope = T::lit(self.arch.leaky_slope);
        for i in (self.n_enc..n).rev() {
            let l = self.layers[i];
            let input: &[T] = if i == self.n_enc {
                &ws.z
            } else {
                &ws.acts[i - 1]
            };
            self.backward_dense(l, input, batch, &ws.delta, grad);
            self.input_delta(l, batch, &ws.delta, &mut ws.delta_next);
            if i > self.n_enc {
                apply_leaky_grad(&mut ws.delta_next, &ws.acts[i - 1], slope);
            }
            std::mem::swap(&mut ws.delta, &mut ws.delta_next);
        }

        // Through the reparameterization into the encoder head.
        let dz = std::mem::take(&mut ws.delta);
        ws.delta.clear();
        ws.delta.resize(batch * 2 * zd, T::zero());
        let head = &ws.acts[self.n_enc - 1];
        for r in 0..batch {
            for j in 0..zd {
                let k = r * zd + j;
                let mu = head[r * 2 * zd + j];
                let s = ws.sigma[k];
                let g = dz[k];
                ws.delta[r * 2 * zd + j] = g + mu * inv_b * scale;
                ws.delta[r * 2 * zd + zd + j] =
                    g * eps[k] * half * s + half * (s * s - T::one()) * inv_b * scale;
            }
        }
        ws.delta_next = dz;

        for i in (0..self.n_enc).rev() {
            let l = self.layers[i];
            let input: &[T] = if i == 0 { x } else { &ws.acts[i - 1] };
            self.backward_dense(l, input, batch, &ws.delta, grad);
            if i > 0 {
                self.input_delta(l, batch, &ws.delta, &mut ws.delta_next);
                apply_leaky_grad(&mut ws.delta_next, &ws.acts[i - 1], slope);
                std::mem::swap(&mut ws.delta, &mut ws.delta_next);
            }
        }

        Ok(LossParts {
            total: recon + kl,
            recon,
            kl,
        })
    }

    /// Accumulates weight and bias gradients of one layer.
    fn backward_dense(&self, l: Layer, input: &[T], batch: usize, delta: &[T], grad: &mut [T]) {
        T::gemm(
            l.n_out,
            batch,
            l.n_in,
            T::one(),
            delta,
            1,
            l.n_out as isize,
            input,
            l.n_in as isize,
            1,
            T::one(),
            &mut grad[l.w..l.b],
            l.n_in as isize,
            1,
        );
        let gb = &mut grad[l.b..l.b + l.n_out];
        for row in delta.chunks_exact(l.n_out) {
            for (g, &d) in gb.iter_mut().zip(row) {
                *g += d;
            }
        }
    }

    /// `dL/dinput = delta W`.
    fn input_delta(&self, l: Layer, batch: usize, delta: &[T], out: &mut Vec<T>) {
        out.clear();
        out.resize(batch * l.n_in, T::zero());
        T::gemm(
            batch,
            l.n_out,
            l.n_in,
            T::one(),
            delta,
            l.n_out as isize,
            1,
            &self.params[l.w..l.b],
            l.n_in as isize,
            1,
            T::zero(),
            out,
            l.n_in as isize,
            1,
        );
    }

    /// Converts the weights to another precision.
    pub fn cast<U: Real>(&self) -> Vae<U> {
        Vae {
            arch: self.arch.clone(),
            params: self.params.iter().map(|v| U::lit(v.as_f64())).collect(),
            layers: self.layers.clone(),
            n_enc: self.n_enc,
        }
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: T = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(&x, &y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().copied().sum::<T>() + tail
}

fn apply_leaky_grad<T: Real>(delta: &mut [T], act: &[T], slope: T) {
    for (d, &a) in delta.iter_mut().zip(act) {
        if a < T::zero() || (a == T::zero() && slope == T::zero()) {
            *d *= slope;
        }
    }
}

/// Standard-normal draws as `T`.
pub fn standard_normal<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<T> {
    (0..n)
        .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
        .collect()
}
