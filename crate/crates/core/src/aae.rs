//! Adversarial auto-encoder: encoder `Q`, decoder `P`, latent discriminator
//! `D`, their three losses and the three-optimizer training schedule.
//!
//! Each minibatch runs, in order:
//! 1. an Adam step on encoder + decoder minimizing the reconstruction
//!    cross-entropy `L_AE`;
//! 2. an SGD step on the discriminator minimizing `L_D`, the GAN
//!    discriminator loss plus `gamma / 2` times a gradient penalty `R_D`;
//! 3. an Adam step on the encoder minimizing the generator loss `L_Q`.

use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{GaitError, Result};
use crate::nn::{
    cross_entropy, cross_entropy_grad, dot, softplus, Activation, Gradients, Mlp, OptimizerState,
    DEFAULT_LEAKY_SLOPE,
};

/// Layer widths of the three partial networks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: usize,
    pub latent: usize,
    pub leaky_slope: f64,
}

impl Default for Architecture {
    /// 256 -> 96 -> 16 encoder, 16 -> 96 -> 256 decoder, 16 -> 96 -> 1
    /// discriminator.
    fn default() -> Self {
        Self {
            input_dim: 256,
            hidden: 96,
            latent: 16,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden == 0 || self.latent == 0 {
            return Err(GaitError::InvalidParams(format!(
                "architecture widths must be positive: {self:?}"
            )));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(GaitError::InvalidParams(format!(
                "leaky ReLU slope {} outside (0, 1)",
                self.leaky_slope
            )));
        }
        Ok(())
    }
}

/// Zero-mean normal prior with covariance `sigma2 * I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
    pub dim: usize,
    pub sigma2: f64,
}

impl PriorSpec {
    pub fn new(dim: usize, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(GaitError::InvalidParams(format!(
                "prior variance must be positive, got {sigma2}"
            )));
        }
        Ok(Self { dim, sigma2 })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let sigma = self.sigma2.sqrt();
        (0..self.dim)
            .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    /// Density at `z` divided by the density at the mode, in `(0, 1]`.
    pub fn scaled_density(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim {
            return Err(GaitError::ShapeMismatch {
                expected: self.dim,
                actual: z.len(),
            });
        }
        Ok((-dot(z, z) / (2.0 * self.sigma2)).exp())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AaeModel {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub discriminator: Mlp,
}

impl AaeModel {
    pub fn new<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let lrelu = Activation::LeakyRelu(arch.leaky_slope);
        let encoder = Mlp::glorot(
            &[arch.input_dim, arch.hidden, arch.latent],
            vec![lrelu, Activation::Identity],
            rng,
        )?;
        let decoder = Mlp::glorot(
            &[arch.latent, arch.hidden, arch.input_dim],
            vec![lrelu, Activation::Sigmoid],
            rng,
        )?;
        let discriminator = Mlp::glorot(
            &[arch.latent, arch.hidden, 1],
            vec![lrelu, Activation::Sigmoid],
            rng,
        )?;
        Ok(Self {
            encoder,
            decoder,
            discriminator,
        })
    }

    pub fn from_networks(encoder: Mlp, decoder: Mlp, discriminator: Mlp) -> Result<Self> {
        let latent = encoder.output_dim();
        if decoder.input_dim() != latent || discriminator.input_dim() != latent {
            return Err(GaitError::ShapeMismatch {
                expected: latent,
                actual: decoder.input_dim().min(discriminator.input_dim()),
            });
        }
        if decoder.output_dim() != encoder.input_dim() || discriminator.output_dim() != 1 {
            return Err(GaitError::InvalidParams(
                "decoder must reconstruct the encoder input and the discriminator must be scalar"
                    .into(),
            ));
        }
        Ok(Self {
            encoder,
            decoder,
            discriminator,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.encoder.forward(x)
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.decoder.forward(z)
    }

    /// Probability that `z` was drawn from the prior.
    pub fn discriminate(&self, z: &[f64]) -> Result<f64> {
        Ok(self.discriminator.forward(z)?[0])
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count() + self.discriminator.param_count()
    }
}

fn require_nonempty<T>(batch: &[T]) -> Result<()> {
    if batch.is_empty() {
        Err(GaitError::EmptyDataset)
    } else {
        Ok(())
    }
}

/// Mean reconstruction cross-entropy over elements and samples.
pub fn loss_ae(model: &AaeModel, batch: &[Vec<f64>]) -> Result<f64> {
    require_nonempty(batch)?;
    let mut total = 0.0;
    for x in batch {
        let xhat = model.decode(&model.encode(x)?)?;
        total += cross_entropy(x, &xhat);
    }
    Ok(total / batch.len() as f64)
}

fn disc_logit(disc: &Mlp, z: &[f64]) -> Result<f64> {
    Ok(disc.forward_trace(z)?.last_pre_activation()[0])
}

/// `(1/2n) sum[-log D(z~) - log(1 - D(Q(x)))] + gamma/2 * R_D`.
pub fn loss_d(model: &AaeModel, batch: &[Vec<f64>], prior_samples: &[Vec<f64>], gamma: f64) -> Result<f64> {
    require_nonempty(batch)?;
    let fake = batch
        .iter()
        .map(|x| model.encode(x))
        .collect::<Result<Vec<_>>>()?;
    loss_d_latent(&model.discriminator, prior_samples, &fake, gamma)
}

fn loss_d_latent(disc: &Mlp, real: &[Vec<f64>], fake: &[Vec<f64>], gamma: f64) -> Result<f64> {
    if real.len() != fake.len() {
        return Err(GaitError::ShapeMismatch {
            expected: fake.len(),
            actual: real.len(),
        });
    }
    let n = fake.len() as f64;
    let mut adv = 0.0;
    for (zr, zf) in real.iter().zip(fake) {
        // -log sigmoid(a) = softplus(-a), -log(1 - sigmoid(a)) = softplus(a)
        adv += softplus(-disc_logit(disc, zr)?) + softplus(disc_logit(disc, zf)?);
    }
    let mut loss = adv / (2.0 * n);
    if gamma != 0.0 {
        loss += 0.5 * gamma * gradient_penalty(disc, real, fake)?;
    }
    Ok(loss)
}

/// `(1/n) sum -log D(Q(x))`.
pub fn loss_q(model: &AaeModel, batch: &[Vec<f64>]) -> Result<f64> {
    require_nonempty(batch)?;
    let mut total = 0.0;
    for x in batch {
        total += softplus(-disc_logit(&model.discriminator, &model.encode(x)?)?);
    }
    Ok(total / batch.len() as f64)
}

struct CriticShape<'a> {
    w1: &'a [f64],
    w2: &'a [f64],
    latent: usize,
    slope: f64,
}

fn critic_shape(disc: &Mlp) -> Result<CriticShape<'_>> {
    let layers = disc.layers();
    match (layers, disc.activations()) {
        ([l1, l2], [Activation::LeakyRelu(slope), Activation::Sigmoid]) if l2.out_units() == 1 => {
            Ok(CriticShape {
                w1: &l1.weights,
                w2: &l2.weights,
                latent: l1.in_units(),
                slope: *slope,
            })
        }
        _ => Err(GaitError::InvalidParams(
            "gradient penalty expects a one-hidden-layer leaky-ReLU discriminator with a sigmoid head"
                .into(),
        )),
    }
}

/// Gradient of the discriminator logit with respect to its input.
pub fn logit_input_gradient(disc: &Mlp, z: &[f64]) -> Result<Vec<f64>> {
    let trace = disc.forward_trace(z)?;
    let shape = critic_shape(disc)?;
    Ok(logit_grad_from_trace(&shape, &trace).0)
}

/// Returns `g = d logit / d z` and the per-hidden-unit leaky-ReLU slopes.
fn logit_grad_from_trace(shape: &CriticShape<'_>, trace: &crate::nn::Trace) -> (Vec<f64>, Vec<f64>) {
    let slopes: Vec<f64> = trace
        .pre_activation(0)
        .iter()
        .map(|&h| if h > 0.0 { 1.0 } else { shape.slope })
        .collect();
    let mut g = vec![0.0; shape.latent];
    for (j, (&s, &w2)) in slopes.iter().zip(shape.w2).enumerate() {
        let coef = s * w2;
        let row = &shape.w1[j * shape.latent..(j + 1) * shape.latent];
        for (gk, &w) in g.iter_mut().zip(row) {
            *gk += coef * w;
        }
    }
    (g, slopes)
}

/// Weighted squared gradient-norm penalty on the discriminator logit:
/// `mean_real (1 - D)^2 |grad|^2 + mean_fake D^2 |grad|^2`.
pub fn gradient_penalty(disc: &Mlp, real: &[Vec<f64>], fake: &[Vec<f64>]) -> Result<f64> {
    require_nonempty(real)?;
    require_nonempty(fake)?;
    let shape = critic_shape(disc)?;
    let term = |z: &Vec<f64>, is_real: bool| -> Result<f64> {
        let trace = disc.forward_trace(z)?;
        let p = trace.output()[0];
        let (g, _) = logit_grad_from_trace(&shape, &trace);
        let weight = if is_real { (1.0 - p).powi(2) } else { p * p };
        Ok(weight * dot(&g, &g))
    };
    let mut real_sum = 0.0;
    for z in real {
        real_sum += term(z, true)?;
    }
    let mut fake_sum = 0.0;
    for z in fake {
        fake_sum += term(z, false)?;
    }
    Ok(real_sum / real.len() as f64 + fake_sum / fake.len() as f64)
}

/// `L_AE` and its gradients for the encoder and decoder.
pub fn ae_gradients(model: &AaeModel, batch: &[Vec<f64>]) -> Result<(f64, Gradients, Gradients)> {
    require_nonempty(batch)?;
    let n = batch.len() as f64;
    let mut g_enc = Gradients::zeros_like(&model.encoder);
    let mut g_dec = Gradients::zeros_like(&model.decoder);
    let mut total = 0.0;
    for x in batch {
        let enc = model.encoder.forward_trace(x)?;
        let dec = model.decoder.forward_trace(enc.output())?;
        let xhat = dec.output();
        total += cross_entropy(x, xhat);
        let mut grad = cross_entropy_grad(x, xhat);
        grad.iter_mut().for_each(|g| *g /= n);
        let gz = model.decoder.backward(&dec, &grad, &mut g_dec);
        model.encoder.backward(&enc, &gz, &mut g_enc);
    }
    Ok((total / n, g_enc, g_dec))
}

/// `L_D` and its gradient for the discriminator, given encoded latents
/// `fake` and prior draws `real`.
pub fn disc_gradients(
    disc: &Mlp,
    real: &[Vec<f64>],
    fake: &[Vec<f64>],
    gamma: f64,
) -> Result<(f64, Gradients)> {
    require_nonempty(fake)?;
    if real.len() != fake.len() {
        return Err(GaitError::ShapeMismatch {
            expected: fake.len(),
            actual: real.len(),
        });
    }
    let shape = critic_shape(disc)?;
    let n = fake.len() as f64;
    let penalty_scale = 0.5 * gamma / n;
    let mut grads = Gradients::zeros_like(disc);
    let mut adv = 0.0;
    let mut penalty = 0.0;

    let samples = real.iter().map(|z| (z, true)).chain(fake.iter().map(|z| (z, false)));
    for (z, is_real) in samples {
        let trace = disc.forward_trace(z)?;
        let a = trace.last_pre_activation()[0];
        let p = trace.output()[0];

        let (adv_term, d_adv) = if is_real {
            (softplus(-a), -(1.0 - p))
        } else {
            (softplus(a), p)
        };
        adv += adv_term;
        let mut d_logit = d_adv / (2.0 * n);

        if gamma != 0.0 {
            let (g, slopes) = logit_grad_from_trace(&shape, &trace);
            let norm2 = dot(&g, &g);
            // weight (1-p)^2 or p^2 and its derivative w.r.t. the logit
            let (weight, d_weight) = if is_real {
                ((1.0 - p).powi(2), -2.0 * p * (1.0 - p).powi(2))
            } else {
                (p * p, 2.0 * p * p * (1.0 - p))
            };
            penalty += weight * norm2;
            d_logit += penalty_scale * norm2 * d_weight;

            // d|g|^2/dW1[j,k] = 2 g_k s_j w2_j ; d|g|^2/dw2_j = 2 s_j (W1 g)_j
            let c = penalty_scale * weight * 2.0;
            let latent = shape.latent;
            for (j, &s) in slopes.iter().enumerate() {
                let w2j = shape.w2[j];
                let row = &shape.w1[j * latent..(j + 1) * latent];
                let gw1 = &mut grads.weights[0][j * latent..(j + 1) * latent];
                let coef = c * s * w2j;
                for (gw, &gk) in gw1.iter_mut().zip(&g) {
                    *gw += coef * gk;
                }
                grads.weights[1][j] += c * s * dot(row, &g);
            }
        }
        disc.backward_from_pre(&trace, vec![d_logit], &mut grads);
    }
    let loss = adv / (2.0 * n) + 0.5 * gamma * penalty / n;
    Ok((loss, grads))
}

/// `L_Q` and its gradient for the encoder, back-propagated through a fixed
/// discriminator.
pub fn gen_gradients(model: &AaeModel, batch: &[Vec<f64>]) -> Result<(f64, Gradients)> {
    require_nonempty(batch)?;
    let n = batch.len() as f64;
    let mut g_enc = Gradients::zeros_like(&model.encoder);
    let mut scratch = Gradients::zeros_like(&model.discriminator);
    let mut total = 0.0;
    for x in batch {
        let enc = model.encoder.forward_trace(x)?;
        let dt = model.discriminator.forward_trace(enc.output())?;
        let a = dt.last_pre_activation()[0];
        let p = dt.output()[0];
        total += softplus(-a);
        let gz = model
            .discriminator
            .backward_from_pre(&dt, vec![-(1.0 - p) / n], &mut scratch);
        model.encoder.backward(&enc, &gz, &mut g_enc);
    }
    Ok((total / n, g_enc))
}

/// Hyper-parameters of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub epochs: usize,
    pub batch_size: usize,
    /// Initial weight of the discriminator gradient penalty.
    pub gamma0: f64,
    /// Per-epoch multiplicative annealing of `gamma`.
    pub gamma_decay: f64,
    pub lr_ae: f64,
    pub lr_gen: f64,
    pub lr_disc: f64,
    pub prior_sigma2: f64,
    pub seed: u64,
    pub stable_window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::default(),
            epochs: 500,
            batch_size: 64,
            gamma0: 0.1,
            gamma_decay: 0.99,
            lr_ae: 1e-3,
            lr_gen: 1e-4,
            lr_disc: 1e-2,
            prior_sigma2: 1.0,
            seed: 0,
            stable_window: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.architecture.validate()?;
        let bad = |msg: String| Err(GaitError::InvalidParams(msg));
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(self.gamma0 >= 0.0) || !(self.gamma_decay > 0.0 && self.gamma_decay <= 1.0) {
            return bad(format!(
                "gamma0 = {} must be >= 0 and gamma_decay = {} in (0, 1]",
                self.gamma0, self.gamma_decay
            ));
        }
        if [self.lr_ae, self.lr_gen, self.lr_disc]
            .iter()
            .any(|lr| !(*lr >= 0.0 && lr.is_finite()))
        {
            return bad("learning rates must be finite and non-negative".into());
        }
        if self.epochs < self.stable_window || self.stable_window == 0 {
            return bad(format!(
                "epochs ({}) must be at least the stable window ({}), which must be positive",
                self.epochs, self.stable_window
            ));
        }
        PriorSpec::new(self.architecture.latent, self.prior_sigma2)?;
        Ok(())
    }

    /// Penalty weight used during the given 0-based epoch.
    pub fn gamma_at(&self, epoch: usize) -> f64 {
        self.gamma0 * self.gamma_decay.powi(epoch as i32)
    }

    pub fn prior(&self) -> PriorSpec {
        PriorSpec {
            dim: self.architecture.latent,
            sigma2: self.prior_sigma2,
        }
    }
}

/// Mean losses over the minibatches of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLosses {
    pub ae: f64,
    pub d: f64,
    pub q: f64,
}

/// Owns the model and optimizer states for a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trainer {
    pub model: AaeModel,
    pub ae_opt: OptimizerState,
    pub gen_opt: OptimizerState,
    pub disc_opt: OptimizerState,
    pub history: Vec<EpochLosses>,
    pub config: TrainConfig,
}

const INIT_STREAM: u64 = u64::MAX;

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(INIT_STREAM);
        let model = AaeModel::new(config.architecture, &mut rng)?;
        Ok(Self::with_model(model, config))
    }

    pub fn with_model(model: AaeModel, config: TrainConfig) -> Self {
        Self {
            model,
            ae_opt: OptimizerState::adam(config.lr_ae),
            gen_opt: OptimizerState::adam(config.lr_gen),
            disc_opt: OptimizerState::sgd(config.lr_disc),
            history: Vec::new(),
            config,
        }
    }

    /// Number of completed epochs.
    pub fn epoch(&self) -> usize {
        self.history.len()
    }

    /// Randomness for a given epoch depends only on the seed and the epoch
    /// number, so a resumed run continues identically.
    pub fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(epoch as u64);
        rng
    }

    /// Adam step on encoder and decoder; returns the batch `L_AE`.
    pub fn ae_step(&mut self, batch: &[Vec<f64>]) -> Result<f64> {
        let (loss, g_enc, g_dec) = ae_gradients(&self.model, batch)?;
        let mut params = self.model.encoder.tensors_mut();
        params.extend(self.model.decoder.tensors_mut());
        let mut grads = g_enc.tensors();
        grads.extend(g_dec.tensors());
        self.ae_opt.step(&mut params, &grads)?;
        Ok(loss)
    }

    /// SGD step on the discriminator; returns the batch `L_D`.
    pub fn disc_step(&mut self, batch: &[Vec<f64>], prior_samples: &[Vec<f64>], gamma: f64) -> Result<f64> {
        let fake = batch
            .iter()
            .map(|x| self.model.encode(x))
            .collect::<Result<Vec<_>>>()?;
        let (loss, grads) = disc_gradients(&self.model.discriminator, prior_samples, &fake, gamma)?;
        self.disc_opt
            .step(&mut self.model.discriminator.tensors_mut(), &grads.tensors())?;
        Ok(loss)
    }

    /// Adam step on the encoder against the current discriminator; returns
    /// the batch `L_Q`.
    pub fn gen_step(&mut self, batch: &[Vec<f64>]) -> Result<f64> {
        let (loss, grads) = gen_gradients(&self.model, batch)?;
        self.gen_opt
            .step(&mut self.model.encoder.tensors_mut(), &grads.tensors())?;
        Ok(loss)
    }

    /// One pass over `data` in a seeded random order.
    pub fn train_epoch(&mut self, data: &[Vec<f64>]) -> Result<EpochLosses> {
        if data.is_empty() {
            return Err(GaitError::EmptyDataset);
        }
        let epoch = self.epoch();
        let mut rng = Self::epoch_rng(self.config.seed, epoch);
        let gamma = self.config.gamma_at(epoch);
        let prior = self.config.prior();

        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);

        let (mut sum_ae, mut sum_d, mut sum_q) = (0.0, 0.0, 0.0);
        let mut batches = 0usize;
        for chunk in order.chunks(self.config.batch_size) {
            let batch: Vec<Vec<f64>> = chunk.iter().map(|&i| data[i].clone()).collect();
            let prior_samples: Vec<Vec<f64>> = (0..batch.len()).map(|_| prior.sample(&mut rng)).collect();
            sum_ae += self.ae_step(&batch)?;
            sum_d += self.disc_step(&batch, &prior_samples, gamma)?;
            sum_q += self.gen_step(&batch)?;
            batches += 1;
        }
        let nb = batches as f64;
        let losses = EpochLosses {
            ae: sum_ae / nb,
            d: sum_d / nb,
            q: sum_q / nb,
        };
        if !(losses.ae.is_finite() && losses.d.is_finite() && losses.q.is_finite()) {
            return Err(GaitError::Numeric(format!(
                "non-finite loss at epoch {}: {losses:?}",
                epoch + 1
            )));
        }
        self.history.push(losses);
        Ok(losses)
    }
}

/// Picks the `window` consecutive epochs whose adversarial loss
/// `L_D + L_Q` has the smallest variance; earliest window wins ties.
/// Returns 1-based inclusive epoch numbers.
pub fn select_stable_window(history: &[EpochLosses], window: usize) -> Result<RangeInclusive<usize>> {
    if window == 0 || history.len() < window {
        return Err(GaitError::HistoryTooShort {
            len: history.len(),
            window,
        });
    }
    let signal: Vec<f64> = history.iter().map(|l| l.d + l.q).collect();
    let mut best = (f64::INFINITY, 0usize);
    for start in 0..=signal.len() - window {
        let w = &signal[start..start + window];
        let mean = w.iter().sum::<f64>() / window as f64;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / window as f64;
        if var < best.0 {
            best = (var, start);
        }
    }
    Ok(best.1 + 1..=best.1 + window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::DenseLayer;

    fn small_arch() -> Architecture {
        Architecture {
            input_dim: 16,
            hidden: 8,
            latent: 4,
            leaky_slope: 0.2,
        }
    }

    fn zero_model(arch: Architecture) -> AaeModel {
        let lrelu = Activation::LeakyRelu(arch.leaky_slope);
        let enc = Mlp::new(
            vec![DenseLayer::zeros(arch.input_dim, arch.hidden), DenseLayer::zeros(arch.hidden, arch.latent)],
            vec![lrelu, Activation::Identity],
        )
        .unwrap();
        let dec = Mlp::new(
            vec![DenseLayer::zeros(arch.latent, arch.hidden), DenseLayer::zeros(arch.hidden, arch.input_dim)],
            vec![lrelu, Activation::Sigmoid],
        )
        .unwrap();
        let disc = Mlp::new(
            vec![DenseLayer::zeros(arch.latent, arch.hidden), DenseLayer::zeros(arch.hidden, 1)],
            vec![lrelu, Activation::Sigmoid],
        )
        .unwrap();
        AaeModel::from_networks(enc, dec, disc).unwrap()
    }

    #[test]
    fn default_architecture_parameter_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = AaeModel::new(Architecture::default(), &mut rng).unwrap();
        assert_eq!(m.encoder.param_count(), (256 * 96 + 96) + (96 * 16 + 16));
        assert_eq!(m.decoder.param_count(), (16 * 96 + 96) + (96 * 256 + 256));
        assert_eq!(m.discriminator.param_count(), (16 * 96 + 96) + (96 + 1));
        assert_eq!(m.latent_dim(), 16);
    }

    #[test]
    fn zero_weight_encoder_returns_bias() {
        let mut m = zero_model(small_arch());
        m.encoder.layers_mut()[1].biases = vec![0.1, -0.2, 0.3, 0.0];
        let z = m.encode(&[0.7; 16]).unwrap();
        assert_eq!(z, vec![0.1, -0.2, 0.3, 0.0]);
        assert!(m.encode(&[0.0; 3]).is_err());
    }

    #[test]
    fn zero_model_outputs_are_half() {
        let m = zero_model(small_arch());
        assert_eq!(m.decode(&[0.3; 4]).unwrap(), vec![0.5; 16]);
        assert_eq!(m.discriminate(&[1.0; 4]).unwrap(), 0.5);
    }

    #[test]
    fn half_everywhere_gives_log2_losses() {
        let m = zero_model(small_arch());
        let batch = vec![vec![0.5; 16]; 3];
        let prior = vec![vec![0.2; 4]; 3];
        let ln2 = 2f64.ln();
        assert!((loss_ae(&m, &batch).unwrap() - ln2).abs() < 1e-15);
        assert!((loss_d(&m, &batch, &prior, 0.0).unwrap() - ln2).abs() < 1e-15);
        assert!((loss_q(&m, &batch).unwrap() - ln2).abs() < 1e-15);
        // constant discriminator: penalty vanishes
        assert_eq!(gradient_penalty(&m.discriminator, &prior, &prior).unwrap(), 0.0);
        assert!((loss_d(&m, &batch, &prior, 5.0).unwrap() - ln2).abs() < 1e-15);
    }

    #[test]
    fn composition_matches_layer_by_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = AaeModel::new(small_arch(), &mut rng).unwrap();
        let x: Vec<f64> = (0..16).map(|_| rng.random_range(0.0..1.0)).collect();
        let h = crate::nn::forward(&m.encoder.layers()[0], Activation::LeakyRelu(0.2), &x).unwrap();
        let z = crate::nn::forward(&m.encoder.layers()[1], Activation::Identity, &h).unwrap();
        assert_eq!(m.encode(&x).unwrap(), z);
        let h = crate::nn::forward(&m.decoder.layers()[0], Activation::LeakyRelu(0.2), &z).unwrap();
        let xhat = crate::nn::forward(&m.decoder.layers()[1], Activation::Sigmoid, &h).unwrap();
        assert_eq!(m.decode(&z).unwrap(), xhat);
        assert!(xhat.iter().all(|&v| v > 0.0 && v < 1.0));
        let h = crate::nn::forward(&m.discriminator.layers()[0], Activation::LeakyRelu(0.2), &z).unwrap();
        let p = crate::nn::forward(&m.discriminator.layers()[1], Activation::Sigmoid, &h).unwrap();
        assert_eq!(m.discriminate(&z).unwrap(), p[0]);
    }

    #[test]
    fn loss_d_matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = AaeModel::new(small_arch(), &mut rng).unwrap();
        let prior = PriorSpec::new(4, 1.0).unwrap();
        let batch: Vec<Vec<f64>> = (0..5).map(|_| (0..16).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let real: Vec<Vec<f64>> = (0..5).map(|_| prior.sample(&mut rng)).collect();
        let mut expected = 0.0;
        for (x, zr) in batch.iter().zip(&real) {
            let df = m.discriminate(&m.encode(x).unwrap()).unwrap();
            let dr = m.discriminate(zr).unwrap();
            expected += -dr.ln() - (1.0 - df).ln();
        }
        expected /= 10.0;
        assert!((loss_d(&m, &batch, &real, 0.0).unwrap() - expected).abs() < 1e-12);

        let q: f64 = batch
            .iter()
            .map(|x| -m.discriminate(&m.encode(x).unwrap()).unwrap().ln())
            .sum::<f64>()
            / 5.0;
        assert!((loss_q(&m, &batch).unwrap() - q).abs() < 1e-12);
    }

    #[test]
    fn logit_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = AaeModel::new(small_arch(), &mut rng).unwrap();
        let z: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = logit_input_gradient(&m.discriminator, &z).unwrap();
        let h = 1e-5;
        for k in 0..4 {
            let mut zp = z.clone();
            zp[k] += h;
            let mut zm = z.clone();
            zm[k] -= h;
            let fd = (disc_logit(&m.discriminator, &zp).unwrap() - disc_logit(&m.discriminator, &zm).unwrap()) / (2.0 * h);
            assert!((g[k] - fd).abs() <= 1e-4 * g[k].abs().max(1e-8));
        }
        let r = gradient_penalty(&m.discriminator, &[z.clone()], &[z]).unwrap();
        assert!(r > 0.0);
    }

    #[test]
    fn penalty_needs_simple_critic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let deep = Mlp::glorot(
            &[4, 3, 3, 1],
            vec![Activation::LeakyRelu(0.2), Activation::LeakyRelu(0.2), Activation::Sigmoid],
            &mut rng,
        )
        .unwrap();
        assert!(gradient_penalty(&deep, &[vec![0.0; 4]], &[vec![0.0; 4]]).is_err());
    }

    #[test]
    fn prior_scaled_density() {
        let prior = PriorSpec::new(16, 1.0).unwrap();
        assert_eq!(prior.scaled_density(&[0.0; 16]).unwrap(), 1.0);
        let mut z = vec![0.0; 16];
        z[0] = 1.0;
        z[5] = -1.0;
        assert!((prior.scaled_density(&z).unwrap() - (-1f64).exp()).abs() < 1e-15);
        assert!(PriorSpec::new(2, 0.0).is_err());
    }

    #[test]
    fn stable_window_selection() {
        let flat = vec![EpochLosses { ae: 0.1, d: 0.5, q: 0.5 }; 10];
        assert_eq!(select_stable_window(&flat, 4).unwrap(), 1..=4);
        assert!(matches!(
            select_stable_window(&flat, 11),
            Err(GaitError::HistoryTooShort { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let ok = TrainConfig::default();
        assert!(ok.validate().is_ok());
        assert!(TrainConfig { batch_size: 0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { epochs: 50, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { gamma0: -1.0, ..ok }.validate().is_err());
    }
}
