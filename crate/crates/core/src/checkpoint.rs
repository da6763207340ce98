//! Binary training snapshots.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "GAAE1"  version:u8  config_digest:[u8; 32]  epoch:u32
//! prior_sigma2:f64
//! 3 x network (encoder, decoder, discriminator):
//!     layers:u32, then per layer
//!         in:u32 out:u32 activation:u8 slope:f64
//!         weights (row-major, out x in) f64, biases f64
//! 3 x optimizer (autoencoder Adam, generator Adam, discriminator SGD):
//!     kind:u8 step:u64 lr:f64
//!     Adam only: beta1 beta2 eps, moment count:u32,
//!         per tensor len:u32 then m values, then the same for v
//! history count:u32, then (L_AE, L_D, L_Q) f64 triples
//! weights flag:u8, then w_ae w_p w_d s_ae s_p s_d exponent f64 when set
//! ```

use std::path::Path;

use crate::aae::{AaeModel, EpochLosses, PriorSpec, TrainConfig, Trainer};
use crate::error::{GaitError, Result};
use crate::gait_index::WeightVector;
use crate::nn::{Activation, Adam, DenseLayer, Mlp, OptimizerKind, OptimizerState, Sgd};

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"GAAE1";
pub const CHECKPOINT_VERSION: u8 = 1;

/// Immutable snapshot of a training run after `epoch` epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_digest: [u8; 32],
    pub epoch: usize,
    pub prior: PriorSpec,
    pub model: AaeModel,
    pub ae_opt: OptimizerState,
    pub gen_opt: OptimizerState,
    pub disc_opt: OptimizerState,
    pub history: Vec<EpochLosses>,
    /// Gait-index weights computed from the training data.
    pub weights: Option<WeightVector>,
}

impl Checkpoint {
    pub fn from_trainer(trainer: &Trainer, config_digest: [u8; 32], weights: Option<WeightVector>) -> Self {
        Self {
            config_digest,
            epoch: trainer.epoch(),
            prior: trainer.config.prior(),
            model: trainer.model.clone(),
            ae_opt: trainer.ae_opt.clone(),
            gen_opt: trainer.gen_opt.clone(),
            disc_opt: trainer.disc_opt.clone(),
            history: trainer.history.clone(),
            weights,
        }
    }

    /// Rebuilds a trainer that continues exactly where this snapshot ended.
    pub fn into_trainer(self, config: TrainConfig) -> Result<Trainer> {
        config.validate()?;
        if self.history.len() != self.epoch {
            return Err(GaitError::InvalidParams(format!(
                "checkpoint at epoch {} carries {} history rows",
                self.epoch,
                self.history.len()
            )));
        }
        let mut trainer = Trainer::with_model(self.model, config);
        trainer.ae_opt = self.ae_opt;
        trainer.gen_opt = self.gen_opt;
        trainer.disc_opt = self.disc_opt;
        trainer.history = self.history;
        Ok(trainer)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.bytes(CHECKPOINT_MAGIC);
        w.u8(CHECKPOINT_VERSION);
        w.bytes(&self.config_digest);
        w.u32(self.epoch as u32);
        w.f64(self.prior.sigma2);
        for net in [&self.model.encoder, &self.model.decoder, &self.model.discriminator] {
            w.network(net);
        }
        for opt in [&self.ae_opt, &self.gen_opt, &self.disc_opt] {
            w.optimizer(opt);
        }
        w.u32(self.history.len() as u32);
        for l in &self.history {
            w.f64s(&[l.ae, l.d, l.q]);
        }
        match &self.weights {
            None => w.u8(0),
            Some(v) => {
                w.u8(1);
                w.f64s(&[v.w_ae, v.w_p, v.w_d, v.s_ae, v.s_p, v.s_d, v.exponent]);
            }
        }
        w.0
    }

    /// `source` names the origin of `bytes` in error messages.
    pub fn from_bytes(bytes: &[u8], source: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, source };
        if r.take(CHECKPOINT_MAGIC.len())? != CHECKPOINT_MAGIC {
            return Err(GaitError::VersionMismatch(format!(
                "{} is not a checkpoint",
                source.display()
            )));
        }
        let version = r.u8()?;
        if version != CHECKPOINT_VERSION {
            return Err(GaitError::VersionMismatch(format!(
                "{}: checkpoint version {version}, expected {CHECKPOINT_VERSION}",
                source.display()
            )));
        }
        let mut config_digest = [0u8; 32];
        config_digest.copy_from_slice(r.take(32)?);
        let epoch = r.u32()? as usize;
        let sigma2 = r.f64()?;
        let encoder = r.network()?;
        let decoder = r.network()?;
        let discriminator = r.network()?;
        let model = AaeModel::from_networks(encoder, decoder, discriminator)?;
        let prior = PriorSpec::new(model.latent_dim(), sigma2)?;
        let ae_opt = r.optimizer()?;
        let gen_opt = r.optimizer()?;
        let disc_opt = r.optimizer()?;
        let n_hist = r.u32()? as usize;
        let mut history = Vec::with_capacity(n_hist.min(1 << 20));
        for _ in 0..n_hist {
            history.push(EpochLosses {
                ae: r.f64()?,
                d: r.f64()?,
                q: r.f64()?,
            });
        }
        let weights = match r.u8()? {
            0 => None,
            1 => {
                let v = r.f64_vec(7)?;
                Some(WeightVector {
                    w_ae: v[0],
                    w_p: v[1],
                    w_d: v[2],
                    s_ae: v[3],
                    s_p: v[4],
                    s_d: v[5],
                    exponent: v[6],
                })
            }
            flag => return Err(r.error(format!("bad weights flag {flag}"))),
        };
        if r.pos != bytes.len() {
            return Err(r.error(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self {
            config_digest,
            epoch,
            prior,
            model,
            ae_opt,
            gen_opt,
            disc_opt,
            history,
            weights,
        })
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    std::fs::write(path, checkpoint.to_bytes()).map_err(|e| GaitError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| GaitError::io(path, e))?;
    Checkpoint::from_bytes(&bytes, path)
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }

    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }

    fn f64s(&mut self, vs: &[f64]) {
        for &v in vs {
            self.f64(v);
        }
    }

    fn network(&mut self, net: &Mlp) {
        self.u32(net.layers().len() as u32);
        for (layer, act) in net.layers().iter().zip(net.activations()) {
            self.u32(layer.in_units() as u32);
            self.u32(layer.out_units() as u32);
            let (tag, slope) = match *act {
                Activation::Identity => (0, 0.0),
                Activation::Sigmoid => (1, 0.0),
                Activation::LeakyRelu(s) => (2, s),
            };
            self.u8(tag);
            self.f64(slope);
            self.f64s(&layer.weights);
            self.f64s(&layer.biases);
        }
    }

    fn tensors(&mut self, ts: &[Vec<f64>]) {
        self.u32(ts.len() as u32);
        for t in ts {
            self.u32(t.len() as u32);
            self.f64s(t);
        }
    }

    fn optimizer(&mut self, opt: &OptimizerState) {
        match &opt.kind {
            OptimizerKind::Sgd(s) => {
                self.u8(0);
                self.u64(opt.step);
                self.f64(s.lr);
            }
            OptimizerKind::Adam(a) => {
                self.u8(1);
                self.u64(opt.step);
                self.f64s(&[a.lr, a.beta1, a.beta2, a.eps]);
                let (m, v) = a.moments();
                self.tensors(m);
                self.tensors(v);
            }
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    source: &'a Path,
}

impl<'a> Reader<'a> {
    fn error(&self, msg: String) -> GaitError {
        GaitError::parse(self.source, format!("checkpoint offset {}: {msg}", self.pos))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.error(format!("truncated, wanted {n} more bytes")));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        // bounds check before allocating
        let raw = self.take(n.checked_mul(8).ok_or_else(|| self.error("length overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn network(&mut self) -> Result<Mlp> {
        let n = self.u32()? as usize;
        let mut layers = Vec::new();
        let mut acts = Vec::new();
        for _ in 0..n {
            let inp = self.u32()? as usize;
            let out = self.u32()? as usize;
            let tag = self.u8()?;
            let slope = self.f64()?;
            acts.push(match tag {
                0 => Activation::Identity,
                1 => Activation::Sigmoid,
                2 => Activation::LeakyRelu(slope),
                t => return Err(self.error(format!("unknown activation tag {t}"))),
            });
            let weights = self.f64_vec(inp.saturating_mul(out))?;
            let biases = self.f64_vec(out)?;
            layers.push(DenseLayer::from_parts(inp, out, weights, biases)?);
        }
        Mlp::new(layers, acts)
    }

    fn tensors(&mut self) -> Result<Vec<Vec<f64>>> {
        let n = self.u32()? as usize;
        let mut out = Vec::new();
        for _ in 0..n {
            let len = self.u32()? as usize;
            out.push(self.f64_vec(len)?);
        }
        Ok(out)
    }

    fn optimizer(&mut self) -> Result<OptimizerState> {
        let tag = self.u8()?;
        let step = self.u64()?;
        let lr = self.f64()?;
        let kind = match tag {
            0 => OptimizerKind::Sgd(Sgd { lr }),
            1 => {
                let mut adam = Adam::new(lr);
                adam.beta1 = self.f64()?;
                adam.beta2 = self.f64()?;
                adam.eps = self.f64()?;
                let m = self.tensors()?;
                let v = self.tensors()?;
                adam.set_moments(m, v);
                OptimizerKind::Adam(adam)
            }
            t => return Err(self.error(format!("unknown optimizer tag {t}"))),
        };
        Ok(OptimizerState { kind, step })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aae::Architecture;

    fn tiny_trainer() -> Trainer {
        let config = TrainConfig {
            architecture: Architecture {
                input_dim: 8,
                hidden: 6,
                latent: 3,
                leaky_slope: 0.2,
            },
            epochs: 3,
            batch_size: 4,
            stable_window: 1,
            seed: 9,
            ..TrainConfig::default()
        };
        Trainer::new(config).unwrap()
    }

    fn data() -> Vec<Vec<f64>> {
        (0..10)
            .map(|i| (0..8).map(|j| ((i * 8 + j) % 7) as f64 / 7.0).collect())
            .collect()
    }

    #[test]
    fn round_trip_preserves_everything() {
        let mut t = tiny_trainer();
        t.train_epoch(&data()).unwrap();
        let w = WeightVector::from_stats(0.2, 0.5, 0.3, 0.125, crate::gait_index::MeasureMask::ALL).unwrap();
        let ck = Checkpoint::from_trainer(&t, [7; 32], Some(w));
        let bytes = ck.to_bytes();
        assert_eq!(&bytes[..5], b"GAAE1");
        assert_eq!(bytes[5], 1);
        let back = Checkpoint::from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn resumed_training_matches_uninterrupted() {
        let d = data();
        let mut straight = tiny_trainer();
        for _ in 0..3 {
            straight.train_epoch(&d).unwrap();
        }
        let mut first = tiny_trainer();
        first.train_epoch(&d).unwrap();
        let bytes = Checkpoint::from_trainer(&first, [0; 32], None).to_bytes();
        let mut resumed = Checkpoint::from_bytes(&bytes, Path::new("mem"))
            .unwrap()
            .into_trainer(first.config.clone())
            .unwrap();
        for _ in 0..2 {
            resumed.train_epoch(&d).unwrap();
        }
        assert_eq!(resumed.model, straight.model);
        assert_eq!(resumed.history, straight.history);
    }

    #[test]
    fn rejects_bad_headers_and_truncation() {
        let ck = Checkpoint::from_trainer(&tiny_trainer(), [0; 32], None);
        let mut bytes = ck.to_bytes();
        let p = Path::new("mem");
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 3], p),
            Err(GaitError::Parse { .. })
        ));
        bytes[5] = 2;
        assert!(matches!(Checkpoint::from_bytes(&bytes, p), Err(GaitError::VersionMismatch(_))));
        bytes[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bytes, p), Err(GaitError::VersionMismatch(_))));
    }
}
