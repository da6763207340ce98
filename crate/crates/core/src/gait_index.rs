//! Per-frame partial measures and their weighted combination.
//!
//! * `y_ae`: RMSE between a histogram and its reconstruction.
//! * `y_p`: prior density of the latent code divided by the density at the
//!   prior mode, so it lies in `(0, 1]`.
//! * `y_d`: discriminator output on the latent code.
//!
//! The combined index is `w_ae * y_ae + w_p * y_p^u + w_d * y_d` with
//! `w_i = (sum_j s_j) / s_i`, where `s_i` is the training-set mean of
//! measure `i` (after the exponent for `y_p`). A normal posture tends to have
//! a low `y_ae` and high `y_p`, `y_d`; the sum is taken as is and the
//! evaluation module orients the resulting score.

use rayon::prelude::*;

use crate::aae::{AaeModel, PriorSpec};
use crate::error::{GaitError, Result};
use crate::nn::MlpF32;

pub const DEFAULT_EXPONENT: f64 = 1.0 / 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMeasures {
    pub y_ae: f64,
    pub y_p: f64,
    pub y_d: f64,
    pub combined: f64,
}

/// Which measures take part in the combined index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MeasureMask {
    pub ae: bool,
    pub p: bool,
    pub d: bool,
}

impl MeasureMask {
    pub const ALL: MeasureMask = MeasureMask {
        ae: true,
        p: true,
        d: true,
    };
    pub const AE: MeasureMask = MeasureMask {
        ae: true,
        p: false,
        d: false,
    };

    pub fn is_empty(&self) -> bool {
        !(self.ae || self.p || self.d)
    }

    /// Parses a comma-separated list such as `ae,p,d`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut mask = MeasureMask {
            ae: false,
            p: false,
            d: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "ae" => mask.ae = true,
                "p" => mask.p = true,
                "d" => mask.d = true,
                other => {
                    return Err(GaitError::Config(format!(
                        "unknown measure `{other}` (expected ae, p, d)"
                    )))
                }
            }
        }
        if mask.is_empty() {
            return Err(GaitError::Config("measure mask selects nothing".into()));
        }
        Ok(mask)
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.ae {
            parts.push("ae");
        }
        if self.p {
            parts.push("p");
        }
        if self.d {
            parts.push("d");
        }
        parts.join("+")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexConfig {
    /// Exponent `u` applied to `y_p`.
    pub exponent: f64,
    pub mask: MeasureMask,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            exponent: DEFAULT_EXPONENT,
            mask: MeasureMask::ALL,
        }
    }
}

impl IndexConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.exponent > 0.0 && self.exponent <= 1.0) {
            return Err(GaitError::Config(format!(
                "exponent u = {} must be in (0, 1]",
                self.exponent
            )));
        }
        if self.mask.is_empty() {
            return Err(GaitError::Config("measure mask selects nothing".into()));
        }
        Ok(())
    }
}

/// Combination weights and the training statistics they came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightVector {
    pub w_ae: f64,
    pub w_p: f64,
    pub w_d: f64,
    pub s_ae: f64,
    pub s_p: f64,
    pub s_d: f64,
    pub exponent: f64,
}

impl WeightVector {
    /// Weights for a mask from already-averaged statistics.
    pub fn from_stats(
        s_ae: f64,
        s_p: f64,
        s_d: f64,
        exponent: f64,
        mask: MeasureMask,
    ) -> Result<Self> {
        let active = [(mask.ae, s_ae, "y_ae"), (mask.p, s_p, "y_p"), (mask.d, s_d, "y_d")];
        let mut total = 0.0;
        for &(on, s, name) in &active {
            if on {
                if !(s > 0.0) {
                    return Err(GaitError::ZeroMeanMeasure(name));
                }
                total += s;
            }
        }
        let weight = |on: bool, s: f64| if on { total / s } else { 0.0 };
        Ok(Self {
            w_ae: weight(mask.ae, s_ae),
            w_p: weight(mask.p, s_p),
            w_d: weight(mask.d, s_d),
            s_ae,
            s_p,
            s_d,
            exponent,
        })
    }

    pub fn with_mask(&self, mask: MeasureMask) -> Result<Self> {
        Self::from_stats(self.s_ae, self.s_p, self.s_d, self.exponent, mask)
    }
}

/// `|x - xhat|_2 / sqrt(m)`.
pub fn measure_ae(x: &[f64], xhat: &[f64]) -> Result<f64> {
    if x.len() != xhat.len() || x.is_empty() {
        return Err(GaitError::ShapeMismatch {
            expected: x.len(),
            actual: xhat.len(),
        });
    }
    let sq: f64 = x.iter().zip(xhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sq / x.len() as f64).sqrt())
}

pub fn measure_prior(z: &[f64], prior: &PriorSpec) -> Result<f64> {
    prior.scaled_density(z)
}

pub fn measure_disc(model: &AaeModel, z: &[f64]) -> Result<f64> {
    model.discriminate(z)
}

pub fn apply_exponent(y_p: f64, u: f64) -> f64 {
    y_p.powf(u)
}

/// Training-set means of each measure (exponent applied to `y_p`) and the
/// resulting weights. `measures` carry raw `y_p`.
pub fn compute_weights(measures: &[FrameMeasures], config: &IndexConfig) -> Result<WeightVector> {
    config.validate()?;
    if measures.is_empty() {
        return Err(GaitError::EmptyDataset);
    }
    let n = measures.len() as f64;
    let s_ae = measures.iter().map(|m| m.y_ae).sum::<f64>() / n;
    let s_p = measures
        .iter()
        .map(|m| apply_exponent(m.y_p, config.exponent))
        .sum::<f64>()
        / n;
    let s_d = measures.iter().map(|m| m.y_d).sum::<f64>() / n;
    WeightVector::from_stats(s_ae, s_p, s_d, config.exponent, config.mask)
}

pub fn combine(m: &FrameMeasures, w: &WeightVector) -> f64 {
    w.w_ae * m.y_ae + w.w_p * apply_exponent(m.y_p, w.exponent) + w.w_d * m.y_d
}

/// Numeric precision of inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    F64,
    F32,
}

/// Frozen model plus everything needed to score frames.
#[derive(Debug, Clone)]
pub struct Scorer<'a> {
    model: &'a AaeModel,
    prior: PriorSpec,
    weights: Option<WeightVector>,
    reduced: Option<[MlpF32; 3]>,
}

impl<'a> Scorer<'a> {
    pub fn new(model: &'a AaeModel, prior: PriorSpec, precision: Precision) -> Self {
        let reduced = (precision == Precision::F32).then(|| {
            [
                model.encoder.to_f32(),
                model.decoder.to_f32(),
                model.discriminator.to_f32(),
            ]
        });
        Self {
            model,
            prior,
            weights: None,
            reduced,
        }
    }

    pub fn with_weights(mut self, weights: WeightVector) -> Self {
        self.weights = Some(weights);
        self
    }

    /// Measures of one flattened histogram. `combined` is zero when no
    /// weights are set.
    pub fn score(&self, x: &[f64]) -> Result<FrameMeasures> {
        if x.len() != self.model.input_dim() {
            return Err(GaitError::ShapeMismatch {
                expected: self.model.input_dim(),
                actual: x.len(),
            });
        }
        let (z, xhat, y_d) = match &self.reduced {
            None => {
                let z = self.model.encode(x)?;
                let xhat = self.model.decode(&z)?;
                let y_d = measure_disc(self.model, &z)?;
                (z, xhat, y_d)
            }
            Some([enc, dec, disc]) => {
                let x32: Vec<f32> = x.iter().map(|&v| v as f32).collect();
                let z32 = enc.forward(&x32)?;
                let xhat = dec.forward(&z32)?.into_iter().map(f64::from).collect();
                let y_d = f64::from(disc.forward(&z32)?[0]);
                (z32.into_iter().map(f64::from).collect(), xhat, y_d)
            }
        };
        let mut m = FrameMeasures {
            y_ae: measure_ae(x, &xhat)?,
            y_p: measure_prior(&z, &self.prior)?,
            y_d,
            combined: 0.0,
        };
        if let Some(w) = &self.weights {
            m.combined = combine(&m, w);
        }
        Ok(m)
    }

    /// Scores many inputs in parallel; output order follows input order.
    pub fn score_all(&self, inputs: &[Vec<f64>]) -> Result<Vec<FrameMeasures>> {
        inputs.par_iter().map(|x| self.score(x)).collect()
    }
}

/// encode, decode, discriminate, measure and combine for one histogram.
pub fn score_frame(
    model: &AaeModel,
    prior: &PriorSpec,
    weights: &WeightVector,
    hist: &crate::histogram::Histogram,
) -> Result<FrameMeasures> {
    Scorer::new(model, *prior, Precision::F64)
        .with_weights(*weights)
        .score(&hist.flatten())
}

/// Weights from the measures of a model on its own training inputs.
pub fn weights_from_training(
    model: &AaeModel,
    prior: &PriorSpec,
    training: &[Vec<f64>],
    config: &IndexConfig,
) -> Result<WeightVector> {
    let measures = Scorer::new(model, *prior, Precision::F64).score_all(training)?;
    compute_weights(&measures, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(y_ae: f64, y_p: f64, y_d: f64) -> FrameMeasures {
        FrameMeasures {
            y_ae,
            y_p,
            y_d,
            combined: 0.0,
        }
    }

    #[test]
    fn rmse_reference_values() {
        assert_eq!(measure_ae(&[0.3; 256], &[0.3; 256]).unwrap(), 0.0);
        assert_eq!(measure_ae(&[1.0; 256], &[0.0; 256]).unwrap(), 1.0);
        let x = [0.1, 0.5, 0.9];
        let y = [0.2, 0.1, 0.9];
        let expected = ((0.01 + 0.16 + 0.0) / 3.0f64).sqrt();
        assert!((measure_ae(&x, &y).unwrap() - expected).abs() < 1e-15);
        assert!(measure_ae(&x, &y[..2]).is_err());
    }

    #[test]
    fn equal_stats_give_equal_weights() {
        let w = WeightVector::from_stats(0.1, 0.1, 0.1, 1.0, MeasureMask::ALL).unwrap();
        for v in [w.w_ae, w.w_p, w.w_d] {
            assert!((v - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn worked_weight_example() {
        let w = WeightVector::from_stats(0.2, 0.5, 0.3, 1.0, MeasureMask::ALL).unwrap();
        assert_eq!(w.w_ae, 5.0);
        assert_eq!(w.w_p, 2.0);
        assert_eq!(w.w_d, 1.0 / 0.3);
        assert!((w.w_d - 10.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_measure_mask() {
        let w = WeightVector::from_stats(0.2, 0.5, 0.3, 1.0, MeasureMask::AE).unwrap();
        assert_eq!((w.w_ae, w.w_p, w.w_d), (1.0, 0.0, 0.0));
        // masked-out zeros are fine, masked-in zeros are not
        assert!(WeightVector::from_stats(0.2, 0.0, 0.0, 1.0, MeasureMask::AE).is_ok());
        assert!(matches!(
            WeightVector::from_stats(0.0, 0.5, 0.3, 1.0, MeasureMask::ALL),
            Err(GaitError::ZeroMeanMeasure("y_ae"))
        ));
    }

    #[test]
    fn compute_weights_applies_exponent_before_averaging() {
        let cfg = IndexConfig {
            exponent: 0.5,
            mask: MeasureMask::ALL,
        };
        let ms = [fm(0.1, 0.25, 0.4), fm(0.3, 0.81, 0.6)];
        let w = compute_weights(&ms, &cfg).unwrap();
        assert!((w.s_ae - 0.2).abs() < 1e-15);
        assert!((w.s_p - 0.7).abs() < 1e-15);
        assert!((w.s_d - 0.5).abs() < 1e-15);
        assert!(compute_weights(&[], &cfg).is_err());
    }

    #[test]
    fn exponent_edges() {
        assert_eq!(apply_exponent(1.0, 0.125), 1.0);
        assert_eq!(apply_exponent(0.0, 0.125), 0.0);
        assert!(apply_exponent(0.3, 0.125) > 0.3);
    }

    #[test]
    fn combine_reference_values() {
        let m = fm(0.4, 0.6, 0.7);
        let ae_only = WeightVector::from_stats(0.2, 0.5, 0.3, 1.0, MeasureMask::AE).unwrap();
        assert_eq!(combine(&m, &ae_only), 0.4);
        let zero = WeightVector {
            w_ae: 0.0,
            w_p: 0.0,
            w_d: 0.0,
            s_ae: 0.0,
            s_p: 0.0,
            s_d: 0.0,
            exponent: 0.125,
        };
        assert_eq!(combine(&m, &zero), 0.0);
        let w = WeightVector::from_stats(0.2, 0.5, 0.3, 0.125, MeasureMask::ALL).unwrap();
        let expected = 5.0 * 0.4 + 2.0 * 0.6f64.powf(0.125) + (1.0 / 0.3) * 0.7;
        assert!((combine(&m, &w) - expected).abs() < 1e-12);
    }

    #[test]
    fn mask_parsing() {
        assert_eq!(MeasureMask::parse("ae,p,d").unwrap(), MeasureMask::ALL);
        assert_eq!(MeasureMask::parse(" ae ").unwrap(), MeasureMask::AE);
        assert!(MeasureMask::parse("").is_err());
        assert!(MeasureMask::parse("ae,x").is_err());
        assert_eq!(MeasureMask::ALL.label(), "ae+p+d");
    }
}
