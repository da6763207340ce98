//! Flat `key = value` run configuration shared by every pipeline stage.
//!
//! Files use TOML syntax restricted to top-level keys. Command-line
//! overrides are `key=value` strings applied on top of the file. The digest
//! is a SHA-256 over every setting except output locations and the worker
//! count, so reruns in another directory carry the same digest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aae::{Architecture, TrainConfig};
use crate::error::{GaitError, Result};
use crate::evaluation::SegmentMode;
use crate::gait_index::{IndexConfig, MeasureMask, Precision};
use crate::synth::BenchmarkConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Point clouds and the sequence manifest.
    pub data_dir: PathBuf,
    /// Extracted histograms.
    pub hist_dir: PathBuf,
    /// Checkpoints, logs, scores and reports.
    pub out_dir: PathBuf,
    /// Worker threads for extraction and scoring; 0 picks automatically.
    pub workers: usize,

    pub train_subjects: usize,
    pub validation_subjects: usize,
    pub test_subjects: usize,
    pub normal_repeats: usize,
    pub frames_per_sequence: usize,
    pub cycle_min: usize,
    pub cycle_max: usize,
    pub points_min: usize,
    pub points_max: usize,
    pub noise_sigma: f64,

    pub hist_rows: usize,
    pub hist_sectors: usize,

    pub hidden: usize,
    pub latent: usize,
    pub leaky_slope: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub gamma0: f64,
    pub gamma_decay: f64,
    pub lr_ae: f64,
    pub lr_gen: f64,
    pub lr_disc: f64,
    pub prior_sigma2: f64,
    pub stable_window: usize,
    pub save_interval: usize,

    pub exponent: f64,
    /// Measures combined into the index written by `score`.
    pub measures: String,
    /// `f64` or `f32` arithmetic when scoring.
    pub precision: String,
    /// `stable` scores the checkpoints inside the stable window, `all`
    /// every saved checkpoint.
    pub score_epochs: String,

    pub deltas: Vec<usize>,
    pub segment_modes: Vec<String>,
    /// Measure combinations reported by `eval`.
    pub channels: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let bench = BenchmarkConfig::default();
        let train = TrainConfig::default();
        let arch = train.architecture;
        Self {
            seed: bench.seed,
            data_dir: "data".into(),
            hist_dir: "hist".into(),
            out_dir: "out".into(),
            workers: 0,
            train_subjects: bench.train_subjects,
            validation_subjects: bench.validation_subjects,
            test_subjects: bench.test_subjects,
            normal_repeats: bench.normal_repeats,
            frames_per_sequence: bench.frames_per_sequence,
            cycle_min: *bench.cycle_length.start(),
            cycle_max: *bench.cycle_length.end(),
            points_min: *bench.points_per_frame.start(),
            points_max: *bench.points_per_frame.end(),
            noise_sigma: bench.noise_sigma,
            hist_rows: crate::histogram::DEFAULT_ROWS,
            hist_sectors: crate::histogram::DEFAULT_SECTORS,
            hidden: arch.hidden,
            latent: arch.latent,
            leaky_slope: arch.leaky_slope,
            epochs: train.epochs,
            batch_size: train.batch_size,
            gamma0: train.gamma0,
            gamma_decay: train.gamma_decay,
            lr_ae: train.lr_ae,
            lr_gen: train.lr_gen,
            lr_disc: train.lr_disc,
            prior_sigma2: train.prior_sigma2,
            stable_window: train.stable_window,
            save_interval: 10,
            exponent: crate::gait_index::DEFAULT_EXPONENT,
            measures: "ae,p,d".into(),
            precision: "f64".into(),
            score_epochs: "stable".into(),
            deltas: vec![1, 10, 21, 60],
            segment_modes: vec!["non_overlapping".into(), "sliding".into()],
            channels: ["ae", "p", "d", "ae,p", "ae,d", "p,d", "ae,p,d"]
                .map(String::from)
                .to_vec(),
        }
    }
}

/// Which checkpoints `score` and `eval` use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpochSelection {
    Stable,
    All,
}

impl RunConfig {
    /// Reads a config file; missing keys keep their defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GaitError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            GaitError::Config(msg) => GaitError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| GaitError::Config(e.to_string()))?;
        Self::from_table(table)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        if let Some((key, _)) = table.iter().find(|(_, v)| v.is_table()) {
            return Err(GaitError::Config(format!("`{key}`: nested tables are not supported")));
        }
        table
            .try_into()
            .map_err(|e: toml::de::Error| GaitError::Config(e.to_string()))
    }

    /// Applies `key=value` overrides. Values are read as TOML literals and
    /// fall back to plain strings; a bare comma-separated list of integers
    /// becomes an array.
    pub fn with_overrides<S: AsRef<str>>(self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self);
        }
        let mut table = toml::Table::try_from(&self).map_err(|e| GaitError::Config(e.to_string()))?;
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| GaitError::Config(format!("override `{item}` is not key=value")))?;
            let key = key.trim();
            let raw = raw.trim();
            let value = match table.get(key) {
                None => return Err(GaitError::Config(format!("unknown key `{key}`"))),
                Some(toml::Value::Array(_)) if !raw.starts_with('[') => parse_list(raw),
                Some(toml::Value::String(_)) => toml::Value::String(raw.to_string()),
                Some(toml::Value::Float(_)) => match parse_literal(raw) {
                    toml::Value::Integer(i) => toml::Value::Float(i as f64),
                    other => other,
                },
                Some(_) => parse_literal(raw),
            };
            table.insert(key.to_string(), value);
        }
        Self::from_table(table)
    }

    pub fn validate(&self) -> Result<()> {
        self.benchmark().validate()?;
        self.train_config().validate()?;
        self.index_config()?.validate()?;
        self.precision()?;
        self.epoch_selection()?;
        self.segment_modes()?;
        self.channels()?;
        let bad = |msg: String| Err(GaitError::Config(msg));
        if self.hist_rows == 0 || self.hist_sectors == 0 {
            return bad("histogram dimensions must be positive".into());
        }
        if self.hist_rows > u16::MAX as usize || self.hist_sectors > u16::MAX as usize {
            return bad("histogram dimensions must fit in 16 bits".into());
        }
        if self.save_interval == 0 {
            return bad("save_interval must be positive".into());
        }
        if self.deltas.is_empty() || self.deltas.contains(&0) {
            return bad(format!("deltas {:?} must be non-empty and positive", self.deltas));
        }
        Ok(())
    }

    pub fn benchmark(&self) -> BenchmarkConfig {
        BenchmarkConfig {
            train_subjects: self.train_subjects,
            validation_subjects: self.validation_subjects,
            test_subjects: self.test_subjects,
            normal_repeats: self.normal_repeats,
            frames_per_sequence: self.frames_per_sequence,
            cycle_length: self.cycle_min..=self.cycle_max,
            points_per_frame: self.points_min..=self.points_max,
            noise_sigma: self.noise_sigma,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            architecture: Architecture {
                input_dim: self.hist_rows * self.hist_sectors,
                hidden: self.hidden,
                latent: self.latent,
                leaky_slope: self.leaky_slope,
            },
            epochs: self.epochs,
            batch_size: self.batch_size,
            gamma0: self.gamma0,
            gamma_decay: self.gamma_decay,
            lr_ae: self.lr_ae,
            lr_gen: self.lr_gen,
            lr_disc: self.lr_disc,
            prior_sigma2: self.prior_sigma2,
            seed: self.seed,
            stable_window: self.stable_window,
        }
    }

    pub fn index_config(&self) -> Result<IndexConfig> {
        Ok(IndexConfig {
            exponent: self.exponent,
            mask: MeasureMask::parse(&self.measures)?,
        })
    }

    pub fn precision(&self) -> Result<Precision> {
        match self.precision.as_str() {
            "f64" => Ok(Precision::F64),
            "f32" => Ok(Precision::F32),
            other => Err(GaitError::Config(format!("precision `{other}` (expected f64 or f32)"))),
        }
    }

    pub fn epoch_selection(&self) -> Result<EpochSelection> {
        match self.score_epochs.as_str() {
            "stable" => Ok(EpochSelection::Stable),
            "all" => Ok(EpochSelection::All),
            other => Err(GaitError::Config(format!(
                "score_epochs `{other}` (expected stable or all)"
            ))),
        }
    }

    pub fn segment_modes(&self) -> Result<Vec<SegmentMode>> {
        if self.segment_modes.is_empty() {
            return Err(GaitError::Config("segment_modes is empty".into()));
        }
        self.segment_modes
            .iter()
            .map(|m| match m.as_str() {
                "non_overlapping" => Ok(SegmentMode::NonOverlapping),
                "sliding" => Ok(SegmentMode::Sliding),
                other => Err(GaitError::Config(format!(
                    "segment mode `{other}` (expected non_overlapping or sliding)"
                ))),
            })
            .collect()
    }

    pub fn channels(&self) -> Result<Vec<MeasureMask>> {
        if self.channels.is_empty() {
            return Err(GaitError::Config("channels is empty".into()));
        }
        self.channels.iter().map(|c| MeasureMask::parse(c)).collect()
    }

    /// The config as a TOML file.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    /// The config with locations and worker count cleared.
    pub fn canonical(&self) -> Self {
        Self {
            data_dir: PathBuf::new(),
            hist_dir: PathBuf::new(),
            out_dir: PathBuf::new(),
            workers: 0,
            ..self.clone()
        }
    }

    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.canonical().to_toml().as_bytes()).into()
    }

    pub fn digest_hex(&self) -> String {
        hex(&self.digest())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_literal(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn parse_list(raw: &str) -> toml::Value {
    let items = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s.parse::<i64>() {
            Ok(i) => toml::Value::Integer(i),
            Err(_) => toml::Value::String(s.to_string()),
        })
        .collect();
    toml::Value::Array(items)
}
