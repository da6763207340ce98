//! Abnormal-gait scoring from depth point clouds.
//!
//! Frames are reduced to cylindrical occupancy histograms
//! ([`histogram`]), an adversarial autoencoder is trained on normal walking
//! only ([`aae`]), and each frame is scored by how well the model explains
//! it ([`gait_index`]). [`evaluation`] turns scores into ROC, AUC and EER
//! at frame, segment and sequence level. [`synth`] generates labeled
//! walking sequences and [`pipeline`] runs the file-based stages behind the
//! `gaitidx` binary.

pub mod aae;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod gait_index;
pub mod histogram;
pub mod nn;
pub mod pipeline;
pub mod synth;

pub use aae::{AaeModel, Architecture, TrainConfig, Trainer};
pub use config::RunConfig;
pub use error::{GaitError, Result};
pub use evaluation::{Label, Level, ScoredSet, SegmentMode};
pub use gait_index::{MeasureMask, Scorer, WeightVector};
pub use histogram::{extract, Histogram, Point3, PointCloud};
