//! The five stages behind the `gaitidx` command: `synth`, `extract`,
//! `train`, `score` and `eval`.
//!
//! On-disk layout:
//!
//! ```text
//! <data_dir>/manifest.csv                  sequence_id,label,mode,seed
//! <data_dir>/splits.csv                    sequence_id,split,subject,frames
//! <data_dir>/clouds/<seq>/frame_NNNNN.txt  one frame, "x y z" per line
//! <data_dir>/clouds/<seq>/sequence.txt     frame files in temporal order
//! <hist_dir>/<seq>/frame_NNNNN.ghist       binary histogram per frame
//! <hist_dir>/<seq>/sequence.txt            histograms that were extracted
//! <hist_dir>/rejected.csv                  frames that could not be binned
//! <out_dir>/train_log.csv                  epoch,L_AE,L_D,L_Q
//! <out_dir>/stable_window.csv              first_epoch,last_epoch
//! <out_dir>/checkpoints/epoch_NNNN.gaae
//! <out_dir>/scores/epoch_NNNN/<seq>.csv    frame_index,y_ae,y_p,y_d,combined
//! <out_dir>/scores/epoch_NNNN/weights.csv
//! <out_dir>/report/{summary,per_model,roc}.csv, config.toml
//! ```
//!
//! Text outputs start with a `# digest: <hex>` line naming the config that
//! produced them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::aae::{select_stable_window, Trainer};
use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::config::{EpochSelection, RunConfig};
use crate::error::{GaitError, Result};
use crate::evaluation::{evaluate_epoch_range, CheckpointScores, EvalReport, Label, Level, ScoredSequence, SegmentMode};
use crate::gait_index::{combine, weights_from_training, FrameMeasures, MeasureMask, Scorer, WeightVector};
use crate::histogram::{
    extract, point_cloud_text, read_histogram, read_point_cloud, read_sequence_manifest, write_histogram,
    Histogram,
};
use crate::synth::{benchmark, Split};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Process exit status for a failed stage.
pub fn exit_code(err: &GaitError) -> i32 {
    match err {
        GaitError::Config(_) | GaitError::InvalidParams(_) => EXIT_USAGE,
        GaitError::Numeric(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

/// Coordinates in synthesized frames are rounded to 10 micrometers.
const CLOUD_DECIMALS: usize = 5;

/// One row of the sequence manifest joined with its split.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceEntry {
    pub id: String,
    pub label: Label,
    pub mode: String,
    pub seed: u64,
    pub split: Split,
    pub subject: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSummary {
    pub sequences: usize,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub sequence: String,
    pub frame: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractSummary {
    pub frames: usize,
    pub histograms: usize,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    /// Epochs trained by this call, excluding any resumed prefix.
    pub epochs_run: usize,
    pub training_frames: usize,
    pub stable_window: RangeInclusive<usize>,
    pub checkpoints: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSummary {
    pub epochs: Vec<usize>,
    pub files: usize,
}

/// Reports for one measure combination.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelReport {
    pub channel: MeasureMask,
    pub levels: Vec<EvalReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub epochs: Vec<usize>,
    pub channels: Vec<ChannelReport>,
}

fn digest_line(cfg: &RunConfig) -> String {
    format!("# digest: {}\n", cfg.digest_hex())
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| GaitError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| GaitError::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| GaitError::io(path, e))
}

/// Data rows of a CSV file: comments and the header are dropped.
fn csv_rows(path: &Path, header: &str) -> Result<Vec<Vec<String>>> {
    let text = read_text(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some(h) if h.trim() == header => {}
        other => {
            return Err(GaitError::parse(
                path,
                format!("expected header `{header}`, found {:?}", other.unwrap_or("")),
            ))
        }
    }
    let width = header.split(',').count();
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<String> = line.split(',').map(|f| f.trim().to_string()).collect();
            if fields.len() != width {
                return Err(GaitError::parse(
                    path,
                    format!("row {}: expected {width} fields", i + 1),
                ));
            }
            Ok(fields)
        })
        .collect()
}

fn parse_field<T: std::str::FromStr>(path: &Path, field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| GaitError::parse(path, format!("bad {what} `{field}`")))
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| GaitError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn frame_file(index: usize, ext: &str) -> String {
    format!("frame_{index:05}.{ext}")
}

fn frame_index_of(path: &Path) -> Result<usize> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.strip_prefix("frame_"))
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| GaitError::parse(path, "file name is not frame_<index>"))
}

fn list_file(cfg: &RunConfig, names: &[String]) -> String {
    let mut out = digest_line(cfg);
    for n in names {
        out.push_str(n);
        out.push('\n');
    }
    out
}

pub fn manifest_path(cfg: &RunConfig) -> PathBuf {
    cfg.data_dir.join("manifest.csv")
}

fn splits_path(cfg: &RunConfig) -> PathBuf {
    cfg.data_dir.join("splits.csv")
}

fn checkpoint_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("checkpoints")
}

pub fn checkpoint_path(cfg: &RunConfig, epoch: usize) -> PathBuf {
    checkpoint_dir(cfg).join(format!("epoch_{epoch:04}.gaae"))
}

pub fn score_dir(cfg: &RunConfig, epoch: usize) -> PathBuf {
    cfg.out_dir.join("scores").join(format!("epoch_{epoch:04}"))
}

pub fn report_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("report")
}

/// Reads the sequence manifest and split assignment written by `synth`.
pub fn read_entries(cfg: &RunConfig) -> Result<Vec<SequenceEntry>> {
    let mpath = manifest_path(cfg);
    let spath = splits_path(cfg);
    let mut splits = BTreeMap::new();
    for row in csv_rows(&spath, "sequence_id,split,subject,frames")? {
        let split = Split::parse(&row[1]).map_err(|_| GaitError::parse(&spath, format!("bad split `{}`", row[1])))?;
        let subject: usize = parse_field(&spath, &row[2], "subject")?;
        splits.insert(row[0].clone(), (split, subject));
    }
    let mut entries = Vec::new();
    for row in csv_rows(&mpath, "sequence_id,label,mode,seed")? {
        let label = Label::parse(&row[1]).map_err(|_| GaitError::parse(&mpath, format!("bad label `{}`", row[1])))?;
        let (split, subject) = *splits
            .get(&row[0])
            .ok_or_else(|| GaitError::parse(&spath, format!("no split for `{}`", row[0])))?;
        entries.push(SequenceEntry {
            id: row[0].clone(),
            label,
            mode: row[2].clone(),
            seed: parse_field(&mpath, &row[3], "seed")?,
            split,
            subject,
        });
    }
    if entries.is_empty() {
        return Err(GaitError::EmptyDataset);
    }
    Ok(entries)
}

/// Generates the synthetic benchmark as point-cloud files.
pub fn cmd_synth(cfg: &RunConfig) -> Result<SynthSummary> {
    cfg.validate()?;
    let bench = benchmark(&cfg.benchmark())?;
    let header = digest_line(cfg);
    let clouds = cfg.data_dir.join("clouds");
    let frames = with_pool(cfg.workers, || {
        bench
            .sequences
            .par_iter()
            .map(|spec| -> Result<usize> {
                let seq = spec.generate()?;
                let dir = clouds.join(&spec.id);
                fs::create_dir_all(&dir).map_err(|e| GaitError::io(&dir, e))?;
                let mut names = Vec::with_capacity(seq.clouds.len());
                for cloud in &seq.clouds {
                    let name = frame_file(cloud.frame_index, "txt");
                    let mut text = header.clone();
                    text.push_str(&point_cloud_text(cloud, Some(CLOUD_DECIMALS)));
                    write_file(&dir.join(&name), text)?;
                    names.push(name);
                }
                write_file(&dir.join("sequence.txt"), list_file(cfg, &names))?;
                Ok(names.len())
            })
            .collect::<Result<Vec<_>>>()
    })??;
    write_file(&manifest_path(cfg), format!("{header}{}", bench.manifest_csv()))?;
    write_file(&splits_path(cfg), format!("{header}{}", bench.splits_csv()))?;
    Ok(SynthSummary {
        sequences: bench.sequences.len(),
        frames: frames.iter().sum(),
    })
}

/// Bins every listed frame. Frames whose cloud is degenerate are recorded
/// in `rejected.csv` and skipped; other failures abort.
pub fn cmd_extract(cfg: &RunConfig) -> Result<ExtractSummary> {
    cfg.validate()?;
    let entries = read_entries(cfg)?;
    let header = digest_line(cfg);
    let mut summary = ExtractSummary {
        frames: 0,
        histograms: 0,
        rejected: Vec::new(),
    };
    for entry in &entries {
        let list = cfg.data_dir.join("clouds").join(&entry.id).join("sequence.txt");
        let paths = read_sequence_manifest(&list)?;
        let results = with_pool(cfg.workers, || {
            paths
                .par_iter()
                .enumerate()
                .map(|(index, path)| -> Result<(usize, std::result::Result<Histogram, String>)> {
                    let cloud = read_point_cloud(path, index)?;
                    match extract(&cloud, cfg.hist_rows, cfg.hist_sectors) {
                        Ok(h) => Ok((index, Ok(h))),
                        Err(e @ (GaitError::DegenerateCloud(_) | GaitError::EmptyHistogram)) => {
                            Ok((index, Err(e.to_string())))
                        }
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<Vec<_>>>()
        })??;
        let dir = cfg.hist_dir.join(&entry.id);
        fs::create_dir_all(&dir).map_err(|e| GaitError::io(&dir, e))?;
        let mut names = Vec::new();
        for (index, result) in results {
            summary.frames += 1;
            match result {
                Ok(h) => {
                    let name = frame_file(index, "ghist");
                    write_histogram(&dir.join(&name), &h)?;
                    names.push(name);
                }
                Err(reason) => summary.rejected.push(Rejection {
                    sequence: entry.id.clone(),
                    frame: index,
                    reason,
                }),
            }
        }
        summary.histograms += names.len();
        write_file(&dir.join("sequence.txt"), list_file(cfg, &names))?;
    }
    let mut rejected = format!("{header}sequence_id,frame_index,reason\n");
    for r in &summary.rejected {
        let _ = writeln!(rejected, "{},{},{}", r.sequence, r.frame, r.reason.replace(',', ";"));
    }
    write_file(&cfg.hist_dir.join("rejected.csv"), rejected)?;
    Ok(summary)
}

/// Extracted histograms of one sequence with their frame indices.
pub fn load_sequence_histograms(cfg: &RunConfig, sequence: &str) -> Result<Vec<(usize, Histogram)>> {
    let list = cfg.hist_dir.join(sequence).join("sequence.txt");
    let expected = cfg.hist_rows * cfg.hist_sectors;
    read_sequence_manifest(&list)?
        .iter()
        .map(|p| {
            let h = read_histogram(p)?;
            if h.dim() != expected {
                return Err(GaitError::ShapeMismatch {
                    expected,
                    actual: h.dim(),
                });
            }
            Ok((frame_index_of(p)?, h))
        })
        .collect()
}

/// Flattened normal-gait histograms of the training split.
pub fn load_training_set(cfg: &RunConfig) -> Result<Vec<Vec<f64>>> {
    let mut data = Vec::new();
    for entry in read_entries(cfg)? {
        if entry.split == Split::Train && entry.label == Label::Normal {
            data.extend(
                load_sequence_histograms(cfg, &entry.id)?
                    .into_iter()
                    .map(|(_, h)| h.flatten()),
            );
        }
    }
    if data.is_empty() {
        return Err(GaitError::EmptyDataset);
    }
    Ok(data)
}

fn saved_epochs(cfg: &RunConfig) -> Result<Vec<usize>> {
    let dir = checkpoint_dir(cfg);
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut epochs = Vec::new();
    for item in fs::read_dir(&dir).map_err(|e| GaitError::io(&dir, e))? {
        let path = item.map_err(|e| GaitError::io(&dir, e))?.path();
        let epoch = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("epoch_"))
            .and_then(|n| n.strip_suffix(".gaae"))
            .and_then(|n| n.parse().ok());
        if let Some(e) = epoch {
            epochs.push(e);
        }
    }
    epochs.sort_unstable();
    Ok(epochs)
}

/// Trains on the normal training sequences, saving a checkpoint (with
/// gait-index weights) every `save_interval` epochs and after the last one.
/// With `resume`, continues from the newest compatible checkpoint.
pub fn cmd_train(cfg: &RunConfig, resume: bool) -> Result<TrainSummary> {
    cfg.validate()?;
    let train_cfg = cfg.train_config();
    let index_cfg = cfg.index_config()?;
    let data = load_training_set(cfg)?;
    let digest = cfg.digest();

    let mut trainer = None;
    if resume {
        if let Some(&epoch) = saved_epochs(cfg)?.iter().rev().find(|&&e| e <= cfg.epochs) {
            let path = checkpoint_path(cfg, epoch);
            let ck = load_checkpoint(&path)?;
            if ck.config_digest != digest {
                return Err(GaitError::Config(format!(
                    "{} was written with a different config",
                    path.display()
                )));
            }
            trainer = Some(ck.into_trainer(train_cfg.clone())?);
        }
    }
    let mut trainer = match trainer {
        Some(t) => t,
        None => Trainer::new(train_cfg.clone())?,
    };
    let start = trainer.epoch();
    let prior = train_cfg.prior();

    let mut checkpoints = Vec::new();
    while trainer.epoch() < cfg.epochs {
        trainer.train_epoch(&data)?;
        let epoch = trainer.epoch();
        if epoch % cfg.save_interval == 0 || epoch == cfg.epochs {
            let weights = with_pool(cfg.workers, || {
                weights_from_training(&trainer.model, &prior, &data, &index_cfg)
            })??;
            let path = checkpoint_path(cfg, epoch);
            fs::create_dir_all(checkpoint_dir(cfg)).map_err(|e| GaitError::io(checkpoint_dir(cfg), e))?;
            save_checkpoint(&path, &Checkpoint::from_trainer(&trainer, digest, Some(weights)))?;
            checkpoints.push(path);
        }
    }

    let header = digest_line(cfg);
    let mut log = format!("{header}epoch,L_AE,L_D,L_Q\n");
    for (i, l) in trainer.history.iter().enumerate() {
        let _ = writeln!(log, "{},{:?},{:?},{:?}", i + 1, l.ae, l.d, l.q);
    }
    write_file(&cfg.out_dir.join("train_log.csv"), log)?;
    let window = select_stable_window(&trainer.history, cfg.stable_window)?;
    write_file(
        &cfg.out_dir.join("stable_window.csv"),
        format!("{header}first_epoch,last_epoch\n{},{}\n", window.start(), window.end()),
    )?;
    Ok(TrainSummary {
        epochs_run: trainer.epoch() - start,
        training_frames: data.len(),
        stable_window: window,
        checkpoints,
    })
}

/// The stable epoch window recorded by `train`.
pub fn read_stable_window(cfg: &RunConfig) -> Result<RangeInclusive<usize>> {
    let path = cfg.out_dir.join("stable_window.csv");
    let rows = csv_rows(&path, "first_epoch,last_epoch")?;
    let row = rows.first().ok_or_else(|| GaitError::parse(&path, "no window row"))?;
    Ok(parse_field(&path, &row[0], "epoch")?..=parse_field(&path, &row[1], "epoch")?)
}

/// Checkpoint epochs used by `score` and `eval`.
pub fn selected_epochs(cfg: &RunConfig) -> Result<Vec<usize>> {
    let saved = saved_epochs(cfg)?;
    let epochs: Vec<usize> = match cfg.epoch_selection()? {
        EpochSelection::All => saved,
        EpochSelection::Stable => {
            let window = read_stable_window(cfg)?;
            saved.into_iter().filter(|e| window.contains(e)).collect()
        }
    };
    if epochs.is_empty() {
        return Err(GaitError::MissingCheckpoint(format!(
            "no saved checkpoint under {} matches score_epochs = {}",
            checkpoint_dir(cfg).display(),
            cfg.score_epochs
        )));
    }
    Ok(epochs)
}

fn scored_entries(cfg: &RunConfig) -> Result<Vec<SequenceEntry>> {
    Ok(read_entries(cfg)?
        .into_iter()
        .filter(|e| e.split != Split::Train)
        .collect())
}

const SCORE_HEADER: &str = "frame_index,y_ae,y_p,y_d,combined";
const WEIGHTS_HEADER: &str = "exponent,w_ae,w_p,w_d,s_ae,s_p,s_d";

/// Writes per-frame measures of the validation and test sequences for each
/// selected checkpoint.
pub fn cmd_score(cfg: &RunConfig) -> Result<ScoreSummary> {
    cfg.validate()?;
    let index_cfg = cfg.index_config()?;
    let precision = cfg.precision()?;
    let epochs = selected_epochs(cfg)?;
    let entries = scored_entries(cfg)?;
    let header = digest_line(cfg);
    let mut files = 0;
    for &epoch in &epochs {
        let path = checkpoint_path(cfg, epoch);
        let ck = load_checkpoint(&path)?;
        let stored = ck.weights.ok_or_else(|| {
            GaitError::MissingCheckpoint(format!("{} carries no index weights", path.display()))
        })?;
        if stored.exponent != index_cfg.exponent {
            return Err(GaitError::Config(format!(
                "exponent {} differs from the {} used at training time",
                index_cfg.exponent, stored.exponent
            )));
        }
        let weights = stored.with_mask(index_cfg.mask)?;
        let scorer = Scorer::new(&ck.model, ck.prior, precision).with_weights(weights);
        let dir = score_dir(cfg, epoch);
        write_file(
            &dir.join("weights.csv"),
            format!(
                "{header}{WEIGHTS_HEADER}\n{:?},{:?},{:?},{:?},{:?},{:?},{:?}\n",
                weights.exponent, weights.w_ae, weights.w_p, weights.w_d, weights.s_ae, weights.s_p, weights.s_d
            ),
        )?;
        for entry in &entries {
            let hists = load_sequence_histograms(cfg, &entry.id)?;
            let inputs: Vec<Vec<f64>> = hists.iter().map(|(_, h)| h.flatten()).collect();
            let measures = with_pool(cfg.workers, || scorer.score_all(&inputs))??;
            let mut out = format!("{header}{SCORE_HEADER}\n");
            for ((index, _), m) in hists.iter().zip(&measures) {
                let _ = writeln!(out, "{index},{:?},{:?},{:?},{:?}", m.y_ae, m.y_p, m.y_d, m.combined);
            }
            write_file(&dir.join(format!("{}.csv", entry.id)), out)?;
            files += 1;
        }
    }
    Ok(ScoreSummary { epochs, files })
}

/// Weights written next to a checkpoint's scores.
pub fn read_weights(path: &Path) -> Result<WeightVector> {
    let rows = csv_rows(path, WEIGHTS_HEADER)?;
    let row = rows.first().ok_or_else(|| GaitError::parse(path, "no weights row"))?;
    let v = row
        .iter()
        .map(|f| parse_field::<f64>(path, f, "number"))
        .collect::<Result<Vec<_>>>()?;
    Ok(WeightVector {
        exponent: v[0],
        w_ae: v[1],
        w_p: v[2],
        w_d: v[3],
        s_ae: v[4],
        s_p: v[5],
        s_d: v[6],
    })
}

/// Per-frame measures from a score file, in file order.
pub fn read_scores(path: &Path) -> Result<Vec<(usize, FrameMeasures)>> {
    csv_rows(path, SCORE_HEADER)?
        .iter()
        .map(|row| {
            let num = |i: usize| parse_field::<f64>(path, &row[i], "number");
            Ok((
                parse_field(path, &row[0], "frame index")?,
                FrameMeasures {
                    y_ae: num(1)?,
                    y_p: num(2)?,
                    y_d: num(3)?,
                    combined: num(4)?,
                },
            ))
        })
        .collect()
}

/// Every evaluated level: frames, each segment length in each mode, then
/// whole sequences.
pub fn levels(cfg: &RunConfig) -> Result<Vec<Level>> {
    let modes = cfg.segment_modes()?;
    let mut out = vec![Level::Frame];
    for &mode in &modes {
        for &delta in &cfg.deltas {
            out.push(Level::Segment { delta, mode });
        }
    }
    out.push(Level::Sequence);
    Ok(out)
}

/// AUC and EER for every configured channel and level, averaged over the
/// scored checkpoints. The validation split, when present, fixes each
/// model's score orientation.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalSummary> {
    cfg.validate()?;
    let epochs = selected_epochs(cfg)?;
    let entries = scored_entries(cfg)?;
    let channels = cfg.channels()?;
    let levels = levels(cfg)?;

    struct Loaded {
        epoch: usize,
        weights: WeightVector,
        sequences: Vec<(Split, Label, Vec<FrameMeasures>)>,
    }
    let mut loaded = Vec::with_capacity(epochs.len());
    for &epoch in &epochs {
        let dir = score_dir(cfg, epoch);
        let weights = read_weights(&dir.join("weights.csv"))?;
        let sequences = entries
            .iter()
            .map(|e| {
                let scores = read_scores(&dir.join(format!("{}.csv", e.id)))?;
                Ok((e.split, e.label, scores.into_iter().map(|(_, m)| m).collect()))
            })
            .collect::<Result<Vec<_>>>()?;
        loaded.push(Loaded {
            epoch,
            weights,
            sequences,
        });
    }

    let mut reports = Vec::with_capacity(channels.len());
    for &channel in &channels {
        let mut per_checkpoint = Vec::with_capacity(loaded.len());
        for l in &loaded {
            let w = l.weights.with_mask(channel)?;
            let pick = |split: Split| -> Vec<ScoredSequence> {
                l.sequences
                    .iter()
                    .filter(|(s, _, _)| *s == split)
                    .map(|(_, label, ms)| ScoredSequence {
                        label: *label,
                        frame_scores: ms.iter().map(|m| combine(m, &w)).collect(),
                    })
                    .collect()
            };
            let validation = pick(Split::Validation);
            per_checkpoint.push(CheckpointScores {
                epoch: l.epoch,
                test: pick(Split::Test),
                orientation_reference: (!validation.is_empty()).then_some(validation),
            });
        }
        let levels = levels
            .iter()
            .map(|&level| evaluate_epoch_range(&per_checkpoint, level))
            .collect::<Result<Vec<_>>>()?;
        reports.push(ChannelReport { channel, levels });
    }
    write_reports(cfg, &reports)?;
    Ok(EvalSummary {
        epochs,
        channels: reports,
    })
}

fn write_reports(cfg: &RunConfig, reports: &[ChannelReport]) -> Result<()> {
    let header = digest_line(cfg);
    let primary = cfg.index_config()?.mask;
    let mut summary = format!("{header}channel,level,mode,delta,auc,eer,negated,models\n");
    let mut per_model = format!("{header}channel,level,mode,delta,epoch,auc,eer,orientation\n");
    let mut roc = format!("{header}channel,level,mode,delta,epoch,fpr,tpr\n");
    for report in reports {
        let channel = report.channel.label();
        for r in &report.levels {
            let key = format!("{channel},{},{},{}", r.level.name(), r.level.mode_name(), r.level.delta());
            let negated = r.per_model.iter().filter(|m| m.orientation.is_negated()).count();
            let _ = writeln!(
                summary,
                "{key},{:?},{:?},{negated},{}",
                r.mean_auc,
                r.mean_eer,
                r.per_model.len()
            );
            for m in &r.per_model {
                let orientation = if m.orientation.is_negated() { "negated" } else { "as_is" };
                let _ = writeln!(
                    per_model,
                    "{key},{},{:?},{:?},{orientation}",
                    m.epoch, m.metrics.auc, m.metrics.eer
                );
                let sliding = matches!(r.level, Level::Segment { mode: SegmentMode::Sliding, .. });
                if report.channel == primary && !sliding {
                    for p in &m.roc {
                        let _ = writeln!(roc, "{key},{},{:?},{:?}", m.epoch, p.fpr, p.tpr);
                    }
                }
            }
        }
    }
    let dir = report_dir(cfg);
    write_file(&dir.join("summary.csv"), summary)?;
    write_file(&dir.join("per_model.csv"), per_model)?;
    write_file(&dir.join("roc.csv"), roc)?;
    write_file(&dir.join("config.toml"), format!("{header}{}", cfg.canonical().to_toml()))
}
