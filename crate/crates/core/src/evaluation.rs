//! ROC, AUC and EER for normal-versus-abnormal discrimination, plus the
//! frame, segment and sequence aggregation of per-frame scores.
//!
//! Abnormal is the positive class: a sample is flagged abnormal when its
//! score is at or above the threshold. Channels whose scores decrease with
//! abnormality are handled by [`Orientation`].

use crate::error::{GaitError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Normal,
    Abnormal,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Abnormal => "abnormal",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Label::Normal),
            "abnormal" => Ok(Label::Abnormal),
            other => Err(GaitError::Config(format!("unknown label `{other}`"))),
        }
    }
}

/// Scores with aligned labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    pub scores: Vec<f64>,
    pub labels: Vec<Label>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<Label>) -> Result<Self> {
        if scores.len() != labels.len() || scores.is_empty() {
            return Err(GaitError::ShapeMismatch {
                expected: labels.len(),
                actual: scores.len(),
            });
        }
        if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
            return Err(GaitError::Numeric(format!("non-finite score {s}")));
        }
        Ok(Self { scores, labels })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l == Label::Abnormal).count();
        (pos, self.labels.len() - pos)
    }

    fn require_both_classes(&self) -> Result<(usize, usize)> {
        let (pos, neg) = self.class_counts();
        if pos == 0 || neg == 0 {
            return Err(GaitError::SingleClass);
        }
        Ok((pos, neg))
    }

    pub fn negated(&self) -> Self {
        Self {
            scores: self.scores.iter().map(|s| -s).collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn oriented(&self, orientation: Orientation) -> Self {
        match orientation {
            Orientation::AsIs => self.clone(),
            Orientation::Negated => self.negated(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC vertices from `(0, 0)` to `(1, 1)`, one per distinct score.
pub fn roc_curve(set: &ScoredSet) -> Result<Vec<RocPoint>> {
    let (pos, neg) = set.require_both_classes()?;
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&a, &b| set.scores[b].total_cmp(&set.scores[a]));

    let mut points = Vec::with_capacity(set.len() + 1);
    points.push(RocPoint { fpr: 0.0, tpr: 0.0 });
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = set.scores[order[i]];
        while i < order.len() && set.scores[order[i]] == threshold {
            match set.labels[order[i]] {
                Label::Abnormal => tp += 1,
                Label::Normal => fp += 1,
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(points)
}

/// Trapezoidal area under the ROC curve.
pub fn auc(set: &ScoredSet) -> Result<f64> {
    Ok(metrics_from_roc(&roc_curve(set)?).auc)
}

/// Rate at which false positives equal false negatives, interpolated
/// linearly between ROC vertices.
pub fn eer(set: &ScoredSet) -> Result<f64> {
    Ok(eer_from_roc(&roc_curve(set)?))
}

pub(crate) fn eer_from_roc(roc: &[RocPoint]) -> f64 {
    // fpr - fnr = fpr + tpr - 1 rises monotonically from -1 to 1 along the curve
    let gap = |p: &RocPoint| p.fpr + p.tpr - 1.0;
    for w in roc.windows(2) {
        let (d0, d1) = (gap(&w[0]), gap(&w[1]));
        if d0 == 0.0 {
            return w[0].fpr;
        }
        if d0 < 0.0 && d1 >= 0.0 {
            let t = -d0 / (d1 - d0);
            return w[0].fpr + t * (w[1].fpr - w[0].fpr);
        }
    }
    roc.last().map_or(0.5, |p| p.fpr)
}

/// Whether scores were negated before computing metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    AsIs,
    Negated,
}

impl Orientation {
    /// Negate when the raw AUC on `reference` is below one half.
    pub fn fit(reference: &ScoredSet) -> Result<Self> {
        Ok(if auc(reference)? < 0.5 {
            Orientation::Negated
        } else {
            Orientation::AsIs
        })
    }

    pub fn is_negated(self) -> bool {
        self == Orientation::Negated
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegmentMode {
    /// Consecutive disjoint windows; a trailing partial window is dropped.
    NonOverlapping,
    /// Every window at stride 1.
    Sliding,
}

impl SegmentMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentMode::NonOverlapping => "non_overlapping",
            SegmentMode::Sliding => "sliding",
        }
    }
}

/// Means of windows of `delta` consecutive frame scores.
pub fn aggregate(frame_scores: &[f64], delta: usize, mode: SegmentMode) -> Result<Vec<f64>> {
    if delta == 0 {
        return Err(GaitError::InvalidParams("segment length must be >= 1".into()));
    }
    if delta > frame_scores.len() {
        return Err(GaitError::SegmentTooLong {
            delta,
            len: frame_scores.len(),
        });
    }
    Ok(match mode {
        SegmentMode::NonOverlapping => frame_scores.chunks_exact(delta).map(mean).collect(),
        SegmentMode::Sliding => frame_scores.windows(delta).map(mean).collect(),
    })
}

pub fn sequence_score(frame_scores: &[f64]) -> Result<f64> {
    if frame_scores.is_empty() {
        return Err(GaitError::EmptySequence);
    }
    Ok(mean(frame_scores))
}

/// Mean taken relative to the first element, so constant inputs come back
/// unchanged.
fn mean(w: &[f64]) -> f64 {
    let x0 = w[0];
    x0 + w.iter().map(|x| x - x0).sum::<f64>() / w.len() as f64
}

/// Granularity at which scores are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    Frame,
    Segment { delta: usize, mode: SegmentMode },
    Sequence,
}

impl Level {
    pub fn name(&self) -> &'static str {
        match self {
            Level::Frame => "frame",
            Level::Segment { .. } => "segment",
            Level::Sequence => "sequence",
        }
    }

    pub fn mode_name(&self) -> &'static str {
        match self {
            Level::Segment { mode, .. } => mode.as_str(),
            _ => "-",
        }
    }

    /// Window length in frames; 1 for frames, 0 for whole sequences.
    pub fn delta(&self) -> usize {
        match self {
            Level::Frame => 1,
            Level::Segment { delta, .. } => *delta,
            Level::Sequence => 0,
        }
    }
}

/// Per-frame scores of one labeled sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSequence {
    pub label: Label,
    pub frame_scores: Vec<f64>,
}

/// Pools sequences into a scored set at the requested level. Sequences
/// shorter than a segment contribute nothing at that level.
pub fn scored_set_at(sequences: &[ScoredSequence], level: Level) -> Result<ScoredSet> {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for seq in sequences {
        let values = match level {
            Level::Frame => seq.frame_scores.clone(),
            Level::Segment { delta, mode } => {
                if delta > seq.frame_scores.len() {
                    continue;
                }
                aggregate(&seq.frame_scores, delta, mode)?
            }
            Level::Sequence => vec![sequence_score(&seq.frame_scores)?],
        };
        labels.extend(std::iter::repeat_n(seq.label, values.len()));
        scores.extend(values);
    }
    if scores.is_empty() {
        return Err(GaitError::EmptySequence);
    }
    ScoredSet::new(scores, labels)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub auc: f64,
    pub eer: f64,
}

pub fn metrics(set: &ScoredSet) -> Result<Metrics> {
    Ok(metrics_from_roc(&roc_curve(set)?))
}

fn metrics_from_roc(roc: &[RocPoint]) -> Metrics {
    Metrics {
        auc: roc
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
            .sum(),
        eer: eer_from_roc(roc),
    }
}

/// Metrics of one model (checkpoint) at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMetrics {
    pub epoch: usize,
    pub orientation: Orientation,
    pub metrics: Metrics,
    pub roc: Vec<RocPoint>,
}

/// Metrics for a range of checkpoints at one level, with their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub level: Level,
    pub per_model: Vec<ModelMetrics>,
    pub mean_auc: f64,
    pub mean_eer: f64,
}

impl EvalReport {
    /// `true` when every model's scores were negated.
    pub fn all_negated(&self) -> bool {
        self.per_model.iter().all(|m| m.orientation.is_negated())
    }
}

/// Scores of one checkpoint: the test sequences and, optionally, a
/// separate labeled set used only to pick the orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointScores {
    pub epoch: usize,
    pub test: Vec<ScoredSequence>,
    pub orientation_reference: Option<Vec<ScoredSequence>>,
}

/// Evaluates every checkpoint at `level` and averages AUC and EER.
///
/// Orientation is fitted per checkpoint on frame-level scores of the
/// reference sequences, or of the test sequences when no reference is given.
pub fn evaluate_epoch_range(checkpoints: &[CheckpointScores], level: Level) -> Result<EvalReport> {
    if checkpoints.is_empty() {
        return Err(GaitError::InvalidParams("no checkpoints to evaluate".into()));
    }
    let mut per_model = Vec::with_capacity(checkpoints.len());
    for cp in checkpoints {
        let reference = cp.orientation_reference.as_deref().unwrap_or(&cp.test);
        let orientation = Orientation::fit(&scored_set_at(reference, Level::Frame)?)?;
        let set = scored_set_at(&cp.test, level)?.oriented(orientation);
        let roc = roc_curve(&set)?;
        let metrics = metrics_from_roc(&roc);
        per_model.push(ModelMetrics {
            epoch: cp.epoch,
            orientation,
            metrics,
            roc,
        });
    }
    let n = per_model.len() as f64;
    let mean_auc = per_model.iter().map(|m| m.metrics.auc).sum::<f64>() / n;
    let mean_eer = per_model.iter().map(|m| m.metrics.eer).sum::<f64>() / n;
    Ok(EvalReport {
        level,
        per_model,
        mean_auc,
        mean_eer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Abnormal as A, Normal as N};

    fn set(scores: &[f64], labels: &[Label]) -> ScoredSet {
        ScoredSet::new(scores.to_vec(), labels.to_vec()).unwrap()
    }

    #[test]
    fn perfect_separation() {
        let s = set(&[0.1, 0.2, 0.8, 0.9], &[N, N, A, A]);
        let roc = roc_curve(&s).unwrap();
        assert!(roc.iter().any(|p| p.fpr == 0.0 && p.tpr == 1.0));
        assert_eq!(auc(&s).unwrap(), 1.0);
        assert_eq!(eer(&s).unwrap(), 0.0);
    }

    #[test]
    fn reversed_separation_after_orientation() {
        let s = set(&[0.9, 0.8, 0.2, 0.1], &[N, N, A, A]);
        assert_eq!(auc(&s).unwrap(), 0.0);
        let o = Orientation::fit(&s).unwrap();
        assert_eq!(o, Orientation::Negated);
        let s = s.oriented(o);
        assert_eq!(auc(&s).unwrap(), 1.0);
        assert_eq!(eer(&s).unwrap(), 0.0);
    }

    #[test]
    fn constant_scores_give_diagonal() {
        let s = set(&[0.5; 6], &[N, A, N, A, N, N]);
        let roc = roc_curve(&s).unwrap();
        assert_eq!(roc, vec![RocPoint { fpr: 0.0, tpr: 0.0 }, RocPoint { fpr: 1.0, tpr: 1.0 }]);
        assert_eq!(auc(&s).unwrap(), 0.5);
        assert_eq!(eer(&s).unwrap(), 0.5);
    }

    #[test]
    fn single_class_rejected() {
        let s = set(&[0.1, 0.2], &[N, N]);
        assert!(matches!(roc_curve(&s), Err(GaitError::SingleClass)));
        assert!(matches!(auc(&s), Err(GaitError::SingleClass)));
        assert!(matches!(eer(&s), Err(GaitError::SingleClass)));
    }

    #[test]
    fn eer_interpolates_between_vertices() {
        // vertices (0,0) (0,.5) (.5,.5) (.5,1) (1,1); gap crosses zero on the
        // flat piece from (0,.5) to (.5,.5) at fpr = .5
        let s = set(&[4.0, 3.0, 2.0, 1.0], &[A, N, A, N]);
        assert!((eer(&s).unwrap() - 0.5).abs() < 1e-15);
        assert!((auc(&s).unwrap() - 0.75).abs() < 1e-15);
        let s = set(&[3.0, 2.0, 1.0], &[A, N, N]);
        assert_eq!(eer(&s).unwrap(), 0.0);
    }

    #[test]
    fn aggregation_windows() {
        let f = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(aggregate(&f, 1, SegmentMode::NonOverlapping).unwrap(), f.to_vec());
        assert_eq!(aggregate(&f, 2, SegmentMode::NonOverlapping).unwrap(), vec![1.5, 3.5]);
        assert_eq!(aggregate(&f, 2, SegmentMode::Sliding).unwrap(), vec![1.5, 2.5, 3.5, 4.5]);
        assert_eq!(aggregate(&f, 5, SegmentMode::Sliding).unwrap(), vec![3.0]);
        assert!(matches!(
            aggregate(&f, 6, SegmentMode::Sliding),
            Err(GaitError::SegmentTooLong { delta: 6, len: 5 })
        ));
    }

    #[test]
    fn sequence_means() {
        assert_eq!(sequence_score(&[0.7; 9]).unwrap(), 0.7);
        assert_eq!(sequence_score(&[0.0, 1.0]).unwrap(), 0.5);
        assert!(matches!(sequence_score(&[]), Err(GaitError::EmptySequence)));
    }

    #[test]
    fn epoch_range_means() {
        let seqs = vec![
            ScoredSequence {
                label: N,
                frame_scores: vec![0.1, 0.3, 0.2, 0.6],
            },
            ScoredSequence {
                label: A,
                frame_scores: vec![0.5, 0.4, 0.9, 0.2],
            },
        ];
        let cp = |epoch| CheckpointScores {
            epoch,
            test: seqs.clone(),
            orientation_reference: None,
        };
        let one = evaluate_epoch_range(&[cp(10)], Level::Frame).unwrap();
        let expected = metrics(&scored_set_at(&seqs, Level::Frame).unwrap()).unwrap();
        assert_eq!(one.mean_auc, expected.auc);
        assert_eq!(one.mean_eer, expected.eer);
        let two = evaluate_epoch_range(&[cp(10), cp(20)], Level::Frame).unwrap();
        assert_eq!(two.per_model[0].metrics, two.per_model[1].metrics);
        assert_eq!(two.mean_auc, one.mean_auc);
        assert!(evaluate_epoch_range(&[], Level::Frame).is_err());
    }
}
