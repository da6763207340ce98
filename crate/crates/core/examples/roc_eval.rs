//! ROC, AUC and EER on hand-made scores, plus segment and sequence
//! aggregation.
//!
//! cargo run --example roc_eval

use gait_aae::evaluation::{
    aggregate, metrics, roc_curve, scored_set_at, Label, Level, Orientation, ScoredSequence, ScoredSet, SegmentMode,
};

fn main() -> gait_aae::Result<()> {
    let set = ScoredSet::new(
        vec![0.9, 0.8, 0.7, 0.6, 0.55, 0.5, 0.4, 0.3, 0.2, 0.1],
        [1, 1, 0, 1, 1, 0, 0, 1, 0, 0]
            .iter()
            .map(|&a| if a == 1 { Label::Abnormal } else { Label::Normal })
            .collect(),
    )?;
    for p in roc_curve(&set)? {
        println!("fpr {:.2}  tpr {:.2}", p.fpr, p.tpr);
    }
    let m = metrics(&set)?;
    println!("AUC {:.3}  EER {:.3}", m.auc, m.eer);

    // a channel that runs the wrong way is flipped by the orientation fit
    let flipped = set.negated();
    let orientation = Orientation::fit(&flipped)?;
    println!("orientation of negated scores: {orientation:?}");
    println!("AUC after orientation {:.3}", metrics(&flipped.oriented(orientation))?.auc);

    let frames = [0.2, 0.4, 0.3, 0.9, 0.8, 0.7, 0.1];
    println!("non-overlapping 3: {:?}", aggregate(&frames, 3, SegmentMode::NonOverlapping)?);
    println!("sliding 3:         {:?}", aggregate(&frames, 3, SegmentMode::Sliding)?);

    let sequences = vec![
        ScoredSequence { label: Label::Normal, frame_scores: vec![0.2, 0.6, 0.1, 0.3] },
        ScoredSequence { label: Label::Normal, frame_scores: vec![0.4, 0.2, 0.5, 0.1] },
        ScoredSequence { label: Label::Abnormal, frame_scores: vec![0.5, 0.3, 0.7, 0.6] },
        ScoredSequence { label: Label::Abnormal, frame_scores: vec![0.2, 0.8, 0.6, 0.4] },
    ];
    let levels = [
        Level::Frame,
        Level::Segment { delta: 2, mode: SegmentMode::NonOverlapping },
        Level::Sequence,
    ];
    for level in levels {
        let m = metrics(&scored_set_at(&sequences, level)?)?;
        println!("{:<8} AUC {:.3}  EER {:.3}", level.name(), m.auc, m.eer);
    }
    Ok(())
}
