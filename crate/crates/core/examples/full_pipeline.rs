//! Runs synth, extract, train, score and eval on a reduced benchmark in a
//! scratch directory, as the `gaitidx` binary would.
//!
//! cargo run --release --example full_pipeline -- [dir]

use std::path::PathBuf;

use gait_aae::pipeline;
use gait_aae::RunConfig;

fn main() -> gait_aae::Result<()> {
    let root: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("gait_pipeline_example"));
    let cfg = RunConfig {
        data_dir: root.join("data"),
        hist_dir: root.join("hist"),
        out_dir: root.join("out"),
        train_subjects: 3,
        test_subjects: 2,
        frames_per_sequence: 96,
        points_min: 600,
        points_max: 900,
        epochs: 60,
        stable_window: 20,
        deltas: vec![1, 10, 21, 60],
        ..RunConfig::default()
    };
    println!("config digest {}", cfg.digest_hex());

    let s = pipeline::cmd_synth(&cfg)?;
    println!("synth: {} sequences, {} frames", s.sequences, s.frames);
    let e = pipeline::cmd_extract(&cfg)?;
    println!("extract: {} histograms, {} rejected", e.histograms, e.rejected.len());
    let t = pipeline::cmd_train(&cfg, false)?;
    println!("train: stable window {}..={}", t.stable_window.start(), t.stable_window.end());
    let sc = pipeline::cmd_score(&cfg)?;
    println!("score: epochs {:?}", sc.epochs);
    let ev = pipeline::cmd_eval(&cfg)?;
    for ch in ev.channels.iter().filter(|c| c.channel.label() == "ae+p+d") {
        for r in &ch.levels {
            println!(
                "{:<9} {:<16} delta {:>3}  AUC {:.3}  EER {:.3}",
                r.level.name(),
                r.level.mode_name(),
                r.level.delta(),
                r.mean_auc,
                r.mean_eer
            );
        }
    }
    println!("reports in {}", pipeline::report_dir(&cfg).display());
    Ok(())
}
