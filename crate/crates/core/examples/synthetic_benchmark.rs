//! Lays out the default synthetic benchmark and writes a few frames of one
//! abnormal sequence as point-cloud text.
//!
//! cargo run --example synthetic_benchmark

use gait_aae::histogram::point_cloud_text;
use gait_aae::synth::{default_benchmark, GaitMode, Split};

fn main() -> gait_aae::Result<()> {
    let bench = default_benchmark();
    for split in [Split::Train, Split::Validation, Split::Test] {
        let specs: Vec<_> = bench.split(split).collect();
        let abnormal = specs.iter().filter(|s| s.mode != GaitMode::Normal).count();
        println!("{split:?}: {} sequences, {abnormal} abnormal", specs.len());
    }
    print!("{}", bench.manifest_csv().lines().take(6).collect::<Vec<_>>().join("\n"));
    println!("\n...");

    let spec = bench
        .split(Split::Test)
        .find(|s| s.mode != GaitMode::Normal)
        .expect("test split has abnormal walks");
    let seq = spec.generate()?;
    println!("{} ({}): {} frames", spec.id, spec.mode.name(), seq.clouds.len());
    let text = point_cloud_text(&seq.clouds[0], Some(4));
    for line in text.lines().take(5) {
        println!("  {line}");
    }
    Ok(())
}
