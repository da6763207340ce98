//! Trains the adversarial autoencoder on a small set of normal walking
//! frames, prints the three losses, and saves a checkpoint.
//!
//! cargo run --release --example train_aae -- [epochs]

use gait_aae::aae::{select_stable_window, TrainConfig, Trainer};
use gait_aae::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use gait_aae::histogram::extract;
use gait_aae::synth::{benchmark, BenchmarkConfig, Split};

fn main() -> gait_aae::Result<()> {
    let epochs: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(60);

    let bench = benchmark(&BenchmarkConfig {
        train_subjects: 3,
        frames_per_sequence: 120,
        ..BenchmarkConfig::default()
    })?;
    let mut data = Vec::new();
    for spec in bench.split(Split::Train) {
        for cloud in &spec.generate()?.clouds {
            data.push(extract(cloud, 16, 16)?.flatten());
        }
    }
    println!("{} training histograms", data.len());

    let config = TrainConfig {
        epochs,
        stable_window: (epochs / 3).max(1),
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(config.clone())?;
    println!("{:>5} {:>9} {:>9} {:>9}", "epoch", "L_AE", "L_D", "L_Q");
    for _ in 0..epochs {
        let l = trainer.train_epoch(&data)?;
        if trainer.epoch() % 10 == 0 || trainer.epoch() == 1 {
            println!("{:>5} {:>9.5} {:>9.5} {:>9.5}", trainer.epoch(), l.ae, l.d, l.q);
        }
    }
    let window = select_stable_window(&trainer.history, config.stable_window)?;
    println!("steadiest adversarial losses over epochs {}..={}", window.start(), window.end());

    let path = std::env::temp_dir().join("gait_train_example.gaae");
    save_checkpoint(&path, &Checkpoint::from_trainer(&trainer, [0; 32], None))?;
    let restored = load_checkpoint(&path)?;
    assert_eq!(restored.model, trainer.model);
    println!("checkpoint: {} ({} parameters)", path.display(), trainer.model.param_count());
    Ok(())
}
