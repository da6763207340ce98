//! Scores normal and abnormal walking with a briefly trained model and
//! shows how the three measures and their combination respond.
//!
//! cargo run --release --example gait_index

use gait_aae::aae::{TrainConfig, Trainer};
use gait_aae::gait_index::{weights_from_training, IndexConfig, Precision, Scorer};
use gait_aae::histogram::extract;
use gait_aae::synth::{generate_sequence, GaitMode, GaitParams, Side};

fn histograms(params: &GaitParams, frames: usize) -> gait_aae::Result<Vec<Vec<f64>>> {
    generate_sequence(params, frames)?
        .clouds
        .iter()
        .map(|c| extract(c, 16, 16).map(|h| h.flatten()))
        .collect()
}

fn main() -> gait_aae::Result<()> {
    let mut train = Vec::new();
    for seed in 0..4 {
        train.extend(histograms(&GaitParams { seed, ..GaitParams::default() }, 160)?);
    }
    let config = TrainConfig {
        epochs: 40,
        stable_window: 10,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(config.clone())?;
    for _ in 0..config.epochs {
        trainer.train_epoch(&train)?;
    }

    let index = IndexConfig::default();
    let weights = weights_from_training(&trainer.model, &config.prior(), &train, &index)?;
    println!(
        "weights: ae {:.3}  p {:.3}  d {:.3}  (training means {:.4}, {:.4}, {:.4})",
        weights.w_ae, weights.w_p, weights.w_d, weights.s_ae, weights.s_p, weights.s_d
    );
    let scorer = Scorer::new(&trainer.model, config.prior(), Precision::F64).with_weights(weights);

    let modes = [
        GaitMode::Normal,
        GaitMode::Sole { side: Side::Left, thickness_cm: 10 },
        GaitMode::AnkleWeight { side: Side::Right },
    ];
    println!("{:<16} {:>8} {:>10} {:>8} {:>9}", "gait", "y_ae", "y_p", "y_d", "combined");
    for mode in modes {
        let mut params = GaitParams { seed: 99, ..GaitParams::default() };
        mode.apply(&mut params);
        let measures = scorer.score_all(&histograms(&params, 80)?)?;
        let n = measures.len() as f64;
        let mean = |f: fn(&gait_aae::gait_index::FrameMeasures) -> f64| measures.iter().map(f).sum::<f64>() / n;
        println!(
            "{:<16} {:>8.4} {:>10.3e} {:>8.4} {:>9.4}",
            mode.name(),
            mean(|m| m.y_ae),
            mean(|m| m.y_p),
            mean(|m| m.y_d),
            mean(|m| m.combined)
        );
    }
    Ok(())
}
