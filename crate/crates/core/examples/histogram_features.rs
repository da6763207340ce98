//! Bins one synthetic frame into a cylindrical histogram and saves it.
//!
//! cargo run --example histogram_features

use gait_aae::histogram::{self, DEFAULT_ROWS, DEFAULT_SECTORS};
use gait_aae::synth::{generate_sequence, GaitParams};

fn main() -> gait_aae::Result<()> {
    let params = GaitParams {
        seed: 11,
        ..GaitParams::default()
    };
    let seq = generate_sequence(&params, 4)?;
    let cloud = &seq.clouds[2];

    let cyl = histogram::fit_cylinder(cloud)?;
    println!(
        "{} points, axis at ({:.3}, {:.3}), height {:.3}..{:.3} m, radius {:.3} m",
        cloud.len(),
        cyl.centroid_xy.0,
        cyl.centroid_xy.1,
        cyl.z_min,
        cyl.z_max,
        cyl.radius
    );

    let hist = histogram::extract(cloud, DEFAULT_ROWS, DEFAULT_SECTORS)?;
    let shades = [' ', '.', ':', '-', '=', '+', '*', '#', '@'];
    for row in (0..hist.rows()).rev() {
        let line: String = (0..hist.cols())
            .map(|c| shades[(hist.value(row, c) * (shades.len() - 1) as f64).round() as usize])
            .collect();
        println!("|{line}|");
    }

    let dir = std::env::temp_dir().join("gait_histogram_example");
    std::fs::create_dir_all(&dir).map_err(|e| gait_aae::GaitError::Io {
        path: dir.clone(),
        source: e,
    })?;
    histogram::write_histogram(&dir.join("frame.ghist"), &hist)?;
    histogram::write_histogram_csv(&dir.join("frame.csv"), &hist)?;
    let back = histogram::read_histogram(&dir.join("frame.ghist"))?;
    assert_eq!(back, hist);
    println!("wrote {}", dir.display());
    Ok(())
}
