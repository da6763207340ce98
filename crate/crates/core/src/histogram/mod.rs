//! Cylindrical histogram features for a single walking posture.
//!
//! A vertical cylinder is fitted around the cloud (axis through the centroid,
//! bases through the lowest and highest points, radius reaching the farthest
//! point). The cylinder is cut into `rows` height bands and `sectors` angular
//! sectors; every point falls into exactly one cell.
//!
//! Angular convention: column 0 starts at `atan2 = -pi` (the `-x` direction
//! as seen from the axis) and columns increase counter-clockwise when viewed
//! from above. Row 0 is the lowest height band.

mod io;

pub use io::{
    point_cloud_text, read_histogram, read_point_cloud, read_sequence_manifest, write_histogram,
    write_histogram_csv, write_point_cloud, write_sequence_manifest, HISTOGRAM_MAGIC,
};

use std::f64::consts::PI;

use crate::error::{GaitError, Result};

/// Default number of height bands and angular sectors.
pub const DEFAULT_ROWS: usize = 16;
pub const DEFAULT_SECTORS: usize = 16;

/// Number of quantization levels of a normalized histogram.
pub const LEVELS: u32 = 256;
const MAX_LEVEL: u32 = LEVELS - 1;

/// A 3D point in meters; `z` is the vertical axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// One frame of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub frame_index: usize,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>, frame_index: usize) -> Self {
        Self {
            points,
            frame_index,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Vertical cylinder enclosing a cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderFrame {
    pub centroid_xy: (f64, f64),
    pub z_min: f64,
    pub z_max: f64,
    pub radius: f64,
}

impl CylinderFrame {
    fn validate(&self) -> Result<()> {
        if !(self.z_max > self.z_min) {
            return Err(GaitError::DegenerateCloud(format!(
                "cylinder height is zero (z_min = z_max = {})",
                self.z_min
            )));
        }
        if !(self.radius > 0.0) {
            return Err(GaitError::DegenerateCloud(
                "cylinder radius is zero (all points on the axis)".into(),
            ));
        }
        Ok(())
    }

    /// Height band of `z`, clamped so the top base lands in the last row.
    pub fn row_of(&self, z: f64, rows: usize) -> usize {
        let t = (z - self.z_min) / (self.z_max - self.z_min);
        clamp_bin(t * rows as f64, rows)
    }

    /// Angular sector of a point, see the module docs for the convention.
    pub fn sector_of(&self, x: f64, y: f64, sectors: usize) -> usize {
        let angle = (y - self.centroid_xy.1).atan2(x - self.centroid_xy.0);
        clamp_bin((angle + PI) / (2.0 * PI) * sectors as f64, sectors)
    }
}

fn clamp_bin(position: f64, bins: usize) -> usize {
    if position <= 0.0 {
        0
    } else {
        (position.floor() as usize).min(bins - 1)
    }
}

/// Fits the enclosing vertical cylinder.
pub fn fit_cylinder(cloud: &PointCloud) -> Result<CylinderFrame> {
    let points = &cloud.points;
    if points.len() < 2 {
        return Err(GaitError::DegenerateCloud(format!(
            "frame {} has {} point(s), need at least 2",
            cloud.frame_index,
            points.len()
        )));
    }
    if let Some(bad) = points.iter().position(|p| !p.is_finite()) {
        return Err(GaitError::DegenerateCloud(format!(
            "frame {} has a non-finite coordinate at point {bad}",
            cloud.frame_index
        )));
    }

    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let (z_min, z_max) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.z), hi.max(p.z))
        });
    let radius = points
        .iter()
        .map(|p| (p.x - cx).hypot(p.y - cy))
        .fold(0.0, f64::max);

    let frame = CylinderFrame {
        centroid_xy: (cx, cy),
        z_min,
        z_max,
        radius,
    };
    frame.validate().map_err(|e| match e {
        GaitError::DegenerateCloud(msg) => {
            GaitError::DegenerateCloud(format!("frame {}: {msg}", cloud.frame_index))
        }
        other => other,
    })?;
    Ok(frame)
}

/// Raw per-cell point counts, row-major with row 0 the lowest band.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawHistogram {
    rows: usize,
    cols: usize,
    counts: Vec<u32>,
}

impl RawHistogram {
    pub fn from_counts(rows: usize, cols: usize, counts: Vec<u32>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(GaitError::InvalidDimensions { rows, cols });
        }
        if counts.len() != rows * cols {
            return Err(GaitError::ShapeMismatch {
                expected: rows * cols,
                actual: counts.len(),
            });
        }
        Ok(Self { rows, cols, counts })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.counts[row * self.cols + col]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }
}

/// Counts the points of `cloud` in each cell of `cyl`.
pub fn compute_raw_histogram(
    cloud: &PointCloud,
    cyl: &CylinderFrame,
    rows: usize,
    sectors: usize,
) -> Result<RawHistogram> {
    if rows == 0 || sectors == 0 {
        return Err(GaitError::InvalidDimensions {
            rows,
            cols: sectors,
        });
    }
    cyl.validate()?;
    let mut counts = vec![0u32; rows * sectors];
    for p in &cloud.points {
        let row = cyl.row_of(p.z, rows);
        let col = cyl.sector_of(p.x, p.y, sectors);
        counts[row * sectors + col] += 1;
    }
    RawHistogram::from_counts(rows, sectors, counts)
}

/// Normalized histogram quantized to 256 levels; values are `level / 255`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Histogram {
    rows: usize,
    cols: usize,
    levels: Vec<u8>,
}

impl Histogram {
    pub fn from_levels(rows: usize, cols: usize, levels: Vec<u8>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows > u16::MAX as usize || cols > u16::MAX as usize {
            return Err(GaitError::InvalidDimensions { rows, cols });
        }
        if levels.len() != rows * cols {
            return Err(GaitError::ShapeMismatch {
                expected: rows * cols,
                actual: levels.len(),
            });
        }
        Ok(Self { rows, cols, levels })
    }

    /// Inverse of [`Histogram::flatten`]. Every value must sit on the
    /// 256-level grid.
    pub fn unflatten(values: &[f64], rows: usize, cols: usize) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(GaitError::ShapeMismatch {
                expected: rows * cols,
                actual: values.len(),
            });
        }
        let levels = values
            .iter()
            .map(|&v| {
                let scaled = v * f64::from(MAX_LEVEL);
                let k = scaled.round();
                if (0.0..=f64::from(MAX_LEVEL)).contains(&k) && (scaled - k).abs() <= 1e-9 {
                    Ok(k as u8)
                } else {
                    Err(GaitError::InvalidParams(format!(
                        "value {v} is not one of the 256 histogram levels"
                    )))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_levels(rows, cols, levels)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Input dimension of the auto-encoder (`rows * cols`).
    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[u8] {
        &self.levels
    }

    pub fn level(&self, row: usize, col: usize) -> u8 {
        self.levels[row * self.cols + col]
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        f64::from(self.level(row, col)) / f64::from(MAX_LEVEL)
    }

    /// Row-major vector of values in `[0, 1]`.
    pub fn flatten(&self) -> Vec<f64> {
        self.levels
            .iter()
            .map(|&k| f64::from(k) / f64::from(MAX_LEVEL))
            .collect()
    }
}

/// Scales counts by the per-frame maximum and quantizes to 256 levels,
/// rounding half away from zero.
pub fn normalize_histogram(raw: &RawHistogram) -> Result<Histogram> {
    let max = raw.counts.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return Err(GaitError::EmptyHistogram);
    }
    let max = u64::from(max);
    // round(c * 255 / max) in exact integer arithmetic
    let levels = raw
        .counts
        .iter()
        .map(|&c| ((2 * u64::from(c) * u64::from(MAX_LEVEL) + max) / (2 * max)) as u8)
        .collect();
    Histogram::from_levels(raw.rows, raw.cols, levels)
}

/// Full extraction for one frame: fit, count, normalize.
pub fn extract(cloud: &PointCloud, rows: usize, sectors: usize) -> Result<Histogram> {
    let cyl = fit_cylinder(cloud)?;
    let raw = compute_raw_histogram(cloud, &cyl, rows, sectors)?;
    normalize_histogram(&raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(points: &[(f64, f64, f64)]) -> PointCloud {
        PointCloud::new(
            points.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect(),
            0,
        )
    }

    #[test]
    fn points_on_axis_are_degenerate() {
        let c = cloud(&[(0.0, 0.0, 0.0), (0.0, 0.0, 2.0)]);
        assert!(matches!(fit_cylinder(&c), Err(GaitError::DegenerateCloud(_))));
    }

    #[test]
    fn flat_or_tiny_clouds_are_degenerate() {
        let flat = cloud(&[(1.0, 0.0, 0.5), (-1.0, 0.0, 0.5), (0.0, 1.0, 0.5)]);
        assert!(matches!(fit_cylinder(&flat), Err(GaitError::DegenerateCloud(_))));
        let single = cloud(&[(1.0, 0.0, 0.5)]);
        assert!(matches!(fit_cylinder(&single), Err(GaitError::DegenerateCloud(_))));
        let nan = cloud(&[(1.0, 0.0, 0.5), (f64::NAN, 0.0, 1.0)]);
        assert!(matches!(fit_cylinder(&nan), Err(GaitError::DegenerateCloud(_))));
    }

    #[test]
    fn symmetric_cloud_fit() {
        let c = cloud(&[(1.0, 0.0, 0.0), (-1.0, 0.0, 0.0), (0.0, 0.0, 1.0)]);
        let cyl = fit_cylinder(&c).unwrap();
        assert_eq!(cyl.centroid_xy, (0.0, 0.0));
        assert_eq!(cyl.z_min, 0.0);
        assert_eq!(cyl.z_max, 1.0);
        assert_eq!(cyl.radius, 1.0);
    }

    #[test]
    fn same_cell_points_share_one_bin() {
        let c = cloud(&[(0.5, 0.01, 0.4); 4]);
        let cyl = CylinderFrame {
            centroid_xy: (0.0, 0.0),
            z_min: 0.0,
            z_max: 1.0,
            radius: 1.0,
        };
        let raw = compute_raw_histogram(&c, &cyl, 4, 4).unwrap();
        let (row, col) = (cyl.row_of(0.4, 4), cyl.sector_of(0.5, 0.01, 4));
        assert_eq!((row, col), (1, 2));
        assert_eq!(raw.get(row, col), 4);
        assert_eq!(raw.total(), 4);
    }

    #[test]
    fn eight_angles_fill_eight_sectors() {
        let pts: Vec<_> = (0..8)
            .map(|k| {
                let a = (k as f64 * 45.0 + 1.0).to_radians();
                (a.cos(), a.sin(), if k % 2 == 0 { 0.0 } else { 1.0 })
            })
            .collect();
        let c = cloud(&pts);
        let cyl = fit_cylinder(&c).unwrap();
        let raw = compute_raw_histogram(&c, &cyl, 1, 8).unwrap();
        assert_eq!(raw.counts(), &[1; 8]);
    }

    #[test]
    fn top_base_and_rim_are_clamped_inside() {
        let c = cloud(&[(-1.0, 0.0, 0.0), (1.0, 0.0, 3.0)]);
        let cyl = fit_cylinder(&c).unwrap();
        assert_eq!(cyl.row_of(3.0, 16), 15);
        assert_eq!(cyl.row_of(0.0, 16), 0);
        // exactly at atan2 = pi
        assert_eq!(cyl.sector_of(-1.0, 0.0, 16), 15);
        assert_eq!(cyl.sector_of(-1.0, -1e-12, 16), 0);
    }

    #[test]
    fn zero_dimensions_rejected() {
        let c = cloud(&[(-1.0, 0.0, 0.0), (1.0, 0.0, 3.0)]);
        let cyl = fit_cylinder(&c).unwrap();
        assert!(matches!(
            compute_raw_histogram(&c, &cyl, 0, 16),
            Err(GaitError::InvalidDimensions { .. })
        ));
    }

    #[test]
    fn normalization_levels() {
        let raw = RawHistogram::from_counts(1, 3, vec![10, 5, 0]).unwrap();
        let h = normalize_histogram(&raw).unwrap();
        assert_eq!(h.value(0, 0), 1.0);
        assert_eq!(h.level(0, 1), 128);
        assert_eq!(h.value(0, 1), 128.0 / 255.0);
        assert_eq!(h.value(0, 2), 0.0);

        let flat = RawHistogram::from_counts(2, 2, vec![7; 4]).unwrap();
        assert!(normalize_histogram(&flat)
            .unwrap()
            .flatten()
            .iter()
            .all(|&v| v == 1.0));
    }

    #[test]
    fn all_zero_counts_rejected() {
        let raw = RawHistogram::from_counts(2, 2, vec![0; 4]).unwrap();
        assert!(matches!(normalize_histogram(&raw), Err(GaitError::EmptyHistogram)));
    }

    #[test]
    fn flatten_is_row_major() {
        let mut levels = vec![0u8; 256];
        levels[3 * 16 + 7] = 255;
        let h = Histogram::from_levels(16, 16, levels).unwrap();
        let v = h.flatten();
        assert_eq!(v.len(), 256);
        assert_eq!(v[3 * 16 + 7], 1.0);
        assert_eq!(v.iter().filter(|&&x| x != 0.0).count(), 1);
        assert_eq!(Histogram::unflatten(&v, 16, 16).unwrap(), h);
    }

    #[test]
    fn unflatten_rejects_off_grid_values() {
        assert!(Histogram::unflatten(&[0.5, 1.0], 1, 2).is_err());
        assert!(Histogram::unflatten(&[1.0], 1, 2).is_err());
    }
}
