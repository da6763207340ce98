use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Histogram, Point3, PointCloud};
use crate::error::{GaitError, Result};

/// Leading bytes of a binary histogram file.
pub const HISTOGRAM_MAGIC: &[u8; 6] = b"GHIST1";

/// Reads one frame: one `x y z` triple per line. Blank lines and `#`
/// comments are skipped.
pub fn read_point_cloud(path: &Path, frame_index: usize) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(|e| GaitError::io(path, e))?;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace().map(str::parse::<f64>);
        match (fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(Ok(x)), Some(Ok(y)), Some(Ok(z)), None) => points.push(Point3::new(x, y, z)),
            _ => {
                return Err(GaitError::parse(
                    path,
                    format!("line {}: expected `x y z`", lineno + 1),
                ))
            }
        }
    }
    Ok(PointCloud::new(points, frame_index))
}

pub fn write_point_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    fs::write(path, point_cloud_text(cloud, None)).map_err(|e| GaitError::io(path, e))
}

/// Text form of a frame. `None` keeps every digit needed to read the
/// coordinates back exactly; `Some(d)` rounds to `d` decimals.
pub fn point_cloud_text(cloud: &PointCloud, decimals: Option<usize>) -> String {
    let mut out = String::with_capacity(cloud.points.len() * 30);
    for p in &cloud.points {
        let _ = match decimals {
            None => writeln!(out, "{:?} {:?} {:?}", p.x, p.y, p.z),
            Some(d) => writeln!(out, "{:.d$} {:.d$} {:.d$}", p.x, p.y, p.z),
        };
    }
    out
}

/// Sequence manifest: frame file names, one per line, in temporal order,
/// relative to the manifest's directory.
pub fn write_sequence_manifest(path: &Path, frame_files: &[String]) -> Result<()> {
    let mut out = String::new();
    for f in frame_files {
        out.push_str(f);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| GaitError::io(path, e))
}

/// Returns the frame paths listed in a sequence manifest, resolved against
/// the manifest's directory.
pub fn read_sequence_manifest(path: &Path) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(path).map_err(|e| GaitError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| base.join(l))
        .collect())
}

/// `GHIST1`, rows and cols as little-endian u16, then `rows * cols` level
/// bytes in row-major order.
pub fn write_histogram(path: &Path, hist: &Histogram) -> Result<()> {
    fs::write(path, encode_histogram(hist)).map_err(|e| GaitError::io(path, e))
}

pub fn read_histogram(path: &Path) -> Result<Histogram> {
    let bytes = fs::read(path).map_err(|e| GaitError::io(path, e))?;
    decode_histogram(&bytes).map_err(|e| match e {
        GaitError::Parse { msg, .. } => GaitError::parse(path, msg),
        other => other,
    })
}

pub(crate) fn encode_histogram(hist: &Histogram) -> Vec<u8> {
    let mut out = Vec::with_capacity(10 + hist.dim());
    out.extend_from_slice(HISTOGRAM_MAGIC);
    out.extend_from_slice(&(hist.rows() as u16).to_le_bytes());
    out.extend_from_slice(&(hist.cols() as u16).to_le_bytes());
    out.extend_from_slice(hist.levels());
    out
}

pub(crate) fn decode_histogram(bytes: &[u8]) -> Result<Histogram> {
    let bad = |msg: &str| GaitError::parse("<histogram>", msg);
    if bytes.len() < 10 || &bytes[..6] != HISTOGRAM_MAGIC {
        return Err(bad("missing GHIST1 header"));
    }
    let rows = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let cols = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let body = &bytes[10..];
    if body.len() != rows * cols {
        return Err(bad(&format!(
            "expected {} level bytes, found {}",
            rows * cols,
            body.len()
        )));
    }
    Histogram::from_levels(rows, cols, body.to_vec())
}

/// Grid of values in `[0, 1]`, top row first so it reads like an image.
pub fn write_histogram_csv(path: &Path, hist: &Histogram) -> Result<()> {
    let mut out = String::new();
    for row in (0..hist.rows()).rev() {
        let line: Vec<String> = (0..hist.cols())
            .map(|c| format!("{:.6}", hist.value(row, c)))
            .collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| GaitError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_layout() {
        let h = Histogram::from_levels(2, 3, vec![0, 1, 2, 3, 4, 255]).unwrap();
        let bytes = encode_histogram(&h);
        assert_eq!(&bytes[..6], b"GHIST1");
        assert_eq!(&bytes[6..10], &[2, 0, 3, 0]);
        assert_eq!(&bytes[10..], &[0, 1, 2, 3, 4, 255]);
        assert_eq!(decode_histogram(&bytes).unwrap(), h);
    }

    #[test]
    fn corrupt_binary_rejected() {
        assert!(decode_histogram(b"GHIST2\x01\x00\x01\x00\x05").is_err());
        assert!(decode_histogram(b"GHIST1\x02\x00\x01\x00\x05").is_err());
    }

    #[test]
    fn point_cloud_text_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.txt");
        let cloud = PointCloud::new(
            vec![Point3::new(0.1, -2.5, 1e-3), Point3::new(1.0 / 3.0, 0.0, 1.75)],
            4,
        );
        write_point_cloud(&path, &cloud).unwrap();
        assert_eq!(read_point_cloud(&path, 4).unwrap(), cloud);

        fs::write(&path, "1 2\n").unwrap();
        assert!(matches!(
            read_point_cloud(&path, 0),
            Err(GaitError::Parse { .. })
        ));
    }
}
