//! Synthetic walking sequences for exercising the pipeline end to end.
//!
//! A body is five sampled surfaces: head, torso and pelvis ellipsoids plus
//! two leg cylinders. The surface samples are drawn once per sequence and
//! mirrored left/right; each frame poses the legs with anti-phase sinusoidal
//! swings and adds Gaussian jitter. The body rests on whichever leg reaches
//! lower, so a thicker sole under one foot lifts the whole body while that
//! leg is in stance. An ankle weight lowers the swing amplitude of one leg
//! and delays its phase.

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{GaitError, Result};
use crate::evaluation::Label;
use crate::histogram::{Point3, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// Gait type of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GaitMode {
    Normal,
    /// Sole of the given thickness (centimeters) under one foot.
    Sole { side: Side, thickness_cm: u32 },
    /// Weight attached to one ankle.
    AnkleWeight { side: Side },
}

impl GaitMode {
    /// The nine gait types: normal, three sole thicknesses on either foot,
    /// and an ankle weight on either leg.
    pub fn all() -> Vec<GaitMode> {
        let mut modes = vec![GaitMode::Normal];
        for side in [Side::Left, Side::Right] {
            for thickness_cm in [5, 10, 15] {
                modes.push(GaitMode::Sole { side, thickness_cm });
            }
        }
        for side in [Side::Left, Side::Right] {
            modes.push(GaitMode::AnkleWeight { side });
        }
        modes
    }

    pub fn label(&self) -> Label {
        match self {
            GaitMode::Normal => Label::Normal,
            _ => Label::Abnormal,
        }
    }

    pub fn name(&self) -> String {
        match self {
            GaitMode::Normal => "normal".into(),
            GaitMode::Sole { side, thickness_cm } => {
                format!("sole_{}_{thickness_cm}cm", side.as_str())
            }
            GaitMode::AnkleWeight { side } => format!("weight_{}", side.as_str()),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        GaitMode::all()
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| GaitError::Config(format!("unknown gait mode `{s}`")))
    }

    /// Applies the perturbation to otherwise normal parameters.
    pub fn apply(&self, params: &mut GaitParams) {
        match *self {
            GaitMode::Normal => {}
            GaitMode::Sole { side, thickness_cm } => {
                params.vertical_offset[side.index()] += f64::from(thickness_cm) / 100.0;
            }
            GaitMode::AnkleWeight { side } => {
                params.swing_speed[side.index()] *= ANKLE_WEIGHT_SPEED;
            }
        }
    }
}

/// Swing-speed factor of a weighted leg.
pub const ANKLE_WEIGHT_SPEED: f64 = 0.7;

/// Parameters of one generated sequence. Index 0 is the left side.
#[derive(Debug, Clone, PartialEq)]
pub struct GaitParams {
    pub points_per_frame: usize,
    /// Frames per gait cycle.
    pub cycle_length: usize,
    /// Peak leg swing angle (radians).
    pub swing_amplitude: [f64; 2],
    /// Extra sole thickness under each foot (meters).
    pub vertical_offset: [f64; 2],
    /// 1.0 for a free leg; lower values shrink and delay the swing.
    pub swing_speed: [f64; 2],
    /// Standard deviation of per-point jitter (meters).
    pub noise_sigma: f64,
    /// Standard deviation of per-frame phase jitter (radians).
    pub phase_jitter: f64,
    /// Height scale relative to a 1.75 m body.
    pub body_scale: f64,
    pub width_scale: f64,
    pub seed: u64,
}

impl Default for GaitParams {
    fn default() -> Self {
        Self {
            points_per_frame: 2000,
            cycle_length: 16,
            swing_amplitude: [0.4, 0.4],
            vertical_offset: [0.0, 0.0],
            swing_speed: [1.0, 1.0],
            noise_sigma: 0.008,
            phase_jitter: 0.15,
            body_scale: 1.0,
            width_scale: 1.0,
            seed: 0,
        }
    }
}

impl GaitParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GaitError::InvalidParams(msg));
        if self.cycle_length < 4 {
            return bad(format!("cycle length {} < 4", self.cycle_length));
        }
        if self.points_per_frame < 10 {
            return bad(format!("{} points per frame is too few", self.points_per_frame));
        }
        if self.swing_amplitude.iter().any(|a| !(*a >= 0.0 && *a < PI / 2.0)) {
            return bad(format!("swing amplitudes {:?} outside [0, pi/2)", self.swing_amplitude));
        }
        if self.vertical_offset.iter().any(|o| !(*o >= 0.0 && *o < 0.5)) {
            return bad(format!("vertical offsets {:?} outside [0, 0.5)", self.vertical_offset));
        }
        if self.swing_speed.iter().any(|s| !(*s > 0.0 && *s <= 1.0)) {
            return bad(format!("swing speeds {:?} outside (0, 1]", self.swing_speed));
        }
        if !(self.noise_sigma >= 0.0) || !(self.phase_jitter >= 0.0) {
            return bad("noise levels must be non-negative".into());
        }
        if !(self.body_scale > 0.0) || !(self.width_scale > 0.0) {
            return bad("body scales must be positive".into());
        }
        Ok(())
    }

    pub fn label(&self) -> Label {
        let perturbed = self.vertical_offset.iter().any(|&o| o != 0.0)
            || self.swing_speed.iter().any(|&s| s != 1.0);
        if perturbed {
            Label::Abnormal
        } else {
            Label::Normal
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Part {
    Ellipsoid { center: [f64; 3], radii: [f64; 3] },
    Leg(usize),
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    part: Part,
    /// Unit direction for ellipsoids; (t along leg, angle around leg, 0) for legs.
    local: [f64; 3],
}

struct Body {
    samples: Vec<Sample>,
    leg_length: f64,
    leg_radius: f64,
    hip_half_width: f64,
}

fn unit_vector<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-9 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

impl Body {
    fn sample<R: Rng + ?Sized>(params: &GaitParams, rng: &mut R) -> Self {
        let s = params.body_scale;
        let w = params.width_scale;
        let leg_length = 0.9 * s;
        // centers are relative to the hip height
        let ellipsoids = [
            ([0.0, 0.0, 0.05 * s], [0.17 * w, 0.11 * w, 0.10 * s], 0.15),
            ([0.0, 0.0, 0.38 * s], [0.19 * w, 0.12 * w, 0.28 * s], 0.35),
            ([0.0, 0.0, 0.76 * s], [0.09 * s, 0.10 * s, 0.12 * s], 0.10),
        ];
        let n = params.points_per_frame;
        let mut samples = Vec::with_capacity(n);
        for (center, radii, share) in ellipsoids {
            let pairs = ((share * n as f64) / 2.0).round() as usize;
            for _ in 0..pairs {
                let d = unit_vector(rng);
                let part = Part::Ellipsoid { center, radii };
                samples.push(Sample { part, local: d });
                samples.push(Sample {
                    part,
                    local: [-d[0], d[1], d[2]],
                });
            }
        }
        let per_leg = (n.saturating_sub(samples.len())) / 2;
        for _ in 0..per_leg {
            let t: f64 = rng.random_range(0.0..=1.0);
            let angle: f64 = rng.random_range(0.0..2.0 * PI);
            samples.push(Sample {
                part: Part::Leg(0),
                local: [t, angle, 0.0],
            });
            // mirror image on the right leg
            samples.push(Sample {
                part: Part::Leg(1),
                local: [t, PI - angle, 0.0],
            });
        }
        Body {
            samples,
            leg_length,
            leg_radius: 0.065 * w,
            hip_half_width: 0.1 * w,
        }
    }
}

/// Leg swing angles at a gait phase.
fn leg_angles(params: &GaitParams, phase: f64) -> [f64; 2] {
    let mut out = [0.0; 2];
    for (side, angle) in out.iter_mut().enumerate() {
        let speed = params.swing_speed[side];
        let lag = (1.0 - speed) * PI / 2.0;
        let offset = if side == 0 { 0.0 } else { PI };
        *angle = params.swing_amplitude[side] * speed * (phase + offset - lag).sin();
    }
    out
}

/// A generated labeled sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct GaitSequence {
    pub clouds: Vec<PointCloud>,
    pub label: Label,
}

pub fn generate_sequence(params: &GaitParams, n_frames: usize) -> Result<GaitSequence> {
    params.validate()?;
    if n_frames == 0 {
        return Err(GaitError::InvalidParams("n_frames must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let body = Body::sample(params, &mut rng);
    let noise = Normal::new(0.0, params.noise_sigma)
        .map_err(|e| GaitError::InvalidParams(e.to_string()))?;
    let jitter = Normal::new(0.0, params.phase_jitter)
        .map_err(|e| GaitError::InvalidParams(e.to_string()))?;

    let mut clouds = Vec::with_capacity(n_frames);
    for frame in 0..n_frames {
        let phase = 2.0 * PI * frame as f64 / params.cycle_length as f64 + jitter.sample(&mut rng);
        let angles = leg_angles(params, phase);
        let lengths = [
            body.leg_length + params.vertical_offset[0],
            body.leg_length + params.vertical_offset[1],
        ];
        let hip_height = (lengths[0] * angles[0].cos()).max(lengths[1] * angles[1].cos());

        let points = body
            .samples
            .iter()
            .map(|s| {
                let p = match s.part {
                    Part::Ellipsoid { center, radii } => [
                        center[0] + radii[0] * s.local[0],
                        center[1] + radii[1] * s.local[1],
                        hip_height + center[2] + radii[2] * s.local[2],
                    ],
                    Part::Leg(side) => {
                        let x_hip = if side == 0 {
                            -body.hip_half_width
                        } else {
                            body.hip_half_width
                        };
                        let (sin_t, cos_t) = angles[side].sin_cos();
                        let along = s.local[0] * lengths[side];
                        let (sin_a, cos_a) = s.local[1].sin_cos();
                        let r = body.leg_radius;
                        // axis direction (0, sin, -cos); cross-section spanned
                        // by x and (0, cos, sin)
                        [
                            x_hip + r * cos_a,
                            along * sin_t + r * sin_a * cos_t,
                            hip_height - along * cos_t + r * sin_a * sin_t,
                        ]
                    }
                };
                let (nx, ny, nz) = if params.noise_sigma > 0.0 {
                    (noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng))
                } else {
                    (0.0, 0.0, 0.0)
                };
                Point3::new(p[0] + nx, p[1] + ny, (p[2] + nz).max(0.0))
            })
            .collect();
        clouds.push(PointCloud::new(points, frame));
    }
    Ok(GaitSequence {
        clouds,
        label: params.label(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(GaitError::Config(format!("unknown split `{other}`"))),
        }
    }
}

/// One sequence of a benchmark, generated on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    pub id: String,
    pub subject: usize,
    pub split: Split,
    pub mode: GaitMode,
    pub params: GaitParams,
    pub n_frames: usize,
}

impl SequenceSpec {
    pub fn label(&self) -> Label {
        self.mode.label()
    }

    pub fn generate(&self) -> Result<GaitSequence> {
        generate_sequence(&self.params, self.n_frames)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub train_subjects: usize,
    pub validation_subjects: usize,
    pub test_subjects: usize,
    /// Normal sequences recorded per subject.
    pub normal_repeats: usize,
    pub frames_per_sequence: usize,
    /// Range of per-subject frames per gait cycle.
    pub cycle_length: RangeInclusive<usize>,
    /// Range of per-subject point counts.
    pub points_per_frame: RangeInclusive<usize>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            train_subjects: 5,
            validation_subjects: 1,
            test_subjects: 4,
            normal_repeats: 2,
            frames_per_sequence: 240,
            cycle_length: 14..=18,
            points_per_frame: 1500..=2200,
            noise_sigma: 0.008,
            seed: 2019,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GaitError::InvalidParams(msg));
        if self.frames_per_sequence == 0 || self.normal_repeats == 0 || self.train_subjects == 0 {
            return bad("benchmark needs frames, normal repeats and training subjects".into());
        }
        if *self.cycle_length.start() < 4 || self.cycle_length.is_empty() {
            return bad(format!("cycle length range {:?} must start at >= 4", self.cycle_length));
        }
        if *self.points_per_frame.start() < 10 || self.points_per_frame.is_empty() {
            return bad(format!("points range {:?} must start at >= 10", self.points_per_frame));
        }
        if !(self.noise_sigma >= 0.0) {
            return bad(format!("noise sigma {} is negative", self.noise_sigma));
        }
        Ok(())
    }
}

/// Subject-disjoint train / validation / test sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub sequences: Vec<SequenceSpec>,
}

impl Benchmark {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &SequenceSpec> {
        self.sequences.iter().filter(move |s| s.split == split)
    }

    /// `sequence_id,label,mode,seed` rows, header first.
    pub fn manifest_csv(&self) -> String {
        let mut out = String::from("sequence_id,label,mode,seed\n");
        for s in &self.sequences {
            out.push_str(&format!(
                "{},{},{},{}\n",
                s.id,
                s.label().as_str(),
                s.mode.name(),
                s.params.seed
            ));
        }
        out
    }

    /// `sequence_id,split,subject,frames` rows, header first.
    pub fn splits_csv(&self) -> String {
        let mut out = String::from("sequence_id,split,subject,frames\n");
        for s in &self.sequences {
            out.push_str(&format!(
                "{},{},{},{}\n",
                s.id,
                s.split.as_str(),
                s.subject,
                s.n_frames
            ));
        }
        out
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn subject_params<R: Rng + ?Sized>(config: &BenchmarkConfig, rng: &mut R) -> GaitParams {
    let amplitude = rng.random_range(0.35..0.45);
    GaitParams {
        points_per_frame: rng.random_range(config.points_per_frame.clone()),
        cycle_length: rng.random_range(config.cycle_length.clone()),
        swing_amplitude: [amplitude, amplitude],
        noise_sigma: config.noise_sigma,
        body_scale: rng.random_range(0.9..1.1),
        width_scale: rng.random_range(0.9..1.15),
        ..GaitParams::default()
    }
}

pub fn benchmark(config: &BenchmarkConfig) -> Result<Benchmark> {
    config.validate()?;
    let splits = std::iter::repeat_n(Split::Train, config.train_subjects)
        .chain(std::iter::repeat_n(Split::Validation, config.validation_subjects))
        .chain(std::iter::repeat_n(Split::Test, config.test_subjects));

    let mut sequences = Vec::new();
    for (subject, split) in splits.enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(subject as u64);
        let base = subject_params(config, &mut rng);
        let mut modes: Vec<(GaitMode, usize)> =
            (0..config.normal_repeats).map(|r| (GaitMode::Normal, r)).collect();
        if split != Split::Train {
            modes.extend(GaitMode::all().into_iter().skip(1).map(|m| (m, 0)));
        }
        for (k, (mode, repeat)) in modes.into_iter().enumerate() {
            let mut params = base.clone();
            mode.apply(&mut params);
            params.seed = splitmix64(config.seed ^ ((subject as u64) << 32 | k as u64));
            let id = match mode {
                GaitMode::Normal => format!("s{subject:02}_normal_{repeat}"),
                _ => format!("s{subject:02}_{}", mode.name()),
            };
            sequences.push(SequenceSpec {
                id,
                subject,
                split,
                mode,
                params,
                n_frames: config.frames_per_sequence,
            });
        }
    }
    Ok(Benchmark { sequences })
}

/// Five training subjects with two normal sequences each (2,400 frames),
/// one validation subject and four test subjects with all nine gait types.
pub fn default_benchmark() -> Benchmark {
    benchmark(&BenchmarkConfig::default()).expect("default benchmark config is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histogram::fit_cylinder;

    #[test]
    fn still_noiseless_body_repeats_exactly() {
        let params = GaitParams {
            swing_amplitude: [0.0, 0.0],
            noise_sigma: 0.0,
            phase_jitter: 0.0,
            points_per_frame: 300,
            ..GaitParams::default()
        };
        let seq = generate_sequence(&params, 5).unwrap();
        for c in &seq.clouds[1..] {
            assert_eq!(c.points, seq.clouds[0].points);
        }
        assert_eq!(seq.label, Label::Normal);
    }

    #[test]
    fn same_seed_same_sequence() {
        let params = GaitParams {
            points_per_frame: 400,
            seed: 77,
            ..GaitParams::default()
        };
        let a = generate_sequence(&params, 6).unwrap();
        let b = generate_sequence(&params, 6).unwrap();
        assert_eq!(a, b);
        let c = generate_sequence(&GaitParams { seed: 78, ..params }, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn symmetric_gait_is_left_right_balanced() {
        let params = GaitParams {
            seed: 5,
            ..GaitParams::default()
        };
        let seq = generate_sequence(&params, params.cycle_length).unwrap();
        let (mut left, mut right) = (0usize, 0usize);
        for cloud in &seq.clouds {
            let cyl = fit_cylinder(cloud).unwrap();
            for p in &cloud.points {
                if p.x < cyl.centroid_xy.0 {
                    left += 1;
                } else {
                    right += 1;
                }
            }
        }
        let ratio = left as f64 / right as f64;
        assert!((ratio - 1.0).abs() < 0.05, "left {left} right {right}");
    }

    #[test]
    fn invalid_params_rejected() {
        let short = GaitParams {
            cycle_length: 3,
            ..GaitParams::default()
        };
        assert!(matches!(generate_sequence(&short, 4), Err(GaitError::InvalidParams(_))));
        assert!(generate_sequence(&GaitParams::default(), 0).is_err());
        let neg = GaitParams {
            swing_amplitude: [-0.1, 0.2],
            ..GaitParams::default()
        };
        assert!(neg.validate().is_err());
    }

    #[test]
    fn perturbations_change_labels() {
        for mode in GaitMode::all() {
            let mut p = GaitParams::default();
            mode.apply(&mut p);
            assert_eq!(p.label(), mode.label());
            assert_eq!(GaitMode::parse(&mode.name()).unwrap(), mode);
        }
        assert_eq!(GaitMode::all().len(), 9);
    }

    #[test]
    fn sole_raises_body_during_stance() {
        let base = GaitParams {
            noise_sigma: 0.0,
            phase_jitter: 0.0,
            points_per_frame: 500,
            seed: 3,
            ..GaitParams::default()
        };
        let mut soled = base.clone();
        GaitMode::Sole {
            side: Side::Left,
            thickness_cm: 10,
        }
        .apply(&mut soled);
        let top = |p: &GaitParams| {
            generate_sequence(p, 1).unwrap().clouds[0]
                .points
                .iter()
                .map(|q| q.z)
                .fold(f64::MIN, f64::max)
        };
        assert!((top(&soled) - top(&base) - 0.10).abs() < 0.02);
    }

    #[test]
    fn benchmark_layout() {
        let b = default_benchmark();
        let train: Vec<_> = b.split(Split::Train).collect();
        assert!(train.iter().all(|s| s.label() == Label::Normal));
        let frames: usize = train.iter().map(|s| s.n_frames).sum();
        assert!(frames >= 2000);
        let subjects = |split| {
            b.split(split)
                .map(|s| s.subject)
                .collect::<std::collections::BTreeSet<_>>()
        };
        let (tr, va, te) = (subjects(Split::Train), subjects(Split::Validation), subjects(Split::Test));
        assert!(tr.is_disjoint(&te) && tr.is_disjoint(&va) && va.is_disjoint(&te));
        assert_eq!(b.split(Split::Test).count(), 4 * 10);
        let ids: std::collections::BTreeSet<_> = b.sequences.iter().map(|s| &s.id).collect();
        assert_eq!(ids.len(), b.sequences.len());
    }

    #[test]
    fn short_cycles_rejected() {
        let config = BenchmarkConfig {
            cycle_length: 3..=6,
            ..BenchmarkConfig::default()
        };
        assert!(matches!(benchmark(&config), Err(GaitError::InvalidParams(_))));
    }
}
