//! MotionBlobs: soft-edged shapes drifting across a toroidal frame.
//!
//! In `Motion` mode the class is the drift direction. Shapes, intensities,
//! start positions and speeds come from the same draws for every class, and
//! trajectories are centred on the middle frame, so the class for direction
//! `theta + pi` is exactly the time reversal of the class for `theta`. With
//! wrap-around, every single frame has the same distribution in every class.
//!
//! In `Appearance` mode the class is the blob shape and the motion is random.

use std::f64::consts::PI;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::vset::write_dataset;
use super::VideoRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlobMode {
    Motion,
    Appearance,
}

impl FromStr for BlobMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "motion" => Ok(BlobMode::Motion),
            "appearance" => Ok(BlobMode::Appearance),
            other => Err(Error::InvalidConfig(format!("unknown blob mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlobShape {
    Disk,
    Square,
    Diamond,
    Plus,
    Cross,
    Ring,
    Triangle,
    Bar,
}

impl BlobShape {
    pub const ALL: [BlobShape; 8] = [
        BlobShape::Disk,
        BlobShape::Square,
        BlobShape::Diamond,
        BlobShape::Plus,
        BlobShape::Cross,
        BlobShape::Ring,
        BlobShape::Triangle,
        BlobShape::Bar,
    ];

    /// Gauge distance in pixels: the shape of radius `r` is `{gauge <= r}`.
    fn gauge(self, dx: f64, dy: f64, r: f64) -> f64 {
        let (ax, ay) = (dx.abs(), dy.abs());
        match self {
            BlobShape::Disk => dx.hypot(dy),
            BlobShape::Square => ax.max(ay),
            BlobShape::Diamond => 0.75 * (ax + ay),
            BlobShape::Plus => ax.max(3.0 * ay).min((3.0 * ax).max(ay)),
            BlobShape::Cross => {
                let (u, v) = (((dx + dy) / 2f64.sqrt()).abs(), ((dx - dy) / 2f64.sqrt()).abs());
                u.max(3.0 * v).min((3.0 * u).max(v))
            }
            BlobShape::Ring => r + ((dx.hypot(dy) - 0.65 * r).abs() - 0.35 * r),
            BlobShape::Triangle => {
                let s = 3f64.sqrt();
                2.0 * (-dy).max((s * dx + dy) / 2.0).max((-s * dx + dy) / 2.0)
            }
            BlobShape::Bar => ax.max(3.0 * ay),
        }
    }

    /// Soft coverage in `[0, 1]` with a one-pixel edge ramp.
    fn coverage(self, dx: f64, dy: f64, r: f64) -> f64 {
        (r + 0.5 - self.gauge(dx, dy, r)).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MotionBlobsConfig {
    pub mode: BlobMode,
    pub classes: usize,
    pub videos_per_class: usize,
    pub channels: usize,
    pub length: usize,
    pub height: usize,
    pub width: usize,
    /// Inclusive range of blobs per video.
    pub blob_count: (usize, usize),
    pub blob_radius: (f64, f64),
    /// Pixels per frame.
    pub speed: (f64, f64),
    /// Standard deviation of additive Gaussian pixel noise.
    pub noise: f64,
    /// Rotation of the direction set, radians.
    pub angle_offset: f64,
    pub seed: u64,
}

impl Default for MotionBlobsConfig {
    fn default() -> Self {
        MotionBlobsConfig {
            mode: BlobMode::Motion,
            classes: 8,
            videos_per_class: 50,
            channels: 3,
            length: 32,
            height: 128,
            width: 171,
            blob_count: (1, 3),
            blob_radius: (6.0, 12.0),
            speed: (2.0, 4.0),
            noise: 0.05,
            angle_offset: 0.0,
            seed: 0,
        }
    }
}

impl MotionBlobsConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.mode == BlobMode::Motion && self.classes % 2 != 0 {
            return bad(format!("motion mode needs an even class count for reversal pairs, got {}", self.classes));
        }
        if self.mode == BlobMode::Appearance && self.classes > BlobShape::ALL.len() {
            return bad(format!("appearance mode supports at most {} classes", BlobShape::ALL.len()));
        }
        if self.channels != 1 && self.channels != 3 {
            return bad(format!("channels must be 1 or 3, got {}", self.channels));
        }
        if self.length == 0 || self.height == 0 || self.width == 0 {
            return bad("frame geometry must be positive".into());
        }
        if self.length > u16::MAX as usize || self.height > u16::MAX as usize || self.width > u16::MAX as usize {
            return bad("frame geometry exceeds 65535".into());
        }
        let (r0, r1) = self.blob_radius;
        if !(r0 > 0.0 && r0 <= r1) {
            return bad(format!("blob radius range {r0}..{r1}"));
        }
        if 2.0 * self.margin(r1, self.speed.1) > self.height.min(self.width) as f64 {
            return bad(format!(
                "blob radius {r1} does not fit a {}x{} frame",
                self.height, self.width
            ));
        }
        let (c0, c1) = self.blob_count;
        if c0 == 0 || c0 > c1 {
            return bad(format!("blob count range {c0}..={c1}"));
        }
        let (s0, s1) = self.speed;
        if !(s0 >= 0.0 && s0 <= s1) {
            return bad(format!("speed range {s0}..{s1}"));
        }
        if !(self.noise >= 0.0) {
            return bad(format!("noise {}", self.noise));
        }
        Ok(())
    }

    /// Distance a blob centre keeps from the frame border. Appearance-mode
    /// trajectories stay inside the frame so shapes are never cut by the wrap.
    fn margin(&self, radius: f64, speed: f64) -> f64 {
        match self.mode {
            BlobMode::Motion => radius + 1.0,
            BlobMode::Appearance => radius + 1.0 + speed * (self.length as f64 - 1.0) / 2.0,
        }
    }

    /// Unit drift direction `(dx, dy)` of a motion-mode class.
    pub fn direction(&self, class: usize) -> (f64, f64) {
        let theta = 2.0 * PI * class as f64 / self.classes as f64 + self.angle_offset;
        (theta.cos(), theta.sin())
    }

    /// Class whose videos are the time reversal of `class`'s.
    pub fn reversal_of(&self, class: usize) -> usize {
        (class + self.classes / 2) % self.classes
    }
}

struct Blob {
    shape: BlobShape,
    radius: f64,
    color: [f64; 3],
    center: (f64, f64),
}

/// Signed offset on a circle of circumference `n`, in `[-n/2, n/2)`.
fn wrap(d: f64, n: f64) -> f64 {
    (d + n / 2.0).rem_euclid(n) - n / 2.0
}

fn render(cfg: &MotionBlobsConfig, blobs: &[Blob], velocity: (f64, f64), rng: &mut ChaCha8Rng) -> Tensor {
    let [c, l, h, w] = [cfg.channels, cfg.length, cfg.height, cfg.width];
    let mid = (l as f64 - 1.0) / 2.0;
    let noise = Normal::new(0.0, cfg.noise.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let mut data = vec![0.0; c * l * h * w];
    for t in 0..l {
        let shift = t as f64 - mid;
        for ch in 0..c {
            let plane = &mut data[(ch * l + t) * h * w..][..h * w];
            for (i, px) in plane.iter_mut().enumerate() {
                let (y, x) = ((i / w) as f64, (i % w) as f64);
                let mut v: f64 = 0.0;
                for b in blobs {
                    let cx = b.center.0 + shift * velocity.0;
                    let cy = b.center.1 + shift * velocity.1;
                    let dx = wrap(x - cx, w as f64);
                    let dy = wrap(y - cy, h as f64);
                    v = v.max(b.color[ch] * b.shape.coverage(dx, dy, b.radius));
                }
                *px = v;
            }
        }
    }
    if cfg.noise > 0.0 {
        for px in &mut data {
            *px += noise.sample(rng);
        }
    }
    // Quantize to the stored 8-bit grid.
    for px in &mut data {
        *px = (px.clamp(0.0, 1.0) * 255.0).round() / 255.0;
    }
    Tensor::from_vec(&[c, l, h, w], data).expect("consistent geometry")
}

/// Generates the dataset in memory, class-major and balanced.
pub fn generate(cfg: &MotionBlobsConfig) -> Result<Vec<VideoRecord>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.classes * cfg.videos_per_class);
    for class in 0..cfg.classes {
        for j in 0..cfg.videos_per_class {
            // Content depends on the video index only, so the j-th video of
            // every class shares its draws. Noise gets its own stream.
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(1 + j as u64);
            let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            noise_rng.set_stream(((class as u64 + 1) << 32) | j as u64);
            let count = rng.random_range(cfg.blob_count.0..=cfg.blob_count.1);
            let speed = rng.random_range(cfg.speed.0..=cfg.speed.1);
            let random_theta = rng.random_range(0.0..2.0 * PI);
            let mut blobs = Vec::with_capacity(count);
            for _ in 0..count {
                let shape_pick = rng.random_range(0..BlobShape::ALL.len());
                let radius = rng.random_range(cfg.blob_radius.0..=cfg.blob_radius.1);
                let gray = rng.random_range(0.5..1.0);
                let mut color = [gray; 3];
                if cfg.channels == 3 {
                    for c in &mut color {
                        *c = rng.random_range(0.4..1.0);
                    }
                }
                let center = match cfg.mode {
                    BlobMode::Motion => (rng.random_range(0.0..cfg.width as f64), rng.random_range(0.0..cfg.height as f64)),
                    BlobMode::Appearance => {
                        let m = cfg.margin(radius, speed);
                        let (w, h) = (cfg.width as f64 - 1.0, cfg.height as f64 - 1.0);
                        (rng.random_range(m.min(w / 2.0)..=(w - m).max(w / 2.0)), rng.random_range(m.min(h / 2.0)..=(h - m).max(h / 2.0)))
                    }
                };
                let shape = match cfg.mode {
                    BlobMode::Motion => BlobShape::ALL[shape_pick],
                    BlobMode::Appearance => BlobShape::ALL[class],
                };
                blobs.push(Blob { shape, radius, color, center });
            }
            let (dx, dy) = match cfg.mode {
                BlobMode::Motion => cfg.direction(class),
                BlobMode::Appearance => (random_theta.cos(), random_theta.sin()),
            };
            let frames = render(cfg, &blobs, (speed * dx, speed * dy), &mut noise_rng);
            out.push(VideoRecord::new(class, frames)?);
        }
    }
    Ok(out)
}

/// Generates the dataset and writes it as a VSET file. Returns the record count.
pub fn generate_motionblobs(cfg: &MotionBlobsConfig, path: &Path) -> Result<usize> {
    let records = generate(cfg)?;
    write_dataset(path, &records)?;
    Ok(records.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mode: BlobMode) -> MotionBlobsConfig {
        MotionBlobsConfig {
            mode,
            classes: 8,
            videos_per_class: 3,
            channels: 1,
            length: 16,
            height: 20,
            width: 24,
            blob_count: (1, 2),
            blob_radius: (2.0, 4.0),
            speed: (1.0, 1.5),
            noise: 0.0,
            angle_offset: 0.0,
            seed: 7,
        }
    }

    fn reversed(t: &Tensor) -> Tensor {
        let [c, l, h, w] = [t.dims()[0], t.dims()[1], t.dims()[2], t.dims()[3]];
        let mut out = t.clone();
        for ch in 0..c {
            for f in 0..l {
                let src = &t.data()[(ch * l + f) * h * w..][..h * w];
                out.data_mut()[(ch * l + (l - 1 - f)) * h * w..][..h * w].copy_from_slice(src);
            }
        }
        out
    }

    #[test]
    fn balanced_and_deterministic() {
        let cfg = small(BlobMode::Motion);
        let a = generate(&cfg).unwrap();
        assert_eq!(a.len(), 24);
        for class in 0..8 {
            assert_eq!(a.iter().filter(|r| r.label == class).count(), 3);
        }
        assert_eq!(a, generate(&cfg).unwrap());
        assert!(a.iter().all(|r| r.frames.data().iter().all(|&v| (0.0..=1.0).contains(&v))));
    }

    #[test]
    fn reversal_pairs_are_time_reversed() {
        // Without noise, the j-th video of class k+4 is the j-th video of class k played backwards.
        let cfg = small(BlobMode::Motion);
        let data = generate(&cfg).unwrap();
        for class in 0..4 {
            let partner = cfg.reversal_of(class);
            for j in 0..3 {
                let a = &data[class * 3 + j].frames;
                let b = &data[partner * 3 + j].frames;
                assert!(reversed(a).max_abs_diff(b) < 1.5 / 255.0, "class {class} video {j}");
            }
        }
    }

    #[test]
    fn motion_classes_share_appearance_draws() {
        let cfg = small(BlobMode::Motion);
        let data = generate(&cfg).unwrap();
        // Same draws in every class: the frame half a step from the trajectory
        // centre holds the same blobs, so total intensity agrees up to edge sampling.
        let l = cfg.length;
        let hw = cfg.height * cfg.width;
        let sums: Vec<f64> = (0..8)
            .map(|c| data[c * 3].frames.data()[(l / 2) * hw..(l / 2 + 1) * hw].iter().sum::<f64>())
            .collect();
        for s in &sums[1..] {
            assert!((s - sums[0]).abs() / sums[0] < 0.1);
        }
    }

    #[test]
    fn appearance_class_is_shape() {
        let cfg = MotionBlobsConfig { speed: (0.0, 0.3), ..small(BlobMode::Appearance) };
        let data = generate(&cfg).unwrap();
        assert_eq!(data.len(), 24);
        assert!(generate(&MotionBlobsConfig { classes: 9, ..cfg.clone() }).is_err());
    }

    #[test]
    fn invalid_geometry() {
        let cfg = MotionBlobsConfig { blob_radius: (2.0, 12.0), ..small(BlobMode::Motion) };
        assert!(matches!(generate(&cfg), Err(Error::InvalidConfig(_))));
        let odd = MotionBlobsConfig { classes: 7, ..small(BlobMode::Motion) };
        assert!(generate(&odd).is_err());
    }

    #[test]
    fn wrap_offsets() {
        assert_eq!(wrap(9.0, 10.0), -1.0);
        assert_eq!(wrap(-6.0, 10.0), 4.0);
        assert_eq!(wrap(3.0, 10.0), 3.0);
    }
}
