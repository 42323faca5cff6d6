//! Labelled video volumes, the VSET dataset format, the synthetic
//! MotionBlobs generator, and clip slicing/cropping.

mod motionblobs;
mod vset;

pub use motionblobs::{generate, generate_motionblobs, BlobMode, BlobShape, MotionBlobsConfig};
pub use vset::{decode_dataset, encode_dataset, load_dataset, write_dataset, VSET_MAGIC, VSET_VERSION};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Frames per clip.
pub const CLIP_LEN: usize = 16;

/// A labelled video, frames `(c, l, h, w)` with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoRecord {
    pub label: usize,
    pub frames: Tensor,
}

impl VideoRecord {
    pub fn new(label: usize, frames: Tensor) -> Result<Self> {
        let dims = frames.dims();
        if dims.len() != 4 {
            return Err(Error::ShapeMismatch(format!("video frames must be (c,l,h,w), got {}", frames.shape())));
        }
        if dims[0] != 1 && dims[0] != 3 {
            return Err(Error::InvalidShape(format!("video must have 1 or 3 channels, got {}", dims[0])));
        }
        Ok(VideoRecord { label, frames })
    }

    /// `[c, l, h, w]`
    pub fn dims(&self) -> [usize; 4] {
        let d = self.frames.dims();
        [d[0], d[1], d[2], d[3]]
    }

    pub fn length(&self) -> usize {
        self.dims()[1]
    }

    /// Frames `start..start + len` as a `(c, len, h, w)` tensor.
    pub fn clip(&self, start: usize, len: usize) -> Result<Tensor> {
        let [c, l, h, w] = self.dims();
        if len == 0 || start + len > l {
            return Err(Error::InsufficientData(format!(
                "clip {start}..{} exceeds video length {l}",
                start + len
            )));
        }
        let hw = h * w;
        let mut out = Vec::with_capacity(c * len * hw);
        for ch in 0..c {
            out.extend_from_slice(&self.frames.data()[(ch * l + start) * hw..(ch * l + start + len) * hw]);
        }
        Tensor::from_vec(&[c, len, h, w], out)
    }
}

/// A 16-frame window of one video.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClipIndex {
    pub video: usize,
    pub start: usize,
    pub length: usize,
}

/// Windows starting at 0 with step `clip_len - overlap`; trailing frames that
/// cannot fill a window are dropped.
pub fn split_into_clips(video: usize, length: usize, clip_len: usize, overlap: usize) -> Result<Vec<ClipIndex>> {
    if overlap >= clip_len {
        return Err(Error::InvalidConfig(format!("overlap {overlap} must be below clip length {clip_len}")));
    }
    if length < clip_len {
        return Err(Error::InsufficientData(format!("video of {length} frames is shorter than a {clip_len}-frame clip")));
    }
    let step = clip_len - overlap;
    let count = (length - clip_len) / step + 1;
    Ok((0..count).map(|i| ClipIndex { video, start: i * step, length: clip_len }).collect())
}

/// Spatial window of a `(c, l, h, w)` tensor at offset `(y0, x0)`.
pub fn crop(clip: &Tensor, y0: usize, x0: usize, ch: usize, cw: usize) -> Result<Tensor> {
    let d = clip.dims();
    if d.len() != 4 {
        return Err(Error::ShapeMismatch(format!("crop expects (c,l,h,w), got {}", clip.shape())));
    }
    let [c, l, h, w] = [d[0], d[1], d[2], d[3]];
    if y0 + ch > h || x0 + cw > w || ch == 0 || cw == 0 {
        return Err(Error::InvalidShape(format!("crop {ch}x{cw} at ({y0},{x0}) exceeds frame {h}x{w}")));
    }
    let mut out = Vec::with_capacity(c * l * ch * cw);
    for plane in clip.data().chunks(h * w) {
        for y in y0..y0 + ch {
            out.extend_from_slice(&plane[y * w + x0..y * w + x0 + cw]);
        }
    }
    Tensor::from_vec(&[c, l, ch, cw], out)
}

/// Centered window, offsets `floor((in - crop) / 2)`.
pub fn center_crop(clip: &Tensor, ch: usize, cw: usize) -> Result<Tensor> {
    let d = clip.dims();
    if d.len() != 4 {
        return Err(Error::ShapeMismatch(format!("crop expects (c,l,h,w), got {}", clip.shape())));
    }
    let (h, w) = (d[2], d[3]);
    if ch > h || cw > w {
        return Err(Error::InvalidShape(format!("crop {ch}x{cw} larger than frame {h}x{w}")));
    }
    crop(clip, (h - ch) / 2, (w - cw) / 2, ch, cw)
}

/// Reverses the width axis of a `(c, l, h, w)` tensor.
pub fn flip_horizontal(clip: &Tensor) -> Tensor {
    let w = *clip.dims().last().expect("non-empty shape");
    let mut out = clip.clone();
    for row in out.data_mut().chunks_mut(w) {
        row.reverse();
    }
    out
}

/// Bilinear resize of every frame, channels independent. Sample positions
/// align the corner pixels of input and output.
pub fn resize_frames(video: &VideoRecord, out_h: usize, out_w: usize) -> Result<VideoRecord> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidShape(format!("resize target {out_h}x{out_w}")));
    }
    let [c, l, h, w] = video.dims();
    let coords = |n_out: usize, n_in: usize| -> Vec<(usize, usize, f64)> {
        (0..n_out)
            .map(|i| {
                let src = if n_out == 1 {
                    (n_in - 1) as f64 / 2.0
                } else {
                    i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64
                };
                let lo = (src.floor() as usize).min(n_in - 1);
                let hi = (lo + 1).min(n_in - 1);
                (lo, hi, src - lo as f64)
            })
            .collect()
    };
    let ys = coords(out_h, h);
    let xs = coords(out_w, w);
    let mut out = Vec::with_capacity(c * l * out_h * out_w);
    for plane in video.frames.data().chunks(h * w) {
        for &(y0, y1, fy) in &ys {
            for &(x0, x1, fx) in &xs {
                let top = plane[y0 * w + x0] * (1.0 - fx) + plane[y0 * w + x1] * fx;
                let bottom = plane[y1 * w + x0] * (1.0 - fx) + plane[y1 * w + x1] * fx;
                out.push(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    VideoRecord::new(video.label, Tensor::from_vec(&[c, l, out_h, out_w], out)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(c: usize, l: usize, h: usize, w: usize) -> VideoRecord {
        let data = (0..c * l * h * w)
            .map(|i| {
                let x = i % w;
                let y = (i / w) % h;
                0.1 + 0.01 * x as f64 + 0.02 * y as f64
            })
            .collect();
        VideoRecord::new(0, Tensor::from_vec(&[c, l, h, w], data).unwrap()).unwrap()
    }

    #[test]
    fn clip_starts() {
        let starts = |l, o| -> Vec<usize> {
            split_into_clips(0, l, 16, o).unwrap().iter().map(|c| c.start).collect()
        };
        assert_eq!(starts(32, 8), vec![0, 8, 16]);
        assert_eq!(starts(32, 0), vec![0, 16]);
        assert_eq!(starts(16, 8), vec![0]);
        assert_eq!(starts(39, 8), vec![0, 8, 16]);
        assert!(split_into_clips(0, 32, 16, 16).is_err());
        assert!(split_into_clips(0, 15, 16, 0).is_err());
    }

    #[test]
    fn consecutive_clips_share_overlap() {
        for clip in split_into_clips(0, 57, 16, 8).unwrap().windows(2) {
            assert_eq!(clip[0].start + 16 - clip[1].start, 8);
            assert!(clip[1].start + 16 <= 57);
        }
    }

    #[test]
    fn center_crop_offsets() {
        let v = ramp(1, 1, 128, 171);
        let c = center_crop(&v.frames, 112, 112).unwrap();
        assert_eq!(c.dims(), &[1, 1, 112, 112]);
        // Value at crop origin encodes (x, y) = (29, 8).
        assert!((c.data()[0] - (0.1 + 0.01 * 29.0 + 0.02 * 8.0)).abs() < 1e-12);
        assert_eq!(center_crop(&v.frames, 128, 171).unwrap(), v.frames);
        let small = ramp(1, 1, 100, 100);
        assert!(center_crop(&small.frames, 112, 112).is_err());
    }

    #[test]
    fn flip_is_an_involution() {
        let v = ramp(3, 2, 4, 5);
        let f = flip_horizontal(&v.frames);
        assert_ne!(f, v.frames);
        assert_eq!(flip_horizontal(&f), v.frames);
    }

    #[test]
    fn resize_constant_and_extents() {
        let v = VideoRecord::new(0, Tensor::new(&[3, 2, 40, 60], 0.3).unwrap()).unwrap();
        let r = resize_frames(&v, 128, 171).unwrap();
        assert_eq!(r.dims(), [3, 2, 128, 171]);
        assert!(r.frames.data().iter().all(|&x| (x - 0.3).abs() < 1e-15));
    }

    #[test]
    fn resize_reproduces_linear_ramps() {
        let v = ramp(1, 1, 9, 13);
        let up = resize_frames(&v, 33, 49).unwrap();
        let back = resize_frames(&up, 9, 13).unwrap();
        assert!(back.frames.max_abs_diff(&v.frames) < 1e-6);
    }

    #[test]
    fn clip_bounds() {
        let v = ramp(1, 20, 2, 2);
        assert_eq!(v.clip(4, 16).unwrap().dims(), &[1, 16, 2, 2]);
        assert!(v.clip(5, 16).is_err());
    }
}
