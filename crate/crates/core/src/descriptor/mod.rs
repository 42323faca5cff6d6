//! Video descriptors: per-clip activations of a named layer, averaged over
//! overlapping clips and L2-normalized. Also clip-averaged video prediction.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::{Network, Reader};
use crate::tensor::Tensor;
use crate::videodata::{center_crop, split_into_clips, VideoRecord, CLIP_LEN};

pub const DESC_MAGIC: &[u8; 4] = b"DESC";
pub const DESC_VERSION: u32 = 1;

/// Frames shared by consecutive extraction clips.
pub const EXTRACTION_OVERLAP: usize = 8;

/// Clips per forward pass during extraction.
const EXTRACT_BATCH: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct VideoDescriptor {
    pub layer: String,
    pub values: Vec<f64>,
    pub video_id: usize,
    /// The averaged activation was all zeros and could not be normalized.
    pub degenerate: bool,
}

impl VideoDescriptor {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Center-crops `clip` (`(c, 16, h, w)`) to the network input.
fn prepare(net: &Network, clip: &Tensor) -> Result<Tensor> {
    let [c, l, h, w] = net.spec().input;
    let d = clip.dims();
    if d.len() != 4 || d[0] != c || d[1] != l {
        return Err(Error::ShapeMismatch(format!(
            "clip {} does not match network input ({c},{l},{h},{w})",
            clip.shape()
        )));
    }
    center_crop(clip, h, w)
}

/// Flattened features of several layers for a set of clips, `[layer][clip][value]`.
/// Layer names resolve to the output of a following ReLU when there is one.
pub fn clip_features(net: &Network, clips: &[Tensor], layers: &[&str]) -> Result<Vec<Vec<Vec<f64>>>> {
    let indices = layers.iter().map(|name| net.spec().feature_layer(name)).collect::<Result<Vec<_>>>()?;
    let last = indices.iter().copied().max().unwrap_or(0);
    let mut out = vec![Vec::with_capacity(clips.len()); layers.len()];
    for chunk in clips.chunks(EXTRACT_BATCH) {
        let prepared = chunk.iter().map(|c| prepare(net, c)).collect::<Result<Vec<_>>>()?;
        let mut dims = vec![prepared.len()];
        dims.extend_from_slice(prepared[0].dims());
        let data: Vec<f64> = prepared.iter().flat_map(|t| t.data().iter().copied()).collect();
        let trace = net.forward_through(&Tensor::from_vec(&dims, data)?, last, false)?;
        for (slot, &li) in out.iter_mut().zip(&indices) {
            let act = trace.output(li);
            for b in 0..prepared.len() {
                slot.push(act.item(b).to_vec());
            }
        }
    }
    Ok(out)
}

/// Flattened activation of `layer` for one center-cropped clip.
pub fn extract_clip_features(net: &Network, clip: &Tensor, layer: &str) -> Result<Vec<f64>> {
    Ok(clip_features(net, std::slice::from_ref(clip), &[layer])?.remove(0).remove(0))
}

/// Mean over clips in slice order, then L2 normalization. An all-zero mean is
/// returned as is and flagged degenerate.
pub fn aggregate(features: &[Vec<f64>]) -> Result<(Vec<f64>, bool)> {
    let first = features.first().ok_or_else(|| Error::InsufficientData("no clip features".into()))?;
    let dim = first.len();
    let mut mean = vec![0.0; dim];
    for f in features {
        if f.len() != dim {
            return Err(Error::ShapeMismatch(format!("clip feature of {} values, expected {dim}", f.len())));
        }
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v;
        }
    }
    let n = features.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    let norm = l2_norm(&mean);
    if norm == 0.0 {
        return Ok((mean, true));
    }
    mean.iter_mut().for_each(|m| *m /= norm);
    Ok((mean, false))
}

/// The overlap-8 extraction clips of a video.
pub fn extraction_clips(video: &VideoRecord) -> Result<Vec<Tensor>> {
    split_into_clips(0, video.length(), CLIP_LEN, EXTRACTION_OVERLAP)?
        .iter()
        .map(|c| video.clip(c.start, CLIP_LEN))
        .collect()
}

/// Descriptors of several layers from a single pass over the video's clips.
pub fn video_descriptors(net: &Network, video: &VideoRecord, layers: &[&str], video_id: usize) -> Result<Vec<VideoDescriptor>> {
    let clips = extraction_clips(video)?;
    clip_features(net, &clips, layers)?
        .iter()
        .zip(layers)
        .map(|(features, layer)| {
            let (values, degenerate) = aggregate(features)?;
            Ok(VideoDescriptor { layer: layer.to_string(), values, video_id, degenerate })
        })
        .collect()
}

pub fn video_descriptor(net: &Network, video: &VideoRecord, layer: &str, video_id: usize) -> Result<VideoDescriptor> {
    Ok(video_descriptors(net, video, &[layer], video_id)?.remove(0))
}

/// Default number of random clips averaged by [`video_predict`].
pub const PREDICT_CLIPS: usize = 10;

/// Mean class distribution over `n_clips` seeded random 16-frame windows.
pub fn video_predict(net: &Network, video: &VideoRecord, n_clips: usize, seed: u64) -> Result<Vec<f64>> {
    let l = video.length();
    if l < CLIP_LEN {
        return Err(Error::InsufficientData(format!("video of {l} frames is shorter than a clip")));
    }
    if n_clips == 0 {
        return Err(Error::InvalidConfig("n_clips must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clips = (0..n_clips)
        .map(|_| video.clip(rng.random_range(0..=l - CLIP_LEN), CLIP_LEN))
        .collect::<Result<Vec<_>>>()?;
    let probs = clip_features(net, &clips, &["prob"])?.remove(0);
    let k = probs[0].len();
    let mut mean = vec![0.0; k];
    for p in &probs {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n_clips as f64);
    Ok(mean)
}

pub fn descriptors_to_csv(descriptors: &[VideoDescriptor]) -> String {
    let mut s = String::new();
    for d in descriptors {
        let _ = write!(s, "{}", d.video_id);
        for v in &d.values {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

pub fn write_descriptors_csv(path: &Path, descriptors: &[VideoDescriptor]) -> Result<()> {
    fs::write(path, descriptors_to_csv(descriptors))?;
    Ok(())
}

/// `DESC` file: magic, `u32` version, `u32` count, `u32` dim, then `count * dim` `f32` values.
pub fn encode_descriptors(descriptors: &[VideoDescriptor]) -> Result<Vec<u8>> {
    let dim = descriptors.first().map_or(0, |d| d.dim());
    if let Some(bad) = descriptors.iter().find(|d| d.dim() != dim) {
        return Err(Error::ShapeMismatch(format!("descriptor of video {} has dim {}, expected {dim}", bad.video_id, bad.dim())));
    }
    let mut buf = Vec::with_capacity(16 + descriptors.len() * dim * 4);
    buf.extend_from_slice(DESC_MAGIC);
    buf.extend_from_slice(&DESC_VERSION.to_le_bytes());
    buf.extend_from_slice(&(descriptors.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(dim as u32).to_le_bytes());
    for d in descriptors {
        for &v in &d.values {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(buf)
}

/// Decodes a `DESC` file into `count` rows of `dim` values.
pub fn decode_descriptors(bytes: &[u8]) -> Result<Vec<Vec<f64>>> {
    let mut r = Reader::new(bytes);
    let count = r.header(DESC_MAGIC, DESC_VERSION)? as usize;
    let dim = r.u32("dim")? as usize;
    let mut rows = Vec::with_capacity(count.min(1 << 16));
    for i in 0..count {
        r.record = i;
        let raw = r.take(dim * 4, "values")?;
        rows.push(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect());
    }
    if !r.is_done() {
        return Err(Error::Format(format!("trailing bytes after {count} descriptors")));
    }
    Ok(rows)
}

pub fn write_descriptors(path: &Path, descriptors: &[VideoDescriptor]) -> Result<()> {
    fs::write(path, encode_descriptors(descriptors)?)?;
    Ok(())
}

pub fn read_descriptors(path: &Path) -> Result<Vec<Vec<f64>>> {
    decode_descriptors(&fs::read(path)?)
}
