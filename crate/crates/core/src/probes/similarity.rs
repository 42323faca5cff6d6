//! Pair features for action similarity: 12 distances between the video
//! descriptors of 4 layers, and per-dimension z-normalization.

use crate::descriptor::{video_descriptors, VideoDescriptor};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::videodata::VideoRecord;

/// Feature types of a pair feature, in block order.
pub const SIMILARITY_LAYERS: [&str; 4] = ["prob", "fc7", "fc6", "pool5"];

pub const DISTANCE_NAMES: [&str; 12] = [
    "dot",
    "cosine",
    "l1",
    "l2",
    "linf",
    "canberra",
    "braycurtis",
    "pearson",
    "chi2",
    "hellinger",
    "intersection",
    "jensen_shannon",
];

pub const PAIR_FEATURE_LEN: usize = 48;

/// Offset added after the min-shift of the distributional measures.
const SHIFT_EPS: f64 = 1e-12;

/// Below this a norm or denominator counts as zero.
const TINY: f64 = 1e-300;

/// Shift by the vector's minimum, add `SHIFT_EPS`, divide by the sum.
fn to_distribution(x: &[f64]) -> Vec<f64> {
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = x.iter().map(|v| v - min + SHIFT_EPS).collect();
    let sum: f64 = shifted.iter().sum();
    shifted.iter().map(|v| v / sum).collect()
}

fn ratio(num: f64, den: f64) -> f64 {
    if den.abs() < TINY {
        0.0
    } else {
        num / den
    }
}

/// The 12 measures in [`DISTANCE_NAMES`] order. Every measure is symmetric
/// bit for bit: each term is computed from commutative operations only.
pub fn pair_distances(x: &[f64], y: &[f64]) -> Result<[f64; 12]> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::ShapeMismatch(format!("pair of {} and {} values", x.len(), y.len())));
    }
    let n = x.len() as f64;
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ny = y.iter().map(|b| b * b).sum::<f64>().sqrt();
    let cosine = ratio(dot, nx * ny);
    let l1: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
    let l2 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let linf = x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let canberra: f64 = x.iter().zip(y).map(|(a, b)| ratio((a - b).abs(), a.abs() + b.abs())).sum();
    let bray = ratio(l1, x.iter().zip(y).map(|(a, b)| a.abs() + b.abs()).sum());
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sx = x.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>().sqrt();
    let sy = y.iter().map(|b| (b - my) * (b - my)).sum::<f64>().sqrt();
    let pearson = ratio(cov, sx * sy);

    let (p, q) = (to_distribution(x), to_distribution(y));
    let chi2 = 0.5 * p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b) / (a + b)).sum::<f64>();
    let bc: f64 = p.iter().zip(&q).map(|(a, b)| a.sqrt() * b.sqrt()).sum();
    let hellinger = (1.0 - bc).max(0.0).sqrt();
    let intersection: f64 = p.iter().zip(&q).map(|(a, b)| a.min(*b)).sum();
    let js = p
        .iter()
        .zip(&q)
        .map(|(a, b)| {
            let m = 0.5 * (a + b);
            0.5 * (a * (a / m).ln() + b * (b / m).ln())
        })
        .sum::<f64>()
        .max(0.0);
    Ok([dot, cosine, l1, l2, linf, canberra, bray, pearson, chi2, hellinger, intersection, js])
}

/// 48 values: [`pair_distances`] of each [`SIMILARITY_LAYERS`] descriptor, type-major.
pub fn pair_feature(a: &[VideoDescriptor], b: &[VideoDescriptor]) -> Result<Vec<f64>> {
    if a.len() != SIMILARITY_LAYERS.len() || b.len() != SIMILARITY_LAYERS.len() {
        return Err(Error::ShapeMismatch(format!(
            "pair feature needs {} descriptors per video, got {} and {}",
            SIMILARITY_LAYERS.len(),
            a.len(),
            b.len()
        )));
    }
    let mut out = Vec::with_capacity(PAIR_FEATURE_LEN);
    for (da, db) in a.iter().zip(b) {
        if da.layer != db.layer {
            return Err(Error::ShapeMismatch(format!("layer `{}` paired with `{}`", da.layer, db.layer)));
        }
        out.extend_from_slice(&pair_distances(&da.values, &db.values)?);
    }
    Ok(out)
}

/// Descriptors of every similarity layer for one video.
pub fn similarity_descriptors(net: &Network, video: &VideoRecord, video_id: usize) -> Result<Vec<VideoDescriptor>> {
    video_descriptors(net, video, &SIMILARITY_LAYERS, video_id)
}

pub fn similarity_features(net: &Network, a: &VideoRecord, b: &VideoRecord) -> Result<Vec<f64>> {
    pair_feature(&similarity_descriptors(net, a, 0)?, &similarity_descriptors(net, b, 1)?)
}

/// Per-dimension standardization fitted on training rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ZNormalizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; `0` marks a constant dimension.
    pub std: Vec<f64>,
}

/// Relative spread below which a dimension counts as constant.
const CONSTANT_TOL: f64 = 1e-12;

pub fn znorm_fit(rows: &[Vec<f64>]) -> Result<ZNormalizer> {
    if rows.len() < 2 {
        return Err(Error::InsufficientData(format!("z-normalization needs at least 2 rows, got {}", rows.len())));
    }
    let dim = super::svm::check_matrix(rows)?;
    let mean = super::svm::mean_of(rows, dim);
    let n = rows.len() as f64;
    let std = (0..dim)
        .map(|j| {
            let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd <= CONSTANT_TOL * mean[j].abs().max(1.0) {
                0.0
            } else {
                sd
            }
        })
        .collect();
    Ok(ZNormalizer { mean, std })
}

pub fn znorm_apply(z: &ZNormalizer, row: &[f64]) -> Result<Vec<f64>> {
    if row.len() != z.mean.len() {
        return Err(Error::ShapeMismatch(format!("row of {} values, normalizer has {}", row.len(), z.mean.len())));
    }
    Ok(row
        .iter()
        .zip(&z.mean)
        .zip(&z.std)
        .map(|((x, m), s)| if *s == 0.0 { 0.0 } else { (x - m) / s })
        .collect())
}
