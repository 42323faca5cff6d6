//! Binary PGM/PPM frame dumps.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A decoded 8-bit image, channel-interleaved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
}

/// Min-max normalizes one frame (all channels together) to 0..=255, interleaving
/// channels. A constant frame renders as 128.
pub fn frame_to_bytes(clip: &Tensor, frame: usize) -> Result<Vec<u8>> {
    let [c, l, h, w] = clip_dims(clip)?;
    if frame >= l {
        return Err(Error::InvalidConfig(format!("frame {frame} of a {l}-frame clip")));
    }
    let hw = h * w;
    let value = |ch: usize, p: usize| clip.data()[(ch * l + frame) * hw + p];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for ch in 0..c {
        for p in 0..hw {
            lo = lo.min(value(ch, p));
            hi = hi.max(value(ch, p));
        }
    }
    let mut out = Vec::with_capacity(c * hw);
    for p in 0..hw {
        for ch in 0..c {
            out.push(if hi > lo { ((value(ch, p) - lo) / (hi - lo) * 255.0).round() as u8 } else { 128 });
        }
    }
    Ok(out)
}

fn clip_dims(clip: &Tensor) -> Result<[usize; 4]> {
    let d = clip.dims();
    let d = match d.len() {
        4 => d,
        5 if d[0] == 1 => &d[1..],
        _ => return Err(Error::ShapeMismatch(format!("expected a (c,l,h,w) clip, got {}", clip.shape()))),
    };
    if d[0] != 1 && d[0] != 3 {
        return Err(Error::ShapeMismatch(format!("{} channels cannot be written as PGM/PPM", d[0])));
    }
    Ok([d[0], d[1], d[2], d[3]])
}

/// Writes `frame_0000.pgm` (1 channel) or `.ppm` (3 channels) per frame into `dir`.
pub fn write_image_sequence(clip: &Tensor, dir: &Path) -> Result<Vec<PathBuf>> {
    let [c, l, h, w] = clip_dims(clip)?;
    fs::create_dir_all(dir)?;
    let (magic, ext) = if c == 1 { ("P5", "pgm") } else { ("P6", "ppm") };
    let mut paths = Vec::with_capacity(l);
    for t in 0..l {
        let path = dir.join(format!("frame_{t:04}.{ext}"));
        let mut buf = format!("{magic}\n{w} {h}\n255\n").into_bytes();
        buf.extend(frame_to_bytes(clip, t)?);
        fs::File::create(&path)?.write_all(&buf)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Reads a binary PGM/PPM with maxval 255 and no comments.
pub fn read_image(path: &Path) -> Result<Image> {
    let bytes = fs::read(path)?;
    let bad = |why: &str| Error::Format(format!("{}: {why}", path.display()));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ascii header"))?);
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let channels = match fields[0] {
        "P5" => 1,
        "P6" => 3,
        m => return Err(bad(&format!("unsupported magic {m}"))),
    };
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if maxval != 255 {
        return Err(bad("maxval must be 255"));
    }
    let len = channels * width * height;
    let pixels = bytes.get(pos..pos + len).ok_or_else(|| bad("truncated raster"))?.to_vec();
    Ok(Image { channels, height, width, pixels })
}
