//! `VSET` dataset files.
//!
//! Little-endian: magic `VSET`, `u32` version (1), `u32` record count, then per
//! record `u32` label, `u8` channels, `u16` length, `u16` height, `u16` width
//! and `c*l*h*w` bytes of 8-bit pixels in `(c, l, h, w)` order.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::Reader;
use crate::tensor::Tensor;

use super::VideoRecord;

pub const VSET_MAGIC: &[u8; 4] = b"VSET";
pub const VSET_VERSION: u32 = 1;

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode_dataset(records: &[VideoRecord]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    buf.extend_from_slice(VSET_MAGIC);
    buf.extend_from_slice(&VSET_VERSION.to_le_bytes());
    let count = u32::try_from(records.len())
        .map_err(|_| Error::Format(format!("{} records exceed the u32 count", records.len())))?;
    buf.extend_from_slice(&count.to_le_bytes());
    for (i, r) in records.iter().enumerate() {
        let [c, l, h, w] = r.dims();
        let label = u32::try_from(r.label).map_err(|_| Error::Format(format!("record {i}: label {}", r.label)))?;
        let ext = |v: usize, what: &str| {
            u16::try_from(v).map_err(|_| Error::Format(format!("record {i}: {what} {v} exceeds 65535")))
        };
        buf.extend_from_slice(&label.to_le_bytes());
        buf.push(c as u8);
        for (v, what) in [(l, "length"), (h, "height"), (w, "width")] {
            buf.extend_from_slice(&ext(v, what)?.to_le_bytes());
        }
        buf.extend(r.frames.data().iter().map(|&v| quantize(v)));
    }
    Ok(buf)
}

pub fn write_dataset(path: &Path, records: &[VideoRecord]) -> Result<()> {
    let bytes = encode_dataset(records)?;
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    f.write_all(&bytes)?;
    f.flush()?;
    Ok(())
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Vec<VideoRecord>> {
    let mut r = Reader::new(bytes);
    let count = r.header(VSET_MAGIC, VSET_VERSION)? as usize;
    let mut out = Vec::with_capacity(count.min(4096));
    for i in 0..count {
        r.record = i;
        let label = r.u32("label")? as usize;
        let c = r.u8("channels")? as usize;
        if c != 1 && c != 3 {
            return Err(Error::Format(format!("record {i}: {c} channels")));
        }
        let l = r.u16("length")? as usize;
        let h = r.u16("height")? as usize;
        let w = r.u16("width")? as usize;
        if l == 0 || h == 0 || w == 0 {
            return Err(Error::Format(format!("record {i}: zero extent {l}x{h}x{w}")));
        }
        let n = c * l * h * w;
        let pixels = r.take(n, "pixels")?;
        let data = pixels.iter().map(|&b| b as f64 / 255.0).collect();
        out.push(VideoRecord::new(label, Tensor::from_vec(&[c, l, h, w], data)?)?);
    }
    if !r.is_done() {
        return Err(Error::Format(format!("trailing bytes after {count} records")));
    }
    Ok(out)
}

pub fn load_dataset(path: &Path) -> Result<Vec<VideoRecord>> {
    decode_dataset(&fs::read(path)?)
}
