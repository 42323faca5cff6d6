//! `C3DW` weight files.
//!
//! Little-endian layout: magic `C3DW`, `u32` version (1), `u32` record count,
//! then per record `u32` name length, UTF-8 name, `u32` ndim, `ndim` x `u32`
//! extents and the values as `f32`. Records follow spec order with each
//! layer's weight before its bias.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::model::{LayerParams, Network};
use super::spec::NetworkSpec;

pub const WEIGHT_MAGIC: &[u8; 4] = b"C3DW";
pub const WEIGHT_VERSION: u32 = 1;

pub fn encode_weights(net: &Network) -> Vec<u8> {
    let named = net.named_parameters();
    let mut buf = Vec::new();
    buf.extend_from_slice(WEIGHT_MAGIC);
    buf.extend_from_slice(&WEIGHT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(named.len() as u32).to_le_bytes());
    for (name, t) in named {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(t.dims().len() as u32).to_le_bytes());
        for &d in t.dims() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    buf
}

pub fn save_weights(net: &Network, path: &Path) -> Result<()> {
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    f.write_all(&encode_weights(net))?;
    f.flush()?;
    Ok(())
}

/// Little-endian cursor that reports truncation against a record index.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    pub record: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0, record: 0 }
    }

    pub fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::Truncated {
                record: self.record,
                reason: format!("need {n} bytes for {what}, {} left", self.buf.len() - self.pos),
            }
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    pub fn is_done(&self) -> bool {
        self.pos == self.buf.len()
    }

    pub fn header(&mut self, magic: &[u8; 4], version: u32) -> Result<u32> {
        let m = self.take(4, "magic")?;
        if m != magic {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(m),
                String::from_utf8_lossy(magic)
            )));
        }
        let v = self.u32("version")?;
        if v != version {
            return Err(Error::Format(format!("unsupported version {v}, expected {version}")));
        }
        self.u32("record count")
    }
}

pub fn decode_weights(spec: NetworkSpec, bytes: &[u8]) -> Result<Network> {
    let mut r = Reader::new(bytes);
    let count = r.header(WEIGHT_MAGIC, WEIGHT_VERSION)? as usize;
    let mut records = Vec::with_capacity(count.min(1024));
    for i in 0..count {
        r.record = i;
        let len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| Error::Format(format!("record {i}: name is not UTF-8")))?
            .to_string();
        let ndim = r.u32("ndim")? as usize;
        if ndim == 0 || ndim > 5 {
            return Err(Error::Format(format!("record {i} (`{name}`): ndim {ndim}")));
        }
        let dims = (0..ndim).map(|_| r.u32("extent").map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let numel = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .and_then(|n| n.checked_mul(4).map(|_| n))
            .ok_or_else(|| Error::Format(format!("record {i} (`{name}`): extent overflow")))?;
        let raw = r.take(numel * 4, "values")?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        records.push((name, Tensor::from_vec(&dims, data)?));
    }
    if !r.is_done() {
        return Err(Error::Format("trailing bytes after last record".into()));
    }

    let mut records = records.into_iter();
    let mut params = Vec::with_capacity(spec.layers.len());
    for layer in &spec.layers {
        let Some((wd, bd)) = layer.param_dims() else {
            params.push(None);
            continue;
        };
        let mut next = |suffix: &str, dims: &[usize]| -> Result<Tensor> {
            let expected = format!("{}.{suffix}", layer.name);
            let (name, t) = records.next().ok_or_else(|| Error::Layer {
                layer: layer.name.clone(),
                reason: format!("missing record `{expected}`"),
            })?;
            if name != expected {
                return Err(Error::Layer {
                    layer: layer.name.clone(),
                    reason: format!("expected record `{expected}`, found `{name}`"),
                });
            }
            if t.dims() != dims {
                return Err(Error::Layer {
                    layer: layer.name.clone(),
                    reason: format!("shape {} in file, spec expects {dims:?}", t.shape()),
                });
            }
            Ok(t)
        };
        let weight = next("weight", &wd)?;
        let bias = next("bias", &bd)?;
        params.push(Some(LayerParams { weight, bias }));
    }
    if let Some((name, _)) = records.next() {
        return Err(Error::Format(format!("unexpected extra record `{name}`")));
    }
    Network::from_params(spec, params)
}

pub fn load_weights(spec: NetworkSpec, path: &Path) -> Result<Network> {
    decode_weights(spec, &fs::read(path)?)
}
