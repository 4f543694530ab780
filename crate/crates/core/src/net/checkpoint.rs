//! Binary checkpoint container.
//!
//! All integers little-endian:
//!
//! ```text
//! magic      6 bytes  "EASAL1"
//! version    u32      FORMAT_VERSION
//! meta_len   u32      + meta_len bytes of UTF-8 metadata
//! widths     4 x u32  encoder width plan
//! fusion     u32      fusion hidden width
//! n_params   u32
//! table      n_params x { name_len u16, name, rank u8, rank x u32 dims }
//! payload    f32 values of every parameter, table order, row-major
//! ```

use super::model::{Model, ModelConfig};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"EASAL1";
pub const FORMAT_VERSION: u32 = 1;

fn ckpt_err(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn param_table(model: &Model) -> Vec<(String, Vec<usize>, &[f64])> {
    let mut table = Vec::new();
    for layer in model.layers() {
        table.push((
            format!("{}.weight", layer.name),
            layer.weight.value.shape().to_vec(),
            layer.weight.value.data(),
        ));
        table.push((
            format!("{}.bias", layer.name),
            layer.bias.value.shape().to_vec(),
            layer.bias.value.data(),
        ));
    }
    table
}

/// Serializes parameters at `f32` precision along with free-form metadata.
pub fn save(model: &Model, metadata: &str) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(metadata.len() as u32).to_le_bytes());
    out.extend_from_slice(metadata.as_bytes());
    for w in model.config.widths {
        out.extend_from_slice(&(w as u32).to_le_bytes());
    }
    out.extend_from_slice(&(model.config.fusion_width as u32).to_le_bytes());
    let table = param_table(model);
    out.extend_from_slice(&(table.len() as u32).to_le_bytes());
    for (name, shape, _) in &table {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(shape.len() as u8);
        for &d in shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
    }
    for (_, _, data) in &table {
        for &v in *data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(ckpt_err(format!("truncated file while reading {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }
}

/// Metadata string and model read from a checkpoint.
pub fn load(bytes: &[u8]) -> Result<(Model, String)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r
        .take(MAGIC.len(), "magic bytes")
        .map_err(|_| ckpt_err("file too short to hold the magic bytes"))?;
    if magic != MAGIC {
        return Err(ckpt_err("bad magic bytes: not an EASAL1 checkpoint"));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let meta_len = r.u32("metadata length")? as usize;
    let metadata = std::str::from_utf8(r.take(meta_len, "metadata")?)
        .map_err(|_| ckpt_err("metadata is not UTF-8"))?
        .to_owned();
    let mut widths = [0usize; 4];
    for w in &mut widths {
        *w = r.u32("width plan")? as usize;
    }
    let fusion_width = r.u32("fusion width")? as usize;
    let mut model = Model::skeleton(ModelConfig { widths, fusion_width })?;

    let n = r.u32("parameter count")? as usize;
    let expected = param_table(&model);
    if n != expected.len() {
        return Err(ckpt_err(format!(
            "parameter table has {n} entries, model expects {}",
            expected.len()
        )));
    }
    for (name, shape, _) in &expected {
        let len = r.u16("parameter name length")? as usize;
        let got = std::str::from_utf8(r.take(len, "parameter name")?)
            .map_err(|_| ckpt_err("parameter name is not UTF-8"))?;
        if got != name {
            return Err(ckpt_err(format!("expected parameter {name}, found {got}")));
        }
        let rank = r.take(1, "rank")?[0] as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32("dimension")? as usize);
        }
        if &dims != shape {
            return Err(ckpt_err(format!("parameter {name}: shape {dims:?}, expected {shape:?}")));
        }
    }
    for layer in model.layers_mut() {
        for t in [&mut layer.weight.value, &mut layer.bias.value] {
            for v in t.data_mut() {
                *v = f32::from_le_bytes(r.take(4, "parameter payload")?.try_into().unwrap()) as f64;
            }
        }
    }
    if r.pos != bytes.len() {
        return Err(ckpt_err(format!("{} trailing bytes after payload", bytes.len() - r.pos)));
    }
    Ok((model, metadata))
}
