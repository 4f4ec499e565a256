//! Binary model format.
//!
//! Little-endian throughout: an 8-byte magic, a `u32` version, then the
//! shape (`chunk_width`, `max_input_bits`, `outputs`, layer count and each
//! hidden width, all `u32`), the init seed and parameter count (`u64`), the
//! parameters as `f64`, and finally an FNV-1a 64 checksum of everything
//! before it.

use alloc::vec::Vec;

use super::network::{LstmNetwork, NetShape};
use super::DrnnError;

pub const MODEL_MAGIC: &[u8; 8] = b"LRNNMDL\0";
pub const MODEL_VERSION: u32 = 1;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn encode_model(net: &LstmNetwork) -> Vec<u8> {
    let shape = net.shape();
    let mut out = Vec::with_capacity(64 + 8 * net.param_count());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    for v in [shape.chunk_width, shape.max_input_bits, shape.outputs, shape.layers()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for &h in &shape.hidden {
        out.extend_from_slice(&(h as u32).to_le_bytes());
    }
    out.extend_from_slice(&net.init_seed().to_le_bytes());
    out.extend_from_slice(&(net.param_count() as u64).to_le_bytes());
    for p in net.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    let sum = fnv1a(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DrnnError> {
        let end = self.pos.checked_add(n).ok_or(DrnnError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(DrnnError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, DrnnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, DrnnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<LstmNetwork, DrnnError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MODEL_MAGIC {
        return Err(DrnnError::BadMagic);
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(DrnnError::UnsupportedVersion(version));
    }
    let chunk_width = r.u32()? as usize;
    let max_input_bits = r.u32()? as usize;
    let outputs = r.u32()? as usize;
    let layers = r.u32()? as usize;
    if !(1..=2).contains(&layers) {
        return Err(DrnnError::InvalidShape(alloc::format!("{layers} layers in model file")));
    }
    let mut hidden = Vec::with_capacity(layers);
    for _ in 0..layers {
        hidden.push(r.u32()? as usize);
    }
    let seed = r.u64()?;
    let count = r.u64()? as usize;
    let shape = NetShape {
        chunk_width,
        max_input_bits,
        hidden,
        outputs,
    };
    shape.validate()?;
    let expected = LstmNetwork::zeros(shape.clone())?.param_count();
    if count != expected {
        return Err(DrnnError::ShapeMismatch(alloc::format!(
            "file holds {count} parameters, shape needs {expected}"
        )));
    }
    let raw = r.take(count.checked_mul(8).ok_or(DrnnError::Truncated)?)?;
    let params = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let body_end = r.pos;
    let stored = r.u64()?;
    if r.pos != bytes.len() {
        return Err(DrnnError::TrailingBytes);
    }
    if stored != fnv1a(&bytes[..body_end]) {
        return Err(DrnnError::ChecksumMismatch);
    }
    LstmNetwork::from_parts(shape, params, seed)
}
