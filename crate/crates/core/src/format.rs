//! Little-endian binary formats for stores, embedding tables, and models.
//!
//! | format | header | payload |
//! |--------|--------|---------|
//! | AMEM | `"AMEM"`, u8 version (1), u8 dtype (1 = f32), u16 rank, rank × u32 dims, `N` first | row-major f32, item-contiguous |
//! | AEMB | `"AEMB"`, u8 version (1), u32 `N`, u32 `e` | f32, embedding-contiguous |
//! | AMDL | `"AMDL"`, u8 version, u32 layer count | per layer: u32 out, u32 in, [u8 activation], f32 weights (row-major), f32 biases |
//!
//! AMDL version 1 carries no activation byte and loads with ReLU hidden layers
//! and a linear output; version 2 (written by [`encode_amdl`]) stores one
//! activation code per layer.
//!
//! Values are computed at 64-bit and stored at 32-bit, so a save/load cycle of
//! an f32-representable store is lossless.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::memory::MemoryStore;
use crate::nn::{Activation, Mlp};
use crate::vector::Shape;

pub const AMEM_MAGIC: [u8; 4] = *b"AMEM";
pub const AEMB_MAGIC: [u8; 4] = *b"AEMB";
pub const AMDL_MAGIC: [u8; 4] = *b"AMDL";
pub const AMEM_VERSION: u8 = 1;
pub const AEMB_VERSION: u8 = 1;
pub const AMDL_VERSION: u8 = 2;
pub const DTYPE_F32: u8 = 1;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::DimensionOverflow)?;
        if end > self.bytes.len() {
            return Err(Error::Truncated {
                expected: end,
                found: self.bytes.len(),
            });
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let found: [u8; 4] = self.take(4)?.try_into().expect("four bytes");
        if found != expected {
            return Err(Error::BadMagic { expected, found });
        }
        Ok(())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("two bytes")))
    }

    fn u32(&mut self) -> Result<usize> {
        let v = u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes"));
        usize::try_from(v).map_err(|_| Error::DimensionOverflow)
    }

    /// Reads `count` f32 values, checking the remaining length up front so a
    /// short file reports the full expected size.
    fn f32s(&mut self, count: usize) -> Result<Vec<f64>> {
        let bytes = count.checked_mul(4).ok_or(Error::DimensionOverflow)?;
        let expected = self.pos.checked_add(bytes).ok_or(Error::DimensionOverflow)?;
        if expected > self.bytes.len() {
            return Err(Error::Truncated {
                expected,
                found: self.bytes.len(),
            });
        }
        let raw = self.take(bytes)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("four bytes")) as f64)
            .collect())
    }

    fn finish(self) -> Result<()> {
        match self.bytes.len() - self.pos {
            0 => Ok(()),
            n => Err(Error::TrailingBytes(n)),
        }
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::DimensionOverflow)?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_f32s(out: &mut Vec<u8>, values: &[f64]) {
    out.reserve(values.len() * 4);
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

fn checked_product(dims: &[usize]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or(Error::DimensionOverflow)
}

/// Serializes a store. Shaped stores are written with rank 4 (`N, C, H, W`),
/// others with rank 2 (`N, d`).
pub fn encode_amem(store: &MemoryStore) -> Result<Vec<u8>> {
    let dims: Vec<usize> = match store.shape() {
        Some(s) => vec![store.len(), s.channels, s.height, s.width],
        None => vec![store.len(), store.dim()],
    };
    let mut out = Vec::with_capacity(8 + 4 * dims.len() + 4 * store.as_slice().len());
    out.extend_from_slice(&AMEM_MAGIC);
    out.push(AMEM_VERSION);
    out.push(DTYPE_F32);
    out.extend_from_slice(&(dims.len() as u16).to_le_bytes());
    for &d in &dims {
        put_u32(&mut out, d)?;
    }
    put_f32s(&mut out, store.as_slice());
    Ok(out)
}

/// Parses an AMEM buffer. Rank 3 (`N, H, W`) is read as single-channel images.
pub fn decode_amem(bytes: &[u8]) -> Result<MemoryStore> {
    let mut r = Reader::new(bytes);
    r.magic(AMEM_MAGIC)?;
    let version = r.u8()?;
    if version != AMEM_VERSION {
        return Err(Error::Unsupported {
            what: "AMEM version",
            value: version.into(),
        });
    }
    let dtype = r.u8()?;
    if dtype != DTYPE_F32 {
        return Err(Error::Unsupported {
            what: "AMEM dtype",
            value: dtype.into(),
        });
    }
    let rank = r.u16()? as usize;
    if !(2..=4).contains(&rank) {
        return Err(Error::Unsupported {
            what: "AMEM rank",
            value: rank as u32,
        });
    }
    let dims = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    if dims[0] == 0 {
        return Err(Error::Empty("AMEM header declares N = 0"));
    }
    if dims[1..].contains(&0) {
        return Err(Error::Empty("AMEM header declares a zero item dimension"));
    }
    let dim = checked_product(&dims[1..])?;
    let total = dim.checked_mul(dims[0]).ok_or(Error::DimensionOverflow)?;
    let data = r.f32s(total)?;
    r.finish()?;
    let store = MemoryStore::from_flat(dim, dims[0], data)?;
    match rank {
        4 => store.with_shape(Shape::new(dims[1], dims[2], dims[3])?),
        3 => store.with_shape(Shape::new(1, dims[1], dims[2])?),
        _ => Ok(store),
    }
}

/// Serializes an embedding table (`e × N`, column-contiguous).
pub fn encode_aemb(table: &MemoryStore) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(13 + 4 * table.as_slice().len());
    out.extend_from_slice(&AEMB_MAGIC);
    out.push(AEMB_VERSION);
    put_u32(&mut out, table.len())?;
    put_u32(&mut out, table.dim())?;
    put_f32s(&mut out, table.as_slice());
    Ok(out)
}

pub fn decode_aemb(bytes: &[u8]) -> Result<MemoryStore> {
    let mut r = Reader::new(bytes);
    r.magic(AEMB_MAGIC)?;
    let version = r.u8()?;
    if version != AEMB_VERSION {
        return Err(Error::Unsupported {
            what: "AEMB version",
            value: version.into(),
        });
    }
    let n = r.u32()?;
    let e = r.u32()?;
    if n == 0 {
        return Err(Error::Empty("AEMB header declares N = 0"));
    }
    if e == 0 {
        return Err(Error::Empty("AEMB header declares e = 0"));
    }
    let total = n.checked_mul(e).ok_or(Error::DimensionOverflow)?;
    let data = r.f32s(total)?;
    r.finish()?;
    MemoryStore::from_flat(e, n, data)
}

/// Serializes a model as AMDL version 2.
pub fn encode_amdl(model: &Mlp) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(9 + 9 * model.layer_count() + 4 * model.num_params());
    out.extend_from_slice(&AMDL_MAGIC);
    out.push(AMDL_VERSION);
    put_u32(&mut out, model.layer_count())?;
    let dims = model.dims();
    for l in 0..model.layer_count() {
        put_u32(&mut out, dims[l + 1])?;
        put_u32(&mut out, dims[l])?;
        out.push(model.activations()[l].code());
        put_f32s(&mut out, model.weights(l));
        put_f32s(&mut out, model.bias(l));
    }
    Ok(out)
}

pub fn decode_amdl(bytes: &[u8]) -> Result<Mlp> {
    let mut r = Reader::new(bytes);
    r.magic(AMDL_MAGIC)?;
    let version = r.u8()?;
    if version != 1 && version != 2 {
        return Err(Error::Unsupported {
            what: "AMDL version",
            value: version.into(),
        });
    }
    let layers = r.u32()?;
    if layers == 0 {
        return Err(Error::Empty("AMDL header declares zero layers"));
    }
    let mut dims: Vec<usize> = Vec::with_capacity(layers + 1);
    let mut acts = Vec::with_capacity(layers);
    let mut params = Vec::new();
    for l in 0..layers {
        let out_dim = r.u32()?;
        let in_dim = r.u32()?;
        if out_dim == 0 || in_dim == 0 {
            return Err(Error::Empty("AMDL layer with zero width"));
        }
        match dims.last() {
            None => dims.push(in_dim),
            Some(&prev) if prev != in_dim => {
                return Err(Error::DimensionMismatch {
                    expected: prev,
                    actual: in_dim,
                })
            }
            Some(_) => {}
        }
        dims.push(out_dim);
        acts.push(if version == 1 {
            if l + 1 == layers {
                Activation::Linear
            } else {
                Activation::Relu
            }
        } else {
            Activation::from_code(r.u8()?)?
        });
        let count = out_dim
            .checked_mul(in_dim)
            .and_then(|w| w.checked_add(out_dim))
            .ok_or(Error::DimensionOverflow)?;
        params.extend(r.f32s(count)?);
    }
    r.finish()?;
    Mlp::from_params(&dims, &acts, params)
}

pub fn save_dataset(store: &MemoryStore, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_amem(store)?)?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<MemoryStore> {
    decode_amem(&fs::read(path)?)
}

pub fn save_embeddings(table: &MemoryStore, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_aemb(table)?)?;
    Ok(())
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<MemoryStore> {
    decode_aemb(&fs::read(path)?)
}

pub fn save_model(model: &Mlp, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_amdl(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Mlp> {
    decode_amdl(&fs::read(path)?)
}
