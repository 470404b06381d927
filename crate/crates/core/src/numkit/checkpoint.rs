//! Versioned binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes  b"STINCKPT"
//! version u32      currently 1
//! meta    u64 len + UTF-8 JSON (caller-defined hyperparameter block)
//! count   u64      number of tensor entries
//! entry   u16 name len + name bytes
//!         u8  kind (0 = value, 1 = momentum)
//!         u64 rows, u64 cols
//!         rows*cols f64, row-major, little-endian bit patterns
//! ```
//!
//! Round-trips are byte-exact: save(load(x)) == x for files this module wrote.

use std::fs;
use std::path::Path;

use super::matrix::Matrix;
use super::optim::ParamStore;
use super::{NumError, Result};

const MAGIC: &[u8; 8] = b"STINCKPT";
const VERSION: u32 = 1;

const KIND_VALUE: u8 = 0;
const KIND_MOMENTUM: u8 = 1;

/// A deserialized checkpoint: the metadata block plus a parameter store with
/// values and momentum buffers restored (gradients zeroed).
#[derive(Debug)]
pub struct Checkpoint {
    pub meta_json: String,
    pub store: ParamStore,
}

fn put_matrix(buf: &mut Vec<u8>, name: &str, kind: u8, m: &Matrix) {
    buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
    buf.extend_from_slice(name.as_bytes());
    buf.push(kind);
    buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for &v in m.as_slice() {
        buf.extend_from_slice(&v.to_bits().to_le_bytes());
    }
}

/// Serialize `store` (values + momentum) and a caller-provided JSON metadata
/// block into a byte vector.
pub fn checkpoint_to_bytes(meta_json: &str, store: &ParamStore) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(meta_json.len() as u64).to_le_bytes());
    buf.extend_from_slice(meta_json.as_bytes());
    buf.extend_from_slice(&(2 * store.len() as u64).to_le_bytes());
    for p in store.iter() {
        put_matrix(&mut buf, &p.name, KIND_VALUE, &p.value);
    }
    for p in store.iter() {
        put_matrix(&mut buf, &p.name, KIND_MOMENTUM, &p.momentum);
    }
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(NumError::Checkpoint("truncated file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

/// Parse checkpoint bytes produced by [`checkpoint_to_bytes`].
pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(NumError::Checkpoint("bad magic; not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(NumError::Checkpoint(format!(
            "unsupported version {version} (supported: {VERSION})"
        )));
    }
    let meta_len = r.u64()? as usize;
    let meta_json = String::from_utf8(r.take(meta_len)?.to_vec())
        .map_err(|_| NumError::Checkpoint("metadata is not UTF-8".into()))?;
    let count = r.u64()? as usize;

    let mut store = ParamStore::new();
    let mut momenta: Vec<(String, Matrix)> = Vec::new();
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| NumError::Checkpoint("tensor name is not UTF-8".into()))?;
        let kind = r.u8()?;
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| NumError::Checkpoint("tensor size overflow".into()))?;
        let raw = r.take(n * 8)?;
        let mut data = Vec::with_capacity(n);
        for chunk in raw.chunks_exact(8) {
            data.push(f64::from_bits(u64::from_le_bytes(chunk.try_into().unwrap())));
        }
        let m = Matrix::from_vec(rows, cols, data);
        match kind {
            KIND_VALUE => {
                store.add(name, m)?;
            }
            KIND_MOMENTUM => momenta.push((name, m)),
            k => return Err(NumError::Checkpoint(format!("unknown tensor kind {k}"))),
        }
    }
    for (name, m) in momenta {
        let id = store
            .id_of(&name)
            .ok_or_else(|| NumError::Checkpoint(format!("momentum for unknown tensor {name:?}")))?;
        if store.get(id).value.shape() != m.shape() {
            return Err(NumError::Checkpoint(format!("momentum shape mismatch for {name:?}")));
        }
        store.get_mut(id).momentum = m;
    }
    if r.pos != bytes.len() {
        return Err(NumError::Checkpoint("trailing bytes after last tensor".into()));
    }
    Ok(Checkpoint { meta_json, store })
}

pub fn save_checkpoint(path: &Path, meta_json: &str, store: &ParamStore) -> Result<()> {
    fs::write(path, checkpoint_to_bytes(meta_json, store))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path)?;
    checkpoint_from_bytes(&bytes)
}
