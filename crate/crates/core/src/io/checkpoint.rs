//! Binary field checkpoints.
//!
//! Layout (little-endian): the 8-byte magic `CKNFIELD`, `u32` format version,
//! `u32 d`, `f64 p`, `u8` measure tag (0 probability, 1 surface), `f64 L`,
//! `u32 n_s`, `u32 n_phi`, then `n_s * n_phi` values as `f64` with `s` as the
//! slow index, then a CRC-32 of every preceding byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{build_grid, CylinderGrid, Field, MeasureMode, ProblemParams};

pub const MAGIC: &[u8; 8] = b"CKNFIELD";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 + 8 + 1 + 8 + 4 + 4;

pub fn encode(field: &Field) -> Vec<u8> {
    let g = &*field.grid;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * field.values.len() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(g.params.d as u32).to_le_bytes());
    out.extend_from_slice(&g.params.p.to_le_bytes());
    out.push(g.params.measure_mode.tag());
    out.extend_from_slice(&g.half_length.to_le_bytes());
    out.extend_from_slice(&(g.n_s as u32).to_le_bytes());
    out.extend_from_slice(&(g.n_phi as u32).to_le_bytes());
    for v in &field.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let mut buf = [0u8; N];
        buf.copy_from_slice(&self.bytes[self.pos..self.pos + N]);
        self.pos += N;
        buf
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }

    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }
}

/// Decodes a checkpoint; `path` is used only for error messages.
pub fn decode(bytes: &[u8], path: &Path) -> Result<Field> {
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < HEADER_LEN + 4 {
        return Err(bad(format!("truncated file ({} bytes)", bytes.len())));
    }
    if &bytes[..8] != MAGIC {
        return Err(bad("bad magic".into()));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().expect("4-byte trailer"));
    if crc32fast::hash(body) != stored {
        return Err(bad("checksum mismatch".into()));
    }
    let mut r = Reader { bytes: body, pos: 8 };
    let version = r.u32();
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let d = r.u32() as usize;
    let p = r.f64();
    let tag = r.take::<1>()[0];
    let mode = MeasureMode::from_tag(tag).ok_or_else(|| bad(format!("unknown measure tag {tag}")))?;
    let half_length = r.f64();
    let n_s = r.u32() as usize;
    let n_phi = r.u32() as usize;
    let expected = HEADER_LEN + 8 * n_s * n_phi;
    if body.len() != expected {
        return Err(bad(format!("expected {expected} payload bytes, found {}", body.len())));
    }
    let values: Vec<f64> = (0..n_s * n_phi).map(|_| r.f64()).collect();
    let params = ProblemParams::new(d, p, 1.0, mode)?;
    let grid = Arc::new(build_grid(half_length, n_s, n_phi, params)?);
    Ok(Field { grid, values })
}

pub fn save(path: &Path, field: &Field) -> Result<()> {
    super::write_atomic(path, &encode(field))
}

pub fn load(path: &Path) -> Result<Field> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

/// Where branch fields are kept: a directory of `<id>.ckpt` files or memory.
#[derive(Debug)]
pub enum CheckpointStore {
    Disk(PathBuf),
    Memory(BTreeMap<String, Field>),
}

impl CheckpointStore {
    pub fn in_memory() -> Self {
        CheckpointStore::Memory(BTreeMap::new())
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(CheckpointStore::Disk(dir))
    }

    pub fn path_of(&self, id: &str) -> Option<PathBuf> {
        match self {
            CheckpointStore::Disk(dir) => Some(dir.join(format!("{id}.ckpt"))),
            CheckpointStore::Memory(_) => None,
        }
    }

    pub fn put(&mut self, id: &str, field: &Field) -> Result<()> {
        match self {
            CheckpointStore::Disk(dir) => save(&dir.join(format!("{id}.ckpt")), field),
            CheckpointStore::Memory(map) => {
                map.insert(id.to_string(), field.clone());
                Ok(())
            }
        }
    }

    pub fn get(&self, id: &str) -> Result<Field> {
        match self {
            CheckpointStore::Disk(dir) => load(&dir.join(format!("{id}.ckpt"))),
            CheckpointStore::Memory(map) => map.get(id).cloned().ok_or_else(|| Error::Format {
                path: PathBuf::from(id),
                reason: "no such checkpoint".into(),
            }),
        }
    }
}

/// Grid equality ignoring the interpolation exponent.
pub fn same_grid(a: &CylinderGrid, b: &CylinderGrid) -> bool {
    a.params.d == b.params.d
        && a.params.p == b.params.p
        && a.params.measure_mode == b.params.measure_mode
        && a.half_length == b.half_length
        && a.n_s == b.n_s
        && a.n_phi == b.n_phi
}
