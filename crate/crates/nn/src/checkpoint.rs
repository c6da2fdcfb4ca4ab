//! Binary parameter files: magic, format version, then a table of named
//! tensors stored as little-endian `f32`. Hyperparameters live in a JSON
//! sidecar next to the binary file.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::{NnError, Params, Tensor};

pub const MAGIC: &[u8; 8] = b"MPLNCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub tensors: Vec<(String, Tensor)>,
    pub meta: serde_json::Value,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

impl Checkpoint {
    pub fn from_params<P: Params>(params: &P, meta: serde_json::Value) -> Self {
        let tensors = params.tensors().into_iter().map(|(n, t)| (n, t.clone())).collect();
        Checkpoint { tensors, meta }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], meta: serde_json::Value) -> Result<Self, NnError> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != MAGIC {
            return Err(bad("wrong magic bytes"));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let count = read_u32(&mut r)? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let len = read_u32(&mut r)? as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name).map_err(|_| bad("truncated name"))?;
            let name = String::from_utf8(name).map_err(|_| bad("name is not utf-8"))?;
            let ndim = read_u32(&mut r)? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                let mut b = [0u8; 8];
                r.read_exact(&mut b).map_err(|_| bad("truncated shape"))?;
                shape.push(u64::from_le_bytes(b) as usize);
            }
            let n: usize = shape.iter().product();
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                let mut b = [0u8; 4];
                r.read_exact(&mut b).map_err(|_| bad("truncated data"))?;
                data.push(f32::from_le_bytes(b) as f64);
            }
            tensors.push((name, Tensor::from_vec(&shape, data)));
        }
        if !r.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(Checkpoint { tensors, meta })
    }

    /// Writes the binary file and its JSON sidecar.
    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        std::fs::File::create(path)?.write_all(&self.to_bytes())?;
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&self.meta)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let bytes = std::fs::read(path)?;
        let meta = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
        Self::from_bytes(&bytes, meta)
    }

    /// Copies tensors named `prefix.*` into `params`, which must have exactly
    /// matching names and shapes.
    pub fn restore_into<P: Params>(&self, prefix: &str, params: &mut P) -> Result<(), NnError> {
        let want = params.tensors().into_iter().map(|(n, t)| (n, t.shape().to_vec())).collect::<Vec<_>>();
        let key = |n: &str| if prefix.is_empty() { n.to_string() } else { format!("{prefix}.{n}") };
        let mut found = Vec::with_capacity(want.len());
        for (name, shape) in &want {
            let full = key(name);
            let t = self.tensors.iter().find(|(n, _)| *n == full).map(|(_, t)| t).ok_or_else(|| bad(&format!("missing tensor {full}")))?;
            if t.shape() != shape.as_slice() {
                return Err(NnError::ShapeMismatch { what: full, expected: shape.clone(), got: t.shape().to_vec() });
            }
            found.push(t.clone());
        }
        for (dst, src) in params.tensors_mut().into_iter().zip(found) {
            *dst = src;
        }
        Ok(())
    }
}

fn read_u32(r: &mut &[u8]) -> Result<u32, NnError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| bad("truncated integer"))?;
    Ok(u32::from_le_bytes(b))
}

fn bad(msg: &str) -> NnError {
    NnError::BadCheckpoint(msg.to_string())
}
