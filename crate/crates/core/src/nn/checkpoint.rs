//! Parameter checkpoints.
//!
//! Layout: 8-byte magic, `u32` version, `u32` manifest length, a JSON
//! manifest (`dtype`, tensor names and shapes, free-form `meta`), then every
//! tensor's values as little-endian reals in manifest order.

use serde::{Deserialize, Serialize};

use super::{NnError, ParamStore, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"BEATSTRM";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    dtype: String,
    tensors: Vec<TensorEntry>,
    meta: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

pub fn save_checkpoint<T: Scalar>(params: &ParamStore<T>, meta: &serde_json::Value) -> Vec<u8> {
    let manifest = Manifest {
        dtype: T::DTYPE.to_string(),
        tensors: params
            .iter()
            .map(|p| TensorEntry { name: p.name.clone(), shape: p.shape.clone() })
            .collect(),
        meta: meta.clone(),
    };
    let json = serde_json::to_vec(&manifest).expect("manifest serialises");
    let mut out = Vec::with_capacity(16 + json.len() + params.num_values() * T::BYTES);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for p in params {
        for &v in &p.data {
            v.write_le(&mut out);
        }
    }
    out
}

fn bad(msg: impl Into<String>) -> NnError {
    NnError::Checkpoint(msg.into())
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    let b = bytes.get(at..at + 4).ok_or_else(|| bad("truncated header"))?;
    Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
}

/// Parses a checkpoint written with the same scalar type.
pub fn load_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<(ParamStore<T>, serde_json::Value)> {
    if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    let version = read_u32(bytes, 8)?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let mlen = read_u32(bytes, 12)? as usize;
    let json = bytes.get(16..16 + mlen).ok_or_else(|| bad("truncated manifest"))?;
    let manifest: Manifest =
        serde_json::from_slice(json).map_err(|e| bad(format!("manifest: {e}")))?;
    if manifest.dtype != T::DTYPE {
        return Err(bad(format!("dtype {} does not match {}", manifest.dtype, T::DTYPE)));
    }
    let mut pos = 16 + mlen;
    let mut store = ParamStore::new();
    for t in manifest.tensors {
        let n: usize = t.shape.iter().product();
        let end = pos + n * T::BYTES;
        let raw = bytes.get(pos..end).ok_or_else(|| bad(format!("{} truncated", t.name)))?;
        let data = raw.chunks_exact(T::BYTES).map(T::read_le).collect();
        store.insert(&t.name, &t.shape, data)?;
        pos = end;
    }
    if pos != bytes.len() {
        return Err(bad(format!("{} trailing bytes", bytes.len() - pos)));
    }
    Ok((store, manifest.meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.insert("w", &[2, 3], vec![1.0, -0.0, f64::MIN_POSITIVE, 1e300, -2.5, 0.1]).unwrap();
        s.insert("b", &[2], vec![3.0, f64::EPSILON]).unwrap();
        s
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = store();
        let meta = serde_json::json!({"model": "identified", "classes": ["a", "b"]});
        let bytes = save_checkpoint(&s, &meta);
        let (back, m) = load_checkpoint::<f64>(&bytes).unwrap();
        assert_eq!(m, meta);
        for (a, b) in s.iter().zip(back.iter()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.shape, b.shape);
            let ab: Vec<u64> = a.data.iter().map(|v| v.to_bits()).collect();
            let bb: Vec<u64> = b.data.iter().map(|v| v.to_bits()).collect();
            assert_eq!(ab, bb);
        }
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let bytes = save_checkpoint(&store(), &serde_json::Value::Null);
        assert!(load_checkpoint::<f64>(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(load_checkpoint::<f64>(&extra).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(load_checkpoint::<f64>(&magic).is_err());
        let mut version = bytes.clone();
        version[8] = 9;
        assert!(load_checkpoint::<f64>(&version).is_err());
        assert!(load_checkpoint::<f32>(&bytes).is_err());
    }
}
