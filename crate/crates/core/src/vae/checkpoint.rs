use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Vae, VaeArch};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HYSTUPVA";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Descriptor {
    arch: VaeArch,
    dtype: String,
    n_params: usize,
}

/// Header (magic, version, descriptor length), JSON descriptor, then the
/// weights little-endian in the network's own precision.
pub fn save_checkpoint<T: Real>(vae: &Vae<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let desc = serde_json::to_vec(&Descriptor {
        arch: vae.arch.clone(),
        dtype: T::DTYPE.to_string(),
        n_params: vae.n_params(),
    })?;
    let mut out = Vec::with_capacity(16 + desc.len() + vae.n_params() * T::BYTES);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(desc.len() as u32).to_le_bytes());
    out.extend_from_slice(&desc);
    for &p in &vae.params {
        p.write_le(&mut out);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a checkpoint written in either precision, converting to `T`.
pub fn load_checkpoint<T: Real>(path: impl AsRef<Path>) -> Result<Vae<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!("{} is not a VAE checkpoint", path.display())));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let len = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let body = bytes
        .get(16..16 + len)
        .ok_or_else(|| Error::Format("truncated checkpoint descriptor".into()))?;
    let desc: Descriptor = serde_json::from_slice(body)?;
    let payload = &bytes[16 + len..];
    let params: Vec<T> = match desc.dtype.as_str() {
        "f32" => read_params::<f32, T>(payload, desc.n_params)?,
        "f64" => read_params::<f64, T>(payload, desc.n_params)?,
        other => return Err(Error::Format(format!("unknown dtype {other:?}"))),
    };
    Vae::from_params(desc.arch, params)
}

fn read_params<S: Real, T: Real>(payload: &[u8], n: usize) -> Result<Vec<T>> {
    if payload.len() != n * S::BYTES {
        return Err(Error::DimensionMismatch(format!(
            "checkpoint payload holds {} bytes, descriptor promises {} {} values",
            payload.len(),
            n,
            S::DTYPE
        )));
    }
    Ok(payload
        .chunks_exact(S::BYTES)
        .map(|c| T::lit(S::read_le(c).as_f64()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Vae<f32> {
        Vae::init(
            VaeArch {
                input_dim: 8,
                z_dim: 2,
                hidden: vec![6],
                leaky_slope: 0.01,
            },
            9,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vae.bin");
        let vae = small();
        save_checkpoint(&vae, &path).unwrap();
        let back: Vae<f32> = load_checkpoint(&path).unwrap();
        assert_eq!(back, vae);
        let x = [0.5f32, -1.0, 0.25, 2.0, 0.0, 1.0, -0.5, 0.1];
        assert_eq!(vae.encode(&x).unwrap(), back.encode(&x).unwrap());
    }

    #[test]
    fn corrupted_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vae.bin");
        save_checkpoint(&small(), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, bytes).unwrap();
        assert!(matches!(load_checkpoint::<f32>(&path), Err(Error::Format(_))));
    }

    #[test]
    fn layout_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vae.bin");
        save_checkpoint(&small(), &path).unwrap();
        let back: Vae<f64> = load_checkpoint(&path).unwrap();
        assert!(back.check_layout(8, 2).is_ok());
        assert!(matches!(back.check_layout(3072, 2), Err(Error::DimensionMismatch(_))));
    }
}
