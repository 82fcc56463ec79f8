//! Checkpoint serialization: magic bytes, format version, a JSON metadata
//! block, then per-tensor records (name, rank, dims, row-major f32 LE), with
//! a trailing content hash so corruption is detectable.

use super::model::{ArchConfig, ModelParams};
use super::EncoderError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

const MAGIC: &[u8; 4] = b"CWK1";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Meta {
    arch: ArchConfig,
    vocab_digest: String,
    config_digest: String,
    step: u64,
}

/// Named parameter tensors for both encoders plus the temperature scalar.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub vocab_digest: String,
    pub config_digest: String,
    pub step: u64,
}

impl Checkpoint {
    pub fn new(params: ModelParams, vocab_digest: &str, config_digest: &str, step: u64) -> Self {
        Checkpoint {
            params,
            vocab_digest: vocab_digest.to_string(),
            config_digest: config_digest.to_string(),
            step,
        }
    }
}

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], EncoderError> {
        if self.pos + n > self.buf.len() {
            return Err(EncoderError::Truncated);
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, EncoderError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Serializes the checkpoint. Refuses non-finite tensors.
pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), EncoderError> {
    let mut probe = ckpt.params.clone();
    let mut bad: Option<&'static str> = None;
    let mut tensors: Vec<(&'static str, Vec<usize>, Vec<f64>)> = Vec::new();
    probe.visit_tensors(|entry| {
        if entry.data.iter().any(|x| !x.is_finite()) {
            bad.get_or_insert(entry.name);
        }
        tensors.push((entry.name, entry.dims.clone(), entry.data.to_vec()));
    });
    if let Some(name) = bad {
        return Err(EncoderError::NonFinite(name.to_string()));
    }

    let meta = Meta {
        arch: ckpt.params.arch.clone(),
        vocab_digest: ckpt.vocab_digest.clone(),
        config_digest: ckpt.config_digest.clone(),
        step: ckpt.step,
    };
    let meta_bytes = serde_json::to_vec(&meta).expect("meta serializes");

    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    push_u32(&mut buf, VERSION);
    push_u32(&mut buf, meta_bytes.len() as u32);
    buf.extend_from_slice(&meta_bytes);
    push_u32(&mut buf, tensors.len() as u32);
    for (name, dims, data) in &tensors {
        push_u32(&mut buf, name.len() as u32);
        buf.extend_from_slice(name.as_bytes());
        push_u32(&mut buf, dims.len() as u32);
        for d in dims {
            push_u32(&mut buf, *d as u32);
        }
        for x in data {
            buf.extend_from_slice(&(*x as f32).to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    std::fs::write(path, buf)?;
    Ok(())
}

/// Deserializes and validates a checkpoint. When `expected_vocab_digest` is
/// given, a mismatch is an error: the checkpoint is unusable with that vocab.
pub fn load_checkpoint(
    path: &Path,
    expected_vocab_digest: Option<&str>,
) -> Result<Checkpoint, EncoderError> {
    let buf = std::fs::read(path)?;
    if buf.len() < 32 {
        return Err(EncoderError::Truncated);
    }
    let (body, stored_hash) = buf.split_at(buf.len() - 32);
    let digest = Sha256::digest(body);
    if digest.as_slice() != stored_hash {
        return Err(EncoderError::Truncated);
    }

    let mut r = Reader { buf: body, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(EncoderError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(EncoderError::UnsupportedVersion(version));
    }
    let meta_len = r.u32()? as usize;
    let meta: Meta =
        serde_json::from_slice(r.take(meta_len)?).map_err(|_| EncoderError::Truncated)?;
    if let Some(expected) = expected_vocab_digest {
        if expected != meta.vocab_digest {
            return Err(EncoderError::DigestMismatch {
                expected: expected.to_string(),
                found: meta.vocab_digest.clone(),
            });
        }
    }

    let count = r.u32()? as usize;
    let mut params = ModelParams::init(meta.arch.clone(), 0).zeros_like();
    let mut loaded: std::collections::HashMap<String, (Vec<usize>, Vec<f64>)> =
        std::collections::HashMap::new();
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| EncoderError::Truncated)?;
        let rank = r.u32()? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32()? as usize);
        }
        let n: usize = dims.iter().product::<usize>().max(1);
        let raw = r.take(4 * n)?;
        let mut data = Vec::with_capacity(n);
        for chunk in raw.chunks_exact(4) {
            let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            if !v.is_finite() {
                return Err(EncoderError::NonFinite(name.clone()));
            }
            data.push(f64::from(v));
        }
        loaded.insert(name, (dims, data));
    }
    if r.pos != body.len() {
        return Err(EncoderError::Truncated);
    }

    let mut shape_error: Option<EncoderError> = None;
    let mut missing: Option<String> = None;
    params.visit_tensors(|entry| {
        match loaded.get(entry.name) {
            Some((dims, data)) => {
                if *dims != entry.dims || data.len() != entry.data.len() {
                    shape_error.get_or_insert(EncoderError::ShapeError {
                        expected: format!("{}:{:?}", entry.name, entry.dims),
                        got: format!("{dims:?}"),
                    });
                } else {
                    entry.data.copy_from_slice(data);
                }
            }
            None => {
                missing.get_or_insert(entry.name.to_string());
            }
        }
    });
    if let Some(e) = shape_error {
        return Err(e);
    }
    if let Some(name) = missing {
        return Err(EncoderError::ShapeError {
            expected: name,
            got: "tensor missing from file".to_string(),
        });
    }

    Ok(Checkpoint {
        params,
        vocab_digest: meta.vocab_digest,
        config_digest: meta.config_digest,
        step: meta.step,
    })
}

/// Hex digest of the checkpoint file bytes; used in metrics metadata.
pub fn checkpoint_file_digest(path: &Path) -> Result<String, EncoderError> {
    let buf = std::fs::read(path)?;
    Ok(crate::util::sha256_hex(&buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::model::ArchConfig;

    fn ckpt() -> Checkpoint {
        let params = ModelParams::init(ArchConfig::with_vocab(20), 9);
        Checkpoint::new(params, "vd", "cd", 42)
    }

    fn tensors_equal(a: &ModelParams, b: &ModelParams) -> bool {
        let mut av = Vec::new();
        let mut bv = Vec::new();
        a.clone().visit_tensors(|e| av.push(e.data.to_vec()));
        b.clone().visit_tensors(|e| bv.push(e.data.to_vec()));
        av == bv
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = ckpt();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.bin");
        save_checkpoint(&c, &path).unwrap();
        let loaded = load_checkpoint(&path, Some("vd")).unwrap();
        assert!(tensors_equal(&c.params, &loaded.params));
        assert_eq!(loaded.step, 42);
        assert_eq!(loaded.config_digest, "cd");

        // Saving the loaded params reproduces the identical file.
        let path2 = dir.path().join("ckpt2.bin");
        save_checkpoint(&loaded, &path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn corrupt_last_byte_is_detected() {
        let c = ckpt();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.bin");
        save_checkpoint(&c, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0xff;
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(load_checkpoint(&path, None), Err(EncoderError::Truncated)));
    }

    #[test]
    fn truncated_file_is_detected() {
        let c = ckpt();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.bin");
        save_checkpoint(&c, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 7]).unwrap();
        assert!(matches!(load_checkpoint(&path, None), Err(EncoderError::Truncated)));
    }

    #[test]
    fn vocab_digest_mismatch_is_its_own_error() {
        let c = ckpt();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.bin");
        save_checkpoint(&c, &path).unwrap();
        assert!(matches!(
            load_checkpoint(&path, Some("other")),
            Err(EncoderError::DigestMismatch { .. })
        ));
    }

    #[test]
    fn nan_tensor_is_rejected_on_save() {
        let mut c = ckpt();
        c.params.img_proj_b[0] = f64::NAN;
        let dir = tempfile::tempdir().unwrap();
        let err = save_checkpoint(&c, &dir.path().join("x.bin")).unwrap_err();
        assert!(matches!(err, EncoderError::NonFinite(_)));
    }
}
