//! Binary checkpoint container.
//!
//! Layout, all integers and floats little-endian:
//!
//! | field          | type             |
//! |----------------|------------------|
//! | magic          | 8 bytes `PRPHCKPT` |
//! | version        | u32              |
//! | vocab_size, d_model, n_heads, n_layers, d_ffn, max_len | 6 × u32 |
//! | dropout        | f64              |
//! | vocabulary hash| 32 bytes (SHA-256 of the vocabulary text) |
//! | best epoch     | u32              |
//! | valid perplexity | f64            |
//! | parameter count| u64              |
//! | parameters     | count × f64, in [`ParamLayout`](super::ParamLayout) order |
//! | checksum       | 32 bytes, SHA-256 of everything above |

use std::path::Path;

use sha2::{Digest, Sha256};

use super::{Model, ModelConfig};
use crate::corpus::Vocabulary;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PRPHCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model<f64>,
    pub vocab_hash: [u8; 32],
    pub epoch: usize,
    pub valid_perplexity: f64,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint("file is truncated".into()));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let cfg = self.model.config();
        let params = self.model.params();
        let mut out = Vec::with_capacity(128 + params.len() * 8);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        for v in [cfg.vocab_size, cfg.d_model, cfg.n_heads, cfg.n_layers, cfg.d_ffn, cfg.max_len] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&cfg.dropout.to_le_bytes());
        out.extend_from_slice(&self.vocab_hash);
        out.extend_from_slice(&(self.epoch as u32).to_le_bytes());
        out.extend_from_slice(&self.valid_perplexity.to_le_bytes());
        out.extend_from_slice(&(params.len() as u64).to_le_bytes());
        for p in params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < CHECKPOINT_MAGIC.len() || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let mut r = Reader { buf: bytes, pos: 8 };
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {version} (this build reads version {CHECKPOINT_VERSION})"
            )));
        }
        if bytes.len() < 32 {
            return Err(Error::Checkpoint("file is truncated".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::Checkpoint("checksum mismatch: file is corrupted".into()));
        }
        let mut dims = [0usize; 6];
        for d in dims.iter_mut() {
            *d = r.u32()? as usize;
        }
        let config = ModelConfig {
            vocab_size: dims[0],
            d_model: dims[1],
            n_heads: dims[2],
            n_layers: dims[3],
            d_ffn: dims[4],
            max_len: dims[5],
            dropout: r.f64()?,
        };
        let vocab_hash: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let epoch = r.u32()? as usize;
        let valid_perplexity = r.f64()?;
        let n = r.u64()? as usize;
        if r.pos + n * 8 + 32 != bytes.len() {
            return Err(Error::Checkpoint("parameter count does not match file size".into()));
        }
        let params = (0..n).map(|_| r.f64()).collect::<Result<Vec<f64>>>()?;
        let model = Model::from_params(config, params)
            .map_err(|e| Error::Checkpoint(format!("inconsistent model: {e}")))?;
        Ok(Checkpoint {
            model,
            vocab_hash,
            epoch,
            valid_perplexity,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Loads and checks that the checkpoint was trained with `vocab`.
    pub fn load(path: &Path, vocab: &Vocabulary) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let ckpt = Self::from_bytes(&bytes)?;
        ckpt.check_vocabulary(vocab)?;
        Ok(ckpt)
    }

    pub fn check_vocabulary(&self, vocab: &Vocabulary) -> Result<()> {
        if self.vocab_hash != vocab.hash() {
            return Err(Error::Checkpoint(
                "vocabulary hash mismatch: checkpoint was trained with a different vocabulary".into(),
            ));
        }
        if self.model.config().vocab_size != vocab.len() {
            return Err(Error::Checkpoint("vocabulary size mismatch".into()));
        }
        Ok(())
    }
}
