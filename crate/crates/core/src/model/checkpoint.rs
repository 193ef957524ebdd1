//! Binary checkpoint serialization for the forecaster.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   b"GTTD"
//! version u32 (currently 1)
//! config  10 × u64: covariate channels, target channels, context steps,
//!         horizon steps, patch size, d_model, heads, blocks, mixture
//!         components, init seed
//! tensors repeated until 4 bytes remain:
//!         name_len u32, name bytes (UTF-8), rank u32, dims u64 × rank,
//!         payload f64 × product(dims)
//! crc     u32 CRC32 of every byte after the magic
//! ```
//!
//! Writes go to a sibling temp file first and are renamed into place, so a
//! crash never leaves a half-written checkpoint at the target path.

use super::{Forecaster, ModelConfig, ModelError};
use crate::tensor::Tensor;
use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

const MAGIC: &[u8; 4] = b"GTTD";

/// Version written by [`save_checkpoint`]; the only version load accepts.
pub const CHECKPOINT_VERSION: u32 = 1;

// ─── Errors ──────────────────────────────────────────────────────────────────

/// Failure modes of checkpoint reading and writing.
#[derive(Debug)]
pub enum CheckpointError {
    Io(io::Error),
    /// The file does not start with the expected magic.
    BadMagic { found: [u8; 4] },
    UnsupportedVersion { found: u32 },
    /// The trailing CRC32 does not match the file contents.
    ChecksumMismatch { stored: u32, computed: u32 },
    /// Structurally invalid contents (truncation, bad names, bad sizes).
    Malformed(String),
    Model(ModelError),
}

impl fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckpointError::Io(e) => write!(f, "checkpoint io: {e}"),
            CheckpointError::BadMagic { found } => {
                write!(f, "not a checkpoint: magic {found:?} != {MAGIC:?}")
            }
            CheckpointError::UnsupportedVersion { found } => {
                write!(f, "unsupported checkpoint version {found} (expected {CHECKPOINT_VERSION})")
            }
            CheckpointError::ChecksumMismatch { stored, computed } => write!(
                f,
                "checkpoint checksum mismatch: stored {stored:#010x}, computed {computed:#010x}"
            ),
            CheckpointError::Malformed(msg) => write!(f, "malformed checkpoint: {msg}"),
            CheckpointError::Model(e) => write!(f, "checkpoint does not fit the model: {e}"),
        }
    }
}

impl std::error::Error for CheckpointError {}

impl From<io::Error> for CheckpointError {
    fn from(e: io::Error) -> CheckpointError {
        CheckpointError::Io(e)
    }
}

impl From<ModelError> for CheckpointError {
    fn from(e: ModelError) -> CheckpointError {
        CheckpointError::Model(e)
    }
}

// ─── Writing ─────────────────────────────────────────────────────────────────

fn config_words(c: &ModelConfig) -> [u64; 10] {
    [
        c.n_covariate_channels as u64,
        c.n_target_channels as u64,
        c.context_steps as u64,
        c.horizon_steps as u64,
        c.patch_size as u64,
        c.d_model as u64,
        c.n_heads as u64,
        c.n_blocks as u64,
        c.n_mixture as u64,
        c.seed,
    ]
}

/// Serializes the model to `path`, atomically replacing any existing file.
pub fn save_checkpoint(model: &Forecaster, path: &Path) -> Result<(), CheckpointError> {
    let mut body: Vec<u8> = Vec::new();
    body.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for w in config_words(model.config()) {
        body.extend_from_slice(&w.to_le_bytes());
    }
    for (name, tensor) in model.params().named() {
        body.extend_from_slice(&(name.len() as u32).to_le_bytes());
        body.extend_from_slice(name.as_bytes());
        body.extend_from_slice(&(tensor.rank() as u32).to_le_bytes());
        for &dim in tensor.shape() {
            body.extend_from_slice(&(dim as u64).to_le_bytes());
        }
        for &x in tensor.data() {
            body.extend_from_slice(&x.to_le_bytes());
        }
    }
    let mut hasher = crc32fast::Hasher::new();
    hasher.update(&body);
    let crc = hasher.finalize();

    let mut bytes = Vec::with_capacity(MAGIC.len() + body.len() + 4);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&body);
    bytes.extend_from_slice(&crc.to_le_bytes());

    let tmp = path.with_extension("partial");
    fs::write(&tmp, &bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

// ─── Reading ─────────────────────────────────────────────────────────────────

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        if self.at + n > self.bytes.len() {
            return Err(CheckpointError::Malformed(format!(
                "truncated while reading {what} ({n} bytes wanted, {} left)",
                self.bytes.len() - self.at
            )));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, CheckpointError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64, CheckpointError> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.at
    }
}

fn usize_field(word: u64, what: &str) -> Result<usize, CheckpointError> {
    usize::try_from(word)
        .map_err(|_| CheckpointError::Malformed(format!("{what} {word} does not fit in usize")))
}

/// Reads a checkpoint and reconstructs the model it describes.
pub fn load_checkpoint(path: &Path) -> Result<Forecaster, CheckpointError> {
    let bytes = fs::read(path)?;
    if bytes.len() < MAGIC.len() + 4 + 4 {
        return Err(CheckpointError::Malformed(format!(
            "file is only {} bytes",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic {
            found: bytes[..4].try_into().expect("4 bytes"),
        });
    }
    // Verify integrity before trusting any field.
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
    let mut hasher = crc32fast::Hasher::new();
    hasher.update(&bytes[4..bytes.len() - 4]);
    let computed = hasher.finalize();
    if stored != computed {
        return Err(CheckpointError::ChecksumMismatch { stored, computed });
    }

    let mut r = Reader {
        bytes: &bytes[..bytes.len() - 4],
        at: 4,
    };
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion { found: version });
    }
    let words: Vec<u64> = (0..10)
        .map(|i| r.u64(&format!("config word {i}")))
        .collect::<Result<_, _>>()?;
    let config = ModelConfig {
        n_covariate_channels: usize_field(words[0], "covariate channels")?,
        n_target_channels: usize_field(words[1], "target channels")?,
        context_steps: usize_field(words[2], "context steps")?,
        horizon_steps: usize_field(words[3], "horizon steps")?,
        patch_size: usize_field(words[4], "patch size")?,
        d_model: usize_field(words[5], "d_model")?,
        n_heads: usize_field(words[6], "heads")?,
        n_blocks: usize_field(words[7], "blocks")?,
        n_mixture: usize_field(words[8], "mixture components")?,
        seed: words[9],
    };

    let mut tensors: HashMap<String, Tensor> = HashMap::new();
    while r.remaining() > 0 {
        let name_len = r.u32("tensor name length")? as usize;
        let name_bytes = r.take(name_len, "tensor name")?;
        let name = std::str::from_utf8(name_bytes)
            .map_err(|_| CheckpointError::Malformed("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32(&format!("rank of '{name}'"))? as usize;
        let mut shape = Vec::with_capacity(rank);
        for i in 0..rank {
            shape.push(usize_field(
                r.u64(&format!("dim {i} of '{name}'"))?,
                "tensor dimension",
            )?);
        }
        let numel: usize = shape.iter().product();
        let payload = r.take(numel * 8, &format!("payload of '{name}'"))?;
        let data: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let tensor = Tensor::new(shape, data)
            .map_err(|e| CheckpointError::Malformed(format!("tensor '{name}': {e}")))?;
        if tensors.insert(name.clone(), tensor).is_some() {
            return Err(CheckpointError::Malformed(format!(
                "tensor '{name}' appears twice"
            )));
        }
    }

    let mut model = Forecaster::new(config)?;
    model.params_mut().load_from(tensors)?;
    Ok(model)
}

// ─── Tests ───────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::{random_inputs, tiny_config};
    use crate::model::{train, Episode, TrainOptions};
    use crate::tensor::Tensor;

    fn tmp_path(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("ckpt-test-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    /// A model whose parameters differ from a fresh initialization.
    fn trained_model() -> Forecaster {
        let mut model = Forecaster::new(tiny_config()).unwrap();
        let (tc, cov) = random_inputs(model.config(), 9);
        let th = Tensor::full(vec![2, 4], 0.5);
        let opts = TrainOptions {
            steps: 3,
            ..TrainOptions::default()
        };
        train(&mut model, &opts, |_| {
            Ok(Episode {
                targets_context: tc.clone(),
                covariates: cov.clone(),
                targets_horizon: th.clone(),
            })
        })
        .unwrap();
        model
    }

    #[test]
    fn round_trip_preserves_config_params_and_predictions() {
        let model = trained_model();
        let path = tmp_path("roundtrip.ckpt");
        save_checkpoint(&model, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.config(), model.config());
        for ((na, ta), (nb, tb)) in model.params().named().iter().zip(loaded.params().named()) {
            assert_eq!(*na, nb);
            assert_eq!(ta.data(), tb.data());
        }
        let (tc, cov) = random_inputs(model.config(), 10);
        assert_eq!(
            model.forward(&tc, &cov).unwrap(),
            loaded.forward(&tc, &cov).unwrap()
        );
        // Saving the loaded model reproduces the bytes exactly.
        let path2 = tmp_path("roundtrip2.ckpt");
        save_checkpoint(&loaded, &path2).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn flipped_byte_is_caught_by_the_checksum() {
        let model = trained_model();
        let path = tmp_path("corrupt.ckpt");
        save_checkpoint(&model, &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path).unwrap_err(),
            CheckpointError::ChecksumMismatch { .. }
        ));
    }

    #[test]
    fn wrong_magic_is_reported_as_such() {
        let model = trained_model();
        let path = tmp_path("magic.ckpt");
        save_checkpoint(&model, &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[..4].copy_from_slice(b"NOPE");
        fs::write(&path, &bytes).unwrap();
        match load_checkpoint(&path).unwrap_err() {
            CheckpointError::BadMagic { found } => assert_eq!(&found, b"NOPE"),
            other => panic!("expected BadMagic, got {other}"),
        }
    }

    #[test]
    fn future_version_is_rejected() {
        let model = trained_model();
        let path = tmp_path("version.ckpt");
        save_checkpoint(&model, &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[4..8].copy_from_slice(&2u32.to_le_bytes());
        // Recompute the trailing CRC so only the version is at fault.
        let end = bytes.len() - 4;
        let mut hasher = crc32fast::Hasher::new();
        hasher.update(&bytes[4..end]);
        let crc = hasher.finalize();
        bytes[end..].copy_from_slice(&crc.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path).unwrap_err(),
            CheckpointError::UnsupportedVersion { found: 2 }
        ));
    }

    #[test]
    fn truncated_file_is_malformed() {
        let model = trained_model();
        let path = tmp_path("short.ckpt");
        save_checkpoint(&model, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() / 3]).unwrap();
        // Truncation lands either on the checksum or on a short record.
        let err = load_checkpoint(&path).unwrap_err();
        assert!(matches!(
            err,
            CheckpointError::ChecksumMismatch { .. } | CheckpointError::Malformed(_)
        ));
    }

    #[test]
    fn no_partial_file_remains_after_save() {
        let model = trained_model();
        let path = tmp_path("clean.ckpt");
        save_checkpoint(&model, &path).unwrap();
        assert!(path.exists());
        assert!(!path.with_extension("partial").exists());
    }
}
