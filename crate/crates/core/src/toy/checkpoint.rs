//! Binary checkpoint of a pretrained toy encoder.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! 0      8 bytes   magic "LPCKPT\0\0"
//! 8      u32       format version (1)
//! 12     u32       header length H
//! 16     H bytes   UTF-8 JSON header: {"format_version", "config", "tensors": [{"name", "shape"}]}
//! 16+H   ...       tensor payload: f32 values, row-major, in header order
//! end-32 32 bytes  SHA-256 of every preceding byte
//! ```
//!
//! Tensor names are `token`, `position`, `layer.<id>.<param>` for each
//! encoder layer and `lm.bias`.

use super::params::{Encoder, LayerBlock, LmHead, Mat, Parameters};
use super::{ToyConfig, ToyError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"LPCKPT\0\0";
pub const FORMAT_VERSION: u32 = 1;

/// The pretrained depth-6 checkpoint shipped with the crate.
pub static FIXTURE_D6: &[u8] = include_bytes!("../../fixtures/toy_d6.ckpt");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: ToyConfig,
    tensors: Vec<TensorEntry>,
}

/// Pretrained encoder weights plus the masked-token head bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ToyConfig,
    pub encoder: Encoder,
    pub lm: LmHead,
}

impl Checkpoint {
    pub fn fixture() -> Self {
        Self::from_bytes(FIXTURE_D6).expect("bundled checkpoint is valid")
    }

    fn named_tensors(&self) -> Vec<(String, &Mat)> {
        let mut out = vec![("token".to_string(), &self.encoder.token), ("position".to_string(), &self.encoder.position)];
        for (id, block) in self.encoder.layer_ids.iter().zip(&self.encoder.layers) {
            for (name, t) in LayerBlock::TENSOR_NAMES.iter().zip(block.tensors()) {
                out.push((format!("layer.{id}.{name}"), t));
            }
        }
        out.push(("lm.bias".to_string(), &self.lm.bias));
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let tensors = self.named_tensors();
        let header = Header {
            format_version: FORMAT_VERSION,
            config: self.config,
            tensors: tensors.iter().map(|(n, t)| TensorEntry { name: n.clone(), shape: [t.nrows(), t.ncols()] }).collect(),
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(64 + header.len() + 4 * self.encoder.param_count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, t) in &tensors {
            for v in t.iter() {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        let sum = Sha256::digest(&out);
        out.extend_from_slice(&sum);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ToyError> {
        let bad = |m: String| ToyError::Checkpoint(m);
        if bytes.len() < 16 + 32 || &bytes[..8] != MAGIC {
            return Err(bad("not a toy checkpoint (bad magic or too short)".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {version}, expected {FORMAT_VERSION}")));
        }
        let (body, sum) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != sum {
            return Err(bad("checksum mismatch".into()));
        }
        let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let header_bytes = body.get(16..16 + hlen).ok_or_else(|| bad("truncated header".into()))?;
        let header: Header = serde_json::from_slice(header_bytes).map_err(|e| bad(format!("header: {e}")))?;
        header.config.validate()?;

        let mut payload = &body[16 + hlen..];
        let mut read = |entry: &TensorEntry| -> Result<Mat, ToyError> {
            let [r, c] = entry.shape;
            let need = r * c * 4;
            if payload.len() < need {
                return Err(bad(format!("payload ends inside tensor {}", entry.name)));
            }
            let (chunk, rest) = payload.split_at(need);
            payload = rest;
            let vals = chunk.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64).collect();
            Ok(Mat::from_shape_vec((r, c), vals).expect("shape matches length"))
        };

        let cfg = header.config;
        let mut entries = header.tensors.iter();
        let mut next = |expect: &str, shape: (usize, usize)| -> Result<Mat, ToyError> {
            let e = entries.next().ok_or_else(|| bad(format!("missing tensor {expect}")))?;
            if e.name != expect || e.shape != [shape.0, shape.1] {
                return Err(bad(format!("expected {expect} {shape:?}, found {} {:?}", e.name, e.shape)));
            }
            read(e)
        };
        let token = next("token", (cfg.vocab, cfg.width))?;
        let position = next("position", (cfg.max_len, cfg.width))?;
        let mut template_rng = ChaCha8Rng::seed_from_u64(0);
        let template = LayerBlock::random(&cfg, &mut template_rng);
        let mut layers = Vec::with_capacity(cfg.depth);
        for id in 0..cfg.depth {
            let mut block = template.clone();
            for (name, t) in LayerBlock::TENSOR_NAMES.iter().zip(block.tensors_mut()) {
                *t = next(&format!("layer.{id}.{name}"), t.dim())?;
            }
            layers.push(block);
        }
        let bias = next("lm.bias", (1, cfg.vocab))?;
        if entries.next().is_some() || !payload.is_empty() {
            return Err(bad("trailing data after the last tensor".into()));
        }
        Ok(Self {
            config: cfg,
            encoder: Encoder { token, position, layers, layer_ids: (0..cfg.depth).collect() },
            lm: LmHead { bias },
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ToyError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| ToyError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, ToyError> {
        let bytes = std::fs::read(path).map_err(|e| ToyError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }

    /// Identity of the weights, for oracle fingerprints.
    pub fn content_hash(&self) -> String {
        crate::fingerprint::digest(&[&self.to_bytes()])
    }

    /// Copy with every tensor of layer `layer` replaced by `N(0, std)` noise.
    pub fn sabotaged(&self, layer: usize, std: f64, seed: u64) -> Result<Self, ToyError> {
        let mut out = self.clone();
        let block = out.encoder.block_mut(layer).ok_or_else(|| ToyError::Input(format!("no layer {layer}")))?;
        block.fill_with_noise(std, &mut ChaCha8Rng::seed_from_u64(seed));
        // round-trip through f32 like a stored checkpoint
        Self::from_bytes(&out.to_bytes())
    }
}
