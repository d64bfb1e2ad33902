//! Generator checkpoints.
//!
//! Binary layout, all integers `u32` and floats `f64`, little-endian:
//!
//! ```text
//! magic "VFLGCKPT" | version | latent_dim | party count
//! per party:
//!   temperature | block count | per block: kind u8 (0 identity, 1 tanh, 2 softmax), width
//!   layer count | per layer: rows | cols | activation u8 (0 relu, 1 leaky, 2 tanh, 3 identity) | slope
//!   per layer: weights (row-major, rows × cols) then biases (cols)
//! ```
//!
//! A TOML sidecar next to the binary records the variant, seed, epoch and
//! training configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{GanConfig, Variant};
use super::generate::{Generators, PartyGenerator};
use crate::error::{Error, Result};
use crate::nn::{Activation, HeadBlock, Layer, Matrix, Mlp, OutputHead};

pub const MAGIC: &[u8; 8] = b"VFLGCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub variant: Variant,
    pub seed: u64,
    /// Epoch the generators were taken from; absent for untrained ones.
    pub epoch: Option<usize>,
    pub config: GanConfig,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn encode_generators(g: &Generators) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION as usize);
    put_u32(&mut out, g.latent_dim);
    put_u32(&mut out, g.parties.len());
    for p in &g.parties {
        put_f64(&mut out, p.head.temperature);
        put_u32(&mut out, p.head.blocks.len());
        for b in &p.head.blocks {
            let kind = match b {
                HeadBlock::Identity { .. } => 0u8,
                HeadBlock::Tanh { .. } => 1,
                HeadBlock::Softmax { .. } => 2,
            };
            out.push(kind);
            put_u32(&mut out, b.width());
        }
        let layers = p.mlp.layers();
        put_u32(&mut out, layers.len());
        for l in layers {
            put_u32(&mut out, l.weight.rows());
            put_u32(&mut out, l.weight.cols());
            let (tag, slope) = match l.activation {
                Activation::Relu => (0u8, 0.0),
                Activation::LeakyRelu { slope } => (1, slope),
                Activation::Tanh => (2, 0.0),
                Activation::Identity => (3, 0.0),
            };
            out.push(tag);
            put_f64(&mut out, slope);
        }
        for l in layers {
            l.weight.data().iter().for_each(|&v| put_f64(&mut out, v));
            l.bias.iter().for_each(|&v| put_f64(&mut out, v));
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end =
            end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn decode_generators(bytes: &[u8]) -> Result<Generators> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let latent_dim = r.u32()?;
    let n_parties = r.u32()?;
    let mut parties = Vec::with_capacity(n_parties.min(64));
    for _ in 0..n_parties {
        let temperature = r.f64()?;
        let n_blocks = r.u32()?;
        let mut blocks = Vec::with_capacity(n_blocks.min(1024));
        for _ in 0..n_blocks {
            let kind = r.u8()?;
            let width = r.u32()?;
            blocks.push(match kind {
                0 => HeadBlock::Identity { width },
                1 => HeadBlock::Tanh { width },
                2 => HeadBlock::Softmax { width },
                k => return Err(Error::Checkpoint(format!("unknown head block kind {k}"))),
            });
        }
        let n_layers = r.u32()?;
        let mut shapes = Vec::with_capacity(n_layers.min(64));
        for _ in 0..n_layers {
            let rows = r.u32()?;
            let cols = r.u32()?;
            let tag = r.u8()?;
            let slope = r.f64()?;
            let act = match tag {
                0 => Activation::Relu,
                1 => Activation::LeakyRelu { slope },
                2 => Activation::Tanh,
                3 => Activation::Identity,
                t => return Err(Error::Checkpoint(format!("unknown activation tag {t}"))),
            };
            shapes.push((rows, cols, act));
        }
        let mut layers = Vec::with_capacity(shapes.len());
        for (rows, cols, activation) in shapes {
            let weight = Matrix::from_vec(rows, cols, r.f64s(rows * cols)?)?;
            let bias = r.f64s(cols)?;
            layers.push(Layer {
                weight,
                bias,
                activation,
            });
        }
        let mlp = Mlp::new(layers).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let head =
            OutputHead::new(blocks, temperature).map_err(|e| Error::Checkpoint(e.to_string()))?;
        parties.push(PartyGenerator { mlp, head });
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    let g = Generators {
        latent_dim,
        parties,
    };
    g.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(g)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".toml");
    path.with_file_name(name)
}

/// Writes the binary checkpoint and its sidecar. Returns the sidecar path.
pub fn save_checkpoint(
    path: &Path,
    generators: &Generators,
    meta: &CheckpointMeta,
) -> Result<PathBuf> {
    std::fs::write(path, encode_generators(generators))?;
    let sidecar = sidecar_path(path);
    let text = toml::to_string(meta).map_err(|e| Error::Checkpoint(e.to_string()))?;
    std::fs::write(&sidecar, text)?;
    Ok(sidecar)
}

pub fn load_checkpoint(path: &Path) -> Result<(Generators, CheckpointMeta)> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let generators = decode_generators(&std::fs::read(path)?)?;
    let sidecar = sidecar_path(path);
    if !sidecar.exists() {
        return Err(Error::MissingFile(sidecar));
    }
    let meta: CheckpointMeta = toml::from_str(&std::fs::read_to_string(&sidecar)?)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    if meta.config.latent_dim != generators.latent_dim {
        return Err(Error::Checkpoint(
            "sidecar latent width disagrees with the binary".into(),
        ));
    }
    Ok((generators, meta))
}
