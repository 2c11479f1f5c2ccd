//! Denoiser checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `SEGBCKPT` |
//! | 4 | format version (`u32`, currently 1) |
//! | 8 | header length `n` (`u64`) |
//! | n | UTF-8 JSON header `{"config": ..., "tensors": [{"name", "rows", "cols", "offset"}]}` |
//! | rest | tensor data as `f64`, row-major, `offset` counted in elements |

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use segbench_core::diffusion::{
    make_schedule, NoiseSchedule, ScheduleKind, ToyConfig, ToyDenoiser,
};
use segbench_core::prompt::Vocabulary;
use segbench_core::tensor::Mat;
use serde::{Deserialize, Serialize};

const MAGIC: &[u8; 8] = b"SEGBCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: serde_json::Value,
    pub tensors: BTreeMap<String, Mat>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let mut entries = Vec::with_capacity(ckpt.tensors.len());
    let mut offset = 0;
    for (name, m) in &ckpt.tensors {
        entries.push(TensorEntry {
            name: name.clone(),
            rows: m.rows,
            cols: m.cols,
            offset,
        });
        offset += m.data.len();
    }
    let header = serde_json::to_vec(&Header {
        config: ckpt.config.clone(),
        tensors: entries,
    })?;
    let mut out = Vec::with_capacity(20 + header.len() + offset * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for m in ckpt.tensors.values() {
        for v in &m.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    ensure!(
        bytes.len() >= 20 && &bytes[..8] == MAGIC,
        "not a checkpoint file"
    );
    let version = u32::from_le_bytes(bytes[8..12].try_into()?);
    ensure!(
        version == VERSION,
        "unsupported checkpoint version {version}"
    );
    let n = u64::from_le_bytes(bytes[12..20].try_into()?) as usize;
    ensure!(bytes.len() >= 20 + n, "truncated checkpoint header");
    let header: Header =
        serde_json::from_slice(&bytes[20..20 + n]).context("parsing checkpoint header")?;
    let data = &bytes[20 + n..];
    ensure!(
        data.len() % 8 == 0,
        "tensor data is not a whole number of f64 values"
    );
    let values: Vec<f64> = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut tensors = BTreeMap::new();
    for e in header.tensors {
        let len = e.rows * e.cols;
        let Some(slice) = values.get(e.offset..e.offset + len) else {
            bail!("tensor {} runs past the end of the data", e.name);
        };
        tensors.insert(e.name, Mat::from_vec(e.rows, e.cols, slice.to_vec())?);
    }
    Ok(Checkpoint {
        config: header.config,
        tensors,
    })
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, encode_checkpoint(ckpt)?)
        .with_context(|| format!("writing {}", path.display()))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode_checkpoint(&bytes).with_context(|| format!("decoding {}", path.display()))
}

/// JSON config stored with a toy denoiser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyCheckpointConfig {
    pub model: ToyConfig,
    pub vocabulary: Vocabulary,
    pub schedule: ScheduleKind,
    pub steps: usize,
}

pub fn save_toy(
    path: &Path,
    denoiser: &ToyDenoiser,
    vocab: &Vocabulary,
    schedule: &NoiseSchedule,
) -> Result<()> {
    let config = ToyCheckpointConfig {
        model: denoiser.config().clone(),
        vocabulary: vocab.clone(),
        schedule: schedule.kind,
        steps: schedule.steps(),
    };
    let ckpt = Checkpoint {
        config: serde_json::to_value(config)?,
        tensors: denoiser.params().clone(),
    };
    write_checkpoint(path, &ckpt)
}

pub fn load_toy(path: &Path) -> Result<(ToyDenoiser, Vocabulary, NoiseSchedule)> {
    let ckpt = read_checkpoint(path)?;
    let config: ToyCheckpointConfig =
        serde_json::from_value(ckpt.config).context("checkpoint config")?;
    let schedule = make_schedule(config.steps, config.schedule)?;
    let denoiser = ToyDenoiser::from_params(config.model, ckpt.tensors)?;
    Ok((denoiser, config.vocabulary, schedule))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn container_round_trips() {
        let mut tensors = BTreeMap::new();
        tensors.insert(
            "a".to_string(),
            Mat::from_vec(2, 2, vec![1.0, -2.5, 3.0, f64::MIN_POSITIVE]).unwrap(),
        );
        tensors.insert(
            "b".to_string(),
            Mat::from_vec(1, 3, vec![0.1, 0.2, 0.3]).unwrap(),
        );
        let ckpt = Checkpoint {
            config: serde_json::json!({"k": 1}),
            tensors,
        };
        let bytes = encode_checkpoint(&ckpt).unwrap();
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(decode_checkpoint(&bytes).unwrap(), ckpt);
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode_checkpoint(b"hello").is_err());
        let mut bytes = encode_checkpoint(&Checkpoint {
            config: serde_json::json!(null),
            tensors: BTreeMap::new(),
        })
        .unwrap();
        bytes[8] = 9;
        assert!(decode_checkpoint(&bytes).is_err());
    }
}
