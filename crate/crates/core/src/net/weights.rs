//! Weight container: a directory holding `manifest.json` plus one raw
//! little-endian `f32` blob per tensor (`<name>.bin`, row-major).
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "n_actions": 6,
//!   "activation": "elu",
//!   "hidden_size": 256,
//!   "input_dims": [80, 80],
//!   "gate_order": ["input", "forget", "candidate", "output"],
//!   "tensors": [{"name": "conv1.weight", "shape": [32, 1, 3, 3], "dtype": "f32le", "file": "conv1.weight.bin"}, ...]
//! }
//! ```
//!
//! The conv output is flattened channel-major (`c * 25 + y * 5 + x`) before
//! the LSTM.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use super::{ActorCritic, ActorCriticParams, NetworkConfig, FRAME_SIDE, HIDDEN_SIZE};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
const DTYPE: &str = "f32le";
const GATE_ORDER: [&str; 4] = ["input", "forget", "candidate", "output"];

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    n_actions: usize,
    activation: String,
    hidden_size: usize,
    input_dims: [usize; 2],
    #[serde(default)]
    gate_order: Option<Vec<String>>,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    file: String,
}

/// Writes `net` to `dir`, creating it if needed.
pub fn save_weights(net: &ActorCritic, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for (name, tensor) in net.params().named_tensors() {
        let file = format!("{name}.bin");
        let bytes: Vec<u8> = tensor.data().iter().flat_map(|v| v.to_le_bytes()).collect();
        let path = dir.join(&file);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        entries.push(TensorEntry {
            name: name.to_string(),
            shape: tensor.shape().to_vec(),
            dtype: DTYPE.into(),
            file,
        });
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        n_actions: net.n_actions(),
        activation: net.config().activation.to_string(),
        hidden_size: HIDDEN_SIZE,
        input_dims: [FRAME_SIDE, FRAME_SIDE],
        gate_order: Some(GATE_ORDER.iter().map(|s| s.to_string()).collect()),
        tensors: entries,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Reads a weight container directory (or the path of its `manifest.json`).
pub fn load_weights(path: impl AsRef<Path>) -> Result<ActorCritic> {
    let path = path.as_ref();
    let (dir, manifest_path) = if path.is_dir() {
        (path.to_path_buf(), path.join(MANIFEST_FILE))
    } else {
        let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        (dir, path.to_path_buf())
    };
    let text = fs::read_to_string(&manifest_path)
        .map_err(|e| Error::load(&manifest_path, format!("cannot read manifest: {e}")))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::load(&manifest_path, format!("malformed manifest: {e}")))?;

    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::load(
            &manifest_path,
            format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                manifest.format_version
            ),
        ));
    }
    let activation = manifest.activation.parse()?;
    let config = NetworkConfig::new(manifest.n_actions, activation)?;
    if manifest.hidden_size != HIDDEN_SIZE || manifest.input_dims != [FRAME_SIDE, FRAME_SIDE] {
        return Err(Error::load(
            &manifest_path,
            format!(
                "architecture mismatch: hidden_size {} / input_dims {:?} (expected {HIDDEN_SIZE} / [{FRAME_SIDE}, {FRAME_SIDE}])",
                manifest.hidden_size, manifest.input_dims
            ),
        ));
    }
    if let Some(order) = &manifest.gate_order {
        if order.iter().map(String::as_str).ne(GATE_ORDER) {
            return Err(Error::load(
                &manifest_path,
                format!("unsupported LSTM gate order {order:?}"),
            ));
        }
    }

    let mut tensors = Vec::new();
    for (name, expected) in config.tensor_shapes() {
        let entry = manifest
            .tensors
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::load(&manifest_path, format!("missing tensor {name}")))?;
        if entry.shape != expected {
            return Err(Error::load(
                &manifest_path,
                format!(
                    "tensor {name}: expected shape {expected:?}, found {:?}",
                    entry.shape
                ),
            ));
        }
        if entry.dtype != DTYPE {
            return Err(Error::load(
                &manifest_path,
                format!("tensor {name}: unsupported dtype {:?}", entry.dtype),
            ));
        }
        let blob_path = dir.join(&entry.file);
        let bytes = fs::read(&blob_path)
            .map_err(|e| Error::load(&blob_path, format!("tensor {name}: {e}")))?;
        let count: usize = expected.iter().product();
        if bytes.len() != 4 * count {
            return Err(Error::load(
                &blob_path,
                format!(
                    "tensor {name}: expected {} bytes, found {}",
                    4 * count,
                    bytes.len()
                ),
            ));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        tensors.push(Tensor::new(expected, data)?);
    }
    let params = ActorCriticParams::from_tensors(&config, tensors)?;
    ActorCritic::new(config, params)
}
