//! Maps on disk: `<stem>.bin` (80x80 little-endian `f32`, row-major),
//! `<stem>.grid.bin` (pre-upsampling grid) and a `<stem>.json` sidecar.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

use super::{Head, MapMethod, SaliencyMap};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSidecar {
    pub shape: Vec<usize>,
    pub grid_shape: Vec<usize>,
    pub dtype: String,
    pub head: Head,
    pub t: usize,
    #[serde(flatten)]
    pub method: MapMethod,
    pub file: String,
    pub grid_file: String,
}

fn write_f32(path: &Path, t: &Tensor) -> Result<()> {
    let bytes: Vec<u8> = t.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_f32(path: &Path, shape: &[usize]) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::load(path, e.to_string()))?;
    let count: usize = shape.iter().product();
    if bytes.len() != 4 * count {
        return Err(Error::load(
            path,
            format!("expected {} bytes for shape {shape:?}, found {}", 4 * count, bytes.len()),
        ));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Tensor::new(shape.to_vec(), data)
}

/// Writes `map` as `dir/<stem>.{bin,grid.bin,json}`; returns the sidecar path.
pub fn write_map(map: &SaliencyMap, dir: impl AsRef<Path>, stem: &str) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let sidecar = MapSidecar {
        shape: map.scores.shape().to_vec(),
        grid_shape: map.grid_scores.shape().to_vec(),
        dtype: "f32le".into(),
        head: map.head,
        t: map.t,
        method: map.method,
        file: format!("{stem}.bin"),
        grid_file: format!("{stem}.grid.bin"),
    };
    write_f32(&dir.join(&sidecar.file), &map.scores)?;
    write_f32(&dir.join(&sidecar.grid_file), &map.grid_scores)?;
    let path = dir.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Reads a map back from its JSON sidecar.
pub fn read_map(sidecar_path: impl AsRef<Path>) -> Result<SaliencyMap> {
    let path = sidecar_path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::load(path, e.to_string()))?;
    let sidecar: MapSidecar =
        serde_json::from_str(&text).map_err(|e| Error::load(path, format!("malformed sidecar: {e}")))?;
    if sidecar.dtype != "f32le" {
        return Err(Error::load(path, format!("unsupported dtype {:?}", sidecar.dtype)));
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    Ok(SaliencyMap {
        scores: read_f32(&dir.join(&sidecar.file), &sidecar.shape)?,
        grid_scores: read_f32(&dir.join(&sidecar.grid_file), &sidecar.grid_shape)?,
        head: sidecar.head,
        t: sidecar.t,
        method: sidecar.method,
    })
}
