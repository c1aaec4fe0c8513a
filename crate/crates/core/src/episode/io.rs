//! Episode directories: `episode.json` plus one lossless 8-bit grayscale PNG
//! per timestep, named `frame_%06d.png`.

use image::{DynamicImage, GrayImage};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use super::{Episode, Frame, RawFrame};
use crate::error::{Error, Result};
use crate::net::FRAME_SIDE;
use crate::tensor::Tensor;

pub const EPISODE_MANIFEST: &str = "episode.json";

#[derive(Debug, Serialize, Deserialize)]
struct EpisodeManifest {
    #[serde(rename = "T")]
    timesteps: usize,
    source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    actions: Option<Vec<usize>>,
}

fn frame_name(t: usize) -> String {
    format!("frame_{t:06}.png")
}

pub fn save_episode(episode: &Episode, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (t, frame) in episode.frames().iter().enumerate() {
        let bytes = frame
            .tensor()
            .data()
            .iter()
            .map(|v| (v * 255.0).round() as u8)
            .collect();
        let img = GrayImage::from_raw(FRAME_SIDE as u32, FRAME_SIDE as u32, bytes)
            .expect("frame buffer has 80x80 pixels");
        let path = dir.join(frame_name(t));
        img.save(&path)
            .map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
    }
    let manifest = EpisodeManifest {
        timesteps: episode.len(),
        source: episode.source.clone(),
        actions: episode.actions.clone(),
    };
    let path = dir.join(EPISODE_MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn load_episode(dir: impl AsRef<Path>) -> Result<Episode> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(EPISODE_MANIFEST);
    let text = fs::read_to_string(&manifest_path)
        .map_err(|e| Error::load(&manifest_path, format!("cannot read episode manifest: {e}")))?;
    let manifest: EpisodeManifest = serde_json::from_str(&text)
        .map_err(|e| Error::load(&manifest_path, format!("malformed episode manifest: {e}")))?;
    if manifest.timesteps == 0 {
        return Err(Error::load(&manifest_path, "episode declares T = 0"));
    }

    let on_disk = fs::read_dir(dir)
        .map_err(|e| Error::load(dir, e.to_string()))?
        .filter_map(|e| e.ok())
        .filter(|e| {
            let name = e.file_name();
            let name = name.to_string_lossy();
            name.starts_with("frame_") && name.ends_with(".png")
        })
        .count();
    if on_disk != manifest.timesteps {
        return Err(Error::load(
            dir,
            format!(
                "manifest declares T = {} but {on_disk} frame files are present",
                manifest.timesteps
            ),
        ));
    }

    let mut frames = Vec::with_capacity(manifest.timesteps);
    for t in 0..manifest.timesteps {
        let path = dir.join(frame_name(t));
        if !path.exists() {
            return Err(Error::load(&path, format!("missing frame {t}")));
        }
        let img = image::open(&path)
            .map_err(|e| Error::load(&path, format!("frame {t}: {e}")))?
            .into_luma8();
        if img.dimensions() != (FRAME_SIDE as u32, FRAME_SIDE as u32) {
            return Err(Error::load(
                &path,
                format!("frame {t} is {:?}, expected 80x80", img.dimensions()),
            ));
        }
        let data = img.into_raw().into_iter().map(|b| b as f32 / 255.0).collect();
        frames.push(Frame::new(Tensor::new([FRAME_SIDE, FRAME_SIDE], data)?)?);
    }
    let episode = Episode::new(frames, manifest.source)?;
    match manifest.actions {
        Some(actions) => episode
            .with_actions(actions)
            .map_err(|e| Error::load(&manifest_path, e.to_string())),
        None => Ok(episode),
    }
}

/// Reads an 8-bit grayscale or RGB image (alpha is dropped).
pub fn load_raw_frame(path: impl AsRef<Path>) -> Result<RawFrame> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| Error::load(path, e.to_string()))?;
    let (channels, width, height, data) = match img {
        DynamicImage::ImageLuma8(g) => (1, g.width(), g.height(), g.into_raw()),
        other => {
            let rgb = other.into_rgb8();
            (3, rgb.width(), rgb.height(), rgb.into_raw())
        }
    };
    RawFrame::new(height as usize, width as usize, channels, data)
}
