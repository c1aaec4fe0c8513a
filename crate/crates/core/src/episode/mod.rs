//! Episodes of preprocessed frames: ingestion, preprocessing, hint-pixel
//! injection and deterministic synthetic fixtures.

mod io;
mod synth;

pub use io::{load_episode, load_raw_frame, save_episode, EPISODE_MANIFEST};
pub use synth::{bounce_position, random_actions, synth_episode, synth_weights, Pattern, DOT_SIZE};

use crate::error::{Error, Result};
use crate::net::FRAME_SIDE;
use crate::tensor::Tensor;

/// An 80x80 network input with intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame(Tensor);

impl Frame {
    pub fn new(data: Tensor) -> Result<Self> {
        if data.shape() != [FRAME_SIDE, FRAME_SIDE] {
            return Err(Error::Shape(format!(
                "frame must be {FRAME_SIDE}x{FRAME_SIDE}, got {:?}",
                data.shape()
            )));
        }
        if let Some(v) = data.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Param(format!("frame value {v} outside [0, 1]")));
        }
        Ok(Frame(data))
    }

    pub fn zeros() -> Self {
        Frame(Tensor::zeros([FRAME_SIDE, FRAME_SIDE]))
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    pub fn at(&self, r: usize, c: usize) -> f32 {
        self.0.at(r, c)
    }
}

/// An unprocessed 8-bit image, grayscale or RGB, stored row-major with
/// interleaved channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawFrame {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl RawFrame {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Param(format!("raw frames need 1 or 3 channels, got {channels}")));
        }
        if height * width * channels != data.len() {
            return Err(Error::Shape(format!(
                "raw frame {height}x{width}x{channels} needs {} bytes, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(RawFrame {
            height,
            width,
            channels,
            data,
        })
    }
}

/// Gray-scaling weights and crop offsets. Offsets are in downsampled pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessConfig {
    pub crop_top: usize,
    pub crop_left: usize,
    pub grayscale_weights: [f32; 3],
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            crop_top: 0,
            crop_left: 0,
            grayscale_weights: [0.299, 0.587, 0.114],
        }
    }
}

/// Gray-scale, 2x2-mean downsample, crop 80x80 and scale to `[0, 1]`.
pub fn preprocess(raw: &RawFrame, cfg: &PreprocessConfig) -> Result<Frame> {
    let weight_sum: f32 = cfg.grayscale_weights.iter().sum();
    if (weight_sum - 1.0).abs() > 1e-4 || cfg.grayscale_weights.iter().any(|w| *w < 0.0) {
        return Err(Error::Param(format!(
            "grayscale weights {:?} must be non-negative and sum to 1",
            cfg.grayscale_weights
        )));
    }
    let (dh, dw) = (raw.height / 2, raw.width / 2);
    if cfg.crop_top + FRAME_SIDE > dh || cfg.crop_left + FRAME_SIDE > dw {
        return Err(Error::Param(format!(
            "crop window at ({}, {}) does not fit the {dh}x{dw} downsampled frame",
            cfg.crop_top, cfg.crop_left
        )));
    }
    let gray = |r: usize, c: usize| -> f32 {
        let px = &raw.data[(r * raw.width + c) * raw.channels..][..raw.channels];
        match px {
            [g] => *g as f32,
            [r, g, b] => {
                let [wr, wg, wb] = cfg.grayscale_weights;
                wr * *r as f32 + wg * *g as f32 + wb * *b as f32
            }
            _ => unreachable!("channel count validated"),
        }
    };
    let data = (0..FRAME_SIDE * FRAME_SIDE)
        .map(|idx| {
            let y = 2 * (cfg.crop_top + idx / FRAME_SIDE);
            let x = 2 * (cfg.crop_left + idx % FRAME_SIDE);
            let mean = (gray(y, x) + gray(y, x + 1) + gray(y + 1, x) + gray(y + 1, x + 1)) / 4.0;
            (mean / 255.0).clamp(0.0, 1.0)
        })
        .collect();
    Frame::new(Tensor::new([FRAME_SIDE, FRAME_SIDE], data)?)
}

/// Width of one action's block in the hint band.
pub fn hint_block_width(n_actions: usize) -> usize {
    FRAME_SIDE / n_actions
}

/// Encodes `action` as a one-hot band across the top `rows` rows: the band is
/// cleared, then the action's block of columns is set to 1.
pub fn inject_hint_pixels(frame: &Frame, action: usize, n_actions: usize, rows: usize) -> Result<Frame> {
    if n_actions == 0 || n_actions > FRAME_SIDE || action >= n_actions {
        return Err(Error::Param(format!(
            "hint action {action} out of range for {n_actions} actions"
        )));
    }
    if !(1..=5).contains(&rows) {
        return Err(Error::Param(format!("hint rows must be in 1..=5, got {rows}")));
    }
    let block = hint_block_width(n_actions);
    let mut t = frame.tensor().clone();
    let data = t.data_mut();
    for r in 0..rows {
        for c in 0..FRAME_SIDE {
            let lit = c >= action * block && c < (action + 1) * block;
            data[r * FRAME_SIDE + c] = if lit { 1.0 } else { 0.0 };
        }
    }
    Ok(Frame(t))
}

/// A sequence of preprocessed frames with provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    frames: Vec<Frame>,
    pub source: String,
    pub actions: Option<Vec<usize>>,
}

impl Episode {
    pub fn new(frames: Vec<Frame>, source: impl Into<String>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Param("an episode needs at least one frame".into()));
        }
        Ok(Episode {
            frames,
            source: source.into(),
            actions: None,
        })
    }

    pub fn with_actions(mut self, actions: Vec<usize>) -> Result<Self> {
        if actions.len() != self.frames.len() {
            return Err(Error::Param(format!(
                "{} action labels for {} frames",
                actions.len(),
                self.frames.len()
            )));
        }
        self.actions = Some(actions);
        Ok(self)
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> Result<&Frame> {
        self.frames.get(t).ok_or_else(|| {
            Error::Param(format!("timestep {t} outside episode of length {}", self.len()))
        })
    }

    /// Number of timesteps `T`.
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Replaces every frame with its hint-injected version for `actions`.
    pub fn with_hints(&self, actions: &[usize], n_actions: usize, rows: usize) -> Result<Episode> {
        if actions.len() != self.len() {
            return Err(Error::Param(format!(
                "{} hint actions for {} frames",
                actions.len(),
                self.len()
            )));
        }
        let frames = self
            .frames
            .iter()
            .zip(actions)
            .map(|(f, &a)| inject_hint_pixels(f, a, n_actions, rows))
            .collect::<Result<Vec<_>>>()?;
        Episode::new(frames, format!("{}+hints", self.source))?.with_actions(actions.to_vec())
    }
}
