//! Overlay frames (actor saliency in blue, critic in red), region mass and
//! CSV series output.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::episode::Frame;
use crate::error::{Error, Result};
use crate::net::FRAME_SIDE;
use crate::saliency::SaliencyMap;
use crate::tensor::Tensor;

/// RGB image with channels in `[0, 1]`, stored as interleaved `[r, g, b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbFrame {
    height: usize,
    width: usize,
    data: Vec<[f32; 3]>,
}

pub const RED: usize = 0;
pub const GREEN: usize = 1;
pub const BLUE: usize = 2;

impl RgbFrame {
    /// Grayscale frame replicated into all three channels.
    pub fn from_gray(frame: &Frame) -> Self {
        RgbFrame {
            height: FRAME_SIDE,
            width: FRAME_SIDE,
            data: frame.tensor().data().iter().map(|&v| [v; 3]).collect(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixel(&self, r: usize, c: usize) -> [f32; 3] {
        self.data[r * self.width + c]
    }

    pub fn pixels(&self) -> &[[f32; 3]] {
        &self.data
    }

    /// Nearest-neighbour integer upscaling.
    pub fn upscale(&self, factor: usize) -> RgbFrame {
        let (h, w) = (self.height * factor, self.width * factor);
        let data = (0..h * w)
            .map(|p| self.pixel(p / w / factor, p % w / factor))
            .collect();
        RgbFrame {
            height: h,
            width: w,
            data,
        }
    }

    /// Quantizes to 8 bits per channel.
    pub fn to_image(&self) -> image::RgbImage {
        let bytes = self
            .data
            .iter()
            .flat_map(|px| px.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8))
            .collect();
        image::RgbImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer matches dimensions")
    }
}

/// How raw scores are scaled before being added to a channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by the largest score of that head over the whole episode.
    EpisodeMax,
    /// Divide by a fixed scale.
    Fixed(f32),
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "episode-max" {
            return Ok(Normalization::EpisodeMax);
        }
        let scale = s
            .strip_prefix("fixed:")
            .and_then(|v| v.parse::<f32>().ok())
            .ok_or_else(|| Error::Config(format!("normalization must be episode-max or fixed:<s>, got {s:?}")))?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!("fixed normalization scale must be positive, got {scale}")));
        }
        Ok(Normalization::Fixed(scale))
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Normalization::EpisodeMax => f.write_str("episode-max"),
            Normalization::Fixed(s) => write!(f, "fixed:{s}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlayConfig {
    pub normalization: Normalization,
    pub gain: f32,
    /// Integer upscaling applied when writing frames.
    pub upscale: usize,
}

impl Default for OverlayConfig {
    fn default() -> Self {
        OverlayConfig {
            normalization: Normalization::EpisodeMax,
            gain: 1.0,
            upscale: 1,
        }
    }
}

impl OverlayConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(Error::Config(format!("gain must be positive, got {}", self.gain)));
        }
        if self.upscale == 0 {
            return Err(Error::Config("upscale must be at least 1".into()));
        }
        Ok(())
    }

    /// Divisor for one head given the maps it will be applied to.
    /// Zero means the head renders as nothing.
    pub fn scale_for<'m>(&self, maps: impl IntoIterator<Item = &'m SaliencyMap>) -> f32 {
        match self.normalization {
            Normalization::Fixed(s) => s,
            Normalization::EpisodeMax => maps.into_iter().map(|m| m.scores.max()).fold(0.0, f32::max),
        }
    }
}

fn check_map(map: &SaliencyMap) -> Result<()> {
    if map.scores.shape() != [FRAME_SIDE, FRAME_SIDE] {
        return Err(Error::Param(format!(
            "saliency map must be {FRAME_SIDE}x{FRAME_SIDE}, got {:?}",
            map.scores.shape()
        )));
    }
    Ok(())
}

/// Adds `scores / scale * gain` to `channel`, clamping at 1.
fn add_channel(img: &mut RgbFrame, scores: &Tensor, scale: f32, gain: f32, channel: usize) {
    if scale <= 0.0 {
        return;
    }
    for (px, &s) in img.data.iter_mut().zip(scores.data()) {
        px[channel] = (px[channel] + s / scale * gain).clamp(0.0, 1.0);
    }
}

/// Overlay with explicit per-head scales, as returned by
/// [`OverlayConfig::scale_for`].
pub fn overlay_scaled(
    frame: &Frame,
    actor: Option<(&SaliencyMap, f32)>,
    critic: Option<(&SaliencyMap, f32)>,
    gain: f32,
) -> Result<RgbFrame> {
    let mut img = RgbFrame::from_gray(frame);
    if let Some((map, scale)) = actor {
        check_map(map)?;
        add_channel(&mut img, &map.scores, scale, gain, BLUE);
    }
    if let Some((map, scale)) = critic {
        check_map(map)?;
        add_channel(&mut img, &map.scores, scale, gain, RED);
    }
    Ok(img)
}

/// Single-frame overlay; with [`Normalization::EpisodeMax`] each map is
/// scaled by its own maximum.
pub fn overlay(
    frame: &Frame,
    actor: Option<&SaliencyMap>,
    critic: Option<&SaliencyMap>,
    cfg: &OverlayConfig,
) -> Result<RgbFrame> {
    cfg.validate().map_err(|e| Error::Param(e.to_string()))?;
    overlay_scaled(
        frame,
        actor.map(|m| (m, cfg.scale_for([m]))),
        critic.map(|m| (m, cfg.scale_for([m]))),
        cfg.gain,
    )
}

/// Half-open row and column ranges over the 80x80 grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub rows: (usize, usize),
    pub cols: (usize, usize),
}

impl RegionSpec {
    pub fn new(rows: (usize, usize), cols: (usize, usize)) -> Result<Self> {
        for (name, (a, b)) in [("row", rows), ("column", cols)] {
            if a >= b || b > FRAME_SIDE {
                return Err(Error::Config(format!(
                    "{name} range {a}:{b} must be non-empty and within 0:{FRAME_SIDE}"
                )));
            }
        }
        Ok(RegionSpec { rows, cols })
    }

    pub fn full() -> Self {
        RegionSpec {
            rows: (0, FRAME_SIDE),
            cols: (0, FRAME_SIDE),
        }
    }

    /// The top `rows` rows, where hint pixels are injected.
    pub fn hint_band(rows: usize) -> Result<Self> {
        RegionSpec::new((0, rows), (0, FRAME_SIDE))
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        (self.rows.0..self.rows.1).contains(&r) && (self.cols.0..self.cols.1).contains(&c)
    }
}

fn parse_range(s: &str) -> Option<(usize, usize)> {
    let (a, b) = s.split_once(':')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

impl FromStr for RegionSpec {
    type Err = Error;

    /// `r0:r1,c0:c1`, `full` or `hint-band:<rows>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            return Ok(RegionSpec::full());
        }
        if let Some(rows) = s.strip_prefix("hint-band:") {
            let rows = rows
                .parse()
                .map_err(|_| Error::Config(format!("bad hint band height in {s:?}")))?;
            return RegionSpec::hint_band(rows);
        }
        let bad = || Error::Config(format!("region must look like r0:r1,c0:c1, got {s:?}"));
        let (r, c) = s.split_once(',').ok_or_else(bad)?;
        RegionSpec::new(parse_range(r).ok_or_else(bad)?, parse_range(c).ok_or_else(bad)?)
    }
}

impl fmt::Display for RegionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{},{}:{}", self.rows.0, self.rows.1, self.cols.0, self.cols.1)
    }
}

/// Fraction of the map's total score inside `region`; 0 for an all-zero map.
pub fn region_mass(map: &SaliencyMap, region: &RegionSpec) -> f32 {
    let side = map.scores.shape().get(1).copied().unwrap_or(FRAME_SIDE);
    let (mut inside, mut total) = (0f64, 0f64);
    for (p, &s) in map.scores.data().iter().enumerate() {
        total += s as f64;
        if region.contains(p / side, p % side) {
            inside += s as f64;
        }
    }
    if total > 0.0 {
        (inside / total) as f32
    } else {
        0.0
    }
}

/// Writes `overlay_%06d.png` for each frame, numbered from `first_t`.
pub fn write_frames(frames: &[RgbFrame], first_t: usize, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    if frames.is_empty() {
        return Err(Error::Param("no frames to write".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    frames
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let path = dir.join(format!("overlay_{:06}.png", first_t + k));
            f.to_image()
                .save_with_format(&path, image::ImageFormat::Png)
                .map_err(|e| match e {
                    image::ImageError::IoError(io) => Error::io(&path, io),
                    other => Error::io(&path, std::io::Error::other(other)),
                })?;
            Ok(path)
        })
        .collect()
}

/// Named scalar columns sharing one timestep axis.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Series {
    pub t: Vec<usize>,
    pub columns: Vec<(String, Vec<f32>)>,
}

impl Series {
    pub fn new(t: Vec<usize>) -> Self {
        Series { t, columns: vec![] }
    }

    pub fn push(&mut self, name: impl Into<String>, values: Vec<f32>) -> Result<()> {
        if values.len() != self.t.len() {
            return Err(Error::Param(format!(
                "column has {} values for {} timesteps",
                values.len(),
                self.t.len()
            )));
        }
        self.columns.push((name.into(), values));
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&[f32]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

/// CSV with a header row, `t` first, one row per timestep.
pub fn write_series(series: &Series, out_path: impl AsRef<Path>) -> Result<()> {
    let path = out_path.as_ref();
    if series.t.is_empty() {
        return Err(Error::Param("empty series".into()));
    }
    let to_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    };
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    let header = std::iter::once("t").chain(series.columns.iter().map(|(n, _)| n.as_str()));
    w.write_record(header).map_err(to_err)?;
    for (row, t) in series.t.iter().enumerate() {
        let record = std::iter::once(t.to_string())
            .chain(series.columns.iter().map(|(_, v)| v[row].to_string()));
        w.write_record(record).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
