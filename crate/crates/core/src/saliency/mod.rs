//! Perturbation-based saliency.
//!
//! A frame is perturbed by interpolating towards its Gaussian-blurred copy
//! under a Gaussian mask centered at `(i, j)`:
//!
//! ```text
//! phi(I, i, j) = I * (1 - M(i, j)) + blur(I) * M(i, j)
//! ```
//!
//! and the saliency of `(i, j)` at time `t` is half the squared change of the
//! policy logits (or of the value) when frame `t` alone is replaced by its
//! perturbation. Earlier frames are untouched, so the perturbed pass is a
//! single recurrent step from the cached state entering `t`.

mod export;
mod jacobian;
mod memory;

pub use export::{read_map, write_map, MapSidecar};
pub use jacobian::DEFAULT_JACOBIAN_EPSILON;
pub use memory::{MemorySaliencySeries, DEFAULT_MEMORY_FACTOR};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::episode::{Episode, Frame};
use crate::error::{Error, Result};
use crate::net::{ActorCritic, PolicyOutput, RolloutCache, FRAME_SIDE};
use crate::parallel::Workers;
use crate::tensor::{bilinear_upsample, gaussian_blur, gaussian_mask, Tensor};

pub const DEFAULT_STRIDE: usize = 5;
pub const DEFAULT_BLUR_SIGMA: f32 = 3.0;
pub const DEFAULT_MASK_VARIANCE: f32 = 25.0;

/// Which network output a map explains.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    /// Policy logits.
    #[default]
    Actor,
    /// Value estimate.
    Critic,
}

impl FromStr for Head {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "actor" => Ok(Head::Actor),
            "critic" => Ok(Head::Critic),
            other => Err(Error::Config(format!("unknown head {other:?}"))),
        }
    }
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Head::Actor => "actor",
            Head::Critic => "critic",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaliencyConfig {
    /// Grid spacing `k`: scores are computed at `i, j = 0 (mod k)`.
    pub stride: usize,
    pub blur_sigma: f32,
    pub mask_variance: f32,
    pub head: Head,
}

impl Default for SaliencyConfig {
    fn default() -> Self {
        SaliencyConfig {
            stride: DEFAULT_STRIDE,
            blur_sigma: DEFAULT_BLUR_SIGMA,
            mask_variance: DEFAULT_MASK_VARIANCE,
            head: Head::Actor,
        }
    }
}

impl SaliencyConfig {
    pub fn with_head(self, head: Head) -> Self {
        SaliencyConfig { head, ..self }
    }

    pub fn with_stride(self, stride: usize) -> Self {
        SaliencyConfig { stride, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 || self.stride > FRAME_SIDE {
            return Err(Error::Config(format!(
                "stride must be in 1..={FRAME_SIDE}, got {}",
                self.stride
            )));
        }
        if !(self.blur_sigma > 0.0 && self.blur_sigma.is_finite()) {
            return Err(Error::Config(format!("blur sigma must be positive, got {}", self.blur_sigma)));
        }
        if !(self.mask_variance > 0.0 && self.mask_variance.is_finite()) {
            return Err(Error::Config(format!(
                "mask variance must be positive, got {}",
                self.mask_variance
            )));
        }
        Ok(())
    }

    /// Number of grid points per axis, `ceil(80 / k)`.
    pub fn grid_side(&self) -> usize {
        FRAME_SIDE.div_ceil(self.stride)
    }
}

/// How a map was produced; stored alongside exported maps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MapMethod {
    Perturbation {
        stride: usize,
        blur_sigma: f32,
        mask_variance: f32,
    },
    BruteForce {
        blur_sigma: f32,
        mask_variance: f32,
    },
    Jacobian {
        epsilon: f32,
    },
}

/// Non-negative per-pixel scores for one head at one timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap {
    /// 80x80, the bilinear upsampling of `grid_scores`.
    pub scores: Tensor,
    /// Values at the evaluated grid points before upsampling.
    pub grid_scores: Tensor,
    pub head: Head,
    pub t: usize,
    pub method: MapMethod,
}

/// Precomputed blur of one frame, reused for every mask center.
#[derive(Clone, Debug)]
pub struct Perturber {
    frame: Tensor,
    blurred: Tensor,
    mask_variance: f32,
}

impl Perturber {
    pub fn new(frame: &Frame, cfg: &SaliencyConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Perturber {
            frame: frame.tensor().clone(),
            blurred: gaussian_blur(frame.tensor(), cfg.blur_sigma)?,
            mask_variance: cfg.mask_variance,
        })
    }

    pub fn blurred(&self) -> &Tensor {
        &self.blurred
    }

    /// The frame blurred around `(i, j)`.
    pub fn perturb(&self, i: usize, j: usize) -> Result<Tensor> {
        let mask = gaussian_mask((i, j), self.mask_variance, (FRAME_SIDE, FRAME_SIDE))?;
        let data = self
            .frame
            .data()
            .iter()
            .zip(self.blurred.data())
            .zip(mask.data())
            .map(|((&x, &a), &m)| x * (1.0 - m) + a * m)
            .collect();
        Tensor::new([FRAME_SIDE, FRAME_SIDE], data)
    }
}

/// Blurs `frame` locally around `(i, j)`.
pub fn perturb(frame: &Frame, i: usize, j: usize, cfg: &SaliencyConfig) -> Result<Frame> {
    let t = Perturber::new(frame, cfg)?.perturb(i, j)?;
    // convex combination of values in [0, 1]; clamp absorbs rounding
    Frame::new(t.map(|v| v.clamp(0.0, 1.0)))
}

/// `1/2 ||a - b||^2` in `f32`.
pub(crate) fn half_sq_dist(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = 0f32;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    0.5 * acc
}

fn head_score(head: Head, reference: &PolicyOutput, perturbed: &PolicyOutput) -> f32 {
    match head {
        Head::Actor => half_sq_dist(reference.logits.data(), perturbed.logits.data()),
        Head::Critic => {
            let d = reference.value - perturbed.value;
            0.5 * d * d
        }
    }
}

/// Saliency queries against one network, episode and its rollout.
#[derive(Clone, Copy, Debug)]
pub struct Explainer<'a> {
    net: &'a ActorCritic,
    episode: &'a Episode,
    cache: &'a RolloutCache,
}

impl<'a> Explainer<'a> {
    pub fn new(net: &'a ActorCritic, episode: &'a Episode, cache: &'a RolloutCache) -> Result<Self> {
        if cache.outputs.len() != episode.len() || cache.states.len() != episode.len() + 1 {
            return Err(Error::Param(format!(
                "rollout cache ({} outputs, {} states) does not match episode of length {}",
                cache.outputs.len(),
                cache.states.len(),
                episode.len()
            )));
        }
        Ok(Explainer {
            net,
            episode,
            cache,
        })
    }

    pub fn net(&self) -> &'a ActorCritic {
        self.net
    }

    pub fn episode(&self) -> &'a Episode {
        self.episode
    }

    pub fn cache(&self) -> &'a RolloutCache {
        self.cache
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t >= self.episode.len() {
            return Err(Error::Param(format!(
                "timestep {t} outside episode of length {}",
                self.episode.len()
            )));
        }
        Ok(())
    }

    fn perturbed_output(&self, t: usize, perturber: &Perturber, i: usize, j: usize) -> Result<PolicyOutput> {
        let input = perturber.perturb(i, j)?;
        Ok(self.net.forward_input(&input, &self.cache.states[t])?.0)
    }

    fn scores_at(&self, t: usize, perturber: &Perturber, i: usize, j: usize) -> Result<(f32, f32)> {
        let out = self.perturbed_output(t, perturber, i, j)?;
        let reference = &self.cache.outputs[t];
        Ok((
            head_score(Head::Actor, reference, &out),
            head_score(Head::Critic, reference, &out),
        ))
    }

    /// Score of the head selected in `cfg` at one location.
    pub fn saliency_at(&self, t: usize, i: usize, j: usize, cfg: &SaliencyConfig) -> Result<f32> {
        self.check_t(t)?;
        let perturber = Perturber::new(self.episode.frame(t)?, cfg)?;
        let out = self.perturbed_output(t, &perturber, i, j)?;
        Ok(head_score(cfg.head, &self.cache.outputs[t], &out))
    }

    /// `1/2 ||logits(I_1..t) - logits(I'_1..t)||^2`.
    pub fn policy_saliency_at(&self, t: usize, i: usize, j: usize, cfg: &SaliencyConfig) -> Result<f32> {
        self.saliency_at(t, i, j, &cfg.with_head(Head::Actor))
    }

    /// `1/2 (V(I_1..t) - V(I'_1..t))^2`.
    pub fn value_saliency_at(&self, t: usize, i: usize, j: usize, cfg: &SaliencyConfig) -> Result<f32> {
        self.saliency_at(t, i, j, &cfg.with_head(Head::Critic))
    }

    /// Actor and critic grids at points `0, k, 2k, ...` from one set of
    /// perturbed passes.
    fn grids(&self, t: usize, cfg: &SaliencyConfig, stride: usize, workers: &Workers) -> Result<(Tensor, Tensor)> {
        self.check_t(t)?;
        let perturber = Perturber::new(self.episode.frame(t)?, cfg)?;
        let side = FRAME_SIDE.div_ceil(stride);
        let cells = workers.map(side * side, |cell| {
            self.scores_at(t, &perturber, (cell / side) * stride, (cell % side) * stride)
        })?;
        let (actor, critic) = cells.into_iter().unzip();
        Ok((Tensor::new([side, side], actor)?, Tensor::new([side, side], critic)?))
    }

    fn upsampled(&self, grid: Tensor, head: Head, t: usize, cfg: &SaliencyConfig) -> Result<SaliencyMap> {
        Ok(SaliencyMap {
            scores: bilinear_upsample(&grid, (FRAME_SIDE, FRAME_SIDE))?,
            grid_scores: grid,
            head,
            t,
            method: MapMethod::Perturbation {
                stride: cfg.stride,
                blur_sigma: cfg.blur_sigma,
                mask_variance: cfg.mask_variance,
            },
        })
    }

    /// Actor and critic maps on the stride-`k` grid, upsampled to 80x80.
    pub fn saliency_maps(&self, t: usize, cfg: &SaliencyConfig, workers: &Workers) -> Result<(SaliencyMap, SaliencyMap)> {
        cfg.validate()?;
        let (actor, critic) = self.grids(t, cfg, cfg.stride, workers)?;
        Ok((
            self.upsampled(actor, Head::Actor, t, cfg)?,
            self.upsampled(critic, Head::Critic, t, cfg)?,
        ))
    }

    /// Map for `cfg.head`.
    pub fn saliency_map(&self, t: usize, cfg: &SaliencyConfig, workers: &Workers) -> Result<SaliencyMap> {
        let (actor, critic) = self.saliency_maps(t, cfg, workers)?;
        Ok(match cfg.head {
            Head::Actor => actor,
            Head::Critic => critic,
        })
    }

    /// Stride-1 evaluation at every pixel with no upsampling.
    pub fn brute_force_map(&self, t: usize, cfg: &SaliencyConfig, workers: &Workers) -> Result<SaliencyMap> {
        cfg.validate()?;
        let (actor, critic) = self.grids(t, cfg, 1, workers)?;
        let scores = match cfg.head {
            Head::Actor => actor,
            Head::Critic => critic,
        };
        Ok(SaliencyMap {
            grid_scores: scores.clone(),
            scores,
            head: cfg.head,
            t,
            method: MapMethod::BruteForce {
                blur_sigma: cfg.blur_sigma,
                mask_variance: cfg.mask_variance,
            },
        })
    }
}
