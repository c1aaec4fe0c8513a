use super::{half_sq_dist, Explainer};
use crate::error::{Error, Result};
use crate::net::RecurrentState;
use crate::tensor::scale;

pub const DEFAULT_MEMORY_FACTOR: f32 = 0.99;

/// Memory saliency for every timestep of an episode.
#[derive(Clone, Debug, PartialEq)]
pub struct MemorySaliencySeries {
    pub scores: Vec<f32>,
    pub factor: f32,
    pub perturb_hidden: bool,
}

impl Explainer<'_> {
    /// Shrinks the LSTM cell vector entering step `t` by `factor` (and the
    /// hidden vector too when `perturb_hidden`), replays frame `t` and
    /// returns `1/2 ||delta logits||^2`.
    pub fn memory_saliency(&self, t: usize, factor: f32, perturb_hidden: bool) -> Result<f32> {
        if !(factor > 0.0 && factor <= 1.0) {
            return Err(Error::Param(format!("memory factor must be in (0, 1], got {factor}")));
        }
        let frame = self.episode().frame(t)?;
        let entering = &self.cache().states[t];
        let state = RecurrentState {
            h: if perturb_hidden {
                scale(&entering.h, factor)
            } else {
                entering.h.clone()
            },
            c: scale(&entering.c, factor),
        };
        let (out, _) = self.net().forward_step(frame, &state)?;
        Ok(half_sq_dist(
            self.cache().outputs[t].logits.data(),
            out.logits.data(),
        ))
    }

    pub fn memory_series(&self, factor: f32, perturb_hidden: bool) -> Result<MemorySaliencySeries> {
        let scores = (0..self.episode().len())
            .map(|t| self.memory_saliency(t, factor, perturb_hidden))
            .collect::<Result<_>>()?;
        Ok(MemorySaliencySeries {
            scores,
            factor,
            perturb_hidden,
        })
    }
}
