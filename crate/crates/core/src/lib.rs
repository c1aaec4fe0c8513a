//! Perturbation-based saliency for recurrent actor-critic agents.
//!
//! A small inference engine (4 conv layers, an LSTM and a linear policy/value
//! head over 80x80 grayscale frames) plus the tools to explain it: blur
//! perturbation saliency for both heads, memory saliency on the LSTM cell,
//! a finite-difference Jacobian baseline, overlay rendering and statistics.

pub mod cli;
pub mod episode;
pub mod error;
pub mod fixtures;
pub mod net;
pub mod parallel;
pub mod render;
pub mod saliency;
pub mod tensor;

pub use episode::{Episode, Frame};
pub use error::{Error, Result};
pub use net::{ActorCritic, RolloutCache};
pub use parallel::Workers;
pub use saliency::{Explainer, Head, SaliencyConfig, SaliencyMap};
pub use tensor::Tensor;
