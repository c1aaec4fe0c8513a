use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::{Episode, Frame};
use crate::error::{Error, Result};
use crate::net::{ActorCritic, ActorCriticParams, NetworkConfig, FRAME_SIDE};
use crate::tensor::Tensor;

/// Side length of the bouncing dot.
pub const DOT_SIZE: usize = 3;
const BAR_WIDTH: usize = 2;
const MAX_DOT_POS: i64 = (FRAME_SIDE - DOT_SIZE) as i64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    /// A square that moves with constant velocity and reflects off the
    /// frame edges.
    BouncingDot,
    /// A full-height vertical bar that drifts right and wraps around.
    DriftingBar,
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bouncing_dot" | "bouncing-dot" => Ok(Pattern::BouncingDot),
            "drifting_bar" | "drifting-bar" => Ok(Pattern::DriftingBar),
            other => Err(Error::Config(format!("unknown pattern {other:?}"))),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pattern::BouncingDot => "bouncing_dot",
            Pattern::DriftingBar => "drifting_bar",
        })
    }
}

/// Starting `(row, col)` and velocity of the bouncing dot for `seed`.
pub fn bounce_position(seed: u64) -> ((i64, i64), (i64, i64)) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = (rng.gen_range(0..=MAX_DOT_POS), rng.gen_range(0..=MAX_DOT_POS));
    let mut velocity = || {
        let speed = rng.gen_range(1..=3);
        if rng.gen_bool(0.5) {
            speed
        } else {
            -speed
        }
    };
    (start, (velocity(), velocity()))
}

/// Reflecting step on `[0, MAX_DOT_POS]`.
fn step(pos: &mut i64, vel: &mut i64) {
    *pos += *vel;
    if *pos < 0 {
        *pos = -*pos;
        *vel = -*vel;
    } else if *pos > MAX_DOT_POS {
        *pos = 2 * MAX_DOT_POS - *pos;
        *vel = -*vel;
    }
}

pub fn synth_episode(seed: u64, timesteps: usize, pattern: Pattern) -> Result<Episode> {
    if timesteps == 0 {
        return Err(Error::Param("synthetic episodes need T >= 1".into()));
    }
    let mut frames = Vec::with_capacity(timesteps);
    match pattern {
        Pattern::BouncingDot => {
            let ((mut r, mut c), (mut vr, mut vc)) = bounce_position(seed);
            for _ in 0..timesteps {
                let (r0, c0) = (r as usize, c as usize);
                frames.push(Frame::new(Tensor::from_fn([FRAME_SIDE, FRAME_SIDE], |i| {
                    let (y, x) = (i / FRAME_SIDE, i % FRAME_SIDE);
                    let inside = (r0..r0 + DOT_SIZE).contains(&y) && (c0..c0 + DOT_SIZE).contains(&x);
                    if inside { 1.0 } else { 0.0 }
                }))?);
                step(&mut r, &mut vr);
                step(&mut c, &mut vc);
            }
        }
        Pattern::DriftingBar => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let start = rng.gen_range(0..FRAME_SIDE);
            let speed = rng.gen_range(1..=2);
            for t in 0..timesteps {
                let left = (start + t * speed) % FRAME_SIDE;
                frames.push(Frame::new(Tensor::from_fn([FRAME_SIDE, FRAME_SIDE], |i| {
                    let offset = (i % FRAME_SIDE + FRAME_SIDE - left) % FRAME_SIDE;
                    if offset < BAR_WIDTH { 1.0 } else { 0.0 }
                }))?);
            }
        }
    }
    Episode::new(frames, format!("synth:{pattern}:seed={seed}"))
}

/// Seeded uniformly random actions, e.g. to drive hint injection.
pub fn random_actions(seed: u64, timesteps: usize, n_actions: usize) -> Result<Vec<usize>> {
    if n_actions == 0 {
        return Err(Error::Param("n_actions must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..timesteps).map(|_| rng.gen_range(0..n_actions)).collect())
}

/// Seeded uniform weights in `[-scale, scale]`, filled in container order.
pub fn synth_weights(seed: u64, config: NetworkConfig, scale: f32) -> Result<ActorCritic> {
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::Param(format!("weight scale must be >= 0, got {scale}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tensors = config
        .tensor_shapes()
        .into_iter()
        .map(|(_, shape)| Tensor::from_fn(shape, |_| rng.gen_range(-1.0f32..=1.0) * scale))
        .collect();
    ActorCritic::new(config, ActorCriticParams::from_tensors(&config, tensors)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Activation, RecurrentState};

    /// Closed-form reflection: fold `p0 + v t` onto `[0, max]`.
    fn folded(p0: i64, v: i64, t: i64, max: i64) -> i64 {
        let m = (p0 + v * t).rem_euclid(2 * max);
        if m > max {
            2 * max - m
        } else {
            m
        }
    }

    fn dot_corner(f: &Frame) -> (i64, i64) {
        let idx = f.tensor().data().iter().position(|&v| v == 1.0).unwrap();
        ((idx / FRAME_SIDE) as i64, (idx % FRAME_SIDE) as i64)
    }

    #[test]
    fn bouncing_dot_follows_reflection() {
        for seed in 0..20 {
            let ep = synth_episode(seed, 120, Pattern::BouncingDot).unwrap();
            let ((r0, c0), (vr, vc)) = bounce_position(seed);
            for (t, f) in ep.frames().iter().enumerate() {
                let expected = (
                    folded(r0, vr, t as i64, MAX_DOT_POS),
                    folded(c0, vc, t as i64, MAX_DOT_POS),
                );
                assert_eq!(dot_corner(f), expected, "seed {seed} t {t}");
                assert_eq!(f.tensor().sum(), (DOT_SIZE * DOT_SIZE) as f32);
            }
        }
    }

    #[test]
    fn deterministic_binary_frames() {
        for pattern in [Pattern::BouncingDot, Pattern::DriftingBar] {
            let a = synth_episode(7, 16, pattern).unwrap();
            assert_eq!(a, synth_episode(7, 16, pattern).unwrap());
            assert_ne!(a, synth_episode(8, 16, pattern).unwrap());
            for f in a.frames() {
                assert!(f.tensor().data().iter().all(|&v| v == 0.0 || v == 1.0));
            }
        }
        assert!(synth_episode(1, 0, Pattern::BouncingDot).is_err());
    }

    #[test]
    fn drifting_bar_wraps() {
        let ep = synth_episode(3, 100, Pattern::DriftingBar).unwrap();
        for f in ep.frames() {
            assert_eq!(f.tensor().sum(), (BAR_WIDTH * FRAME_SIDE) as f32);
        }
    }

    #[test]
    fn synth_weights_determinism_and_range() {
        let config = NetworkConfig::new(6, Activation::Elu).unwrap();
        let a = synth_weights(42, config, 0.1).unwrap();
        assert_eq!(a, synth_weights(42, config, 0.1).unwrap());
        for (_, t) in a.params().named_tensors() {
            assert!(t.data().iter().all(|v| v.abs() <= 0.1));
        }
        assert!(synth_weights(1, config, -1.0).is_err());
    }

    #[test]
    fn zero_scale_gives_uniform_policy() {
        let config = NetworkConfig::new(4, Activation::Elu).unwrap();
        let net = synth_weights(5, config, 0.0).unwrap();
        let ep = synth_episode(2, 1, Pattern::BouncingDot).unwrap();
        let (out, _) = net.forward_step(&ep.frames()[0], &RecurrentState::zeros()).unwrap();
        assert!(out.probs.data().iter().all(|&p| (p - 0.25).abs() < 1e-6));
        assert_eq!(out.value, 0.0);
    }
}
