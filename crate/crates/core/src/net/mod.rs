//! The recurrent actor-critic network: four stride-2 convolutions, an LSTM
//! and a shared affine head whose first `n` rows are policy logits and whose
//! last row is the value estimate.

mod weights;

pub use weights::{load_weights, save_weights, FORMAT_VERSION, MANIFEST_FILE};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::episode::{Episode, Frame};
use crate::error::{Error, Result};
use crate::tensor::{affine, conv2d, lstm_step, softmax, Conv2dParams, LstmParams, Tensor};

/// Side length of a preprocessed frame.
pub const FRAME_SIDE: usize = 80;
pub const HIDDEN_SIZE: usize = 256;
pub const CONV_CHANNELS: usize = 32;
pub const CONV_LAYERS: usize = 4;
/// Spatial side after the conv stack: 80 -> 40 -> 20 -> 10 -> 5.
pub const FEATURE_SIDE: usize = 5;
/// Length of the flattened conv output fed to the LSTM.
pub const LSTM_INPUT: usize = CONV_CHANNELS * FEATURE_SIDE * FEATURE_SIDE;

/// Nonlinearity applied after every convolution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Elu,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f32) -> f32 {
        match self {
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "elu" => Ok(Activation::Elu),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Config(format!(
                "unknown activation {other:?} (expected elu, relu or tanh)"
            ))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Elu => "elu",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub n_actions: usize,
    pub activation: Activation,
}

impl NetworkConfig {
    pub fn new(n_actions: usize, activation: Activation) -> Result<Self> {
        if n_actions < 2 {
            return Err(Error::Config(format!(
                "n_actions must be at least 2, got {n_actions}"
            )));
        }
        Ok(NetworkConfig {
            n_actions,
            activation,
        })
    }

    /// Names and shapes of every tensor the network needs, in container order.
    pub fn tensor_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let c = CONV_CHANNELS;
        let h = HIDDEN_SIZE;
        vec![
            ("conv1.weight", vec![c, 1, 3, 3]),
            ("conv1.bias", vec![c]),
            ("conv2.weight", vec![c, c, 3, 3]),
            ("conv2.bias", vec![c]),
            ("conv3.weight", vec![c, c, 3, 3]),
            ("conv3.bias", vec![c]),
            ("conv4.weight", vec![c, c, 3, 3]),
            ("conv4.bias", vec![c]),
            ("lstm.weight_ih", vec![4 * h, LSTM_INPUT]),
            ("lstm.weight_hh", vec![4 * h, h]),
            ("lstm.bias", vec![4 * h]),
            ("head.weight", vec![self.n_actions + 1, h]),
            ("head.bias", vec![self.n_actions + 1]),
        ]
    }
}

/// All learned tensors of the network.
#[derive(Clone, Debug, PartialEq)]
pub struct ActorCriticParams {
    pub conv: [Conv2dParams; CONV_LAYERS],
    pub lstm: LstmParams,
    pub head_weight: Tensor,
    pub head_bias: Tensor,
}

impl ActorCriticParams {
    /// Builds parameters from tensors listed in [`NetworkConfig::tensor_shapes`]
    /// order, checking every shape.
    pub fn from_tensors(config: &NetworkConfig, tensors: Vec<Tensor>) -> Result<Self> {
        let shapes = config.tensor_shapes();
        if tensors.len() != shapes.len() {
            return Err(Error::Shape(format!(
                "expected {} tensors, got {}",
                shapes.len(),
                tensors.len()
            )));
        }
        for ((name, shape), t) in shapes.iter().zip(&tensors) {
            if t.shape() != shape.as_slice() {
                return Err(Error::Shape(format!(
                    "{name}: expected shape {shape:?}, found {:?}",
                    t.shape()
                )));
            }
        }
        let mut it = tensors.into_iter();
        let mut next = || it.next().expect("length checked above");
        let mut conv_layer = || Conv2dParams::new(next(), next(), 2, 1);
        let conv = [conv_layer()?, conv_layer()?, conv_layer()?, conv_layer()?];
        let lstm = LstmParams::new(next(), next(), next())?;
        Ok(ActorCriticParams {
            conv,
            lstm,
            head_weight: next(),
            head_bias: next(),
        })
    }

    pub fn zeros(config: &NetworkConfig) -> Self {
        let tensors = config
            .tensor_shapes()
            .into_iter()
            .map(|(_, s)| Tensor::zeros(s))
            .collect();
        Self::from_tensors(config, tensors).expect("shapes come from the config")
    }

    /// Tensors paired with their container names.
    pub fn named_tensors(&self) -> Vec<(&'static str, &Tensor)> {
        let [c1, c2, c3, c4] = &self.conv;
        vec![
            ("conv1.weight", &c1.weight),
            ("conv1.bias", &c1.bias),
            ("conv2.weight", &c2.weight),
            ("conv2.bias", &c2.bias),
            ("conv3.weight", &c3.weight),
            ("conv3.bias", &c3.bias),
            ("conv4.weight", &c4.weight),
            ("conv4.bias", &c4.bias),
            ("lstm.weight_ih", &self.lstm.weight_ih),
            ("lstm.weight_hh", &self.lstm.weight_hh),
            ("lstm.bias", &self.lstm.bias),
            ("head.weight", &self.head_weight),
            ("head.bias", &self.head_bias),
        ]
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        let [c1, c2, c3, c4] = &mut self.conv;
        vec![
            ("conv1.weight", &mut c1.weight),
            ("conv1.bias", &mut c1.bias),
            ("conv2.weight", &mut c2.weight),
            ("conv2.bias", &mut c2.bias),
            ("conv3.weight", &mut c3.weight),
            ("conv3.bias", &mut c3.bias),
            ("conv4.weight", &mut c4.weight),
            ("conv4.bias", &mut c4.bias),
            ("lstm.weight_ih", &mut self.lstm.weight_ih),
            ("lstm.weight_hh", &mut self.lstm.weight_hh),
            ("lstm.bias", &mut self.lstm.bias),
            ("head.weight", &mut self.head_weight),
            ("head.bias", &mut self.head_bias),
        ]
    }

    fn check(&self, config: &NetworkConfig) -> Result<()> {
        for ((name, t), (_, shape)) in self.named_tensors().into_iter().zip(config.tensor_shapes()) {
            if t.shape() != shape.as_slice() {
                return Err(Error::Shape(format!(
                    "{name}: expected shape {shape:?}, found {:?}",
                    t.shape()
                )));
            }
        }
        if self.conv.iter().any(|c| c.stride != 2 || c.padding != 1) {
            return Err(Error::Shape("conv layers must use stride 2, padding 1".into()));
        }
        Ok(())
    }
}

/// LSTM hidden and cell vectors carried between timesteps.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentState {
    pub h: Tensor,
    pub c: Tensor,
}

impl RecurrentState {
    pub fn zeros() -> Self {
        RecurrentState {
            h: Tensor::zeros([HIDDEN_SIZE]),
            c: Tensor::zeros([HIDDEN_SIZE]),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOutput {
    /// Pre-softmax policy outputs.
    pub logits: Tensor,
    pub probs: Tensor,
    pub value: f32,
}

/// Per-timestep states and outputs of one episode.
///
/// `states[0]` is the zero state and `states[t + 1]` is the state after
/// consuming frame `t`, so `states[t]` is what frame `t` is replayed from.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutCache {
    pub states: Vec<RecurrentState>,
    pub outputs: Vec<PolicyOutput>,
    pub episode_ref: String,
}

impl RolloutCache {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }
}

/// A validated network: configuration plus matching parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ActorCritic {
    config: NetworkConfig,
    params: ActorCriticParams,
}

impl ActorCritic {
    pub fn new(config: NetworkConfig, params: ActorCriticParams) -> Result<Self> {
        NetworkConfig::new(config.n_actions, config.activation)?;
        params.check(&config)?;
        Ok(ActorCritic { config, params })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn params(&self) -> &ActorCriticParams {
        &self.params
    }

    pub fn into_parts(self) -> (NetworkConfig, ActorCriticParams) {
        (self.config, self.params)
    }

    pub fn n_actions(&self) -> usize {
        self.config.n_actions
    }

    /// Flattened conv features (`LSTM_INPUT` values, channel-major).
    pub fn features(&self, input: &Tensor) -> Result<Tensor> {
        if input.shape() != [FRAME_SIDE, FRAME_SIDE] {
            return Err(Error::Shape(format!(
                "network input must be {FRAME_SIDE}x{FRAME_SIDE}, got {:?}",
                input.shape()
            )));
        }
        let act = self.config.activation;
        let mut x = input.clone().reshape([1, FRAME_SIDE, FRAME_SIDE])?;
        for layer in &self.params.conv {
            x = conv2d(&x, layer)?;
            for v in x.data_mut() {
                *v = act.apply(*v);
            }
        }
        x.reshape([LSTM_INPUT])
    }

    /// One recurrent step on an arbitrary 80x80 input (values need not lie in
    /// `[0, 1]`; finite differences step slightly outside it).
    pub fn forward_input(
        &self,
        input: &Tensor,
        state: &RecurrentState,
    ) -> Result<(PolicyOutput, RecurrentState)> {
        let features = self.features(input)?;
        let (h, c) = lstm_step(&features, &state.h, &state.c, &self.params.lstm)?;
        let head = affine(&h, &self.params.head_weight, &self.params.head_bias)?;
        let n = self.config.n_actions;
        let logits = Tensor::new([n], head.data()[..n].to_vec())?;
        let probs = softmax(&logits)?;
        let output = PolicyOutput {
            logits,
            probs,
            value: head.data()[n],
        };
        Ok((output, RecurrentState { h, c }))
    }

    pub fn forward_step(
        &self,
        frame: &Frame,
        state: &RecurrentState,
    ) -> Result<(PolicyOutput, RecurrentState)> {
        self.forward_input(frame.tensor(), state)
    }

    /// Runs the whole episode from the zero state, caching every state.
    pub fn rollout(&self, episode: &Episode) -> Result<RolloutCache> {
        if episode.is_empty() {
            return Err(Error::Param("cannot roll out an empty episode".into()));
        }
        let mut states = Vec::with_capacity(episode.len() + 1);
        let mut outputs = Vec::with_capacity(episode.len());
        states.push(RecurrentState::zeros());
        for frame in episode.frames() {
            let (out, next) = self.forward_step(frame, states.last().expect("non-empty"))?;
            outputs.push(out);
            states.push(next);
        }
        Ok(RolloutCache {
            states,
            outputs,
            episode_ref: episode.source.clone(),
        })
    }
}
