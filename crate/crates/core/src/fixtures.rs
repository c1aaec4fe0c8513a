//! Hand-constructed networks with known behavior, used as test oracles and
//! demo inputs.
//!
//! They all share one routing trick: conv layers 2-4 copy a channel through
//! their center tap, so conv4 cell `(y, x)` of that channel equals the conv1
//! response at `(8y, 8x)`, which reads input rows `16y - 1 ..= 16y + 1` and
//! columns `16x - 1 ..= 16x + 1`. LSTM units are driven with saturated gates
//! (`+-30`) so that the cell either forgets or integrates exactly.

use crate::episode::synth_weights;
use crate::error::Result;
use crate::net::{
    ActorCritic, ActorCriticParams, Activation, NetworkConfig, CONV_CHANNELS, FEATURE_SIDE,
    FRAME_SIDE, HIDDEN_SIZE,
};
use crate::tensor::Tensor;

const GATE_ON: f32 = 30.0;
const GATE_OFF: f32 = -30.0;

/// Input pixel read by conv1 kernel tap `(ky, kx)` for feature cell `(y, x)`,
/// if it lies inside the frame.
pub fn cell_tap_pixel(cell: (usize, usize), tap: (usize, usize)) -> Option<(usize, usize)> {
    let r = (16 * cell.0 + tap.0).checked_sub(1)?;
    let c = (16 * cell.1 + tap.1).checked_sub(1)?;
    (r < FRAME_SIDE && c < FRAME_SIDE).then_some((r, c))
}

/// Index of channel `ch`, cell `(y, x)` in the flattened LSTM input.
pub fn feature_index(ch: usize, cell: (usize, usize)) -> usize {
    ch * FEATURE_SIDE * FEATURE_SIDE + cell.0 * FEATURE_SIDE + cell.1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Gate {
    Input = 0,
    Forget = 1,
    Candidate = 2,
    Output = 3,
}

struct Builder {
    config: NetworkConfig,
    params: ActorCriticParams,
}

impl Builder {
    fn new(n_actions: usize) -> Result<Self> {
        let config = NetworkConfig::new(n_actions, Activation::Elu)?;
        Ok(Builder {
            params: ActorCriticParams::zeros(&config),
            config,
        })
    }

    fn conv1_kernel(&mut self, ch: usize, kernel: [[f32; 3]; 3]) {
        let w = self.params.conv[0].weight.data_mut();
        for (ky, row) in kernel.iter().enumerate() {
            for (kx, &v) in row.iter().enumerate() {
                w[ch * 9 + ky * 3 + kx] = v;
            }
        }
    }

    fn pass_through(&mut self, ch: usize) {
        for layer in &mut self.params.conv[1..] {
            layer.weight.data_mut()[(ch * CONV_CHANNELS + ch) * 9 + 4] = 1.0;
        }
    }

    fn gate_bias(&mut self, unit: usize, gate: Gate, v: f32) {
        self.params.lstm.bias.data_mut()[gate as usize * HIDDEN_SIZE + unit] = v;
    }

    fn candidate_input(&mut self, unit: usize, feature: usize, w: f32) {
        let row = Gate::Candidate as usize * HIDDEN_SIZE + unit;
        let cols = self.params.lstm.weight_ih.shape()[1];
        self.params.lstm.weight_ih.data_mut()[row * cols + feature] = w;
    }

    /// Saturated gates: input and output open, forget as given.
    fn open_unit(&mut self, unit: usize, remember: bool) {
        self.gate_bias(unit, Gate::Input, GATE_ON);
        self.gate_bias(unit, Gate::Output, GATE_ON);
        self.gate_bias(unit, Gate::Forget, if remember { GATE_ON } else { GATE_OFF });
    }

    fn head(&mut self, row: usize, unit: usize, w: f32) {
        self.params.head_weight.data_mut()[row * HIDDEN_SIZE + unit] = w;
    }

    fn build(self) -> Result<ActorCritic> {
        ActorCritic::new(self.config, self.params)
    }
}

/// Linear pixel reader: the value output is (to first order, exactly on
/// `[0, 1]` frames) `sum_p w_p x_p` over 25 disjoint 3x3 patches.
#[derive(Clone, Debug)]
pub struct LinearReader {
    pub net: ActorCritic,
    pub kernel: [[f32; 3]; 3],
    /// Sign applied to each of the 25 patches in the value head. Signs
    /// alternate so the value, and with it the f32 rounding that limits
    /// finite differences, stays small.
    pub signs: [f32; 25],
}

impl LinearReader {
    /// Input scale of each LSTM unit; small enough that `tanh` is linear to
    /// within ~1e-5 relative.
    pub const UNIT_GAIN: f32 = 0.01;
    pub const KERNEL: [[f32; 3]; 3] = [[0.02, 0.05, 0.03], [0.08, 0.1, 0.04], [0.01, 0.06, 0.07]];

    pub fn new(n_actions: usize) -> Result<Self> {
        let mut b = Builder::new(n_actions)?;
        b.conv1_kernel(0, Self::KERNEL);
        b.pass_through(0);
        let mut signs = [1.0f32; 25];
        for (cell, sign) in signs.iter_mut().enumerate() {
            if cell % 2 == 1 {
                *sign = -1.0;
            }
            let (y, x) = (cell / FEATURE_SIDE, cell % FEATURE_SIDE);
            b.candidate_input(cell, feature_index(0, (y, x)), Self::UNIT_GAIN);
            b.open_unit(cell, false);
            b.head(n_actions, cell, *sign / Self::UNIT_GAIN);
        }
        Ok(LinearReader {
            net: b.build()?,
            kernel: Self::KERNEL,
            signs,
        })
    }

    /// Signed weight of every pixel in the value output.
    pub fn pixel_weights(&self) -> Tensor {
        let mut w = Tensor::zeros([FRAME_SIDE, FRAME_SIDE]);
        for cell in 0..25 {
            let (y, x) = (cell / FEATURE_SIDE, cell % FEATURE_SIDE);
            for ky in 0..3 {
                for kx in 0..3 {
                    if let Some((r, c)) = cell_tap_pixel((y, x), (ky, kx)) {
                        w.data_mut()[r * FRAME_SIDE + c] = self.signs[cell] * self.kernel[ky][kx];
                    }
                }
            }
        }
        w
    }
}

/// Reads the top two rows of each hint block into that action's logit.
///
/// Only four actions are supported: each 20-column block then contains one
/// feature cell (columns centered on 16, 32, 48, 64).
#[derive(Clone, Debug)]
pub struct HintReader {
    pub net: ActorCritic,
    pub gain: f32,
}

impl HintReader {
    pub const N_ACTIONS: usize = 4;
    pub const DEFAULT_GAIN: f32 = 16.0;

    /// Feature cell read for `action`.
    pub fn cell(action: usize) -> (usize, usize) {
        (0, action + 1)
    }

    /// Candidate pre-activation is `gain * (mean - 1/2)` where `mean` is the
    /// average of the six in-frame pixels of the action's cell.
    pub fn new(gain: f32) -> Result<Self> {
        let mut b = Builder::new(Self::N_ACTIONS)?;
        b.conv1_kernel(0, [[1.0 / 6.0; 3]; 3]);
        b.pass_through(0);
        for a in 0..Self::N_ACTIONS {
            b.candidate_input(a, feature_index(0, Self::cell(a)), gain);
            b.gate_bias(a, Gate::Candidate, -0.5 * gain);
            b.open_unit(a, false);
            b.head(a, a, 1.0);
        }
        Ok(HintReader {
            net: b.build()?,
            gain,
        })
    }
}

/// One LSTM unit that accumulates `tanh(a * m + b)` every step, where `m` is
/// the mean of the 3x3 patch at rows/cols 31..=33, and emits `v * tanh(c)` as
/// logit 0.
#[derive(Clone, Debug)]
pub struct Integrator {
    pub net: ActorCritic,
    pub input_weight: f32,
    pub input_bias: f32,
    pub readout: f32,
}

impl Integrator {
    pub const CELL: (usize, usize) = (2, 2);

    pub fn new(n_actions: usize) -> Result<Self> {
        let (input_weight, input_bias, readout) = (0.5, 0.1, 1.0);
        let mut b = Builder::new(n_actions)?;
        b.conv1_kernel(0, [[1.0 / 9.0; 3]; 3]);
        b.pass_through(0);
        b.candidate_input(0, feature_index(0, Self::CELL), input_weight);
        b.gate_bias(0, Gate::Candidate, input_bias);
        b.open_unit(0, true);
        b.head(0, 0, readout);
        Ok(Integrator {
            net: b.build()?,
            input_weight,
            input_bias,
            readout,
        })
    }
}

/// Random conv stack and head with all LSTM input/recurrent weights and the
/// candidate bias zeroed, so the cell state is identically zero.
pub fn memoryless(seed: u64, n_actions: usize, scale: f32) -> Result<ActorCritic> {
    let config = NetworkConfig::new(n_actions, Activation::Elu)?;
    let (config, mut params) = synth_weights(seed, config, scale)?.into_parts();
    params.lstm.weight_ih = Tensor::zeros(params.lstm.weight_ih.shape().to_vec());
    params.lstm.weight_hh = Tensor::zeros(params.lstm.weight_hh.shape().to_vec());
    let h = HIDDEN_SIZE;
    params.lstm.bias.data_mut()[2 * h..3 * h].fill(0.0);
    ActorCritic::new(config, params)
}

/// A nonlinear network invariant under left-right mirroring of its input.
///
/// Channel 0 reads columns 15/16 of rows 31..=33 through cell (2, 1) and
/// channel 1 reads the mirrored columns 64/63 through cell (2, 4).
pub fn mirror_reader(n_actions: usize) -> Result<ActorCritic> {
    let (a, bw) = (0.7f32, 0.4f32);
    let mut b = Builder::new(n_actions)?;
    b.conv1_kernel(0, [[a, bw, 0.0], [0.5 * a, bw, 0.0], [a, 0.5 * bw, 0.0]]);
    b.conv1_kernel(1, [[bw, a, 0.0], [bw, 0.5 * a, 0.0], [0.5 * bw, a, 0.0]]);
    b.pass_through(0);
    b.pass_through(1);
    for (unit, w, bias) in [(0, 1.5f32, -0.4f32), (1, -0.8, 0.3)] {
        b.candidate_input(unit, feature_index(0, (2, 1)), w);
        b.candidate_input(unit, feature_index(1, (2, 4)), w);
        b.gate_bias(unit, Gate::Candidate, bias);
        b.open_unit(unit, false);
    }
    b.head(0, 0, 3.0);
    b.head(1, 1, -2.0);
    b.head(n_actions, 0, 1.0);
    b.head(n_actions, 1, 1.0);
    b.build()
}
