use super::{Explainer, Head, MapMethod, SaliencyMap};
use crate::error::{Error, Result};
use crate::net::{PolicyOutput, FRAME_SIDE};
use crate::parallel::Workers;
use crate::tensor::Tensor;

pub const DEFAULT_JACOBIAN_EPSILON: f32 = 1e-3;

/// Index of the largest logit; ties resolve to the lowest index.
pub(crate) fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = k;
        }
    }
    best
}

impl Explainer<'_> {
    /// Gradient-magnitude baseline: `|df/dx|` per pixel by central
    /// differences, where `f` is the logit of the action chosen on the
    /// unperturbed frame (actor) or the value (critic).
    pub fn jacobian_saliency(&self, t: usize, head: Head, epsilon: f32, workers: &Workers) -> Result<SaliencyMap> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Param(format!("epsilon must be positive, got {epsilon}")));
        }
        let frame = self.episode().frame(t)?.tensor();
        let state = &self.cache().states[t];
        let target = argmax(self.cache().outputs[t].logits.data());
        let objective = |out: &PolicyOutput| match head {
            Head::Actor => out.logits.data()[target],
            Head::Critic => out.value,
        };
        let eval = |pixel: usize, delta: f32| -> Result<f32> {
            let mut input = frame.clone();
            input.data_mut()[pixel] += delta;
            Ok(objective(&self.net().forward_input(&input, state)?.0))
        };
        let grads = workers.map(FRAME_SIDE * FRAME_SIDE, |pixel| {
            let plus = eval(pixel, epsilon)?;
            let minus = eval(pixel, -epsilon)?;
            Ok(((plus - minus) / (2.0 * epsilon)).abs())
        })?;
        let scores = Tensor::new([FRAME_SIDE, FRAME_SIDE], grads)?;
        Ok(SaliencyMap {
            grid_scores: scores.clone(),
            scores,
            head,
            t,
            method: MapMethod::Jacobian { epsilon },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_first_tie() {
        assert_eq!(argmax(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax(&[0.1, 0.7, 0.7, -2.0]), 1);
    }
}
