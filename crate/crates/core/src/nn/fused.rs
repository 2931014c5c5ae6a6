//! Inference with batch-norm folded into the preceding dense layers.
//!
//! Folding turns each hidden block into one affine map plus ReLU, so a
//! forward pass is two fused blocks and an affine output with softmax.
//! [`FusedMlp::infer_into`] does not allocate.

use crate::error::{Error, Result};
use crate::radar::NUM_CLASSES;
use crate::scalar::Scalar;

use super::loss::softmax_into;
use super::train::Classifier;

#[derive(Debug, Clone, PartialEq)]
struct Affine<T> {
    inputs: usize,
    outputs: usize,
    weights: Vec<T>,
    bias: Vec<T>,
}

impl<T: Scalar> Affine<T> {
    #[inline]
    fn apply(&self, x: &[T], out: &mut [T], relu: bool) {
        for (j, o) in out[..self.outputs].iter_mut().enumerate() {
            let w = &self.weights[j * self.inputs..(j + 1) * self.inputs];
            let mut acc = self.bias[j];
            for (a, b) in w.iter().zip(x) {
                acc += *a * *b;
            }
            *o = if relu { acc.max(T::zero()) } else { acc };
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedMlp<T> {
    hidden: Vec<Affine<T>>,
    output: Affine<T>,
    max_width: usize,
}

/// Reusable activation buffers for [`FusedMlp::infer_into`].
#[derive(Debug, Clone)]
pub struct FusedScratch<T> {
    front: Vec<T>,
    back: Vec<T>,
}

impl<T: Scalar> FusedMlp<T> {
    pub fn from_classifier(model: &Classifier<T>) -> Self {
        let params = model.params();
        let hidden: Vec<Affine<T>> = params
            .hidden
            .iter()
            .map(|b| {
                let (d, n) = (&b.dense, &b.norm);
                let mut weights = d.weights.clone();
                let mut bias = vec![T::zero(); d.outputs];
                for j in 0..d.outputs {
                    let scale = n.gamma[j] / (n.running_var[j] + n.epsilon).sqrt();
                    for w in &mut weights[j * d.inputs..(j + 1) * d.inputs] {
                        *w *= scale;
                    }
                    bias[j] = scale * (d.bias[j] - n.running_mean[j]) + n.beta[j];
                }
                Affine {
                    inputs: d.inputs,
                    outputs: d.outputs,
                    weights,
                    bias,
                }
            })
            .collect();
        let o = &params.output;
        let output = Affine {
            inputs: o.inputs,
            outputs: o.outputs,
            weights: o.weights.clone(),
            bias: o.bias.clone(),
        };
        let max_width = hidden
            .iter()
            .map(|a| a.outputs)
            .chain([output.outputs])
            .max()
            .unwrap_or(NUM_CLASSES);
        Self {
            hidden,
            output,
            max_width,
        }
    }

    pub fn input_width(&self) -> usize {
        self.hidden.first().map_or(self.output.inputs, |a| a.inputs)
    }

    pub fn scratch(&self) -> FusedScratch<T> {
        FusedScratch {
            front: vec![T::zero(); self.max_width],
            back: vec![T::zero(); self.max_width],
        }
    }

    pub fn infer_into(
        &self,
        features: &[T],
        scratch: &mut FusedScratch<T>,
        probabilities: &mut [T; NUM_CLASSES],
    ) -> Result<()> {
        if features.len() != self.input_width() {
            return Err(Error::LengthMismatch {
                expected: self.input_width(),
                actual: features.len(),
            });
        }
        if scratch.front.len() < self.max_width || scratch.back.len() < self.max_width {
            return Err(Error::ShapeMismatch);
        }
        let FusedScratch { front, back } = scratch;
        let mut input: &[T] = features;
        let mut width = features.len();
        for layer in &self.hidden {
            layer.apply(input, front, true);
            std::mem::swap(front, back);
            width = layer.outputs;
            input = &back[..width];
        }
        debug_assert_eq!(width, self.output.inputs);
        self.output.apply(input, front, false);
        softmax_into(&front[..NUM_CLASSES], probabilities);
        Ok(())
    }

    pub fn infer(&self, features: &[T]) -> Result<[T; NUM_CLASSES]> {
        let mut scratch = self.scratch();
        let mut out = [T::zero(); NUM_CLASSES];
        self.infer_into(features, &mut scratch, &mut out)?;
        Ok(out)
    }
}
