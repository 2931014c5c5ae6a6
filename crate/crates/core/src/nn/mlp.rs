//! Dense → batch-norm → ReLU blocks followed by a dense output layer.
//!
//! Training-mode passes are pure functions of the parameters and return a
//! [`ForwardCache`]; running statistics are folded in separately by
//! [`MlpParams::update_running_stats`], so the same forward pass can be reused
//! for finite-difference checks without mutating anything.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::features::FEATURE_DIM;
use crate::radar::NUM_CLASSES;
use crate::scalar::Scalar;
use crate::seed::{self, tag};

use super::matrix::Matrix;

pub const DEFAULT_HIDDEN: [usize; 2] = [32, 32];
pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs × inputs`, row-major.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    fn forward(&self, x: &Matrix<T>) -> Matrix<T> {
        let mut out = Matrix::zeros(x.rows(), self.outputs);
        for r in 0..x.rows() {
            let xi = x.row(r);
            let o = out.row_mut(r);
            for (j, oj) in o.iter_mut().enumerate() {
                let w = &self.weights[j * self.inputs..(j + 1) * self.inputs];
                *oj = self.bias[j] + w.iter().zip(xi).map(|(&a, &b)| a * b).sum::<T>();
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub epsilon: T,
    pub momentum: T,
}

impl<T: Scalar> BatchNorm<T> {
    fn identity(width: usize) -> Self {
        Self {
            gamma: vec![T::one(); width],
            beta: vec![T::zero(); width],
            running_mean: vec![T::zero(); width],
            running_var: vec![T::one(); width],
            epsilon: T::lit(BN_EPSILON),
            momentum: T::lit(BN_MOMENTUM),
        }
    }

    pub fn width(&self) -> usize {
        self.gamma.len()
    }
}

/// One hidden block: dense, batch-norm, ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenBlock<T> {
    pub dense: Dense<T>,
    pub norm: BatchNorm<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T> {
    pub hidden: Vec<HiddenBlock<T>>,
    pub output: Dense<T>,
}

/// Checks `[12, h1, h2, 5]`.
pub fn validate_dims(dims: &[usize]) -> Result<()> {
    let ok = dims.len() == 4
        && dims[0] == FEATURE_DIM
        && dims[3] == NUM_CLASSES
        && dims.iter().all(|&d| d > 0);
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidDims(dims.to_vec()))
    }
}

/// He-style initialization: weights ~ N(0, 2 / fan_in), zero biases, identity
/// batch-norm with running statistics (0, 1).
pub fn init_params<T: Scalar>(dims: &[usize], seed: u64) -> Result<MlpParams<T>> {
    validate_dims(dims)?;
    let mut rng = seed::rng(seed::mix(&[tag::INIT, seed]));
    let mut dense = |inputs: usize, outputs: usize| {
        let normal = Normal::new(0.0, (2.0 / inputs as f64).sqrt()).unwrap();
        let mut d = Dense::zeros(inputs, outputs);
        for w in &mut d.weights {
            *w = T::lit(normal.sample(&mut rng));
        }
        d
    };
    let hidden = dims
        .windows(2)
        .take(dims.len() - 2)
        .map(|w| HiddenBlock {
            dense: dense(w[0], w[1]),
            norm: BatchNorm::identity(w[1]),
        })
        .collect();
    let output = dense(dims[dims.len() - 2], dims[dims.len() - 1]);
    Ok(MlpParams { hidden, output })
}

/// Gradients of the trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub hidden: Vec<BlockGradients<T>>,
    pub output: DenseGradients<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGradients<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockGradients<T> {
    pub dense: DenseGradients<T>,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
}

impl<T: Scalar> Gradients<T> {
    /// Same order as [`MlpParams::trainable_mut`].
    pub fn slices(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        for b in &self.hidden {
            out.extend([&b.dense.weights[..], &b.dense.bias, &b.gamma, &b.beta]);
        }
        out.extend([&self.output.weights[..], &self.output.bias]);
        out
    }
}

/// Intermediate values of one hidden block in a training-mode pass.
#[derive(Debug, Clone)]
struct BlockCache<T> {
    input: Matrix<T>,
    normalized: Matrix<T>,
    /// Post-BN, pre-ReLU.
    pre_activation: Matrix<T>,
    inv_std: Vec<T>,
    batch_mean: Vec<T>,
    batch_var: Vec<T>,
}

/// Everything the backward pass needs from a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    blocks: Vec<BlockCache<T>>,
    last_hidden: Matrix<T>,
    batch: usize,
}

impl<T: Scalar> ForwardCache<T> {
    /// Post-BN, pre-ReLU activations of hidden block `i`.
    pub fn pre_activation(&self, i: usize) -> &Matrix<T> {
        &self.blocks[i].pre_activation
    }

    /// Normalized (pre-scale) activations of hidden block `i`.
    pub fn normalized(&self, i: usize) -> &Matrix<T> {
        &self.blocks[i].normalized
    }
}

impl<T: Scalar> MlpParams<T> {
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self
            .hidden
            .first()
            .map_or(self.output.inputs, |b| b.dense.inputs)];
        d.extend(self.hidden.iter().map(|b| b.dense.outputs));
        d.push(self.output.outputs);
        d
    }

    pub fn parameter_count(&self) -> usize {
        self.hidden
            .iter()
            .map(|b| b.dense.weights.len() + b.dense.bias.len() + 2 * b.norm.width())
            .sum::<usize>()
            + self.output.weights.len()
            + self.output.bias.len()
    }

    /// Checks internal consistency (layer chain, array lengths, running var).
    pub fn validate(&self) -> Result<()> {
        let corrupt = |m: String| Err(Error::CorruptModel(m));
        validate_dims(&self.dims())?;
        let mut width = FEATURE_DIM;
        let check_dense = |d: &Dense<T>, inputs: usize| {
            d.inputs == inputs
                && d.weights.len() == d.inputs * d.outputs
                && d.bias.len() == d.outputs
        };
        for (i, b) in self.hidden.iter().enumerate() {
            if !check_dense(&b.dense, width) {
                return corrupt(format!("hidden dense layer {i} has inconsistent shape"));
            }
            width = b.dense.outputs;
            let n = &b.norm;
            if [
                n.gamma.len(),
                n.beta.len(),
                n.running_mean.len(),
                n.running_var.len(),
            ]
            .iter()
            .any(|&l| l != width)
            {
                return corrupt(format!("batch-norm layer {i} has inconsistent width"));
            }
            if n.running_var.iter().any(|&v| !(v >= T::zero())) {
                return corrupt(format!(
                    "batch-norm layer {i} has negative running variance"
                ));
            }
        }
        if !check_dense(&self.output, width) {
            return corrupt("output layer has inconsistent shape".into());
        }
        Ok(())
    }

    /// Mutable views of every trainable array, in a fixed order.
    pub fn trainable_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for b in &mut self.hidden {
            out.push(&mut b.dense.weights);
            out.push(&mut b.dense.bias);
            out.push(&mut b.norm.gamma);
            out.push(&mut b.norm.beta);
        }
        out.push(&mut self.output.weights);
        out.push(&mut self.output.bias);
        out
    }

    pub fn trainable(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        for b in &self.hidden {
            out.extend([
                &b.dense.weights[..],
                &b.dense.bias,
                &b.norm.gamma,
                &b.norm.beta,
            ]);
        }
        out.extend([&self.output.weights[..], &self.output.bias]);
        out
    }

    fn check_input(&self, x: &Matrix<T>) -> Result<()> {
        let expected = self.dims()[0];
        if x.cols() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: x.cols(),
            });
        }
        Ok(())
    }

    /// Training-mode pass using batch statistics. Does not touch the running
    /// statistics.
    pub fn forward_train(&self, x: &Matrix<T>) -> Result<(Matrix<T>, ForwardCache<T>)> {
        self.check_input(x)?;
        let batch = x.rows();
        if batch < 2 {
            return Err(Error::BatchTooSmall(batch));
        }
        let bt = T::count(batch);
        let mut act = x.clone();
        let mut blocks = Vec::with_capacity(self.hidden.len());
        for block in &self.hidden {
            let z = block.dense.forward(&act);
            let width = z.cols();
            let mut mean = vec![T::zero(); width];
            let mut var = vec![T::zero(); width];
            for r in 0..batch {
                for (m, &v) in mean.iter_mut().zip(z.row(r)) {
                    *m += v;
                }
            }
            for m in &mut mean {
                *m /= bt;
            }
            for r in 0..batch {
                for ((s, &v), &m) in var.iter_mut().zip(z.row(r)).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
            for s in &mut var {
                *s /= bt;
            }
            let inv_std: Vec<T> = var
                .iter()
                .map(|&v| (v + block.norm.epsilon).sqrt().recip())
                .collect();
            let mut normalized = Matrix::zeros(batch, width);
            let mut pre = Matrix::zeros(batch, width);
            let mut out = Matrix::zeros(batch, width);
            for r in 0..batch {
                for j in 0..width {
                    let xh = (z.row(r)[j] - mean[j]) * inv_std[j];
                    let y = block.norm.gamma[j] * xh + block.norm.beta[j];
                    normalized.row_mut(r)[j] = xh;
                    pre.row_mut(r)[j] = y;
                    out.row_mut(r)[j] = y.max(T::zero());
                }
            }
            blocks.push(BlockCache {
                input: act,
                normalized,
                pre_activation: pre,
                inv_std,
                batch_mean: mean,
                batch_var: var,
            });
            act = out;
        }
        let logits = self.output.forward(&act);
        Ok((
            logits,
            ForwardCache {
                blocks,
                last_hidden: act,
                batch,
            },
        ))
    }

    /// Inference pass with running statistics.
    pub fn forward_eval(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_input(x)?;
        let mut act = x.clone();
        for block in &self.hidden {
            let mut z = block.dense.forward(&act);
            let n = &block.norm;
            for r in 0..z.rows() {
                for (j, v) in z.row_mut(r).iter_mut().enumerate() {
                    let xh = (*v - n.running_mean[j]) / (n.running_var[j] + n.epsilon).sqrt();
                    *v = (n.gamma[j] * xh + n.beta[j]).max(T::zero());
                }
            }
            act = z;
        }
        Ok(self.output.forward(&act))
    }

    /// Exponential moving average of the batch statistics in `cache`. The
    /// running variance uses the unbiased batch variance.
    pub fn update_running_stats(&mut self, cache: &ForwardCache<T>) -> Result<()> {
        self.blend_running_stats(cache, None)
    }

    /// Replaces the running statistics with those of one train-mode pass
    /// over all of `x`.
    pub fn set_population_stats(&mut self, x: &Matrix<T>) -> Result<()> {
        let (_, cache) = self.forward_train(x)?;
        self.blend_running_stats(&cache, Some(T::one()))
    }

    fn blend_running_stats(&mut self, cache: &ForwardCache<T>, momentum: Option<T>) -> Result<()> {
        if cache.blocks.len() != self.hidden.len() {
            return Err(Error::ShapeMismatch);
        }
        let b = T::count(cache.batch);
        let unbias = b / (b - T::one());
        for (block, c) in self.hidden.iter_mut().zip(&cache.blocks) {
            let n = &mut block.norm;
            if c.batch_mean.len() != n.width() {
                return Err(Error::ShapeMismatch);
            }
            let m = momentum.unwrap_or(n.momentum);
            let keep = T::one() - m;
            for j in 0..n.width() {
                n.running_mean[j] = keep * n.running_mean[j] + m * c.batch_mean[j];
                n.running_var[j] = keep * n.running_var[j] + m * c.batch_var[j] * unbias;
            }
        }
        Ok(())
    }

    /// Exact gradients of the mean loss given `d_logits = dL/dlogits`.
    pub fn backward(&self, cache: &ForwardCache<T>, d_logits: &Matrix<T>) -> Result<Gradients<T>> {
        let batch = cache.batch;
        if cache.blocks.len() != self.hidden.len()
            || d_logits.rows() != batch
            || d_logits.cols() != self.output.outputs
            || cache.last_hidden.cols() != self.output.inputs
        {
            return Err(Error::ShapeMismatch);
        }
        let (output, mut d_act) = dense_backward(&self.output, &cache.last_hidden, d_logits);
        let bt = T::count(batch);
        let mut hidden = Vec::with_capacity(self.hidden.len());
        for (block, c) in self.hidden.iter().zip(&cache.blocks).rev() {
            let width = block.norm.width();
            if c.normalized.cols() != width || c.input.cols() != block.dense.inputs {
                return Err(Error::ShapeMismatch);
            }
            let mut d_gamma = vec![T::zero(); width];
            let mut d_beta = vec![T::zero(); width];
            // dL/dx̂, then sums needed for the batch-statistics chain rule.
            let mut d_xhat = Matrix::zeros(batch, width);
            for r in 0..batch {
                for j in 0..width {
                    let dy = if c.pre_activation.row(r)[j] > T::zero() {
                        d_act.row(r)[j]
                    } else {
                        T::zero()
                    };
                    d_beta[j] += dy;
                    d_gamma[j] += dy * c.normalized.row(r)[j];
                    d_xhat.row_mut(r)[j] = dy * block.norm.gamma[j];
                }
            }
            let mut sum_d = vec![T::zero(); width];
            let mut sum_dx = vec![T::zero(); width];
            for r in 0..batch {
                for j in 0..width {
                    sum_d[j] += d_xhat.row(r)[j];
                    sum_dx[j] += d_xhat.row(r)[j] * c.normalized.row(r)[j];
                }
            }
            let mut d_z = Matrix::zeros(batch, width);
            for r in 0..batch {
                for j in 0..width {
                    let v = bt * d_xhat.row(r)[j] - sum_d[j] - c.normalized.row(r)[j] * sum_dx[j];
                    d_z.row_mut(r)[j] = v * c.inv_std[j] / bt;
                }
            }
            let (dense, d_in) = dense_backward(&block.dense, &c.input, &d_z);
            hidden.push(BlockGradients {
                dense,
                gamma: d_gamma,
                beta: d_beta,
            });
            d_act = d_in;
        }
        hidden.reverse();
        Ok(Gradients { hidden, output })
    }
}

fn dense_backward<T: Scalar>(
    layer: &Dense<T>,
    input: &Matrix<T>,
    d_out: &Matrix<T>,
) -> (DenseGradients<T>, Matrix<T>) {
    let mut weights = vec![T::zero(); layer.weights.len()];
    let mut bias = vec![T::zero(); layer.outputs];
    let mut d_in = Matrix::zeros(input.rows(), layer.inputs);
    for r in 0..input.rows() {
        let x = input.row(r);
        let g = d_out.row(r);
        for j in 0..layer.outputs {
            let gj = g[j];
            bias[j] += gj;
            let w = &layer.weights[j * layer.inputs..(j + 1) * layer.inputs];
            let dw = &mut weights[j * layer.inputs..(j + 1) * layer.inputs];
            for i in 0..layer.inputs {
                dw[i] += gj * x[i];
            }
            for (di, &wi) in d_in.row_mut(r).iter_mut().zip(w) {
                *di += gj * wi;
            }
        }
    }
    (DenseGradients { weights, bias }, d_in)
}
