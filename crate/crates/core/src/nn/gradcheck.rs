//! Central finite-difference oracle for the backward pass.
//!
//! The numeric side only calls the training-mode forward pass and the loss;
//! it never touches [`MlpParams::backward`].

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::loss::softmax_cross_entropy;
use super::matrix::Matrix;
use super::mlp::MlpParams;

/// Outcome of comparing analytic and numeric gradients for every parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    pub checked: usize,
    /// Parameters whose ±h probe flipped a ReLU, where the loss is not
    /// differentiable at the probe scale.
    pub skipped_kinks: usize,
}

/// Relative error with a floor on the denominator, so parameters whose true
/// gradient vanishes (e.g. dense biases feeding batch-norm) are judged on
/// absolute error at the `floor` scale.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DENOMINATOR_FLOOR: f64 = 1e-6;

fn loss_and_pattern<T: Scalar>(
    p: &MlpParams<T>,
    x: &Matrix<T>,
    labels: &[usize],
) -> Result<(f64, Vec<bool>)> {
    let (logits, cache) = p.forward_train(x)?;
    let pattern = (0..p.hidden.len())
        .flat_map(|i| {
            cache
                .pre_activation(i)
                .as_slice()
                .iter()
                .map(|&v| v > T::zero())
                .collect::<Vec<_>>()
        })
        .collect();
    Ok((softmax_cross_entropy(&logits, labels)?.0.as_f64(), pattern))
}

/// Checks `analytic` (one slice per trainable array, in
/// [`MlpParams::trainable`] order) against central differences with step `h`.
pub fn check_gradients<T: Scalar>(
    params: &MlpParams<T>,
    x: &Matrix<T>,
    labels: &[usize],
    analytic: &[&[T]],
    h: f64,
) -> Result<GradCheck> {
    let mut probe = params.clone();
    let (_, base_pattern) = loss_and_pattern(params, x, labels)?;
    let mut out = GradCheck {
        max_relative_error: 0.0,
        max_absolute_error: 0.0,
        checked: 0,
        skipped_kinks: 0,
    };
    let lens: Vec<usize> = params.trainable().iter().map(|s| s.len()).collect();
    let given: Vec<usize> = analytic.iter().map(|s| s.len()).collect();
    if given != lens {
        return Err(Error::ShapeMismatch);
    }
    for (k, grads) in analytic.iter().enumerate() {
        for (i, a) in grads.iter().enumerate() {
            let original = probe.trainable()[k][i];
            probe.trainable_mut()[k][i] = original + T::lit(h);
            let (plus, pat_plus) = loss_and_pattern(&probe, x, labels)?;
            probe.trainable_mut()[k][i] = original - T::lit(h);
            let (minus, pat_minus) = loss_and_pattern(&probe, x, labels)?;
            probe.trainable_mut()[k][i] = original;
            if pat_plus != base_pattern || pat_minus != base_pattern {
                out.skipped_kinks += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * h);
            let a = a.as_f64();
            out.max_absolute_error = out.max_absolute_error.max((a - numeric).abs());
            out.max_relative_error =
                out.max_relative_error
                    .max(relative_error(a, numeric, DENOMINATOR_FLOOR));
            out.checked += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::init_params;
    use crate::seed;
    use rand::Rng as _;

    #[test]
    fn backward_matches_finite_differences() {
        let p = init_params::<f64>(&[12, 32, 32, 5], 21).unwrap();
        let mut rng = seed::rng(5);
        let data = (0..16 * 12).map(|_| rng.random_range(0.0..1.0)).collect();
        let x = Matrix::from_vec(16, 12, data).unwrap();
        let labels: Vec<usize> = (0..16).map(|_| rng.random_range(0..5)).collect();
        let (logits, cache) = p.forward_train(&x).unwrap();
        let (_, d) = softmax_cross_entropy(&logits, &labels).unwrap();
        let g = p.backward(&cache, &d).unwrap();
        let report = check_gradients(&p, &x, &labels, &g.slices(), DEFAULT_STEP).unwrap();
        assert!(report.max_relative_error < 1e-4, "{report:?}");
        assert!(report.checked > p.parameter_count() * 9 / 10, "{report:?}");
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let p = init_params::<f64>(&[12, 8, 8, 5], 2).unwrap();
        let mut rng = seed::rng(1);
        let data = (0..6 * 12).map(|_| rng.random_range(0.0..1.0)).collect();
        let x = Matrix::from_vec(6, 12, data).unwrap();
        let labels = [0, 1, 2, 3, 4, 0];
        let (logits, cache) = p.forward_train(&x).unwrap();
        let (_, d) = softmax_cross_entropy(&logits, &labels).unwrap();
        let mut g = p.backward(&cache, &d).unwrap();
        g.output.weights[3] += 0.01;
        let report = check_gradients(&p, &x, &labels, &g.slices(), DEFAULT_STEP).unwrap();
        assert!(report.max_relative_error > 1e-2);
    }
}
