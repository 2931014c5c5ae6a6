//! Mini-batch training and the eval-mode classifier.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_DIM};
use crate::radar::NUM_CLASSES;
use crate::scalar::Scalar;
use crate::seed::{self, tag};

use super::adam::{adam_step, AdamState, TrainConfig};
use super::loss::{softmax_cross_entropy, softmax_into};
use super::matrix::Matrix;
use super::mlp::{init_params, MlpParams};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet<T> {
    pub inputs: Matrix<T>,
    pub labels: Vec<usize>,
}

impl<T: Scalar> TrainingSet<T> {
    pub fn new(inputs: Matrix<T>, labels: Vec<usize>) -> Result<Self> {
        if inputs.rows() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: inputs.rows(),
                actual: labels.len(),
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= NUM_CLASSES) {
            return Err(Error::InvalidLabel {
                label,
                classes: NUM_CLASSES,
            });
        }
        Ok(Self { inputs, labels })
    }

    pub fn from_features(features: &[FeatureVector<T>]) -> Result<Self> {
        let rows: Vec<[T; FEATURE_DIM]> = features.iter().map(|f| f.values).collect();
        let inputs = if rows.is_empty() {
            Matrix::zeros(0, FEATURE_DIM)
        } else {
            Matrix::from_rows(&rows)?
        };
        Self::new(inputs, features.iter().map(|f| f.label).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    /// Mean training-mode mini-batch loss per epoch.
    pub loss: Vec<f64>,
    /// Eval-mode accuracy on the training set after each epoch.
    pub accuracy: Vec<f64>,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub probabilities: [T; NUM_CLASSES],
    pub class: usize,
    pub confidence: T,
}

impl<T: Scalar> Prediction<T> {
    /// Argmax with ties broken toward the lowest class index.
    pub fn from_probabilities(probabilities: [T; NUM_CLASSES]) -> Self {
        let mut class = 0;
        for (i, &p) in probabilities.iter().enumerate() {
            if p > probabilities[class] {
                class = i;
            }
        }
        Self {
            probabilities,
            class,
            confidence: probabilities[class],
        }
    }
}

/// A network frozen in inference mode. Batch-norm uses running statistics
/// and nothing about the model changes after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier<T> {
    params: MlpParams<T>,
}

impl<T: Scalar> Classifier<T> {
    pub fn from_params(params: MlpParams<T>) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &MlpParams<T> {
        &self.params
    }

    pub fn into_params(self) -> MlpParams<T> {
        self.params
    }

    pub fn logits(&self, inputs: &Matrix<T>) -> Result<Matrix<T>> {
        self.params.forward_eval(inputs)
    }

    pub fn predict(&self, features: &[T]) -> Result<Prediction<T>> {
        let x = Matrix::from_vec(1, features.len(), features.to_vec())?;
        Ok(self.predict_batch(&x)?.remove(0))
    }

    pub fn predict_batch(&self, inputs: &Matrix<T>) -> Result<Vec<Prediction<T>>> {
        let logits = self.logits(inputs)?;
        Ok((0..logits.rows())
            .map(|r| {
                let mut p = [T::zero(); NUM_CLASSES];
                softmax_into(logits.row(r), &mut p);
                Prediction::from_probabilities(p)
            })
            .collect())
    }

    pub fn accuracy(&self, set: &TrainingSet<T>) -> Result<f64> {
        if set.is_empty() {
            return Err(Error::EmptyInput("dataset"));
        }
        let preds = self.predict_batch(&set.inputs)?;
        let hits = preds
            .iter()
            .zip(&set.labels)
            .filter(|(p, &l)| p.class == l)
            .count();
        Ok(hits as f64 / set.len() as f64)
    }
}

/// Splits a permutation into mini-batches; a trailing single row is folded
/// into the previous batch so every batch has at least two rows.
fn batches(order: &[usize], batch_size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(batch_size).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() < 2) {
        out.pop();
        let start = (out.len() - 1) * batch_size;
        *out.last_mut().unwrap() = &order[start..];
    }
    out
}

/// Trains a fresh network from `cfg.seed`. Single-threaded and bit-for-bit
/// reproducible for a given dataset and config.
pub fn train<T: Scalar>(
    set: &TrainingSet<T>,
    cfg: &TrainConfig,
) -> Result<(Classifier<T>, History)> {
    cfg.validate()?;
    if set.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    if set.len() < 2 {
        return Err(Error::BatchTooSmall(set.len()));
    }
    let dims = [FEATURE_DIM, cfg.hidden[0], cfg.hidden[1], NUM_CLASSES];
    let mut params = init_params::<T>(&dims, cfg.seed)?;
    let mut state = AdamState::new(&params);
    let mut history = History::default();
    let mut order: Vec<usize> = (0..set.len()).collect();
    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut seed::rng(seed::mix(&[
            tag::SHUFFLE,
            cfg.seed,
            epoch as u64,
        ])));
        let mut loss_sum = 0.0;
        for batch in batches(&order, cfg.batch_size) {
            let x = set.inputs.gather(batch);
            let labels: Vec<usize> = batch.iter().map(|&i| set.labels[i]).collect();
            let (logits, cache) = params.forward_train(&x)?;
            let (loss, d_logits) = softmax_cross_entropy(&logits, &labels)?;
            let grads = params.backward(&cache, &d_logits)?;
            params.update_running_stats(&cache)?;
            adam_step(&mut params, &grads, &mut state, cfg)?;
            loss_sum += loss.as_f64() * batch.len() as f64;
        }
        history.loss.push(loss_sum / set.len() as f64);
        let snapshot = Classifier {
            params: params.clone(),
        };
        history.accuracy.push(snapshot.accuracy(set)?);
    }
    history.steps = state.step;
    if cfg.population_stats {
        params.set_population_stats(&set.inputs)?;
        if let Some(last) = history.accuracy.last_mut() {
            *last = Classifier {
                params: params.clone(),
            }
            .accuracy(set)?;
        }
    }
    Ok((Classifier::from_params(params)?, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::init_params;
    use rand::Rng as _;

    fn toy_set(n: usize, seed: u64) -> TrainingSet<f64> {
        // Class c has a bump of height c+1 at feature c.
        let mut rng = seed::rng(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = i % NUM_CLASSES;
            let mut r = [0.0; FEATURE_DIM];
            for v in &mut r {
                *v = rng.random_range(0.0..0.1);
            }
            r[c] += 1.0 + c as f64 * 0.2;
            rows.push(r);
            labels.push(c);
        }
        TrainingSet::new(Matrix::from_rows(&rows).unwrap(), labels).unwrap()
    }

    #[test]
    fn batching_never_leaves_a_singleton() {
        let order: Vec<usize> = (0..65).collect();
        let b = batches(&order, 32);
        assert_eq!(b.len(), 2);
        assert_eq!(b[1].len(), 33);
        let order: Vec<usize> = (0..64).collect();
        assert_eq!(batches(&order, 32).len(), 2);
        let order: Vec<usize> = (0..5).collect();
        assert_eq!(batches(&order, 32), vec![&order[..]]);
    }

    #[test]
    fn learns_a_separable_toy_problem() {
        let set = toy_set(200, 1);
        let cfg = TrainConfig {
            epochs: 30,
            ..TrainConfig::default()
        };
        let (model, history) = train(&set, &cfg).unwrap();
        assert!(history.loss.last().unwrap() < &history.loss[0]);
        assert!(model.accuracy(&set).unwrap() > 0.98);
    }

    #[test]
    fn training_is_deterministic() {
        let set = toy_set(60, 2);
        let cfg = TrainConfig {
            epochs: 5,
            seed: 3,
            ..TrainConfig::default()
        };
        let (a, ha) = train(&set, &cfg).unwrap();
        let (b, hb) = train(&set, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
        let (c, _) = train(&set, &TrainConfig { seed: 4, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn one_epoch_one_batch_is_one_step() {
        let set = toy_set(20, 3);
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 32,
            ..TrainConfig::default()
        };
        let (_, history) = train(&set, &cfg).unwrap();
        assert_eq!(history.steps, 1);
    }

    #[test]
    fn empty_and_singleton_sets_fail() {
        let empty = TrainingSet::<f64>::from_features(&[]).unwrap();
        assert!(matches!(
            train(&empty, &TrainConfig::default()),
            Err(Error::EmptyInput(_))
        ));
        let one = TrainingSet::new(Matrix::<f64>::zeros(1, 12), vec![0]).unwrap();
        assert!(train(&one, &TrainConfig::default()).is_err());
        assert!(TrainingSet::new(Matrix::<f64>::zeros(1, 12), vec![7]).is_err());
    }

    #[test]
    fn zero_network_predicts_uniform() {
        let mut p = init_params::<f64>(&[12, 32, 32, 5], 0).unwrap();
        for s in p.trainable_mut() {
            s.iter_mut().for_each(|v| *v = 0.0);
        }
        let model = Classifier::from_params(p).unwrap();
        let pred = model.predict(&[0.3; 12]).unwrap();
        assert!(pred.probabilities.iter().all(|&v| (v - 0.2).abs() < 1e-15));
        assert_eq!(pred.class, 0);
        assert!((pred.confidence - 0.2).abs() < 1e-15);
        assert!(model.predict(&[0.0; 11]).is_err());
    }

    #[test]
    fn probabilities_sum_to_one() {
        let model =
            Classifier::from_params(init_params::<f64>(&[12, 32, 32, 5], 5).unwrap()).unwrap();
        let mut rng = seed::rng(0);
        for _ in 0..200 {
            let x: Vec<f64> = (0..12).map(|_| rng.random_range(-5.0..5.0)).collect();
            let p = model.predict(&x).unwrap();
            assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let max = p.probabilities.iter().cloned().fold(0.0, f64::max);
            assert_eq!(p.confidence, max);
        }
    }

    #[test]
    fn ties_go_to_the_lowest_class() {
        let p = Prediction::from_probabilities([0.1, 0.35, 0.35, 0.1, 0.1]);
        assert_eq!(p.class, 1);
    }
}
