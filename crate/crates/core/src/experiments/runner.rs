//! Trains the pipelines a plan needs and evaluates conditions against them.

use std::collections::HashSet;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::features::{
    extract_features, normalize, select_window, BinWindow, NormalizationMode, FEATURE_DIM,
};
use crate::fingerprint::{dataset_hash, fingerprint};
use crate::nn::{train, Classifier, History, Matrix, TrainedOn, TrainingSet};
use crate::radar::{generate_dataset, Dataset, GeometryConfig, RangeProfile, Scenario};
use crate::scalar::Scalar;
use crate::seed::{self, tag};

use super::metrics::PredictionRecord;
use super::plan::{Condition, Pipeline};
use super::report::EvalReport;

/// A trained network plus everything needed to prepare its inputs.
#[derive(Debug, Clone)]
pub struct TrainedPipeline<T> {
    pub classifier: Classifier<T>,
    pub history: History,
    pub trained_on: TrainedOn,
    pub train_seeds: HashSet<u64>,
}

/// Raw evaluation output for one condition.
#[derive(Debug, Clone)]
pub struct ConditionRun {
    pub report: EvalReport,
    pub records: Vec<PredictionRecord>,
    pub geometries: Vec<GeometryConfig>,
}

fn cached<X>(cell: &OnceLock<X>, make: impl FnOnce() -> Result<X>) -> Result<&X> {
    if let Some(x) = cell.get() {
        return Ok(x);
    }
    let x = make()?;
    Ok(cell.get_or_init(|| x))
}

/// Lazily generates and trains what each condition needs, once.
#[derive(Debug)]
pub struct Workbench<T: Scalar> {
    config: SimConfig,
    fingerprint: String,
    nominal_train: OnceLock<Dataset<T>>,
    window: OnceLock<BinWindow>,
    pipelines: [OnceLock<TrainedPipeline<T>>; 3],
}

pub fn train_seed_base(plan_seed: u64, scenario: &Scenario) -> u64 {
    seed::mix(&[
        tag::TRAIN,
        plan_seed,
        seed::name_word(&scenario.to_string()),
    ])
}

pub fn eval_seed_base(plan_seed: u64, scenario: &Scenario) -> u64 {
    seed::mix(&[tag::EVAL, plan_seed, seed::name_word(&scenario.to_string())])
}

/// Window-restricted, normalized descriptors for a set of profiles.
pub fn prepare_features<T: Scalar>(
    profiles: &[RangeProfile<T>],
    window: BinWindow,
    mode: NormalizationMode,
    range_resolution_m: f64,
) -> Result<TrainingSet<T>> {
    let features = profiles
        .iter()
        .map(|p| normalize(&extract_features(p, window)?, mode, range_resolution_m))
        .collect::<Result<Vec<_>>>()?;
    TrainingSet::from_features(&features)
}

impl<T: Scalar> Workbench<T> {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            fingerprint: fingerprint(&config),
            config,
            nominal_train: OnceLock::new(),
            window: OnceLock::new(),
            pipelines: Default::default(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Hash of every config section, seeds included.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    fn training_data(&self, scenario: &Scenario) -> Result<Dataset<T>> {
        let plan = &self.config.experiment;
        generate_dataset(
            &self.config.radar,
            &self.config.materials,
            scenario,
            plan.train_per_class,
            train_seed_base(plan.seed, scenario),
        )
    }

    pub fn nominal_training_set(&self) -> Result<&Dataset<T>> {
        cached(&self.nominal_train, || {
            self.training_data(&Scenario::Nominal)
        })
    }

    /// Selected once on the nominal training set and shared by every
    /// pipeline.
    pub fn window(&self) -> Result<BinWindow> {
        cached(&self.window, || {
            select_window(&self.nominal_training_set()?.profiles, FEATURE_DIM)
        })
        .copied()
    }

    pub fn normalization(&self, pipeline: Pipeline) -> NormalizationMode {
        match pipeline {
            Pipeline::RangeR4 => NormalizationMode::RangeR4 {
                reference_range_m: self.config.radar.reference_range_m,
            },
            Pipeline::Nominal | Pipeline::Augmented => NormalizationMode::None,
        }
    }

    fn slot(pipeline: Pipeline) -> usize {
        match pipeline {
            Pipeline::Nominal => 0,
            Pipeline::RangeR4 => 1,
            Pipeline::Augmented => 2,
        }
    }

    pub fn pipeline(&self, pipeline: Pipeline) -> Result<&TrainedPipeline<T>> {
        cached(&self.pipelines[Self::slot(pipeline)], || {
            self.train_pipeline(pipeline)
        })
    }

    fn train_pipeline(&self, pipeline: Pipeline) -> Result<TrainedPipeline<T>> {
        let window = self.window()?;
        let augmented;
        let data = match pipeline {
            Pipeline::Nominal | Pipeline::RangeR4 => self.nominal_training_set()?,
            Pipeline::Augmented => {
                augmented = self.training_data(&self.config.experiment.augmentation)?;
                &augmented
            }
        };
        let mode = self.normalization(pipeline);
        let set = prepare_features(
            &data.profiles,
            window,
            mode,
            self.config.radar.range_resolution_m,
        )?;
        let (classifier, history) = train(&set, &self.config.train)?;
        let per_class = self.config.experiment.train_per_class;
        Ok(TrainedPipeline {
            classifier,
            history,
            trained_on: TrainedOn {
                scenario: data.scenario.to_string(),
                seed: data.base_seed,
                dataset_hash: dataset_hash(set.inputs.as_slice(), &set.labels),
                window_start: window.start_bin,
                normalization: mode,
                standardized: false,
            },
            train_seeds: data.sequence_seeds(per_class).into_iter().collect(),
        })
    }

    /// Evaluation profiles for one condition, pooled over its parts.
    pub fn eval_profiles(&self, condition: Condition) -> Result<Vec<(Dataset<T>, usize)>> {
        let plan = &self.config.experiment;
        condition
            .eval_parts(plan)
            .into_iter()
            .map(|part| {
                let base = eval_seed_base(plan.seed, &part.scenario);
                let data = generate_dataset(
                    &self.config.radar,
                    &self.config.materials,
                    &part.scenario,
                    part.per_class,
                    base,
                )?;
                Ok((data, part.per_class))
            })
            .collect()
    }

    pub fn run_condition(&self, condition: Condition) -> Result<ConditionRun> {
        let pipeline = self.pipeline(condition.pipeline())?;
        let window = BinWindow::new(pipeline.trained_on.window_start);
        let mode = pipeline.trained_on.normalization;
        let mut records = Vec::new();
        let mut geometries = Vec::new();
        for (data, per_class) in self.eval_profiles(condition)? {
            if data
                .sequence_seeds(per_class)
                .iter()
                .any(|s| pipeline.train_seeds.contains(s))
            {
                return Err(Error::InvalidConfig(format!(
                    "evaluation seeds for {} overlap the training set",
                    data.scenario
                )));
            }
            let set = prepare_features(
                &data.profiles,
                window,
                mode,
                self.config.radar.range_resolution_m,
            )?;
            let preds = pipeline.classifier.predict_batch(&set.inputs)?;
            records.extend(
                preds
                    .iter()
                    .zip(&set.labels)
                    .map(|(p, &label)| PredictionRecord {
                        label,
                        predicted: p.class,
                        confidence: p.confidence.as_f64().clamp(0.0, 1.0),
                    }),
            );
            geometries.extend(data.profiles.iter().map(|p| p.geometry));
        }
        let report = EvalReport::from_records(condition.name(), &records, &self.fingerprint)?;
        Ok(ConditionRun {
            report,
            records,
            geometries,
        })
    }

    pub fn run_experiment(&self, condition: Condition) -> Result<EvalReport> {
        Ok(self.run_condition(condition)?.report)
    }

    /// Runs conditions in parallel; results keep the input order.
    pub fn run_all(&self, conditions: &[Condition]) -> Result<Vec<ConditionRun>> {
        let mut needed: Vec<Pipeline> = conditions.iter().map(|c| c.pipeline()).collect();
        needed.sort_by_key(|p| Self::slot(*p));
        needed.dedup();
        self.window()?;
        needed
            .par_iter()
            .map(|&p| self.pipeline(p).map(|_| ()))
            .collect::<Result<Vec<_>>>()?;
        conditions
            .par_iter()
            .map(|&c| self.run_condition(c))
            .collect()
    }

    /// Mean in-window peak magnitude of the two metal classes under a
    /// scenario, on that scenario's evaluation data.
    pub fn mean_metal_peak(&self, scenario: &Scenario) -> Result<f64> {
        let window = self.window()?;
        let plan = &self.config.experiment;
        let data: Dataset<T> = generate_dataset(
            &self.config.radar,
            &self.config.materials,
            scenario,
            plan.eval_per_class,
            eval_seed_base(plan.seed, scenario),
        )?;
        let peaks: Vec<f64> = data
            .profiles
            .iter()
            .filter(|p| p.material_class <= 1)
            .map(|p| {
                p.magnitudes[window.start_bin..window.end()]
                    .iter()
                    .map(|v| v.as_f64())
                    .fold(0.0, f64::max)
            })
            .collect();
        Ok(peaks.iter().sum::<f64>() / peaks.len() as f64)
    }

    /// Features of arbitrary profiles under a pipeline's preprocessing, as
    /// one row-major matrix.
    pub fn features_for(
        &self,
        pipeline: Pipeline,
        profiles: &[RangeProfile<T>],
    ) -> Result<Matrix<T>> {
        let trained = self.pipeline(pipeline)?;
        Ok(prepare_features(
            profiles,
            BinWindow::new(trained.trained_on.window_start),
            trained.trained_on.normalization,
            self.config.radar.range_resolution_m,
        )?
        .inputs)
    }
}
