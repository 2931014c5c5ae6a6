//! Evaluation regimes, metrics and report rendering.

pub mod check;
pub mod metrics;
pub mod plan;
pub mod report;
pub mod runner;

pub use check::{check_reports, CheckLine};
pub use metrics::{
    confidence_histogram, confusion_matrix, macro_f1, ConfidenceHistogram, ConfusionMatrix,
    PredictionRecord,
};
pub use plan::{Condition, Pipeline, PlanSettings};
pub use report::{check_fingerprints, render_report, EvalReport};
pub use runner::{ConditionRun, TrainedPipeline, Workbench};
