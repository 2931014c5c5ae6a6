//! Named evaluation conditions and the sizes and seeds they share.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radar::{Scenario, NOMINAL_HEIGHT_M};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanSettings {
    /// Base seed for every dataset the plan generates.
    pub seed: u64,
    pub train_per_class: usize,
    pub eval_per_class: usize,
    /// Recording sessions pooled into `session_shift`. Session 0 is the
    /// training session and may not appear here.
    pub session_ids: Vec<u32>,
    /// Training scenario for the augmentation mitigation.
    pub augmentation: Scenario,
}

impl Default for PlanSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            train_per_class: 200,
            eval_per_class: 100,
            session_ids: vec![1, 2, 3, 4],
            augmentation: Scenario::default_augmented(),
        }
    }
}

impl PlanSettings {
    pub fn validate(&self) -> Result<()> {
        if self.train_per_class == 0 || self.eval_per_class == 0 {
            return Err(Error::InvalidConfig(
                "dataset sizes must be positive".into(),
            ));
        }
        if self.session_ids.is_empty() || self.session_ids.contains(&0) {
            return Err(Error::InvalidConfig(
                "session_ids must be non-empty and exclude the training session 0".into(),
            ));
        }
        if self.session_ids.len() > self.eval_per_class {
            return Err(Error::InvalidConfig(
                "more sessions than evaluation sequences per class".into(),
            ));
        }
        if !matches!(self.augmentation, Scenario::Augmented { .. }) {
            return Err(Error::InvalidConfig(
                "augmentation must be an augmented scenario".into(),
            ));
        }
        self.augmentation.validate()
    }
}

/// Which trained pipeline a condition evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    /// Raw magnitudes, trained on nominal data.
    Nominal,
    /// Nominal data with range-r4 normalization at train and eval time.
    RangeR4,
    /// Raw magnitudes, trained on height/tilt-augmented data.
    Augmented,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    Baseline,
    Height35,
    Height55,
    HeightPooled,
    TiltPlus10,
    TiltMinus10,
    TiltPooled,
    SessionShift,
    MitigationR4Norm,
    MitigationAugmented,
}

/// One evaluation set inside a condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPart {
    pub scenario: Scenario,
    pub per_class: usize,
}

impl Condition {
    pub const ALL: [Condition; 10] = [
        Condition::Baseline,
        Condition::Height35,
        Condition::Height55,
        Condition::HeightPooled,
        Condition::TiltPlus10,
        Condition::TiltMinus10,
        Condition::TiltPooled,
        Condition::SessionShift,
        Condition::MitigationR4Norm,
        Condition::MitigationAugmented,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Baseline => "baseline",
            Condition::Height35 => "height_35",
            Condition::Height55 => "height_55",
            Condition::HeightPooled => "height_pooled",
            Condition::TiltPlus10 => "tilt_plus10",
            Condition::TiltMinus10 => "tilt_minus10",
            Condition::TiltPooled => "tilt_pooled",
            Condition::SessionShift => "session_shift",
            Condition::MitigationR4Norm => "mitigation_r4norm",
            Condition::MitigationAugmented => "mitigation_augmented",
        }
    }

    pub fn pipeline(self) -> Pipeline {
        match self {
            Condition::MitigationR4Norm => Pipeline::RangeR4,
            Condition::MitigationAugmented => Pipeline::Augmented,
            _ => Pipeline::Nominal,
        }
    }

    /// The evaluation sets, in order. Pooled conditions reuse the exact sets
    /// of their members; mitigations reuse the sets they are compared with.
    pub fn eval_parts(self, settings: &PlanSettings) -> Vec<EvalPart> {
        let n = settings.eval_per_class;
        let one = |scenario| {
            vec![EvalPart {
                scenario,
                per_class: n,
            }]
        };
        let height = |h: f64| Scenario::Height { height_m: h };
        let tilt = |t: f64| Scenario::Tilt { tilt_deg: t };
        match self {
            Condition::Baseline => one(Scenario::Nominal),
            Condition::Height35 => one(height(0.35)),
            Condition::Height55 => one(height(0.55)),
            Condition::HeightPooled | Condition::MitigationR4Norm => {
                [Condition::Height35, Condition::Height55]
                    .iter()
                    .flat_map(|c| c.eval_parts(settings))
                    .collect()
            }
            Condition::TiltPlus10 => one(tilt(10.0)),
            Condition::TiltMinus10 => one(tilt(-10.0)),
            Condition::TiltPooled | Condition::MitigationAugmented => {
                [Condition::TiltPlus10, Condition::TiltMinus10]
                    .iter()
                    .flat_map(|c| c.eval_parts(settings))
                    .collect()
            }
            Condition::SessionShift => {
                // Spread the per-class budget over the sessions.
                let k = settings.session_ids.len();
                settings
                    .session_ids
                    .iter()
                    .enumerate()
                    .map(|(i, &session_id)| EvalPart {
                        scenario: Scenario::Session { session_id },
                        per_class: n / k + usize::from(i < n % k),
                    })
                    .collect()
            }
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownCondition(s.to_string()))
    }
}

/// Nominal mounting height; session shift must keep it.
pub fn is_nominal_geometry(height_m: f64, tilt_deg: f64) -> bool {
    height_m == NOMINAL_HEIGHT_M && tilt_deg == 0.0
}
