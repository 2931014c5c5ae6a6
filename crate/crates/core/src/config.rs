//! The JSON scenario/config file.
//!
//! ```json
//! { "radar": { ... }, "materials": [ ...5 entries... ], "scenario": { "kind": "nominal" } }
//! ```
//!
//! Every section is optional and falls back to the defaults. `train` and
//! `experiment` sections may also be given. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::plan::PlanSettings;
use crate::nn::TrainConfig;
use crate::radar::{default_materials, validate_materials, MaterialSpec, RadarConfig, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub radar: RadarConfig,
    #[serde(default = "default_materials")]
    pub materials: Vec<MaterialSpec>,
    #[serde(default)]
    pub scenario: Scenario,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub experiment: PlanSettings,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            radar: RadarConfig::default(),
            materials: default_materials(),
            scenario: Scenario::Nominal,
            train: TrainConfig::default(),
            experiment: PlanSettings::default(),
        }
    }
}

fn check_scenario_keys(raw: &serde_json::Value, parsed: &Scenario) -> Result<()> {
    let (Some(given), serde_json::Value::Object(known)) = (
        raw.as_object(),
        serde_json::to_value(parsed).expect("scenarios serialize"),
    ) else {
        return Ok(());
    };
    match given.keys().find(|k| !known.contains_key(*k)) {
        Some(k) => Err(Error::InvalidConfig(format!(
            "unknown scenario field `{k}`"
        ))),
        None => Ok(()),
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.radar.validate()?;
        validate_materials(&self.materials)?;
        self.scenario.validate()?;
        self.train.validate()?;
        self.experiment.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let invalid = |e: serde_json::Error| Error::InvalidConfig(e.to_string());
        let raw: serde_json::Value = serde_json::from_str(text).map_err(invalid)?;
        let cfg: SimConfig = serde_json::from_value(raw.clone()).map_err(invalid)?;
        // serde ignores extra keys next to the tag of a unit variant.
        check_scenario_keys(&raw["scenario"], &cfg.scenario)?;
        check_scenario_keys(
            &raw["experiment"]["augmentation"],
            &cfg.experiment.augmentation,
        )?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
