use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 5;
pub const NOMINAL_HEIGHT_M: f64 = 0.45;

/// Sweep and acquisition parameters of the simulated sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadarConfig {
    pub num_adc_samples: usize,
    /// Bins kept from the lower half of the spectrum.
    pub num_range_bins: usize,
    pub range_resolution_m: f64,
    pub frames_per_sequence: usize,
    /// Per-component std-dev of the complex ADC noise.
    pub noise_sigma: f64,
    /// Amplitude of a perfect reflector at `reference_range_m`.
    pub amplitude_ref: f64,
    pub reference_range_m: f64,
    pub master_seed: u64,
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self {
            num_adc_samples: 64,
            num_range_bins: 32,
            // 0.45 m sits at bin 11.54, so leakage is near-symmetric about
            // the 6..=17 window and the nominal peak still rounds to bin 12.
            range_resolution_m: 0.039,
            frames_per_sequence: 16,
            noise_sigma: 0.02,
            amplitude_ref: 1.0,
            reference_range_m: NOMINAL_HEIGHT_M,
            master_seed: 0,
        }
    }
}

impl RadarConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("radar: {m}")));
        if self.num_adc_samples == 0 || self.num_range_bins == 0 {
            return bad("sample and bin counts must be positive");
        }
        if self.num_range_bins > self.num_adc_samples {
            return bad("num_range_bins exceeds num_adc_samples");
        }
        if !(self.range_resolution_m > 0.0 && self.range_resolution_m.is_finite()) {
            return bad("range_resolution_m must be positive");
        }
        if self.frames_per_sequence == 0 {
            return bad("frames_per_sequence must be at least 1");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be non-negative");
        }
        if !(self.amplitude_ref >= 0.0 && self.amplitude_ref.is_finite()) {
            return bad("amplitude_ref must be non-negative");
        }
        if !(self.reference_range_m > 0.0 && self.reference_range_m.is_finite()) {
            return bad("reference_range_m must be positive");
        }
        Ok(())
    }
}

/// Sensor pose and recording session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub height_m: f64,
    /// Deviation from nadir; 0 is straight down.
    pub tilt_deg: f64,
    pub session_id: u32,
    pub session_gain_db: f64,
}

impl GeometryConfig {
    pub fn nominal() -> Self {
        Self {
            height_m: NOMINAL_HEIGHT_M,
            tilt_deg: 0.0,
            session_id: 0,
            session_gain_db: 0.0,
        }
    }

    pub fn with_height(mut self, height_m: f64) -> Self {
        self.height_m = height_m;
        self
    }

    pub fn with_tilt(mut self, tilt_deg: f64) -> Self {
        self.tilt_deg = tilt_deg;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.height_m > 0.0 && self.height_m.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "height_m must be positive, got {}",
                self.height_m
            )));
        }
        if !(self.tilt_deg.is_finite() && self.tilt_deg.abs() < 90.0) {
            return Err(Error::InvalidConfig(format!(
                "tilt_deg must lie in (-90, 90), got {}",
                self.tilt_deg
            )));
        }
        if !self.session_gain_db.is_finite() {
            return Err(Error::InvalidConfig(
                "session_gain_db must be finite".into(),
            ));
        }
        Ok(())
    }
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self::nominal()
    }
}

/// Backscatter model of one material class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub name: String,
    pub class_id: usize,
    /// Power reflectivity in (0, 1].
    pub reflectivity: f64,
    /// 1 is mirror-like, 0 fully diffuse.
    pub specular_fraction: f64,
    pub lobe_width_deg: f64,
    /// Lognormal sigma of the per-sequence power jitter.
    pub texture_sigma: f64,
}

impl MaterialSpec {
    pub fn new(
        name: &str,
        class_id: usize,
        reflectivity: f64,
        specular_fraction: f64,
        lobe_width_deg: f64,
        texture_sigma: f64,
    ) -> Self {
        Self {
            name: name.to_owned(),
            class_id,
            reflectivity,
            specular_fraction,
            lobe_width_deg,
            texture_sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("material {}: {m}", self.name)));
        if self.class_id >= NUM_CLASSES {
            return bad("class_id outside [0, 4]");
        }
        if !(self.reflectivity > 0.0 && self.reflectivity <= 1.0) {
            return bad("reflectivity must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.specular_fraction) {
            return bad("specular_fraction must lie in [0, 1]");
        }
        if !(self.lobe_width_deg > 0.0 && self.lobe_width_deg.is_finite()) {
            return bad("lobe_width_deg must be positive");
        }
        if !(self.texture_sigma >= 0.0 && self.texture_sigma.is_finite()) {
            return bad("texture_sigma must be non-negative");
        }
        Ok(())
    }
}

/// The five-class roster: iron, aluminum, plexiglass, wood, limestone.
///
/// The metals are nearly identical and strongly specular; the dielectrics are
/// weaker and more diffuse. Values are synthetic, not measured.
pub fn default_materials() -> Vec<MaterialSpec> {
    vec![
        MaterialSpec::new("iron", 0, 0.95, 0.95, 3.0, 0.01),
        MaterialSpec::new("aluminum", 1, 0.90, 0.95, 3.0, 0.01),
        MaterialSpec::new("plexiglass", 2, 0.10, 0.60, 8.0, 0.05),
        MaterialSpec::new("wood", 3, 0.15, 0.20, 20.0, 0.08),
        MaterialSpec::new("limestone", 4, 0.30, 0.35, 15.0, 0.06),
    ]
}

/// Checks a material table: five entries, one per class id, in class order.
pub fn validate_materials(materials: &[MaterialSpec]) -> Result<()> {
    if materials.len() != NUM_CLASSES {
        return Err(Error::InvalidConfig(format!(
            "expected {NUM_CLASSES} materials, got {}",
            materials.len()
        )));
    }
    for (i, m) in materials.iter().enumerate() {
        m.validate()?;
        if m.class_id != i {
            return Err(Error::InvalidConfig(format!(
                "material {} has class_id {} at position {i}",
                m.name, m.class_id
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RadarConfig::default().validate().unwrap();
        GeometryConfig::nominal().validate().unwrap();
        validate_materials(&default_materials()).unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let cfg = RadarConfig {
            num_range_bins: 65,
            ..RadarConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(GeometryConfig::nominal()
            .with_tilt(90.0)
            .validate()
            .is_err());
        assert!(GeometryConfig::nominal()
            .with_height(0.0)
            .validate()
            .is_err());
        let mut m = default_materials();
        m[2].reflectivity = 0.0;
        assert!(validate_materials(&m).is_err());
        let mut m = default_materials();
        m.swap(0, 1);
        assert!(validate_materials(&m).is_err());
    }
}
