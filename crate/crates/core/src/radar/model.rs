//! Closed-form propagation and scattering model.
//!
//! Received power follows the monostatic radar equation for a fixed aperture,
//! `P = Γ · L(tilt) · g_session · jitter · (R_ref / R)^4`, and the ADC sees the
//! amplitude `amplitude_ref · sqrt(P)`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::config::{GeometryConfig, MaterialSpec, RadarConfig};

/// Distance from the sensor to the surface along boresight.
pub fn slant_range<T: Scalar>(geom: &GeometryConfig) -> Result<T> {
    geom.validate()?;
    let h = T::lit(geom.height_m);
    if geom.tilt_deg == 0.0 {
        return Ok(h);
    }
    Ok(h / T::lit(geom.tilt_deg).to_radians().cos())
}

/// Specular lobe plus diffuse floor: `(1 - s) + s · exp(-t² / 2w²)`.
pub fn angular_response<T: Scalar>(mat: &MaterialSpec, tilt_deg: T) -> T {
    let s = T::lit(mat.specular_fraction);
    let w = T::lit(mat.lobe_width_deg);
    let lobe = (-(tilt_deg * tilt_deg) / (T::lit(2.0) * w * w)).exp();
    (T::one() - s) + s * lobe
}

/// Linear gain for a decibel power offset.
pub fn db_to_power<T: Scalar>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

/// Received power relative to a perfect reflector at the reference range.
pub fn received_power<T: Scalar>(
    cfg: &RadarConfig,
    geom: &GeometryConfig,
    mat: &MaterialSpec,
    sequence_jitter: T,
) -> Result<T> {
    if !(sequence_jitter > T::zero()) {
        return Err(Error::InvalidConfig(format!(
            "sequence jitter must be positive, got {sequence_jitter}"
        )));
    }
    let range: T = slant_range(geom)?;
    let ratio = T::lit(cfg.reference_range_m) / range;
    let spread = ratio * ratio * ratio * ratio;
    Ok(T::lit(mat.reflectivity)
        * angular_response(mat, T::lit(geom.tilt_deg))
        * db_to_power(T::lit(geom.session_gain_db))
        * sequence_jitter
        * spread)
}

pub fn received_amplitude<T: Scalar>(
    cfg: &RadarConfig,
    geom: &GeometryConfig,
    mat: &MaterialSpec,
    sequence_jitter: T,
) -> Result<T> {
    let p = received_power(cfg, geom, mat, sequence_jitter)?;
    Ok(T::lit(cfg.amplitude_ref) * p.sqrt())
}
