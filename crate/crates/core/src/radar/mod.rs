//! Synthetic FMCW acquisition: geometry, scattering, beat signals and range
//! profiles.

pub mod config;
pub mod dataset;
pub mod model;
pub mod synth;

pub use config::{
    default_materials, validate_materials, GeometryConfig, MaterialSpec, RadarConfig,
    NOMINAL_HEIGHT_M, NUM_CLASSES,
};
pub use dataset::{generate_dataset, session_gain_db, Dataset, Scenario};
pub use model::{angular_response, received_amplitude, received_power, slant_range};
pub use synth::{
    bin_position, integrate_sequence, peak_bin, range_profile, synthesize_frame, RangeProcessor,
    RangeProfile,
};

/// Sample type of synthesized frames.
pub use num_complex::Complex;
