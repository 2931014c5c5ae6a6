//! Range-bin window selection and the 12-bin intensity descriptor.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radar::dataset::sig9;
use crate::radar::{peak_bin, GeometryConfig, RangeProfile, NUM_CLASSES};
use crate::scalar::Scalar;

pub const FEATURE_DIM: usize = 12;

/// Floor added before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinWindow {
    pub start_bin: usize,
    pub width: usize,
}

impl BinWindow {
    pub fn new(start_bin: usize) -> Self {
        Self {
            start_bin,
            width: FEATURE_DIM,
        }
    }

    pub fn end(&self) -> usize {
        self.start_bin + self.width
    }

    pub fn check(&self, profile_len: usize) -> Result<()> {
        if self.end() > profile_len {
            return Err(Error::WindowOutOfBounds {
                start: self.start_bin,
                end: self.end(),
                len: profile_len,
            });
        }
        Ok(())
    }

    /// Column names `bNN` for the absolute bins of this window.
    pub fn column_names(&self) -> Vec<String> {
        (self.start_bin..self.end())
            .map(|b| format!("b{b:02}"))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    pub values: [T; FEATURE_DIM],
    pub label: usize,
    pub geometry: GeometryConfig,
    pub window: BinWindow,
    /// Set by range-aware normalization.
    pub estimated_range_m: Option<f64>,
}

/// Picks the contiguous window with the largest summed magnitude over the
/// training set. Ties go to the smaller start bin.
pub fn select_window<T: Scalar>(profiles: &[RangeProfile<T>], width: usize) -> Result<BinWindow> {
    let first = profiles
        .first()
        .ok_or(Error::EmptyInput("training profiles"))?;
    let len = first.magnitudes.len();
    if width == 0 || width > len {
        return Err(Error::WindowOutOfBounds {
            start: 0,
            end: width,
            len,
        });
    }
    let mut per_bin = vec![0.0f64; len];
    for p in profiles {
        if p.magnitudes.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                actual: p.magnitudes.len(),
            });
        }
        for (acc, m) in per_bin.iter_mut().zip(&p.magnitudes) {
            *acc += m.as_f64();
        }
    }
    let mut best = (0, f64::NEG_INFINITY);
    for start in 0..=len - width {
        let energy: f64 = per_bin[start..start + width].iter().sum();
        if energy > best.1 {
            best = (start, energy);
        }
    }
    Ok(BinWindow {
        start_bin: best.0,
        width,
    })
}

pub fn extract_features<T: Scalar>(
    profile: &RangeProfile<T>,
    window: BinWindow,
) -> Result<FeatureVector<T>> {
    if window.width != FEATURE_DIM {
        return Err(Error::InvalidConfig(format!(
            "descriptor width must be {FEATURE_DIM}, got {}",
            window.width
        )));
    }
    window.check(profile.magnitudes.len())?;
    let mut values = [T::zero(); FEATURE_DIM];
    values.copy_from_slice(&profile.magnitudes[window.start_bin..window.end()]);
    Ok(FeatureVector {
        values,
        label: profile.material_class,
        geometry: profile.geometry,
        window,
        estimated_range_m: None,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum NormalizationMode {
    #[default]
    None,
    /// Rescale by `(R̂ / reference)^2`, undoing the `R^-2` amplitude law.
    RangeR4 {
        reference_range_m: f64,
    },
    LogMagnitude,
    MaxUnit,
}

impl NormalizationMode {
    pub fn range_r4() -> Self {
        NormalizationMode::RangeR4 {
            reference_range_m: crate::radar::NOMINAL_HEIGHT_M,
        }
    }
}

impl fmt::Display for NormalizationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormalizationMode::None => write!(f, "none"),
            NormalizationMode::RangeR4 { reference_range_m } => {
                write!(f, "range_r4:{reference_range_m}")
            }
            NormalizationMode::LogMagnitude => write!(f, "log_magnitude"),
            NormalizationMode::MaxUnit => write!(f, "max_unit"),
        }
    }
}

impl FromStr for NormalizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("unknown normalization `{s}`"));
        Ok(match s.split_once(':') {
            None => match s {
                "none" => NormalizationMode::None,
                "range_r4" => NormalizationMode::range_r4(),
                "log_magnitude" => NormalizationMode::LogMagnitude,
                "max_unit" => NormalizationMode::MaxUnit,
                _ => return Err(bad()),
            },
            Some(("range_r4", r)) => {
                let reference_range_m: f64 = r.parse().map_err(|_| bad())?;
                if !(reference_range_m > 0.0) {
                    return Err(bad());
                }
                NormalizationMode::RangeR4 { reference_range_m }
            }
            Some(_) => return Err(bad()),
        })
    }
}

/// Applies a normalization mode. `range_resolution_m` converts the in-window
/// peak index into a range estimate for [`NormalizationMode::RangeR4`].
pub fn normalize<T: Scalar>(
    fv: &FeatureVector<T>,
    mode: NormalizationMode,
    range_resolution_m: f64,
) -> Result<FeatureVector<T>> {
    let mut out = fv.clone();
    match mode {
        NormalizationMode::None => {}
        NormalizationMode::RangeR4 { reference_range_m } => {
            let peak = fv.window.start_bin + peak_bin(&fv.values);
            let range = peak as f64 * range_resolution_m;
            let gain = T::lit((range / reference_range_m).powi(2));
            for v in &mut out.values {
                *v *= gain;
            }
            out.estimated_range_m = Some(range);
        }
        NormalizationMode::LogMagnitude => {
            let floor = T::lit(LOG_FLOOR);
            for v in &mut out.values {
                *v = (*v + floor).ln();
            }
        }
        NormalizationMode::MaxUnit => {
            let max = fv.values.iter().copied().fold(T::zero(), T::max);
            if !(max > T::zero()) {
                return Err(Error::DegenerateFeature("max_unit of an all-zero vector"));
            }
            for v in &mut out.values {
                *v /= max;
            }
        }
    }
    if out.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFeature(
            "normalization produced a non-finite value",
        ));
    }
    Ok(out)
}

/// Per-feature z-scoring fitted on a training set. Only used for ablations;
/// the baseline pipeline feeds raw magnitudes to the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit<T: Scalar>(features: &[FeatureVector<T>]) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptyInput("features"));
        }
        let n = features.len() as f64;
        let mut mean = vec![0.0; FEATURE_DIM];
        for fv in features {
            for (m, v) in mean.iter_mut().zip(&fv.values) {
                *m += v.as_f64() / n;
            }
        }
        let mut std = vec![0.0; FEATURE_DIM];
        for fv in features {
            for ((s, v), m) in std.iter_mut().zip(&fv.values).zip(&mean) {
                *s += (v.as_f64() - m).powi(2) / n;
            }
        }
        for s in &mut std {
            *s = s.sqrt().max(1e-12);
        }
        Ok(Self { mean, std })
    }

    pub fn apply<T: Scalar>(&self, fv: &FeatureVector<T>) -> FeatureVector<T> {
        let mut out = fv.clone();
        for (i, v) in out.values.iter_mut().enumerate() {
            *v = T::lit((v.as_f64() - self.mean[i]) / self.std[i]);
        }
        out
    }
}

pub fn class_name(label: usize) -> &'static str {
    ["iron", "aluminum", "plexiglass", "wood", "limestone"]
        .get(label)
        .copied()
        .unwrap_or("unknown")
}

/// Writes the feature dataset consumed by training and evaluation.
pub fn write_features_csv<T: Scalar, W: Write>(
    features: &[FeatureVector<T>],
    mut out: W,
) -> Result<()> {
    let window = features
        .first()
        .map(|f| f.window)
        .ok_or(Error::EmptyInput("features"))?;
    let io = |e| Error::io("<feature csv>", e);
    writeln!(
        out,
        "label,class_name,height_m,tilt_deg,session_id,{}",
        window.column_names().join(",")
    )
    .map_err(io)?;
    for fv in features {
        if fv.window != window {
            return Err(Error::MalformedDataset(
                "mixed bin windows in one file".into(),
            ));
        }
        let mut line = format!(
            "{},{},{},{},{}",
            fv.label,
            class_name(fv.label),
            sig9(fv.geometry.height_m),
            sig9(fv.geometry.tilt_deg),
            fv.geometry.session_id
        );
        for v in &fv.values {
            line.push(',');
            line.push_str(&sig9(v.as_f64()));
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    Ok(())
}

pub fn read_features_csv<T: Scalar, R: BufRead>(input: R) -> Result<Vec<FeatureVector<T>>> {
    let bad = |m: String| Error::MalformedDataset(m);
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| bad("missing header".into()))?
        .map_err(|e| Error::io("<feature csv>", e))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() != 5 + FEATURE_DIM
        || cols[..5] != ["label", "class_name", "height_m", "tilt_deg", "session_id"]
    {
        return Err(bad(format!("unexpected header `{header}`")));
    }
    let start_bin: usize = cols[5]
        .strip_prefix('b')
        .and_then(|b| b.parse().ok())
        .ok_or_else(|| bad(format!("bad bin column `{}`", cols[5])))?;
    let window = BinWindow::new(start_bin);
    if window.column_names() != cols[5..] {
        return Err(bad("bin columns are not contiguous".into()));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        let line = line.map_err(|e| Error::io("<feature csv>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols.len() {
            return Err(bad(format!("row {row} has {} fields", f.len())));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| bad(format!("row {row}: bad number `{s}`")))
        };
        let label: usize = f[0]
            .parse()
            .map_err(|_| bad(format!("row {row}: bad label")))?;
        if label >= NUM_CLASSES {
            return Err(Error::InvalidLabel {
                label,
                classes: NUM_CLASSES,
            });
        }
        let mut values = [T::zero(); FEATURE_DIM];
        for (v, s) in values.iter_mut().zip(&f[5..]) {
            *v = T::lit(num(s)?);
        }
        out.push(FeatureVector {
            values,
            label,
            geometry: GeometryConfig {
                height_m: num(f[2])?,
                tilt_deg: num(f[3])?,
                session_id: f[4]
                    .parse()
                    .map_err(|_| bad(format!("row {row}: bad session")))?,
                session_gain_db: 0.0,
            },
            window,
            estimated_range_m: None,
        });
    }
    Ok(out)
}
