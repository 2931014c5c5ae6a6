//! Self-describing JSON weight file.
//!
//! Numbers are written with 17 significant digits, enough for any `f64` to
//! parse back to the identical bit pattern.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use crate::error::{Error, Result};
use crate::features::NormalizationMode;
use crate::scalar::Scalar;

use super::mlp::{validate_dims, BatchNorm, Dense, HiddenBlock, MlpParams};
use super::train::Classifier;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Where a model came from and how its inputs must be prepared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainedOn {
    pub scenario: String,
    pub seed: u64,
    pub dataset_hash: String,
    pub window_start: usize,
    pub normalization: NormalizationMode,
    #[serde(default)]
    pub standardized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum LayerRecord {
    Dense {
        inputs: usize,
        outputs: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    Batchnorm {
        width: usize,
        gamma: Vec<f64>,
        beta: Vec<f64>,
        running_mean: Vec<f64>,
        running_var: Vec<f64>,
        epsilon: f64,
        momentum: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    dims: Vec<usize>,
    layers: Vec<LayerRecord>,
    trained_on: TrainedOn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel<T> {
    pub model: Classifier<T>,
    pub trained_on: TrainedOn,
}

/// Writes floats as `d.dddddddddddddddde±x`.
struct Sig17;

impl Formatter for Sig17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn from_f64<T: Scalar>(v: Vec<f64>) -> Vec<T> {
    v.into_iter().map(T::lit).collect()
}

pub fn to_json<T: Scalar>(params: &MlpParams<T>, trained_on: &TrainedOn) -> Result<String> {
    params.validate()?;
    let mut layers = Vec::new();
    let dense = |d: &Dense<T>| LayerRecord::Dense {
        inputs: d.inputs,
        outputs: d.outputs,
        weights: to_f64(&d.weights),
        bias: to_f64(&d.bias),
    };
    for b in &params.hidden {
        layers.push(dense(&b.dense));
        let n = &b.norm;
        layers.push(LayerRecord::Batchnorm {
            width: n.width(),
            gamma: to_f64(&n.gamma),
            beta: to_f64(&n.beta),
            running_mean: to_f64(&n.running_mean),
            running_var: to_f64(&n.running_var),
            epsilon: n.epsilon.as_f64(),
            momentum: n.momentum.as_f64(),
        });
    }
    layers.push(dense(&params.output));
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        dims: params.dims(),
        layers,
        trained_on: trained_on.clone(),
    };
    let all_finite = file.layers.iter().all(|l| match l {
        LayerRecord::Dense { weights, bias, .. } => {
            weights.iter().chain(bias).all(|v| v.is_finite())
        }
        LayerRecord::Batchnorm {
            gamma,
            beta,
            running_mean,
            running_var,
            ..
        } => gamma
            .iter()
            .chain(beta)
            .chain(running_mean)
            .chain(running_var)
            .all(|v| v.is_finite()),
    });
    if !all_finite {
        return Err(Error::CorruptModel(
            "refusing to save non-finite weights".into(),
        ));
    }
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    file.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn from_json<T: Scalar>(text: &str) -> Result<SavedModel<T>> {
    let corrupt = |m: String| Error::CorruptModel(m);
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| corrupt("missing format_version".into()))?;
    if version != u64::from(MODEL_FORMAT_VERSION) {
        return Err(Error::VersionMismatch {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))?;
    validate_dims(&file.dims)?;
    let hidden_count = file.dims.len() - 2;
    if file.layers.len() != 2 * hidden_count + 1 {
        return Err(corrupt(format!(
            "expected {} layers, found {}",
            2 * hidden_count + 1,
            file.layers.len()
        )));
    }
    let dense = |rec: &LayerRecord, inputs: usize, outputs: usize| -> Result<Dense<T>> {
        match rec {
            LayerRecord::Dense {
                inputs: i,
                outputs: o,
                weights,
                bias,
            } if *i == inputs && *o == outputs && weights.len() == i * o && bias.len() == *o => {
                Ok(Dense {
                    inputs,
                    outputs,
                    weights: from_f64(weights.clone()),
                    bias: from_f64(bias.clone()),
                })
            }
            _ => Err(corrupt(format!("expected dense layer {inputs}->{outputs}"))),
        }
    };
    let mut hidden = Vec::with_capacity(hidden_count);
    for h in 0..hidden_count {
        let d = dense(&file.layers[2 * h], file.dims[h], file.dims[h + 1])?;
        let norm = match &file.layers[2 * h + 1] {
            LayerRecord::Batchnorm {
                width,
                gamma,
                beta,
                running_mean,
                running_var,
                epsilon,
                momentum,
            } if *width == d.outputs => BatchNorm {
                gamma: from_f64(gamma.clone()),
                beta: from_f64(beta.clone()),
                running_mean: from_f64(running_mean.clone()),
                running_var: from_f64(running_var.clone()),
                epsilon: T::lit(*epsilon),
                momentum: T::lit(*momentum),
            },
            _ => {
                return Err(corrupt(format!(
                    "expected batchnorm layer of width {}",
                    d.outputs
                )))
            }
        };
        hidden.push(HiddenBlock { dense: d, norm });
    }
    let output = dense(
        &file.layers[2 * hidden_count],
        file.dims[hidden_count],
        file.dims[hidden_count + 1],
    )?;
    let params = MlpParams { hidden, output };
    params.validate()?;
    Ok(SavedModel {
        model: Classifier::from_params(params)?,
        trained_on: file.trained_on,
    })
}

pub fn save_params<T: Scalar>(
    params: &MlpParams<T>,
    trained_on: &TrainedOn,
    path: &Path,
) -> Result<()> {
    let text = to_json(params, trained_on)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_params<T: Scalar>(path: &Path) -> Result<SavedModel<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::init_params;

    fn meta() -> TrainedOn {
        TrainedOn {
            scenario: "nominal".into(),
            seed: 7,
            dataset_hash: "abc".into(),
            window_start: 6,
            normalization: NormalizationMode::None,
            standardized: false,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut p = init_params::<f64>(&[12, 32, 32, 5], 3).unwrap();
        p.hidden[1].norm.running_var[4] = 0.123_456_789_012_345_67;
        p.output.bias[2] = -1e-300;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_params(&p, &meta(), &path).unwrap();
        let back = load_params::<f64>(&path).unwrap();
        assert_eq!(back.model.params(), &p);
        assert_eq!(back.trained_on, meta());
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"format_version\":1"));
        assert!(text.contains("\"kind\":\"batchnorm\""));
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let p = init_params::<f64>(&[12, 8, 8, 5], 1).unwrap();
        let text = to_json(&p, &meta()).unwrap();
        let cut = &text[..text.len() / 2];
        assert!(matches!(from_json::<f64>(cut), Err(Error::CorruptModel(_))));
        assert!(matches!(from_json::<f64>(""), Err(Error::CorruptModel(_))));
    }

    #[test]
    fn dims_come_from_the_file() {
        let p = init_params::<f64>(&[12, 16, 24, 5], 2).unwrap();
        let back = from_json::<f64>(&to_json(&p, &meta()).unwrap()).unwrap();
        assert_eq!(back.model.params().dims(), vec![12, 16, 24, 5]);
    }

    #[test]
    fn version_and_dimension_checks() {
        let p = init_params::<f64>(&[12, 8, 8, 5], 1).unwrap();
        let text = to_json(&p, &meta()).unwrap();
        let v2 = text.replacen("\"format_version\":1", "\"format_version\":2", 1);
        assert!(matches!(
            from_json::<f64>(&v2),
            Err(Error::VersionMismatch {
                found: 2,
                expected: 1
            })
        ));
        let wrong_dims = text.replacen("\"dims\":[12,8,8,5]", "\"dims\":[12,9,8,5]", 1);
        assert!(matches!(
            from_json::<f64>(&wrong_dims),
            Err(Error::CorruptModel(_))
        ));
        let bad_dims = text.replacen("\"dims\":[12,8,8,5]", "\"dims\":[12,8,5]", 1);
        assert!(from_json::<f64>(&bad_dims).is_err());
    }

    #[test]
    fn f32_round_trip() {
        let p = init_params::<f32>(&[12, 8, 8, 5], 9).unwrap();
        let back = from_json::<f32>(&to_json(&p, &meta()).unwrap()).unwrap();
        assert_eq!(back.model.params(), &p);
    }
}
