//! Scenario plans and dataset generation.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand_distr::{Distribution, LogNormal, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::{self, tag, Rng};

use super::config::{validate_materials, GeometryConfig, MaterialSpec, RadarConfig, NUM_CLASSES};
use super::model::received_amplitude;
use super::synth::{integrate_sequence, synthesize_frame, RangeProcessor, RangeProfile};

/// Std-dev of the per-session gain drift, in dB. Session 0 is the
/// calibration session and always has 0 dB.
pub const SESSION_GAIN_SIGMA_DB: f64 = 1.0;

/// Where and when a set of sequences is recorded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scenario {
    #[default]
    Nominal,
    Height {
        height_m: f64,
    },
    Tilt {
        tilt_deg: f64,
    },
    Session {
        session_id: u32,
    },
    /// Height and tilt drawn uniformly per sequence.
    Augmented {
        height_range_m: [f64; 2],
        tilt_range_deg: [f64; 2],
    },
}

impl Scenario {
    pub fn default_augmented() -> Self {
        Scenario::Augmented {
            height_range_m: [0.35, 0.55],
            tilt_range_deg: [-10.0, 10.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |g: GeometryConfig| g.validate();
        match *self {
            Scenario::Nominal | Scenario::Session { .. } => Ok(()),
            Scenario::Height { height_m } => check(GeometryConfig::nominal().with_height(height_m)),
            Scenario::Tilt { tilt_deg } => check(GeometryConfig::nominal().with_tilt(tilt_deg)),
            Scenario::Augmented {
                height_range_m: [h0, h1],
                tilt_range_deg: [t0, t1],
            } => {
                if !(h0 <= h1 && t0 <= t1) {
                    return Err(Error::InvalidConfig(
                        "augmented ranges must be ordered low..high".into(),
                    ));
                }
                for h in [h0, h1] {
                    for t in [t0, t1] {
                        check(GeometryConfig::nominal().with_height(h).with_tilt(t))?;
                    }
                }
                Ok(())
            }
        }
    }

    /// Geometry of one sequence. Only the augmented plan consumes randomness.
    pub fn geometry(&self, cfg: &RadarConfig, rng: &mut Rng) -> GeometryConfig {
        let nominal = GeometryConfig::nominal();
        match *self {
            Scenario::Nominal => nominal,
            Scenario::Height { height_m } => nominal.with_height(height_m),
            Scenario::Tilt { tilt_deg } => nominal.with_tilt(tilt_deg),
            Scenario::Session { session_id } => GeometryConfig {
                session_id,
                session_gain_db: session_gain_db(cfg, session_id),
                ..nominal
            },
            Scenario::Augmented {
                height_range_m: [h0, h1],
                tilt_range_deg: [t0, t1],
            } => {
                let h = if h0 < h1 {
                    Uniform::new_inclusive(h0, h1).unwrap().sample(rng)
                } else {
                    h0
                };
                let t = if t0 < t1 {
                    Uniform::new_inclusive(t0, t1).unwrap().sample(rng)
                } else {
                    t0
                };
                nominal.with_height(h).with_tilt(t)
            }
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Scenario::Nominal => write!(f, "nominal"),
            Scenario::Height { height_m } => write!(f, "height:{height_m}"),
            Scenario::Tilt { tilt_deg } => write!(f, "tilt:{tilt_deg}"),
            Scenario::Session { session_id } => write!(f, "session:{session_id}"),
            Scenario::Augmented {
                height_range_m: [h0, h1],
                tilt_range_deg: [t0, t1],
            } => write!(f, "augmented:{h0}..{h1},{t0}..{t1}"),
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    /// Parses `nominal`, `height:0.55`, `tilt:+10`, `session:3`,
    /// `augmented` or `augmented:0.35..0.55,-10..10`.
    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownScenario(s.to_owned());
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| unknown());
        let range = |v: &str| -> Result<[f64; 2]> {
            let (a, b) = v.split_once("..").ok_or_else(unknown)?;
            Ok([num(a)?, num(b)?])
        };
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a)),
            None => (s.trim(), None),
        };
        let scenario = match (kind, arg) {
            ("nominal", None) => Scenario::Nominal,
            ("height", Some(a)) => Scenario::Height { height_m: num(a)? },
            ("tilt", Some(a)) => Scenario::Tilt { tilt_deg: num(a)? },
            ("session", Some(a)) => Scenario::Session {
                session_id: a.trim().parse().map_err(|_| unknown())?,
            },
            ("augmented", None) => Scenario::default_augmented(),
            ("augmented", Some(a)) => {
                let (h, t) = a.split_once(',').ok_or_else(unknown)?;
                Scenario::Augmented {
                    height_range_m: range(h)?,
                    tilt_range_deg: range(t)?,
                }
            }
            _ => return Err(unknown()),
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Gain drift of a recording session, drawn once per session id.
pub fn session_gain_db(cfg: &RadarConfig, session_id: u32) -> f64 {
    if session_id == 0 {
        return 0.0;
    }
    let mut rng = seed::rng(seed::mix(&[
        tag::SESSION,
        cfg.master_seed,
        u64::from(session_id),
    ]));
    Normal::new(0.0, SESSION_GAIN_SIGMA_DB)
        .unwrap()
        .sample(&mut rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub profiles: Vec<RangeProfile<T>>,
    pub scenario: Scenario,
    pub base_seed: u64,
}

impl<T> Dataset<T> {
    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// Every per-sequence seed this dataset was generated from.
    pub fn sequence_seeds(&self, n_per_class: usize) -> Vec<u64> {
        (0..NUM_CLASSES)
            .flat_map(|c| (0..n_per_class).map(move |i| seed::sequence_seed(self.base_seed, c, i)))
            .collect()
    }
}

/// Simulates and integrates one recorded sequence.
pub fn simulate_sequence<T: Scalar>(
    cfg: &RadarConfig,
    processor: &RangeProcessor<T>,
    scenario: &Scenario,
    material: &MaterialSpec,
    sequence_seed: u64,
) -> Result<RangeProfile<T>> {
    let mut rng = seed::rng(sequence_seed);
    let geometry = scenario.geometry(cfg, &mut rng);
    let jitter = if material.texture_sigma > 0.0 {
        LogNormal::new(0.0, material.texture_sigma)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .sample(&mut rng)
    } else {
        1.0
    };
    let amplitude: T = received_amplitude(cfg, &geometry, material, T::lit(jitter))?;
    let frames = (0..cfg.frames_per_sequence)
        .map(|f| {
            let frame_seed = seed::mix(&[tag::FRAME, sequence_seed, f as u64]);
            let frame = synthesize_frame(cfg, &geometry, amplitude, frame_seed)?;
            Ok(RangeProfile {
                magnitudes: processor.magnitudes(&frame)?,
                geometry,
                material_class: material.class_id,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    integrate_sequence(&frames)
}

/// Generates `n_per_class` integrated profiles for each of the five classes,
/// ordered by class then sequence index.
pub fn generate_dataset<T: Scalar>(
    cfg: &RadarConfig,
    materials: &[MaterialSpec],
    scenario: &Scenario,
    n_per_class: usize,
    base_seed: u64,
) -> Result<Dataset<T>> {
    cfg.validate()?;
    validate_materials(materials)?;
    scenario.validate()?;
    let processor = RangeProcessor::<T>::new(cfg)?;
    let profiles = (0..NUM_CLASSES * n_per_class)
        .into_par_iter()
        .map(|k| {
            let (class, idx) = (k / n_per_class, k % n_per_class);
            let seq_seed = seed::sequence_seed(base_seed, class, idx);
            simulate_sequence(cfg, &processor, scenario, &materials[class], seq_seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        profiles,
        scenario: *scenario,
        base_seed,
    })
}

/// Concatenates datasets; the result keeps the first one's scenario tag.
pub fn concat<T: Clone>(parts: &[Dataset<T>]) -> Option<Dataset<T>> {
    let first = parts.first()?;
    Some(Dataset {
        profiles: parts
            .iter()
            .flat_map(|d| d.profiles.iter().cloned())
            .collect(),
        scenario: first.scenario,
        base_seed: first.base_seed,
    })
}

/// Renders a float with nine significant digits.
pub(crate) fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Debug dump: `class_id,height_m,tilt_deg,session_id,bin00,...`.
pub fn write_profiles_csv<T: Scalar, W: Write>(
    profiles: &[RangeProfile<T>],
    mut out: W,
) -> Result<()> {
    let bins = profiles.first().map_or(0, |p| p.magnitudes.len());
    let mut header = String::from("class_id,height_m,tilt_deg,session_id");
    for b in 0..bins {
        header.push_str(&format!(",bin{b:02}"));
    }
    let io = |e| Error::io("<profile csv>", e);
    writeln!(out, "{header}").map_err(io)?;
    for p in profiles {
        let mut line = format!(
            "{},{},{},{}",
            p.material_class,
            sig9(p.geometry.height_m),
            sig9(p.geometry.tilt_deg),
            p.geometry.session_id
        );
        for m in &p.magnitudes {
            line.push(',');
            line.push_str(&sig9(m.as_f64()));
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    Ok(())
}

pub fn read_profiles_csv<T: Scalar, R: BufRead>(input: R) -> Result<Vec<RangeProfile<T>>> {
    let bad = |m: String| Error::MalformedDataset(m);
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| bad("missing header".into()))?
        .map_err(|e| Error::io("<profile csv>", e))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 5 || cols[..4] != ["class_id", "height_m", "tilt_deg", "session_id"] {
        return Err(bad(format!("unexpected header `{header}`")));
    }
    let bins = cols.len() - 4;
    for (b, c) in cols[4..].iter().enumerate() {
        if *c != format!("bin{b:02}") {
            return Err(bad(format!("unexpected column `{c}`")));
        }
    }
    let mut profiles = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io("<profile csv>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != bins + 4 {
            return Err(bad(format!("row {} has {} fields", lineno + 2, f.len())));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| bad(format!("row {}: bad number `{s}`", lineno + 2)))
        };
        let class: usize = f[0]
            .parse()
            .map_err(|_| bad(format!("row {}: bad class id", lineno + 2)))?;
        let geometry = GeometryConfig {
            height_m: num(f[1])?,
            tilt_deg: num(f[2])?,
            session_id: f[3]
                .parse()
                .map_err(|_| bad(format!("row {}: bad session id", lineno + 2)))?,
            session_gain_db: 0.0,
        };
        let magnitudes = f[4..]
            .iter()
            .map(|s| num(s).map(T::lit))
            .collect::<Result<Vec<_>>>()?;
        profiles.push(RangeProfile {
            magnitudes,
            geometry,
            material_class: class,
        });
    }
    Ok(profiles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radar::config::default_materials;

    fn gen(scenario: Scenario, n: usize, seed: u64) -> Dataset<f64> {
        generate_dataset(
            &RadarConfig::default(),
            &default_materials(),
            &scenario,
            n,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn nominal_counts_and_metadata() {
        let d = gen(Scenario::Nominal, 10, 1);
        assert_eq!(d.len(), 50);
        for (k, p) in d.profiles.iter().enumerate() {
            assert_eq!(p.material_class, k / 10);
            assert_eq!(p.geometry, GeometryConfig::nominal());
            assert_eq!(p.magnitudes.len(), 32);
            assert!(p.magnitudes.iter().all(|&m| m >= 0.0));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen(Scenario::Nominal, 6, 99);
        let b = gen(Scenario::Nominal, 6, 99);
        assert_eq!(a, b);
        let c = gen(Scenario::Nominal, 6, 100);
        assert_ne!(a.profiles, c.profiles);
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let a = one.install(|| gen(Scenario::default_augmented(), 8, 5));
        let b = gen(Scenario::default_augmented(), 8, 5);
        assert_eq!(a, b);
    }

    #[test]
    fn sequences_do_not_depend_on_dataset_size() {
        let small = gen(Scenario::Nominal, 3, 11);
        let large = gen(Scenario::Nominal, 7, 11);
        for c in 0..5 {
            for i in 0..3 {
                assert_eq!(small.profiles[c * 3 + i], large.profiles[c * 7 + i]);
            }
        }
    }

    #[test]
    fn tilt_dims_metal_peaks() {
        let metal_peak = |d: &Dataset<f64>| {
            let peaks: Vec<f64> = d.profiles[..20]
                .iter()
                .map(|p| p.magnitudes.iter().cloned().fold(0.0, f64::max))
                .collect();
            peaks.iter().sum::<f64>() / peaks.len() as f64
        };
        let nominal = gen(Scenario::Nominal, 10, 3);
        let tilted = gen(Scenario::Tilt { tilt_deg: 10.0 }, 10, 4);
        assert!(metal_peak(&tilted) < metal_peak(&nominal));
    }

    #[test]
    fn session_geometry_and_gain() {
        let cfg = RadarConfig::default();
        assert_eq!(session_gain_db(&cfg, 0), 0.0);
        let g = session_gain_db(&cfg, 3);
        assert_eq!(g, session_gain_db(&cfg, 3));
        assert_ne!(g, session_gain_db(&cfg, 4));
        let d = gen(Scenario::Session { session_id: 3 }, 2, 0);
        for p in &d.profiles {
            assert_eq!(p.geometry.height_m, 0.45);
            assert_eq!(p.geometry.tilt_deg, 0.0);
            assert_eq!(p.geometry.session_id, 3);
            assert_eq!(p.geometry.session_gain_db, g);
        }
    }

    #[test]
    fn augmented_geometry_stays_in_range() {
        let d = gen(Scenario::default_augmented(), 20, 8);
        for p in &d.profiles {
            assert!((0.35..=0.55).contains(&p.geometry.height_m));
            assert!((-10.0..=10.0).contains(&p.geometry.tilt_deg));
        }
    }

    #[test]
    fn scenario_strings() {
        for s in [
            "nominal",
            "height:0.55",
            "tilt:-10",
            "session:3",
            "augmented:0.35..0.55,-10..10",
        ] {
            let parsed: Scenario = s.parse().unwrap();
            assert_eq!(parsed.to_string().parse::<Scenario>().unwrap(), parsed);
        }
        assert_eq!(
            "tilt:+10".parse::<Scenario>().unwrap(),
            Scenario::Tilt { tilt_deg: 10.0 }
        );
        assert_eq!(
            "augmented".parse::<Scenario>().unwrap(),
            Scenario::default_augmented()
        );
        for bad in ["sideways", "height", "tilt:abc", "tilt:95", "height:-1"] {
            assert!(bad.parse::<Scenario>().is_err(), "{bad}");
        }
        assert!(matches!(
            "warp:9".parse::<Scenario>(),
            Err(Error::UnknownScenario(_))
        ));
    }

    #[test]
    fn profile_csv_round_trip() {
        let d = gen(Scenario::Tilt { tilt_deg: -10.0 }, 2, 4);
        let mut buf = Vec::new();
        write_profiles_csv(&d.profiles, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("class_id,height_m,tilt_deg,session_id,bin00,bin01"));
        assert!(header.ends_with(",bin31"));
        let back: Vec<RangeProfile<f64>> = read_profiles_csv(&buf[..]).unwrap();
        assert_eq!(back.len(), d.len());
        for (a, b) in back.iter().zip(&d.profiles) {
            assert_eq!(a.material_class, b.material_class);
            for (x, y) in a.magnitudes.iter().zip(&b.magnitudes) {
                assert!((x - y).abs() <= 1e-8 * y.abs().max(1e-300));
            }
        }
    }
}
