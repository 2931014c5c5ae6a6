//! Beat-signal synthesis and the range FFT.

use std::sync::Arc;

use num_complex::Complex;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

use super::config::{GeometryConfig, RadarConfig};
use super::model::slant_range;

/// Integrated (or single-frame) magnitude spectrum over the retained bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeProfile<T> {
    pub magnitudes: Vec<T>,
    pub geometry: GeometryConfig,
    pub material_class: usize,
}

impl<T: Scalar> RangeProfile<T> {
    pub fn peak_bin(&self) -> usize {
        peak_bin(&self.magnitudes)
    }
}

/// Index of the largest entry. Equal maxima resolve to the higher index,
/// which is round-half-up for a tone exactly between two bins.
pub fn peak_bin<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        let top = values[best];
        let tol = T::lit(1e-12) * top.abs().max(T::min_positive_value());
        if v > top || (top - v).abs() <= tol {
            best = i;
        }
    }
    best
}

/// Target position in fractional range bins.
pub fn bin_position<T: Scalar>(cfg: &RadarConfig, geom: &GeometryConfig) -> Result<T> {
    let r: T = slant_range(geom)?;
    Ok(r / T::lit(cfg.range_resolution_m))
}

/// One chirp's complex ADC samples: `A · exp(j·2π·p·n/N) + η[n]`, where `p` is
/// the target's bin position and `η` is circular Gaussian noise with
/// per-component std-dev `noise_sigma`.
pub fn synthesize_frame<T: Scalar>(
    cfg: &RadarConfig,
    geom: &GeometryConfig,
    amplitude: T,
    frame_seed: u64,
) -> Result<Vec<Complex<T>>> {
    if !(amplitude >= T::zero()) {
        return Err(Error::InvalidConfig(format!(
            "amplitude must be non-negative, got {amplitude}"
        )));
    }
    let position: T = bin_position(cfg, geom)?;
    if position >= T::count(cfg.num_range_bins) {
        return Err(Error::TargetOutOfWindow {
            position: position.as_f64(),
            retained: cfg.num_range_bins,
        });
    }
    let n = cfg.num_adc_samples;
    let step = T::TAU() * position / T::count(n);
    let sigma = T::lit(cfg.noise_sigma);
    let mut rng = seed::rng(frame_seed);
    let mut frame = Vec::with_capacity(n);
    for i in 0..n {
        let phase = step * T::count(i);
        let mut s = Complex::from_polar(amplitude, phase);
        if cfg.noise_sigma > 0.0 {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            s = s + Complex::new(T::lit(re) * sigma, T::lit(im) * sigma);
        }
        frame.push(s);
    }
    Ok(frame)
}

/// Range FFT with a cached plan.
#[derive(Clone)]
pub struct RangeProcessor<T: Scalar> {
    fft: Arc<dyn Fft<T>>,
    num_samples: usize,
    num_bins: usize,
}

impl<T: Scalar> std::fmt::Debug for RangeProcessor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RangeProcessor")
            .field("num_samples", &self.num_samples)
            .field("num_bins", &self.num_bins)
            .finish()
    }
}

impl<T: Scalar> RangeProcessor<T> {
    pub fn new(cfg: &RadarConfig) -> Result<Self> {
        cfg.validate()?;
        let fft = FftPlanner::new().plan_fft_forward(cfg.num_adc_samples);
        Ok(Self {
            fft,
            num_samples: cfg.num_adc_samples,
            num_bins: cfg.num_range_bins,
        })
    }

    /// Full complex spectrum, unscaled.
    pub fn spectrum(&self, frame: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        if frame.len() != self.num_samples {
            return Err(Error::LengthMismatch {
                expected: self.num_samples,
                actual: frame.len(),
            });
        }
        let mut buf = frame.to_vec();
        self.fft.process(&mut buf);
        Ok(buf)
    }

    /// Magnitudes of the first `num_range_bins` DFT bins, scaled by `1/N`.
    pub fn magnitudes(&self, frame: &[Complex<T>]) -> Result<Vec<T>> {
        let spectrum = self.spectrum(frame)?;
        let scale = T::count(self.num_samples).recip();
        Ok(spectrum[..self.num_bins]
            .iter()
            .map(|c| c.norm() * scale)
            .collect())
    }
}

/// Convenience wrapper that plans the FFT on every call.
pub fn range_profile<T: Scalar>(frame: &[Complex<T>], cfg: &RadarConfig) -> Result<Vec<T>> {
    RangeProcessor::new(cfg)?.magnitudes(frame)
}

/// Per-bin mean over the frames of one sequence.
pub fn integrate_sequence<T: Scalar>(profiles: &[RangeProfile<T>]) -> Result<RangeProfile<T>> {
    let first = profiles.first().ok_or(Error::EmptyInput("profile list"))?;
    let len = first.magnitudes.len();
    let mut acc = vec![T::zero(); len];
    for p in profiles {
        if p.magnitudes.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                actual: p.magnitudes.len(),
            });
        }
        for (a, &m) in acc.iter_mut().zip(&p.magnitudes) {
            *a += m;
        }
    }
    let count = T::count(profiles.len());
    for a in &mut acc {
        *a /= count;
    }
    Ok(RangeProfile {
        magnitudes: acc,
        geometry: first.geometry,
        material_class: first.material_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn tone(n: usize, k: f64, a: f64) -> Vec<Complex<f64>> {
        (0..n)
            .map(|i| Complex::from_polar(a, std::f64::consts::TAU * k * i as f64 / n as f64))
            .collect()
    }

    /// Direct O(N²) summation, independent of the FFT path.
    fn direct_dft(x: &[Complex<f64>]) -> Vec<Complex<f64>> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let ang = -std::f64::consts::TAU * ((k * i) % n) as f64 / n as f64;
                        v * Complex::from_polar(1.0, ang)
                    })
                    .sum()
            })
            .collect()
    }

    fn random_frame(n: usize, seed: u64) -> Vec<Complex<f64>> {
        let mut rng = seed::rng(seed);
        (0..n)
            .map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn cfg_with(n: usize, bins: usize) -> RadarConfig {
        RadarConfig {
            num_adc_samples: n,
            num_range_bins: bins,
            ..RadarConfig::default()
        }
    }

    #[test]
    fn pure_tone_lands_in_one_bin() {
        let cfg = RadarConfig::default();
        let mags = range_profile(&tone(64, 12.0, 1.0), &cfg).unwrap();
        assert_eq!(mags.len(), 32);
        assert!((mags[12] - 1.0).abs() < 1e-9);
        for (i, m) in mags.iter().enumerate() {
            if i != 12 {
                assert!(*m < 1e-9, "bin {i} = {m}");
            }
        }
    }

    #[test]
    fn zero_frame_gives_zero_profile() {
        let cfg = RadarConfig::default();
        let mags = range_profile(&vec![Complex::new(0.0, 0.0); 64], &cfg).unwrap();
        assert!(mags.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let cfg = RadarConfig::default();
        let err = range_profile(&tone(32, 1.0, 1.0), &cfg).unwrap_err();
        assert!(matches!(
            err,
            Error::LengthMismatch {
                expected: 64,
                actual: 32
            }
        ));
    }

    #[test]
    fn fft_matches_direct_summation() {
        for n in [8usize, 64] {
            let proc = RangeProcessor::<f64>::new(&cfg_with(n, n / 2)).unwrap();
            for s in 0..20 {
                let x = random_frame(n, 100 + s);
                let fast = proc.spectrum(&x).unwrap();
                let slow = direct_dft(&x);
                let err = fast
                    .iter()
                    .zip(&slow)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                assert!(err < 1e-9, "n={n} err={err}");
            }
        }
    }

    #[test]
    fn parseval_holds() {
        let proc = RangeProcessor::<f64>::new(&RadarConfig::default()).unwrap();
        for s in 0..20 {
            let x = random_frame(64, s);
            let spec = proc.spectrum(&x).unwrap();
            let time: f64 = x.iter().map(|c| c.norm_sqr()).sum();
            let freq: f64 = spec.iter().map(|c| c.norm_sqr()).sum::<f64>() / 64.0;
            assert!(((time - freq) / time).abs() < 1e-9);
        }
    }

    #[test]
    fn noiseless_frame_is_pure_tone() {
        let cfg = RadarConfig {
            noise_sigma: 0.0,
            range_resolution_m: 0.0375,
            ..RadarConfig::default()
        };
        let geom = GeometryConfig::nominal();
        let frame = synthesize_frame(&cfg, &geom, 0.7f64, 9).unwrap();
        assert!(frame.iter().all(|s| (s.norm() - 0.7).abs() < 1e-12));
        let expected = tone(64, 12.0, 0.7);
        for (a, b) in frame.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-12);
        }
        let silent = synthesize_frame(&cfg, &geom, 0.0f64, 9).unwrap();
        assert!(silent.iter().all(|s| s.norm() == 0.0));
    }

    #[test]
    fn frames_are_deterministic_per_seed() {
        let cfg = RadarConfig::default();
        let geom = GeometryConfig::nominal();
        let a = synthesize_frame(&cfg, &geom, 0.5f64, 42).unwrap();
        let b = synthesize_frame(&cfg, &geom, 0.5f64, 42).unwrap();
        let c = synthesize_frame(&cfg, &geom, 0.5f64, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn target_beyond_window_is_rejected() {
        let cfg = RadarConfig::default();
        let geom = GeometryConfig::nominal().with_height(32.0 * cfg.range_resolution_m);
        let err = synthesize_frame(&cfg, &geom, 1.0f64, 0).unwrap_err();
        assert!(matches!(err, Error::TargetOutOfWindow { .. }));
    }

    #[test]
    fn integration_is_a_mean() {
        let geom = GeometryConfig::nominal();
        let p = |v: f64| RangeProfile {
            magnitudes: vec![v; 4],
            geometry: geom,
            material_class: 1,
        };
        let same = integrate_sequence(&[p(0.3), p(0.3), p(0.3)]).unwrap();
        assert_eq!(same.magnitudes, vec![0.3; 4]);
        let mean = integrate_sequence(&[p(0.0), p(2.0)]).unwrap();
        assert_eq!(mean.magnitudes, vec![1.0; 4]);
        assert!(integrate_sequence::<f64>(&[]).is_err());
        let mut short = p(1.0);
        short.magnitudes.pop();
        assert!(integrate_sequence(&[p(1.0), short]).is_err());
    }

    #[test]
    fn integration_shrinks_noise_by_sqrt_frames() {
        // Noise-only frames: compare the spread of one frame's bin magnitude
        // with the spread of a 16-frame average, over many trials.
        let cfg = RadarConfig::default();
        let proc = RangeProcessor::<f64>::new(&cfg).unwrap();
        let geom = GeometryConfig::nominal();
        let trials = 10_000;
        let bin = 5;
        let mut single = Vec::with_capacity(trials);
        let mut integrated = Vec::with_capacity(trials);
        for t in 0..trials {
            let frames: Vec<RangeProfile<f64>> = (0..16)
                .map(|f| {
                    let x =
                        synthesize_frame(&cfg, &geom, 0.0, seed::mix(&[7, t as u64, f])).unwrap();
                    RangeProfile {
                        magnitudes: proc.magnitudes(&x).unwrap(),
                        geometry: geom,
                        material_class: 0,
                    }
                })
                .collect();
            single.push(frames[0].magnitudes[bin]);
            integrated.push(integrate_sequence(&frames).unwrap().magnitudes[bin]);
        }
        let std = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
        };
        let ratio = std(&integrated) / std(&single);
        assert!((ratio - 0.25).abs() < 0.025, "ratio {ratio}");
    }

    #[test]
    fn half_integer_ties_round_up() {
        assert_eq!(peak_bin(&[0.0, 1.0, 1.0, 0.0]), 2);
        assert_eq!(peak_bin(&[3.0, 1.0, 2.0]), 0);
        assert_eq!(peak_bin(&[0.0f64; 5]), 4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn noiseless_peak_is_nearest_bin(pos in 1.0f64..30.0) {
                let frac = pos.fract();
                prop_assume!((frac - 0.5).abs() > 1e-6);
                let cfg = RadarConfig {
                    noise_sigma: 0.0,
                    range_resolution_m: 0.0375,
                    ..RadarConfig::default()
                };
                let geom = GeometryConfig::nominal().with_height(pos * cfg.range_resolution_m);
                let x = synthesize_frame(&cfg, &geom, 1.0f64, 0).unwrap();
                let mags = range_profile(&x, &cfg).unwrap();
                let expected = (pos + 0.5).floor() as usize;
                prop_assert_eq!(peak_bin(&mags), expected);
            }
        }
    }
}
