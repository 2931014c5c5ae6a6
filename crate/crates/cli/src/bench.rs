//! Single-sample latency of fused inference and of feature preparation.

use std::hint::black_box;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use radmat::features::{extract_features, normalize, BinWindow};
use radmat::nn::{load_params, FusedMlp};
use radmat::radar::{generate_dataset, Scenario, NUM_CLASSES};
use radmat::SimConfig;

use crate::alloc::allocations;

const WARMUP: usize = 10_000;

#[derive(Debug, Serialize)]
pub struct BenchSummary {
    pub model: String,
    pub iterations: usize,
    pub inference_median_us: f64,
    pub inference_p99_us: f64,
    pub feature_median_us: f64,
    pub feature_p99_us: f64,
    pub allocations_in_timed_loop: u64,
}

/// Rounds to three significant digits.
pub fn sig3(x: f64) -> f64 {
    sig3_text(x).parse().unwrap_or(x)
}

pub fn sig3_text(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let decimals = (2 - x.abs().log10().floor() as i32).max(0) as usize;
    format!("{x:.decimals$}")
}

fn percentile(sorted: &[u64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx] as f64 / 1000.0
}

/// Times `f` once per iteration into a preallocated buffer. Returns the
/// sorted per-call nanoseconds and the allocations seen during the loop.
fn time_loop(iterations: usize, mut f: impl FnMut()) -> (Vec<u64>, u64) {
    for _ in 0..WARMUP {
        f();
    }
    let mut samples = vec![0u64; iterations];
    let before = allocations();
    for slot in samples.iter_mut() {
        let t = Instant::now();
        f();
        *slot = t.elapsed().as_nanos() as u64;
    }
    let allocated = allocations() - before;
    samples.sort_unstable();
    (samples, allocated)
}

pub fn run(cfg: &SimConfig, model_path: &Path, iterations: usize) -> Result<BenchSummary> {
    if iterations < 100_000 {
        bail!("at least 100000 iterations are required, got {iterations}");
    }
    let saved = load_params::<f64>(model_path)
        .with_context(|| format!("loading model {}", model_path.display()))?;
    let fused = FusedMlp::from_classifier(&saved.model);
    let window = BinWindow::new(saved.trained_on.window_start);
    let mode = saved.trained_on.normalization;
    let resolution = cfg.radar.range_resolution_m;

    let data = generate_dataset::<f64>(
        &cfg.radar,
        &cfg.materials,
        &Scenario::Nominal,
        1,
        cfg.experiment.seed,
    )?;
    let profile = &data.profiles[0];
    let input = normalize(&extract_features(profile, window)?, mode, resolution)?.values;

    let mut scratch = fused.scratch();
    let mut probs = [0.0f64; NUM_CLASSES];
    let (inference, allocated) = time_loop(iterations, || {
        fused
            .infer_into(black_box(&input), &mut scratch, &mut probs)
            .expect("width checked above");
        black_box(&probs);
    });
    if allocated != 0 {
        bail!("fused inference allocated {allocated} times inside the timed loop");
    }
    let (features, _) = time_loop(iterations, || {
        let fv = extract_features(black_box(profile), window).expect("window checked above");
        black_box(normalize(&fv, mode, resolution).expect("finite profile"));
    });

    Ok(BenchSummary {
        model: model_path.display().to_string(),
        iterations,
        inference_median_us: sig3(percentile(&inference, 0.5)),
        inference_p99_us: sig3(percentile(&inference, 0.99)),
        feature_median_us: sig3(percentile(&features, 0.5)),
        feature_p99_us: sig3(percentile(&features, 0.99)),
        allocations_in_timed_loop: allocated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_significant_digits() {
        assert_eq!(sig3_text(0.123456), "0.123");
        assert_eq!(sig3_text(1.23456), "1.23");
        assert_eq!(sig3_text(12.3456), "12.3");
        assert_eq!(sig3_text(123.456), "123");
        assert_eq!(sig3_text(0.05), "0.0500");
        assert_eq!(sig3(0.0123456), 0.0123);
    }

    #[test]
    fn percentiles() {
        let v: Vec<u64> = (1..=100).map(|i| i * 1000).collect();
        assert_eq!(percentile(&v, 0.5), 51.0);
        assert_eq!(percentile(&v, 0.99), 99.0);
    }
}
