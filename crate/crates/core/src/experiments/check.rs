//! Pass/fail thresholds for the end-to-end regimes.

use std::fmt;

use crate::error::Result;
use crate::radar::{Scenario, NOMINAL_HEIGHT_M};
use crate::scalar::Scalar;

use super::plan::{is_nominal_geometry, Condition};
use super::runner::{ConditionRun, Workbench};

pub const BASELINE_MIN_F1: f64 = 0.90;
pub const TILT_MIN_DROP: f64 = 0.15;
pub const CONFIDENCE_MIN_DROP: f64 = 0.05;
pub const MITIGATION_MIN_GAIN: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub id: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{verdict}] {} {}: {}", self.id, self.name, self.detail)
    }
}

/// Evaluates every threshold whose conditions are all present in `runs`.
pub fn check_reports<T: Scalar>(
    bench: &Workbench<T>,
    runs: &[ConditionRun],
) -> Result<Vec<CheckLine>> {
    let find = |c: Condition| runs.iter().find(|r| r.report.condition == c.name());
    let f1 = |c: Condition| find(c).map(|r| r.report.macro_f1);
    let conf = |c: Condition| find(c).map(|r| r.report.mean_confidence);
    let mut lines = Vec::new();
    let mut push = |id, name, passed, detail: String| {
        lines.push(CheckLine {
            id,
            name,
            passed,
            detail,
        })
    };

    let Some(base) = f1(Condition::Baseline) else {
        return Ok(lines);
    };
    push(
        "1",
        "baseline fidelity",
        base >= BASELINE_MIN_F1,
        format!("macro-F1 {base:.4} (need >= {BASELINE_MIN_F1:.2})"),
    );
    if let Some(tilt) = f1(Condition::TiltPooled) {
        push(
            "2",
            "tilt degradation",
            base - tilt >= TILT_MIN_DROP,
            format!("baseline {base:.4} -> tilt pooled {tilt:.4}, drop {:.4} (need >= {TILT_MIN_DROP:.2})", base - tilt),
        );
    }
    if let Some(h55) = f1(Condition::Height55) {
        let nominal = bench.mean_metal_peak(&Scenario::Nominal)?;
        let high = bench.mean_metal_peak(&Scenario::Height { height_m: 0.55 })?;
        push(
            "3",
            "height degradation direction",
            h55 < base && high < nominal,
            format!(
                "macro-F1 {h55:.4} vs baseline {base:.4}; metal peak {high:.5} at 0.55 m vs {nominal:.5} at {NOMINAL_HEIGHT_M} m"
            ),
        );
    }
    if let Some(run) = find(Condition::SessionShift) {
        let sess = run.report.macro_f1;
        let geometry_ok = run
            .geometries
            .iter()
            .all(|g| is_nominal_geometry(g.height_m, g.tilt_deg) && g.session_id != 0);
        push(
            "4",
            "session shift",
            sess < base && geometry_ok,
            format!("macro-F1 {sess:.4} vs baseline {base:.4}; nominal geometry, non-training sessions: {geometry_ok}"),
        );
    }
    if let (Some(cb), Some(ct)) = (conf(Condition::Baseline), conf(Condition::TiltPooled)) {
        push(
            "5",
            "confidence shift",
            cb - ct >= CONFIDENCE_MIN_DROP,
            format!("mean confidence {cb:.4} -> {ct:.4} under tilt, drop {:.4} (need >= {CONFIDENCE_MIN_DROP:.2})", cb - ct),
        );
    }
    if let (Some(tilt), Some(aug)) = (
        f1(Condition::TiltPooled),
        f1(Condition::MitigationAugmented),
    ) {
        push(
            "6a",
            "augmentation mitigation",
            aug - tilt >= MITIGATION_MIN_GAIN,
            format!(
                "tilt pooled {tilt:.4} -> {aug:.4}, gain {:.4} (need >= {MITIGATION_MIN_GAIN:.2})",
                aug - tilt
            ),
        );
    }
    if let (Some(height), Some(r4)) = (f1(Condition::HeightPooled), f1(Condition::MitigationR4Norm))
    {
        push(
            "6b",
            "range-r4 mitigation",
            r4 - height >= MITIGATION_MIN_GAIN,
            format!("height pooled {height:.4} -> {r4:.4}, gain {:.4} (need >= {MITIGATION_MIN_GAIN:.2})", r4 - height),
        );
    }
    Ok(lines)
}
