//! Evaluation reports and their on-disk artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::class_name;
use crate::radar::NUM_CLASSES;

use super::metrics::{
    confidence_histogram, confusion_matrix, macro_f1, per_class_scores, ClassScores,
    ConfidenceHistogram, ConfusionMatrix, PredictionRecord,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub condition: String,
    pub n: u64,
    pub confusion: ConfusionMatrix,
    pub per_class: [ClassScores; NUM_CLASSES],
    pub macro_f1: f64,
    pub confidence_bins: ConfidenceHistogram,
    /// Mean maximum softmax probability.
    pub mean_confidence: f64,
    pub fingerprint: String,
}

impl EvalReport {
    pub fn from_records(
        condition: &str,
        records: &[PredictionRecord],
        fingerprint: &str,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyInput("evaluation records"));
        }
        let preds: Vec<usize> = records.iter().map(|r| r.predicted).collect();
        let labels: Vec<usize> = records.iter().map(|r| r.label).collect();
        let confusion = confusion_matrix(&preds, &labels)?;
        Ok(Self {
            condition: condition.to_string(),
            n: records.len() as u64,
            per_class: per_class_scores(&confusion),
            macro_f1: macro_f1(&confusion),
            confusion,
            confidence_bins: confidence_histogram(records)?,
            mean_confidence: records.iter().map(|r| r.confidence).sum::<f64>()
                / records.len() as f64,
            fingerprint: fingerprint.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Errors unless every report carries the same fingerprint.
pub fn check_fingerprints(reports: &[EvalReport]) -> Result<()> {
    let Some(first) = reports.first() else {
        return Err(Error::EmptyInput("reports"));
    };
    match reports.iter().find(|r| r.fingerprint != first.fingerprint) {
        Some(r) => Err(Error::FingerprintMismatch(
            first.fingerprint.clone(),
            r.fingerprint.clone(),
        )),
        None => Ok(()),
    }
}

pub fn confusion_csv(report: &EvalReport) -> String {
    let mut s = String::from("true\\predicted");
    for c in 0..NUM_CLASSES {
        s.push(',');
        s.push_str(class_name(c));
    }
    s.push('\n');
    for (t, row) in report.confusion.counts.iter().enumerate() {
        s.push_str(class_name(t));
        for v in row {
            write!(s, ",{v}").unwrap();
        }
        s.push('\n');
    }
    s
}

const FONT: &str = "font-family=\"sans-serif\"";

pub fn confusion_svg(report: &EvalReport) -> String {
    let cell = 60;
    let left = 100;
    let top = 60;
    let size = cell * NUM_CLASSES;
    let (w, h) = (left + size + 20, top + size + 60);
    let mut s = String::new();
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    )
    .unwrap();
    writeln!(s, "<!-- fingerprint {} -->", report.fingerprint).unwrap();
    writeln!(
        s,
        "<text x=\"{}\" y=\"24\" {FONT} font-size=\"16\" text-anchor=\"middle\">{} (macro-F1 {:.4})</text>",
        w / 2,
        report.condition,
        report.macro_f1
    )
    .unwrap();
    for c in 0..NUM_CLASSES {
        writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"11\" text-anchor=\"middle\">{}</text>",
            left + c * cell + cell / 2,
            top - 8,
            class_name(c)
        )
        .unwrap();
        writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"11\" text-anchor=\"end\">{}</text>",
            left - 8,
            top + c * cell + cell / 2 + 4,
            class_name(c)
        )
        .unwrap();
    }
    for (t, row) in report.confusion.counts.iter().enumerate() {
        let support = row.iter().sum::<u64>().max(1) as f64;
        for (p, &v) in row.iter().enumerate() {
            let frac = v as f64 / support;
            let shade = (255.0 * (1.0 - frac)).round() as u8;
            let ink = if frac > 0.5 { "#ffffff" } else { "#000000" };
            let (x, y) = (left + p * cell, top + t * cell);
            writeln!(
                s,
                "<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({shade},{shade},255)\" stroke=\"#808080\"/>"
            )
            .unwrap();
            writeln!(
                s,
                "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"14\" text-anchor=\"middle\" fill=\"{ink}\">{v}</text>",
                x + cell / 2,
                y + cell / 2 + 5
            )
            .unwrap();
        }
    }
    writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"12\" text-anchor=\"middle\">predicted (rows: true class)</text>",
        left + size / 2,
        top + size + 30
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

pub fn confidence_svg(report: &EvalReport) -> String {
    let h = &report.confidence_bins;
    let bins = h.correct.len();
    let (plot_w, plot_h) = (400usize, 200usize);
    let (left, top) = (50usize, 40usize);
    let (w, ht) = (left + plot_w + 20, top + plot_h + 60);
    let peak = h
        .correct
        .iter()
        .chain(&h.incorrect)
        .copied()
        .max()
        .unwrap_or(0)
        .max(1) as f64;
    let bar = plot_w / bins;
    let mut s = String::new();
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{ht}\" viewBox=\"0 0 {w} {ht}\">"
    )
    .unwrap();
    writeln!(s, "<!-- fingerprint {} -->", report.fingerprint).unwrap();
    writeln!(
        s,
        "<text x=\"{}\" y=\"22\" {FONT} font-size=\"14\" text-anchor=\"middle\">{}: max softmax probability</text>",
        w / 2,
        report.condition
    )
    .unwrap();
    let baseline = top + plot_h;
    for i in 0..bins {
        for (series, color, offset) in [
            (&h.correct, "#2a7ab9", 0),
            (&h.incorrect, "#d9482b", bar / 2),
        ] {
            let height = (series[i] as f64 / peak * plot_h as f64).round() as usize;
            writeln!(
                s,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{height}\" fill=\"{color}\"><title>{}</title></rect>",
                left + i * bar + offset,
                baseline - height,
                bar / 2,
                series[i]
            )
            .unwrap();
        }
    }
    writeln!(
        s,
        "<line x1=\"{left}\" y1=\"{baseline}\" x2=\"{}\" y2=\"{baseline}\" stroke=\"#000000\"/>",
        left + plot_w
    )
    .unwrap();
    for (i, edge) in h.edges.iter().enumerate().step_by(4) {
        writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"10\" text-anchor=\"middle\">{edge:.1}</text>",
            left + i * bar,
            baseline + 14
        )
        .unwrap();
    }
    writeln!(
        s,
        "<rect x=\"{left}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"#2a7ab9\"/><text x=\"{}\" y=\"{}\" {FONT} font-size=\"11\">correct</text>",
        baseline + 30,
        left + 14,
        baseline + 39
    )
    .unwrap();
    writeln!(
        s,
        "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"#d9482b\"/><text x=\"{}\" y=\"{}\" {FONT} font-size=\"11\">incorrect</text>",
        left + 90,
        baseline + 30,
        left + 104,
        baseline + 39
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

pub fn summary_csv(reports: &[EvalReport]) -> String {
    let mut s = String::from("condition,macro_f1,n,fingerprint\n");
    for r in reports {
        writeln!(
            s,
            "{},{:.6},{},{}",
            r.condition, r.macro_f1, r.n, r.fingerprint
        )
        .unwrap();
    }
    s
}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes four files per report plus `summary.csv`; returns every path
/// written. Output bytes depend only on the reports.
pub fn render_report(reports: &[EvalReport], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if reports.is_empty() {
        return Err(Error::EmptyInput("reports"));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for r in reports {
        let base = &r.condition;
        written.push(write(
            out_dir.join(format!("{base}.report.json")),
            &r.to_json(),
        )?);
        written.push(write(
            out_dir.join(format!("{base}.confusion.csv")),
            &confusion_csv(r),
        )?);
        written.push(write(
            out_dir.join(format!("{base}.confusion.svg")),
            &confusion_svg(r),
        )?);
        written.push(write(
            out_dir.join(format!("{base}.confidence.svg")),
            &confidence_svg(r),
        )?);
    }
    written.push(write(out_dir.join("summary.csv"), &summary_csv(reports))?);
    Ok(written)
}
