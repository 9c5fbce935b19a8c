use std::io::Write;

use serde::Serialize;

use super::experiments::{DiscardPoint, FlipReport, RepetitionSweep};
use super::metrics::FidelityReport;
use crate::error::Result;

/// One flat CSV row per run of a method at a point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub experiment: String,
    pub method: &'static str,
    pub seed: Option<u64>,
    pub repetitions: usize,
    pub a_perp: f64,
    pub k_ion: f64,
    pub discard_ratio: f64,
    pub f: f64,
    pub f_bright: f64,
    pub f_dark: f64,
    pub n_test: usize,
    pub dataset_hash: String,
}

pub const CSV_HEADER: &str = "experiment,method,seed,repetitions,a_perp,k_ion,discard_ratio,f,f_bright,f_dark,n_test,dataset_hash";

pub fn rows(experiment: &str, report: &FidelityReport) -> Vec<ReportRow> {
    let c = report.coordinates;
    report
        .runs
        .iter()
        .map(|r| ReportRow {
            experiment: experiment.to_string(),
            method: report.method.as_str(),
            seed: r.seed,
            repetitions: c.repetitions,
            a_perp: c.a_perp,
            k_ion: c.k_ion,
            discard_ratio: r.discard_ratio,
            f: r.f,
            f_bright: r.f_bright,
            f_dark: r.f_dark,
            n_test: report.n_test,
            dataset_hash: report.dataset_hash.clone(),
        })
        .collect()
}

pub fn write_rows_csv<W: Write>(mut w: W, rows: &[ReportRow]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        let seed = r.seed.map(|s| s.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.experiment, r.method, seed, r.repetitions, r.a_perp, r.k_ion, r.discard_ratio, r.f, r.f_bright, r.f_dark, r.n_test, r.dataset_hash
        )?;
    }
    Ok(())
}

/// Fidelity against N: `repetitions,tm_f,ml_f,ml_std` (ML columns empty where not trained).
pub fn write_repetition_series<W: Write>(mut w: W, sweep: &RepetitionSweep) -> Result<()> {
    writeln!(w, "repetitions,tm_f,tm_f_bright,tm_f_dark,ml_f,ml_f_std")?;
    for p in &sweep.points {
        let (ml, ml_std) = match &p.ml {
            Some(r) => (r.f.to_string(), r.f_std.to_string()),
            None => (String::new(), String::new()),
        };
        writeln!(w, "{},{},{},{},{},{}", p.repetitions, p.tm.f, p.tm.f_bright, p.tm.f_dark, ml, ml_std)?;
    }
    Ok(())
}

/// Kept-set fidelity against realized discard ratio for both methods.
pub fn write_discard_series<W: Write>(mut w: W, points: &[DiscardPoint]) -> Result<()> {
    writeln!(w, "target_ratio,tm_ratio,tm_f,ml_ratio,ml_f,ml_f_std")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            p.target_ratio, p.tm.coordinates.discard_ratio, p.tm.f, p.ml.coordinates.discard_ratio, p.ml.f, p.ml.f_std
        )?;
    }
    Ok(())
}

/// First-flip repetition histogram split by network correctness.
pub fn write_flip_histogram<W: Write>(mut w: W, report: &FlipReport) -> Result<()> {
    writeln!(w, "start,end,ml_correct,ml_wrong")?;
    for b in &report.histogram {
        writeln!(w, "{},{},{},{}", b.start, b.end, b.ml_correct, b.ml_wrong)?;
    }
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}
