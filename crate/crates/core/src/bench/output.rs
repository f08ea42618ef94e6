//! CSV and JSON artifacts. Floats are written with shortest round-trip
//! formatting so identical runs produce identical bytes.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use super::{ExperimentManifest, Method};
use crate::data::Dataset;
use crate::metrics::{MeanStd, MetricReport};
use crate::train::CvReport;
use crate::{Error, Result};

pub const ARTIFACT_MANIFEST: &str = "manifest.json";
pub const ARTIFACT_METRICS: &str = "metrics.csv";
pub const ARTIFACT_PREDICTIONS: &str = "predictions.csv";
pub const ARTIFACT_PLOT: &str = "plotdata.csv";
pub const ARTIFACT_LAMBDA: &str = "lambda_trace.csv";

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

fn done(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub(super) fn write_manifest(m: &ExperimentManifest, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(f), m)?;
    Ok(())
}

/// Per-fold rows followed by `mean` and `std` rows for every labelled report.
pub(super) fn write_metrics(path: &Path, label: &str, reports: &[(String, MetricReport, Vec<usize>)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([label, "fold", "repetition", "mse", "rmse", "mpiw", "picp", "pi_delta"])?;
    for (name, report, reps) in reports {
        for (i, f) in report.folds.iter().enumerate() {
            w.write_record([
                name.clone(),
                i.to_string(),
                reps.get(i).map(|r| r.to_string()).unwrap_or_default(),
                f.mse.to_string(),
                f.rmse.to_string(),
                f.mpiw.to_string(),
                f.picp.to_string(),
                opt(f.pi_delta),
            ])?;
        }
        let agg = |tag: &str, pick: fn(&MeanStd) -> f64| {
            vec![
                name.clone(),
                tag.to_string(),
                String::new(),
                pick(&report.mse).to_string(),
                pick(&report.rmse).to_string(),
                pick(&report.mpiw).to_string(),
                pick(&report.picp).to_string(),
                opt(report.pi_delta.as_ref().map(pick)),
            ]
        };
        w.write_record(agg("mean", |m| m.mean))?;
        w.write_record(agg("std", |m| m.std))?;
    }
    done(w, path)
}

/// Validation predictions of every fold, in original units.
pub(super) fn write_predictions(path: &Path, cvs: &[(Method, &CvReport)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["method", "fold", "sample_id", "y_true", "y_bar", "y_l", "y_u"])?;
    for (m, cv) in cvs {
        for f in &cv.folds {
            let p = &f.predictions;
            for (i, &row) in f.validation_rows.iter().enumerate() {
                w.write_record([
                    m.name(),
                    f.fold_index.to_string(),
                    row.to_string(),
                    f.y_true[i].to_string(),
                    p.y_bar[i].to_string(),
                    p.y_lower[i].to_string(),
                    p.y_upper[i].to_string(),
                ])?;
            }
        }
    }
    done(w, path)
}

/// The first validation fold sorted by the first feature, with ideal bounds
/// when the data has them: everything needed to draw intervals against `x`.
pub(super) fn write_plotdata(path: &Path, data: &Dataset, cvs: &[(Method, &CvReport)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["method", "x", "y", "y_bar", "y_l", "y_u", "ideal_l", "ideal_u"])?;
    for (m, cv) in cvs {
        let Some(f) = cv.folds.first() else { continue };
        let mut order: Vec<usize> = (0..f.validation_rows.len()).collect();
        let x = |i: usize| data.features[[f.validation_rows[i], 0]];
        order.sort_by(|&a, &b| x(a).total_cmp(&x(b)));
        for i in order {
            let row = f.validation_rows[i];
            let ideal = data.ideal_bounds.as_ref();
            w.write_record([
                m.name(),
                x(i).to_string(),
                f.y_true[i].to_string(),
                f.predictions.y_bar[i].to_string(),
                f.predictions.y_lower[i].to_string(),
                f.predictions.y_upper[i].to_string(),
                opt(ideal.map(|b| b.lower[row])),
                opt(ideal.map(|b| b.upper[row])),
            ])?;
        }
    }
    done(w, path)
}

/// Per-epoch training history; λ columns are empty for methods without λ.
pub(super) fn write_lambda_trace(path: &Path, cvs: &[(Method, &CvReport)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["method", "fold", "epoch", "picp_train", "cost", "lambda", "picp_val", "mpiw_val"])?;
    for (m, cv) in cvs {
        for f in &cv.folds {
            let entries = f.lambda_trace.as_ref().map(|t| &t.entries);
            for (i, r) in f.records.iter().enumerate() {
                let e = entries.map(|e| e[i]);
                w.write_record([
                    m.name(),
                    f.fold_index.to_string(),
                    r.epoch.to_string(),
                    opt(e.map(|e| e.picp_train)),
                    opt(e.map(|e| e.cost)),
                    opt(e.map(|e| e.lambda)),
                    r.picp_val.to_string(),
                    r.mpiw_val.to_string(),
                ])?;
            }
        }
    }
    done(w, path)
}
