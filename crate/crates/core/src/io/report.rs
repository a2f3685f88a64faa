//! CSV outputs: training curve and evaluation metrics.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::trainer::{CurveRecord, MetricsReport};

/// `step,K_e,loss`, one row per optimizer step.
pub fn write_curve<T: Real, W: Write>(curve: &[CurveRecord<T>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "K_e", "loss"])?;
    for r in curve {
        w.write_record([r.step.to_string(), r.horizon.to_string(), r.loss.as_f64().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve(path: &Path) -> Result<Vec<CurveRecord<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["step", "K_e", "loss"] {
        return Err(Error::Malformed(format!("unexpected curve header {headers:?}")));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or_default();
            let bad = || Error::Malformed(format!("bad curve row {rec:?}"));
            Ok(CurveRecord {
                step: field(0).parse().map_err(|_| bad())?,
                horizon: field(1).parse().map_err(|_| bad())?,
                loss: field(2).parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// `traj_id,loss,epos,frechet,ncomp` per test trajectory plus a `mean` row.
pub fn write_metrics<T: Real, W: Write>(report: &MetricsReport<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["traj_id", "loss", "epos", "frechet", "ncomp"])?;
    for (l, m) in report.per_trajectory.iter().enumerate() {
        w.write_record([
            l.to_string(),
            m.loss.as_f64().to_string(),
            m.position_error.as_f64().to_string(),
            m.frechet.as_f64().to_string(),
            m.completed.to_string(),
        ])?;
    }
    let mean = &report.mean;
    w.write_record([
        "mean".to_string(),
        mean.loss.as_f64().to_string(),
        mean.position_error.as_f64().to_string(),
        mean.frechet.as_f64().to_string(),
        mean.completed.as_f64().to_string(),
    ])?;
    w.flush()?;
    Ok(())
}
