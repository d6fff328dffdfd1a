//! CSV and JSON emission.

use std::io::Write;

use super::config::ExperimentConfig;
use super::metrics::MetricRecord;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 5] = ["metric", "point_db", "estimate", "stderr", "trials"];

/// Writes records as CSV with the header `metric,point_db,estimate,stderr,trials`.
pub fn write_csv<W: Write>(records: &[MetricRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        w.write_record([
            r.metric.clone(),
            r.point_db.to_string(),
            r.estimate.to_string(),
            r.stderr.to_string(),
            r.trials.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(records: &[MetricRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(records, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Io(std::io::Error::other(e)))
}

/// JSON echo of the resolved experiments.
pub fn sidecar_json(cfgs: &[ExperimentConfig]) -> Result<String> {
    Ok(serde_json::to_string_pretty(&serde_json::json!({ "experiments": cfgs }))?)
}
