//! CSV and JSON artifacts of harness runs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::ResultRow;
use super::study::{Evolution, LagRow, SummaryRow};
use crate::error::{Error, Result};

fn csv_err(e: csv::Error) -> Error {
    Error::Csv {
        line: 0,
        message: e.to_string(),
    }
}

/// Serialise `rows` as CSV with a header taken from the field names.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file<T: Serialize>(rows: &[T], path: impl AsRef<Path>) -> Result<()> {
    write_csv(rows, BufWriter::new(File::create(path)?))
}

/// Header-only CSV for `ResultRow`, used when a run produced no rows.
const RESULT_HEADER: &str = "fingerprint,model,replicate,seed,lags,nodes,patience,weight_decay,batch_size,learning_rate,dropout_rate,test_mse,test_mae,epochs_run,best_epoch,arima_order,error\n";

pub fn write_results_csv(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    if rows.is_empty() {
        std::fs::write(path, RESULT_HEADER)?;
        return Ok(());
    }
    write_csv_file(rows, path)
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_summary_csv(rows: &[SummaryRow], path: impl AsRef<Path>) -> Result<()> {
    write_csv_file(rows, path)
}

pub fn write_lag_table_csv(rows: &[LagRow], path: impl AsRef<Path>) -> Result<()> {
    write_csv_file(rows, path)
}

/// Wall times, kept apart from the results so those stay reproducible.
pub fn write_timings_csv(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["fingerprint", "wall_time_ms"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([r.fingerprint.clone(), r.wall_time_ms.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format evolution table: `date,target,epoch,prediction,truncated`,
/// plus rows with epoch `final` for the restored parameters.
pub fn write_evolution_csv<W: Write>(evo: &Evolution, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "target", "epoch", "prediction", "truncated"])
        .map_err(csv_err)?;
    for s in &evo.snapshots {
        for ((d, t), p) in evo.dates.iter().zip(&evo.target).zip(&s.predictions) {
            let rec = [
                d.to_string(),
                t.to_string(),
                s.epoch.to_string(),
                p.to_string(),
                s.truncated.to_string(),
            ];
            w.write_record(rec).map_err(csv_err)?;
        }
    }
    for ((d, t), p) in evo
        .dates
        .iter()
        .zip(&evo.target)
        .zip(&evo.final_predictions)
    {
        let rec = [
            d.to_string(),
            t.to_string(),
            "final".to_string(),
            p.to_string(),
            "false".to_string(),
        ];
        w.write_record(rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// What a run did, enough to repeat it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub spec: serde_json::Value,
    pub seeds: Vec<u64>,
    pub cells: usize,
    /// False when the run was interrupted; results then cover a subset.
    pub complete: bool,
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn new(
        command: &str,
        spec: &impl Serialize,
        seeds: Vec<u64>,
        cells: usize,
    ) -> Result<Self> {
        Ok(Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            spec: serde_json::to_value(spec)?,
            seeds,
            cells,
            complete: true,
            artifacts: Vec::new(),
        })
    }
}
