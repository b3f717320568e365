//! CSV ingestion and export.
//!
//! The schema is a header row `date,rain,evap` with an optional trailing
//! `level` column, ISO-8601 dates and one row per day. February 29 rows are
//! dropped (series live on the 365-day calendar); any other gap is an error.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use super::{calendar, Dataset, TimeSeries};
use crate::error::{Error, Result};

pub const HEADER_CONTRACT: &str = "expected header `date,rain,evap` or `date,rain,evap,level`";

pub fn read_dataset_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_dataset_csv_from(file)
}

pub fn read_dataset_csv_from<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    let valid = matches!(
        names.as_slice(),
        ["date", "rain", "evap"] | ["date", "rain", "evap", "level"]
    );
    if !valid {
        return Err(Error::Csv {
            line: 1,
            message: format!("{HEADER_CONTRACT}, found `{}`", names.join(",")),
        });
    }
    let value_names: Vec<String> = names[1..].iter().map(|s| s.to_string()).collect();

    let mut t0: Option<NaiveDate> = None;
    let mut prev: Option<NaiveDate> = None;
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); value_names.len()];
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Csv {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d").map_err(|e| Error::Csv {
            line,
            message: format!("bad date `{}`: {e}", &record[0]),
        })?;
        if calendar::is_leap_day(date) {
            continue;
        }
        if let Some(p) = prev {
            let expected = calendar::add_days(p, 1)?;
            if date != expected {
                return Err(Error::Csv {
                    line,
                    message: format!("date {date} breaks the daily sequence (expected {expected})"),
                });
            }
        }
        for (j, name) in value_names.iter().enumerate() {
            let cell = &record[j + 1];
            let v: f64 = cell.parse().map_err(|_| Error::Csv {
                line,
                message: format!("column `{name}` holds non-numeric value `{cell}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Csv {
                    line,
                    message: format!("column `{name}` is not finite"),
                });
            }
            columns[j].push(v);
        }
        t0.get_or_insert(date);
        prev = Some(date);
    }
    let t0 = t0.ok_or(Error::Csv {
        line: 2,
        message: "no data rows".into(),
    })?;
    let series = value_names
        .into_iter()
        .zip(columns)
        .map(|(name, values)| TimeSeries::new(name, t0, values))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(series)
}

pub fn write_dataset_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_dataset_csv_to(dataset, std::io::BufWriter::new(file))
}

/// Writes `date` followed by every column in dataset order.
pub fn write_dataset_csv_to<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string()];
    header.extend(dataset.column_names().iter().map(|s| s.to_string()));
    w.write_record(&header).map_err(csv_write_err)?;
    let first = &dataset.columns()[0];
    for i in 0..dataset.len() {
        let mut row = vec![first.date(i).format("%Y-%m-%d").to_string()];
        row.extend(dataset.columns().iter().map(|c| c.values()[i].to_string()));
        w.write_record(&row).map_err(csv_write_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_write_err(e: csv::Error) -> Error {
    Error::Csv {
        line: 0,
        message: e.to_string(),
    }
}
