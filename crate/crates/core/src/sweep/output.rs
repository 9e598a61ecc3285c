use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{ResultRow, TrialRecord};
use crate::error::{Error, Result};

/// Exact header of the summary CSV.
pub const SUMMARY_HEADER: &str =
    "algorithm,sweep_kind,sweep_value,iteration,trials,ser_mean,ser_stderr,iters_mean,flops_mean";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: path.to_path_buf(),
                source,
            },
            _ => unreachable!(),
        }
    } else {
        Error::Csv(e)
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(io_err(path))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .map(|r| r.map_err(|e| csv_err(path, e)))
        .collect()
}

/// Writes summary rows under [`SUMMARY_HEADER`]. An empty row set still
/// gets the header.
pub fn write_summary(path: &Path, rows: &[ResultRow]) -> Result<()> {
    if rows.is_empty() {
        let mut f = File::create(path).map_err(io_err(path))?;
        return writeln!(f, "{SUMMARY_HEADER}").map_err(io_err(path));
    }
    write_rows(path, rows)
}

pub fn read_summary(path: &Path) -> Result<Vec<ResultRow>> {
    read_rows(path)
}

/// Per-trial records; shortest round-trip float formatting keeps them
/// loss-free.
pub fn write_raw(path: &Path, records: &[TrialRecord]) -> Result<()> {
    write_rows(path, records)
}

pub fn read_raw(path: &Path) -> Result<Vec<TrialRecord>> {
    read_rows(path)
}
