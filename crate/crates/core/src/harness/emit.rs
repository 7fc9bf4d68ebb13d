use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::spec::{Cell, ExperimentReport};
use crate::error::{Error, Result};
use crate::field::write_csv;

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

/// Writes `{stem}.csv` (cells in long format), `{stem}.json` (the whole
/// report) and `{stem}_{field}.csv` per solver field into `dir`.
pub fn emit(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let stem = report.stem();
    let mut written = Vec::new();

    let path = dir.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    for c in &report.cells {
        w.serialize(c).map_err(csv_err)?;
    }
    w.flush()?;
    written.push(path);

    let path = dir.join(format!("{stem}.json"));
    serde_json::to_writer_pretty(BufWriter::new(File::create(&path)?), report)?;
    written.push(path);

    for f in &report.fields {
        let path = dir.join(format!("{stem}_{}.csv", f.name));
        write_csv(&f.field, BufWriter::new(File::create(&path)?))?;
        written.push(path);
    }
    Ok(written)
}

pub fn read_cells(path: &Path) -> Result<Vec<Cell>> {
    csv::Reader::from_path(path)
        .map_err(csv_err)?
        .deserialize()
        .map(|r| r.map_err(csv_err))
        .collect()
}

pub fn read_report(path: &Path) -> Result<ExperimentReport> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
