//! Labeled CSV matrices.
//!
//! Files have a header row of column ids and a first column of row labels.
//! Inside the library a data matrix always has variables in rows and
//! individuals in columns; [`Orientation::IndividualsInRows`] transposes on
//! the way in.

use std::collections::HashSet;
use std::fs;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    #[default]
    IndividualsInColumns,
    IndividualsInRows,
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "columns" => Ok(Orientation::IndividualsInColumns),
            "rows" => Ok(Orientation::IndividualsInRows),
            other => Err(Error::InvalidConfig(format!("unknown orientation '{other}'"))),
        }
    }
}

/// A matrix with row labels and column ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub matrix: Matrix,
}

impl LabeledMatrix {
    pub fn new(row_labels: Vec<String>, col_labels: Vec<String>, matrix: Matrix) -> Result<Self> {
        if row_labels.len() != matrix.rows() || col_labels.len() != matrix.cols() {
            return Err(Error::Dimension {
                op: "labeled_matrix",
                left: (row_labels.len(), col_labels.len()),
                right: matrix.shape(),
            });
        }
        Ok(Self {
            row_labels,
            col_labels,
            matrix,
        })
    }

    pub fn transpose(&self) -> Self {
        Self {
            row_labels: self.col_labels.clone(),
            col_labels: self.row_labels.clone(),
            matrix: self.matrix.transpose(),
        }
    }

    /// Reorders columns to follow `ids`. Fails unless the id sets match.
    pub fn align_columns(&self, ids: &[String], path: &str) -> Result<Self> {
        let mismatch = || Error::Ingest {
            path: path.to_string(),
            message: "column ids do not match the observation matrix".into(),
        };
        if ids.len() != self.col_labels.len() {
            return Err(mismatch());
        }
        let order = ids
            .iter()
            .map(|id| self.col_labels.iter().position(|c| c == id).ok_or_else(mismatch))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            row_labels: self.row_labels.clone(),
            col_labels: ids.to_vec(),
            matrix: self.matrix.select_cols(&order)?,
        })
    }

    /// Names the first negative cell by its labels.
    pub fn check_nonnegative(&self, path: &str) -> Result<()> {
        match self.matrix.check_nonnegative() {
            Err(Error::Negative { row, col, value }) => Err(Error::Ingest {
                path: path.to_string(),
                message: format!(
                    "negative value {value} at row '{}', column '{}' (use --min-shift)",
                    self.row_labels[row], self.col_labels[col]
                ),
            }),
            other => other,
        }
    }
}

fn ingest_error(path: &str, message: impl Into<String>) -> Error {
    Error::Ingest {
        path: path.to_string(),
        message: message.into(),
    }
}

fn check_unique(labels: &[String], what: &str, path: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(ingest_error(path, format!("duplicate {what} '{l}'")));
        }
    }
    Ok(())
}

/// Parses labeled CSV text. `path` is only used in error messages.
pub fn parse_csv<R: Read>(input: R, path: &str, orientation: Orientation) -> Result<LabeledMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(ingest_error(path, "file is empty")),
        Some(r) => r.map_err(|e| ingest_error(path, e.to_string()))?,
    };
    let col_labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if col_labels.is_empty() {
        return Err(ingest_error(path, "header has no data columns"));
    }
    let mut row_labels = Vec::new();
    let mut data = Vec::new();
    for (i, record) in records.enumerate() {
        let record = record.map_err(|e| ingest_error(path, e.to_string()))?;
        let line = i + 2;
        if record.len() != header.len() {
            return Err(ingest_error(
                path,
                format!("line {line} has {} fields, expected {}", record.len(), header.len()),
            ));
        }
        row_labels.push(record[0].to_string());
        for (j, cell) in record.iter().enumerate().skip(1) {
            let v: f64 = cell.parse().map_err(|_| {
                ingest_error(path, format!("non-numeric cell '{cell}' at line {line}, column {}", j + 1))
            })?;
            if !v.is_finite() {
                return Err(ingest_error(path, format!("non-finite cell at line {line}, column {}", j + 1)));
            }
            data.push(v);
        }
    }
    if row_labels.is_empty() {
        return Err(ingest_error(path, "no data rows"));
    }
    check_unique(&col_labels, "column id", path)?;
    check_unique(&row_labels, "row label", path)?;
    let matrix = Matrix::new(row_labels.len(), col_labels.len(), data)?;
    let m = LabeledMatrix::new(row_labels, col_labels, matrix)?;
    Ok(match orientation {
        Orientation::IndividualsInColumns => m,
        Orientation::IndividualsInRows => m.transpose(),
    })
}

pub fn read_csv(path: &Path, orientation: Orientation) -> Result<LabeledMatrix> {
    let name = path.display().to_string();
    let file = fs::File::open(path).map_err(|e| ingest_error(&name, e.to_string()))?;
    parse_csv(file, &name, orientation)
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Serializes with a `corner` header cell above the row labels.
pub fn to_csv_string(m: &LabeledMatrix, corner: &str) -> String {
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    let header = std::iter::once(corner.to_string()).chain(m.col_labels.iter().cloned());
    writer.write_record(header).expect("in-memory write");
    for (i, label) in m.row_labels.iter().enumerate() {
        let row = std::iter::once(label.clone()).chain(m.matrix.row(i).iter().map(|&v| format_f64(v)));
        writer.write_record(row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("labels are utf-8")
}

pub fn write_csv(path: &Path, m: &LabeledMatrix, corner: &str) -> std::io::Result<()> {
    fs::write(path, to_csv_string(m, corner))
}
