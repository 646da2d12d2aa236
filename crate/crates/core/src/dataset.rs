//! Columnar data container with CSV ingestion/emission and treatment-column
//! validation.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named, equal-length numeric columns in insertion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ColumnTable {
    columns: IndexMap<String, Vec<f64>>,
    n_rows: usize,
}

impl ColumnTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_columns<I, S>(columns: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut table = Self::new();
        for (name, values) in columns {
            table.push_column(name, values)?;
        }
        Ok(table)
    }

    /// Appends a column. The first column fixes the row count.
    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::EmptyColumnName);
        }
        if self.columns.contains_key(&name) {
            return Err(Error::DuplicateLabel(name));
        }
        if self.columns.is_empty() {
            self.n_rows = values.len();
        } else if values.len() != self.n_rows {
            return Err(Error::DimensionMismatch {
                what: format!("column `{name}`"),
                expected: self.n_rows,
                found: values.len(),
            });
        }
        self.columns.insert(name, values);
        Ok(())
    }

    /// Replaces an existing column's values, or appends a new column.
    pub fn set_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        match self.columns.get_mut(&name) {
            Some(col) => {
                if values.len() != self.n_rows {
                    return Err(Error::DimensionMismatch {
                        what: format!("column `{name}`"),
                        expected: self.n_rows,
                        found: values.len(),
                    });
                }
                *col = values;
                Ok(())
            }
            None => self.push_column(name, values),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.columns.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// New table whose row `i` is row `rows[i]` of `self`; indices may repeat.
    pub fn select_rows(&self, rows: &[usize]) -> ColumnTable {
        let columns = self
            .columns
            .iter()
            .map(|(k, v)| (k.clone(), rows.iter().map(|&r| v[r]).collect()))
            .collect();
        ColumnTable {
            columns,
            n_rows: rows.len(),
        }
    }

    /// Copy of the table with `f` applied to every value of one column.
    pub fn map_column(&self, name: &str, f: impl Fn(f64) -> f64) -> Result<ColumnTable> {
        let mut out = self.clone();
        let col = out
            .columns
            .get_mut(name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        col.iter_mut().for_each(|v| *v = f(*v));
        Ok(out)
    }

    pub fn read_csv(path: impl AsRef<Path>, schema: Option<&[&str]>) -> Result<Self> {
        Self::read_csv_from(File::open(path)?, schema)
    }

    pub fn read_csv_from<R: Read>(reader: R, schema: Option<&[&str]>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
            return Err(Error::EmptyFile);
        }
        if let Some(expected) = schema {
            let missing: Vec<String> = expected
                .iter()
                .filter(|e| !header.iter().any(|h| h == *e))
                .map(|e| e.to_string())
                .collect();
            let extra: Vec<String> = header
                .iter()
                .filter(|h| !expected.contains(&h.as_str()))
                .cloned()
                .collect();
            if !missing.is_empty() || !extra.is_empty() {
                return Err(Error::SchemaMismatch { missing, extra });
            }
        }

        let mut values: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let row = i + 1;
            if record.len() != header.len() {
                return Err(Error::RaggedRow {
                    row,
                    expected: header.len(),
                    found: record.len(),
                });
            }
            for (j, cell) in record.iter().enumerate() {
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => values[j].push(v),
                    _ => {
                        return Err(Error::NonNumeric {
                            row,
                            column: header[j].clone(),
                            value: cell.to_string(),
                        })
                    }
                }
            }
        }
        if values[0].is_empty() {
            return Err(Error::EmptyFile);
        }
        Self::from_columns(header.into_iter().zip(values))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path)?;
        self.write_csv_to(std::io::BufWriter::new(file))
    }

    /// Writes the table with `\n` line endings. Values use Rust's shortest
    /// round-trip formatting, so reading the output back is bit-exact.
    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        wtr.write_record(self.columns.keys())?;
        let mut buf = Vec::with_capacity(self.columns.len());
        for i in 0..self.n_rows {
            buf.clear();
            buf.extend(self.columns.values().map(|c| c[i].to_string()));
            wtr.write_record(&buf)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = Vec::new();
        self.write_csv_to(&mut out)
            .expect("writing to memory cannot fail");
        String::from_utf8(out).expect("csv output is utf-8")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TreatmentKind {
    #[default]
    Binary,
    Continuous,
}

/// The specific check a treatment column failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TreatmentDiagnostic {
    NonBinary { row: usize, value: f64 },
    NoTreated,
    NoUntreated,
    ZeroVariance,
}

impl fmt::Display for TreatmentDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonBinary { row, value } => {
                write!(f, "non-binary values (row {row} has {value})")
            }
            Self::NoTreated => f.write_str("no treated units"),
            Self::NoUntreated => f.write_str("no untreated units"),
            Self::ZeroVariance => f.write_str("zero variance"),
        }
    }
}

/// Checks the positivity-style preconditions on a treatment column: binary
/// columns must be 0/1 with both levels present, continuous columns must vary.
pub fn validate_treatment_column(
    table: &ColumnTable,
    name: &str,
    kind: TreatmentKind,
) -> Result<()> {
    let col = table.column(name)?;
    let fail = |diagnostic| {
        Err(Error::Treatment {
            column: name.to_string(),
            diagnostic,
        })
    };
    match kind {
        TreatmentKind::Binary => {
            if let Some((i, &v)) = col
                .iter()
                .enumerate()
                .find(|(_, v)| **v != 0.0 && **v != 1.0)
            {
                return fail(TreatmentDiagnostic::NonBinary {
                    row: i + 1,
                    value: v,
                });
            }
            if !col.contains(&1.0) {
                return fail(TreatmentDiagnostic::NoTreated);
            }
            if !col.contains(&0.0) {
                return fail(TreatmentDiagnostic::NoUntreated);
            }
        }
        TreatmentKind::Continuous => {
            let first = col.first().copied();
            if col.iter().all(|&v| Some(v) == first) {
                return fail(TreatmentDiagnostic::ZeroVariance);
            }
        }
    }
    Ok(())
}
