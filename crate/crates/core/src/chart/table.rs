use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::number::{format_value, parse_number};

#[derive(Debug, Error)]
pub enum TableError {
    #[error("table shape mismatch: {rows} row labels x {cols} headers but grid is {grid_rows} x {grid_cols}")]
    Shape {
        rows: usize,
        cols: usize,
        grid_rows: usize,
        grid_cols: usize,
    },
    #[error("non-finite cell at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv line {line}: {message}")]
    CsvContent { line: usize, message: String },
}

/// Fully-structured data table: numeric cells plus their row and column text.
///
/// Rows are categories, columns are series. Cells are optional so ragged
/// multi-series data can be represented.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable")]
pub struct DataTable {
    col_headers: Vec<String>,
    row_labels: Vec<String>,
    cells: Vec<Vec<Option<f64>>>,
}

#[derive(Deserialize)]
struct RawTable {
    col_headers: Vec<String>,
    row_labels: Vec<String>,
    cells: Vec<Vec<Option<f64>>>,
}

impl TryFrom<RawTable> for DataTable {
    type Error = TableError;

    fn try_from(raw: RawTable) -> Result<Self, Self::Error> {
        DataTable::new(raw.col_headers, raw.row_labels, raw.cells)
    }
}

impl DataTable {
    pub fn new(
        col_headers: Vec<String>,
        row_labels: Vec<String>,
        cells: Vec<Vec<Option<f64>>>,
    ) -> Result<Self, TableError> {
        let shape_err = |grid_cols| TableError::Shape {
            rows: row_labels.len(),
            cols: col_headers.len(),
            grid_rows: cells.len(),
            grid_cols,
        };
        if cells.len() != row_labels.len() {
            return Err(shape_err(cells.first().map_or(0, Vec::len)));
        }
        if let Some(bad) = cells.iter().find(|r| r.len() != col_headers.len()) {
            return Err(shape_err(bad.len()));
        }
        for (r, row) in cells.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                if v.is_some_and(|v| !v.is_finite()) {
                    return Err(TableError::NonFinite { row: r, col: c });
                }
            }
        }
        Ok(Self {
            col_headers,
            row_labels,
            cells,
        })
    }

    /// Table with a single value column.
    pub fn single_column(header: &str, rows: Vec<(String, f64)>) -> Self {
        let (labels, values): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        let cells = values.into_iter().map(|v| vec![Some(v)]).collect();
        Self::new(vec![header.to_string()], labels, cells).expect("well-formed single column")
    }

    pub fn empty() -> Self {
        Self {
            col_headers: Vec::new(),
            row_labels: Vec::new(),
            cells: Vec::new(),
        }
    }

    pub fn col_headers(&self) -> &[String] {
        &self.col_headers
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn n_rows(&self) -> usize {
        self.row_labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_headers.len()
    }

    /// Zero-based data coordinates.
    pub fn cell(&self, row: usize, col: usize) -> Option<f64> {
        self.cells.get(row).and_then(|r| r.get(col)).copied().flatten()
    }

    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.cells
    }

    /// A table is simple iff it has exactly one data column.
    pub fn is_simple(&self) -> bool {
        self.col_headers.len() == 1
    }

    /// All non-null values in row-major order.
    pub fn values(&self) -> Vec<f64> {
        self.cells.iter().flatten().filter_map(|v| *v).collect()
    }

    /// Non-null cells in row-major order with zero-based coordinates.
    pub fn numeric_cells(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.cells.iter().enumerate().flat_map(|(r, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(c, v)| v.map(|v| ((r, c), v)))
        })
    }

    pub fn row_index(&self, label: &str) -> Option<usize> {
        self.row_labels.iter().position(|l| l == label)
    }

    pub fn col_index(&self, header: &str) -> Option<usize> {
        self.col_headers.iter().position(|h| h == header)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let mut header = vec![String::new()];
        header.extend(self.col_headers.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (label, row) in self.row_labels.iter().zip(&self.cells) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|v| v.map(format_value).unwrap_or_default()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 output")
    }

    /// Reads the CSV layout written by [`DataTable::to_csv`]: header row with
    /// an empty first cell, then one row per label. Empty cells are null.
    pub fn from_csv(text: &str) -> Result<Self, TableError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut records = reader.records();
        let header = match records.next() {
            Some(rec) => rec?,
            None => return Ok(Self::empty()),
        };
        let col_headers: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut row_labels = Vec::new();
        let mut cells = Vec::new();
        for (i, rec) in records.enumerate() {
            let rec = rec?;
            let line = i + 2;
            if rec.len() != col_headers.len() + 1 {
                return Err(TableError::CsvContent {
                    line,
                    message: format!("expected {} fields, found {}", col_headers.len() + 1, rec.len()),
                });
            }
            row_labels.push(rec[0].to_string());
            let row = rec
                .iter()
                .skip(1)
                .map(|f| {
                    let f = f.trim();
                    if f.is_empty() {
                        Ok(None)
                    } else {
                        parse_number(f).map(Some).map_err(|e| TableError::CsvContent {
                            line,
                            message: e.to_string(),
                        })
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            cells.push(row);
        }
        Self::new(col_headers, row_labels, cells)
    }
}

/// One flattened table token and its `(row, col)` origin. Column headers sit
/// on row 0, row labels on column 0, data cells at `(r + 1, c + 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableToken {
    pub text: String,
    pub row: usize,
    pub col: usize,
}

impl TableToken {
    pub fn is_cell(&self) -> bool {
        self.row > 0 && self.col > 0
    }
}

/// Row-major serialization: headers, then each row's label followed by its
/// non-null cells.
pub fn flatten_table(t: &DataTable) -> Vec<TableToken> {
    let mut out = Vec::with_capacity((t.n_rows() + 1) * (t.n_cols() + 1));
    for (c, h) in t.col_headers.iter().enumerate() {
        out.push(TableToken {
            text: h.clone(),
            row: 0,
            col: c + 1,
        });
    }
    for (r, (label, row)) in t.row_labels.iter().zip(&t.cells).enumerate() {
        out.push(TableToken {
            text: label.clone(),
            row: r + 1,
            col: 0,
        });
        for (c, v) in row.iter().enumerate() {
            if let Some(v) = v {
                out.push(TableToken {
                    text: format_value(*v),
                    row: r + 1,
                    col: c + 1,
                });
            }
        }
    }
    out
}

/// Inverse of [`flatten_table`] on cell tokens: rebuilds the value grid of
/// the given shape from token coordinates.
pub fn regroup_cells(tokens: &[TableToken], rows: usize, cols: usize) -> Vec<Vec<Option<f64>>> {
    let by_coord: BTreeMap<(usize, usize), f64> = tokens
        .iter()
        .filter(|t| t.is_cell())
        .filter_map(|t| parse_number(&t.text).ok().map(|v| ((t.row, t.col), v)))
        .collect();
    (1..=rows)
        .map(|r| (1..=cols).map(|c| by_coord.get(&(r, c)).copied()).collect())
        .collect()
}
