//! Parsing, validation and scoring of assessment data files.
//!
//! Every table produced here is immutable after construction. CSV input is
//! UTF-8, comma-delimited, with a header row; response files carry the
//! examinee id in the first column.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed CSV: {0}")]
    MalformedCsv(String),
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("cell `{value}` at row {row}, column `{column}` is not 0 or 1")]
    MalformedCell { row: usize, column: String, value: String },
    #[error("item `{0}` is not in the item bank")]
    UnknownItem(String),
    #[error("raw responses require an answer key")]
    MissingKey,
    #[error("response matrix is empty or has fewer than 2 items")]
    EmptyMatrix,
    #[error("{incomplete_rows} incomplete row(s); first missing cell at row {row}, column `{column}`")]
    MissingCell { row: usize, column: String, incomplete_rows: usize },
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow { row: usize, found: usize, expected: usize },
    #[error("non-numeric cell `{value}` at row {row}, column `{column}`")]
    NonNumeric { row: usize, column: String, value: String },
    #[error("non-finite value at row {row}, column `{column}`")]
    NonFinite { row: usize, column: String },
    #[error("score table needs at least 3 rows, found {0}")]
    TooFewRows(usize),
    #[error("column has zero variance")]
    DegenerateColumn,
    #[error("invalid item bank: {0}")]
    InvalidBank(String),
    #[error("likert cell {value} at ({row}, {col}) outside [{lo}, {hi}]")]
    LikertOutOfRange { row: usize, col: usize, value: i64, lo: i64, hi: i64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// N×J dichotomous scored responses, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseMatrix {
    examinee_ids: Vec<String>,
    item_ids: Vec<String>,
    cells: Vec<u8>,
}

impl ResponseMatrix {
    /// Builds a matrix from row-major cells, enforcing every invariant.
    pub fn new(
        examinee_ids: Vec<String>,
        item_ids: Vec<String>,
        cells: Vec<u8>,
    ) -> Result<Self, IngestError> {
        if examinee_ids.is_empty() || item_ids.len() < 2 {
            return Err(IngestError::EmptyMatrix);
        }
        ensure_unique("examinee", &examinee_ids)?;
        ensure_unique("item", &item_ids)?;
        let j = item_ids.len();
        if cells.len() != examinee_ids.len() * j {
            return Err(IngestError::MalformedCsv(format!(
                "expected {} cells, found {}",
                examinee_ids.len() * j,
                cells.len()
            )));
        }
        if let Some(pos) = cells.iter().position(|&c| c > 1) {
            return Err(IngestError::MalformedCell {
                row: pos / j,
                column: item_ids[pos % j].clone(),
                value: cells[pos].to_string(),
            });
        }
        Ok(Self { examinee_ids, item_ids, cells })
    }

    /// Convenience constructor with generated ids (`p1..`, `q1..`).
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self, IngestError> {
        let j = rows.first().map_or(0, Vec::len);
        if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != j) {
            return Err(IngestError::RaggedRow { row, found: r.len(), expected: j });
        }
        let examinees = (1..=rows.len()).map(|i| format!("p{i}")).collect();
        let items = (1..=j).map(|i| format!("q{i}")).collect();
        Self::new(examinees, items, rows.concat())
    }

    pub fn n_examinees(&self) -> usize {
        self.examinee_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn examinee_ids(&self) -> &[String] {
        &self.examinee_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    #[inline]
    pub fn get(&self, examinee: usize, item: usize) -> u8 {
        self.cells[examinee * self.item_ids.len() + item]
    }

    pub fn row(&self, examinee: usize) -> &[u8] {
        let j = self.item_ids.len();
        &self.cells[examinee * j..(examinee + 1) * j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.cells.chunks_exact(self.item_ids.len())
    }

    pub fn column(&self, item: usize) -> Vec<u8> {
        self.rows().map(|r| r[item]).collect()
    }

    pub fn column_f64(&self, item: usize) -> Vec<f64> {
        self.rows().map(|r| f64::from(r[item])).collect()
    }

    /// Number-correct score per examinee.
    pub fn total_scores(&self) -> Vec<u32> {
        self.rows().map(|r| r.iter().map(|&c| u32::from(c)).sum()).collect()
    }

    pub fn to_f64_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n_examinees(), self.n_items(), |i, j| {
            f64::from(self.get(i, j))
        })
    }

    /// Restricts the matrix to the given items, in the given order.
    pub fn select_items(&self, item_ids: &[String]) -> Result<Self, IngestError> {
        let index: HashMap<&str, usize> =
            self.item_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let cols = item_ids
            .iter()
            .map(|id| index.get(id.as_str()).copied().ok_or_else(|| IngestError::UnknownItem(id.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let cells = self.rows().flat_map(|r| cols.iter().map(move |&c| r[c])).collect();
        Self::new(self.examinee_ids.clone(), item_ids.to_vec(), cells)
    }

    /// Reorders examinees; `order[k]` is the source row of output row `k`.
    pub fn permute_rows(&self, order: &[usize]) -> Self {
        let cells = order.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        let examinee_ids = order.iter().map(|&i| self.examinee_ids[i].clone()).collect();
        Self { examinee_ids, item_ids: self.item_ids.clone(), cells }
    }

    /// Canonical scored CSV: header `id,<items>`, `\n` line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id");
        for id in &self.item_ids {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        for (id, row) in self.examinee_ids.iter().zip(self.rows()) {
            out.push_str(id);
            for &c in row {
                out.push(',');
                out.push(if c == 1 { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }
}

fn ensure_unique(kind: &'static str, ids: &[String]) -> Result<(), IngestError> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(IngestError::DuplicateId { kind, id: id.clone() });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dimension {
    #[serde(rename = "Know&Understand")]
    KnowUnderstand,
    #[serde(rename = "Use&Apply")]
    UseApply,
    #[serde(rename = "Evaluate&Create")]
    EvaluateCreate,
    Ethics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankItem {
    pub id: String,
    pub dimension: Dimension,
    pub stem: String,
    pub options: Vec<String>,
    pub key: String,
}

/// Item metadata and answer keys, as stored in `bank.json`.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemBank {
    items: Vec<BankItem>,
}

impl ItemBank {
    pub fn new(items: Vec<BankItem>) -> Result<Self, IngestError> {
        let ids: Vec<String> = items.iter().map(|i| i.id.clone()).collect();
        ensure_unique("item", &ids)?;
        for item in &items {
            if item.options.len() < 2 {
                return Err(IngestError::InvalidBank(format!("item `{}` has fewer than 2 options", item.id)));
            }
            if !item.options.contains(&item.key) {
                return Err(IngestError::InvalidBank(format!(
                    "key `{}` of item `{}` is not one of its options",
                    item.key, item.id
                )));
            }
        }
        Ok(Self { items })
    }

    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        let items: Vec<BankItem> =
            serde_json::from_str(text).map_err(|e| IngestError::InvalidBank(e.to_string()))?;
        Self::new(items)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.items).expect("bank serializes")
    }

    pub fn items(&self) -> &[BankItem] {
        &self.items
    }

    pub fn get(&self, id: &str) -> Option<&BankItem> {
        self.items.iter().find(|i| i.id == id)
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoringMode {
    /// Cells are already 0/1.
    Scored,
    /// Cells are option labels, scored against the bank key.
    Raw,
}

/// Parses a response CSV. Row and column order are preserved.
pub fn parse_response_csv<R: Read>(
    reader: R,
    mode: ScoringMode,
    key: Option<&ItemBank>,
) -> Result<ResponseMatrix, IngestError> {
    if mode == ScoringMode::Raw && key.is_none() {
        return Err(IngestError::MissingKey);
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| IngestError::MalformedCsv(e.to_string()))?.clone();
    if header.len() < 3 {
        return Err(IngestError::EmptyMatrix);
    }
    let item_ids: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let keys: Vec<&str> = match (mode, key) {
        (ScoringMode::Raw, Some(bank)) => item_ids
            .iter()
            .map(|id| bank.get(id).map(|b| b.key.as_str()).ok_or_else(|| IngestError::UnknownItem(id.clone())))
            .collect::<Result<_, _>>()?,
        _ => Vec::new(),
    };

    let j = item_ids.len();
    let mut examinee_ids = Vec::new();
    let mut cells = Vec::new();
    let mut first_missing: Option<(usize, String)> = None;
    let mut incomplete_rows = 0;
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| IngestError::MalformedCsv(e.to_string()))?;
        if record.len() != j + 1 {
            return Err(IngestError::RaggedRow { row, found: record.len(), expected: j + 1 });
        }
        examinee_ids.push(record[0].to_owned());
        let mut row_incomplete = false;
        for (col, raw) in record.iter().skip(1).enumerate() {
            let value = raw.trim();
            if value.is_empty() {
                row_incomplete = true;
                first_missing.get_or_insert((row, item_ids[col].clone()));
                cells.push(0);
                continue;
            }
            let cell = match mode {
                ScoringMode::Scored => match value {
                    "0" => 0,
                    "1" => 1,
                    _ => {
                        return Err(IngestError::MalformedCell {
                            row,
                            column: item_ids[col].clone(),
                            value: value.to_owned(),
                        })
                    }
                },
                ScoringMode::Raw => u8::from(value == keys[col]),
            };
            cells.push(cell);
        }
        if row_incomplete {
            incomplete_rows += 1;
        }
    }
    if let Some((row, column)) = first_missing {
        return Err(IngestError::MissingCell { row, column, incomplete_rows });
    }
    ResponseMatrix::new(examinee_ids, item_ids, cells)
}

pub fn read_response_csv(
    path: impl AsRef<Path>,
    mode: ScoringMode,
    key: Option<&ItemBank>,
) -> Result<ResponseMatrix, IngestError> {
    parse_response_csv(std::fs::File::open(path)?, mode, key)
}

/// Named numeric columns over the same N examinees.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl ScoreTable {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self, IngestError> {
        ensure_unique("column", &names)?;
        if names.len() != columns.len() || names.is_empty() {
            return Err(IngestError::MalformedCsv("column names and data disagree".into()));
        }
        let n = columns[0].len();
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n {
                return Err(IngestError::RaggedRow { row: col.len(), found: col.len(), expected: n });
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(IngestError::NonFinite { row, column: name.clone() });
            }
        }
        if n < 3 {
            return Err(IngestError::TooFewRows(n));
        }
        Ok(Self { names, columns })
    }

    pub fn n_rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.names.join(",");
        out.push('\n');
        for r in 0..self.n_rows() {
            let row: Vec<String> = self.columns.iter().map(|c| format!("{}", c[r])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn parse_score_csv<R: Read>(reader: R) -> Result<ScoreTable, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| IngestError::MalformedCsv(e.to_string()))?
        .iter()
        .map(|s| s.trim().to_owned())
        .collect();
    let mut columns = vec![Vec::new(); names.len()];
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| IngestError::MalformedCsv(e.to_string()))?;
        if record.len() != names.len() {
            return Err(IngestError::RaggedRow { row, found: record.len(), expected: names.len() });
        }
        for (col, raw) in record.iter().enumerate() {
            let value: f64 = raw.trim().parse().map_err(|_| IngestError::NonNumeric {
                row,
                column: names[col].clone(),
                value: raw.to_owned(),
            })?;
            if !value.is_finite() {
                return Err(IngestError::NonFinite { row, column: names[col].clone() });
            }
            columns[col].push(value);
        }
    }
    ScoreTable::new(names, columns)
}

pub fn read_score_csv(path: impl AsRef<Path>) -> Result<ScoreTable, IngestError> {
    parse_score_csv(std::fs::File::open(path)?)
}

/// N×Q integer ratings on a closed scale `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LikertTable {
    rows: Vec<Vec<i64>>,
    lo: i64,
    hi: i64,
}

impl LikertTable {
    pub fn new(rows: Vec<Vec<i64>>, lo: i64, hi: i64) -> Result<Self, IngestError> {
        let q = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || q == 0 {
            return Err(IngestError::EmptyMatrix);
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != q {
                return Err(IngestError::RaggedRow { row: r, found: row.len(), expected: q });
            }
            for (c, &v) in row.iter().enumerate() {
                if v < lo || v > hi {
                    return Err(IngestError::LikertOutOfRange { row: r, col: c, value: v, lo, hi });
                }
            }
        }
        Ok(Self { rows, lo, hi })
    }

    pub fn n_questions(&self) -> usize {
        self.rows[0].len()
    }

    pub fn n_respondents(&self) -> usize {
        self.rows.len()
    }

    pub fn bounds(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    pub fn column(&self, q: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[q] as f64).collect()
    }

    pub fn to_f64_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.rows.len(), self.n_questions(), |i, j| self.rows[i][j] as f64)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::KnowUnderstand => "Know&Understand",
            Dimension::UseApply => "Use&Apply",
            Dimension::EvaluateCreate => "Evaluate&Create",
            Dimension::Ethics => "Ethics",
        })
    }
}

/// Standardizes to mean 0 and sample (n − 1) standard deviation 1.
pub fn column_standardize(xs: &[f64]) -> Result<Vec<f64>, IngestError> {
    if xs.len() < 2 {
        return Err(IngestError::DegenerateColumn);
    }
    let mean = crate::stats::mean(xs);
    let sd = crate::stats::sample_variance(xs).sqrt();
    if !(sd > 0.0) || sd < 1e-300 {
        return Err(IngestError::DegenerateColumn);
    }
    Ok(xs.iter().map(|x| (x - mean) / sd).collect())
}
