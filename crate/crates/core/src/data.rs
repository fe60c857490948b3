//! Tabular ingestion: schemas, categorical/numeric encoding and the immutable
//! numeric [`Dataset`] the optimizer works on.
//!
//! Categorical columns are one-hot expanded with one trailing "other" slot for
//! categories never seen while fitting. Numeric columns are min-max scaled to
//! `[0, 1]`; constant columns map to `0`. Missing cells are rejected.

use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use indexmap::IndexSet;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Class id of normal samples.
pub const NORMAL: usize = 0;
/// Class id of anomalous samples.
pub const ANOMALY: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Ignore,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Column {
            name: name.into(),
            kind,
        }
    }
}

/// Decides which raw label values denote an anomaly.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositiveRule {
    /// Anomalous iff the label equals this value.
    Equals(String),
    /// Anomalous iff the label differs from this value (binary collapse of
    /// multi-class attack labels).
    NotEquals(String),
}

impl PositiveRule {
    pub fn is_positive(&self, value: &str) -> bool {
        match self {
            PositiveRule::Equals(v) => value == v,
            PositiveRule::NotEquals(v) => value != v,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpec {
    pub column: usize,
    pub positive: PositiveRule,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<Column>,
    #[serde(default)]
    pub label: Option<LabelSpec>,
    #[serde(default)]
    pub has_header: bool,
}

const KDD99_COLUMNS: [&str; 41] = [
    "duration",
    "protocol_type",
    "service",
    "flag",
    "src_bytes",
    "dst_bytes",
    "land",
    "wrong_fragment",
    "urgent",
    "hot",
    "num_failed_logins",
    "logged_in",
    "num_compromised",
    "root_shell",
    "su_attempted",
    "num_root",
    "num_file_creations",
    "num_shells",
    "num_access_files",
    "num_outbound_cmds",
    "is_host_login",
    "is_guest_login",
    "count",
    "srv_count",
    "serror_rate",
    "srv_serror_rate",
    "rerror_rate",
    "srv_rerror_rate",
    "same_srv_rate",
    "diff_srv_rate",
    "srv_diff_host_rate",
    "dst_host_count",
    "dst_host_srv_count",
    "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate",
    "dst_host_srv_serror_rate",
    "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
];

impl Schema {
    pub fn new(columns: Vec<Column>) -> Self {
        Schema {
            columns,
            label: None,
            has_header: false,
        }
    }

    /// `width` numeric columns named `c0..`, no label.
    pub fn numeric(width: usize) -> Self {
        Schema::new(
            (0..width)
                .map(|i| Column::new(format!("c{i}"), ColumnKind::Numeric))
                .collect(),
        )
    }

    pub fn with_label(mut self, column: usize, positive: PositiveRule) -> Self {
        self.label = Some(LabelSpec { column, positive });
        self
    }

    pub fn with_header(mut self, has_header: bool) -> Self {
        self.has_header = has_header;
        self
    }

    /// The KDD Cup 1999 layout: 41 attributes with `protocol_type`, `service`
    /// and `flag` categorical, followed by the label; everything except
    /// `normal.` counts as an anomaly.
    pub fn kdd99() -> Self {
        let mut columns: Vec<Column> = KDD99_COLUMNS
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let kind = if (1..=3).contains(&i) {
                    ColumnKind::Categorical
                } else {
                    ColumnKind::Numeric
                };
                Column::new(*name, kind)
            })
            .collect();
        columns.push(Column::new("label", ColumnKind::Ignore));
        Schema::new(columns).with_label(41, PositiveRule::NotEquals("normal.".into()))
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema: Schema = serde_json::from_str(&text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Schema("no columns declared".into()));
        }
        if let Some(label) = &self.label {
            if label.column >= self.columns.len() {
                return Err(Error::Schema(format!(
                    "label column {} out of range for {} columns",
                    label.column,
                    self.columns.len()
                )));
            }
        }
        Ok(())
    }

    fn is_label(&self, column: usize) -> bool {
        self.label.as_ref().is_some_and(|l| l.column == column)
    }
}

/// One unencoded input row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawRecord {
    pub cells: Vec<String>,
}

impl RawRecord {
    pub fn new<S: Into<String>>(cells: impl IntoIterator<Item = S>) -> Self {
        RawRecord {
            cells: cells.into_iter().map(Into::into).collect(),
        }
    }

    /// Parses a single CSV line.
    pub fn parse_line(line: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(line.as_bytes());
        match reader.records().next() {
            Some(rec) => Ok(RawRecord::new(rec?.iter())),
            None => Ok(RawRecord { cells: vec![] }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum ColumnEncoding {
    Numeric { min: f64, max: f64 },
    Categorical { categories: IndexSet<String> },
    Skip,
}

impl ColumnEncoding {
    fn slots(&self) -> usize {
        match self {
            ColumnEncoding::Numeric { .. } => 1,
            ColumnEncoding::Categorical { categories } => categories.len() + 1,
            ColumnEncoding::Skip => 0,
        }
    }
}

/// Fitted per-column encoding state.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    columns: Vec<ColumnEncoding>,
    label: Option<LabelSpec>,
    dim: usize,
}

fn scale(value: f64, min: f64, max: f64) -> f64 {
    if max > min {
        (value - min) / (max - min)
    } else {
        0.0
    }
}

fn parse_numeric(cell: &str, row: usize, column: usize) -> Result<f64> {
    let trimmed = cell.trim();
    if trimmed.is_empty() {
        return Err(Error::MalformedRow {
            row,
            message: format!("missing value in column {column}"),
        });
    }
    match trimmed.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::MalformedRow {
            row,
            message: format!("column {column}: `{cell}` is not a finite number"),
        }),
    }
}

fn check_present(cell: &str, row: usize, column: usize) -> Result<()> {
    if cell.is_empty() {
        Err(Error::MalformedRow {
            row,
            message: format!("missing value in column {column}"),
        })
    } else {
        Ok(())
    }
}

impl Encoder {
    /// Encoded feature count.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    /// Encodes one record. Unseen categories land in the column's "other"
    /// slot.
    pub fn encode(&self, record: &RawRecord) -> Result<Vec<f64>> {
        self.encode_cells(record.cells.iter().map(String::as_str), 0)
    }

    fn encode_cells<'a>(&self, cells: impl ExactSizeIterator<Item = &'a str>, row: usize) -> Result<Vec<f64>> {
        if cells.len() != self.columns.len() {
            return Err(Error::ColumnCount {
                row,
                expected: self.columns.len(),
                found: cells.len(),
            });
        }
        let mut out = Vec::with_capacity(self.dim);
        for (col, (enc, cell)) in self.columns.iter().zip(cells).enumerate() {
            match enc {
                ColumnEncoding::Numeric { min, max } => {
                    out.push(scale(parse_numeric(cell, row, col)?, *min, *max));
                }
                ColumnEncoding::Categorical { categories } => {
                    check_present(cell, row, col)?;
                    let hot = categories.get_index_of(cell).unwrap_or(categories.len());
                    out.extend((0..=categories.len()).map(|i| if i == hot { 1.0 } else { 0.0 }));
                }
                ColumnEncoding::Skip => {}
            }
        }
        Ok(out)
    }

    /// Class id for a record's label cell, if the schema has a label.
    pub fn label_of(&self, record: &RawRecord) -> Option<usize> {
        let spec = self.label.as_ref()?;
        let cell = record.cells.get(spec.column)?;
        Some(if spec.positive.is_positive(cell) {
            ANOMALY
        } else {
            NORMAL
        })
    }
}

/// Immutable encoded sample matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    dim: usize,
    labels: Option<Vec<usize>>,
    row_ids: Vec<usize>,
}

impl Dataset {
    /// Builds a dataset from in-memory rows; row ids are `0..N`.
    pub fn from_rows(rows: &[Vec<f64>], labels: Option<Vec<usize>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut features = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            features.extend_from_slice(row);
        }
        Dataset::from_flat(features, dim, labels, (0..rows.len()).collect())
    }

    pub fn from_flat(
        features: Vec<f64>,
        dim: usize,
        labels: Option<Vec<usize>>,
        row_ids: Vec<usize>,
    ) -> Result<Self> {
        let n = row_ids.len();
        if features.len() != n * dim {
            return Err(Error::DimensionMismatch {
                expected: n * dim,
                found: features.len(),
            });
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: l.len(),
                });
            }
        }
        let mut seen = HashSet::with_capacity(n);
        if !row_ids.iter().all(|id| seen.insert(*id)) {
            return Err(Error::InvalidConfig("duplicate row ids".into()));
        }
        Ok(Dataset {
            features,
            dim,
            labels,
            row_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.row_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    pub fn anomaly_count(&self) -> Result<usize> {
        let labels = self.labels().ok_or(Error::NoLabels)?;
        Ok(labels.iter().filter(|&&l| l == ANOMALY).count())
    }

    /// Rows at `positions`, in that order, keeping their original row ids.
    pub fn subset(&self, positions: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(positions.len() * self.dim);
        for &p in positions {
            features.extend_from_slice(self.row(p));
        }
        Dataset {
            features,
            dim: self.dim,
            labels: self
                .labels
                .as_ref()
                .map(|l| positions.iter().map(|&p| l[p]).collect()),
            row_ids: positions.iter().map(|&p| self.row_ids[p]).collect(),
        }
    }
}

/// Fraction of samples labelled anomalous.
pub fn anomaly_fraction(dataset: &Dataset) -> Result<f64> {
    let count = dataset.anomaly_count()?;
    if dataset.is_empty() {
        return Ok(0.0);
    }
    Ok(count as f64 / dataset.len() as f64)
}

/// Raw source lines kept alongside a dataset so summaries can be written back
/// verbatim. `rows[p]` is the source text of dataset position `p`.
#[derive(Clone, Debug)]
pub struct Table {
    pub header: Option<String>,
    pub rows: Vec<String>,
}

impl Table {
    /// Writes the header (if any) and the rows at `positions`, one per line.
    pub fn write_rows(&self, path: &Path, positions: &[usize]) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            if let Some(h) = &self.header {
                writeln!(out, "{h}")?;
            }
            for &p in positions {
                writeln!(out, "{}", self.rows[p])?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    pub fn record(&self, position: usize) -> Result<RawRecord> {
        RawRecord::parse_line(&self.rows[position])
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    /// Keep a seeded uniform subsample of this many data rows.
    pub subsample: Option<(usize, u64)>,
}

/// Loads and encodes a CSV file; returns the dataset and its fitted encoder.
pub fn load_dataset(path: &Path, schema: &Schema) -> Result<(Dataset, Encoder)> {
    let (_, dataset, encoder) = load_table(path, schema, &LoadOptions::default())?;
    Ok((dataset, encoder))
}

fn trim_line_end(bytes: &[u8]) -> &[u8] {
    let mut end = bytes.len();
    while end > 0 && (bytes[end - 1] == b'\n' || bytes[end - 1] == b'\r') {
        end -= 1;
    }
    &bytes[..end]
}

fn raw_text(bytes: &[u8], line: usize) -> Result<String> {
    String::from_utf8(trim_line_end(bytes).to_vec()).map_err(|_| Error::MalformedRow {
        row: line,
        message: "invalid UTF-8".into(),
    })
}

/// Loads a CSV file keeping the raw source lines.
pub fn load_table(path: &Path, schema: &Schema, options: &LoadOptions) -> Result<(Table, Dataset, Encoder)> {
    schema.validate()?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;

    // Record boundaries: (start byte, line number) for every record.
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes.as_slice());
    let mut starts = Vec::new();
    let mut record = csv::ByteRecord::new();
    loop {
        let pos = reader.position().clone();
        if !reader.read_byte_record(&mut record)? {
            break;
        }
        if record.len() == 1 && record[0].is_empty() {
            continue; // blank line
        }
        starts.push((pos.byte() as usize, pos.line() as usize));
    }
    let end_of = |k: usize| -> usize {
        starts.get(k + 1).map_or(bytes.len(), |s| s.0)
    };

    let header_count = usize::from(schema.has_header && !starts.is_empty());
    let header = if header_count == 1 {
        Some(raw_text(&bytes[starts[0].0..end_of(0)], starts[0].1)?)
    } else {
        None
    };
    let total = starts.len() - header_count;
    if total == 0 {
        return Err(Error::Empty);
    }

    let selected: Vec<usize> = match options.subsample {
        Some((n, seed)) if n < total => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = rand::seq::index::sample(&mut rng, total, n).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..total).collect(),
    };

    let width = schema.width();
    let numeric_cols: Vec<usize> = (0..width)
        .filter(|&c| !schema.is_label(c) && schema.columns[c].kind == ColumnKind::Numeric)
        .collect();
    let mut categories: Vec<IndexSet<String>> = vec![IndexSet::new(); width];
    let mut numeric_values: Vec<f64> = Vec::with_capacity(selected.len() * numeric_cols.len());
    let mut category_ids: Vec<u32> = Vec::new();
    let mut labels = schema.label.as_ref().map(|_| Vec::with_capacity(selected.len()));
    let mut rows = Vec::with_capacity(selected.len());

    for &data_idx in &selected {
        let k = data_idx + header_count;
        let (start, line) = starts[k];
        let raw = &bytes[start..end_of(k)];
        let text = raw_text(raw, line)?;
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(text.as_bytes());
        let rec = match rdr.records().next() {
            Some(r) => r?,
            None => csv::StringRecord::new(),
        };
        if rec.len() != width {
            return Err(Error::ColumnCount {
                row: line,
                expected: width,
                found: rec.len(),
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            if schema.is_label(c) {
                continue;
            }
            match schema.columns[c].kind {
                ColumnKind::Numeric => numeric_values.push(parse_numeric(cell, line, c)?),
                ColumnKind::Categorical => {
                    check_present(cell, line, c)?;
                    let (id, _) = categories[c].insert_full(cell.to_string());
                    category_ids.push(id as u32);
                }
                ColumnKind::Ignore => {}
            }
        }
        if let (Some(labels), Some(spec)) = (labels.as_mut(), schema.label.as_ref()) {
            labels.push(if spec.positive.is_positive(&rec[spec.column]) {
                ANOMALY
            } else {
                NORMAL
            });
        }
        rows.push(text);
    }

    let n = rows.len();
    let n_num = numeric_cols.len();
    let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); n_num];
    for r in 0..n {
        for (j, range) in ranges.iter_mut().enumerate() {
            let v = numeric_values[r * n_num + j];
            range.0 = range.0.min(v);
            range.1 = range.1.max(v);
        }
    }

    let mut num_slot = 0;
    let columns: Vec<ColumnEncoding> = (0..width)
        .map(|c| {
            if schema.is_label(c) {
                return ColumnEncoding::Skip;
            }
            match schema.columns[c].kind {
                ColumnKind::Numeric => {
                    let (min, max) = ranges[num_slot];
                    num_slot += 1;
                    ColumnEncoding::Numeric { min, max }
                }
                ColumnKind::Categorical => ColumnEncoding::Categorical {
                    categories: std::mem::take(&mut categories[c]),
                },
                ColumnKind::Ignore => ColumnEncoding::Skip,
            }
        })
        .collect();
    let dim = columns.iter().map(ColumnEncoding::slots).sum();
    let encoder = Encoder {
        columns,
        label: schema.label.clone(),
        dim,
    };

    let n_cat = category_ids.len() / n.max(1);
    let mut features = Vec::with_capacity(n * dim);
    for r in 0..n {
        let (mut j_num, mut j_cat) = (0, 0);
        for enc in &encoder.columns {
            match enc {
                ColumnEncoding::Numeric { min, max } => {
                    features.push(scale(numeric_values[r * n_num + j_num], *min, *max));
                    j_num += 1;
                }
                ColumnEncoding::Categorical { categories } => {
                    let hot = category_ids[r * n_cat + j_cat] as usize;
                    features.extend((0..=categories.len()).map(|i| if i == hot { 1.0 } else { 0.0 }));
                    j_cat += 1;
                }
                ColumnEncoding::Skip => {}
            }
        }
    }

    let dataset = Dataset::from_flat(features, dim, labels, selected)?;
    Ok((Table { header, rows }, dataset, encoder))
}
