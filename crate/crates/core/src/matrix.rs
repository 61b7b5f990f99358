//! Correctness matrices, model splits and example embeddings.
//!
//! A [`CorrectnessMatrix`] holds one row per model and one column per
//! benchmark example. Values are either predictive probabilities of the
//! correct option (continuous) or right/wrong indicators (binary). The
//! matrix is immutable once built; every constructor validates it.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Json,
}

impl MatrixFormat {
    /// Picks the format from a file extension (`.json` is JSON, anything else CSV).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => MatrixFormat::Json,
            _ => MatrixFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectnessMatrix {
    model_ids: Vec<String>,
    example_ids: Vec<String>,
    values: Array2<f64>,
    kind: MatrixKind,
    model_index: HashMap<String, usize>,
    example_index: HashMap<String, usize>,
}

fn index_ids(ids: &[String], what: &'static str) -> Result<HashMap<String, usize>> {
    let mut index = HashMap::with_capacity(ids.len());
    for (position, id) in ids.iter().enumerate() {
        if index.insert(id.clone(), position).is_some() {
            return Err(Error::DuplicateId {
                what,
                id: id.clone(),
                position,
            });
        }
    }
    Ok(index)
}

fn infer_kind(values: &Array2<f64>) -> MatrixKind {
    if values.iter().all(|&v| v == 0.0 || v == 1.0) {
        MatrixKind::Binary
    } else {
        MatrixKind::Continuous
    }
}

impl CorrectnessMatrix {
    /// Builds a validated matrix. `kind = None` infers binary iff every value is 0 or 1.
    pub fn new(
        model_ids: Vec<String>,
        example_ids: Vec<String>,
        values: Array2<f64>,
        kind: Option<MatrixKind>,
    ) -> Result<Self> {
        let (rows, cols) = values.dim();
        if rows != model_ids.len() {
            return Err(Error::DimensionMismatch {
                left: rows,
                right: model_ids.len(),
            });
        }
        if cols != example_ids.len() {
            return Err(Error::DimensionMismatch {
                left: cols,
                right: example_ids.len(),
            });
        }
        let model_index = index_ids(&model_ids, "model")?;
        let example_index = index_ids(&example_ids, "example")?;
        for ((row, col), &value) in values.indexed_iter() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::ValueOutOfRange { row, col, value });
            }
        }
        let kind = match kind {
            Some(MatrixKind::Binary) => {
                if let Some(((row, col), &value)) = values
                    .indexed_iter()
                    .find(|(_, &v)| v != 0.0 && v != 1.0)
                {
                    return Err(Error::NotBinary { row, col, value });
                }
                MatrixKind::Binary
            }
            Some(MatrixKind::Continuous) => MatrixKind::Continuous,
            None => infer_kind(&values),
        };
        Ok(Self {
            model_ids,
            example_ids,
            values,
            kind,
            model_index,
            example_index,
        })
    }

    /// Builds a matrix from row vectors, reporting ragged rows.
    pub fn from_rows(
        model_ids: Vec<String>,
        example_ids: Vec<String>,
        rows: Vec<Vec<f64>>,
        kind: Option<MatrixKind>,
    ) -> Result<Self> {
        let n_cols = example_ids.len();
        if rows.len() != model_ids.len() {
            return Err(Error::DimensionMismatch {
                left: rows.len(),
                right: model_ids.len(),
            });
        }
        let mut flat = Vec::with_capacity(rows.len() * n_cols);
        for (row, values) in rows.iter().enumerate() {
            if values.len() != n_cols {
                return Err(Error::RaggedRow {
                    row,
                    expected: n_cols,
                    found: values.len(),
                });
            }
            flat.extend_from_slice(values);
        }
        let values = Array2::from_shape_vec((rows.len(), n_cols), flat)
            .expect("shape checked above");
        Self::new(model_ids, example_ids, values, kind)
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn example_ids(&self) -> &[String] {
        &self.example_ids
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn n_models(&self) -> usize {
        self.model_ids.len()
    }

    pub fn n_examples(&self) -> usize {
        self.example_ids.len()
    }

    pub fn model_index(&self, id: &str) -> Result<usize> {
        self.model_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownModel(id.to_string()))
    }

    pub fn example_index(&self, id: &str) -> Result<usize> {
        self.example_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownExample(id.to_string()))
    }

    pub fn row(&self, model: usize) -> ArrayView1<'_, f64> {
        self.values.row(model)
    }

    pub fn get(&self, model: usize, example: usize) -> f64 {
        self.values[[model, example]]
    }

    /// Mean correctness of a model over every example.
    pub fn true_performance(&self, model_id: &str) -> Result<f64> {
        let m = self.model_index(model_id)?;
        Ok(row_mean(self.row(m)))
    }

    /// Per-example vectors over `basis_model_ids`, in basis order.
    ///
    /// `example_subset = None` (or an empty slice) embeds every example.
    pub fn embed_examples(
        &self,
        basis_model_ids: &[String],
        example_subset: Option<&[usize]>,
    ) -> Result<ExamplesEmbedding> {
        let basis: Vec<usize> = basis_model_ids
            .iter()
            .map(|id| self.model_index(id))
            .collect::<Result<_>>()?;
        let examples: Vec<usize> = match example_subset {
            Some(subset) if !subset.is_empty() => {
                if let Some(&bad) = subset.iter().find(|&&k| k >= self.n_examples()) {
                    return Err(Error::out_of_range(
                        "example index",
                        bad,
                        format!("< {}", self.n_examples()),
                    ));
                }
                subset.to_vec()
            }
            _ => (0..self.n_examples()).collect(),
        };
        let dim = basis.len();
        let mut flat = Vec::with_capacity(examples.len() * dim);
        for &k in &examples {
            flat.extend(basis.iter().map(|&m| self.values[[m, k]]));
        }
        Ok(ExamplesEmbedding {
            basis_model_ids: basis_model_ids.to_vec(),
            example_indices: examples.clone(),
            vectors: Array2::from_shape_vec((examples.len(), dim), flat)
                .expect("shape matches"),
        })
    }

    pub fn load(path: &Path, format: MatrixFormat) -> Result<Self> {
        Self::load_with_kind(path, format, None)
    }

    /// Loads a matrix, letting `kind_override` take precedence over the
    /// file's own `kind` field and over inference.
    pub fn load_with_kind(
        path: &Path,
        format: MatrixFormat,
        kind_override: Option<MatrixKind>,
    ) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let reader = BufReader::new(file);
        match format {
            MatrixFormat::Csv => read_csv(reader, kind_override),
            MatrixFormat::Json => read_json(reader, kind_override),
        }
    }

    pub fn save(&self, path: &Path, format: MatrixFormat) -> Result<()> {
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = File::create(path).map_err(io_err)?;
        let mut writer = BufWriter::new(file);
        match format {
            MatrixFormat::Csv => self.write_csv(&mut writer)?,
            MatrixFormat::Json => {
                serde_json::to_writer(&mut writer, &self.to_json_repr())?;
                writer.write_all(b"\n").map_err(io_err)?;
            }
        }
        writer.flush().map_err(io_err)
    }

    fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Parse {
            location: "csv output".into(),
            message: e.to_string(),
        };
        let header = std::iter::once("model_id").chain(self.example_ids.iter().map(String::as_str));
        csv.write_record(header).map_err(csv_err)?;
        for (m, id) in self.model_ids.iter().enumerate() {
            // `{}` on f64 prints the shortest representation that round-trips.
            let row = self.values.row(m);
            let record = std::iter::once(id.clone()).chain(row.iter().map(|v| format!("{v}")));
            csv.write_record(record).map_err(csv_err)?;
        }
        csv.flush().map_err(|e| Error::Parse {
            location: "csv output".into(),
            message: e.to_string(),
        })
    }

    fn to_json_repr(&self) -> MatrixJson {
        MatrixJson {
            model_ids: self.model_ids.clone(),
            example_ids: self.example_ids.clone(),
            kind: Some(self.kind),
            values: self.values.outer_iter().map(|r| r.to_vec()).collect(),
        }
    }
}

pub(crate) fn row_mean(row: ArrayView1<'_, f64>) -> f64 {
    let mut sum = 0.0;
    for &v in row.iter() {
        sum += v;
    }
    sum / row.len() as f64
}

#[derive(Debug, Serialize, Deserialize)]
struct MatrixJson {
    model_ids: Vec<String>,
    example_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<MatrixKind>,
    values: Vec<Vec<f64>>,
}

fn read_json<R: std::io::Read>(reader: R, kind_override: Option<MatrixKind>) -> Result<CorrectnessMatrix> {
    let parsed: MatrixJson = serde_json::from_reader(reader).map_err(|e| Error::Parse {
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    CorrectnessMatrix::from_rows(
        parsed.model_ids,
        parsed.example_ids,
        parsed.values,
        kind_override.or(parsed.kind),
    )
}

fn read_csv<R: std::io::Read>(reader: R, kind_override: Option<MatrixKind>) -> Result<CorrectnessMatrix> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = csv.headers().map_err(|e| Error::Parse {
        location: "header".into(),
        message: e.to_string(),
    })?;
    match header.get(0) {
        Some("model_id") => {}
        other => {
            return Err(Error::Parse {
                location: "header, col 0".into(),
                message: format!("expected `model_id`, found {other:?}"),
            })
        }
    }
    let example_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut model_ids = Vec::new();
    let mut rows = Vec::new();
    for (row, record) in csv.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            location: format!("row {row}"),
            message: e.to_string(),
        })?;
        if record.len() != example_ids.len() + 1 {
            return Err(Error::RaggedRow {
                row,
                expected: example_ids.len(),
                found: record.len().saturating_sub(1),
            });
        }
        model_ids.push(record[0].to_string());
        let values = record
            .iter()
            .skip(1)
            .enumerate()
            .map(|(col, cell)| {
                let value: f64 = cell.parse().map_err(|_| Error::Parse {
                    location: format!("(row {row}, col {col})"),
                    message: format!("not a decimal number: {cell:?}"),
                })?;
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::ValueOutOfRange { row, col, value });
                }
                Ok(value)
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }
    CorrectnessMatrix::from_rows(model_ids, example_ids, rows, kind_override)
}

/// Column slice of the matrix, one row per example, one column per basis model.
#[derive(Debug, Clone, PartialEq)]
pub struct ExamplesEmbedding {
    pub basis_model_ids: Vec<String>,
    /// Matrix example index of each embedded row.
    pub example_indices: Vec<usize>,
    pub vectors: Array2<f64>,
}

impl ExamplesEmbedding {
    /// Wraps raw vectors (rows = examples) with a synthetic basis.
    pub fn from_vectors(vectors: Array2<f64>) -> Self {
        let (n, dim) = vectors.dim();
        Self {
            basis_model_ids: (0..dim).map(|i| format!("b{i}")).collect(),
            example_indices: (0..n).collect(),
            vectors,
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn vector(&self, k: usize) -> &[f64] {
        self.vectors
            .row(k)
            .to_slice()
            .expect("embedding rows are contiguous")
    }
}

/// Disjoint source and target model ids, each kept in matrix order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSplit {
    pub source_ids: Vec<String>,
    pub target_ids: Vec<String>,
}

impl ModelSplit {
    /// Validates an explicit split against a matrix.
    pub fn new(
        matrix: &CorrectnessMatrix,
        source_ids: Vec<String>,
        target_ids: Vec<String>,
    ) -> Result<Self> {
        if source_ids.is_empty() || target_ids.is_empty() {
            return Err(Error::InvalidSplit("source and target sets must be non-empty".into()));
        }
        let mut seen = BTreeSet::new();
        for id in source_ids.iter().chain(&target_ids) {
            matrix.model_index(id)?;
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidSplit(format!(
                    "model {id:?} appears twice or in both sets"
                )));
            }
        }
        Ok(Self {
            source_ids,
            target_ids,
        })
    }
}

/// Seeded random source/target split.
///
/// The source count is `round(source_fraction * n)` clamped to `[1, n - 1]`.
pub fn split_models(matrix: &CorrectnessMatrix, source_fraction: f64, seed: u64) -> Result<ModelSplit> {
    let n = matrix.n_models();
    if n < 2 {
        return Err(Error::InvalidSplit(format!("need at least 2 models, found {n}")));
    }
    if !(source_fraction > 0.0 && source_fraction < 1.0) {
        return Err(Error::out_of_range("source_fraction", source_fraction, "(0, 1)"));
    }
    let n_source = ((source_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_source = vec![false; n];
    for &m in &order[..n_source] {
        is_source[m] = true;
    }
    let (mut source_ids, mut target_ids) = (Vec::new(), Vec::new());
    for (m, id) in matrix.model_ids().iter().enumerate() {
        if is_source[m] {
            source_ids.push(id.clone());
        } else {
            target_ids.push(id.clone());
        }
    }
    Ok(ModelSplit {
        source_ids,
        target_ids,
    })
}
