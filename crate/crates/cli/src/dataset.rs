//! Dataset files and the readers behind every `--data`, `--matrix` and
//! `--stokes` flag.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use mueller_core::json::matrix_from_json;
use mueller_core::{MeasurementPair, MuellerMatrix, StokesVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// An ordered list of measurement pairs with free-form string metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    pub pairs: Vec<MeasurementPair>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl Dataset {
    pub fn new(pairs: Vec<MeasurementPair>) -> Self {
        Self {
            pairs,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Parses `text` as `T`. Errors name the field path of the first problem
/// along with its line and column.
pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        CliError::Input(format!("{origin}: field `{field}`: {inner}"))
    })?;
    Ok(value)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    parse_json(&read_text(path)?, &path.display().to_string())
}

pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let data: Dataset = read_json(path)?;
    log::debug!("{}: {} pairs", path.display(), data.pairs.len());
    Ok(data)
}

pub fn read_stokes(path: &Path) -> Result<StokesVector, CliError> {
    read_json(path)
}

/// Any file that carries a matrix: a bare row-major array, a record with a
/// `mueller` field, or a solver report whose first candidate or root is used.
#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixFile {
    Bare(Vec<f64>),
    Record { mueller: Vec<f64> },
    Candidates { candidates: Vec<Record> },
    Roots { roots: Vec<Record> },
}

#[derive(Deserialize)]
struct Record {
    mueller: Vec<f64>,
}

pub fn read_matrix(path: &Path) -> Result<MuellerMatrix, CliError> {
    let origin = path.display().to_string();
    let value: serde_json::Value = parse_json(&read_text(path)?, &origin)?;
    let file: MatrixFile = serde_json::from_value(value).map_err(|_| {
        CliError::Input(format!(
            "{origin}: expected 16 numbers, an object with `mueller`, or a report with `candidates` or `roots`"
        ))
    })?;
    let entries = match file {
        MatrixFile::Bare(v) | MatrixFile::Record { mueller: v } => v,
        MatrixFile::Candidates { candidates: list } | MatrixFile::Roots { roots: list } => list
            .into_iter()
            .next()
            .map(|r| r.mueller)
            .ok_or_else(|| CliError::Input(format!("{origin}: report holds no matrix")))?,
    };
    matrix_from_json(&entries).map_err(|e| CliError::Input(format!("{origin}: {e}")))
}

/// One CSV row: input then output Stokes components.
#[derive(Debug, Deserialize)]
struct CsvRow {
    in_s0: f64,
    in_s1: f64,
    in_s2: f64,
    in_s3: f64,
    out_s0: f64,
    out_s1: f64,
    out_s2: f64,
    out_s3: f64,
}

/// Reads a CSV file with header
/// `in_s0,in_s1,in_s2,in_s3,out_s0,out_s1,out_s2,out_s3`.
pub fn dataset_from_csv(path: &Path) -> Result<Dataset, CliError> {
    let origin = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{origin}: {e}")))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Input(format!("{origin}: {e}")))?
        .clone();
    let mut pairs = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Input(format!("{origin}: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        let row: CsvRow = record
            .deserialize(Some(&headers))
            .map_err(|e| CliError::Input(format!("{origin}: line {line}: {e}")))?;
        let input = StokesVector::from_array([row.in_s0, row.in_s1, row.in_s2, row.in_s3]);
        let output = StokesVector::from_array([row.out_s0, row.out_s1, row.out_s2, row.out_s3]);
        let pair = input
            .and_then(|i| output.and_then(|o| MeasurementPair::new(i, o)))
            .map_err(|e| CliError::Input(format!("{origin}: line {line}: {e}")))?;
        pairs.push(pair);
    }
    let name = path
        .file_name()
        .map_or_else(|| origin.clone(), |n| n.to_string_lossy().into_owned());
    Ok(Dataset::new(pairs).with_meta("source", name))
}
