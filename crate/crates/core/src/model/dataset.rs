//! CSV ingestion.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Option<Vec<usize>>,
    pub class_names: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub target_column: Option<String>,
    pub delimiter: u8,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            target_column: None,
            delimiter: b',',
        }
    }
}

impl Dataset {
    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Reorders (and drops) feature columns to match `names`.
    pub fn select_features(&self, names: &[String]) -> Result<Dataset> {
        let index: Vec<usize> = names
            .iter()
            .map(|n| {
                self.feature_names
                    .iter()
                    .position(|f| f == n)
                    .ok_or_else(|| Error::MissingColumn(n.clone()))
            })
            .collect::<Result<_>>()?;
        Ok(Dataset {
            feature_names: names.to_vec(),
            rows: self
                .rows
                .iter()
                .map(|r| index.iter().map(|&i| r[i]).collect())
                .collect(),
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
        })
    }
}

pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let ds = read_csv(file, options)?;
    if ds.rows.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    Ok(ds)
}

/// Parses a dataset from any reader. An input without data rows yields an
/// empty dataset; [`load_csv`] turns that into [`Error::EmptyFile`].
pub fn read_csv<R: Read>(reader: R, options: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::EmptyFile("<input>".into()));
    }
    let target = match &options.target_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.clone()))?,
        ),
        None => None,
    };
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != target)
        .map(|(_, h)| h.clone())
        .collect();
    if feature_names.is_empty() {
        return Err(Error::DegenerateData("no feature columns".into()));
    }

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut class_index: HashMap<String, usize> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let mut row = Vec::with_capacity(feature_names.len());
        for (i, field) in record.iter().enumerate() {
            if Some(i) == target {
                let label = field.trim().to_string();
                let next = class_names.len();
                let k = *class_index.entry(label.clone()).or_insert_with(|| {
                    class_names.push(label);
                    next
                });
                labels.push(k);
                continue;
            }
            let value: f64 = field.trim().parse().map_err(|_| Error::NonNumericFeature {
                line,
                column: headers[i].clone(),
                value: field.to_string(),
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    Ok(Dataset {
        feature_names,
        rows,
        labels: target.map(|_| labels),
        class_names,
    })
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    let column = match e.kind() {
        csv::ErrorKind::UnequalLengths { len, .. } => *len as usize,
        _ => 0,
    };
    Error::Parse {
        line,
        column,
        detail: e.to_string(),
    }
}
