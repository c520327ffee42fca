//! Labeled numeric datasets: CSV loading, validation and z-scoring.

pub mod synth;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default name of the label column in CSV files.
pub const DEFAULT_LABEL_COLUMN: &str = "label";

/// An immutable `N x d` matrix of finite features with one class id per row.
///
/// Class `0` is the inlier class and class `1` the outlier class for binary
/// data; multi-class data uses `0..class_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    attributes: Vec<String>,
    features: Vec<f64>,
    labels: Vec<usize>,
    class_count: usize,
}

impl Dataset {
    /// Builds a dataset from row vectors. `class_count` is inferred as
    /// `max(label) + 1`, and never less than two.
    pub fn new(attributes: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        let class_count = labels.iter().copied().max().map_or(2, |m| (m + 1).max(2));
        Self::with_class_count(attributes, rows, labels, class_count)
    }

    pub fn with_class_count(
        attributes: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        let d = attributes.len();
        let mut features = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has {} values, expected {d}",
                    row.len()
                )));
            }
            features.extend_from_slice(row);
        }
        Self::from_flat(attributes, features, labels, class_count)
    }

    /// Builds a dataset from a row-major feature buffer.
    pub fn from_flat(
        attributes: Vec<String>,
        features: Vec<f64>,
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        let d = attributes.len();
        if d == 0 {
            return Err(Error::InvalidDataset("no feature columns".into()));
        }
        if labels.is_empty() {
            return Err(Error::InvalidDataset("no rows".into()));
        }
        if features.len() != labels.len() * d {
            return Err(Error::InvalidDataset(format!(
                "{} feature values for {} rows of {d} columns",
                features.len(),
                labels.len()
            )));
        }
        if class_count < 2 {
            return Err(Error::InvalidDataset("class_count must be at least 2".into()));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / d,
                column: attributes[pos % d].clone(),
                value: features[pos].to_string(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::InvalidDataset(format!(
                "label {bad} is outside [0, {class_count})"
            )));
        }
        Ok(Self {
            attributes,
            features,
            labels,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.attributes.len()
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, row: usize) -> usize {
        self.labels[row]
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let d = self.dim();
        &self.features[row * d..(row + 1) * d]
    }

    pub fn value(&self, row: usize, attr: usize) -> f64 {
        self.features[row * self.dim() + attr]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.dim())
    }

    /// Per-class counts over the given rows.
    pub fn histogram(&self, rows: &[usize]) -> Vec<usize> {
        let mut hist = vec![0; self.class_count];
        for &i in rows {
            hist[self.labels[i]] += 1;
        }
        hist
    }

    /// Per-class counts over every row.
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0; self.class_count];
        for &l in &self.labels {
            hist[l] += 1;
        }
        hist
    }

    /// Copies the given rows, in order, into a new dataset with the same
    /// attributes and class count.
    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        let mut features = Vec::with_capacity(rows.len() * self.dim());
        let mut labels = Vec::with_capacity(rows.len());
        for &i in rows {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset::from_flat(self.attributes.clone(), features, labels, self.class_count)
    }

    /// Loads a CSV file with a header row. Every column except `label_column`
    /// becomes a feature, in file order.
    pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_csv(file, label_column)
    }

    pub fn read_csv<R: std::io::Read>(reader: R, label_column: &str) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
            return Err(Error::EmptyFile);
        }
        let label_idx = headers
            .iter()
            .position(|h| h.trim() == label_column)
            .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;
        let attributes: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != label_idx)
            .map(|(_, h)| h.trim().to_string())
            .collect();

        let mut features = Vec::new();
        let mut labels = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if record.len() != headers.len() {
                return Err(Error::InvalidDataset(format!(
                    "line {line} has {} fields, header has {}",
                    record.len(),
                    headers.len()
                )));
            }
            for (j, cell) in record.iter().enumerate() {
                let cell = cell.trim();
                if j == label_idx {
                    let label = cell.parse::<usize>().map_err(|_| Error::Parse {
                        row: line,
                        column: headers[j].to_string(),
                        value: cell.to_string(),
                        expected: "a non-negative integer class id",
                    })?;
                    labels.push(label);
                } else {
                    let v = cell.parse::<f64>().map_err(|_| Error::Parse {
                        row: line,
                        column: headers[j].to_string(),
                        value: cell.to_string(),
                        expected: "a number",
                    })?;
                    if !v.is_finite() {
                        return Err(Error::NonFinite {
                            row: line,
                            column: headers[j].to_string(),
                            value: cell.to_string(),
                        });
                    }
                    features.push(v);
                }
            }
        }
        if labels.is_empty() {
            return Err(Error::EmptyFile);
        }
        let class_count = labels.iter().copied().max().map_or(2, |m| (m + 1).max(2));
        Dataset::from_flat(attributes, features, labels, class_count)
    }

    /// Reads feature rows for prediction. A `label_column`, when present, is
    /// skipped; labels are not required.
    pub fn load_features(path: impl AsRef<Path>, label_column: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
        let headers = rdr.headers()?.clone();
        if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
            return Err(Error::EmptyFile);
        }
        let label_idx = headers.iter().position(|h| h.trim() == label_column);
        let attributes = headers
            .iter()
            .enumerate()
            .filter(|&(j, _)| Some(j) != label_idx)
            .map(|(_, h)| h.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let mut row = Vec::with_capacity(record.len());
            for (j, cell) in record.iter().enumerate() {
                if Some(j) == label_idx {
                    continue;
                }
                let cell = cell.trim();
                let v = cell.parse::<f64>().map_err(|_| Error::Parse {
                    row: line,
                    column: headers[j].to_string(),
                    value: cell.to_string(),
                    expected: "a number",
                })?;
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        row: line,
                        column: headers[j].to_string(),
                        value: cell.to_string(),
                    });
                }
                row.push(v);
            }
            rows.push(row);
        }
        Ok((attributes, rows))
    }

    /// Writes the dataset as CSV with the label as the last column.
    pub fn write_csv<W: std::io::Write>(&self, writer: W, label_column: &str) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.attributes.iter().map(String::as_str).collect();
        header.push(label_column);
        wtr.write_record(&header)?;
        for (row, &label) in self.rows().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(label.to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, label_column: &str) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file), label_column)
    }

    /// Z-scores every column with population statistics.
    pub fn standardize(&self) -> (Dataset, StandardizationParams) {
        let params = StandardizationParams::fit(self);
        let features = self.rows().flat_map(|r| params.apply(r)).collect();
        let ds = Dataset {
            attributes: self.attributes.clone(),
            features,
            labels: self.labels.clone(),
            class_count: self.class_count,
        };
        (ds, params)
    }
}

/// Per-column mean and standard deviation used for z-scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub mean: Vec<f64>,
    /// Constant columns store `1.0`.
    pub std: Vec<f64>,
}

impl StandardizationParams {
    pub fn fit(ds: &Dataset) -> Self {
        let d = ds.dim();
        let n = ds.len() as f64;
        let mut mean = vec![0.0; d];
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for row in ds.rows() {
            for j in 0..d {
                mean[j] += row[j];
                min[j] = min[j].min(row[j]);
                max[j] = max[j].max(row[j]);
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; d];
        for row in ds.rows() {
            for j in 0..d {
                let dv = row[j] - mean[j];
                var[j] += dv * dv;
            }
        }
        let std = (0..d)
            .map(|j| {
                let s = (var[j] / n).sqrt();
                if min[j] == max[j] || s == 0.0 {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        // a constant column maps to exactly zero
        for j in 0..d {
            if min[j] == max[j] {
                mean[j] = min[j];
            }
        }
        Self { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}
