//! Tabular datasets with mixed continuous/discrete columns and a class label.

mod csv_io;
mod folds;
pub mod synthetic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{infer_schema, load_csv, read_schema, write_csv, write_schema, DEFAULT_DISCRETE_THRESHOLD};
pub use folds::{stratified_folds, Fold, Folds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Category strings in one-hot order. Empty for continuous columns.
    #[serde(default)]
    pub categories: Vec<String>,
}

impl ColumnSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Continuous,
            categories: Vec::new(),
        }
    }

    pub fn discrete<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Discrete,
            categories: categories.into_iter().map(Into::into).collect(),
        }
    }

    pub fn is_continuous(&self) -> bool {
        self.kind == ColumnKind::Continuous
    }
}

/// Column layout of a dataset plus the ordered set of class labels.
///
/// The JSON form is `{"columns": [{"name", "kind", "categories"}], "target": "..."}`
/// with an optional `"classes"` list; when classes are omitted they are filled
/// in from the data at load time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub columns: Vec<ColumnSpec>,
    #[serde(rename = "target")]
    pub target_name: String,
    #[serde(rename = "classes", default, skip_serializing_if = "Vec::is_empty")]
    pub class_labels: Vec<String>,
}

impl DatasetSchema {
    pub fn new(columns: Vec<ColumnSpec>, target_name: impl Into<String>, class_labels: Vec<String>) -> Result<Self> {
        let schema = Self {
            columns,
            target_name: target_name.into(),
            class_labels,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for col in &self.columns {
            if !seen.insert(col.name.as_str()) {
                return Err(Error::InvalidSchema(format!("duplicate column `{}`", col.name)));
            }
            match col.kind {
                ColumnKind::Discrete if col.categories.is_empty() => {
                    return Err(Error::InvalidSchema(format!(
                        "discrete column `{}` has no categories",
                        col.name
                    )))
                }
                ColumnKind::Continuous if !col.categories.is_empty() => {
                    return Err(Error::InvalidSchema(format!(
                        "continuous column `{}` lists categories",
                        col.name
                    )))
                }
                _ => {}
            }
            let distinct: std::collections::BTreeSet<_> = col.categories.iter().collect();
            if distinct.len() != col.categories.len() {
                return Err(Error::InvalidSchema(format!(
                    "column `{}` repeats a category",
                    col.name
                )));
            }
        }
        if seen.contains(self.target_name.as_str()) {
            return Err(Error::InvalidSchema(format!(
                "target `{}` is also a feature column",
                self.target_name
            )));
        }
        if self.class_labels.len() < 2 {
            return Err(Error::InvalidSchema(format!(
                "need at least 2 classes, found {}",
                self.class_labels.len()
            )));
        }
        let distinct: std::collections::BTreeSet<_> = self.class_labels.iter().collect();
        if distinct.len() != self.class_labels.len() {
            return Err(Error::InvalidSchema("class labels repeat".into()));
        }
        Ok(())
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_labels.len()
    }

    /// Schema positions of the continuous columns, in schema order.
    pub fn continuous_indices(&self) -> Vec<usize> {
        self.indices_of(ColumnKind::Continuous)
    }

    /// Schema positions of the discrete columns, in schema order.
    pub fn discrete_indices(&self) -> Vec<usize> {
        self.indices_of(ColumnKind::Discrete)
    }

    fn indices_of(&self, kind: ColumnKind) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == kind)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.class_labels.iter().position(|c| c == label)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).expect("schema serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// A validated table: `m` rows over the schema's columns plus one class index
/// per row. Discrete cells hold their category index (stored as `f64`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: DatasetSchema,
    values: Vec<f64>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(schema: DatasetSchema, values: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        schema.validate()?;
        let n = schema.n_columns();
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if values.len() != labels.len() * n {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * n,
                actual: values.len(),
            });
        }
        for (i, row) in values.chunks(n.max(1)).enumerate().take(labels.len()) {
            check_row(&schema, row, i)?;
        }
        for &y in &labels {
            if y >= schema.n_classes() {
                return Err(Error::IndexOutOfRange {
                    what: "class label",
                    index: y,
                    size: schema.n_classes(),
                });
            }
        }
        Ok(Self { schema, values, labels })
    }

    /// Builds a dataset from row vectors.
    pub fn from_rows(schema: DatasetSchema, rows: &[Vec<f64>], labels: Vec<usize>) -> Result<Self> {
        let values = rows.iter().flat_map(|r| r.iter().copied()).collect();
        if let Some(bad) = rows.iter().find(|r| r.len() != schema.n_columns()) {
            return Err(Error::DimensionMismatch {
                expected: schema.n_columns(),
                actual: bad.len(),
            });
        }
        Self::new(schema, values, labels)
    }

    pub fn schema(&self) -> &DatasetSchema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_columns(&self) -> usize {
        self.schema.n_columns()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n_columns();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_columns() + col]
    }

    pub fn category(&self, row: usize, col: usize) -> usize {
        self.value(row, col) as usize
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.schema.n_classes()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let n = self.n_columns();
        let mut values = Vec::with_capacity(indices.len() * n);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            schema: self.schema.clone(),
            values,
            labels,
        }
    }

    /// Appends validated rows; returns the extended dataset.
    pub fn extended(&self, rows: &[Vec<f64>], labels: &[usize]) -> Result<Dataset> {
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: labels.len(),
            });
        }
        let mut values = self.values.clone();
        let mut all_labels = self.labels.clone();
        for (i, (row, &y)) in rows.iter().zip(labels).enumerate() {
            if row.len() != self.n_columns() {
                return Err(Error::DimensionMismatch {
                    expected: self.n_columns(),
                    actual: row.len(),
                });
            }
            check_row(&self.schema, row, self.n_rows() + i)?;
            if y >= self.schema.n_classes() {
                return Err(Error::IndexOutOfRange {
                    what: "class label",
                    index: y,
                    size: self.schema.n_classes(),
                });
            }
            values.extend_from_slice(row);
            all_labels.push(y);
        }
        Ok(Dataset {
            schema: self.schema.clone(),
            values,
            labels: all_labels,
        })
    }
}

fn check_row(schema: &DatasetSchema, row: &[f64], index: usize) -> Result<()> {
    for (col, &v) in schema.columns.iter().zip(row) {
        match col.kind {
            ColumnKind::Continuous => {
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue {
                        column: col.name.clone(),
                        row: index,
                        value: v.to_string(),
                    });
                }
            }
            ColumnKind::Discrete => {
                if v < 0.0 || v.fract() != 0.0 || v as usize >= col.categories.len() {
                    return Err(Error::UnknownCategory {
                        column: col.name.clone(),
                        value: v.to_string(),
                    });
                }
            }
        }
    }
    Ok(())
}
