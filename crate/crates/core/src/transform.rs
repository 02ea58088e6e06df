//! Cluster-wise min-max scaling and one-hot encoding of rows.
//!
//! A transformed row is laid out as
//! `[continuous (n_c) | one-hot per discrete column | cluster (k) | class (|Y|)]`.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DatasetSchema};
use crate::error::{Error, Result};
use crate::partition::ClusterModel;

/// Per (cluster, continuous column) `[min, max]`, stored as `[k][n_c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerStats {
    pub ranges: Vec<Vec<[f64; 2]>>,
}

impl ScalerStats {
    pub fn range(&self, u: usize, j: usize) -> Result<(f64, f64)> {
        let r = self
            .ranges
            .get(u)
            .and_then(|row| row.get(j))
            .ok_or(Error::UnknownClusterColumn { cluster: u, column: j })?;
        Ok((r[0], r[1]))
    }
}

/// Maps a value of column `j` in cluster `u` to `[-1, 1]`.
///
/// Values outside the fitted range are clamped; a degenerate range maps to 0.
pub fn scale_continuous(value: f64, u: usize, j: usize, stats: &ScalerStats) -> Result<f64> {
    let (lo, hi) = stats.range(u, j)?;
    if hi <= lo {
        return Ok(0.0);
    }
    Ok((2.0 * (value - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0))
}

pub fn unscale_continuous(scaled: f64, u: usize, j: usize, stats: &ScalerStats) -> Result<f64> {
    let (lo, hi) = stats.range(u, j)?;
    let s = scaled.clamp(-1.0, 1.0);
    Ok((s + 1.0) / 2.0 * (hi - lo) + lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SegmentKind {
    Continuous,
    /// One-hot block of the schema column with this index.
    Discrete {
        column: usize,
    },
    Cluster,
    Class,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    #[serde(flatten)]
    pub kind: SegmentKind,
    pub offset: usize,
    pub width: usize,
}

impl Segment {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.width
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub segments: Vec<Segment>,
    pub width: usize,
}

impl Layout {
    fn build(n_continuous: usize, discrete: &[(usize, usize)], k: usize, n_classes: usize) -> Self {
        let mut segments = Vec::new();
        let mut offset = 0;
        let mut push = |kind, width| {
            segments.push(Segment { kind, offset, width });
            offset += width;
        };
        push(SegmentKind::Continuous, n_continuous);
        for &(column, width) in discrete {
            push(SegmentKind::Discrete { column }, width);
        }
        push(SegmentKind::Cluster, k);
        push(SegmentKind::Class, n_classes);
        Layout {
            segments,
            width: offset,
        }
    }

    pub fn continuous(&self) -> Segment {
        self.segments[0]
    }

    pub fn cluster(&self) -> Segment {
        self.segments[self.segments.len() - 2]
    }

    pub fn class(&self) -> Segment {
        self.segments[self.segments.len() - 1]
    }

    /// One-hot blocks of the discrete columns, in schema order.
    pub fn discrete(&self) -> &[Segment] {
        &self.segments[1..self.segments.len() - 2]
    }

    pub fn discrete_for_column(&self, column: usize) -> Option<Segment> {
        self.discrete()
            .iter()
            .copied()
            .find(|s| s.kind == SegmentKind::Discrete { column })
    }
}

/// Everything needed to move between raw rows and model vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformPipeline {
    pub continuous_columns: Vec<usize>,
    pub discrete_columns: Vec<usize>,
    /// Ordered category lists, one per discrete column.
    pub categories: Vec<Vec<String>>,
    pub class_labels: Vec<String>,
    pub k: usize,
    pub stats: ScalerStats,
    pub layout: Layout,
    pub column_names: Vec<String>,
}

/// Decoded form of a model vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedRow {
    pub values: Vec<f64>,
    pub cluster: usize,
    pub class: usize,
}

impl TransformPipeline {
    pub fn fit(ds: &Dataset, clusters: &ClusterModel) -> Result<Self> {
        Self::fit_assignments(ds, &clusters.assignments, clusters.k)
    }

    /// Fits from raw assignments; empty clusters fall back to the global range.
    pub fn fit_assignments(ds: &Dataset, assignments: &[usize], k: usize) -> Result<Self> {
        if assignments.len() != ds.n_rows() {
            return Err(Error::LengthMismatch {
                left: assignments.len(),
                right: ds.n_rows(),
            });
        }
        let schema = ds.schema();
        let continuous_columns = schema.continuous_indices();
        let discrete_columns = schema.discrete_indices();
        let n_c = continuous_columns.len();

        let empty = [f64::INFINITY, f64::NEG_INFINITY];
        let mut ranges = vec![vec![empty; n_c]; k];
        let mut global = vec![empty; n_c];
        for (i, &u) in assignments.iter().enumerate() {
            if u >= k {
                return Err(Error::IndexOutOfRange {
                    what: "cluster",
                    index: u,
                    size: k,
                });
            }
            for (j, &c) in continuous_columns.iter().enumerate() {
                let v = ds.value(i, c);
                for r in [&mut ranges[u][j], &mut global[j]] {
                    r[0] = r[0].min(v);
                    r[1] = r[1].max(v);
                }
            }
        }
        for row in &mut ranges {
            for (r, g) in row.iter_mut().zip(&global) {
                if r[0] > r[1] {
                    *r = *g;
                }
            }
        }

        let categories: Vec<Vec<String>> = discrete_columns
            .iter()
            .map(|&c| schema.columns[c].categories.clone())
            .collect();
        let blocks: Vec<(usize, usize)> = discrete_columns
            .iter()
            .zip(&categories)
            .map(|(&c, cats)| (c, cats.len()))
            .collect();
        let layout = Layout::build(n_c, &blocks, k, schema.n_classes());
        Ok(Self {
            continuous_columns,
            discrete_columns,
            categories,
            class_labels: schema.class_labels.clone(),
            k,
            stats: ScalerStats { ranges },
            layout,
            column_names: schema.columns.iter().map(|c| c.name.clone()).collect(),
        })
    }

    pub fn width(&self) -> usize {
        self.layout.width
    }

    pub fn n_classes(&self) -> usize {
        self.class_labels.len()
    }

    pub fn n_columns(&self) -> usize {
        self.column_names.len()
    }

    /// True when `schema` has the column structure this pipeline was fitted on.
    pub fn matches_schema(&self, schema: &DatasetSchema) -> bool {
        schema.columns.iter().map(|c| &c.name).eq(self.column_names.iter())
            && schema.continuous_indices() == self.continuous_columns
            && schema.discrete_indices() == self.discrete_columns
            && self
                .discrete_columns
                .iter()
                .zip(&self.categories)
                .all(|(&c, cats)| &schema.columns[c].categories == cats)
            && schema.class_labels == self.class_labels
    }

    pub fn transform_row(&self, row: &[f64], u: usize, y: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.width()];
        self.transform_into(row, u, y, &mut out)?;
        Ok(out)
    }

    fn transform_into(&self, row: &[f64], u: usize, y: usize, out: &mut [f64]) -> Result<()> {
        if row.len() != self.n_columns() {
            return Err(Error::DimensionMismatch {
                expected: self.n_columns(),
                actual: row.len(),
            });
        }
        if u >= self.k {
            return Err(Error::IndexOutOfRange {
                what: "cluster",
                index: u,
                size: self.k,
            });
        }
        if y >= self.n_classes() {
            return Err(Error::IndexOutOfRange {
                what: "class",
                index: y,
                size: self.n_classes(),
            });
        }
        let base = self.layout.continuous().offset;
        for (j, &c) in self.continuous_columns.iter().enumerate() {
            out[base + j] = scale_continuous(row[c], u, j, &self.stats)?;
        }
        for (seg, cats) in self.layout.discrete().iter().zip(&self.categories) {
            let SegmentKind::Discrete { column } = seg.kind else {
                unreachable!()
            };
            let v = row[column];
            if !(v >= 0.0 && v.fract() == 0.0 && (v as usize) < cats.len()) {
                return Err(Error::UnknownCategory {
                    column: self.column_names[column].clone(),
                    value: v.to_string(),
                });
            }
            out[seg.offset + v as usize] = 1.0;
        }
        out[self.layout.cluster().offset + u] = 1.0;
        out[self.layout.class().offset + y] = 1.0;
        Ok(())
    }

    /// Transforms every row of `ds` with its assigned cluster and label.
    pub fn transform_dataset(&self, ds: &Dataset, assignments: &[usize]) -> Result<Array2<f64>> {
        if assignments.len() != ds.n_rows() {
            return Err(Error::LengthMismatch {
                left: assignments.len(),
                right: ds.n_rows(),
            });
        }
        let mut out = Array2::zeros((ds.n_rows(), self.width()));
        for (i, mut dst) in out.rows_mut().into_iter().enumerate() {
            let slot = dst.as_slice_mut().expect("standard layout");
            self.transform_into(ds.row(i), assignments[i], ds.labels()[i], slot)?;
        }
        Ok(out)
    }

    /// Decodes a (possibly soft) model vector, using its own cluster block to
    /// pick the scaling range.
    pub fn inverse_transform_row(&self, x: ArrayView1<f64>) -> Result<DecodedRow> {
        if x.len() != self.width() {
            return Err(Error::WidthMismatch {
                expected: self.width(),
                actual: x.len(),
            });
        }
        let cluster = argmax(x, self.layout.cluster());
        let class = argmax(x, self.layout.class());
        let mut values = vec![0.0; self.n_columns()];
        let base = self.layout.continuous().offset;
        for (j, &c) in self.continuous_columns.iter().enumerate() {
            values[c] = unscale_continuous(x[base + j], cluster, j, &self.stats)?;
        }
        for seg in self.layout.discrete() {
            let SegmentKind::Discrete { column } = seg.kind else {
                unreachable!()
            };
            values[column] = argmax(x, *seg) as f64;
        }
        Ok(DecodedRow { values, cluster, class })
    }
}

/// Index of the largest entry within `seg`; the first wins ties.
pub fn argmax(x: ArrayView1<f64>, seg: Segment) -> usize {
    let mut best = 0;
    for i in 1..seg.width {
        if x[seg.offset + i] > x[seg.offset + best] {
            best = i;
        }
    }
    best
}
