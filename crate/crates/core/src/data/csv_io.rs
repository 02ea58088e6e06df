use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use super::{ColumnKind, ColumnSpec, Dataset, DatasetSchema};
use crate::error::{Error, Result};

/// Distinct-value count at or below which a numeric column is treated as discrete.
pub const DEFAULT_DISCRETE_THRESHOLD: usize = 20;

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

pub fn read_schema(path: impl AsRef<Path>) -> Result<DatasetSchema> {
    let path = path.as_ref();
    let schema: DatasetSchema = serde_json::from_reader(open(path)?)?;
    Ok(schema)
}

pub fn write_schema(schema: &DatasetSchema, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(&mut f, schema)?;
    f.write_all(b"\n").map_err(|e| Error::io(path, e))
}

/// Reads a CSV file against `schema`.
///
/// If the schema carries no class labels they are taken from the target
/// column in first-appearance order.
pub fn load_csv(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<Dataset> {
    let path = path.as_ref();
    load_from_reader(open(path)?, schema)
}

pub(crate) fn load_from_reader<R: Read>(input: R, schema: &DatasetSchema) -> Result<Dataset> {
    let mut rdr = reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let position = |name: &str| header.iter().position(|h| h == name);

    let col_pos = schema
        .columns
        .iter()
        .map(|c| position(&c.name).ok_or_else(|| Error::MissingColumn(c.name.clone())))
        .collect::<Result<Vec<_>>>()?;
    let target_pos = position(&schema.target_name).ok_or_else(|| Error::MissingColumn(schema.target_name.clone()))?;

    let mut schema = schema.clone();
    let infer_classes = schema.class_labels.is_empty();
    let mut values = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();

    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for (col, &pos) in schema.columns.iter().zip(&col_pos) {
            let cell = record.get(pos).unwrap_or("");
            values.push(parse_cell(col, cell, row)?);
        }
        raw_labels.push(record.get(target_pos).unwrap_or("").to_owned());
    }
    if raw_labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if infer_classes {
        schema.class_labels = first_appearance(raw_labels.iter().map(String::as_str));
    }
    let labels = raw_labels
        .iter()
        .map(|l| {
            schema.class_index(l).ok_or_else(|| Error::UnknownCategory {
                column: schema.target_name.clone(),
                value: l.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(schema, values, labels)
}

fn parse_cell(col: &ColumnSpec, cell: &str, row: usize) -> Result<f64> {
    match col.kind {
        ColumnKind::Continuous => match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::NonFiniteValue {
                column: col.name.clone(),
                row,
                value: cell.to_owned(),
            }),
        },
        ColumnKind::Discrete => col
            .categories
            .iter()
            .position(|c| c == cell)
            .map(|i| i as f64)
            .ok_or_else(|| Error::UnknownCategory {
                column: col.name.clone(),
                value: cell.to_owned(),
            }),
    }
}

fn first_appearance<'a>(values: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for v in values {
        if seen.insert(v) {
            out.push(v.to_owned());
        }
    }
    out
}

/// Guesses a schema from a CSV file.
///
/// A column is discrete if any cell fails to parse as a finite number, or if
/// it has at most `discrete_threshold` distinct values. Categories and class
/// labels keep their first-appearance order.
pub fn infer_schema(path: impl AsRef<Path>, target_name: &str, discrete_threshold: usize) -> Result<DatasetSchema> {
    let path = path.as_ref();
    infer_from_reader(open(path)?, target_name, discrete_threshold)
}

pub(crate) fn infer_from_reader<R: Read>(
    input: R,
    target_name: &str,
    discrete_threshold: usize,
) -> Result<DatasetSchema> {
    let mut rdr = reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let target_pos = header
        .iter()
        .position(|h| h == target_name)
        .ok_or_else(|| Error::TargetMissing(target_name.to_owned()))?;

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for record in rdr.records() {
        let record = record?;
        for (j, column) in cells.iter_mut().enumerate() {
            column.push(record.get(j).unwrap_or("").to_owned());
        }
    }
    if cells[target_pos].is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut columns = Vec::new();
    for (j, name) in header.iter().enumerate() {
        if j == target_pos {
            continue;
        }
        let col = &cells[j];
        let numeric = col
            .iter()
            .all(|c| c.parse::<f64>().map(f64::is_finite).unwrap_or(false));
        let distinct = first_appearance(col.iter().map(String::as_str));
        if !numeric || distinct.len() <= discrete_threshold {
            columns.push(ColumnSpec::discrete(name.clone(), distinct));
        } else {
            columns.push(ColumnSpec::continuous(name.clone()));
        }
    }
    let classes = first_appearance(cells[target_pos].iter().map(String::as_str));
    DatasetSchema::new(columns, target_name, classes)
}

/// Writes a dataset with a header of the schema columns followed by the target.
/// Reals are written in shortest round-trip form.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_to(ds, file)
}

pub(crate) fn write_to<W: Write>(ds: &Dataset, out: W) -> Result<()> {
    let schema = ds.schema();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    header.push(&schema.target_name);
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for (row, &y) in ds.rows().zip(ds.labels()) {
        record.clear();
        for (col, &v) in schema.columns.iter().zip(row) {
            record.push(match col.kind {
                ColumnKind::Continuous => format!("{v}"),
                ColumnKind::Discrete => col.categories[v as usize].clone(),
            });
        }
        record.push(schema.class_labels[y].clone());
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}
