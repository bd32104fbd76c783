use std::path::Path;

use serde::{Deserialize, Serialize};

use super::schema::{ColumnKind, ColumnSchema, Schema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Number(f64),
    Category(String),
    Missing,
}

/// A typed table. Drop-columns are already removed; `columns[i]` describes
/// the i-th cell of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub columns: Vec<ColumnSchema>,
    pub rows: Vec<Vec<Cell>>,
    pub label_col: usize,
}

impl RawDataset {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Number of feature columns (everything but the label).
    pub fn n_features(&self) -> usize {
        self.columns.len() - 1
    }

    /// Label strings per row; `None` where the label cell is missing.
    pub fn label_strings(&self) -> Vec<Option<&str>> {
        self.rows
            .iter()
            .map(|r| match &r[self.label_col] {
                Cell::Category(s) => Some(s.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn missing_count(&self) -> usize {
        self.rows
            .iter()
            .flatten()
            .filter(|c| matches!(c, Cell::Missing))
            .count()
    }
}

fn is_missing_token(s: &str) -> bool {
    matches!(s, "" | "?" | "NA" | "nan" | "NaN")
}

/// Load a headered CSV file typed by `schema`.
pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<RawDataset> {
    let file = std::fs::File::open(path)?;
    let ds = read_rows(file, schema, true)?;
    if ds.rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(ds)
}

/// Parse CSV rows from any reader. With `require_label = false` the label
/// column may be absent from the header (its cells become `Missing`), which
/// is how single instances are supplied for explanation.
pub fn read_rows<R: std::io::Read>(
    reader: R,
    schema: &Schema,
    require_label: bool,
) -> Result<RawDataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(Error::EmptyDataset);
    }

    for h in &header {
        if schema.get(h).is_none() {
            return Err(Error::UnknownColumn(h.clone()));
        }
    }

    let kept: Vec<ColumnSchema> = schema
        .columns
        .iter()
        .filter(|c| c.kind != ColumnKind::Drop)
        .cloned()
        .collect();
    // Position of each kept column in the file, if present.
    let mut source_pos = Vec::with_capacity(kept.len());
    for c in &kept {
        let pos = header.iter().position(|h| h == &c.name);
        if pos.is_none() && (c.kind != ColumnKind::Label || require_label) {
            return Err(Error::MissingColumn(c.name.clone()));
        }
        source_pos.push(pos);
    }
    let label_col = kept
        .iter()
        .position(|c| c.kind == ColumnKind::Label)
        .expect("validated schema has a label");

    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(kept.len());
        for (c, pos) in kept.iter().zip(&source_pos) {
            let raw = pos.and_then(|p| record.get(p)).unwrap_or("");
            let cell = if is_missing_token(raw) {
                if c.kind == ColumnKind::Label && require_label {
                    return Err(Error::ParseFailure {
                        row: i,
                        col: c.name.clone(),
                        value: raw.to_string(),
                    });
                }
                Cell::Missing
            } else if c.kind == ColumnKind::Numeric {
                let v: f64 = raw.parse().map_err(|_| Error::ParseFailure {
                    row: i,
                    col: c.name.clone(),
                    value: raw.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(Error::ParseFailure {
                        row: i,
                        col: c.name.clone(),
                        value: raw.to_string(),
                    });
                }
                Cell::Number(v)
            } else {
                Cell::Category(raw.to_string())
            };
            row.push(cell);
        }
        rows.push(row);
    }

    Ok(RawDataset {
        columns: kept,
        rows,
        label_col,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema::new(vec![
            ColumnSchema::new("RowNumber", ColumnKind::Drop),
            ColumnSchema::new("age", ColumnKind::Numeric),
            ColumnSchema::new("color", ColumnKind::Nominal),
            ColumnSchema::new("y", ColumnKind::Label),
        ])
        .unwrap()
    }

    #[test]
    fn drops_columns_and_records_missing() {
        let csv = "RowNumber,age,color,y\n1,30,red,a\n2,?,,b\n";
        let ds = read_rows(csv.as_bytes(), &schema(), true).unwrap();
        assert_eq!(ds.columns.len(), 3);
        assert_eq!(ds.rows[0][0], Cell::Number(30.0));
        assert_eq!(ds.rows[1][0], Cell::Missing);
        assert_eq!(ds.rows[1][1], Cell::Missing);
        assert_eq!(ds.missing_count(), 2);
        assert_eq!(ds.label_col, 2);
    }

    #[test]
    fn empty_file_with_header_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        std::fs::write(&path, "RowNumber,age,color,y\n").unwrap();
        assert!(matches!(
            load_dataset(&path, &schema()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn unparsable_numeric_reports_position() {
        let csv = "RowNumber,age,color,y\n1,30,red,a\n2,abc,red,b\n";
        match read_rows(csv.as_bytes(), &schema(), true) {
            Err(Error::ParseFailure { row, col, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(col, "age");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_and_missing_columns() {
        let csv = "RowNumber,age,color,y,extra\n1,30,red,a,0\n";
        assert!(matches!(
            read_rows(csv.as_bytes(), &schema(), true),
            Err(Error::UnknownColumn(c)) if c == "extra"
        ));
        let csv = "RowNumber,age,y\n1,30,a\n";
        assert!(matches!(
            read_rows(csv.as_bytes(), &schema(), true),
            Err(Error::MissingColumn(c)) if c == "color"
        ));
    }

    #[test]
    fn label_optional_for_instances() {
        let csv = "age,color\n30,red\n";
        let ds = read_rows(csv.as_bytes(), &schema(), false).unwrap();
        assert_eq!(ds.rows[0][2], Cell::Missing);
    }
}
