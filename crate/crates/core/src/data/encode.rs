use std::collections::BTreeSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::load::{Cell, RawDataset};
use super::schema::ColumnKind;
use super::MISSING_CATEGORY;
use crate::error::{Error, Result};

/// How one encoded column relates to its raw source feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum EncodingRole {
    NumericScaled { min: f64, max: f64 },
    Onehot { category: String },
    Ordinal { order: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedColumn {
    pub source: String,
    #[serde(flatten)]
    pub role: EncodingRole,
}

/// Per-feature transform parameters fitted on the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedColumn {
    Numeric {
        name: String,
        min: f64,
        max: f64,
        median: f64,
    },
    Nominal {
        name: String,
        categories: Vec<String>,
    },
    Ordinal {
        name: String,
        order: Vec<String>,
    },
}

impl FittedColumn {
    fn width(&self) -> usize {
        match self {
            FittedColumn::Nominal { categories, .. } => categories.len(),
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub columns: Vec<FittedColumn>,
    pub class_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedDataset {
    #[serde(with = "crate::matrix::serde_array2_shaped")]
    pub x: Array2<f64>,
    pub y: Vec<usize>,
    pub col_map: Vec<EncodedColumn>,
    pub class_names: Vec<String>,
    pub encoder: Encoder,
    /// Cells whose nominal category was not seen while fitting.
    pub unseen_categories: usize,
}

impl EncodedDataset {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// `(feature, min, max)` for every numeric feature.
    pub fn minmax_params(&self) -> Vec<(String, f64, f64)> {
        self.encoder
            .columns
            .iter()
            .filter_map(|c| match c {
                FittedColumn::Numeric { name, min, max, .. } => Some((name.clone(), *min, *max)),
                _ => None,
            })
            .collect()
    }

    pub fn rows(&self, idx: &[usize]) -> (Array2<f64>, Vec<usize>) {
        (
            crate::matrix::select_rows(&self.x, idx),
            idx.iter().map(|&i| self.y[i]).collect(),
        )
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn sort_labels(labels: &mut [String]) {
    let numeric: Option<Vec<f64>> = labels.iter().map(|s| s.parse::<f64>().ok()).collect();
    if numeric.is_some() {
        labels.sort_by(|a, b| {
            a.parse::<f64>()
                .unwrap()
                .total_cmp(&b.parse::<f64>().unwrap())
        });
    } else {
        labels.sort();
    }
}

fn category_of(cell: &Cell) -> &str {
    match cell {
        Cell::Category(s) => s,
        _ => MISSING_CATEGORY,
    }
}

impl Encoder {
    /// Fit scaling ranges, medians and vocabularies on the `fit_idx` rows.
    /// Class names are taken from every labelled row so that labels form
    /// one contiguous range across all folds.
    pub fn fit(raw: &RawDataset, fit_idx: &[usize]) -> Result<Self> {
        if fit_idx.is_empty() {
            return Err(Error::EmptyInput("encoder fit rows"));
        }
        let mut columns = Vec::with_capacity(raw.n_features());
        for (ci, col) in raw.columns.iter().enumerate() {
            let fitted = match col.kind {
                ColumnKind::Label => continue,
                ColumnKind::Drop => unreachable!("drop columns removed at load"),
                ColumnKind::Numeric => {
                    let mut vals: Vec<f64> = fit_idx
                        .iter()
                        .filter_map(|&i| match raw.rows[i][ci] {
                            Cell::Number(v) => Some(v),
                            _ => None,
                        })
                        .collect();
                    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let (min, max) = if vals.is_empty() { (0.0, 0.0) } else { (min, max) };
                    FittedColumn::Numeric {
                        name: col.name.clone(),
                        min,
                        max,
                        median: median(&mut vals),
                    }
                }
                ColumnKind::Nominal => {
                    let cats: BTreeSet<&str> = fit_idx
                        .iter()
                        .map(|&i| category_of(&raw.rows[i][ci]))
                        .collect();
                    FittedColumn::Nominal {
                        name: col.name.clone(),
                        categories: cats.into_iter().map(str::to_string).collect(),
                    }
                }
                ColumnKind::Ordinal => FittedColumn::Ordinal {
                    name: col.name.clone(),
                    order: col.ordinal_order.clone().expect("validated schema"),
                },
            };
            columns.push(fitted);
        }

        let labels: BTreeSet<&str> = raw.label_strings().into_iter().flatten().collect();
        let mut class_names: Vec<String> = labels.into_iter().map(str::to_string).collect();
        sort_labels(&mut class_names);
        Ok(Self {
            columns,
            class_names,
        })
    }

    pub fn width(&self) -> usize {
        self.columns.iter().map(FittedColumn::width).sum()
    }

    pub fn col_map(&self) -> Vec<EncodedColumn> {
        let mut out = Vec::with_capacity(self.width());
        for c in &self.columns {
            match c {
                FittedColumn::Numeric { name, min, max, .. } => out.push(EncodedColumn {
                    source: name.clone(),
                    role: EncodingRole::NumericScaled {
                        min: *min,
                        max: *max,
                    },
                }),
                FittedColumn::Nominal { name, categories } => {
                    out.extend(categories.iter().map(|cat| EncodedColumn {
                        source: name.clone(),
                        role: EncodingRole::Onehot {
                            category: cat.clone(),
                        },
                    }))
                }
                FittedColumn::Ordinal { name, order } => out.push(EncodedColumn {
                    source: name.clone(),
                    role: EncodingRole::Ordinal {
                        order: order.clone(),
                    },
                }),
            }
        }
        out
    }

    /// Apply the fitted transform. Returns the design matrix, labels
    /// (`None` for unlabelled rows) and the count of unseen categories.
    pub fn transform(&self, raw: &RawDataset) -> Result<(Array2<f64>, Vec<Option<usize>>, usize)> {
        let feature_cols: Vec<usize> = (0..raw.columns.len())
            .filter(|&i| i != raw.label_col)
            .collect();
        if feature_cols.len() != self.columns.len() {
            return Err(Error::shape(
                "encoder feature columns",
                self.columns.len(),
                feature_cols.len(),
            ));
        }
        let width = self.width();
        let mut x = Array2::<f64>::zeros((raw.n_rows(), width));
        let mut unseen = 0usize;

        for (r, row) in raw.rows.iter().enumerate() {
            let mut offset = 0;
            for (fitted, &ci) in self.columns.iter().zip(&feature_cols) {
                let cell = &row[ci];
                match fitted {
                    FittedColumn::Numeric {
                        min, max, median, ..
                    } => {
                        let v = match cell {
                            Cell::Number(v) => *v,
                            _ => *median,
                        };
                        x[[r, offset]] = if max > min {
                            ((v - min) / (max - min)).clamp(0.0, 1.0)
                        } else {
                            0.0
                        };
                    }
                    FittedColumn::Nominal { categories, .. } => {
                        let cat = category_of(cell);
                        match categories.binary_search_by(|c| c.as_str().cmp(cat)) {
                            Ok(k) => x[[r, offset + k]] = 1.0,
                            Err(_) => unseen += 1,
                        }
                    }
                    FittedColumn::Ordinal { name, order } => {
                        let cat = category_of(cell);
                        let k = order.iter().position(|o| o == cat).ok_or_else(|| {
                            Error::UnknownOrdinal {
                                column: name.clone(),
                                value: cat.to_string(),
                            }
                        })?;
                        x[[r, offset]] = k as f64;
                    }
                }
                offset += fitted.width();
            }
        }

        let mut y = Vec::with_capacity(raw.n_rows());
        for (r, label) in raw.label_strings().into_iter().enumerate() {
            y.push(match label {
                None => None,
                Some(s) => Some(self.class_names.iter().position(|c| c == s).ok_or_else(
                    || Error::ParseFailure {
                        row: r,
                        col: raw.columns[raw.label_col].name.clone(),
                        value: s.to_string(),
                    },
                )?),
            });
        }
        Ok((x, y, unseen))
    }

    /// Transform a fully labelled dataset.
    pub fn transform_dataset(&self, raw: &RawDataset) -> Result<EncodedDataset> {
        let (x, y, unseen) = self.transform(raw)?;
        let y = y
            .into_iter()
            .enumerate()
            .map(|(r, v)| {
                v.ok_or_else(|| Error::ParseFailure {
                    row: r,
                    col: raw.columns[raw.label_col].name.clone(),
                    value: String::new(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EncodedDataset {
            x,
            y,
            col_map: self.col_map(),
            class_names: self.class_names.clone(),
            encoder: self.clone(),
            unseen_categories: unseen,
        })
    }
}

/// Fit on `fit_idx` rows and encode every row of `raw`.
pub fn encode(raw: &RawDataset, fit_idx: &[usize]) -> Result<EncodedDataset> {
    Encoder::fit(raw, fit_idx)?.transform_dataset(raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::load::read_rows;
    use crate::data::schema::{ColumnSchema, Schema};

    fn raw(csv: &str, schema: Vec<ColumnSchema>) -> RawDataset {
        read_rows(csv.as_bytes(), &Schema::new(schema).unwrap(), true).unwrap()
    }

    fn num_schema() -> Vec<ColumnSchema> {
        vec![
            ColumnSchema::new("v", ColumnKind::Numeric),
            ColumnSchema::new("y", ColumnKind::Label),
        ]
    }

    #[test]
    fn minmax_scales_to_unit_interval() {
        let r = raw("v,y\n0,a\n5,b\n10,a\n", num_schema());
        let e = encode(&r, &[0, 1, 2]).unwrap();
        assert_eq!(e.x.column(0).to_vec(), vec![0.0, 0.5, 1.0]);
        assert_eq!(e.minmax_params(), vec![("v".to_string(), 0.0, 10.0)]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let r = raw("v,y\n7,a\n7,b\n7,a\n", num_schema());
        let e = encode(&r, &[0, 1, 2]).unwrap();
        assert_eq!(e.x.column(0).to_vec(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn out_of_range_values_are_clamped_and_missing_imputed() {
        let r = raw("v,y\n0,a\n10,b\n20,a\n-5,b\n?,a\n4,b\n", num_schema());
        let e = encode(&r, &[0, 1, 5]).unwrap();
        let col = e.x.column(0).to_vec();
        assert_eq!(col[2], 1.0);
        assert_eq!(col[3], 0.0);
        // median of {0, 10, 4} = 4
        assert!((col[4] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn onehot_includes_every_category() {
        let r = raw(
            "c,y\nred,a\nblue,b\nred,b\n",
            vec![
                ColumnSchema::new("c", ColumnKind::Nominal),
                ColumnSchema::new("y", ColumnKind::Label),
            ],
        );
        let e = encode(&r, &[0, 1, 2]).unwrap();
        // vocabulary sorted: blue, red
        assert_eq!(e.x.row(0).to_vec(), vec![0.0, 1.0]);
        assert_eq!(e.x.row(1).to_vec(), vec![1.0, 0.0]);
        assert_eq!(
            e.col_map[1].role,
            EncodingRole::Onehot {
                category: "red".into()
            }
        );
    }

    #[test]
    fn unseen_category_gives_zero_group() {
        let r = raw(
            "c,y\nred,a\nblue,b\ngreen,b\n",
            vec![
                ColumnSchema::new("c", ColumnKind::Nominal),
                ColumnSchema::new("y", ColumnKind::Label),
            ],
        );
        let e = encode(&r, &[0, 1]).unwrap();
        assert_eq!(e.x.row(2).sum(), 0.0);
        assert_eq!(e.unseen_categories, 1);
    }

    #[test]
    fn missing_nominal_is_its_own_category() {
        let r = raw(
            "c,y\nred,a\n,b\n",
            vec![
                ColumnSchema::new("c", ColumnKind::Nominal),
                ColumnSchema::new("y", ColumnKind::Label),
            ],
        );
        let e = encode(&r, &[0, 1]).unwrap();
        assert!(e.col_map.iter().any(|c| c.role
            == EncodingRole::Onehot {
                category: MISSING_CATEGORY.into()
            }));
        assert_eq!(e.x.row(1).sum(), 1.0);
    }

    #[test]
    fn ordinal_uses_declared_rank_and_rejects_unknown() {
        let schema = vec![
            ColumnSchema::ordinal("s", &["low", "med", "high"]),
            ColumnSchema::new("y", ColumnKind::Label),
        ];
        let e = encode(&raw("s,y\nhigh,a\nlow,b\n", schema.clone()), &[0, 1]).unwrap();
        assert_eq!(e.x.column(0).to_vec(), vec![2.0, 0.0]);
        let err = encode(&raw("s,y\nhigh,a\nhuge,b\n", schema), &[0]).unwrap_err();
        assert!(matches!(err, Error::UnknownOrdinal { .. }));
    }

    #[test]
    fn numeric_labels_sort_numerically() {
        let r = raw("v,y\n1,10\n2,9\n3,10\n", num_schema());
        let e = encode(&r, &[0, 1, 2]).unwrap();
        assert_eq!(e.class_names, vec!["9", "10"]);
        assert_eq!(e.y, vec![1, 0, 1]);
    }

    #[test]
    fn encoding_is_idempotent_for_fixed_fit_rows() {
        let r = raw("v,y\n3,a\n9,b\n1,a\n4,b\n", num_schema());
        let a = encode(&r, &[0, 1]).unwrap();
        let b = encode(&r, &[0, 1]).unwrap();
        assert_eq!(a.x, b.x);
    }

    #[test]
    fn json_roundtrip() {
        let r = raw("v,y\n3,a\n9,b\n", num_schema());
        let e = encode(&r, &[0, 1]).unwrap();
        let back: EncodedDataset = serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
        assert_eq!(back, e);
    }
}
