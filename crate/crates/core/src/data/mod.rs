//! Tabular ingestion: schema-typed CSV loading, train-fitted encoding and
//! stratified 5-fold splits.

mod encode;
mod folds;
mod load;
mod schema;

pub use encode::{encode, EncodedColumn, EncodedDataset, Encoder, EncodingRole, FittedColumn};
pub use folds::{make_folds, Fold, FoldSet, N_FOLDS};
pub use load::{load_dataset, read_rows, Cell, RawDataset};
pub use schema::{ColumnKind, ColumnSchema, Schema};

/// Category name used for missing cells in nominal columns.
pub const MISSING_CATEGORY: &str = "__missing__";
