//! Dataset representation, schema handling and preprocessing.

mod dataset;
pub mod fmt;
mod incomplete;
mod quantile;
mod schema;
pub mod synthetic;

pub use dataset::{
    encode_categoricals, encode_level, level_of, load_dataset, load_dataset_from_reader,
    preprocess, quantile_transform, regroup_minor_categories, regroup_threshold, snap_to_level,
    RawColumn, RawDataset, TabularDataset, OTHER_LABEL,
};
pub use incomplete::{is_missing, IncompleteDataset, MISSING};
pub use quantile::QuantileMap;
pub use schema::{format_schema, parse_schema, read_schema, ColumnKind, ColumnSchema};
