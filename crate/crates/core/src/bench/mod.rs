//! Benchmark grids: configuration, execution, the `(a, b)` search and
//! report emission.

pub mod config;
pub mod grid;

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

pub use config::{name_tag, DatasetConfig, MaskingParams, Method, RunConfig, SEED_ENV};
pub use grid::{
    configured_maskings, execute_cells, expand_cells, grid_search_ab, prepare_datasets, run_cell, run_grid, CellArtifacts,
    CellContext, CellRecord, CellSpec, CellStatus, GridOutcome, Manifest, SurfacePoint,
};

use crate::error::{Error, Result};
use crate::eval::{read_reports, write_reports, ReportFormat};

/// Re-emits the `runs.csv` of a finished grid in the requested format.
pub fn report_dir<W: Write>(dir: impl AsRef<Path>, format: ReportFormat, out: W) -> Result<()> {
    let path = dir.as_ref().join("runs.csv");
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    let reports = read_reports(BufReader::new(file))?;
    write_reports(out, &reports, format)
}
