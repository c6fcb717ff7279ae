use ndarray::{s, Array2};

use super::model::ModelParameters;
use crate::data::{snap_to_level, IncompleteDataset};
use crate::error::{Error, Result};

/// Rows per inference chunk.
const CHUNK: usize = 1024;

/// Raw model predictions for every entry, conditioned on the observed
/// entries only.
pub fn predict_all(params: &ModelParameters, ds: &IncompleteDataset) -> Result<Array2<f64>> {
    if ds.n_cols() != params.arch.d {
        return Err(Error::Shape {
            expected: format!("{} columns", params.arch.d),
            got: format!("{}", ds.n_cols()),
        });
    }
    let x = ds.zero_filled();
    let n = ds.n_rows();
    let mut out = Array2::zeros((n, ds.n_cols()));
    for start in (0..n).step_by(CHUNK) {
        let end = (start + CHUNK).min(n);
        let rows: Vec<usize> = (start..end).collect();
        let visible = ds.observed_mask.select_rows(&rows);
        let pred = params.predict(x.slice(s![start..end, ..]), &visible)?;
        out.slice_mut(s![start..end, ..]).assign(&pred);
    }
    Ok(out)
}

/// Maps a raw prediction into the column's valid range: nearest level for
/// categorical columns, `[0, 1]` for numerical ones.
pub fn postprocess_value(ds: &IncompleteDataset, j: usize, value: f64) -> f64 {
    match ds.base.cardinality(j) {
        Some(k) => snap_to_level(value, k),
        None => value.clamp(0.0, 1.0),
    }
}

/// Completed matrix: observed entries unchanged, missing entries replaced by
/// post-processed predictions.
pub fn fill_missing(ds: &IncompleteDataset, pred: &Array2<f64>) -> Array2<f64> {
    let mut out = ds.values.clone();
    for ((i, j), v) in out.indexed_iter_mut() {
        if !ds.observed_mask.get(i, j) {
            *v = postprocess_value(ds, j, pred[[i, j]]);
        }
    }
    out
}

/// Imputations only: post-processed predictions at missing entries and zero
/// at observed entries.
pub fn imputation_matrix(ds: &IncompleteDataset, pred: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(ds.values.dim());
    for ((i, j), v) in out.indexed_iter_mut() {
        if !ds.observed_mask.get(i, j) {
            *v = postprocess_value(ds, j, pred[[i, j]]);
        }
    }
    out
}

/// Completed matrix from a trained model.
pub fn impute(params: &ModelParameters, ds: &IncompleteDataset) -> Result<Array2<f64>> {
    let pred = predict_all(params, ds)?;
    Ok(fill_missing(ds, &pred))
}
