use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{is_missing, level_of, ColumnKind, ColumnSchema, TabularDataset, MISSING};
use crate::error::{Error, Result};
use crate::missingness::MaskMatrix;

/// Splits a complete table into the hidden truth (true values at missing
/// positions, zero elsewhere) and the observed table ([`MISSING`] at missing
/// positions).
pub fn split_ground_truth(ds: &TabularDataset, mask: &MaskMatrix) -> Result<(Array2<f64>, Array2<f64>)> {
    if mask.dim() != ds.values.dim() {
        return Err(Error::Shape {
            expected: format!("{:?}", ds.values.dim()),
            got: format!("{:?}", mask.dim()),
        });
    }
    let mut star = Array2::zeros(ds.values.dim());
    let mut tilde = ds.values.clone();
    for ((i, j), &v) in ds.values.indexed_iter() {
        if !mask.get(i, j) {
            star[[i, j]] = v;
            tilde[[i, j]] = MISSING;
        }
    }
    Ok((star, tilde))
}

/// Score of one column with missing entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMetric {
    pub column: usize,
    pub name: String,
    pub kind: ColumnKind,
    pub n_missing: usize,
    /// Accuracy for categorical columns, R² for numerical ones. `None` when
    /// R² is undefined (zero-variance truth with non-zero error).
    pub score: Option<f64>,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationMetrics {
    /// Mean of the defined per-column scores.
    pub imp_acc: f64,
    /// Mean R² over numerical columns with missing entries.
    pub r2: Option<f64>,
    /// Mean accuracy over categorical columns with missing entries.
    pub acc: Option<f64>,
    pub rmse_all: f64,
    pub rmse_num: Option<f64>,
    pub rmse_cat: Option<f64>,
    pub columns: Vec<ColumnMetric>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, c) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    (c > 0).then(|| s / c as f64)
}

/// `1 − Σ(x̂ − x)² / Σ(x̄ − x)²` with `x̄` the mean of `truth`. Zero-variance
/// truth gives 1 for an exact fit and `None` otherwise.
pub fn r_squared(pred: &[f64], truth: &[f64]) -> Option<f64> {
    let n = truth.len() as f64;
    let x_bar = truth.iter().sum::<f64>() / n;
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    let sst: f64 = truth.iter().map(|t| (x_bar - t).powi(2)).sum();
    if sst == 0.0 {
        return (sse == 0.0).then_some(1.0);
    }
    Some(1.0 - sse / sst)
}

/// Fraction of exact level matches.
pub fn level_accuracy(pred: &[f64], truth: &[f64], k: usize) -> f64 {
    let hits = pred
        .iter()
        .zip(truth)
        .filter(|(p, t)| level_of(**p, k) == level_of(**t, k))
        .count();
    hits as f64 / truth.len() as f64
}

/// Scores an imputation. Only positions with `mask = 0` are read from
/// `x_hat` and `x_star`.
pub fn imputation_accuracy(
    x_hat: &Array2<f64>,
    x_star: &Array2<f64>,
    mask: &MaskMatrix,
    schema: &[ColumnSchema],
) -> Result<ImputationMetrics> {
    let (n, d) = mask.dim();
    if x_hat.dim() != (n, d) || x_star.dim() != (n, d) || schema.len() != d {
        return Err(Error::Shape {
            expected: format!("({n}, {d}) with {d} schema columns"),
            got: format!("{:?}, {:?}, {} columns", x_hat.dim(), x_star.dim(), schema.len()),
        });
    }
    let mut columns = Vec::new();
    let (mut se_num, mut cnt_num, mut se_cat, mut cnt_cat) = (0.0, 0usize, 0.0, 0usize);
    for (j, col) in schema.iter().enumerate() {
        let rows: Vec<usize> = (0..n).filter(|&i| !mask.get(i, j)).collect();
        if rows.is_empty() {
            continue;
        }
        let pred: Vec<f64> = rows.iter().map(|&i| x_hat[[i, j]]).collect();
        let truth: Vec<f64> = rows.iter().map(|&i| x_star[[i, j]]).collect();
        if pred.iter().any(|v| is_missing(*v) || !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("column {j} has non-finite imputations")));
        }
        let se: f64 = pred.iter().zip(&truth).map(|(p, t)| (p - t).powi(2)).sum();
        let score = match col.kind {
            ColumnKind::Categorical => {
                se_cat += se;
                cnt_cat += rows.len();
                Some(level_accuracy(&pred, &truth, col.cardinality.unwrap_or(2)))
            }
            ColumnKind::Numerical => {
                se_num += se;
                cnt_num += rows.len();
                let r2 = r_squared(&pred, &truth);
                if r2.is_none() {
                    log::warn!("R² undefined for column `{}`: constant truth over its missing set", col.name);
                }
                r2
            }
        };
        columns.push(ColumnMetric {
            column: j,
            name: col.name.clone(),
            kind: col.kind,
            n_missing: rows.len(),
            score,
            rmse: (se / rows.len() as f64).sqrt(),
        });
    }
    if columns.is_empty() {
        return Err(Error::InvalidArgument("no missing entries to evaluate".into()));
    }
    let of_kind = |kind: ColumnKind| mean(columns.iter().filter(|c| c.kind == kind).filter_map(|c| c.score));
    let rmse = |se: f64, c: usize| (c > 0).then(|| (se / c as f64).sqrt());
    Ok(ImputationMetrics {
        imp_acc: mean(columns.iter().filter_map(|c| c.score)).unwrap_or(f64::NAN),
        r2: of_kind(ColumnKind::Numerical),
        acc: of_kind(ColumnKind::Categorical),
        rmse_all: ((se_num + se_cat) / (cnt_num + cnt_cat) as f64).sqrt(),
        rmse_num: rmse(se_num, cnt_num),
        rmse_cat: rmse(se_cat, cnt_cat),
        columns,
    })
}

/// Root mean squared error over missing positions: all, numerical only,
/// categorical only.
pub fn rmse_metrics(
    x_hat: &Array2<f64>,
    x_star: &Array2<f64>,
    mask: &MaskMatrix,
    schema: &[ColumnSchema],
) -> Result<(f64, Option<f64>, Option<f64>)> {
    let m = imputation_accuracy(x_hat, x_star, mask, schema)?;
    Ok((m.rmse_all, m.rmse_num, m.rmse_cat))
}
