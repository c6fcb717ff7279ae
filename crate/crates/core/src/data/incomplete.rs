use ndarray::Array2;

use super::dataset::TabularDataset;
use crate::error::{Error, Result};
use crate::missingness::MaskMatrix;

/// Marker stored at unobserved positions. Never written to output files.
pub const MISSING: f64 = f64::NAN;

pub fn is_missing(x: f64) -> bool {
    x.is_nan()
}

/// A dataset paired with its observed mask. Unobserved entries hold
/// [`MISSING`].
#[derive(Debug, Clone)]
pub struct IncompleteDataset {
    pub base: TabularDataset,
    pub observed_mask: MaskMatrix,
    pub values: Array2<f64>,
}

impl IncompleteDataset {
    pub fn new(base: TabularDataset, observed_mask: MaskMatrix) -> Result<Self> {
        if observed_mask.dim() != base.values.dim() {
            return Err(Error::Shape {
                expected: format!("{:?}", base.values.dim()),
                got: format!("{:?}", observed_mask.dim()),
            });
        }
        let mut values = base.values.clone();
        for ((i, j), v) in values.indexed_iter_mut() {
            if !observed_mask.get(i, j) {
                *v = MISSING;
            }
        }
        Ok(IncompleteDataset {
            base,
            observed_mask,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    /// Values with unobserved entries replaced by zero.
    pub fn zero_filled(&self) -> Array2<f64> {
        self.values.mapv(|x| if is_missing(x) { 0.0 } else { x })
    }
}
