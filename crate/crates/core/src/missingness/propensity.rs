use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::pattern::{Mechanism, Pattern};
use crate::data::{level_of, ColumnKind, TabularDataset};
use crate::error::{Error, Result};

/// One-hot-expanded feature matrix: numerical columns first, then every
/// level of each categorical column. `owner[f]` is the dataset column that
/// feature `f` came from.
#[derive(Debug, Clone)]
pub struct ExpandedFeatures {
    pub matrix: Array2<f64>,
    pub owner: Vec<usize>,
}

impl ExpandedFeatures {
    pub fn from_dataset(ds: &TabularDataset) -> Self {
        let n = ds.n_rows();
        let mut owner = Vec::new();
        let mut blocks: Vec<(usize, Option<(usize, usize)>)> = Vec::new();
        for (j, c) in ds.schema.iter().enumerate() {
            if c.kind == ColumnKind::Numerical {
                owner.push(j);
                blocks.push((j, None));
            }
        }
        for (j, c) in ds.schema.iter().enumerate() {
            if c.kind == ColumnKind::Categorical {
                let k = c.cardinality.unwrap_or(1).max(1);
                for level in 0..k {
                    owner.push(j);
                    blocks.push((j, Some((level, k))));
                }
            }
        }
        let matrix = Array2::from_shape_fn((n, owner.len()), |(i, f)| match blocks[f] {
            (j, None) => ds.values[[i, j]],
            (j, Some((level, k))) => (level_of(ds.values[[i, j]], k) == level) as u8 as f64,
        });
        ExpandedFeatures { matrix, owner }
    }

    pub fn n_features(&self) -> usize {
        self.owner.len()
    }
}

/// Logistic observation model for one column:
/// `P(observed) = sigmoid(beta0 + x · beta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityModel {
    pub target_column: usize,
    pub beta: Array1<f64>,
    pub beta0: f64,
    pub mechanism: Mechanism,
    pub target_rate: f64,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl PropensityModel {
    pub fn propensity(&self, features: ArrayView1<f64>) -> f64 {
        sigmoid(self.beta0 + features.dot(&self.beta))
    }

    pub fn propensities(&self, x: &ExpandedFeatures) -> Vec<f64> {
        let scores = x.matrix.dot(&self.beta);
        scores.iter().map(|s| sigmoid(self.beta0 + s)).collect()
    }

    /// Row-mean of the propensities.
    pub fn mean_rate(&self, x: &ExpandedFeatures) -> f64 {
        let p = self.propensities(x);
        p.iter().sum::<f64>() / p.len() as f64
    }
}

/// Interval searched for the intercept.
pub const INTERCEPT_BRACKET: (f64, f64) = (-50.0, 50.0);
/// Tolerance on the calibrated mean observed rate.
pub const CALIBRATION_TOL: f64 = 1e-6;

/// Finds `beta0` such that the mean of `sigmoid(beta0 + s_i)` equals
/// `target` within [`CALIBRATION_TOL`], by bisection.
pub fn calibrate_intercept(scores: &[f64], target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidArgument(format!("target rate {target} outside (0, 1)")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Calibration("non-finite linear score".into()));
    }
    let n = scores.len() as f64;
    let gap = |b0: f64| scores.iter().map(|s| sigmoid(b0 + s)).sum::<f64>() / n - target;
    let (mut lo, mut hi) = INTERCEPT_BRACKET;
    let (g_lo, g_hi) = (gap(lo), gap(hi));
    if g_lo > 0.0 || g_hi < 0.0 {
        return Err(Error::Calibration(format!(
            "target {target} not bracketed by intercepts [{lo}, {hi}] (gaps {g_lo:.3e}, {g_hi:.3e})"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let g = gap(mid);
        if g.abs() <= CALIBRATION_TOL {
            return Ok(mid);
        }
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Calibration(format!("bisection did not converge for target {target}")))
}

/// Builds the observation model of column `column`.
///
/// Coefficients are drawn i.i.d. standard normal over every expanded
/// feature, then zeroed according to the mechanism: all of them for MCAR,
/// those of columns in `missing_set` for MAR, those of columns outside it
/// for MNAR under the monotone pattern. The intercept is calibrated so the
/// mean observed rate over the rows of `x` equals `target_rate`.
pub fn build_propensity<R: Rng + ?Sized>(
    x: &ExpandedFeatures,
    column: usize,
    mechanism: Mechanism,
    pattern: Pattern,
    missing_set: &[usize],
    target_rate: f64,
    rng: &mut R,
) -> Result<PropensityModel> {
    if !(target_rate > 0.0 && target_rate < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target rate {target_rate} outside (0, 1)"
        )));
    }
    let mut beta: Array1<f64> = (0..x.n_features())
        .map(|_| StandardNormal.sample(rng))
        .collect();
    let in_set = |col: usize| missing_set.contains(&col);
    for (f, b) in beta.iter_mut().enumerate() {
        let keep = match mechanism {
            Mechanism::Mcar => false,
            Mechanism::Mar => !in_set(x.owner[f]),
            Mechanism::Mnar => pattern != Pattern::Monotone || in_set(x.owner[f]),
        };
        if !keep {
            *b = 0.0;
        }
    }
    let beta0 = if beta.iter().all(|&b| b == 0.0) {
        logit(target_rate)
    } else {
        let scores = x.matrix.dot(&beta);
        calibrate_intercept(scores.as_slice().expect("contiguous"), target_rate)?
    };
    Ok(PropensityModel {
        target_column: column,
        beta,
        beta0,
        mechanism,
        target_rate,
    })
}
