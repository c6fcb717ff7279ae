use ndarray::{Array2, ArrayView2};

use crate::masking::MaskPair;
use crate::missingness::MaskMatrix;

/// Squared error over observed entries, normalised per column by the
/// column's observed count and summed over columns. Columns with no observed
/// entry contribute nothing.
pub fn pmae_loss(pred: ArrayView2<f64>, x: ArrayView2<f64>, observed: &MaskMatrix) -> f64 {
    pmae_loss_grad(pred, x, observed, false).0
}

/// [`pmae_loss`] together with its gradient with respect to `pred`.
pub fn pmae_loss_grad(
    pred: ArrayView2<f64>,
    x: ArrayView2<f64>,
    observed: &MaskMatrix,
    with_grad: bool,
) -> (f64, Option<Array2<f64>>) {
    let (b, d) = pred.dim();
    let mut grad = with_grad.then(|| Array2::zeros((b, d)));
    let mut total = 0.0;
    for j in 0..d {
        let count = (0..b).filter(|&i| observed.get(i, j)).count();
        if count == 0 {
            continue;
        }
        let denom = count as f64;
        let mut acc = 0.0;
        for i in 0..b {
            if observed.get(i, j) {
                let e = pred[[i, j]] - x[[i, j]];
                acc += e * e;
                if let Some(g) = grad.as_mut() {
                    g[[i, j]] = 2.0 * e / denom;
                }
            }
        }
        total += acc / denom;
    }
    (total, grad)
}

/// Per column, the masked-entry error normalised by the masked count plus the
/// visible-entry error normalised by the visible count.
pub fn remasker_loss(pred: ArrayView2<f64>, x: ArrayView2<f64>, pair: &MaskPair) -> f64 {
    remasker_loss_grad(pred, x, pair, false).0
}

pub fn remasker_loss_grad(
    pred: ArrayView2<f64>,
    x: ArrayView2<f64>,
    pair: &MaskPair,
    with_grad: bool,
) -> (f64, Option<Array2<f64>>) {
    let (b, d) = pred.dim();
    let mut grad = with_grad.then(|| Array2::zeros((b, d)));
    let mut total = 0.0;
    for mask in [&pair.m_plus, &pair.m_minus] {
        for j in 0..d {
            let count = (0..b).filter(|&i| mask.get(i, j)).count();
            if count == 0 {
                continue;
            }
            let denom = count as f64;
            let mut acc = 0.0;
            for i in 0..b {
                if mask.get(i, j) {
                    let e = pred[[i, j]] - x[[i, j]];
                    acc += e * e;
                    if let Some(g) = grad.as_mut() {
                        g[[i, j]] += 2.0 * e / denom;
                    }
                }
            }
            total += acc / denom;
        }
    }
    (total, grad)
}
