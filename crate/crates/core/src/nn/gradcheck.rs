//! Central finite-difference verification of the analytic gradients.

use ndarray::Array2;
use rand::Rng;

use super::config::{BlockKind, LossKind, ModelConfig, ResidualForm};
use super::loss::{pmae_loss_grad, remasker_loss_grad};
use super::model::ModelParameters;
use crate::error::Result;
use crate::masking::MaskPair;
use crate::missingness::MaskMatrix;
use crate::rng::rng_from_seed;

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-4;

/// Agreement of one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    /// `‖g_analytic − g_numeric‖ / max(‖g_analytic‖, ‖g_numeric‖)`, or the
    /// absolute difference norm when both are below `1e-10`.
    pub rel_err: f64,
    pub analytic_norm: f64,
}

/// A fixed problem instance: parameters, batch and mask pair.
pub struct GradProblem {
    pub params: ModelParameters,
    pub x: Array2<f64>,
    pub observed: MaskMatrix,
    pub pair: MaskPair,
    pub loss: LossKind,
}

impl GradProblem {
    /// A width-8, depth-1 model over `d = 3` columns with a batch of 3 rows
    /// in which every row keeps at least one visible entry and at least one
    /// entry is additionally masked or missing.
    pub fn small(kind: BlockKind, loss: LossKind, residual: ResidualForm, seed: u64) -> Result<Self> {
        let cfg = ModelConfig {
            width: 8,
            encoder_depth: 1,
            decoder_depth: 1,
            heads: 2,
            block_kind: kind,
            dropout: 0.0,
            expansion_ratio: 2,
            residual,
        };
        let mut rng = rng_from_seed(seed);
        let params = ModelParameters::init(3, cfg, &mut rng)?;
        let x = Array2::from_shape_fn((3, 3), |_| rng.gen_range(0.0..1.0));
        let observed = MaskMatrix::from_rows(&[vec![1, 1, 1], vec![1, 1, 0], vec![1, 1, 1]])?;
        let m_minus = MaskMatrix::from_rows(&[vec![0, 1, 0], vec![1, 0, 0], vec![0, 0, 1]])?;
        let m_plus = MaskMatrix::from_fn(3, 3, |i, j| observed.get(i, j) && !m_minus.get(i, j));
        Ok(GradProblem {
            params,
            x,
            observed,
            pair: MaskPair { m_plus, m_minus },
            loss,
        })
    }

    fn loss_and_grad(&self, values: &[f64], with_grad: bool) -> (f64, Option<Vec<f64>>) {
        let arch = &self.params.arch;
        let (pred, cache) = arch.forward::<crate::rng::Rng>(values, self.x.view(), &self.pair.m_plus, None, false);
        let (loss, d_pred) = match self.loss {
            LossKind::Pmae => pmae_loss_grad(pred.view(), self.x.view(), &self.observed, with_grad),
            LossKind::Remasker => remasker_loss_grad(pred.view(), self.x.view(), &self.pair, with_grad),
        };
        let grad = d_pred.map(|d_pred| {
            let mut g = vec![0.0; values.len()];
            arch.backward(values, &mut g, cache, &d_pred);
            g
        });
        (loss, grad)
    }

    pub fn loss(&self, values: &[f64]) -> f64 {
        self.loss_and_grad(values, false).0
    }

    pub fn analytic_gradient(&self) -> Vec<f64> {
        self.loss_and_grad(&self.params.values, true).1.expect("gradient requested")
    }

    /// Compares analytic and central-difference gradients tensor by tensor.
    pub fn check(&self) -> Vec<TensorCheck> {
        let analytic = self.analytic_gradient();
        let mut values = self.params.values.clone();
        let mut numeric = vec![0.0; values.len()];
        for k in 0..values.len() {
            let orig = values[k];
            values[k] = orig + FD_STEP;
            let up = self.loss(&values);
            values[k] = orig - FD_STEP;
            let down = self.loss(&values);
            values[k] = orig;
            numeric[k] = (up - down) / (2.0 * FD_STEP);
        }
        self.params
            .arch
            .layout
            .entries
            .iter()
            .map(|e| {
                let a = e.at.slice(&analytic);
                let n = e.at.slice(&numeric);
                let diff = a.iter().zip(n).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nn = n.iter().map(|x| x * x).sum::<f64>().sqrt();
                let scale = na.max(nn);
                TensorCheck {
                    name: e.name.clone(),
                    rel_err: if scale < 1e-10 { diff } else { diff / scale },
                    analytic_norm: na,
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(kind: BlockKind, loss: LossKind, residual: ResidualForm) {
        let problem = GradProblem::small(kind, loss, residual, 11).unwrap();
        for c in problem.check() {
            assert!(c.rel_err < 1e-4, "{kind} {loss:?} {residual:?} {}: {}", c.name, c.rel_err);
        }
    }

    #[test]
    fn transformer_gradients() {
        assert_close(BlockKind::Transformer, LossKind::Pmae, ResidualForm::DoubleNorm);
        assert_close(BlockKind::Transformer, LossKind::Remasker, ResidualForm::DoubleNorm);
        assert_close(BlockKind::Transformer, LossKind::Pmae, ResidualForm::PreNorm);
    }

    #[test]
    fn mixer_gradients() {
        assert_close(BlockKind::Mixer, LossKind::Pmae, ResidualForm::DoubleNorm);
        assert_close(BlockKind::Mixer, LossKind::Remasker, ResidualForm::DoubleNorm);
        assert_close(BlockKind::Mixer, LossKind::Pmae, ResidualForm::PreNorm);
    }

    #[test]
    fn every_tensor_receives_gradient() {
        for kind in [BlockKind::Transformer, BlockKind::Mixer] {
            let problem = GradProblem::small(kind, LossKind::Pmae, ResidualForm::DoubleNorm, 5).unwrap();
            for c in problem.check() {
                assert!(c.analytic_norm > 0.0, "{kind} {} has zero gradient", c.name);
            }
        }
    }
}
