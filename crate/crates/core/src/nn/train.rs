use std::io::Write;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;

use super::config::{LossKind, ModelConfig, TrainConfig};
use super::loss::{pmae_loss_grad, remasker_loss_grad};
use super::model::ModelParameters;
use super::optim::{learning_rate, AdamW};
use crate::data::IncompleteDataset;
use crate::error::{Error, Result};
use crate::masking::{batch_rates, sample_additional_mask, MaskingFunctionSpec};
use crate::missingness::MaskMatrix;
use crate::rng::{stream_rng, Rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean of the batch losses in this epoch.
    pub loss: f64,
    /// Learning rate at the start of the epoch.
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParameters,
    pub curve: Vec<EpochLoss>,
}

/// A batch in training layout.
pub struct Batch {
    pub x: Array2<f64>,
    pub observed: MaskMatrix,
}

impl Batch {
    pub fn gather(x: &Array2<f64>, observed: &MaskMatrix, rows: &[usize]) -> Self {
        Batch {
            x: x.select(Axis(0), rows),
            observed: observed.select_rows(rows),
        }
    }
}

/// Trains a fresh model. All randomness derives from `seed`.
pub fn train(
    ds: &IncompleteDataset,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    masking: &MaskingFunctionSpec,
    seed: u64,
) -> Result<TrainOutcome> {
    let mut init_rng = stream_rng(seed, Stream::Init);
    let params = ModelParameters::init(ds.n_cols(), *model_cfg, &mut init_rng)?;
    train_from(ds, params, train_cfg, masking, seed)
}

/// Continues training from `params`.
pub fn train_from(
    ds: &IncompleteDataset,
    mut params: ModelParameters,
    train_cfg: &TrainConfig,
    masking: &MaskingFunctionSpec,
    seed: u64,
) -> Result<TrainOutcome> {
    let n = ds.n_rows();
    if n == 0 {
        return Err(Error::Empty("training set has no rows".into()));
    }
    if train_cfg.epochs == 0 {
        return Err(Error::InvalidArgument("epochs must be at least 1".into()));
    }
    let mut shuffle_rng = stream_rng(seed, Stream::Shuffle);
    let mut mask_rng = stream_rng(seed, Stream::AdditionalMask);
    let mut dropout_rng = stream_rng(seed, Stream::Dropout);

    let x = ds.zero_filled();
    let batch_size = train_cfg.batch_size_for(n).min(n);
    let steps_per_epoch = n.div_ceil(batch_size);
    let mut opt = AdamW::new(train_cfg, params.arch.layout.decay_mask());
    let mut grad = vec![0.0; params.n_params()];
    let mut order: Vec<usize> = (0..n).collect();
    let mut curve = Vec::with_capacity(train_cfg.epochs);

    for epoch in 0..train_cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let lr0 = learning_rate(train_cfg, epoch as f64);
        for (step, rows) in order.chunks(batch_size).enumerate() {
            let lr = learning_rate(train_cfg, epoch as f64 + step as f64 / steps_per_epoch as f64);
            let batch = Batch::gather(&x, &ds.observed_mask, rows);
            let loss = train_step(&mut params, &mut opt, &mut grad, &batch, train_cfg.loss, masking, lr, &mut mask_rng, &mut dropout_rng)?;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    loss,
                    param_norm: params.norm(),
                });
            }
            epoch_loss += loss;
        }
        let entry = EpochLoss {
            epoch,
            loss: epoch_loss / steps_per_epoch as f64,
            lr: lr0,
        };
        log::debug!("epoch {} loss {:.6} lr {:.2e}", entry.epoch, entry.loss, entry.lr);
        curve.push(entry);
    }
    Ok(TrainOutcome { params, curve })
}

/// One optimiser update on `batch`. Returns the batch loss before the update.
#[allow(clippy::too_many_arguments)]
pub fn train_step(
    params: &mut ModelParameters,
    opt: &mut AdamW,
    grad: &mut [f64],
    batch: &Batch,
    loss_kind: LossKind,
    masking: &MaskingFunctionSpec,
    lr: f64,
    mask_rng: &mut Rng,
    dropout_rng: &mut Rng,
) -> Result<f64> {
    let (loss, d_pred, cache) = {
        let rates = batch_rates(masking, &batch.observed)?;
        let pair = sample_additional_mask(&batch.observed, &rates, mask_rng)?;
        let (pred, cache) = params
            .arch
            .forward(&params.values, batch.x.view(), &pair.m_plus, Some(dropout_rng), false);
        let (loss, d_pred) = match loss_kind {
            LossKind::Pmae => pmae_loss_grad(pred.view(), batch.x.view(), &batch.observed, true),
            LossKind::Remasker => remasker_loss_grad(pred.view(), batch.x.view(), &pair, true),
        };
        (loss, d_pred.expect("gradient requested"), cache)
    };
    if !loss.is_finite() {
        return Ok(loss);
    }
    grad.fill(0.0);
    params.arch.backward(&params.values, grad, cache, &d_pred);
    opt.step(&mut params.values, grad, lr);
    if !params.is_finite() {
        return Err(Error::NonFinite {
            stage: "update".into(),
            param_norm: params.norm(),
        });
    }
    Ok(loss)
}

pub fn write_loss_curve<W: Write>(out: W, curve: &[EpochLoss]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "loss", "lr"])?;
    for e in curve {
        w.write_record([e.epoch.to_string(), crate::data::fmt::sig9(e.loss), crate::data::fmt::sig9(e.lr)])?;
    }
    w.flush().map_err(|e| Error::io("loss curve", e))?;
    Ok(())
}
