use std::io::Write;

use ndarray::{Array2, ArrayView2};

use super::model::{ModelParameters, TokenSource};
use crate::data::fmt::sig9;
use crate::error::Result;
use crate::missingness::MaskMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Encoder,
    Decoder,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Encoder => "encoder",
            Stage::Decoder => "decoder",
        }
    }
}

/// Mean absolute activation of one column's tokens before and after one
/// token-mixing sub-block.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMagnitude {
    pub stage: Stage,
    pub block: usize,
    pub column: usize,
    pub before: f64,
    pub after: f64,
    /// Number of tokens averaged.
    pub tokens: usize,
}

fn accumulate(
    stage: Stage,
    block: usize,
    d: usize,
    before: &Array2<f64>,
    after: &Array2<f64>,
    column_of: impl Fn(usize) -> Option<usize>,
) -> Vec<MixingMagnitude> {
    let mut sums = vec![(0.0, 0.0, 0usize); d];
    for t in 0..before.nrows() {
        if let Some(j) = column_of(t) {
            let s = &mut sums[j];
            s.0 += before.row(t).iter().map(|v| v.abs()).sum::<f64>() / before.ncols() as f64;
            s.1 += after.row(t).iter().map(|v| v.abs()).sum::<f64>() / after.ncols() as f64;
            s.2 += 1;
        }
    }
    sums.into_iter()
        .enumerate()
        .map(|(column, (b, a, k))| MixingMagnitude {
            stage,
            block,
            column,
            before: if k > 0 { b / k as f64 } else { f64::NAN },
            after: if k > 0 { a / k as f64 } else { f64::NAN },
            tokens: k,
        })
        .collect()
}

/// One row per (block, column) for every encoder and decoder block,
/// evaluated in inference mode on `x` with `visible` entries shown.
pub fn token_mixing_magnitudes(
    params: &ModelParameters,
    x: ArrayView2<f64>,
    visible: &MaskMatrix,
) -> Vec<MixingMagnitude> {
    let d = params.arch.d;
    let l = d + 1;
    let (_, cache) = params
        .arch
        .forward::<crate::rng::Rng>(&params.values, x, visible, None, true);
    let mut rows = Vec::new();
    for (b, block) in cache.encoder_blocks().iter().enumerate() {
        let (before, after) = (block.mix_in.as_ref().unwrap(), block.mix_out.as_ref().unwrap());
        rows.extend(accumulate(Stage::Encoder, b, d, before, after, |t| {
            match cache.enc_tokens[t].1 {
                TokenSource::Cls => None,
                TokenSource::Value(j) | TokenSource::Masked(j) => Some(j),
            }
        }));
    }
    for (b, block) in cache.decoder_blocks().iter().enumerate() {
        let (before, after) = (block.mix_in.as_ref().unwrap(), block.mix_out.as_ref().unwrap());
        rows.extend(accumulate(Stage::Decoder, b, d, before, after, |t| {
            (t % l).checked_sub(1)
        }));
    }
    rows
}

pub fn write_magnitudes<W: Write>(out: W, rows: &[MixingMagnitude], names: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["stage", "block", "column", "name", "before", "after", "tokens"])?;
    for r in rows {
        w.write_record([
            r.stage.name().to_string(),
            r.block.to_string(),
            r.column.to_string(),
            names.get(r.column).cloned().unwrap_or_default(),
            sig9(r.before),
            sig9(r.after),
            r.tokens.to_string(),
        ])?;
    }
    w.flush().map_err(|e| crate::error::Error::io("magnitudes", e))?;
    Ok(())
}
