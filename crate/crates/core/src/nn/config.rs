use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    /// Self-attention token mixing.
    Transformer,
    /// MLP token mixing.
    Mixer,
}

impl FromStr for BlockKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "transformer" | "trf" => Ok(BlockKind::Transformer),
            "mixer" | "mix" => Ok(BlockKind::Mixer),
            other => Err(Error::InvalidArgument(format!("unknown block kind `{other}`"))),
        }
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockKind::Transformer => "transformer",
            BlockKind::Mixer => "mixer",
        })
    }
}

/// How each sub-block is wrapped around its residual connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualForm {
    /// `x + LN(x + f(LN(x)))`
    DoubleNorm,
    /// `x + f(LN(x))`
    PreNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub width: usize,
    pub encoder_depth: usize,
    pub decoder_depth: usize,
    pub heads: usize,
    pub block_kind: BlockKind,
    pub dropout: f64,
    pub expansion_ratio: usize,
    pub residual: ResidualForm,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            width: 32,
            encoder_depth: 6,
            decoder_depth: 4,
            heads: 4,
            block_kind: BlockKind::Mixer,
            dropout: 0.1,
            expansion_ratio: 4,
            residual: ResidualForm::DoubleNorm,
        }
    }
}

impl ModelConfig {
    pub fn with_block_kind(mut self, kind: BlockKind) -> Self {
        self.block_kind = kind;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.heads == 0 || self.width % self.heads != 0 {
            return Err(Error::InvalidArgument(format!(
                "width {} must be a positive multiple of heads {}",
                self.width, self.heads
            )));
        }
        if self.encoder_depth == 0 || self.decoder_depth == 0 {
            return Err(Error::InvalidArgument("depths must be at least 1".into()));
        }
        if self.expansion_ratio == 0 {
            return Err(Error::InvalidArgument("expansion ratio must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Which training objective to minimise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Squared error over every observed entry, normalised per column by its
    /// observed count.
    Pmae,
    /// Visible and masked terms normalised separately by their own counts.
    Remasker,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub min_lr: f64,
    pub warmup_epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled weight decay applied to token-mixing weights only.
    pub weight_decay: f64,
    /// Overrides the size-dependent batch-size schedule.
    pub batch_size: Option<usize>,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 600,
            lr: 1e-3,
            min_lr: 1e-5,
            warmup_epochs: 20,
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
            weight_decay: 1e-5,
            batch_size: None,
            loss: LossKind::Pmae,
        }
    }
}

impl TrainConfig {
    pub fn batch_size_for(&self, n: usize) -> usize {
        self.batch_size.unwrap_or_else(|| batch_size_schedule(n))
    }
}

/// Batch size by dataset size.
pub fn batch_size_schedule(n: usize) -> usize {
    match n {
        0..=999 => 128,
        1_000..=2_499 => 256,
        2_500..=4_999 => 512,
        5_000..=9_999 => 1_024,
        10_000..=19_999 => 2_048,
        _ => 4_096,
    }
}
