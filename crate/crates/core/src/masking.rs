//! Observed proportions, masking-rate functions and additional-mask draws.
//!
//! During training every observed entry `(i, j)` of a batch is hidden from
//! the encoder with probability `M_j(p_obs_j)`, where `p_obs_j` is the
//! fraction of batch rows observing column `j`. The hidden entries form
//! `m_minus`; what stays visible is `m_plus`, so `m = m_plus + m_minus`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::missingness::MaskMatrix;

/// Masking-rate family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskingKind {
    /// `a * ln((1 - p) / p) + b`, clipped to `[0, 1]`.
    Logit,
    /// `0.5` for partially observed columns.
    Constant,
    /// Always mask (pure prediction).
    NoRecon,
    /// Never mask (pure reconstruction).
    NoPred,
    /// `1 - p`.
    Linear,
    /// `p`.
    Reversed,
    /// `1 - p` below one half, `0.5` above.
    PieceWise,
    /// `1 / (exp(-10 (0.5 - p)) + 1)`.
    SigmoidLike,
}

impl MaskingKind {
    pub const ALL: [MaskingKind; 8] = [
        MaskingKind::Logit,
        MaskingKind::Constant,
        MaskingKind::NoRecon,
        MaskingKind::NoPred,
        MaskingKind::Linear,
        MaskingKind::Reversed,
        MaskingKind::PieceWise,
        MaskingKind::SigmoidLike,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MaskingKind::Logit => "logit",
            MaskingKind::Constant => "constant",
            MaskingKind::NoRecon => "no_recon",
            MaskingKind::NoPred => "no_pred",
            MaskingKind::Linear => "linear",
            MaskingKind::Reversed => "reversed",
            MaskingKind::PieceWise => "piece_wise",
            MaskingKind::SigmoidLike => "sigmoid_like",
        }
    }
}

impl fmt::Display for MaskingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MaskingKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        MaskingKind::ALL
            .into_iter()
            .find(|k| k.name() == key || k.name().replace('_', "") == key)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown masking kind `{s}`")))
    }
}

/// A masking-rate function with its parameters. `a` and `b` are only read
/// by [`MaskingKind::Logit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskingFunctionSpec {
    pub kind: MaskingKind,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_b")]
    pub b: f64,
}

fn default_a() -> f64 {
    0.05
}

fn default_b() -> f64 {
    0.5
}

impl Default for MaskingFunctionSpec {
    fn default() -> Self {
        Self::logit(default_a(), default_b())
    }
}

impl MaskingFunctionSpec {
    pub fn logit(a: f64, b: f64) -> Self {
        MaskingFunctionSpec {
            kind: MaskingKind::Logit,
            a,
            b,
        }
    }

    pub fn of_kind(kind: MaskingKind) -> Self {
        MaskingFunctionSpec {
            kind,
            ..Self::default()
        }
    }

    /// Masking probability for a column with observed proportion `p_obs`.
    pub fn rate(&self, p_obs: f64) -> f64 {
        masking_rate(self, p_obs)
    }
}

/// Masking probability of a column with observed proportion `p_obs`.
///
/// Every variant returns 0 for a fully observed column (`p_obs == 1`), and
/// every output is clipped to `[0, 1]`.
pub fn masking_rate(spec: &MaskingFunctionSpec, p_obs: f64) -> f64 {
    let p = p_obs.clamp(0.0, 1.0);
    if p >= 1.0 {
        return 0.0;
    }
    let raw = match spec.kind {
        MaskingKind::Logit => {
            if p <= 0.0 {
                // ln((1 - p) / p) diverges to +inf.
                if spec.a > 0.0 {
                    1.0
                } else if spec.a < 0.0 {
                    0.0
                } else {
                    spec.b
                }
            } else {
                spec.a * ((1.0 - p) / p).ln() + spec.b
            }
        }
        MaskingKind::Constant => 0.5,
        MaskingKind::NoRecon => 1.0,
        MaskingKind::NoPred => 0.0,
        MaskingKind::Linear => 1.0 - p,
        MaskingKind::Reversed => p,
        MaskingKind::PieceWise => {
            if p < 0.5 {
                1.0 - p
            } else {
                0.5
            }
        }
        MaskingKind::SigmoidLike => 1.0 / ((-10.0 * (0.5 - p)).exp() + 1.0),
    };
    raw.clamp(0.0, 1.0)
}

/// Fraction of batch rows observing each column.
pub fn observed_proportions(mask_batch: &MaskMatrix) -> Result<Vec<f64>> {
    if mask_batch.nrows() == 0 {
        return Err(Error::Empty("observed proportions of an empty batch".into()));
    }
    Ok(mask_batch.column_means())
}

/// Masking rate of every column of a batch.
pub fn batch_rates(spec: &MaskingFunctionSpec, mask_batch: &MaskMatrix) -> Result<Vec<f64>> {
    Ok(observed_proportions(mask_batch)?
        .into_iter()
        .map(|p| masking_rate(spec, p))
        .collect())
}

/// The split of an observed mask into visible and additionally masked parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskPair {
    pub m_plus: MaskMatrix,
    pub m_minus: MaskMatrix,
}

/// Draws `u_ij ~ U(0, 1)` for every entry and hides each observed entry with
/// `u_ij < rates[j]`. Unobserved entries are zero in both halves.
pub fn sample_additional_mask<R: Rng + ?Sized>(
    observed: &MaskMatrix,
    rates: &[f64],
    rng: &mut R,
) -> Result<MaskPair> {
    let (n, d) = observed.dim();
    if rates.len() != d {
        return Err(Error::Shape {
            expected: format!("{d} rates"),
            got: format!("{}", rates.len()),
        });
    }
    let mut m_plus = MaskMatrix::zeros(n, d);
    let mut m_minus = MaskMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            let u: f64 = rng.gen();
            if observed.get(i, j) {
                if u < rates[j] {
                    m_minus.set(i, j, true);
                } else {
                    m_plus.set(i, j, true);
                }
            }
        }
    }
    Ok(MaskPair { m_plus, m_minus })
}
