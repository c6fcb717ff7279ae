use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest propensity accepted; below it inverse weights are unbounded in
/// practice.
pub const PROPENSITY_FLOOR: f64 = 1e-3;

/// Monte Carlo mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            se: (var / n).sqrt(),
        }
    }

    /// Whether `|self.mean − target| < k · se`, counting a match up to
    /// rounding as inside when the spread vanishes.
    pub fn within(&self, target: f64, k: f64) -> bool {
        let gap = (self.mean - target).abs();
        gap < k * self.se || gap <= 1e-12 * target.abs().max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IpsDiagnostic {
    /// Mean loss over the entries that happen to be observed.
    pub naive: Estimate,
    /// Observed losses weighted by inverse propensity, over all entries.
    pub ips: Estimate,
    /// Mean loss over every entry.
    pub full: f64,
    pub draws: usize,
}

/// Compares the complete-case mean loss and the inverse-propensity weighted
/// loss with the full-data mean loss under repeated observation draws
/// `δ_ij ~ Bernoulli(π_ij)`.
///
/// Per draw, with `N` entries:
/// - naive: `Σ δ·l / Σ δ`
/// - ips: `Σ δ·l/π / N`
pub fn ips_diagnostic<R: Rng + ?Sized>(
    losses: &Array2<f64>,
    propensities: &Array2<f64>,
    draws: usize,
    rng: &mut R,
) -> Result<IpsDiagnostic> {
    if losses.dim() != propensities.dim() {
        return Err(Error::Shape {
            expected: format!("{:?}", losses.dim()),
            got: format!("{:?}", propensities.dim()),
        });
    }
    if losses.is_empty() || draws == 0 {
        return Err(Error::Empty("no entries or no draws".into()));
    }
    if let Some(p) = propensities.iter().find(|&&p| !(PROPENSITY_FLOOR..=1.0).contains(&p)) {
        return Err(Error::InvalidArgument(format!(
            "propensity {p} outside [{PROPENSITY_FLOOR}, 1]"
        )));
    }
    let n = losses.len() as f64;
    let full = losses.iter().sum::<f64>() / n;
    let mut naive = Vec::with_capacity(draws);
    let mut ips = Vec::with_capacity(draws);
    for _ in 0..draws {
        let (mut obs_sum, mut obs_count, mut weighted) = (0.0, 0usize, 0.0);
        for (&l, &p) in losses.iter().zip(propensities.iter()) {
            if rng.gen::<f64>() < p {
                obs_sum += l;
                obs_count += 1;
                weighted += l / p;
            }
        }
        naive.push(if obs_count > 0 { obs_sum / obs_count as f64 } else { 0.0 });
        ips.push(weighted / n);
    }
    Ok(IpsDiagnostic {
        naive: Estimate::from_samples(&naive),
        ips: Estimate::from_samples(&ips),
        full,
        draws,
    })
}

/// Monte Carlo estimate of `E[δ/π]` for an entry with propensity `p`.
pub fn inverse_weight_mean<R: Rng + ?Sized>(p: f64, draws: usize, rng: &mut R) -> Estimate {
    let xs: Vec<f64> = (0..draws)
        .map(|_| if rng.gen::<f64>() < p { 1.0 / p } else { 0.0 })
        .collect();
    Estimate::from_samples(&xs)
}
