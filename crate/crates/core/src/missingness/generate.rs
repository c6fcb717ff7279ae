use rand::Rng;

use super::mask::MaskMatrix;
use super::pattern::{sample_missing_columns, Mechanism, PatternConfig};
use super::propensity::{build_propensity, ExpandedFeatures, PropensityModel};
use crate::data::TabularDataset;
use crate::error::Result;

/// Redraw attempts for a row that came out with no observed entry.
pub const MAX_ROW_REDRAWS: usize = 100;

/// Everything produced by one semi-synthetic missingness draw.
#[derive(Debug, Clone)]
pub struct GeneratedMissingness {
    pub mask: MaskMatrix,
    /// Columns that received missingness.
    pub missing_set: Vec<usize>,
    /// Observation model of each column in `missing_set`, in the same order.
    pub models: Vec<PropensityModel>,
    /// Number of rows that needed a redraw.
    pub redrawn_rows: usize,
    /// Rows where a single entry had to be forced observed.
    pub forced_rows: usize,
}

impl GeneratedMissingness {
    /// True propensity `P(observed)` of every entry (1 for complete columns).
    pub fn propensity_matrix(&self, x: &ExpandedFeatures) -> ndarray::Array2<f64> {
        let (n, d) = self.mask.dim();
        let mut out = ndarray::Array2::ones((n, d));
        for m in &self.models {
            for (i, p) in m.propensities(x).into_iter().enumerate() {
                out[[i, m.target_column]] = p;
            }
        }
        out
    }
}

/// Draws an observed mask for a complete, preprocessed dataset.
///
/// Columns outside the missing set stay fully observed. Rows left with no
/// observed entry are redrawn up to [`MAX_ROW_REDRAWS`] times; if that still
/// fails, the entry with the highest propensity in the row is forced to 1.
pub fn generate_masks<R: Rng + ?Sized>(
    ds: &TabularDataset,
    config: &PatternConfig,
    mechanism: Mechanism,
    rng: &mut R,
) -> Result<GeneratedMissingness> {
    config.validate()?;
    let (n, d) = ds.values.dim();
    let primary = sample_missing_columns(d, config.p_col, config.requires_complement(), rng)?;

    // Columns with missingness, and the observed-rate distribution of each.
    let mut targets = Vec::new();
    for j in 0..d {
        if primary.contains(&j) {
            targets.push((j, config.primary_rate));
        } else if let Some(rate) = config.complement_rate {
            targets.push((j, rate));
        }
    }
    let missing_set: Vec<usize> = targets.iter().map(|t| t.0).collect();

    let x = ExpandedFeatures::from_dataset(ds);
    let mut models = Vec::with_capacity(targets.len());
    for &(j, rate) in &targets {
        let p_j = rate.sample(rng);
        models.push(build_propensity(
            &x,
            j,
            mechanism,
            config.pattern,
            &missing_set,
            p_j,
            rng,
        )?);
    }

    let probs: Vec<Vec<f64>> = models.iter().map(|m| m.propensities(&x)).collect();
    let mut mask = MaskMatrix::ones(n, d);
    for (m, p) in models.iter().zip(&probs) {
        for i in 0..n {
            mask.set(i, m.target_column, rng.gen::<f64>() < p[i]);
        }
    }

    let mut redrawn_rows = 0;
    let mut forced_rows = 0;
    for i in 0..n {
        if mask.row_count(i) > 0 {
            continue;
        }
        redrawn_rows += 1;
        let mut ok = false;
        for _ in 0..MAX_ROW_REDRAWS {
            for (m, p) in models.iter().zip(&probs) {
                mask.set(i, m.target_column, rng.gen::<f64>() < p[i]);
            }
            if mask.row_count(i) > 0 {
                ok = true;
                break;
            }
        }
        if !ok {
            forced_rows += 1;
            let (best, _) = models
                .iter()
                .zip(&probs)
                .map(|(m, p)| (m.target_column, p[i]))
                .fold((missing_set[0], f64::MIN), |acc, c| if c.1 > acc.1 { c } else { acc });
            mask.set(i, best, true);
        }
    }
    if redrawn_rows > 0 {
        log::debug!("redrew {redrawn_rows} fully-missing rows ({forced_rows} forced)");
    }

    Ok(GeneratedMissingness {
        mask,
        missing_set,
        models,
        redrawn_rows,
        forced_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::{generate, SyntheticSpec};
    use crate::missingness::Pattern;
    use crate::rng::rng_from_seed;

    #[test]
    fn columns_outside_set_are_complete() {
        let ds = generate(&SyntheticSpec::diabetes_like(), 4).unwrap();
        let mut rng = rng_from_seed(11);
        let g = generate_masks(&ds, &PatternConfig::monotone(0.3), Mechanism::Mnar, &mut rng)
            .unwrap();
        let means = g.mask.column_means();
        for j in 0..ds.n_cols() {
            if !g.missing_set.contains(&j) {
                assert_eq!(means[j], 1.0);
            }
        }
        assert!(!g.missing_set.is_empty() && g.missing_set.len() < ds.n_cols());
    }

    #[test]
    fn no_fully_missing_rows() {
        let ds = generate(&SyntheticSpec::diabetes_like(), 4).unwrap();
        let mut rng = rng_from_seed(5);
        let g = generate_masks(&ds, &PatternConfig::general(), Mechanism::Mnar, &mut rng).unwrap();
        assert_eq!(g.missing_set.len(), ds.n_cols());
        for i in 0..ds.n_rows() {
            assert!(g.mask.row_count(i) > 0);
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let ds = generate(&SyntheticSpec::diabetes_like(), 4).unwrap();
        let a = generate_masks(&ds, &PatternConfig::quasi_monotone(), Mechanism::Mar, &mut rng_from_seed(8))
            .unwrap();
        let b = generate_masks(&ds, &PatternConfig::quasi_monotone(), Mechanism::Mar, &mut rng_from_seed(8))
            .unwrap();
        assert_eq!(a.mask, b.mask);
        assert_eq!(a.missing_set.len(), ds.n_cols());
        assert_eq!(PatternConfig::quasi_monotone().pattern, Pattern::QuasiMonotone);
    }
}
