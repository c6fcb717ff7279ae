//! Seeded synthetic tables with latent-factor structure.
//!
//! These stand in for the public benchmark tables at matching sizes and
//! column-type mixes, so the harness runs without network access.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::dataset::{preprocess, RawColumn, RawDataset, TabularDataset};
use super::schema::ColumnSchema;
use crate::error::Result;
use crate::rng::rng_from_seed;

/// Shape of a synthetic table.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub n_numerical: usize,
    /// Number of levels of each categorical column.
    pub categorical_levels: Vec<usize>,
    pub latent_dim: usize,
    /// Standard deviation of the idiosyncratic noise added to every column.
    pub noise: f64,
}

impl SyntheticSpec {
    /// 1,599 rows, 11 numerical columns.
    pub fn wine_like() -> Self {
        SyntheticSpec {
            n: 1_599,
            n_numerical: 11,
            categorical_levels: vec![],
            latent_dim: 3,
            noise: 0.5,
        }
    }

    /// 442 rows, 9 numerical columns and one binary categorical column.
    pub fn diabetes_like() -> Self {
        SyntheticSpec {
            n: 442,
            n_numerical: 9,
            categorical_levels: vec![2],
            latent_dim: 3,
            noise: 0.5,
        }
    }

    /// Named presets accepted by the harness config.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "wine_like" | "wine" => Some(Self::wine_like()),
            "diabetes_like" | "diabetes" => Some(Self::diabetes_like()),
            _ => None,
        }
    }

    pub fn d(&self) -> usize {
        self.n_numerical + self.categorical_levels.len()
    }
}

/// Draws a raw table: each column is a noisy, mildly non-linear function of
/// a shared Gaussian latent vector. Categorical columns threshold a latent
/// score into equally likely levels.
pub fn generate_raw(spec: &SyntheticSpec, seed: u64) -> Result<RawDataset> {
    let mut rng = rng_from_seed(seed);
    let d = spec.d();
    let k = spec.latent_dim.max(1);
    let loadings: Vec<Vec<f64>> = (0..d)
        .map(|_| (0..k).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let curvature: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect();

    let mut numerical = vec![Vec::with_capacity(spec.n); spec.n_numerical];
    let mut categorical = vec![Vec::with_capacity(spec.n); spec.categorical_levels.len()];
    for _ in 0..spec.n {
        let z: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
        for j in 0..d {
            let lin: f64 = loadings[j].iter().zip(&z).map(|(a, b)| a * b).sum::<f64>()
                / (k as f64).sqrt();
            let eps: f64 = StandardNormal.sample(&mut rng);
            let score = lin + curvature[j] * lin * lin + spec.noise * eps;
            if j < spec.n_numerical {
                numerical[j].push(score);
            } else {
                let c = j - spec.n_numerical;
                let levels = spec.categorical_levels[c].max(1);
                // Logistic squashing then equal-width bins.
                let u = 1.0 / (1.0 + (-1.7 * score).exp());
                let level = ((u * levels as f64) as usize).min(levels - 1);
                categorical[c].push(format!("L{level}"));
            }
        }
    }

    let mut schema = Vec::with_capacity(d);
    let mut columns = Vec::with_capacity(d);
    for (j, col) in numerical.into_iter().enumerate() {
        schema.push(ColumnSchema::numerical(format!("num{j}")));
        columns.push(RawColumn::Numerical(col));
    }
    for (c, col) in categorical.into_iter().enumerate() {
        schema.push(ColumnSchema::categorical(format!("cat{c}"), None));
        columns.push(RawColumn::Categorical(col));
    }
    RawDataset::new(schema, columns)
}

/// Draws and preprocesses a synthetic table.
pub fn generate(spec: &SyntheticSpec, seed: u64) -> Result<TabularDataset> {
    preprocess(&generate_raw(spec, seed)?)
}
