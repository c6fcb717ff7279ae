use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Structural class of which columns may be missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Monotone,
    QuasiMonotone,
    General,
}

impl FromStr for Pattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "monotone" => Ok(Pattern::Monotone),
            "quasi_monotone" | "quasi" => Ok(Pattern::QuasiMonotone),
            "general" | "non_monotone" => Ok(Pattern::General),
            other => Err(Error::InvalidArgument(format!("unknown pattern `{other}`"))),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pattern::Monotone => "monotone",
            Pattern::QuasiMonotone => "quasi_monotone",
            Pattern::General => "general",
        })
    }
}

/// Missingness mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Mcar,
    Mar,
    Mnar,
}

impl FromStr for Mechanism {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mcar" => Ok(Mechanism::Mcar),
            "mar" => Ok(Mechanism::Mar),
            "mnar" | "nmar" => Ok(Mechanism::Mnar),
            other => Err(Error::InvalidArgument(format!("unknown mechanism `{other}`"))),
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mechanism::Mcar => "mcar",
            Mechanism::Mar => "mar",
            Mechanism::Mnar => "mnar",
        })
    }
}

/// Observed-rate distribution for a group of columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RateDist {
    Fixed(f64),
    Uniform(f64, f64),
}

impl RateDist {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            RateDist::Fixed(p) => p,
            RateDist::Uniform(lo, hi) => rng.gen_range(lo..hi),
        }
    }
}

/// Parameters of a missing-pattern recipe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternConfig {
    pub pattern: Pattern,
    /// Fraction of columns drawn into the primary missing set.
    pub p_col: f64,
    /// Observed-rate distribution of the primary set.
    pub primary_rate: RateDist,
    /// Observed-rate distribution of the complement. `None` means the
    /// complement stays fully observed.
    pub complement_rate: Option<RateDist>,
}

impl PatternConfig {
    /// `p_col` must be 0.3 or 0.6; every missing column is observed with
    /// probability 0.5 and the rest stay complete.
    pub fn monotone(p_col: f64) -> Self {
        PatternConfig {
            pattern: Pattern::Monotone,
            p_col,
            primary_rate: RateDist::Fixed(0.5),
            complement_rate: None,
        }
    }

    /// 60% of columns are nearly complete (observed rate in `[0.95, 0.99)`),
    /// the rest observed at a rate in `[0.2, 0.8)`.
    pub fn quasi_monotone() -> Self {
        PatternConfig {
            pattern: Pattern::QuasiMonotone,
            p_col: 0.6,
            primary_rate: RateDist::Uniform(0.95, 0.99),
            complement_rate: Some(RateDist::Uniform(0.2, 0.8)),
        }
    }

    /// Every column observed at a rate in `[0.2, 0.8)`.
    pub fn general() -> Self {
        PatternConfig {
            pattern: Pattern::General,
            p_col: 1.0,
            primary_rate: RateDist::Uniform(0.2, 0.8),
            complement_rate: None,
        }
    }

    /// Default recipe for a pattern (monotone uses `p_col = 0.3`).
    pub fn for_pattern(pattern: Pattern) -> Self {
        match pattern {
            Pattern::Monotone => Self::monotone(0.3),
            Pattern::QuasiMonotone => Self::quasi_monotone(),
            Pattern::General => Self::general(),
        }
    }

    /// Whether the primary set must leave at least one column out.
    pub fn requires_complement(&self) -> bool {
        self.pattern != Pattern::General
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_col > 0.0 && self.p_col <= 1.0) {
            return Err(Error::InvalidArgument(format!("p_col {} outside (0, 1]", self.p_col)));
        }
        if self.requires_complement() && self.p_col >= 1.0 {
            return Err(Error::InvalidArgument(
                "pattern needs a non-empty complement, p_col must be < 1".into(),
            ));
        }
        Ok(())
    }
}

const MAX_COLUMN_DRAWS: usize = 10_000;

/// Draws the set of columns that receive missingness: each column is
/// included independently with probability `p_col`. Empty draws are
/// rejected, as are full draws when `require_complement` is set.
pub fn sample_missing_columns<R: Rng + ?Sized>(
    d: usize,
    p_col: f64,
    require_complement: bool,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("need d >= 2 columns, got {d}")));
    }
    if !(p_col > 0.0 && p_col <= 1.0) {
        return Err(Error::InvalidArgument(format!("p_col {p_col} outside (0, 1]")));
    }
    if p_col >= 1.0 {
        if require_complement {
            return Err(Error::InvalidArgument(
                "p_col = 1 leaves no observed complement".into(),
            ));
        }
        return Ok((0..d).collect());
    }
    for _ in 0..MAX_COLUMN_DRAWS {
        let set: Vec<usize> = (0..d).filter(|_| rng.gen::<f64>() < p_col).collect();
        if set.is_empty() || (require_complement && set.len() == d) {
            continue;
        }
        return Ok(set);
    }
    Err(Error::InvalidArgument(format!(
        "could not draw a valid missing-column set for d={d}, p_col={p_col}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn certain_inclusion() {
        let mut rng = rng_from_seed(0);
        assert_eq!(sample_missing_columns(5, 1.0, false, &mut rng).unwrap(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn rejects_single_column() {
        let mut rng = rng_from_seed(0);
        assert!(sample_missing_columns(1, 0.5, false, &mut rng).is_err());
        assert!(sample_missing_columns(4, 1.0, true, &mut rng).is_err());
        assert!(sample_missing_columns(4, 0.0, false, &mut rng).is_err());
    }

    #[test]
    fn complement_is_never_empty_when_required() {
        let mut rng = rng_from_seed(3);
        for _ in 0..500 {
            let s = sample_missing_columns(3, 0.9, true, &mut rng).unwrap();
            assert!(!s.is_empty() && s.len() < 3);
        }
    }

    #[test]
    fn parses_names() {
        assert_eq!("quasi-monotone".parse::<Pattern>().unwrap(), Pattern::QuasiMonotone);
        assert_eq!("MNAR".parse::<Mechanism>().unwrap(), Mechanism::Mnar);
        assert!("sometimes".parse::<Mechanism>().is_err());
        assert!(PatternConfig::monotone(1.0).validate().is_err());
        assert!(PatternConfig::general().validate().is_ok());
    }
}
