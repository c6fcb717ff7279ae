use serde::{Deserialize, Serialize};

/// Empirical-CDF map fitted on one numerical column.
///
/// Each distinct reference value `v` with rank range `[lo, lo + c)` among
/// `n` sorted values maps to `(lo + c / 2) / n`. Values between two
/// references are linearly interpolated; values outside the fitted range
/// clamp to the end points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileMap {
    /// Distinct reference values, ascending.
    pub references: Vec<f64>,
    /// Midpoint CDF value of each reference.
    pub quantiles: Vec<f64>,
}

impl QuantileMap {
    pub fn fit(column: &[f64]) -> Self {
        let mut sorted: Vec<f64> = column.iter().copied().filter(|x| x.is_finite()).collect();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut references = Vec::new();
        let mut quantiles = Vec::new();
        let mut lo = 0;
        while lo < sorted.len() {
            let v = sorted[lo];
            let hi = lo + sorted[lo..].iter().take_while(|&&x| x == v).count();
            references.push(v);
            quantiles.push((lo as f64 + (hi - lo) as f64 / 2.0) / n);
            lo = hi;
        }
        QuantileMap {
            references,
            quantiles,
        }
    }

    /// True when the column was constant at fit time (everything maps to 0.5).
    pub fn is_degenerate(&self) -> bool {
        self.references.len() <= 1
    }

    pub fn transform(&self, x: f64) -> f64 {
        interpolate(&self.references, &self.quantiles, x).clamp(0.0, 1.0)
    }

    /// Approximate inverse, mapping a CDF value back to the original scale.
    pub fn inverse(&self, q: f64) -> f64 {
        interpolate(&self.quantiles, &self.references, q)
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    match xs.len() {
        0 => 0.5,
        1 => ys[0],
        _ => {
            if x <= xs[0] {
                return ys[0];
            }
            if x >= xs[xs.len() - 1] {
                return ys[ys.len() - 1];
            }
            let hi = xs.partition_point(|&r| r <= x);
            let lo = hi - 1;
            if xs[lo] == x {
                return ys[lo];
            }
            let t = (x - xs[lo]) / (xs[hi] - xs[lo]);
            ys[lo] + t * (ys[hi] - ys[lo])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ties_share_midpoint() {
        let m = QuantileMap::fit(&[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(m.transform(2.0), 0.5);
        assert_eq!(m.transform(1.0), 0.125);
        assert_eq!(m.transform(3.0), 0.875);
    }

    #[test]
    fn out_of_range_clamps() {
        let m = QuantileMap::fit(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.transform(-10.0), 0.125);
        assert_eq!(m.transform(10.0), 0.875);
        assert!((m.transform(1.5) - 0.25).abs() < 1e-15);
        assert!((m.inverse(0.25) - 1.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn output_in_unit_interval_and_rank_preserving(
            col in proptest::collection::vec(-1e6f64..1e6, 1..60)
        ) {
            let m = QuantileMap::fit(&col);
            let t: Vec<f64> = col.iter().map(|&x| m.transform(x)).collect();
            for (i, a) in col.iter().enumerate() {
                prop_assert!((0.0..=1.0).contains(&t[i]));
                for (k, b) in col.iter().enumerate() {
                    if a < b {
                        prop_assert!(t[i] < t[k]);
                    }
                    if a == b {
                        prop_assert_eq!(t[i], t[k]);
                    }
                }
            }
        }
    }
}
