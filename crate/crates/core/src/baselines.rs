//! Reference imputers: column mean/mode and k-nearest neighbours.

use ndarray::Array2;

use crate::data::{encode_level, level_of, IncompleteDataset};
use crate::error::{Error, Result};

/// Default neighbour count.
pub const DEFAULT_K: usize = 5;

/// Most frequent level among `values` (encoded over `k` levels); ties go to
/// the lowest level.
fn mode(values: impl Iterator<Item = f64>, k: usize) -> Option<f64> {
    let mut counts = vec![0usize; k.max(1)];
    let mut any = false;
    for v in values {
        counts[level_of(v, k)] += 1;
        any = true;
    }
    if !any {
        return None;
    }
    let mut best = 0;
    for (level, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = level;
        }
    }
    Some(encode_level(best, k))
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Fill value for column `j` from the given donor values.
fn aggregate(ds: &IncompleteDataset, j: usize, values: impl Iterator<Item = f64>) -> Option<f64> {
    match ds.base.cardinality(j) {
        Some(k) => mode(values, k),
        None => mean(values),
    }
}

/// Per-column fill values: mean of observed entries for numerical columns,
/// most frequent observed level for categorical ones.
pub fn naive_fill_values(ds: &IncompleteDataset) -> Result<Vec<f64>> {
    (0..ds.n_cols())
        .map(|j| {
            let observed = (0..ds.n_rows())
                .filter(|&i| ds.observed_mask.get(i, j))
                .map(|i| ds.values[[i, j]]);
            aggregate(ds, j, observed).ok_or(Error::FullyMissingColumn(j))
        })
        .collect()
}

/// Completed matrix with every missing entry replaced by its column's naive
/// fill value.
pub fn naive_impute(ds: &IncompleteDataset) -> Result<Array2<f64>> {
    let fill = naive_fill_values(ds)?;
    let mut out = ds.values.clone();
    for ((i, j), v) in out.indexed_iter_mut() {
        if !ds.observed_mask.get(i, j) {
            *v = fill[j];
        }
    }
    Ok(out)
}

/// Euclidean distance over co-observed columns, scaled by
/// `sqrt(d / co_observed)`. `None` when no column is co-observed.
pub fn partial_distance(ds: &IncompleteDataset, a: usize, b: usize) -> Option<f64> {
    let d = ds.n_cols();
    let mut sq = 0.0;
    let mut shared = 0usize;
    for j in 0..d {
        if ds.observed_mask.get(a, j) && ds.observed_mask.get(b, j) {
            let diff = ds.values[[a, j]] - ds.values[[b, j]];
            sq += diff * diff;
            shared += 1;
        }
    }
    (shared > 0).then(|| (sq * d as f64 / shared as f64).sqrt())
}

/// Fills each missing entry from the `k` nearest rows that observe the
/// column. Falls back to the naive fill when fewer than `k` such rows share
/// at least one observed column with the target row.
pub fn knn_impute(ds: &IncompleteDataset, k: usize) -> Result<Array2<f64>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let (n, d) = (ds.n_rows(), ds.n_cols());
    let fallback = naive_fill_values(ds)?;
    let mut out = ds.values.clone();
    let mut dist: Vec<Option<f64>> = vec![None; n];
    let mut donors: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        if ds.observed_mask.row_count(i) == d {
            continue;
        }
        for (r, slot) in dist.iter_mut().enumerate() {
            *slot = if r == i { None } else { partial_distance(ds, i, r) };
        }
        for j in 0..d {
            if ds.observed_mask.get(i, j) {
                continue;
            }
            donors.clear();
            donors.extend(
                (0..n).filter_map(|r| dist[r].filter(|_| ds.observed_mask.get(r, j)).map(|dr| (dr, r))),
            );
            out[[i, j]] = if donors.len() < k {
                fallback[j]
            } else {
                donors.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let nearest = donors[..k].iter().map(|&(_, r)| ds.values[[r, j]]);
                aggregate(ds, j, nearest).expect("k >= 1 donors")
            };
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnSchema, TabularDataset};
    use crate::missingness::MaskMatrix;
    use crate::rng::rng_from_seed;
    use ndarray::array;
    use rand::Rng;

    fn incomplete(values: Array2<f64>, schema: Vec<ColumnSchema>, mask: &[Vec<u8>]) -> IncompleteDataset {
        let base = TabularDataset::from_encoded(values, schema).unwrap();
        IncompleteDataset::new(base, MaskMatrix::from_rows(mask).unwrap()).unwrap()
    }

    fn num(d: usize) -> Vec<ColumnSchema> {
        (0..d).map(|j| ColumnSchema::numerical(format!("x{j}"))).collect()
    }

    #[test]
    fn naive_mean_and_mode() {
        let ds = incomplete(
            array![[0.2, 0.0], [0.4, 0.0], [0.9, 0.5], [0.1, 1.0]],
            vec![ColumnSchema::numerical("a"), ColumnSchema::categorical("b", Some(3))],
            &[vec![1, 1], vec![1, 1], vec![0, 1], vec![0, 0]],
        );
        let out = naive_impute(&ds).unwrap();
        assert!((out[[2, 0]] - 0.3).abs() < 1e-15);
        assert_eq!(out[[3, 0]], out[[2, 0]]);
        assert_eq!(out[[3, 1]], 0.0);
        assert_eq!(out[[0, 0]], 0.2);
        assert_eq!(out[[2, 1]], 0.5);
    }

    #[test]
    fn mode_ties_pick_lowest_level() {
        assert_eq!(mode([1.0, 0.5, 0.5, 1.0].into_iter(), 3), Some(0.5));
        assert_eq!(mode([1.0, 0.0].into_iter(), 2), Some(0.0));
    }

    #[test]
    fn naive_rejects_fully_missing_column() {
        let ds = incomplete(array![[0.2, 0.1], [0.4, 0.3]], num(2), &[vec![1, 0], vec![1, 0]]);
        assert!(matches!(naive_impute(&ds), Err(Error::FullyMissingColumn(1))));
    }

    #[test]
    fn knn_copies_exact_duplicate() {
        let ds = incomplete(
            array![[0.1, 0.2, 0.3], [0.9, 0.8, 0.7], [0.1, 0.2, 0.0], [0.5, 0.5, 0.5]],
            num(3),
            &[vec![1, 1, 1], vec![1, 1, 1], vec![1, 1, 0], vec![1, 1, 1]],
        );
        let out = knn_impute(&ds, 1).unwrap();
        assert_eq!(out[[2, 2]], 0.3);
    }

    #[test]
    fn knn_falls_back_without_candidates() {
        let ds = incomplete(
            array![[0.1, 0.2], [0.9, 0.8], [0.4, 0.6]],
            num(2),
            &[vec![1, 1], vec![1, 0], vec![0, 1]],
        );
        // only one row observes column 1 alongside row 1
        let out = knn_impute(&ds, 2).unwrap();
        let naive = naive_impute(&ds).unwrap();
        assert_eq!(out[[1, 1]], naive[[1, 1]]);
        assert_eq!(out[[2, 0]], naive[[2, 0]]);
    }

    #[test]
    fn distance_scaling() {
        let ds = incomplete(array![[0.0, 0.0, 0.0, 0.0], [1.0, 9.0, 1.0, 9.0]], num(4), &[vec![1, 0, 1, 1], vec![1, 1, 1, 0]]);
        // co-observed columns 0 and 2: sqrt(2 * 4 / 2)
        assert!((partial_distance(&ds, 0, 1).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn knn_beats_naive_on_clusters() {
        let mut rng = rng_from_seed(8);
        let n = 50;
        let values = Array2::from_shape_fn((n, 3), |(i, _)| if i % 2 == 0 { 0.1 } else { 0.9 } + rng.gen_range(-0.05..0.05));
        let mask: Vec<Vec<u8>> = (0..n).map(|i| vec![1, 1, u8::from(i % 5 != 0)]).collect();
        let ds = incomplete(values.clone(), num(3), &mask);
        let rmse = |out: &Array2<f64>| {
            let missing: Vec<usize> = (0..n).filter(|i| i % 5 == 0).collect();
            let se: f64 = missing.iter().map(|&i| (out[[i, 2]] - values[[i, 2]]).powi(2)).sum();
            (se / missing.len() as f64).sqrt()
        };
        let knn = rmse(&knn_impute(&ds, DEFAULT_K).unwrap());
        let naive = rmse(&naive_impute(&ds).unwrap());
        assert!(knn < naive / 4.0, "knn {knn} naive {naive}");
    }

    #[test]
    fn knn_with_all_donors_approaches_mean() {
        let mut rng = rng_from_seed(21);
        let n = 400;
        let values = Array2::from_shape_fn((n, 2), |_| rng.gen_range(0.0..1.0));
        let mut mask = vec![vec![1u8, 1]; n];
        mask[0][1] = 0;
        let ds = incomplete(values, num(2), &mask);
        let knn = knn_impute(&ds, n - 1).unwrap();
        let naive = naive_impute(&ds).unwrap();
        assert!((knn[[0, 1]] - naive[[0, 1]]).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn observed_entries_untouched(seed in 0u64..500) {
            let mut rng = rng_from_seed(seed);
            let n = 12;
            let values = Array2::from_shape_fn((n, 3), |_| rng.gen_range(0.0..1.0));
            let mask: Vec<Vec<u8>> = (0..n)
                .map(|i| (0..3).map(|j| u8::from(i < 2 || j == i % 3 || rng.gen_bool(0.6))).collect())
                .collect();
            let ds = incomplete(values.clone(), num(3), &mask);
            for out in [naive_impute(&ds).unwrap(), knn_impute(&ds, 3).unwrap()] {
                for i in 0..n {
                    for j in 0..3 {
                        if mask[i][j] == 1 {
                            proptest::prop_assert_eq!(out[[i, j]], values[[i, j]]);
                        } else {
                            proptest::prop_assert!(out[[i, j]].is_finite());
                        }
                    }
                }
            }
        }
    }
}
