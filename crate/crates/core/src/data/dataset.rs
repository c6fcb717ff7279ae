use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use super::fmt::sig9;
use super::quantile::QuantileMap;
use super::schema::{read_schema, ColumnKind, ColumnSchema};
use crate::error::{Error, Result};

/// Label assigned to regrouped minor categories.
pub const OTHER_LABEL: &str = "__other__";

/// A column as read from disk, before encoding.
#[derive(Debug, Clone, PartialEq)]
pub enum RawColumn {
    Numerical(Vec<f64>),
    Categorical(Vec<String>),
}

impl RawColumn {
    pub fn len(&self) -> usize {
        match self {
            RawColumn::Numerical(v) => v.len(),
            RawColumn::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A parsed table whose categorical columns still hold their raw labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub schema: Vec<ColumnSchema>,
    pub columns: Vec<RawColumn>,
}

impl RawDataset {
    pub fn new(schema: Vec<ColumnSchema>, columns: Vec<RawColumn>) -> Result<Self> {
        if schema.len() != columns.len() {
            return Err(Error::Shape {
                expected: format!("{} columns", schema.len()),
                got: format!("{} columns", columns.len()),
            });
        }
        let n = columns.first().map_or(0, RawColumn::len);
        if n == 0 {
            return Err(Error::Empty("dataset has no rows".into()));
        }
        for (s, c) in schema.iter().zip(&columns) {
            let kind_ok = matches!(
                (s.kind, c),
                (ColumnKind::Numerical, RawColumn::Numerical(_))
                    | (ColumnKind::Categorical, RawColumn::Categorical(_))
            );
            if !kind_ok {
                return Err(Error::Schema(format!("column `{}` kind mismatch", s.name)));
            }
            if c.len() != n {
                return Err(Error::Shape {
                    expected: format!("{n} rows"),
                    got: format!("{} rows in `{}`", c.len(), s.name),
                });
            }
        }
        Ok(RawDataset { schema, columns })
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, RawColumn::len)
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }
}

/// Reads a headed CSV, typing each column according to `schema`.
pub fn load_dataset_from_reader<R: Read>(reader: R, schema: &[ColumnSchema]) -> Result<RawDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Empty("CSV has no header".into()));
    }
    let by_name: HashMap<&str, &ColumnSchema> =
        schema.iter().map(|c| (c.name.as_str(), c)).collect();
    for c in schema {
        if !header.iter().any(|h| h == &c.name) {
            return Err(Error::Schema(format!(
                "schema column `{}` is absent from the CSV header",
                c.name
            )));
        }
    }
    let mut ordered = Vec::with_capacity(header.len());
    for h in &header {
        let col = by_name
            .get(h.as_str())
            .ok_or_else(|| Error::Schema(format!("CSV column `{h}` is not listed in the schema")))?;
        ordered.push((*col).clone());
    }

    let mut columns: Vec<RawColumn> = ordered
        .iter()
        .map(|c| match c.kind {
            ColumnKind::Numerical => RawColumn::Numerical(Vec::new()),
            ColumnKind::Categorical => RawColumn::Categorical(Vec::new()),
        })
        .collect();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::Shape {
                expected: format!("{} fields", header.len()),
                got: format!("{} fields on row {}", record.len(), row + 1),
            });
        }
        for (j, token) in record.iter().enumerate() {
            match &mut columns[j] {
                RawColumn::Numerical(v) => {
                    let x: f64 = token.parse().map_err(|_| Error::NonNumeric {
                        row: row + 1,
                        column: header[j].clone(),
                        token: token.to_string(),
                    })?;
                    if !x.is_finite() {
                        return Err(Error::NonNumeric {
                            row: row + 1,
                            column: header[j].clone(),
                            token: token.to_string(),
                        });
                    }
                    v.push(x);
                }
                RawColumn::Categorical(v) => v.push(token.to_string()),
            }
        }
    }
    if columns[0].is_empty() {
        return Err(Error::Empty("CSV has a header but no data rows".into()));
    }
    RawDataset::new(ordered, columns)
}

pub fn load_dataset(csv_path: impl AsRef<Path>, schema_path: impl AsRef<Path>) -> Result<RawDataset> {
    let schema = read_schema(schema_path)?;
    let csv_path = csv_path.as_ref();
    let file = std::fs::File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
    if file.metadata().map(|m| m.len()).unwrap_or(0) == 0 {
        return Err(Error::Empty(format!("{} is empty", csv_path.display())));
    }
    load_dataset_from_reader(file, &schema)
}

/// Minimum category frequency below which a level is folded into
/// [`OTHER_LABEL`].
pub fn regroup_threshold(n: usize) -> usize {
    let scaled = n as f64 / 100.0;
    if scaled > 30.0 {
        scaled.round() as usize
    } else {
        30
    }
}

/// Folds rare categories into a shared [`OTHER_LABEL`] level.
///
/// If the folded group is itself still rarer than the threshold, the next
/// rarest category is merged into it until it reaches the threshold or the
/// column has a single level left.
pub fn regroup_minor_categories(ds: &RawDataset) -> RawDataset {
    let t = regroup_threshold(ds.n_rows());
    let mut out = ds.clone();
    for (schema, col) in out.schema.iter_mut().zip(out.columns.iter_mut()) {
        let RawColumn::Categorical(labels) = col else {
            continue;
        };
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for l in labels.iter() {
            *counts.entry(l.as_str()).or_default() += 1;
        }
        let mut by_freq: Vec<(&str, usize)> = counts.iter().map(|(k, v)| (*k, *v)).collect();
        by_freq.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(b.0)));

        // by_freq is ascending, so the rare levels form a prefix.
        let mut n_folded = by_freq.iter().take_while(|(_, c)| *c < t).count();
        if n_folded > 0 {
            let mut total: usize = by_freq[..n_folded].iter().map(|x| x.1).sum();
            while total < t && n_folded < by_freq.len() {
                total += by_freq[n_folded].1;
                n_folded += 1;
            }
        }
        let folded = by_freq[..n_folded].iter().map(|x| x.0);
        let folded: std::collections::HashSet<String> = folded.map(str::to_string).collect();
        if !folded.is_empty() {
            for l in labels.iter_mut() {
                if folded.contains(l.as_str()) {
                    *l = OTHER_LABEL.to_string();
                }
            }
        }
        let k = labels
            .iter()
            .collect::<std::collections::BTreeSet<_>>()
            .len();
        schema.cardinality = Some(k);
    }
    out
}

/// A preprocessed table: categorical columns encoded to `level / (K - 1)`,
/// numerical columns (after [`quantile_transform`]) mapped into `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    pub values: Array2<f64>,
    pub schema: Vec<ColumnSchema>,
    /// Per categorical column, the raw labels ordered by level index.
    pub level_maps: Vec<Option<Vec<String>>>,
    /// Per numerical column, the fitted empirical-CDF map.
    pub transform_state: Vec<Option<QuantileMap>>,
}

impl TabularDataset {
    /// Builds an already-encoded dataset directly (for synthetic data and
    /// tests). Categorical values must lie on their level grid.
    pub fn from_encoded(values: Array2<f64>, schema: Vec<ColumnSchema>) -> Result<Self> {
        let (n, d) = values.dim();
        if n == 0 {
            return Err(Error::Empty("dataset has no rows".into()));
        }
        if d < 2 || schema.len() != d {
            return Err(Error::Shape {
                expected: format!("{} >= 2 columns matching schema", schema.len()),
                got: format!("{d}"),
            });
        }
        let level_maps = schema
            .iter()
            .map(|c| {
                c.cardinality
                    .filter(|_| c.is_categorical())
                    .map(|k| (0..k).map(|l| l.to_string()).collect())
            })
            .collect();
        Ok(TabularDataset {
            values,
            transform_state: vec![None; d],
            schema,
            level_maps,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn kinds(&self) -> Vec<ColumnKind> {
        self.schema.iter().map(|c| c.kind).collect()
    }

    /// Cardinality of column `j` if categorical.
    pub fn cardinality(&self, j: usize) -> Option<usize> {
        let c = &self.schema[j];
        if c.is_categorical() {
            c.cardinality
        } else {
            None
        }
    }

    /// Maps an encoded categorical value back to its label.
    pub fn decode_label(&self, j: usize, value: f64) -> Option<&str> {
        let labels = self.level_maps[j].as_ref()?;
        let level = level_of(value, labels.len());
        labels.get(level).map(String::as_str)
    }

    /// Writes the values as CSV with 9 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.schema.iter().map(|c| c.name.as_str()))?;
        for row in self.values.rows() {
            w.write_record(row.iter().map(|&x| sig9(x)))?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Encoded value of `level` in a column of cardinality `k`.
pub fn encode_level(level: usize, k: usize) -> f64 {
    if k <= 1 {
        0.0
    } else {
        level as f64 / (k - 1) as f64
    }
}

/// Nearest level index of an encoded value.
pub fn level_of(value: f64, k: usize) -> usize {
    if k <= 1 {
        return 0;
    }
    let scaled = (value.clamp(0.0, 1.0) * (k - 1) as f64).round();
    scaled as usize
}

/// Snaps a prediction to the nearest valid encoded level.
pub fn snap_to_level(value: f64, k: usize) -> f64 {
    encode_level(level_of(value, k), k)
}

/// Maps each categorical column to integer levels by sorted label order and
/// scales them to `level / (K - 1)`. Numerical columns pass through unchanged.
pub fn encode_categoricals(ds: &RawDataset) -> TabularDataset {
    let n = ds.n_rows();
    let d = ds.n_cols();
    let mut values = Array2::<f64>::zeros((n, d));
    let mut schema = ds.schema.clone();
    let mut level_maps = vec![None; d];
    for (j, col) in ds.columns.iter().enumerate() {
        match col {
            RawColumn::Numerical(v) => {
                for (i, &x) in v.iter().enumerate() {
                    values[[i, j]] = x;
                }
            }
            RawColumn::Categorical(labels) => {
                let mut sorted: Vec<String> = labels.clone();
                sorted.sort();
                sorted.dedup();
                let k = sorted.len();
                let index: HashMap<&str, usize> = sorted
                    .iter()
                    .enumerate()
                    .map(|(i, l)| (l.as_str(), i))
                    .collect();
                for (i, l) in labels.iter().enumerate() {
                    values[[i, j]] = encode_level(index[l.as_str()], k);
                }
                schema[j].cardinality = Some(k);
                level_maps[j] = Some(sorted);
            }
        }
    }
    TabularDataset {
        values,
        schema,
        level_maps,
        transform_state: vec![None; d],
    }
}

/// Maps every numerical column through its empirical CDF (midpoint ranks for
/// ties), storing the fitted map.
pub fn quantile_transform(ds: &TabularDataset) -> TabularDataset {
    let mut out = ds.clone();
    for j in 0..ds.n_cols() {
        if ds.schema[j].kind != ColumnKind::Numerical {
            continue;
        }
        let col: Vec<f64> = ds.values.column(j).to_vec();
        let map = QuantileMap::fit(&col);
        if map.is_degenerate() {
            log::debug!("column `{}` is constant; mapped to 0.5", ds.schema[j].name);
        }
        for (i, &x) in col.iter().enumerate() {
            out.values[[i, j]] = map.transform(x);
        }
        out.transform_state[j] = Some(map);
    }
    out
}

/// The full preprocessing pipeline: regroup, encode, quantile-transform.
pub fn preprocess(raw: &RawDataset) -> Result<TabularDataset> {
    if raw.n_cols() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 columns, got {}",
            raw.n_cols()
        )));
    }
    let regrouped = regroup_minor_categories(raw);
    Ok(quantile_transform(&encode_categoricals(&regrouped)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::parse_schema;

    fn cat_ds(labels: Vec<&str>) -> RawDataset {
        let n = labels.len();
        RawDataset::new(
            vec![
                ColumnSchema::categorical("c", None),
                ColumnSchema::numerical("x"),
            ],
            vec![
                RawColumn::Categorical(labels.into_iter().map(String::from).collect()),
                RawColumn::Numerical((0..n).map(|i| i as f64).collect()),
            ],
        )
        .unwrap()
    }

    #[test]
    fn loads_small_csv() {
        let schema = parse_schema("age,num\nsex,cat\n").unwrap();
        let csv = "age,sex\n31,m\n45,f\n27,f\n";
        let ds = load_dataset_from_reader(csv.as_bytes(), &schema).unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.n_cols(), 2);
        assert_eq!(ds.columns[0], RawColumn::Numerical(vec![31.0, 45.0, 27.0]));
    }

    #[test]
    fn load_errors() {
        let schema = parse_schema("age,num\nsex,cat\nheight,num\n").unwrap();
        let err = load_dataset_from_reader("age,sex\n1,m\n".as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));

        let schema = parse_schema("age,num\nsex,cat\n").unwrap();
        let err = load_dataset_from_reader("age,sex\nold,m\n".as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, Error::NonNumeric { .. }));

        let err = load_dataset_from_reader("".as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, Error::Empty(_) | Error::Schema(_)));

        let err = load_dataset_from_reader("age,sex\n".as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, Error::Empty(_)));

        let schema = parse_schema("age,num\n").unwrap();
        let err = load_dataset_from_reader("age,sex\n1,m\n".as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn regroup_thresholds() {
        assert_eq!(regroup_threshold(1_000), 30);
        assert_eq!(regroup_threshold(3_000), 30);
        assert_eq!(regroup_threshold(48_842), 488);
        assert_eq!(regroup_threshold(3_150), 32);
    }

    #[test]
    fn regroup_leaves_frequent_categories() {
        let mut labels = vec!["a"; 40];
        labels.extend(vec!["b"; 35]);
        let ds = cat_ds(labels);
        let out = regroup_minor_categories(&ds);
        assert_eq!(out.columns, ds.columns);
        assert_eq!(out.schema[0].cardinality, Some(2));
    }

    #[test]
    fn regroup_folds_rare_levels() {
        let mut labels = vec!["a"; 40];
        labels.extend(vec!["b"; 20]);
        labels.extend(vec!["c"; 15]);
        let ds = cat_ds(labels);
        let out = regroup_minor_categories(&ds);
        let RawColumn::Categorical(l) = &out.columns[0] else { panic!() };
        assert_eq!(l.iter().filter(|s| *s == OTHER_LABEL).count(), 35);
        assert_eq!(out.schema[0].cardinality, Some(2));
    }

    #[test]
    fn regroup_merges_until_other_is_large_enough() {
        let mut labels = vec!["a"; 50];
        labels.extend(vec!["b"; 40]);
        labels.extend(vec!["c"; 5]);
        let ds = cat_ds(labels);
        let out = regroup_minor_categories(&ds);
        let RawColumn::Categorical(l) = &out.columns[0] else { panic!() };
        // c (5) alone is under 30, so b joins it.
        assert_eq!(l.iter().filter(|s| *s == OTHER_LABEL).count(), 45);
        assert_eq!(out.schema[0].cardinality, Some(2));
    }

    #[test]
    fn encodes_sorted_levels() {
        let ds = cat_ds(vec!["c", "a", "b", "a"]);
        let enc = encode_categoricals(&ds);
        let col: Vec<f64> = enc.values.column(0).to_vec();
        assert_eq!(col, vec![1.0, 0.0, 0.5, 0.0]);
        assert_eq!(enc.decode_label(0, 0.5), Some("b"));

        let single = encode_categoricals(&cat_ds(vec!["z", "z"]));
        assert_eq!(single.values.column(0).to_vec(), vec![0.0, 0.0]);

        let two = encode_categoricals(&cat_ds(vec!["y", "x"]));
        assert_eq!(two.values.column(0).to_vec(), vec![1.0, 0.0]);
    }

    #[test]
    fn quantile_midpoints() {
        let ds = TabularDataset::from_encoded(
            ndarray::array![[1.0, 5.0], [2.0, 5.0], [3.0, 5.0], [4.0, 5.0]],
            vec![ColumnSchema::numerical("a"), ColumnSchema::numerical("b")],
        )
        .unwrap();
        let q = quantile_transform(&ds);
        assert_eq!(q.values.column(0).to_vec(), vec![0.125, 0.375, 0.625, 0.875]);
        assert_eq!(q.values.column(1).to_vec(), vec![0.5; 4]);
        assert!(q.transform_state[1].as_ref().unwrap().is_degenerate());
    }

    #[test]
    fn snapping() {
        assert_eq!(snap_to_level(0.62, 3), 0.5);
        assert_eq!(snap_to_level(0.8, 3), 1.0);
        assert_eq!(snap_to_level(-3.0, 3), 0.0);
        assert_eq!(snap_to_level(0.7, 1), 0.0);
    }

    #[test]
    fn csv_dump_uses_nine_digits() {
        let ds = TabularDataset::from_encoded(
            ndarray::array![[1.0 / 3.0, 0.5]],
            vec![ColumnSchema::numerical("a"), ColumnSchema::numerical("b")],
        )
        .unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b\n0.333333333,0.5\n");
    }
}
