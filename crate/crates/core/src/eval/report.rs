use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::{ColumnMetric, ImputationMetrics};
use super::rank::{rank_aggregate, Direction, RankSummary, Scored};
use crate::error::{Error, Result};

/// One evaluated grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset: String,
    pub pattern: String,
    pub mechanism: String,
    pub method: String,
    /// Masking function of model-based methods; empty for baselines.
    pub masking: String,
    pub seed: u64,
    pub imp_acc: f64,
    pub r2: Option<f64>,
    pub acc: Option<f64>,
    pub rmse_all: f64,
    pub rmse_num: Option<f64>,
    pub rmse_cat: Option<f64>,
    #[serde(skip)]
    pub columns: Vec<ColumnMetric>,
}

impl MetricsReport {
    pub fn new(
        dataset: &str,
        pattern: &str,
        mechanism: &str,
        method: &str,
        masking: &str,
        seed: u64,
        m: ImputationMetrics,
    ) -> Self {
        MetricsReport {
            dataset: dataset.into(),
            pattern: pattern.into(),
            mechanism: mechanism.into(),
            method: method.into(),
            masking: masking.into(),
            seed,
            imp_acc: m.imp_acc,
            r2: m.r2,
            acc: m.acc,
            rmse_all: m.rmse_all,
            rmse_num: m.rmse_num,
            rmse_cat: m.rmse_cat,
            columns: m.columns,
        }
    }

    /// Method name qualified by its masking function.
    pub fn variant(&self) -> String {
        if self.masking.is_empty() {
            self.method.clone()
        } else {
            format!("{}[{}]", self.method, self.masking)
        }
    }

    /// Comparison cell: everything except the method.
    pub fn cell(&self) -> String {
        format!("{}/{}/{}/{}", self.dataset, self.pattern, self.mechanism, self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(Error::InvalidArgument(format!("unknown report format `{other}`"))),
        }
    }
}

pub fn write_csv<W: Write>(out: W, reports: &[MetricsReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("report", e))?;
    Ok(())
}

pub fn read_reports<R: Read>(input: R) -> Result<Vec<MetricsReport>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Per-column detail rows of every report.
pub fn write_column_csv<W: Write>(out: W, reports: &[MetricsReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["dataset", "pattern", "mechanism", "method", "masking", "seed", "column", "name", "kind", "n_missing", "score", "rmse"])?;
    for r in reports {
        for c in &r.columns {
            w.write_record([
                r.dataset.clone(),
                r.pattern.clone(),
                r.mechanism.clone(),
                r.method.clone(),
                r.masking.clone(),
                r.seed.to_string(),
                c.column.to_string(),
                c.name.clone(),
                c.kind.to_string(),
                c.n_missing.to_string(),
                c.score.map(|s| s.to_string()).unwrap_or_else(|| "undefined".into()),
                c.rmse.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("column report", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub runs: usize,
    pub imp_acc_mean: f64,
    pub imp_acc_std: f64,
    /// Mean Imp.Acc per dataset.
    pub by_dataset: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub variants: BTreeMap<String, VariantSummary>,
    pub ranks: RankSummary,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

pub fn summarize(reports: &[MetricsReport]) -> GridSummary {
    let mut groups: BTreeMap<String, Vec<&MetricsReport>> = BTreeMap::new();
    for r in reports {
        groups.entry(r.variant()).or_default().push(r);
    }
    let variants = groups
        .into_iter()
        .map(|(name, rs)| {
            let scores: Vec<f64> = rs.iter().map(|r| r.imp_acc).collect();
            let (imp_acc_mean, imp_acc_std) = mean_std(&scores);
            let mut per: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for r in &rs {
                per.entry(r.dataset.clone()).or_default().push(r.imp_acc);
            }
            let by_dataset = per.into_iter().map(|(k, v)| (k, mean_std(&v).0)).collect();
            (
                name,
                VariantSummary {
                    runs: rs.len(),
                    imp_acc_mean,
                    imp_acc_std,
                    by_dataset,
                },
            )
        })
        .collect();
    let scored: Vec<Scored> = reports
        .iter()
        .map(|r| Scored {
            cell: r.cell(),
            method: r.variant(),
            score: r.imp_acc,
        })
        .collect();
    GridSummary {
        variants,
        ranks: rank_aggregate(&scored, Direction::HigherIsBetter),
    }
}

/// Table with one row per method variant: mean rank, overall mean Imp.Acc
/// and mean Imp.Acc per dataset.
pub fn markdown_table(summary: &GridSummary) -> String {
    let datasets: Vec<String> = {
        let mut all: Vec<String> = summary
            .variants
            .values()
            .flat_map(|v| v.by_dataset.keys().cloned())
            .collect();
        all.sort();
        all.dedup();
        all
    };
    let mut out = String::new();
    let _ = write!(out, "| Method | Rank | Avg |");
    for d in &datasets {
        let _ = write!(out, " {d} |");
    }
    out.push('\n');
    out.push_str("|---|---|---|");
    for _ in &datasets {
        out.push_str("---|");
    }
    out.push('\n');
    for (name, v) in &summary.variants {
        let rank = summary.ranks.mean_rank.get(name).copied().unwrap_or(f64::NAN);
        let _ = write!(out, "| {name} | {rank:.2} | {:.4} ± {:.4} |", v.imp_acc_mean, v.imp_acc_std);
        for d in &datasets {
            match v.by_dataset.get(d) {
                Some(x) => {
                    let _ = write!(out, " {x:.4} |");
                }
                None => out.push_str(" - |"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_reports<W: Write>(mut out: W, reports: &[MetricsReport], format: ReportFormat) -> Result<()> {
    match format {
        ReportFormat::Csv => write_csv(out, reports),
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, &summarize(reports)).map_err(|e| Error::Config(e.to_string()))?;
            out.write_all(b"\n").map_err(|e| Error::io("summary", e))
        }
        ReportFormat::Markdown => out
            .write_all(markdown_table(&summarize(reports)).as_bytes())
            .map_err(|e| Error::io("summary", e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(dataset: &str, method: &str, seed: u64, imp_acc: f64) -> MetricsReport {
        MetricsReport {
            dataset: dataset.into(),
            pattern: "general".into(),
            mechanism: "mnar".into(),
            method: method.into(),
            masking: String::new(),
            seed,
            imp_acc,
            r2: Some(imp_acc),
            acc: None,
            rmse_all: 0.1,
            rmse_num: Some(0.1),
            rmse_cat: None,
            columns: vec![],
        }
    }

    #[test]
    fn csv_round_trip() {
        let rs = vec![report("a", "naive", 0, 0.0), report("a", "knn", 0, 0.25)];
        let mut buf = Vec::new();
        write_csv(&mut buf, &rs).unwrap();
        assert_eq!(read_reports(buf.as_slice()).unwrap(), rs);
    }

    #[test]
    fn summary_and_table() {
        let rs = vec![
            report("a", "naive", 0, 0.0),
            report("a", "knn", 0, 0.3),
            report("b", "naive", 0, 0.1),
            report("b", "knn", 0, 0.5),
        ];
        let s = summarize(&rs);
        assert_eq!(s.ranks.mean_rank["knn"], 1.0);
        assert!((s.variants["knn"].imp_acc_mean - 0.4).abs() < 1e-12);
        let md = markdown_table(&s);
        assert!(md.starts_with("| Method | Rank | Avg | a | b |"));
        assert_eq!(md.lines().count(), 4);
    }
}
