use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{name_tag, DatasetSource, Method, RunConfig};
use crate::baselines::{knn_impute, naive_impute};
use crate::data::{load_dataset, preprocess, synthetic, IncompleteDataset, TabularDataset};
use crate::error::{Error, Result};
use crate::eval::report::{markdown_table, summarize, write_column_csv, write_csv, GridSummary};
use crate::eval::{imputation_accuracy, split_ground_truth, MetricsReport};
use crate::masking::{MaskingFunctionSpec, MaskingKind};
use crate::missingness::{generate_masks, Mechanism, Pattern};
use crate::nn::{impute, save_checkpoint, train, write_loss_curve, ModelConfig, TrainConfig};
use crate::rng::{derive_seed, stream_rng, Stream};

/// Seed-path tag separating training randomness from mask generation.
const TRAIN_TAG: u64 = 0x0074_7261_696e;

/// One grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub dataset: String,
    pub pattern: Pattern,
    pub mechanism: Mechanism,
    pub method: Method,
    /// Masking function of model methods.
    pub masking: Option<MaskingFunctionSpec>,
    pub seed: u64,
}

impl CellSpec {
    /// Label of the masking function, empty for baselines.
    pub fn masking_label(&self) -> String {
        match self.masking {
            None => String::new(),
            Some(m) if m.kind == MaskingKind::Logit => format!("logit(a={},b={})", m.a, m.b),
            Some(m) => m.kind.name().to_string(),
        }
    }

    /// Directory-safe identifier.
    pub fn id(&self) -> String {
        let masking = self.masking_label().replace(['(', ')', ',', '='], "_");
        let mut id = format!("{}-{}-{}-{}", self.dataset, self.pattern, self.mechanism, self.method);
        if !masking.is_empty() {
            id.push('-');
            id.push_str(masking.trim_end_matches('_'));
        }
        format!("{id}-s{}", self.seed)
    }

    /// Seed of the missingness draw. Depends on dataset, pattern, mechanism
    /// and seed only, so every method sees the same masks.
    pub fn mask_seed(&self, root: u64) -> u64 {
        derive_seed(
            root,
            &[name_tag(&self.dataset), self.pattern as u64, self.mechanism as u64, self.seed],
        )
    }

    /// Seed of model initialisation and training draws, shared by all model
    /// methods of the same mask draw.
    pub fn train_seed(&self, root: u64) -> u64 {
        derive_seed(self.mask_seed(root), &[TRAIN_TAG])
    }
}

/// Every cell of the grid in a fixed order.
pub fn expand_cells(cfg: &RunConfig, maskings: &[MaskingFunctionSpec]) -> Vec<CellSpec> {
    let mut cells = Vec::new();
    for d in &cfg.datasets {
        for &pattern in &cfg.patterns {
            for &mechanism in &cfg.mechanisms {
                for &method in &cfg.methods {
                    let variants: Vec<Option<MaskingFunctionSpec>> = match method {
                        Method::PmaeMix | Method::PmaeTrf => maskings.iter().copied().map(Some).collect(),
                        Method::RemaskerMode => vec![Some(MaskingFunctionSpec::of_kind(MaskingKind::Constant))],
                        Method::Naive | Method::Knn => vec![None],
                    };
                    for masking in variants {
                        for &seed in &cfg.seeds {
                            cells.push(CellSpec {
                                dataset: d.name.clone(),
                                pattern,
                                mechanism,
                                method,
                                masking,
                                seed,
                            });
                        }
                    }
                }
            }
        }
    }
    cells
}

/// Masking functions named in the config.
pub fn configured_maskings(cfg: &RunConfig) -> Vec<MaskingFunctionSpec> {
    cfg.maskings
        .iter()
        .map(|&kind| MaskingFunctionSpec {
            kind,
            a: cfg.masking.a,
            b: cfg.masking.b,
        })
        .collect()
}

/// Loads and preprocesses every dataset of the config.
pub fn prepare_datasets(cfg: &RunConfig) -> Result<Vec<(String, TabularDataset)>> {
    cfg.datasets
        .iter()
        .map(|d| {
            let ds = match d.source(&cfg.base_dir)? {
                DatasetSource::Files { csv, schema } => preprocess(&load_dataset(csv, schema)?)?,
                DatasetSource::Synthetic { spec, seed } => synthetic::generate(&spec, seed)?,
            };
            Ok((d.name.clone(), ds))
        })
        .collect()
}

/// Artifacts a model cell may leave behind.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CellArtifacts {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_curve: Option<PathBuf>,
}

pub struct CellContext<'a> {
    pub root_seed: u64,
    pub model: &'a ModelConfig,
    pub train: &'a TrainConfig,
    pub knn_k: usize,
    pub monotone_p_col: f64,
    /// Where per-cell artifacts go, if anywhere.
    pub artifact_dir: Option<&'a Path>,
}

/// Runs one cell end to end: mask, impute, score.
pub fn run_cell(cell: &CellSpec, ds: &TabularDataset, ctx: &CellContext) -> Result<(MetricsReport, CellArtifacts)> {
    let pattern_cfg = match cell.pattern {
        Pattern::Monotone => crate::missingness::PatternConfig::monotone(ctx.monotone_p_col),
        other => crate::missingness::PatternConfig::for_pattern(other),
    };
    let mut mask_rng = stream_rng(cell.mask_seed(ctx.root_seed), Stream::Missingness);
    let generated = generate_masks(ds, &pattern_cfg, cell.mechanism, &mut mask_rng)?;
    let incomplete = IncompleteDataset::new(ds.clone(), generated.mask.clone())?;
    let mut artifacts = CellArtifacts::default();
    let imputed: Array2<f64> = match cell.method {
        Method::Naive => naive_impute(&incomplete)?,
        Method::Knn => knn_impute(&incomplete, ctx.knn_k)?,
        method => {
            let model_cfg = ctx.model.with_block_kind(method.block_kind().expect("model method"));
            let train_cfg = TrainConfig {
                loss: method.loss().expect("model method"),
                ..*ctx.train
            };
            let masking = cell.masking.expect("model cells carry a masking function");
            let outcome = train(&incomplete, &model_cfg, &train_cfg, &masking, cell.train_seed(ctx.root_seed))?;
            if let Some(dir) = ctx.artifact_dir {
                let cell_dir = dir.join(cell.id());
                fs::create_dir_all(&cell_dir).map_err(|e| Error::io(&cell_dir, e))?;
                let ckpt = cell_dir.join("model.ckpt");
                save_checkpoint(&ckpt, &outcome.params)?;
                let curve = cell_dir.join("loss_curve.csv");
                write_loss_curve(File::create(&curve).map_err(|e| Error::io(&curve, e))?, &outcome.curve)?;
                artifacts = CellArtifacts {
                    checkpoint: Some(ckpt),
                    loss_curve: Some(curve),
                };
            }
            impute(&outcome.params, &incomplete)?
        }
    };
    let (x_star, _) = split_ground_truth(ds, &generated.mask)?;
    let metrics = imputation_accuracy(&imputed, &x_star, &generated.mask, &ds.schema)?;
    let report = MetricsReport::new(
        &cell.dataset,
        &cell.pattern.to_string(),
        &cell.mechanism.to_string(),
        cell.method.name(),
        &cell.masking_label(),
        cell.seed,
        metrics,
    );
    Ok((report, artifacts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell: CellSpec,
    pub mask_seed: u64,
    pub train_seed: Option<u64>,
    pub status: CellStatus,
    #[serde(default)]
    pub artifacts: CellArtifacts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub root_seed: u64,
    pub cells: Vec<CellRecord>,
    /// Files written at the top of the output directory.
    pub artifacts: Vec<PathBuf>,
}

pub struct GridOutcome {
    pub reports: Vec<MetricsReport>,
    pub manifest: Manifest,
    pub summary: GridSummary,
}

/// Runs `cells` with at most `jobs` in parallel and returns records in cell
/// order.
pub fn execute_cells(
    cfg: &RunConfig,
    cells: &[CellSpec],
    datasets: &[(String, TabularDataset)],
    jobs: usize,
    artifact_dir: Option<&Path>,
) -> Result<Vec<(CellRecord, Option<MetricsReport>)>> {
    let ctx = CellContext {
        root_seed: cfg.root_seed,
        model: &cfg.model,
        train: &cfg.train,
        knn_k: cfg.knn_k,
        monotone_p_col: cfg.monotone_p_col,
        artifact_dir,
    };
    let run = |cell: &CellSpec| {
        let ds = &datasets
            .iter()
            .find(|(name, _)| *name == cell.dataset)
            .expect("dataset prepared")
            .1;
        let started = std::time::Instant::now();
        let result = run_cell(cell, ds, &ctx);
        log::info!("cell {} finished in {:.1}s", cell.id(), started.elapsed().as_secs_f64());
        let (status, report, artifacts) = match result {
            Ok((r, a)) => (CellStatus::Ok, Some(r), a),
            Err(e) => {
                log::warn!("cell {} failed: {e}", cell.id());
                (CellStatus::Failed { error: e.to_string() }, None, CellArtifacts::default())
            }
        };
        let record = CellRecord {
            cell: cell.clone(),
            mask_seed: cell.mask_seed(cfg.root_seed),
            train_seed: cell.method.is_model().then(|| cell.train_seed(cfg.root_seed)),
            status,
            artifacts,
        };
        (record, report)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| cells.par_iter().map(run).collect()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Runs the full grid and writes `runs.csv`, `columns.csv`, `summary.json`,
/// `summary.md` and `manifest.json` into the output directory.
pub fn run_grid(cfg: &RunConfig, jobs: usize) -> Result<GridOutcome> {
    let maskings = configured_maskings(cfg);
    let cells = expand_cells(cfg, &maskings);
    let datasets = prepare_datasets(cfg)?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let artifact_dir = cfg.save_checkpoints.then(|| out.join("cells"));
    let results = execute_cells(cfg, &cells, &datasets, jobs, artifact_dir.as_deref())?;

    let mut records = Vec::with_capacity(results.len());
    let mut reports = Vec::new();
    for (mut record, report) in results {
        for path in [&mut record.artifacts.checkpoint, &mut record.artifacts.loss_curve].into_iter().flatten() {
            if let Ok(rel) = path.strip_prefix(out) {
                *path = rel.to_path_buf();
            }
        }
        records.push(record);
        reports.extend(report);
    }
    let summary = summarize(&reports);
    let names = ["runs.csv", "columns.csv", "summary.json", "summary.md"];
    write_csv(create(&out.join(names[0]))?, &reports)?;
    write_column_csv(create(&out.join(names[1]))?, &reports)?;
    serde_json::to_writer_pretty(create(&out.join(names[2]))?, &summary).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(out.join(names[3]), markdown_table(&summary)).map_err(|e| Error::io(out.join(names[3]), e))?;
    let mut artifacts: Vec<PathBuf> = names.iter().map(PathBuf::from).collect();
    artifacts.push(PathBuf::from("manifest.json"));
    let manifest = Manifest {
        config_hash: cfg.hash(),
        root_seed: cfg.root_seed,
        cells: records,
        artifacts,
    };
    serde_json::to_writer_pretty(create(&out.join("manifest.json"))?, &manifest).map_err(|e| Error::Config(e.to_string()))?;
    Ok(GridOutcome {
        reports,
        manifest,
        summary,
    })
}

/// Mean Imp.Acc of one `(a, b)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub a: f64,
    pub b: f64,
    pub imp_acc_mean: f64,
    pub imp_acc_std: f64,
    pub runs: usize,
    pub failures: usize,
}

/// Full factorial over logit parameters `(a, b)`, averaging Imp.Acc of the
/// config's proportional-loss methods over datasets, patterns, mechanisms
/// and seeds. Writes `surface.csv` into the output directory.
pub fn grid_search_ab(cfg: &RunConfig, a_values: &[f64], b_values: &[f64], jobs: usize) -> Result<Vec<SurfacePoint>> {
    if a_values.is_empty() || b_values.is_empty() {
        return Err(Error::InvalidArgument("need at least one value of a and of b".into()));
    }
    let mut grid_cfg = cfg.clone();
    grid_cfg.methods.retain(|m| matches!(m, Method::PmaeMix | Method::PmaeTrf));
    if grid_cfg.methods.is_empty() {
        grid_cfg.methods = vec![Method::PmaeMix];
    }
    let datasets = prepare_datasets(&grid_cfg)?;
    let mut pairs = Vec::new();
    let mut cells = Vec::new();
    for &a in a_values {
        for &b in b_values {
            let spec = MaskingFunctionSpec::logit(a, b);
            for cell in expand_cells(&grid_cfg, &[spec]) {
                pairs.push((a, b));
                cells.push(cell);
            }
        }
    }
    let results = execute_cells(&grid_cfg, &cells, &datasets, jobs, None)?;
    let mut surface = Vec::new();
    for &a in a_values {
        for &b in b_values {
            let (mut scores, mut failures) = (Vec::new(), 0);
            for ((pa, pb), (_, report)) in pairs.iter().zip(&results) {
                if (*pa, *pb) == (a, b) {
                    match report {
                        Some(r) => scores.push(r.imp_acc),
                        None => failures += 1,
                    }
                }
            }
            let n = scores.len() as f64;
            let mean = scores.iter().sum::<f64>() / n;
            let std = if scores.len() > 1 {
                (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            surface.push(SurfacePoint {
                a,
                b,
                imp_acc_mean: mean,
                imp_acc_std: std,
                runs: scores.len(),
                failures,
            });
        }
    }
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut w = csv::Writer::from_writer(create(&out.join("surface.csv"))?);
    for p in &surface {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io(out.join("surface.csv"), e))?;
    Ok(surface)
}
