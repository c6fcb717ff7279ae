use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::synthetic::SyntheticSpec;
use crate::error::{Error, Result};
use crate::masking::{MaskingFunctionSpec, MaskingKind};
use crate::missingness::{Mechanism, Pattern, PatternConfig};
use crate::nn::{BlockKind, LossKind, ModelConfig, TrainConfig};

/// Environment variable overriding `root_seed`.
pub const SEED_ENV: &str = "BENCH_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Mixer blocks, proportional loss.
    PmaeMix,
    /// Transformer blocks, proportional loss.
    PmaeTrf,
    /// Transformer blocks, separately normalised loss, constant masking.
    RemaskerMode,
    Naive,
    Knn,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::PmaeMix, Method::PmaeTrf, Method::RemaskerMode, Method::Naive, Method::Knn];

    pub fn name(&self) -> &'static str {
        match self {
            Method::PmaeMix => "pmae_mix",
            Method::PmaeTrf => "pmae_trf",
            Method::RemaskerMode => "remasker_mode",
            Method::Naive => "naive",
            Method::Knn => "knn",
        }
    }

    pub fn is_model(&self) -> bool {
        !matches!(self, Method::Naive | Method::Knn)
    }

    pub fn block_kind(&self) -> Option<BlockKind> {
        match self {
            Method::PmaeMix => Some(BlockKind::Mixer),
            Method::PmaeTrf | Method::RemaskerMode => Some(BlockKind::Transformer),
            _ => None,
        }
    }

    pub fn loss(&self) -> Option<LossKind> {
        match self {
            Method::PmaeMix | Method::PmaeTrf => Some(LossKind::Pmae),
            Method::RemaskerMode => Some(LossKind::Remasker),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

/// A table given either as CSV plus schema or as a synthetic preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<String>,
    /// Seed of the synthetic table.
    #[serde(default)]
    pub synthetic_seed: u64,
    /// Overrides the preset's row count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
}

pub enum DatasetSource {
    Files { csv: PathBuf, schema: PathBuf },
    Synthetic { spec: SyntheticSpec, seed: u64 },
}

impl DatasetConfig {
    pub fn synthetic(name: &str, preset: &str) -> Self {
        DatasetConfig {
            name: name.into(),
            csv: None,
            schema: None,
            synthetic: Some(preset.into()),
            synthetic_seed: 0,
            rows: None,
        }
    }

    pub fn source(&self, base_dir: &Path) -> Result<DatasetSource> {
        match (&self.csv, &self.schema, &self.synthetic) {
            (Some(csv), Some(schema), None) => {
                let csv = base_dir.join(csv);
                let schema = base_dir.join(schema);
                for p in [&csv, &schema] {
                    if !p.is_file() {
                        return Err(Error::Config(format!("dataset `{}`: missing file {}", self.name, p.display())));
                    }
                }
                Ok(DatasetSource::Files { csv, schema })
            }
            (None, None, Some(preset)) => {
                let mut spec = SyntheticSpec::preset(preset)
                    .ok_or_else(|| Error::Config(format!("dataset `{}`: unknown preset `{preset}`", self.name)))?;
                if let Some(n) = self.rows {
                    spec.n = n;
                }
                Ok(DatasetSource::Synthetic {
                    spec,
                    seed: self.synthetic_seed,
                })
            }
            _ => Err(Error::Config(format!(
                "dataset `{}`: give either `csv` and `schema`, or `synthetic`",
                self.name
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskingParams {
    pub a: f64,
    pub b: f64,
}

impl Default for MaskingParams {
    fn default() -> Self {
        let d = MaskingFunctionSpec::default();
        MaskingParams { a: d.a, b: d.b }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_patterns() -> Vec<Pattern> {
    vec![Pattern::General]
}
fn default_mechanisms() -> Vec<Mechanism> {
    vec![Mechanism::Mnar]
}
fn default_methods() -> Vec<Method> {
    vec![Method::PmaeMix, Method::Naive, Method::Knn]
}
fn default_maskings() -> Vec<MaskingKind> {
    vec![MaskingKind::Logit]
}
fn default_k() -> usize {
    crate::baselines::DEFAULT_K
}
fn default_p_col() -> f64 {
    0.3
}
fn default_output() -> PathBuf {
    PathBuf::from("bench-out")
}

/// A benchmark grid: datasets × patterns × mechanisms × methods (× masking
/// kinds for model methods) × seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub root_seed: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub datasets: Vec<DatasetConfig>,
    #[serde(default = "default_patterns")]
    pub patterns: Vec<Pattern>,
    #[serde(default = "default_mechanisms")]
    pub mechanisms: Vec<Mechanism>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Masking kinds tried by the proportional-loss methods.
    #[serde(default = "default_maskings")]
    pub maskings: Vec<MaskingKind>,
    #[serde(default)]
    pub masking: MaskingParams,
    /// Fraction of columns with missingness under the monotone pattern.
    #[serde(default = "default_p_col")]
    pub monotone_p_col: f64,
    #[serde(default = "default_k")]
    pub knn_k: usize,
    /// Write a checkpoint and loss curve per model cell.
    #[serde(default)]
    pub save_checkpoints: bool,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    /// Directory relative paths resolve against; set when loading a file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Reads a config file, resolves relative paths against its directory and
    /// applies the seed override from the environment.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if cfg.output_dir.is_relative() {
            cfg.output_dir = cfg.base_dir.join(&cfg.output_dir);
        }
        cfg.apply_env()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.root_seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}=`{v}` is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let nonempty = [
            ("seeds", self.seeds.is_empty()),
            ("datasets", self.datasets.is_empty()),
            ("patterns", self.patterns.is_empty()),
            ("mechanisms", self.mechanisms.is_empty()),
            ("methods", self.methods.is_empty()),
            ("maskings", self.maskings.is_empty()),
        ];
        if let Some((field, _)) = nonempty.iter().find(|(_, empty)| *empty) {
            return Err(Error::Config(format!("`{field}` must not be empty")));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        let mut names: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.datasets.len() {
            return Err(Error::Config("dataset names must be distinct".into()));
        }
        for d in &self.datasets {
            d.source(&self.base_dir)?;
        }
        self.model.validate()?;
        PatternConfig::monotone(self.monotone_p_col).validate()?;
        if self.knn_k == 0 {
            return Err(Error::Config("knn_k must be at least 1".into()));
        }
        if self.train.epochs == 0 {
            return Err(Error::Config("train.epochs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn pattern_config(&self, pattern: Pattern) -> PatternConfig {
        match pattern {
            Pattern::Monotone => PatternConfig::monotone(self.monotone_p_col),
            other => PatternConfig::for_pattern(other),
        }
    }

    /// SHA-256 of the normalised config with the output location removed.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let json = serde_json::to_vec(&canonical).expect("config serialises");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Stable 64-bit tag of a string.
pub fn name_tag(name: &str) -> u64 {
    let digest = Sha256::digest(name.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}
