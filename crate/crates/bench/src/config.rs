//! Experiment configuration: a flat `key = value` text file whose entries can
//! be overridden one by one from the command line.
//!
//! ```text
//! # retrieval grid on 1000 procedural digits
//! dataset = synthetic:1000
//! mode = semantic
//! features = model:encoder.amdl
//! similarity = cosine, neg_l2
//! separation = softmax:10000
//! corruption = gaussian:mean=0.3,variance=0.1; salt_pepper:p=0.2
//! subset = 500
//! seed = 7
//! ```
//!
//! Corruption entries are separated by `;` because their parameters use `,`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use featmem_core::corrupt::CorruptionKind;
use featmem_core::memory::{Separation, Similarity};

use crate::error::{BenchError, Result};

/// Where the stored items come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    /// An AMEM file.
    File(PathBuf),
    /// `count` procedurally drawn 28×28 digits.
    Synthetic { count: usize, seed: u64 },
    /// An IDX directory holding `{split}-images-idx3-ubyte`.
    Mnist { dir: PathBuf, split: String },
}

impl FromStr for DatasetSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("synthetic:") {
            let mut parts = rest.split(':');
            let count = parts
                .next()
                .unwrap_or_default()
                .parse()
                .map_err(|e| format!("synthetic count: {e}"))?;
            let seed = match parts.next() {
                Some(v) => v.parse().map_err(|e| format!("synthetic seed: {e}"))?,
                None => 0,
            };
            return Ok(DatasetSource::Synthetic { count, seed });
        }
        if let Some(rest) = s.strip_prefix("mnist:") {
            let (dir, split) = match rest.rsplit_once(':') {
                Some((dir, split)) if split == "train" || split == "t10k" => (dir, split),
                _ => (rest, "t10k"),
            };
            return Ok(DatasetSource::Mnist {
                dir: PathBuf::from(dir),
                split: split.to_string(),
            });
        }
        if s.is_empty() {
            return Err("empty dataset".into());
        }
        Ok(DatasetSource::File(PathBuf::from(s)))
    }
}

impl fmt::Display for DatasetSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetSource::File(p) => write!(f, "{}", p.display()),
            DatasetSource::Synthetic { count, seed } => write!(f, "synthetic:{count}:{seed}"),
            DatasetSource::Mnist { dir, split } => write!(f, "mnist:{}:{split}", dir.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ModelMode {
    #[default]
    Uhn,
    Semantic,
    FullySemantic,
}

impl FromStr for ModelMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "uhn" | "pixel" => Ok(ModelMode::Uhn),
            "semantic" => Ok(ModelMode::Semantic),
            "fully_semantic" | "fully-semantic" => Ok(ModelMode::FullySemantic),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

impl fmt::Display for ModelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelMode::Uhn => "uhn",
            ModelMode::Semantic => "semantic",
            ModelMode::FullySemantic => "fully_semantic",
        })
    }
}

/// Source of the feature map φ.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum FeatureSource {
    #[default]
    Identity,
    /// An AMDL encoder.
    Model(PathBuf),
    /// AEMB embeddings of the stored items, and optionally of the corrupted
    /// queries (aligned by index).
    Table {
        stored: PathBuf,
        queries: Option<PathBuf>,
    },
}

impl FromStr for FeatureSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s == "identity" {
            return Ok(FeatureSource::Identity);
        }
        if let Some(path) = s.strip_prefix("model:") {
            return Ok(FeatureSource::Model(PathBuf::from(path)));
        }
        if let Some(rest) = s.strip_prefix("table:") {
            let mut parts = rest.splitn(2, ',');
            let stored = PathBuf::from(parts.next().unwrap_or_default().trim());
            let queries = parts.next().map(|q| PathBuf::from(q.trim()));
            return Ok(FeatureSource::Table { stored, queries });
        }
        Err(format!(
            "unknown feature source `{s}` (identity, model:PATH, table:PATH[,PATH])"
        ))
    }
}

impl fmt::Display for FeatureSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureSource::Identity => f.write_str("identity"),
            FeatureSource::Model(p) => write!(f, "model:{}", p.display()),
            FeatureSource::Table { stored, queries } => {
                write!(f, "table:{}", stored.display())?;
                if let Some(q) = queries {
                    write!(f, ",{}", q.display())?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub mode: ModelMode,
    pub features: FeatureSource,
    /// AMDL generative map for the fully-semantic mode; identity when absent.
    pub decoder: Option<PathBuf>,
    pub similarities: Vec<Similarity>,
    pub separation: Separation,
    pub corruptions: Vec<CorruptionKind>,
    pub subset: Option<usize>,
    pub seed: u64,
    /// Unit-normalize embeddings before scoring (semantic mode).
    pub normalize: bool,
    /// Evaluate queries on the rayon pool.
    pub parallel: bool,
    pub output: Option<PathBuf>,
    pub format: ReportFormat,
    /// Gaussian means for `sweep`.
    pub means: Vec<f64>,
    /// Gaussian variance for `sweep`.
    pub variance: f64,
    /// Timed repetitions for `timing`.
    pub reps: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::Synthetic { count: 1000, seed: 0 },
            mode: ModelMode::Uhn,
            features: FeatureSource::Identity,
            decoder: None,
            similarities: vec![Similarity::Cosine],
            separation: Separation::default(),
            corruptions: vec![CorruptionKind::gaussian(0.0, 0.0)],
            subset: None,
            seed: 0,
            normalize: false,
            parallel: true,
            output: None,
            format: ReportFormat::Csv,
            means: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            variance: 0.1,
            reps: 5,
        }
    }
}

fn invalid(key: &str, message: impl fmt::Display) -> BenchError {
    BenchError::InvalidValue {
        key: key.to_string(),
        message: message.to_string(),
    }
}

fn list<T: FromStr>(key: &str, value: &str, sep: char) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    value
        .split(sep)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| invalid(key, e)))
        .collect()
}

fn one<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| invalid(key, e))
}

impl ExperimentConfig {
    /// Parses a config file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| BenchError::Config {
                line: n + 1,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            config
                .set(key.trim(), value.trim())
                .map_err(|e| BenchError::Config {
                    line: n + 1,
                    message: e.to_string(),
                })?;
        }
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(BenchError::MissingFile(path.to_path_buf()));
        }
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Sets one entry by key, as in a config line.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset" => self.dataset = one(key, value)?,
            "mode" => self.mode = one(key, value)?,
            "features" => self.features = one(key, value)?,
            "decoder" => {
                self.decoder = match value.trim() {
                    "" | "identity" => None,
                    path => Some(PathBuf::from(path)),
                }
            }
            "similarity" | "similarities" => self.similarities = list(key, value, ',')?,
            "separation" => self.separation = one(key, value)?,
            "beta" => {
                let beta: f64 = one(key, value)?;
                self.separation = Separation::softmax(beta).map_err(|e| invalid(key, e))?;
            }
            "corruption" | "corruptions" => self.corruptions = list(key, value, ';')?,
            "subset" => self.subset = Some(one(key, value)?),
            "seed" => self.seed = one(key, value)?,
            "normalize" => self.normalize = one(key, value)?,
            "parallel" => self.parallel = one(key, value)?,
            "output" => self.output = Some(PathBuf::from(value.trim())),
            "format" => self.format = one(key, value)?,
            "means" => self.means = list(key, value, ',')?,
            "variance" => self.variance = one(key, value)?,
            "reps" => self.reps = one(key, value)?,
            other => return Err(BenchError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Checks that referenced files exist and the grid is non-empty.
    pub fn validate(&self) -> Result<()> {
        let mut files: Vec<&Path> = Vec::new();
        match &self.dataset {
            DatasetSource::File(p) => files.push(p),
            DatasetSource::Mnist { dir, .. } => files.push(dir),
            DatasetSource::Synthetic { count, .. } if *count == 0 => {
                return Err(invalid("dataset", "synthetic count must be positive"))
            }
            DatasetSource::Synthetic { .. } => {}
        }
        match &self.features {
            FeatureSource::Model(p) => files.push(p),
            FeatureSource::Table { stored, queries } => {
                files.push(stored);
                if let Some(q) = queries {
                    files.push(q);
                }
            }
            FeatureSource::Identity => {}
        }
        if let Some(d) = &self.decoder {
            files.push(d);
        }
        if let Some(missing) = files.into_iter().find(|p| !p.exists()) {
            return Err(BenchError::MissingFile(missing.to_path_buf()));
        }
        if self.similarities.is_empty() {
            return Err(BenchError::EmptyGrid("similarity"));
        }
        if self.corruptions.is_empty() {
            return Err(BenchError::EmptyGrid("corruption"));
        }
        if self.subset == Some(0) {
            return Err(invalid("subset", "must be positive"));
        }
        if self.reps < 5 {
            return Err(invalid("reps", "timing needs at least 5 repetitions"));
        }
        if !(self.variance >= 0.0) {
            return Err(invalid("variance", "must be non-negative"));
        }
        self.separation.validate()?;
        for c in &self.corruptions {
            c.validate()?;
        }
        Ok(())
    }
}
