//! Pipeline configuration: a plain `key = value` file with flag overrides.

use std::path::{Path, PathBuf};

use serde::Serialize;
use tabgraph_core::communities::NsbmParams;
use tabgraph_core::embed::{EmbedParams, WalkParams};
use tabgraph_core::gbm::GbmParams;
use tabgraph_core::sparsify::DEFAULT_ALPHA;
use tabgraph_core::spectral::DEFAULT_CHARGE;
use tabgraph_core::tabular::{EncodeOptions, MissingPolicy};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("bad value {value:?} for {key}")]
    BadValue { key: String, value: String },
    #[error("{0}")]
    Invalid(String),
}

/// Which graph the spectral stage runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralGraph {
    Global,
    Backbone,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    /// Input CSV. Recorded in manifests by file name only.
    #[serde(serialize_with = "file_name_only")]
    pub input: Option<PathBuf>,
    pub header: bool,
    pub encode: EncodeOptions,
    pub master_seed: u64,
    pub gbm: GbmParams,
    pub alpha: f64,
    pub charge: f64,
    pub spectral_graph: SpectralGraph,
    pub nsbm: NsbmParams,
    pub nsbm_restarts: usize,
    pub walk: WalkParams,
    pub embed: EmbedParams,
    pub layout_iterations: usize,
    #[serde(skip)]
    pub out: PathBuf,
}

fn file_name_only<S: serde::Serializer>(p: &Option<PathBuf>, s: S) -> Result<S::Ok, S::Error> {
    match p.as_ref().and_then(|p| p.file_name()) {
        Some(name) => s.serialize_some(&name.to_string_lossy()),
        None => s.serialize_none(),
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: None,
            header: true,
            encode: EncodeOptions::default(),
            master_seed: 0,
            gbm: GbmParams::default(),
            alpha: DEFAULT_ALPHA,
            charge: DEFAULT_CHARGE,
            spectral_graph: SpectralGraph::Global,
            nsbm: NsbmParams::default(),
            nsbm_restarts: 5,
            walk: WalkParams::default(),
            embed: EmbedParams::default(),
            layout_iterations: 500,
            out: PathBuf::from("out"),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

impl PipelineConfig {
    /// Set one key. Returns `Ok(false)` for keys this config does not know.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, ConfigError> {
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "header" => self.header = parse(key, value)?,
            "seed" | "master_seed" => self.master_seed = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "charge" | "q" => self.charge = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "encode.max_cardinality" => self.encode.categorical_max_cardinality = parse(key, value)?,
            "encode.missing" => {
                self.encode.missing_policy = match value {
                    "drop_row" => MissingPolicy::DropRow,
                    "error" => MissingPolicy::Error,
                    _ => return Err(ConfigError::BadValue { key: key.into(), value: value.into() }),
                }
            }
            "gbm.n_trees" => self.gbm.n_trees = parse(key, value)?,
            "gbm.max_depth" => self.gbm.max_depth = parse(key, value)?,
            "gbm.learning_rate" => self.gbm.learning_rate = parse(key, value)?,
            "gbm.min_child_cover" => self.gbm.min_child_cover = parse(key, value)?,
            "gbm.holdout_fraction" => self.gbm.holdout_fraction = parse(key, value)?,
            "spectral.graph" => {
                self.spectral_graph = match value {
                    "global" => SpectralGraph::Global,
                    "backbone" => SpectralGraph::Backbone,
                    _ => return Err(ConfigError::BadValue { key: key.into(), value: value.into() }),
                }
            }
            "nsbm.sweeps" => self.nsbm.n_sweeps = parse(key, value)?,
            "nsbm.agglomeration_factor" => self.nsbm.agglomeration_factor = parse(key, value)?,
            "nsbm.max_multiplicity" => self.nsbm.max_multiplicity = parse(key, value)?,
            "nsbm.restarts" => self.nsbm_restarts = parse(key, value)?,
            "walk.length" => self.walk.walk_length = parse(key, value)?,
            "walk.per_vertex" => self.walk.walks_per_vertex = parse(key, value)?,
            "walk.p" => self.walk.p = parse(key, value)?,
            "walk.q" => self.walk.q = parse(key, value)?,
            "walk.symmetrize" => self.walk.symmetrize = parse(key, value)?,
            "embed.dims" => self.embed.dims = parse(key, value)?,
            "embed.window" => self.embed.window = parse(key, value)?,
            "embed.negative" => self.embed.negative = parse(key, value)?,
            "embed.epochs" => self.embed.epochs = parse(key, value)?,
            "embed.learning_rate" => self.embed.learning_rate = parse(key, value)?,
            "layout.iterations" => self.layout_iterations = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Apply a config file on top of `self`. Blank lines and `#` comments
    /// are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1 });
            }
            if !self.set(key, value)? {
                return Err(ConfigError::UnknownKey {
                    line: i + 1,
                    key: key.to_string(),
                });
            }
        }
        Ok(())
    }

    /// A relative `input` resolves against the config file's directory.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(input) = cfg.input.as_mut() {
            if input.is_relative() {
                *input = base.join(&*input);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(ConfigError::Invalid(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.charge) {
            return Err(ConfigError::Invalid(format!("charge must lie in [0, 1], got {}", self.charge)));
        }
        if let Some(input) = &self.input {
            if !input.is_file() {
                return Err(ConfigError::Invalid(format!("input {} not found", input.display())));
            }
        }
        if self.nsbm_restarts == 0 {
            return Err(ConfigError::Invalid("nsbm.restarts must be at least 1".into()));
        }
        if self.gbm.n_trees == 0 || !(self.gbm.holdout_fraction > 0.0 && self.gbm.holdout_fraction < 1.0) {
            return Err(ConfigError::Invalid(
                "gbm.n_trees must be positive and gbm.holdout_fraction in (0, 1)".into(),
            ));
        }
        if self.walk.walk_length == 0 || self.walk.walks_per_vertex == 0 || self.walk.p <= 0.0 || self.walk.q <= 0.0 {
            return Err(ConfigError::Invalid("walk parameters must be positive".into()));
        }
        if self.embed.dims == 0 || self.embed.epochs == 0 || self.embed.learning_rate <= 0.0 {
            return Err(ConfigError::Invalid("embed parameters must be positive".into()));
        }
        Ok(())
    }
}
