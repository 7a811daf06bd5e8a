//! Run configuration: one TOML document with dotted-key overrides.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::ColumnMap;
use crate::eval::SplitSpec;
use crate::graph::Calendar;
use crate::gst::GstConfig;
use crate::incremental::TrainConfig;
use crate::predictor::ClassifierConfig;
use crate::synth::GenConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid TOML: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("override '{0}' must look like key.path=value")]
    BadOverride(String),
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    #[default]
    Synthetic,
    Files,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// Directory with the three ingestion files when `source = "files"`.
    pub dir: Option<PathBuf>,
    /// Month 0 of the calendar.
    pub epoch: NaiveDate,
    /// Months up to and including this index form period 0.
    pub cutoff_month: i64,
    pub columns: ColumnMap,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic,
            dir: None,
            epoch: NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date"),
            cutoff_month: 0,
            columns: ColumnMap::default(),
        }
    }
}

/// Shape of both attention stacks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d: usize,
    pub heads: usize,
    pub gst_layers: usize,
    pub scale_full_d: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let g = GstConfig::default();
        Self { d: g.dim, heads: g.heads, gst_layers: g.layers, scale_full_d: g.scale_full_d }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub k: Vec<usize>,
    /// Monthly top-K treated as the model's selections in the sector and
    /// people analyses.
    pub selection_k: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { k: vec![10, 20, 50], selection_k: 10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub write_embeddings: bool,
    pub checkpoints: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { write_embeddings: false, checkpoints: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub synthetic: GenConfig,
    pub model: ModelConfig,
    /// Embedding stage; `n_hops` and `seed` are taken from `model` and the
    /// run seed.
    pub train: TrainConfig,
    pub classifier: ClassifierConfig,
    pub split: SplitSpec,
    pub eval: EvalConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    /// Synthetic data with the generator's success window and observation
    /// horizon.
    fn default() -> Self {
        let synthetic = GenConfig::default();
        let split = SplitSpec {
            success_window_months: synthetic.success_window_months,
            horizon: Some(synthetic.observation_end()),
            ..SplitSpec::default()
        };
        Self {
            seed: 0,
            data: DataConfig::default(),
            synthetic,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            classifier: ClassifierConfig::default(),
            split,
            eval: EvalConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> Result<String, ConfigError> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }

    /// Applies `a.b.c=value`. The value is read as a TOML value and falls
    /// back to a plain string.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), ConfigError> {
        let (key, raw) = spec.split_once('=').ok_or_else(|| ConfigError::BadOverride(spec.into()))?;
        let key = key.trim();
        let path: Vec<&str> = key.split('.').collect();
        if path.iter().any(|p| p.is_empty()) {
            return Err(ConfigError::BadOverride(spec.into()));
        }
        let value = parse_value(raw.trim());
        let mut doc = toml::Value::try_from(&*self)?;
        let mut node = &mut doc;
        for part in &path[..path.len() - 1] {
            node = node
                .as_table_mut()
                .and_then(|t| t.get_mut(*part))
                .ok_or_else(|| ConfigError::UnknownKey(key.into()))?;
        }
        let table = node.as_table_mut().ok_or_else(|| ConfigError::UnknownKey(key.into()))?;
        table.insert(path[path.len() - 1].to_string(), value.clone());
        let updated: RunConfig = doc.try_into()?;
        // Keys a section silently ignores would vanish on the way back.
        let back = toml::Value::try_from(&updated)?;
        let mut probe = &back;
        for part in &path {
            probe = probe.get(*part).ok_or_else(|| ConfigError::UnknownKey(key.into()))?;
        }
        *self = updated;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.gst_config().validate().map_err(|e| invalid(&e))?;
        self.train_config().validate().map_err(|e| invalid(&e))?;
        self.classifier.validate().map_err(|e| invalid(&e))?;
        self.split.validate().map_err(|e| invalid(&e))?;
        match self.data.source {
            DataSource::Synthetic => self.synthetic.validate().map_err(|e| invalid(&e))?,
            DataSource::Files if self.data.dir.is_none() => {
                return Err(ConfigError::Invalid("data.dir is required when data.source = \"files\"".into()))
            }
            DataSource::Files => {}
        }
        if self.eval.k.is_empty() || self.eval.k.contains(&0) || self.eval.selection_k == 0 {
            return Err(ConfigError::Invalid("eval.k and eval.selection_k must be positive".into()));
        }
        Ok(())
    }

    pub fn gst_config(&self) -> GstConfig {
        GstConfig {
            dim: self.model.d,
            heads: self.model.heads,
            layers: self.model.gst_layers,
            scale_full_d: self.model.scale_full_d,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { n_hops: self.model.gst_layers, seed: self.seed, ..self.train }
    }

    pub fn calendar(&self) -> Calendar {
        Calendar::new(self.data.epoch, self.data.cutoff_month)
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Hyperparameter varied by a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    GstLayers,
    D,
    Beta,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::GstLayers => "gst_layers",
            SweepParam::D => "d",
            SweepParam::Beta => "beta",
        }
    }

    fn bounds(self) -> (f64, f64) {
        match self {
            SweepParam::GstLayers => (1.0, 3.0),
            SweepParam::D => (16.0, 64.0),
            SweepParam::Beta => (0.3, 0.7),
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gst_layers" => Ok(SweepParam::GstLayers),
            "d" => Ok(SweepParam::D),
            "beta" => Ok(SweepParam::Beta),
            _ => Err(ConfigError::UnknownKey(s.to_string())),
        }
    }
}

/// One hyperparameter and the values to try, each applied to the base run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Ok(toml::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.values.is_empty() {
            return Err(ConfigError::Invalid("sweep needs at least one value".into()));
        }
        let (lo, hi) = self.param.bounds();
        for &v in &self.values {
            let integral = self.param == SweepParam::Beta || v.fract() == 0.0;
            if !(lo..=hi).contains(&v) || !integral {
                return Err(ConfigError::Invalid(format!("{} = {v} is outside [{lo}, {hi}]", self.param.name())));
            }
        }
        Ok(())
    }

    /// One config per value, in the given order.
    pub fn configs(&self, base: &RunConfig) -> Vec<RunConfig> {
        self.values
            .iter()
            .map(|&v| {
                let mut c = base.clone();
                match self.param {
                    SweepParam::GstLayers => c.model.gst_layers = v as usize,
                    SweepParam::D => c.model.d = v as usize,
                    SweepParam::Beta => c.train.beta = v,
                }
                c
            })
            .collect()
    }
}
