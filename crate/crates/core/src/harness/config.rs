//! Run configuration, read from TOML. Every table rejects unknown keys.
//!
//! ```toml
//! [dataset]
//! kind = "moons"          # moons | blobs | idx
//! samples = 600
//! noise = 0.2
//! seed = 0
//!
//! [model]
//! layer_sizes = [2, 16, 16, 16, 2]
//! activation = "lambda_gelu"   # lambda_gelu | gelu | relu
//!
//! [hardness]
//! t = 0.1
//! init_mode = "uniform"        # uniform | increasing | decreasing
//! uniform_delta = 1e-4
//!
//! [optimizer]
//! kind = "sgd"                 # sgd | adamw
//! lr = 0.2
//! c = 1.0
//!
//! [training]
//! epochs = 40
//! batch_size = 32
//! seeds = [0, 1, 2]
//! val_fraction = 0.3333333333333333
//!
//! [anneal]                     # optional
//! switch_fraction = 0.25
//! epsilon = 5e-3               # or lambda_target = 160.0
//!
//! [grid]                       # optional, used by `grid`
//! t_values = [0.1, 0.9]
//! c_values = [1.0, 9.0]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{HarnessError, HarnessResult};
use crate::activation::ActivationKind;
use crate::gate::lambda_target_for;
use crate::metrics::MetricDirection;
use crate::optim::OptimizerConfig;
use crate::reparam::{InitMode, DEFAULT_TEMPERATURE, DEFAULT_UNIFORM_DELTA};
use crate::schedule::{AnnealPlan, DEFAULT_EPSILON, DEFAULT_SWITCH_FRACTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Moons,
    Blobs,
    Idx,
}

/// Which data to train on. Fields that do not apply to `kind` must be left
/// out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    /// Data generation and train/validation split seed, shared by every run.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Moons: standard deviation of the added Gaussian noise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    /// Blobs: number of clusters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<usize>,
    /// Blobs: input dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<usize>,
    /// Blobs: per-cluster standard deviation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_std: Option<f64>,
    /// IDX: image file (magic 0x00000803).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<PathBuf>,
    /// IDX: label file (magic 0x00000801).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
}

impl DatasetSpec {
    pub fn moons(samples: usize, noise: f64, seed: u64) -> Self {
        Self {
            kind: DatasetKind::Moons,
            seed,
            samples: Some(samples),
            noise: Some(noise),
            classes: None,
            features: None,
            cluster_std: None,
            images: None,
            labels: None,
        }
    }

    pub fn blobs(samples: usize, classes: usize, seed: u64) -> Self {
        Self {
            kind: DatasetKind::Blobs,
            seed,
            samples: Some(samples),
            noise: None,
            classes: Some(classes),
            features: None,
            cluster_std: None,
            images: None,
            labels: None,
        }
    }

    pub fn idx(images: impl Into<PathBuf>, labels: impl Into<PathBuf>) -> Self {
        Self {
            kind: DatasetKind::Idx,
            seed: 0,
            samples: None,
            noise: None,
            classes: None,
            features: None,
            cluster_std: None,
            images: Some(images.into()),
            labels: Some(labels.into()),
        }
    }

    fn validate(&self) -> HarnessResult<()> {
        let stray = |name: &str, set: bool| -> HarnessResult<()> {
            if set {
                Err(HarnessError::Config(format!(
                    "dataset.{name} does not apply to kind = \"{}\"",
                    kind_name(self.kind)
                )))
            } else {
                Ok(())
            }
        };
        match self.kind {
            DatasetKind::Moons => {
                stray("classes", self.classes.is_some())?;
                stray("features", self.features.is_some())?;
                stray("cluster_std", self.cluster_std.is_some())?;
                stray("images", self.images.is_some())?;
                stray("labels", self.labels.is_some())?;
                if let Some(noise) = self.noise {
                    if !(noise >= 0.0) || !noise.is_finite() {
                        return Err(HarnessError::Config(format!("dataset.noise = {noise}")));
                    }
                }
            }
            DatasetKind::Blobs => {
                stray("noise", self.noise.is_some())?;
                stray("images", self.images.is_some())?;
                stray("labels", self.labels.is_some())?;
                if self.classes == Some(0) || self.features == Some(0) {
                    return Err(HarnessError::Config("dataset.classes and dataset.features must be positive".into()));
                }
                if let Some(sd) = self.cluster_std {
                    if !(sd > 0.0) || !sd.is_finite() {
                        return Err(HarnessError::Config(format!("dataset.cluster_std = {sd}")));
                    }
                }
            }
            DatasetKind::Idx => {
                stray("noise", self.noise.is_some())?;
                stray("classes", self.classes.is_some())?;
                stray("features", self.features.is_some())?;
                stray("cluster_std", self.cluster_std.is_some())?;
                if self.images.is_none() || self.labels.is_none() {
                    return Err(HarnessError::Config("idx datasets need both dataset.images and dataset.labels".into()));
                }
            }
        }
        if self.samples == Some(0) {
            return Err(HarnessError::Config("dataset.samples must be positive".into()));
        }
        Ok(())
    }
}

fn kind_name(kind: DatasetKind) -> &'static str {
    match kind {
        DatasetKind::Moons => "moons",
        DatasetKind::Blobs => "blobs",
        DatasetKind::Idx => "idx",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub layer_sizes: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: ActivationKind,
}

fn default_activation() -> ActivationKind {
    ActivationKind::LambdaGelu
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardnessConfig {
    #[serde(default = "default_t")]
    pub t: f64,
    #[serde(default = "default_init_mode")]
    pub init_mode: InitMode,
    #[serde(default = "default_delta")]
    pub uniform_delta: f64,
}

fn default_t() -> f64 {
    DEFAULT_TEMPERATURE
}
fn default_init_mode() -> InitMode {
    InitMode::Uniform
}
fn default_delta() -> f64 {
    DEFAULT_UNIFORM_DELTA
}

impl Default for HardnessConfig {
    fn default() -> Self {
        Self {
            t: default_t(),
            init_mode: default_init_mode(),
            uniform_delta: default_delta(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    #[serde(default = "default_direction")]
    pub metric_direction: MetricDirection,
}

fn default_epochs() -> usize {
    40
}
fn default_batch() -> usize {
    32
}
fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}
fn default_val_fraction() -> f64 {
    1.0 / 3.0
}
fn default_direction() -> MetricDirection {
    MetricDirection::HigherBetter
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            batch_size: default_batch(),
            seeds: default_seeds(),
            val_fraction: default_val_fraction(),
            metric_direction: default_direction(),
        }
    }
}

/// Annealing parameters. `lambda_target` wins over `epsilon` when both are
/// given; with neither, `epsilon = 5e-3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealConfig {
    #[serde(default = "default_switch")]
    pub switch_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_target: Option<f64>,
}

fn default_switch() -> f64 {
    DEFAULT_SWITCH_FRACTION
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            switch_fraction: default_switch(),
            epsilon: None,
            lambda_target: None,
        }
    }
}

impl AnnealConfig {
    pub fn target(&self) -> HarnessResult<f64> {
        match (self.lambda_target, self.epsilon) {
            (Some(l), _) => Ok(l),
            (None, eps) => lambda_target_for(eps.unwrap_or(DEFAULT_EPSILON))
                .map_err(|e| HarnessError::Config(format!("anneal.epsilon: {e}"))),
        }
    }

    pub fn plan(&self, total_epochs: usize) -> HarnessResult<AnnealPlan> {
        AnnealPlan::new(total_epochs, self.switch_fraction, self.target()?)
            .map_err(|e| HarnessError::Config(format!("anneal: {e}")))
    }
}

/// The `(t, c)` sweep. Each cell trains every seed under every listed mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_values: Vec<f64>,
    pub c_values: Vec<f64>,
    #[serde(default = "default_modes")]
    pub modes: Vec<InitMode>,
}

fn default_modes() -> Vec<InitMode> {
    InitMode::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub dataset: DatasetSpec,
    pub model: ModelConfig,
    #[serde(default)]
    pub hardness: HardnessConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anneal: Option<AnnealConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
}

impl TrainConfig {
    /// The small moons setup used by the tests and as a starting point for
    /// config files.
    pub fn desk_moons() -> Self {
        Self {
            dataset: DatasetSpec::moons(600, 0.2, 0),
            model: ModelConfig {
                layer_sizes: vec![2, 16, 16, 16, 2],
                activation: ActivationKind::LambdaGelu,
            },
            hardness: HardnessConfig::default(),
            optimizer: OptimizerConfig {
                lr_weights: 0.2,
                ..OptimizerConfig::default()
            },
            training: TrainingConfig::default(),
            anneal: None,
            grid: None,
        }
    }

    pub fn from_toml_str(text: &str) -> HarnessResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file. Relative IDX paths are resolved
    /// against the file's directory.
    pub fn from_file(path: &Path) -> HarnessResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.dataset.images, &mut cfg.dataset.labels].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> HarnessResult<()> {
        let err = |m: String| Err(HarnessError::Config(m));
        self.dataset.validate()?;
        let sizes = &self.model.layer_sizes;
        if sizes.len() < 2 {
            return err(format!("model.layer_sizes needs at least 2 entries, got {}", sizes.len()));
        }
        if sizes.contains(&0) {
            return err("model.layer_sizes entries must be positive".into());
        }
        let t = self.hardness.t;
        if !(t > 0.0) || !t.is_finite() {
            return err(format!("hardness.t = {t}"));
        }
        let d = self.hardness.uniform_delta;
        if !(d > 0.0) || !d.is_finite() {
            return err(format!("hardness.uniform_delta = {d}"));
        }
        self.optimizer
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        let tr = &self.training;
        if tr.epochs == 0 {
            return err("training.epochs must be positive".into());
        }
        if tr.batch_size == 0 {
            return err("training.batch_size must be positive".into());
        }
        if tr.seeds.is_empty() {
            return err("training.seeds must not be empty".into());
        }
        if !(tr.val_fraction > 0.0 && tr.val_fraction < 1.0) {
            return err(format!("training.val_fraction = {} is outside (0, 1)", tr.val_fraction));
        }
        if let Some(a) = &self.anneal {
            a.plan(tr.epochs)?;
        }
        if let Some(g) = &self.grid {
            if g.t_values.is_empty() || g.c_values.is_empty() || g.modes.is_empty() {
                return err("grid axes must not be empty".into());
            }
            if let Some(t) = g.t_values.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
                return err(format!("grid.t_values contains {t}"));
            }
            if let Some(c) = g.c_values.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
                return err(format!("grid.c_values contains {c}"));
            }
        }
        Ok(())
    }

    pub fn with_seeds(mut self, seeds: Vec<u64>) -> Self {
        self.training.seeds = seeds;
        self
    }
}
