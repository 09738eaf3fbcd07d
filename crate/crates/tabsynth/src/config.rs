//! Run configuration: a sectioned plain-text (TOML) file selecting the data
//! source, the record encoding, the networks, the training algorithm and the
//! evaluation metrics for one synthesis run. Every artifact a run produces
//! can be regenerated from its config and seed alone.
//!
//! ```toml
//! seed = 7
//! out = "runs/demo"
//!
//! [data.sim]
//! kind = "num"
//! n = 10000
//! rho = 0.5
//!
//! [train]
//! algorithm = "vanilla"
//! epochs = 10
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::eval::{
    default_kinds, ClassifierKind, DEFAULT_DCR_SAMPLE, DEFAULT_DRAWS, DEFAULT_HIT_SAMPLE,
    DEFAULT_SAMPLE_FRAC,
};
use crate::simdata::{LabelMode, SimCatSpec, SimNumSpec, CAT_DOMAIN};
use crate::table::DEFAULT_DISTINCT_THRESHOLD;
use crate::training::{Algorithm, TrainConfig};
use crate::transform::{Assembly, CategoricalScheme, NumericScheme, TransformSpec};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Everything one run needs. Unknown keys are rejected so typos surface as
/// config errors instead of silently falling back to defaults.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Directory the run writes its artifacts into.
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Synthetic rows as a fraction of the training rows.
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    pub data: DataConfig,
    #[serde(default)]
    pub transform: TransformConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchConfig>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_ratio() -> f64 {
    1.0
}

impl RunConfig {
    /// Parse and validate a config file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let cfg = Self::from_toml(&text)?;
        cfg.check_files()?;
        Ok(cfg)
    }

    /// Parse and validate config text (no file-existence checks).
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        toml::to_string_pretty(self).map_err(|e| invalid(e.to_string()))
    }

    /// Structural checks that need no filesystem access.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.data.validate()?;
        self.model.validate()?;
        self.eval.validate()?;
        if let Some(bench) = &self.bench {
            bench.validate()?;
        }
        if self.ratio <= 0.0 || !self.ratio.is_finite() {
            return Err(invalid(format!("ratio must be positive, got {}", self.ratio)));
        }
        Ok(())
    }

    /// Referenced input files must exist before a run starts.
    pub fn check_files(&self) -> Result<(), ConfigError> {
        for path in [&self.data.csv, &self.data.schema].into_iter().flatten() {
            if !path.exists() {
                return Err(invalid(format!("referenced file does not exist: {}", path.display())));
            }
        }
        Ok(())
    }

    pub fn transform_spec(&self) -> TransformSpec {
        self.transform.to_spec()
    }

    /// Training knobs: algorithm defaults overridden by the set fields, the
    /// run seed carried along.
    pub fn train_config(&self) -> TrainConfig {
        self.train.to_train_config(self.seed)
    }

    /// The classifier set for evaluation; the standard five when the config
    /// leaves it empty.
    pub fn classifier_kinds(&self) -> Vec<ClassifierKind> {
        if self.eval.classifiers.is_empty() {
            default_kinds()
        } else {
            self.eval.classifiers.clone()
        }
    }
}

/// Where the rows come from: a CSV file or a simulated-data generator,
/// exactly one of the two.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    /// Schema file for the CSV; inferred from the data when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<PathBuf>,
    /// Label attribute name, overriding any designation in the schema file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimConfig>,
    /// Distinct-value cutoff below which an unannotated column is read as
    /// categorical during schema inference.
    #[serde(default = "default_distinct")]
    pub distinct_threshold: usize,
}

fn default_distinct() -> usize {
    DEFAULT_DISTINCT_THRESHOLD
}

impl DataConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        match (&self.csv, &self.sim) {
            (Some(_), Some(_)) => Err(invalid("data.csv and data.sim are mutually exclusive")),
            (None, None) => Err(invalid("one data source is required: data.csv or data.sim")),
            _ => Ok(()),
        }
    }
}

/// Which simulated table to draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimKind {
    /// Two numeric attributes from a bivariate Gaussian mixture.
    Num,
    /// Five chained categorical attributes.
    Cat,
}

/// Simulated-data request; unused knobs for the chosen kind are ignored.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub kind: SimKind,
    #[serde(default = "default_sim_n")]
    pub n: usize,
    /// In-component attribute correlation (numeric kind).
    #[serde(default = "default_half")]
    pub rho: f64,
    /// Positive-label share.
    #[serde(default = "default_half")]
    pub skew: f64,
    /// How labels attach to numeric rows.
    #[serde(default = "default_label_mode")]
    pub label_mode: LabelMode,
    /// Probability an attribute repeats its predecessor (categorical kind).
    #[serde(default = "default_half")]
    pub chain_prob: f64,
    /// Values per categorical attribute.
    #[serde(default = "default_domain")]
    pub domain_size: usize,
}

fn default_sim_n() -> usize {
    10_000
}

fn default_half() -> f64 {
    0.5
}

fn default_label_mode() -> LabelMode {
    LabelMode::RatioQuota
}

fn default_domain() -> usize {
    CAT_DOMAIN
}

impl SimConfig {
    pub fn num_spec(&self, seed: u64) -> SimNumSpec {
        SimNumSpec { n: self.n, rho: self.rho, skew: self.skew, label_mode: self.label_mode, seed }
    }

    pub fn cat_spec(&self, seed: u64) -> SimCatSpec {
        SimCatSpec {
            n: self.n,
            chain_prob: self.chain_prob,
            skew: self.skew,
            domain_size: self.domain_size,
            seed,
        }
    }
}

/// Encoding choices, mirroring the transformer spec with per-field defaults
/// so a config may set only what it changes.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformConfig {
    #[serde(default = "default_numeric")]
    pub numeric: NumericScheme,
    #[serde(default = "default_components")]
    pub gmm_components: usize,
    #[serde(default = "default_categorical")]
    pub categorical: CategoricalScheme,
    #[serde(default = "default_assembly")]
    pub assembly: Assembly,
}

fn default_numeric() -> NumericScheme {
    NumericScheme::Gmm
}

fn default_components() -> usize {
    5
}

fn default_categorical() -> CategoricalScheme {
    CategoricalScheme::OneHot
}

fn default_assembly() -> Assembly {
    Assembly::Vector
}

impl Default for TransformConfig {
    fn default() -> Self {
        TransformConfig {
            numeric: default_numeric(),
            gmm_components: default_components(),
            categorical: default_categorical(),
            assembly: default_assembly(),
        }
    }
}

impl TransformConfig {
    pub fn to_spec(self) -> TransformSpec {
        TransformSpec {
            numeric: self.numeric,
            gmm_components: self.gmm_components,
            categorical: self.categorical,
            assembly: self.assembly,
        }
    }
}

/// Generator architecture selector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    #[default]
    Mlp,
    Lstm,
}

impl std::fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GeneratorKind::Mlp => "mlp",
            GeneratorKind::Lstm => "lstm",
        })
    }
}

/// Network sizes.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub generator: GeneratorKind,
    /// Hidden layer widths of the MLP generator.
    #[serde(default = "default_hidden")]
    pub gen_hidden: Vec<usize>,
    /// State width of the LSTM generator.
    #[serde(default = "default_width")]
    pub lstm_hidden: usize,
    /// Width of the feature the LSTM feeds back between steps.
    #[serde(default = "default_width")]
    pub lstm_feature: usize,
    /// Width of the noise prior.
    #[serde(default = "default_width")]
    pub z_dim: usize,
    /// Hidden layer widths of the discriminator.
    #[serde(default = "default_hidden")]
    pub disc_hidden: Vec<usize>,
}

fn default_hidden() -> Vec<usize> {
    vec![100, 100]
}

fn default_width() -> usize {
    100
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            generator: GeneratorKind::default(),
            gen_hidden: default_hidden(),
            lstm_hidden: default_width(),
            lstm_feature: default_width(),
            z_dim: default_width(),
            disc_hidden: default_hidden(),
        }
    }
}

impl ModelConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        if self.z_dim == 0 {
            return Err(invalid("model.z_dim must be positive"));
        }
        if self.gen_hidden.is_empty() || self.gen_hidden.contains(&0) {
            return Err(invalid("model.gen_hidden needs at least one positive width"));
        }
        if self.disc_hidden.is_empty() || self.disc_hidden.contains(&0) {
            return Err(invalid("model.disc_hidden needs at least one positive width"));
        }
        if self.lstm_hidden == 0 || self.lstm_feature == 0 {
            return Err(invalid("model.lstm_hidden and model.lstm_feature must be positive"));
        }
        Ok(())
    }
}

/// Training knobs. Unset fields fall back to the chosen algorithm's
/// defaults, so e.g. switching to `wasserstein` picks up the slower RMSProp
/// rate without restating it.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr_d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_per_epoch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critic_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kl_weight: Option<f64>,
}

fn default_algorithm() -> Algorithm {
    Algorithm::Vanilla
}

impl TrainSection {
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        let mut cfg = TrainConfig::new(self.algorithm).with_seed(seed);
        if let Some(v) = self.batch {
            cfg.batch = v;
        }
        if let Some(v) = self.lr_d {
            cfg.lr_d = v;
        }
        if let Some(v) = self.lr_g {
            cfg.lr_g = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if self.steps_per_epoch.is_some() {
            cfg.steps_per_epoch = self.steps_per_epoch;
        }
        if let Some(v) = self.critic_iters {
            cfg.critic_iters = v;
        }
        if let Some(v) = self.clip_bound {
            cfg.clip_bound = v;
        }
        if let Some(v) = self.grad_bound {
            cfg.grad_bound = v;
        }
        if let Some(v) = self.noise_scale {
            cfg.noise_scale = v;
        }
        if let Some(v) = self.kl_weight {
            cfg.kl_weight = v;
        }
        cfg
    }
}

/// Which metric families to compute and their sampling knobs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "default_true")]
    pub classification: bool,
    #[serde(default = "default_true")]
    pub clustering: bool,
    #[serde(default = "default_true")]
    pub aqp: bool,
    #[serde(default = "default_true")]
    pub privacy: bool,
    /// Classifier set; the standard five when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classifiers: Vec<ClassifierKind>,
    /// Workload size for the aggregate-query metric.
    #[serde(default = "default_queries")]
    pub aqp_queries: usize,
    /// Random-sample fraction the query baseline draws.
    #[serde(default = "default_frac")]
    pub sample_frac: f64,
    /// Sample redraws averaged into the query baseline.
    #[serde(default = "default_draws")]
    pub draws: usize,
    /// Synthetic rows scored for the hitting rate.
    #[serde(default = "default_hit_sample")]
    pub hit_sample: usize,
    /// Real rows scored for the distance to the closest record.
    #[serde(default = "default_dcr_sample")]
    pub dcr_sample: usize,
}

fn default_true() -> bool {
    true
}

fn default_queries() -> usize {
    100
}

fn default_frac() -> f64 {
    DEFAULT_SAMPLE_FRAC
}

fn default_draws() -> usize {
    DEFAULT_DRAWS
}

fn default_hit_sample() -> usize {
    DEFAULT_HIT_SAMPLE
}

fn default_dcr_sample() -> usize {
    DEFAULT_DCR_SAMPLE
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            classification: true,
            clustering: true,
            aqp: true,
            privacy: true,
            classifiers: Vec::new(),
            aqp_queries: default_queries(),
            sample_frac: default_frac(),
            draws: default_draws(),
            hit_sample: default_hit_sample(),
            dcr_sample: default_dcr_sample(),
        }
    }
}

impl EvalConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        for kind in &self.classifiers {
            kind.validate().map_err(|e| invalid(e.to_string()))?;
        }
        if !(self.sample_frac > 0.0 && self.sample_frac <= 1.0) {
            return Err(invalid(format!(
                "eval.sample_frac must be in (0, 1], got {}",
                self.sample_frac
            )));
        }
        if self.aqp && (self.aqp_queries == 0 || self.draws == 0) {
            return Err(invalid("eval.aqp_queries and eval.draws must be positive"));
        }
        Ok(())
    }
}

/// A grid of design choices for batch comparison: one cell per combination,
/// in generator-major, numeric-scheme-middle, algorithm-minor order.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default = "default_generators")]
    pub generators: Vec<GeneratorKind>,
    #[serde(default = "default_numerics")]
    pub numerics: Vec<NumericScheme>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
}

fn default_generators() -> Vec<GeneratorKind> {
    vec![GeneratorKind::Mlp]
}

fn default_numerics() -> Vec<NumericScheme> {
    vec![NumericScheme::Gmm]
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Vanilla]
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            generators: default_generators(),
            numerics: default_numerics(),
            algorithms: default_algorithms(),
        }
    }
}

impl BenchConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        if self.generators.is_empty() || self.numerics.is_empty() || self.algorithms.is_empty() {
            return Err(invalid("bench axes must each list at least one choice"));
        }
        Ok(())
    }

    /// The grid cells in deterministic order.
    pub fn cells(&self) -> Vec<BenchCell> {
        let mut out = Vec::new();
        let mut index = 0;
        for &generator in &self.generators {
            for &numeric in &self.numerics {
                for &algorithm in &self.algorithms {
                    out.push(BenchCell { index, generator, numeric, algorithm });
                    index += 1;
                }
            }
        }
        out
    }
}

/// One bench grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BenchCell {
    pub index: usize,
    pub generator: GeneratorKind,
    pub numeric: NumericScheme,
    pub algorithm: Algorithm,
}
