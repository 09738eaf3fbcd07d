//! Adversarial training: four algorithms over a shared generator /
//! discriminator pair, epoch snapshotting with a validation metric,
//! sampling into decoded tables, and random hyperparameter search.
//!
//! The algorithms:
//!
//! * **Vanilla** — classifying discriminator, Adam on both sides, generator
//!   loss `mean(log(1 - D(G(z))))` plus a weighted distribution-matching
//!   term over the discrete sample segments.
//! * **Wasserstein** — critic without sigmoid, RMSProp, several critic
//!   steps per generator step, parameters clipped after every critic step.
//! * **Conditional** — vanilla objectives with a label one-hot appended to
//!   both networks' inputs; every iteration performs one discriminator and
//!   one generator step per label value.
//! * **DifferentiallyPrivate** — the Wasserstein loop with per-example
//!   critic gradients summed and perturbed by Gaussian noise before the
//!   averaged update.

mod kl;
mod run;
mod trainer;

pub use kl::{kl_term, kl_term_node};
pub use run::{
    default_search_grid, generate, hyperparam_search, train_with_snapshots, write_epoch_log,
    EpochRecord, GenerateSpec, SearchCandidate, SearchOutcome, SnapshotMetric, TrainOutcome,
};
pub use trainer::{StepStats, Trainer};

use crate::autodiff::{AdError, ParamSet, Tensor};
use crate::models::{Discriminator, Generator, ModelError};
use crate::table::{Table, Value};
use crate::transform::{FittedTransformer, TransformError};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("no training samples")]
    EmptyData,
    #[error("critic training requires a discriminator without the output sigmoid")]
    SigmoidCritic,
    #[error("conditional training requires labelled data")]
    NoLabels,
    #[error("conditional generation requires a label mix")]
    MissingLabelMix,
    #[error("hyperparameter search needs at least one candidate")]
    NoCandidates,
    #[error("table has no rows")]
    EmptyTable,
    #[error("training setup: {0}")]
    Setup(String),
    #[error("validation metric: {0}")]
    Metric(String),
    #[error(transparent)]
    Autodiff(#[from] AdError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Table(#[from] crate::table::TableError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Training algorithm selector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Vanilla,
    Wasserstein,
    Conditional,
    #[serde(alias = "dp")]
    DifferentiallyPrivate,
}

impl Algorithm {
    /// Critic-style algorithms train without the output sigmoid.
    pub fn is_critic(&self) -> bool {
        matches!(self, Algorithm::Wasserstein | Algorithm::DifferentiallyPrivate)
    }

    pub fn is_conditional(&self) -> bool {
        matches!(self, Algorithm::Conditional)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Vanilla => "vanilla",
            Algorithm::Wasserstein => "wasserstein",
            Algorithm::Conditional => "conditional",
            Algorithm::DifferentiallyPrivate => "differentially_private",
        })
    }
}

/// Knobs for one training run.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    /// Minibatch size.
    pub batch: usize,
    /// Discriminator/critic learning rate.
    pub lr_d: f64,
    /// Generator learning rate.
    pub lr_g: f64,
    pub epochs: usize,
    /// Iterations per epoch; defaults to `ceil(n / batch)` when `None`.
    pub steps_per_epoch: Option<usize>,
    /// Critic steps per generator step (critic algorithms).
    pub critic_iters: usize,
    /// Clip bound applied to critic parameters after every critic step.
    pub clip_bound: f64,
    /// Gradient sensitivity scale entering the perturbation deviation.
    pub grad_bound: f64,
    /// Gaussian noise scale for the private algorithm; 0 disables noise.
    pub noise_scale: f64,
    /// Weight of the distribution-matching term in the vanilla generator
    /// loss; 0 disables it.
    pub kl_weight: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Defaults for an algorithm: Adam rate 2e-4 for the classifying
    /// variants, RMSProp rate 5e-5 for the critic variants, batch 128,
    /// 10 epochs, 5 critic steps, clip 0.01, unit gradient bound and
    /// distribution-matching weight.
    pub fn new(algorithm: Algorithm) -> Self {
        let lr = if algorithm.is_critic() { 5e-5 } else { 2e-4 };
        TrainConfig {
            algorithm,
            batch: 128,
            lr_d: lr,
            lr_g: lr,
            epochs: 10,
            steps_per_epoch: None,
            critic_iters: 5,
            clip_bound: 0.01,
            grad_bound: 1.0,
            noise_scale: if algorithm == Algorithm::DifferentiallyPrivate { 1.0 } else { 0.0 },
            kl_weight: if algorithm == Algorithm::Vanilla { 1.0 } else { 0.0 },
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Iterations in one epoch for `n` training samples.
    pub fn epoch_steps(&self, n: usize) -> usize {
        self.steps_per_epoch.unwrap_or_else(|| n.div_ceil(self.batch).max(1))
    }
}

/// Encoded training set: samples plus (when present) per-row labels.
#[derive(Clone, Debug)]
pub struct EncodedData {
    pub samples: Tensor,
    pub labels: Option<Vec<usize>>,
    pub label_cardinality: usize,
}

impl EncodedData {
    pub fn n(&self) -> usize {
        self.samples.rows()
    }

    pub fn width(&self) -> usize {
        self.samples.cols()
    }
}

/// Encode a table for training, carrying labels along when designated.
pub fn encode_for_training(
    table: &Table,
    transformer: &FittedTransformer,
) -> Result<EncodedData, TrainError> {
    if table.is_empty() {
        return Err(TrainError::EmptyData);
    }
    let samples = transformer.encode(table)?;
    Ok(EncodedData {
        samples,
        labels: table.labels(),
        label_cardinality: table.schema().label_cardinality(),
    })
}

/// Generator / discriminator pair with their parameter sets.
#[derive(Clone, Debug)]
pub struct GanModels {
    pub generator: Generator,
    pub gen_params: ParamSet,
    pub discriminator: Discriminator,
    pub disc_params: ParamSet,
}

impl GanModels {
    /// Initialize both parameter sets from one seed (split internally) and
    /// check that the two networks agree on sample and condition widths.
    pub fn new(
        generator: Generator,
        discriminator: Discriminator,
        seed: u64,
    ) -> Result<Self, TrainError> {
        if discriminator.config.input_dim != generator.layout().width {
            return Err(TrainError::Setup(format!(
                "discriminator expects {} sample columns, generator produces {}",
                discriminator.config.input_dim,
                generator.layout().width
            )));
        }
        if discriminator.config.cond_dim != generator.config().cond_dim {
            return Err(TrainError::Setup(format!(
                "condition widths disagree: discriminator {}, generator {}",
                discriminator.config.cond_dim,
                generator.config().cond_dim
            )));
        }
        let gen_params = generator.init_params(seed.wrapping_mul(2).wrapping_add(1));
        let disc_params = discriminator.init_params(seed.wrapping_mul(2).wrapping_add(2));
        Ok(GanModels { generator, gen_params, discriminator, disc_params })
    }
}

/// Fraction of duplicated records after rounding numericals to four
/// significant digits: `1 - distinct / total`.
pub fn duplicate_rate(table: &Table) -> Result<f64, TrainError> {
    if table.is_empty() {
        return Err(TrainError::EmptyTable);
    }
    let mut seen = std::collections::BTreeSet::new();
    for row in table.rows() {
        let mut key = String::new();
        for v in row {
            match v {
                // 3 fractional digits in scientific notation = 4 significant.
                Value::Num(x) => key.push_str(&format!("{x:.3e}|")),
                Value::Cat(c) => key.push_str(&format!("#{c}|")),
            }
        }
        seen.insert(key);
    }
    Ok(1.0 - seen.len() as f64 / table.n_rows() as f64)
}
