//! Generator and discriminator networks whose output heads mirror the
//! sample layout of a fitted transformer.
//!
//! Each layout segment gets its own head: tanh for normalized scalars,
//! softmax for one-hot/component segments, sigmoid for ordinal scalars.
//! Generators come in two architectures: a feed-forward net with batch
//! normalization, and a recurrent cell that emits one segment per timestep,
//! feeding each step's projected features back into the next.

mod discriminator;
mod lstm;
mod mlp;

pub use discriminator::{Discriminator, DiscriminatorConfig};
pub use lstm::LstmGenerator;
pub use mlp::MlpGenerator;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{AdError, Graph, ParamSet, Tensor, VarId};
use crate::transform::{SampleLayout, SegmentKind};

/// Negative-side slope of the discriminator's leaky rectifier.
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("bad model configuration: {0}")]
    BadConfig(String),
    #[error("{what}: expected {expected} columns, got {got}")]
    ShapeMismatch { what: &'static str, expected: usize, got: usize },
    #[error("label index {index} out of range for {bound} labels")]
    OutOfRange { index: usize, bound: usize },
    #[error(transparent)]
    Autodiff(#[from] AdError),
}

/// Generator architecture choice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GeneratorArch {
    /// Feed-forward: per layer affine, batch normalization, relu.
    Mlp { hidden: Vec<usize> },
    /// Recurrent: one cell step per layout segment with `hidden` state units
    /// and a `feature_width`-wide projected feature fed back between steps.
    Lstm { hidden: usize, feature_width: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub arch: GeneratorArch,
    /// Width of the noise prior (standard normal).
    pub z_dim: usize,
    /// Width of the condition vector appended to the noise; 0 disables
    /// conditioning.
    pub cond_dim: usize,
}

impl GeneratorConfig {
    pub fn mlp(hidden: Vec<usize>, z_dim: usize) -> Self {
        GeneratorConfig { arch: GeneratorArch::Mlp { hidden }, z_dim, cond_dim: 0 }
    }

    pub fn lstm(hidden: usize, feature_width: usize, z_dim: usize) -> Self {
        GeneratorConfig { arch: GeneratorArch::Lstm { hidden, feature_width }, z_dim, cond_dim: 0 }
    }

    pub fn with_condition(mut self, cond_dim: usize) -> Self {
        self.cond_dim = cond_dim;
        self
    }
}

/// Unified generator facade over both architectures.
#[derive(Clone, Debug)]
pub enum Generator {
    Mlp(MlpGenerator),
    Lstm(LstmGenerator),
}

impl Generator {
    pub fn new(config: GeneratorConfig, layout: SampleLayout) -> Result<Self, ModelError> {
        if config.z_dim == 0 {
            return Err(ModelError::BadConfig("noise width must be positive".into()));
        }
        if layout.segments.is_empty() {
            return Err(ModelError::BadConfig("sample layout has no segments".into()));
        }
        match &config.arch {
            GeneratorArch::Mlp { hidden } => {
                if hidden.is_empty() || hidden.contains(&0) {
                    return Err(ModelError::BadConfig("hidden layers must be non-empty".into()));
                }
                Ok(Generator::Mlp(MlpGenerator::new(config, layout)))
            }
            GeneratorArch::Lstm { hidden, feature_width } => {
                if *hidden == 0 || *feature_width == 0 {
                    return Err(ModelError::BadConfig(
                        "state and feature widths must be positive".into(),
                    ));
                }
                Ok(Generator::Lstm(LstmGenerator::new(config, layout)))
            }
        }
    }

    pub fn config(&self) -> &GeneratorConfig {
        match self {
            Generator::Mlp(m) => &m.config,
            Generator::Lstm(l) => &l.config,
        }
    }

    pub fn layout(&self) -> &SampleLayout {
        match self {
            Generator::Mlp(m) => &m.layout,
            Generator::Lstm(l) => &l.layout,
        }
    }

    /// Fresh, seeded parameter set for this generator.
    pub fn init_params(&self, seed: u64) -> ParamSet {
        match self {
            Generator::Mlp(m) => m.init_params(seed),
            Generator::Lstm(l) => l.init_params(seed),
        }
    }

    /// Build the forward pass on `graph`. `train` selects batch-statistics
    /// mode for normalization layers; pass `false` when sampling.
    pub fn forward(
        &self,
        graph: &mut Graph,
        params: &ParamSet,
        z: VarId,
        cond: Option<VarId>,
        train: bool,
    ) -> Result<VarId, ModelError> {
        self.forward_with(graph, params, z, cond, train, linked_param)
    }

    /// Forward pass whose parameters enter the graph as constants. Used when
    /// another network's update needs generated samples without depositing
    /// gradients into the generator.
    pub fn forward_frozen(
        &self,
        graph: &mut Graph,
        params: &ParamSet,
        z: VarId,
        cond: Option<VarId>,
        train: bool,
    ) -> Result<VarId, ModelError> {
        self.forward_with(graph, params, z, cond, train, constant_param)
    }

    fn forward_with(
        &self,
        graph: &mut Graph,
        params: &ParamSet,
        z: VarId,
        cond: Option<VarId>,
        train: bool,
        get: ParamGetter,
    ) -> Result<VarId, ModelError> {
        check_widths(self.config(), graph, z, cond)?;
        match self {
            Generator::Mlp(m) => m.forward(graph, params, z, cond, train, get),
            Generator::Lstm(l) => l.forward(graph, params, z, cond, get),
        }
    }

    /// Run the generator in inference mode and return the sample values.
    pub fn generate(
        &self,
        params: &ParamSet,
        z: &Tensor,
        cond: Option<&Tensor>,
    ) -> Result<Tensor, ModelError> {
        let mut g = Graph::new();
        let zv = g.input(z.clone())?;
        let cv = match cond {
            Some(c) => Some(g.input(c.clone())?),
            None => None,
        };
        let out = self.forward(&mut g, params, zv, cv, false)?;
        Ok(g.value(out).clone())
    }
}

/// How a forward pass pulls parameters into the graph: linked for gradient
/// updates, or copied in as constants.
pub(crate) type ParamGetter = fn(&mut Graph, &ParamSet, &str) -> Result<VarId, AdError>;

pub(crate) fn linked_param(g: &mut Graph, ps: &ParamSet, name: &str) -> Result<VarId, AdError> {
    g.param(ps, name)
}

pub(crate) fn constant_param(g: &mut Graph, ps: &ParamSet, name: &str) -> Result<VarId, AdError> {
    g.frozen_param(ps, name)
}

fn check_widths(
    config: &GeneratorConfig,
    graph: &Graph,
    z: VarId,
    cond: Option<VarId>,
) -> Result<(), ModelError> {
    if graph.value(z).cols() != config.z_dim {
        return Err(ModelError::ShapeMismatch {
            what: "noise input",
            expected: config.z_dim,
            got: graph.value(z).cols(),
        });
    }
    match (config.cond_dim, cond) {
        (0, None) => Ok(()),
        (0, Some(_)) => {
            Err(ModelError::ShapeMismatch { what: "condition input", expected: 0, got: 1 })
        }
        (k, None) => Err(ModelError::ShapeMismatch { what: "condition input", expected: k, got: 0 }),
        (k, Some(c)) => {
            if graph.value(c).cols() != k {
                return Err(ModelError::ShapeMismatch {
                    what: "condition input",
                    expected: k,
                    got: graph.value(c).cols(),
                });
            }
            if graph.value(c).rows() != graph.value(z).rows() {
                return Err(ModelError::ShapeMismatch {
                    what: "condition rows",
                    expected: graph.value(z).rows(),
                    got: graph.value(c).rows(),
                });
            }
            Ok(())
        }
    }
}

/// One-hot encoding of a label index.
pub fn encode_condition(label: usize, cardinality: usize) -> Result<Tensor, ModelError> {
    if label >= cardinality {
        return Err(ModelError::OutOfRange { index: label, bound: cardinality });
    }
    let mut t = Tensor::zeros(1, cardinality);
    t.set(0, label, 1.0);
    Ok(t)
}

/// One-hot encoding of a batch of label indices.
pub fn encode_condition_batch(
    labels: &[usize],
    cardinality: usize,
) -> Result<Tensor, ModelError> {
    let mut t = Tensor::zeros(labels.len(), cardinality);
    for (i, &l) in labels.iter().enumerate() {
        if l >= cardinality {
            return Err(ModelError::OutOfRange { index: l, bound: cardinality });
        }
        t.set(i, l, 1.0);
    }
    Ok(t)
}

/// Apply the head activation matching a segment kind.
pub(crate) fn head_activation(
    graph: &mut Graph,
    raw: VarId,
    kind: SegmentKind,
) -> Result<VarId, AdError> {
    match kind {
        SegmentKind::TanhScalar | SegmentKind::GmmScalar => graph.tanh(raw),
        SegmentKind::GmmModes { .. } | SegmentKind::OneHot { .. } => graph.softmax(raw),
        SegmentKind::OrdinalScalar => graph.sigmoid(raw),
    }
}

/// Uniform init with a fan-balanced limit.
pub(crate) fn xavier(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect();
    Tensor::from_vec(rows, cols, data).expect("sized to match")
}

/// Insert an affine layer's weight and bias (bias starts at zero).
pub(crate) fn insert_affine(
    ps: &mut ParamSet,
    prefix: &str,
    fan_in: usize,
    fan_out: usize,
    rng: &mut ChaCha8Rng,
) {
    ps.insert(&format!("{prefix}.w"), xavier(fan_in, fan_out, rng), true)
        .expect("unique layer names");
    ps.insert(&format!("{prefix}.b"), Tensor::zeros(1, fan_out), true)
        .expect("unique layer names");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::Segment;

    pub(crate) fn demo_layout() -> SampleLayout {
        // One mixture-normalized numeric (1 + 3), a 4-way one-hot and an
        // ordinal scalar: width 9.
        let segments = vec![
            Segment { attr: 0, kind: SegmentKind::GmmScalar, start: 0, width: 1 },
            Segment { attr: 0, kind: SegmentKind::GmmModes { k: 3 }, start: 1, width: 3 },
            Segment { attr: 1, kind: SegmentKind::OneHot { k: 4 }, start: 4, width: 4 },
            Segment { attr: 2, kind: SegmentKind::OrdinalScalar, start: 8, width: 1 },
        ];
        SampleLayout { segments, width: 9 }
    }

    #[test]
    fn condition_encoding_is_one_hot() {
        let c = encode_condition(2, 4).unwrap();
        assert_eq!(c.data(), &[0.0, 0.0, 1.0, 0.0]);
        assert!(matches!(encode_condition(4, 4), Err(ModelError::OutOfRange { .. })));
        let batch = encode_condition_batch(&[0, 3], 4).unwrap();
        assert_eq!(batch.row_slice(0), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(batch.row_slice(1), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let layout = demo_layout();
        assert!(matches!(
            Generator::new(GeneratorConfig::mlp(vec![], 10), layout.clone()),
            Err(ModelError::BadConfig(_))
        ));
        assert!(matches!(
            Generator::new(GeneratorConfig::mlp(vec![32], 0), layout.clone()),
            Err(ModelError::BadConfig(_))
        ));
        assert!(matches!(
            Generator::new(GeneratorConfig::lstm(0, 10, 8), layout),
            Err(ModelError::BadConfig(_))
        ));
    }

    #[test]
    fn forward_validates_input_widths() {
        let layout = demo_layout();
        let gen = Generator::new(GeneratorConfig::mlp(vec![16], 10), layout).unwrap();
        let ps = gen.init_params(1);
        let z = Tensor::zeros(4, 9); // wrong width
        assert!(matches!(
            gen.generate(&ps, &z, None),
            Err(ModelError::ShapeMismatch { what: "noise input", .. })
        ));
        let z = Tensor::zeros(4, 10);
        let c = Tensor::zeros(4, 2);
        assert!(matches!(
            gen.generate(&ps, &z, Some(&c)),
            Err(ModelError::ShapeMismatch { what: "condition input", .. })
        ));
    }
}
