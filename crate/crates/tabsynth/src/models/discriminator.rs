//! Discriminator / critic: stacked affine layers with leaky rectification,
//! no normalization, and a single output unit. The sigmoid on the output is
//! part of the model only for the classifying (non-critic) variants; critic
//! training reads the raw score.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, ParamSet, Tensor, VarId};

use super::{insert_affine, ModelError, LEAKY_SLOPE};

#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorConfig {
    /// Width of the encoded sample.
    pub input_dim: usize,
    /// Width of the condition vector appended to the sample; 0 disables
    /// conditioning.
    pub cond_dim: usize,
    pub hidden: Vec<usize>,
    /// Whether scores pass through a sigmoid (true for the classifying GAN
    /// variants, false for Wasserstein critics).
    pub final_sigmoid: bool,
    /// The reduced-capacity variant is pinned to exactly one hidden layer.
    pub simplified: bool,
}

impl DiscriminatorConfig {
    pub fn new(input_dim: usize, hidden: Vec<usize>) -> Self {
        DiscriminatorConfig { input_dim, cond_dim: 0, hidden, final_sigmoid: true, simplified: false }
    }

    /// Reduced-capacity variant: one hidden layer of `width` units.
    pub fn simplified(input_dim: usize, width: usize) -> Self {
        DiscriminatorConfig {
            input_dim,
            cond_dim: 0,
            hidden: vec![width],
            final_sigmoid: true,
            simplified: true,
        }
    }

    pub fn with_condition(mut self, cond_dim: usize) -> Self {
        self.cond_dim = cond_dim;
        self
    }

    pub fn without_sigmoid(mut self) -> Self {
        self.final_sigmoid = false;
        self
    }
}

#[derive(Clone, Debug)]
pub struct Discriminator {
    pub config: DiscriminatorConfig,
}

impl Discriminator {
    pub fn new(config: DiscriminatorConfig) -> Result<Self, ModelError> {
        if config.input_dim == 0 {
            return Err(ModelError::BadConfig("input width must be positive".into()));
        }
        if config.hidden.is_empty() || config.hidden.contains(&0) {
            return Err(ModelError::BadConfig("hidden layers must be non-empty".into()));
        }
        if config.simplified && config.hidden.len() != 1 {
            return Err(ModelError::BadConfig(
                "the simplified variant has exactly one hidden layer".into(),
            ));
        }
        Ok(Discriminator { config })
    }

    pub fn init_params(&self, seed: u64) -> ParamSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ps = ParamSet::new();
        let mut fan_in = self.config.input_dim + self.config.cond_dim;
        for (i, &width) in self.config.hidden.iter().enumerate() {
            insert_affine(&mut ps, &format!("layer{i}"), fan_in, width, &mut rng);
            fan_in = width;
        }
        insert_affine(&mut ps, "out", fan_in, 1, &mut rng);
        ps
    }

    /// Raw (pre-sigmoid) scores as an `m x 1` node.
    pub fn forward_logits(
        &self,
        g: &mut Graph,
        params: &ParamSet,
        x: VarId,
        cond: Option<VarId>,
    ) -> Result<VarId, ModelError> {
        self.check_inputs(g, x, cond)?;
        let mut h = match cond {
            Some(c) => g.concat(&[x, c])?,
            None => x,
        };
        for i in 0..self.config.hidden.len() {
            let w = g.param(params, &format!("layer{i}.w"))?;
            let b = g.param(params, &format!("layer{i}.b"))?;
            let a = g.affine(h, w, b)?;
            h = g.leaky_relu(a, LEAKY_SLOPE)?;
        }
        let w = g.param(params, "out.w")?;
        let b = g.param(params, "out.b")?;
        Ok(g.affine(h, w, b)?)
    }

    /// Like [`Discriminator::forward_logits`] but with the parameters frozen,
    /// for generator updates against a fixed discriminator.
    pub fn forward_logits_frozen(
        &self,
        g: &mut Graph,
        params: &ParamSet,
        x: VarId,
        cond: Option<VarId>,
    ) -> Result<VarId, ModelError> {
        self.check_inputs(g, x, cond)?;
        let mut h = match cond {
            Some(c) => g.concat(&[x, c])?,
            None => x,
        };
        for i in 0..self.config.hidden.len() {
            let w = g.frozen_param(params, &format!("layer{i}.w"))?;
            let b = g.frozen_param(params, &format!("layer{i}.b"))?;
            let a = g.affine(h, w, b)?;
            h = g.leaky_relu(a, LEAKY_SLOPE)?;
        }
        let w = g.frozen_param(params, "out.w")?;
        let b = g.frozen_param(params, "out.b")?;
        Ok(g.affine(h, w, b)?)
    }

    /// Scores for a batch of samples: probabilities when the model carries
    /// its output sigmoid, raw critic scores otherwise.
    pub fn discriminate(
        &self,
        params: &ParamSet,
        x: &Tensor,
        cond: Option<&Tensor>,
    ) -> Result<Tensor, ModelError> {
        let mut g = Graph::new();
        let xv = g.input(x.clone())?;
        let cv = match cond {
            Some(c) => Some(g.input(c.clone())?),
            None => None,
        };
        let logits = self.forward_logits(&mut g, params, xv, cv)?;
        let out = if self.config.final_sigmoid { g.sigmoid(logits)? } else { logits };
        Ok(g.value(out).clone())
    }

    fn check_inputs(&self, g: &Graph, x: VarId, cond: Option<VarId>) -> Result<(), ModelError> {
        if g.value(x).cols() != self.config.input_dim {
            return Err(ModelError::ShapeMismatch {
                what: "sample input",
                expected: self.config.input_dim,
                got: g.value(x).cols(),
            });
        }
        match (self.config.cond_dim, cond) {
            (0, None) => Ok(()),
            (k, Some(c)) if k > 0 && g.value(c).cols() == k => Ok(()),
            (k, Some(c)) => Err(ModelError::ShapeMismatch {
                what: "condition input",
                expected: k,
                got: g.value(c).cols(),
            }),
            (k, None) => {
                Err(ModelError::ShapeMismatch { what: "condition input", expected: k, got: 0 })
            }
        }
    }
}
