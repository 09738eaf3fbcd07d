//! Feed-forward generator: affine, batch normalization and relu per hidden
//! layer, followed by per-segment output heads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, ParamSet, Tensor, VarId};
use crate::transform::SampleLayout;

use super::{head_activation, insert_affine, GeneratorArch, GeneratorConfig, ModelError};

#[derive(Clone, Debug)]
pub struct MlpGenerator {
    pub config: GeneratorConfig,
    pub layout: SampleLayout,
}

impl MlpGenerator {
    pub(crate) fn new(config: GeneratorConfig, layout: SampleLayout) -> Self {
        MlpGenerator { config, layout }
    }

    fn hidden(&self) -> &[usize] {
        match &self.config.arch {
            GeneratorArch::Mlp { hidden } => hidden,
            GeneratorArch::Lstm { .. } => unreachable!("constructed as MLP"),
        }
    }

    pub fn init_params(&self, seed: u64) -> ParamSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ps = ParamSet::new();
        let mut fan_in = self.config.z_dim + self.config.cond_dim;
        for (i, &width) in self.hidden().iter().enumerate() {
            insert_affine(&mut ps, &format!("layer{i}"), fan_in, width, &mut rng);
            let ones = Tensor::from_vec(1, width, vec![1.0; width]).unwrap();
            ps.insert(&format!("bn{i}.gamma"), ones.clone(), true).unwrap();
            ps.insert(&format!("bn{i}.beta"), Tensor::zeros(1, width), true).unwrap();
            ps.insert(&format!("bn{i}.running_mean"), Tensor::zeros(1, width), false).unwrap();
            ps.insert(&format!("bn{i}.running_var"), ones, false).unwrap();
            fan_in = width;
        }
        for (i, seg) in self.layout.segments.iter().enumerate() {
            insert_affine(&mut ps, &format!("head{i}"), fan_in, seg.width, &mut rng);
        }
        ps
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        params: &ParamSet,
        z: VarId,
        cond: Option<VarId>,
        train: bool,
        get: super::ParamGetter,
    ) -> Result<VarId, ModelError> {
        let mut h = match cond {
            Some(c) => g.concat(&[z, c])?,
            None => z,
        };
        for i in 0..self.hidden().len() {
            let w = get(g, params, &format!("layer{i}.w"))?;
            let b = get(g, params, &format!("layer{i}.b"))?;
            let a = g.affine(h, w, b)?;
            let gamma = get(g, params, &format!("bn{i}.gamma"))?;
            let beta = get(g, params, &format!("bn{i}.beta"))?;
            let n = if train {
                g.batchnorm_train(a, gamma, beta, &format!("bn{i}"))?
            } else {
                let mean = params.get(&format!("bn{i}.running_mean"))?.clone();
                let var = params.get(&format!("bn{i}.running_var"))?.clone();
                g.batchnorm_infer(a, gamma, beta, &mean, &var)?
            };
            h = g.relu(n)?;
        }
        let mut outs = Vec::with_capacity(self.layout.segments.len());
        for (i, seg) in self.layout.segments.iter().enumerate() {
            let w = get(g, params, &format!("head{i}.w"))?;
            let b = get(g, params, &format!("head{i}.b"))?;
            let raw = g.affine(h, w, b)?;
            outs.push(head_activation(g, raw, seg.kind)?);
        }
        Ok(g.concat(&outs)?)
    }
}
