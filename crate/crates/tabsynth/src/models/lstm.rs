//! Recurrent generator: one cell step per layout segment.
//!
//! Every step consumes the (fixed per record) noise, the optional condition
//! and the previous step's projected feature vector; the head for segment
//! `j` reads the feature vector produced at step `j`. Mixture-normalized
//! numerical attributes therefore take two consecutive steps: first the
//! within-component scalar, then the component choice. The initial state
//! `h0` and feature `f0` are seeded constants stored (non-trainable) in the
//! parameter set; the cell state starts at zero.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, ParamSet, Tensor, VarId};
use crate::transform::SampleLayout;

use super::{head_activation, insert_affine, xavier, GeneratorArch, GeneratorConfig, ModelError};

#[derive(Clone, Debug)]
pub struct LstmGenerator {
    pub config: GeneratorConfig,
    pub layout: SampleLayout,
}

impl LstmGenerator {
    pub(crate) fn new(config: GeneratorConfig, layout: SampleLayout) -> Self {
        LstmGenerator { config, layout }
    }

    fn dims(&self) -> (usize, usize) {
        match self.config.arch {
            GeneratorArch::Lstm { hidden, feature_width } => (hidden, feature_width),
            GeneratorArch::Mlp { .. } => unreachable!("constructed as LSTM"),
        }
    }

    pub fn init_params(&self, seed: u64) -> ParamSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ps = ParamSet::new();
        let (hidden, feat) = self.dims();
        let in_width = self.config.z_dim + self.config.cond_dim + feat + hidden;
        // Single weight matrix for the four gates, input/forget/cell/output.
        insert_affine(&mut ps, "cell", in_width, 4 * hidden, &mut rng);
        insert_affine(&mut ps, "proj", hidden, feat, &mut rng);
        for (i, seg) in self.layout.segments.iter().enumerate() {
            insert_affine(&mut ps, &format!("head{i}"), feat, seg.width, &mut rng);
        }
        // Fixed starting state and feature, drawn once at init time.
        ps.insert("h0", xavier(1, hidden, &mut rng), false).unwrap();
        ps.insert("f0", xavier(1, feat, &mut rng), false).unwrap();
        ps
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        params: &ParamSet,
        z: VarId,
        cond: Option<VarId>,
        get: super::ParamGetter,
    ) -> Result<VarId, ModelError> {
        let (hidden, _) = self.dims();
        let rows = g.value(z).rows();
        let base = match cond {
            Some(c) => g.concat(&[z, c])?,
            None => z,
        };
        let h0 = get(g, params, "h0")?;
        let f0 = get(g, params, "f0")?;
        let mut h = g.broadcast_rows(h0, rows)?;
        let mut f = g.broadcast_rows(f0, rows)?;
        let mut s = g.input(Tensor::zeros(rows, hidden))?;

        let cell_w = get(g, params, "cell.w")?;
        let cell_b = get(g, params, "cell.b")?;
        let proj_w = get(g, params, "proj.w")?;
        let proj_b = get(g, params, "proj.b")?;

        let mut outs = Vec::with_capacity(self.layout.segments.len());
        for (i, seg) in self.layout.segments.iter().enumerate() {
            let inp = g.concat(&[base, f, h])?;
            let gates = g.affine(inp, cell_w, cell_b)?;
            let i_raw = g.slice_cols(gates, 0, hidden)?;
            let f_raw = g.slice_cols(gates, hidden, hidden)?;
            let g_raw = g.slice_cols(gates, 2 * hidden, hidden)?;
            let o_raw = g.slice_cols(gates, 3 * hidden, hidden)?;
            let i_gate = g.sigmoid(i_raw)?;
            let f_gate = g.sigmoid(f_raw)?;
            let g_gate = g.tanh(g_raw)?;
            let o_gate = g.sigmoid(o_raw)?;
            let keep = g.mul(f_gate, s)?;
            let write = g.mul(i_gate, g_gate)?;
            s = g.add(keep, write)?;
            let s_act = g.tanh(s)?;
            h = g.mul(o_gate, s_act)?;
            let f_raw = g.affine(h, proj_w, proj_b)?;
            f = g.tanh(f_raw)?;

            let w = get(g, params, &format!("head{i}.w"))?;
            let b = get(g, params, &format!("head{i}.b"))?;
            let raw = g.affine(f, w, b)?;
            outs.push(head_activation(g, raw, seg.kind)?);
        }
        Ok(g.concat(&outs)?)
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::demo_layout;
    use super::super::{Generator, GeneratorConfig};
    use crate::autodiff::Tensor;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noise(rows: usize, cols: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn output_respects_layout_constraints() {
        let layout = demo_layout();
        let gen = Generator::new(GeneratorConfig::lstm(20, 12, 8), layout.clone()).unwrap();
        let ps = gen.init_params(9);
        let z = noise(5, 8, 2);
        let out = gen.generate(&ps, &z, None).unwrap();
        assert_eq!(out.shape(), (5, layout.width));
        for r in 0..5 {
            let row = out.row_slice(r);
            let modes: f64 = row[1..4].iter().sum();
            let onehot: f64 = row[4..8].iter().sum();
            assert!((modes - 1.0).abs() < 1e-9);
            assert!((onehot - 1.0).abs() < 1e-9);
            assert!(row[0] > -1.0 && row[0] < 1.0);
            assert!(row[8] > 0.0 && row[8] < 1.0);
        }
    }

    #[test]
    fn rows_are_independent_records() {
        // Generating a batch must equal generating each row alone: the
        // recurrence runs across segments, never across records.
        let gen = Generator::new(GeneratorConfig::lstm(16, 10, 6), demo_layout()).unwrap();
        let ps = gen.init_params(4);
        let z = noise(3, 6, 7);
        let batch = gen.generate(&ps, &z, None).unwrap();
        for r in 0..3 {
            let single = gen.generate(&ps, &z.extract_row(r), None).unwrap();
            for (a, b) in batch.row_slice(r).iter().zip(single.row_slice(0)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn initial_state_is_stored_with_parameters() {
        let gen = Generator::new(GeneratorConfig::lstm(16, 10, 6), demo_layout()).unwrap();
        let ps = gen.init_params(4);
        assert!(!ps.entries().iter().find(|e| e.name == "h0").unwrap().trainable);
        assert!(!ps.entries().iter().find(|e| e.name == "f0").unwrap().trainable);
        // Re-initializing with the same seed reproduces them exactly.
        let ps2 = gen.init_params(4);
        assert_eq!(ps.get("h0").unwrap(), ps2.get("h0").unwrap());
        assert_eq!(ps.get("f0").unwrap(), ps2.get("f0").unwrap());
    }
}
