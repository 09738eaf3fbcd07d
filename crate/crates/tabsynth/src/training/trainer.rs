//! Single-step training engine shared by the four algorithms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::autodiff::{apply_bn_updates, Graph, Tensor};
use crate::models::encode_condition_batch;

use super::kl::kl_term_node;
use super::{Algorithm, EncodedData, GanModels, TrainConfig, TrainError};

/// Losses observed in one iteration. `d_loss` and `g_loss` are the values
/// the respective networks minimize (the discriminator's objective is
/// negated into a loss), `kl` is the unweighted distribution-matching term.
#[derive(Clone, Copy, Debug)]
pub struct StepStats {
    pub d_loss: f64,
    pub g_loss: f64,
    pub kl: f64,
}

/// Runs training iterations against a model pair. Randomness is split into
/// independent seeded streams for minibatch selection, noise inputs, and
/// gradient perturbation, so algorithm variants that share a code path stay
/// reproducible against each other.
#[derive(Debug)]
pub struct Trainer<'a> {
    cfg: TrainConfig,
    models: &'a mut GanModels,
    data: &'a EncodedData,
    data_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    perturb_rng: ChaCha8Rng,
    /// Row indices per label value (conditional algorithm only).
    pools: Vec<Vec<usize>>,
    kl_spans: Vec<(usize, usize)>,
    record_noise: bool,
    noise_samples: Vec<f64>,
    post_clip_max: Vec<f64>,
    steps_taken: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(
        cfg: TrainConfig,
        models: &'a mut GanModels,
        data: &'a EncodedData,
    ) -> Result<Self, TrainError> {
        if data.n() == 0 || cfg.batch == 0 {
            return Err(TrainError::EmptyData);
        }
        let gen_width = models.generator.layout().width;
        if data.width() != gen_width {
            return Err(TrainError::Setup(format!(
                "data rows are {} wide but the generator produces {}; \
                 the bundled networks consume the flat (vector) assembly",
                data.width(),
                gen_width
            )));
        }
        let cond_dim = models.generator.config().cond_dim;
        if cfg.algorithm.is_critic() {
            if models.discriminator.config.final_sigmoid {
                return Err(TrainError::SigmoidCritic);
            }
            if cfg.critic_iters == 0 {
                return Err(TrainError::Setup("critic_iters must be at least 1".into()));
            }
            if cfg.kl_weight != 0.0 {
                return Err(TrainError::Setup(
                    "the distribution-matching term applies to the classifier-loss \
                     algorithms only"
                        .into(),
                ));
            }
        }
        let mut pools = Vec::new();
        if cfg.algorithm.is_conditional() {
            let labels = data.labels.as_ref().ok_or(TrainError::NoLabels)?;
            if data.label_cardinality == 0 {
                return Err(TrainError::NoLabels);
            }
            if cond_dim != data.label_cardinality {
                return Err(TrainError::Setup(format!(
                    "networks take a {cond_dim}-wide condition but the data has {} labels",
                    data.label_cardinality
                )));
            }
            pools = vec![Vec::new(); data.label_cardinality];
            for (row, &y) in labels.iter().enumerate() {
                pools[y].push(row);
            }
            if pools.iter().all(|p| p.is_empty()) {
                return Err(TrainError::NoLabels);
            }
        } else if cond_dim != 0 {
            return Err(TrainError::Setup(
                "conditioned networks require the conditional algorithm".into(),
            ));
        }
        let kl_spans = models.generator.layout().softmax_spans();
        let seed = cfg.seed;
        Ok(Trainer {
            cfg,
            models,
            data,
            data_rng: stream_rng(seed, 0),
            noise_rng: stream_rng(seed, 1),
            perturb_rng: stream_rng(seed, 2),
            pools,
            kl_spans,
            record_noise: false,
            noise_samples: Vec::new(),
            post_clip_max: Vec::new(),
            steps_taken: 0,
        })
    }

    pub fn models(&self) -> &GanModels {
        self.models
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    /// Record every injected gradient perturbation (scaled by `1/m`, i.e.
    /// as it lands in the averaged gradient) for diagnostics.
    pub fn set_record_noise(&mut self, on: bool) {
        self.record_noise = on;
    }

    pub fn noise_samples(&self) -> &[f64] {
        &self.noise_samples
    }

    /// Largest trainable critic parameter magnitude observed right after
    /// each clip, one entry per critic step.
    pub fn post_clip_max(&self) -> &[f64] {
        &self.post_clip_max
    }

    /// One training iteration of the configured algorithm.
    pub fn step(&mut self) -> Result<StepStats, TrainError> {
        let stats = match self.cfg.algorithm {
            Algorithm::Vanilla => self.classifier_round(None),
            Algorithm::Conditional => self.conditional_round(),
            Algorithm::Wasserstein => self.critic_round(0.0),
            Algorithm::DifferentiallyPrivate => self.critic_round(self.cfg.noise_scale),
        }?;
        self.steps_taken += 1;
        Ok(stats)
    }

    // ---- classifier-loss algorithms ---------------------------------

    /// One discriminator and one generator update with the classifying
    /// losses; `label` carries the condition in the conditional variant.
    fn classifier_round(&mut self, label: Option<usize>) -> Result<StepStats, TrainError> {
        let m = self.cfg.batch;
        let card = self.data.label_cardinality;

        // Discriminator ascends mean log D(x) + mean log(1 - D(G(z))).
        let real = match label {
            Some(y) => {
                let idx = self.sample_from_pool(y, m);
                gather_rows(&self.data.samples, &idx)
            }
            None => {
                let idx = self.sample_indices(m);
                gather_rows(&self.data.samples, &idx)
            }
        };
        let z = self.sample_noise(m);
        let cond_rows = match label {
            Some(y) => Some(encode_condition_batch(&vec![y; m], card)?),
            None => None,
        };

        let mut g = Graph::new();
        let zv = g.input(z)?;
        let cv = match &cond_rows {
            Some(c) => Some(g.input(c.clone())?),
            None => None,
        };
        let fake =
            self.models.generator.forward_frozen(&mut g, &self.models.gen_params, zv, cv, true)?;
        let rv = g.input(real.clone())?;
        let s_real =
            self.models.discriminator.forward_logits(&mut g, &self.models.disc_params, rv, cv)?;
        let s_fake =
            self.models.discriminator.forward_logits(&mut g, &self.models.disc_params, fake, cv)?;
        // log D(x) = log_sigmoid(s), log(1 - D(x)) = log_sigmoid(-s).
        let log_d_real = g.log_sigmoid(s_real)?;
        let real_term = g.mean_all(log_d_real)?;
        let neg_fake = g.neg(s_fake)?;
        let log_one_minus = g.log_sigmoid(neg_fake)?;
        let fake_term = g.mean_all(log_one_minus)?;
        let objective = g.add(real_term, fake_term)?;
        let d_loss_node = g.neg(objective)?;
        let d_loss = g.value(d_loss_node).item();
        self.models.disc_params.zero_grads();
        g.backward(d_loss_node, &mut self.models.disc_params)?;
        self.models.disc_params.adam_step(self.cfg.lr_d)?;
        apply_bn_updates(&mut self.models.gen_params, &g.take_bn_updates())?;

        // Generator descends mean log(1 - D(G(z))) plus the weighted
        // distribution-matching term.
        let z = self.sample_noise(m);
        let mut g = Graph::new();
        let zv = g.input(z)?;
        let cv = match &cond_rows {
            Some(c) => Some(g.input(c.clone())?),
            None => None,
        };
        let fake = self.models.generator.forward(&mut g, &self.models.gen_params, zv, cv, true)?;
        let s_fake = self.models.discriminator.forward_logits_frozen(
            &mut g,
            &self.models.disc_params,
            fake,
            cv,
        )?;
        let neg_fake = g.neg(s_fake)?;
        let log_one_minus = g.log_sigmoid(neg_fake)?;
        let adversarial = g.mean_all(log_one_minus)?;
        let mut kl_value = 0.0;
        let loss_node = if self.cfg.kl_weight > 0.0 && !self.kl_spans.is_empty() {
            // The matching term compares against this round's real minibatch.
            let kl = kl_term_node(&mut g, &real, fake, &self.kl_spans)?;
            kl_value = g.value(kl).item();
            let w = g.scalar(self.cfg.kl_weight)?;
            let weighted = g.mul(w, kl)?;
            g.add(adversarial, weighted)?
        } else {
            adversarial
        };
        let g_loss = g.value(adversarial).item();
        self.models.gen_params.zero_grads();
        g.backward(loss_node, &mut self.models.gen_params)?;
        self.models.gen_params.adam_step(self.cfg.lr_g)?;
        apply_bn_updates(&mut self.models.gen_params, &g.take_bn_updates())?;

        Ok(StepStats { d_loss, g_loss, kl: kl_value })
    }

    /// One iteration of the conditional algorithm: a discriminator and a
    /// generator update per label value that has training rows.
    fn conditional_round(&mut self) -> Result<StepStats, TrainError> {
        let active: Vec<usize> =
            (0..self.pools.len()).filter(|&y| !self.pools[y].is_empty()).collect();
        let mut total = StepStats { d_loss: 0.0, g_loss: 0.0, kl: 0.0 };
        for &y in &active {
            let s = self.classifier_round(Some(y))?;
            total.d_loss += s.d_loss;
            total.g_loss += s.g_loss;
            total.kl += s.kl;
        }
        let k = active.len() as f64;
        Ok(StepStats { d_loss: total.d_loss / k, g_loss: total.g_loss / k, kl: total.kl / k })
    }

    // ---- critic algorithms -------------------------------------------

    /// One iteration of the critic algorithms: `critic_iters` critic updates
    /// followed by one generator update. `sigma > 0` perturbs the summed
    /// per-example gradients before averaging.
    fn critic_round(&mut self, sigma: f64) -> Result<StepStats, TrainError> {
        let mut objective_sum = 0.0;
        for _ in 0..self.cfg.critic_iters {
            objective_sum += self.critic_step(sigma)?;
        }
        let d_loss = -objective_sum / self.cfg.critic_iters as f64;

        // Generator ascends mean D(G(z)), i.e. descends its negation.
        let m = self.cfg.batch;
        let z = self.sample_noise(m);
        let mut g = Graph::new();
        let zv = g.input(z)?;
        let fake = self.models.generator.forward(&mut g, &self.models.gen_params, zv, None, true)?;
        let scores = self.models.discriminator.forward_logits_frozen(
            &mut g,
            &self.models.disc_params,
            fake,
            None,
        )?;
        let mean_score = g.mean_all(scores)?;
        let loss = g.neg(mean_score)?;
        let g_loss = g.value(loss).item();
        self.models.gen_params.zero_grads();
        g.backward(loss, &mut self.models.gen_params)?;
        self.models.gen_params.rmsprop_step(self.cfg.lr_g)?;
        apply_bn_updates(&mut self.models.gen_params, &g.take_bn_updates())?;

        Ok(StepStats { d_loss, g_loss, kl: 0.0 })
    }

    /// One critic update from per-example gradients: the per-example
    /// gradients of `D(x_i) - D(G(z_i))` are accumulated in example order,
    /// optionally perturbed, averaged, applied with RMSProp and clipped.
    /// Returns the minibatch critic objective.
    fn critic_step(&mut self, sigma: f64) -> Result<f64, TrainError> {
        let m = self.cfg.batch;
        let idx = self.sample_indices(m);
        let z = self.sample_noise(m);

        // Fake minibatch from one batch-statistics forward pass.
        let fake_vals = {
            let mut g = Graph::new();
            let zv = g.input(z)?;
            let fake = self.models.generator.forward_frozen(
                &mut g,
                &self.models.gen_params,
                zv,
                None,
                true,
            )?;
            let vals = g.value(fake).clone();
            apply_bn_updates(&mut self.models.gen_params, &g.take_bn_updates())?;
            vals
        };

        self.models.disc_params.zero_grads();
        let mut objective = 0.0;
        for (i, &row) in idx.iter().enumerate() {
            let mut g = Graph::new();
            let xr = g.input(self.data.samples.extract_row(row))?;
            let xf = g.input(fake_vals.extract_row(i))?;
            let s_real = self.models.discriminator.forward_logits(
                &mut g,
                &self.models.disc_params,
                xr,
                None,
            )?;
            let s_fake = self.models.discriminator.forward_logits(
                &mut g,
                &self.models.disc_params,
                xf,
                None,
            )?;
            let diff = g.sub(s_real, s_fake)?;
            objective += g.value(diff).item();
            let loss = g.neg(diff)?;
            g.backward(loss, &mut self.models.disc_params)?;
        }

        if sigma > 0.0 {
            let std = sigma * self.cfg.grad_bound;
            let normal = Normal::new(0.0, std)
                .map_err(|e| TrainError::Setup(format!("noise scale: {e}")))?;
            for e_idx in 0..self.models.disc_params.len() {
                if !self.models.disc_params.entry(e_idx).trainable {
                    continue;
                }
                let coords = self.models.disc_params.entry(e_idx).value.len();
                for c in 0..coords {
                    let draw: f64 = normal.sample(&mut self.perturb_rng);
                    self.models.disc_params.add_to_grad(e_idx, c, draw);
                    if self.record_noise {
                        self.noise_samples.push(draw / m as f64);
                    }
                }
            }
        }

        self.models.disc_params.scale_grads(1.0 / m as f64);
        self.models.disc_params.rmsprop_step(self.cfg.lr_d)?;
        self.models.disc_params.clip(self.cfg.clip_bound);
        self.post_clip_max.push(self.models.disc_params.max_abs_trainable());
        Ok(objective / m as f64)
    }

    // ---- sampling helpers --------------------------------------------

    fn sample_indices(&mut self, m: usize) -> Vec<usize> {
        let n = self.data.n();
        (0..m).map(|_| self.data_rng.random_range(0..n)).collect()
    }

    /// Minibatch rows for one label: without replacement when the pool is
    /// large enough, with replacement when fewer than `m` rows exist.
    fn sample_from_pool(&mut self, label: usize, m: usize) -> Vec<usize> {
        let pool = &self.pools[label];
        if pool.len() >= m {
            rand::seq::index::sample(&mut self.data_rng, pool.len(), m)
                .iter()
                .map(|i| pool[i])
                .collect()
        } else {
            (0..m).map(|_| pool[self.data_rng.random_range(0..pool.len())]).collect()
        }
    }

    fn sample_noise(&mut self, rows: usize) -> Tensor {
        let cols = self.models.generator.config().z_dim;
        let mut t = Tensor::zeros(rows, cols);
        for v in t.data_mut() {
            *v = StandardNormal.sample(&mut self.noise_rng);
        }
        t
    }
}

/// Independent deterministic stream `k` of a seed.
fn stream_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Copy the given rows of `samples` into a dense minibatch tensor.
fn gather_rows(samples: &Tensor, idx: &[usize]) -> Tensor {
    let mut out = Tensor::zeros(idx.len(), samples.cols());
    for (r, &i) in idx.iter().enumerate() {
        out.row_slice_mut(r).copy_from_slice(samples.row_slice(i));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};
    use crate::transform::{SampleLayout, Segment, SegmentKind};

    /// Layout with one tanh scalar, a 3-mode softmax and a 2-way one-hot.
    fn toy_layout() -> SampleLayout {
        let segments = vec![
            Segment { attr: 0, kind: SegmentKind::GmmScalar, start: 0, width: 1 },
            Segment { attr: 0, kind: SegmentKind::GmmModes { k: 3 }, start: 1, width: 3 },
            Segment { attr: 1, kind: SegmentKind::OneHot { k: 2 }, start: 4, width: 2 },
        ];
        SampleLayout { segments, width: 6 }
    }

    /// Valid samples for `toy_layout`: scalar in [-1, 1], one-hot spans.
    fn toy_data(n: usize, seed: u64) -> EncodedData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Tensor::zeros(n, 6);
        let mut labels = Vec::with_capacity(n);
        for r in 0..n {
            let row = t.row_slice_mut(r);
            row[0] = rng.random_range(-1.0..1.0);
            let mode = rng.random_range(0..3);
            row[1 + mode] = 1.0;
            let label = rng.random_range(0..2);
            row[4 + label] = 1.0;
            labels.push(label);
        }
        EncodedData { samples: t, labels: Some(labels), label_cardinality: 2 }
    }

    fn toy_models(algorithm: Algorithm, seed: u64) -> GanModels {
        let cond = if algorithm.is_conditional() { 2 } else { 0 };
        let gen_cfg = GeneratorConfig::mlp(vec![8], 4).with_condition(cond);
        let generator = Generator::new(gen_cfg, toy_layout()).unwrap();
        let mut d_cfg = DiscriminatorConfig::new(6, vec![8]).with_condition(cond);
        if algorithm.is_critic() {
            d_cfg = d_cfg.without_sigmoid();
        }
        let discriminator = Discriminator::new(d_cfg).unwrap();
        GanModels::new(generator, discriminator, seed).unwrap()
    }

    fn cfg(algorithm: Algorithm) -> TrainConfig {
        let mut c = TrainConfig::new(algorithm);
        c.batch = 8;
        c.seed = 11;
        c
    }

    fn param_blob(models: &GanModels) -> Vec<f64> {
        let mut v = Vec::new();
        for e in models.gen_params.entries().iter().chain(models.disc_params.entries()) {
            v.extend_from_slice(e.value.data());
        }
        v
    }

    #[test]
    fn vanilla_step_updates_both_networks_with_finite_losses() {
        let data = toy_data(32, 1);
        let mut models = toy_models(Algorithm::Vanilla, 3);
        let before = param_blob(&models);
        let mut trainer = Trainer::new(cfg(Algorithm::Vanilla), &mut models, &data).unwrap();
        let s = trainer.step().unwrap();
        assert!(s.d_loss.is_finite() && s.g_loss.is_finite());
        assert!(s.kl >= 0.0);
        drop(trainer);
        let after = param_blob(&models);
        assert_ne!(before, after);
    }

    #[test]
    fn flat_discriminator_gives_the_generator_no_gradient() {
        // The generator's log(1 - D(G(z))) loss saturates when the
        // discriminator is constant: zeroing its output layer must leave
        // every trainable generator entry bit-identical after a step.
        let data = toy_data(32, 1);
        let mut models = toy_models(Algorithm::Vanilla, 3);
        for name in ["out.w", "out.b"] {
            models.disc_params.get_mut(name).unwrap().data_mut().fill(0.0);
        }
        let gen_trainables = |m: &GanModels| -> Vec<f64> {
            m.gen_params
                .entries()
                .iter()
                .filter(|e| e.trainable)
                .flat_map(|e| e.value.data().iter().copied())
                .collect()
        };
        let before = gen_trainables(&models);
        let mut c = cfg(Algorithm::Vanilla);
        c.kl_weight = 0.0;
        c.lr_d = 0.0; // keep the discriminator flat through its own update
        let mut trainer = Trainer::new(c, &mut models, &data).unwrap();
        let s = trainer.step().unwrap();
        assert!((s.g_loss - 0.5f64.ln()).abs() < 1e-12);
        drop(trainer);
        assert_eq!(before, gen_trainables(&models));
    }

    #[test]
    fn conditional_minibatches_avoid_repeats_when_the_pool_allows() {
        let data = toy_data(40, 9);
        let mut models = toy_models(Algorithm::Conditional, 10);
        let mut trainer = Trainer::new(cfg(Algorithm::Conditional), &mut models, &data).unwrap();
        for label in 0..2 {
            let idx = trainer.sample_from_pool(label, 8);
            let mut sorted = idx.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), idx.len(), "repeated row in {idx:?}");
            let labels = data.labels.as_ref().unwrap();
            assert!(idx.iter().all(|&r| labels[r] == label));
        }
        // A pool smaller than the batch falls back to replacement.
        let small = toy_data(6, 2);
        let mut models = toy_models(Algorithm::Conditional, 11);
        let mut trainer = Trainer::new(cfg(Algorithm::Conditional), &mut models, &small).unwrap();
        let idx = trainer.sample_from_pool(0, 8);
        assert_eq!(idx.len(), 8);
    }

    #[test]
    fn kl_weight_zero_skips_the_matching_term() {
        let data = toy_data(32, 1);
        let mut models = toy_models(Algorithm::Vanilla, 3);
        let mut c = cfg(Algorithm::Vanilla);
        c.kl_weight = 0.0;
        let mut trainer = Trainer::new(c, &mut models, &data).unwrap();
        assert_eq!(trainer.step().unwrap().kl, 0.0);
    }

    #[test]
    fn critic_parameters_stay_inside_the_clip_bound() {
        let data = toy_data(32, 2);
        let mut models = toy_models(Algorithm::Wasserstein, 4);
        let mut trainer = Trainer::new(cfg(Algorithm::Wasserstein), &mut models, &data).unwrap();
        for _ in 0..4 {
            trainer.step().unwrap();
        }
        // 4 iterations x 5 critic steps, checked after every critic step.
        assert_eq!(trainer.post_clip_max().len(), 20);
        assert!(trainer.post_clip_max().iter().all(|&v| v <= 0.01 + 1e-15));
    }

    #[test]
    fn private_run_without_noise_matches_the_critic_run_bitwise() {
        let data = toy_data(32, 5);
        let mut w_models = toy_models(Algorithm::Wasserstein, 6);
        let mut p_models = toy_models(Algorithm::DifferentiallyPrivate, 6);
        let mut w_cfg = cfg(Algorithm::Wasserstein);
        let mut p_cfg = cfg(Algorithm::DifferentiallyPrivate);
        p_cfg.noise_scale = 0.0;
        w_cfg.seed = 9;
        p_cfg.seed = 9;
        {
            let mut w = Trainer::new(w_cfg, &mut w_models, &data).unwrap();
            for _ in 0..3 {
                w.step().unwrap();
            }
        }
        {
            let mut p = Trainer::new(p_cfg, &mut p_models, &data).unwrap();
            for _ in 0..3 {
                p.step().unwrap();
            }
        }
        assert_eq!(param_blob(&w_models), param_blob(&p_models));
    }

    #[test]
    fn injected_noise_has_the_configured_deviation() {
        let data = toy_data(32, 7);
        let mut models = toy_models(Algorithm::DifferentiallyPrivate, 8);
        let mut c = cfg(Algorithm::DifferentiallyPrivate);
        c.noise_scale = 0.5;
        c.grad_bound = 2.0;
        let mut trainer = Trainer::new(c, &mut models, &data).unwrap();
        trainer.set_record_noise(true);
        for _ in 0..5 {
            trainer.step().unwrap();
        }
        let samples = trainer.noise_samples();
        assert!(samples.len() >= 1000, "only {} draws recorded", samples.len());
        let mean: f64 = samples.iter().sum::<f64>() / samples.len() as f64;
        let var: f64 =
            samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / samples.len() as f64;
        let expected = 0.5 * 2.0 / 8.0; // sigma * bound / batch
        let ratio = var.sqrt() / expected;
        assert!((0.9..1.1).contains(&ratio), "std off by factor {ratio}");
    }

    #[test]
    fn conditional_round_covers_every_label() {
        let data = toy_data(40, 9);
        let mut models = toy_models(Algorithm::Conditional, 10);
        let before = param_blob(&models);
        let mut trainer = Trainer::new(cfg(Algorithm::Conditional), &mut models, &data).unwrap();
        let s = trainer.step().unwrap();
        assert!(s.d_loss.is_finite() && s.g_loss.is_finite());
        drop(trainer);
        assert_ne!(before, param_blob(&models));
    }

    #[test]
    fn setup_errors_are_reported() {
        let data = toy_data(16, 3);
        // Sigmoid discriminator under a critic algorithm.
        let gen =
            Generator::new(GeneratorConfig::mlp(vec![8], 4), toy_layout()).unwrap();
        let disc = Discriminator::new(DiscriminatorConfig::new(6, vec![8])).unwrap();
        let mut models = GanModels::new(gen, disc, 1).unwrap();
        let err = Trainer::new(cfg(Algorithm::Wasserstein), &mut models, &data).unwrap_err();
        assert!(matches!(err, TrainError::SigmoidCritic));

        // Conditional training without labels.
        let unlabeled = EncodedData {
            samples: data.samples.clone(),
            labels: None,
            label_cardinality: 0,
        };
        let mut models = toy_models(Algorithm::Conditional, 2);
        let err = Trainer::new(cfg(Algorithm::Conditional), &mut models, &unlabeled).unwrap_err();
        assert!(matches!(err, TrainError::NoLabels));

        // Empty minibatch.
        let mut models = toy_models(Algorithm::Vanilla, 2);
        let mut c = cfg(Algorithm::Vanilla);
        c.batch = 0;
        let err = Trainer::new(c, &mut models, &data).unwrap_err();
        assert!(matches!(err, TrainError::EmptyData));
    }

    #[test]
    fn same_seed_same_trajectory() {
        let data = toy_data(32, 4);
        let mut a = toy_models(Algorithm::Vanilla, 5);
        let mut b = toy_models(Algorithm::Vanilla, 5);
        {
            let mut t = Trainer::new(cfg(Algorithm::Vanilla), &mut a, &data).unwrap();
            t.step().unwrap();
            t.step().unwrap();
        }
        {
            let mut t = Trainer::new(cfg(Algorithm::Vanilla), &mut b, &data).unwrap();
            t.step().unwrap();
            t.step().unwrap();
        }
        assert_eq!(param_blob(&a), param_blob(&b));
    }
}
