//! Epoch loop with per-epoch snapshots, table generation, the training log,
//! and random hyperparameter search.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::{ParamSet, Tensor};
use crate::models::{encode_condition_batch, Generator};
use crate::table::{Table, Value};
use crate::transform::FittedTransformer;

use super::{duplicate_rate, EncodedData, GanModels, TrainConfig, TrainError, Trainer};

/// Rows generated per forward pass when sampling large tables.
const GEN_CHUNK: usize = 1024;

/// Scores a synthetic table; higher is better. Implemented for any
/// `FnMut(&Table) -> Result<f64, TrainError>` closure, and by the
/// classifier-backed metric in the evaluation module.
pub trait SnapshotMetric {
    fn score(&mut self, synthetic: &Table) -> Result<f64, TrainError>;
}

impl<F> SnapshotMetric for F
where
    F: FnMut(&Table) -> Result<f64, TrainError>,
{
    fn score(&mut self, synthetic: &Table) -> Result<f64, TrainError> {
        self(synthetic)
    }
}

/// One row of the training log. Loss columns are averages over the epoch's
/// iterations; `val_metric` and `duplicate_rate` are measured on a table
/// sampled from that epoch's snapshot.
#[derive(Clone, Copy, Debug)]
pub struct EpochRecord {
    pub epoch: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    pub kl: f64,
    pub val_metric: f64,
    pub duplicate_rate: f64,
}

/// Result of an epoch-snapshotted run. `best_epoch` is 1-based and picks
/// the highest `val_metric`, earliest epoch on ties.
pub struct TrainOutcome {
    pub best_epoch: usize,
    pub best_metric: f64,
    pub best_gen_params: ParamSet,
    pub snapshots: Vec<ParamSet>,
    pub log: Vec<EpochRecord>,
}

/// Train for the configured number of epochs, snapshotting the generator
/// after each one and scoring a generated table of `eval_rows` rows with
/// `metric`. The model pair is left at its final-epoch state; the returned
/// outcome carries the per-epoch snapshots and the selected best.
pub fn train_with_snapshots(
    models: &mut GanModels,
    data: &EncodedData,
    cfg: &TrainConfig,
    transformer: &FittedTransformer,
    metric: &mut dyn SnapshotMetric,
    eval_rows: usize,
) -> Result<TrainOutcome, TrainError> {
    if cfg.epochs == 0 {
        return Err(TrainError::Setup("at least one epoch is required".into()));
    }
    if eval_rows == 0 {
        return Err(TrainError::Setup("eval_rows must be positive".into()));
    }
    let steps = cfg.epoch_steps(data.n());
    // Conditional snapshots are sampled with the training label frequencies.
    let label_mix = if cfg.algorithm.is_conditional() {
        let labels = data.labels.as_ref().ok_or(TrainError::NoLabels)?;
        let mut counts = vec![0.0; data.label_cardinality];
        for &y in labels {
            counts[y] += 1.0;
        }
        Some(counts)
    } else {
        None
    };

    let mut trainer = Trainer::new(cfg.clone(), models, data)?;
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut snapshots = Vec::with_capacity(cfg.epochs);
    let mut best_epoch = 0;
    let mut best_metric = f64::NEG_INFINITY;
    for epoch in 1..=cfg.epochs {
        let (mut d_sum, mut g_sum, mut kl_sum) = (0.0, 0.0, 0.0);
        for _ in 0..steps {
            let s = trainer.step()?;
            d_sum += s.d_loss;
            g_sum += s.g_loss;
            kl_sum += s.kl;
        }
        let gen_params = trainer.models().gen_params.clone();
        let spec = GenerateSpec {
            rows: eval_rows,
            seed: snapshot_seed(cfg.seed, epoch),
            label_mix: label_mix.clone(),
        };
        let table = generate(&trainer.models().generator, &gen_params, transformer, &spec)?;
        let dup = duplicate_rate(&table)?;
        let score = metric.score(&table)?;
        log.push(EpochRecord {
            epoch,
            d_loss: d_sum / steps as f64,
            g_loss: g_sum / steps as f64,
            kl: kl_sum / steps as f64,
            val_metric: score,
            duplicate_rate: dup,
        });
        snapshots.push(gen_params);
        if score > best_metric {
            best_metric = score;
            best_epoch = epoch;
        }
    }
    let best_gen_params = snapshots[best_epoch - 1].clone();
    Ok(TrainOutcome { best_epoch, best_metric, best_gen_params, snapshots, log })
}

fn snapshot_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ 0xD1B5_4A32_D192_ED03u64.wrapping_add(epoch as u64)
}

/// Write the training log as CSV with one row per epoch.
pub fn write_epoch_log(path: &Path, records: &[EpochRecord]) -> Result<(), TrainError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "d_loss", "g_loss", "kl", "val_metric", "duplicate_rate"])?;
    for r in records {
        w.write_record([
            r.epoch.to_string(),
            r.d_loss.to_string(),
            r.g_loss.to_string(),
            r.kl.to_string(),
            r.val_metric.to_string(),
            r.duplicate_rate.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// How to sample a table from a trained generator.
#[derive(Clone, Debug)]
pub struct GenerateSpec {
    pub rows: usize,
    pub seed: u64,
    /// Relative label frequencies for conditioned generators; entries need
    /// not be normalized. Required exactly when the generator takes a
    /// condition.
    pub label_mix: Option<Vec<f64>>,
}

/// Sample `spec.rows` records and decode them into a table. Conditioned
/// generators draw per-label row counts from `label_mix` by largest
/// remainder and overwrite the decoded label attribute with the condition.
pub fn generate(
    generator: &Generator,
    params: &ParamSet,
    transformer: &FittedTransformer,
    spec: &GenerateSpec,
) -> Result<Table, TrainError> {
    let mut out = Table::new(transformer.schema().clone());
    if spec.rows == 0 {
        return Ok(out);
    }
    let z_dim = generator.config().z_dim;
    let card = generator.config().cond_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    if card == 0 {
        let mut remaining = spec.rows;
        while remaining > 0 {
            let chunk = remaining.min(GEN_CHUNK);
            let z = noise_tensor(&mut rng, chunk, z_dim);
            let vals = generator.generate(params, &z, None)?;
            let decoded = transformer.decode(&vals)?;
            for row in decoded.rows() {
                out.push_row(row.clone())?;
            }
            remaining -= chunk;
        }
        return Ok(out);
    }

    let mix = spec.label_mix.as_ref().ok_or(TrainError::MissingLabelMix)?;
    if mix.len() != card {
        return Err(TrainError::Setup(format!(
            "label mix has {} entries but the condition is {card} wide",
            mix.len()
        )));
    }
    if mix.iter().any(|p| !p.is_finite() || *p < 0.0) || mix.iter().sum::<f64>() <= 0.0 {
        return Err(TrainError::Setup("label mix must be non-negative with a positive sum".into()));
    }
    let label_attr = transformer.schema().label.ok_or(TrainError::NoLabels)?;
    for (y, &count) in quota_counts(mix, spec.rows).iter().enumerate() {
        let mut remaining = count;
        while remaining > 0 {
            let chunk = remaining.min(GEN_CHUNK);
            let z = noise_tensor(&mut rng, chunk, z_dim);
            let cond = encode_condition_batch(&vec![y; chunk], card)?;
            let vals = generator.generate(params, &z, Some(&cond))?;
            let decoded = transformer.decode(&vals)?;
            for row in decoded.rows() {
                let mut row = row.clone();
                row[label_attr] = Value::Cat(y);
                out.push_row(row)?;
            }
            remaining -= chunk;
        }
    }
    Ok(out)
}

fn noise_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let mut t = Tensor::zeros(rows, cols);
    for v in t.data_mut() {
        *v = StandardNormal.sample(rng);
    }
    t
}

/// Split `n` into per-class counts proportional to `weights` by largest
/// remainder; ties go to the lower index.
fn quota_counts(weights: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|&w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|&e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(n - assigned) {
        counts[i] += 1;
    }
    counts
}

/// One point of the search grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchCandidate {
    pub lr: f64,
    pub batch: usize,
    pub gen_hidden: Vec<usize>,
}

/// The default grid: learning rates {1e-4, 2e-4, 1e-3}, minibatch sizes
/// {64, 128, 500}, generator widths {(100, 100), (256, 256)}.
pub fn default_search_grid() -> Vec<SearchCandidate> {
    let mut grid = Vec::new();
    for &lr in &[1e-4, 2e-4, 1e-3] {
        for &batch in &[64usize, 128, 500] {
            for hidden in [vec![100, 100], vec![256, 256]] {
                grid.push(SearchCandidate { lr, batch, gen_hidden: hidden });
            }
        }
    }
    grid
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub best_index: usize,
    pub best: SearchCandidate,
    pub best_score: f64,
    /// `(candidate index, score)` in trial order.
    pub trials: Vec<(usize, f64)>,
}

/// Random search: draw `trials` candidates uniformly with replacement and
/// keep the best score. A repeated candidate reuses its cached score, and
/// only a strictly better score displaces the incumbent, so ties go to the
/// earliest trial.
pub fn hyperparam_search<F>(
    candidates: &[SearchCandidate],
    trials: usize,
    seed: u64,
    mut run: F,
) -> Result<SearchOutcome, TrainError>
where
    F: FnMut(&SearchCandidate) -> Result<f64, TrainError>,
{
    if candidates.is_empty() {
        return Err(TrainError::NoCandidates);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cache: BTreeMap<usize, f64> = BTreeMap::new();
    let mut best_index = usize::MAX;
    let mut best_score = f64::NEG_INFINITY;
    let mut trial_log = Vec::with_capacity(trials);
    for _ in 0..trials {
        let i = rng.random_range(0..candidates.len());
        let score = match cache.get(&i) {
            Some(&s) => s,
            None => {
                let s = run(&candidates[i])?;
                cache.insert(i, s);
                s
            }
        };
        trial_log.push((i, score));
        if score > best_score {
            best_score = score;
            best_index = i;
        }
    }
    if best_index == usize::MAX {
        return Err(TrainError::Setup("search needs at least one trial".into()));
    }
    Ok(SearchOutcome {
        best_index,
        best: candidates[best_index].clone(),
        best_score,
        trials: trial_log,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{encode_for_training, Algorithm};
    use super::*;
    use crate::models::{Discriminator, DiscriminatorConfig, GeneratorConfig};
    use crate::table::{AttrKind, AttributeMeta, Schema};
    use crate::transform::{NumericScheme, TransformSpec};

    fn labelled_table(n: usize) -> Table {
        let schema = Schema::new(vec![
            AttributeMeta {
                name: "x".into(),
                kind: AttrKind::Numerical { min: 0.0, max: 10.0, discrete: false },
            },
            AttributeMeta {
                name: "y".into(),
                kind: AttrKind::Categorical { categories: vec!["n".into(), "p".into()] },
            },
        ])
        .with_label("y")
        .unwrap();
        let mut t = Table::new(schema);
        for i in 0..n {
            t.push_row(vec![Value::Num(i as f64 % 10.0), Value::Cat(i % 2)]).unwrap();
        }
        t
    }

    fn simple_spec() -> TransformSpec {
        TransformSpec { numeric: NumericScheme::Simple, ..TransformSpec::default() }
    }

    fn fitted(n: usize) -> (Table, FittedTransformer) {
        let t = labelled_table(n);
        let tr = FittedTransformer::fit(&t, simple_spec(), 0).unwrap();
        (t, tr)
    }

    fn toy_models(transformer: &FittedTransformer, cond: usize, seed: u64) -> GanModels {
        let layout = transformer.layout();
        let gen_cfg = GeneratorConfig::mlp(vec![8], 4).with_condition(cond);
        let generator = Generator::new(gen_cfg, layout.clone()).unwrap();
        let disc =
            Discriminator::new(DiscriminatorConfig::new(layout.width, vec![8]).with_condition(cond))
                .unwrap();
        GanModels::new(generator, disc, seed).unwrap()
    }

    #[test]
    fn generation_is_deterministic_and_schema_shaped() {
        let (_, tr) = fitted(24);
        let models = toy_models(&tr, 0, 1);
        let spec = GenerateSpec { rows: 50, seed: 4, label_mix: None };
        let a = generate(&models.generator, &models.gen_params, &tr, &spec).unwrap();
        let b = generate(&models.generator, &models.gen_params, &tr, &spec).unwrap();
        assert_eq!(a.n_rows(), 50);
        assert_eq!(a.schema(), tr.schema());
        assert_eq!(a.rows(), b.rows());
        for row in a.rows() {
            let x = row[0].as_num().unwrap();
            assert!((0.0..=10.0).contains(&x));
        }
    }

    #[test]
    fn conditional_generation_follows_the_mix_quota() {
        let (_, tr) = fitted(24);
        let models = toy_models(&tr, 2, 2);
        let spec = GenerateSpec { rows: 10, seed: 3, label_mix: Some(vec![0.8, 0.2]) };
        let t = generate(&models.generator, &models.gen_params, &tr, &spec).unwrap();
        let labels = t.labels().unwrap();
        assert_eq!(labels.iter().filter(|&&y| y == 0).count(), 8);
        assert_eq!(labels.iter().filter(|&&y| y == 1).count(), 2);

        let missing = GenerateSpec { rows: 10, seed: 3, label_mix: None };
        let err = generate(&models.generator, &models.gen_params, &tr, &missing).unwrap_err();
        assert!(matches!(err, TrainError::MissingLabelMix));
    }

    #[test]
    fn quota_distributes_remainders_by_largest_fraction() {
        assert_eq!(quota_counts(&[0.5, 0.5], 5), vec![3, 2]); // tie: lower index
        assert_eq!(quota_counts(&[2.0, 1.0, 1.0], 5), vec![3, 1, 1]);
        assert_eq!(quota_counts(&[1.0], 7), vec![7]);
        assert_eq!(quota_counts(&[0.0, 1.0], 4), vec![0, 4]);
    }

    #[test]
    fn snapshot_selection_prefers_the_earliest_best_epoch() {
        let (table, tr) = fitted(24);
        let data = encode_for_training(&table, &tr).unwrap();
        let mut models = toy_models(&tr, 0, 5);
        let mut cfg = TrainConfig::new(Algorithm::Vanilla);
        cfg.batch = 8;
        cfg.epochs = 4;
        cfg.steps_per_epoch = Some(1);
        cfg.seed = 7;
        let scores = [0.1, 0.5, 0.5, 0.3];
        let mut call = 0usize;
        let mut metric = move |_t: &Table| {
            let s = scores[call];
            call += 1;
            Ok(s)
        };
        let out =
            train_with_snapshots(&mut models, &data, &cfg, &tr, &mut metric, 20).unwrap();
        assert_eq!(out.best_epoch, 2);
        assert_eq!(out.best_metric, 0.5);
        assert_eq!(out.log.len(), 4);
        assert_eq!(out.snapshots.len(), 4);
        assert_eq!(
            out.log.iter().map(|r| r.epoch).collect::<Vec<_>>(),
            vec![1, 2, 3, 4]
        );
        assert!(out.log.iter().all(|r| r.d_loss.is_finite() && r.g_loss.is_finite()));
        assert!(out
            .log
            .iter()
            .all(|r| (0.0..=1.0).contains(&r.duplicate_rate)));
        // The selected parameters are the epoch-2 snapshot.
        let best: Vec<f64> =
            out.best_gen_params.entries().iter().flat_map(|e| e.value.data().to_vec()).collect();
        let snap: Vec<f64> =
            out.snapshots[1].entries().iter().flat_map(|e| e.value.data().to_vec()).collect();
        assert_eq!(best, snap);
    }

    #[test]
    fn epoch_log_round_trips_through_csv() {
        let records = vec![
            EpochRecord {
                epoch: 1,
                d_loss: 1.25,
                g_loss: -0.5,
                kl: 0.125,
                val_metric: 0.75,
                duplicate_rate: 0.0,
            },
            EpochRecord {
                epoch: 2,
                d_loss: 1.0,
                g_loss: -0.25,
                kl: 0.0625,
                val_metric: 0.8,
                duplicate_rate: 0.01,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        write_epoch_log(&path, &records).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "epoch,d_loss,g_loss,kl,val_metric,duplicate_rate");
        assert_eq!(lines.next().unwrap(), "1,1.25,-0.5,0.125,0.75,0");
        assert_eq!(lines.next().unwrap(), "2,1,-0.25,0.0625,0.8,0.01");
        assert!(lines.next().is_none());
    }

    #[test]
    fn search_keeps_the_earliest_best_and_caches_repeats() {
        let candidates = vec![
            SearchCandidate { lr: 1e-4, batch: 8, gen_hidden: vec![4] },
            SearchCandidate { lr: 2e-4, batch: 8, gen_hidden: vec![4] },
            SearchCandidate { lr: 1e-3, batch: 8, gen_hidden: vec![4] },
        ];
        let scores = [0.5, 0.5, 0.2];
        let mut runs = Vec::new();
        let out = hyperparam_search(&candidates, 12, 3, |c| {
            let i = candidates.iter().position(|x| x == c).unwrap();
            runs.push(i);
            Ok(scores[i])
        })
        .unwrap();
        // Every candidate is evaluated at most once.
        let mut sorted = runs.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), runs.len());
        assert_eq!(out.trials.len(), 12);
        assert_eq!(out.best_score, 0.5);
        // The winner is the first tried among the equally scored pair.
        let first_best = out.trials.iter().find(|(_, s)| *s == 0.5).unwrap().0;
        assert_eq!(out.best_index, first_best);

        assert!(matches!(
            hyperparam_search(&[], 3, 0, |_| Ok(0.0)),
            Err(TrainError::NoCandidates)
        ));
    }
}
