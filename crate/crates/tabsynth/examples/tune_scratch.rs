//! Scratch harness for picking training budgets (deleted before release).

use std::time::Instant;

use tabsynth::eval::{utility_classification, ClassifierKind, F1Snapshot};
use tabsynth::models::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};
use tabsynth::simdata::{gen_sdata_num, LabelMode, SimNumSpec};
use tabsynth::table::Table;
use tabsynth::training::{
    encode_for_training, generate, train_with_snapshots, Algorithm, GanModels, GenerateSpec,
    TrainConfig,
};
use tabsynth::transform::{FittedTransformer, TransformSpec};

struct Setup {
    algorithm: Algorithm,
    epochs: usize,
    steps: Option<usize>,
    kl: f64,
    z: usize,
    hidden: Vec<usize>,
    simple_d: bool,
    batch: usize,
    lstm: bool,
}

fn run(setup: &Setup, train: &Table, valid: &Table, test: &Table, seed: u64) -> (f64, f64, f64) {
    let transformer =
        FittedTransformer::fit(train, TransformSpec::default(), seed).expect("fit");
    let data = encode_for_training(train, &transformer).expect("encode");
    let conditional = setup.algorithm == Algorithm::Conditional;
    let cond = if conditional { data.label_cardinality } else { 0 };

    let mut gen_cfg = if setup.lstm {
        GeneratorConfig::lstm(100, 100, setup.z)
    } else {
        GeneratorConfig::mlp(setup.hidden.clone(), setup.z)
    };
    let mut disc_cfg = if setup.simple_d {
        DiscriminatorConfig::simplified(data.width(), 100)
    } else {
        DiscriminatorConfig::new(data.width(), setup.hidden.clone())
    };
    if conditional {
        gen_cfg = gen_cfg.with_condition(cond);
        disc_cfg = disc_cfg.with_condition(cond);
    }
    let generator = Generator::new(gen_cfg, transformer.layout().clone()).expect("layout");
    let discriminator = Discriminator::new(disc_cfg).expect("widths");
    let mut models = GanModels::new(generator, discriminator, seed).expect("agree");

    let mut cfg = TrainConfig::new(setup.algorithm);
    cfg.epochs = setup.epochs;
    cfg.steps_per_epoch = setup.steps;
    cfg.kl_weight = setup.kl;
    cfg.batch = setup.batch;
    cfg.seed = seed;

    let mut metric = F1Snapshot::new(
        ClassifierKind::DecisionTree { max_depth: 30 },
        valid.clone(),
        seed,
    )
    .expect("labelled");
    let outcome =
        train_with_snapshots(&mut models, &data, &cfg, &transformer, &mut metric, valid.n_rows())
            .expect("train");

    let label_mix = if conditional {
        let labels = train.labels().expect("labelled");
        let mut counts = vec![0.0; data.label_cardinality];
        for &y in &labels {
            counts[y] += 1.0;
        }
        Some(counts)
    } else {
        None
    };
    let synth = if std::env::var("BATCH_STATS").is_ok() {
        generate_batch_stats(
            &models.generator,
            &outcome.best_gen_params,
            &transformer,
            train.n_rows(),
            seed ^ 0x5EED,
            label_mix,
        )
    } else {
        generate(
            &models.generator,
            &outcome.best_gen_params,
            &transformer,
            &GenerateSpec { rows: train.n_rows(), seed: seed ^ 0x5EED, label_mix },
        )
        .expect("generate")
    };
    let kinds = [ClassifierKind::DecisionTree { max_depth: 30 }];
    let s = utility_classification(train, &synth, test, &kinds, seed).expect("eval");
    (s[0].f1_real, s[0].f1_fake, s[0].diff)
}

fn generate_batch_stats(
    generator: &Generator,
    params: &tabsynth::autodiff::ParamSet,
    transformer: &FittedTransformer,
    rows: usize,
    seed: u64,
    label_mix: Option<Vec<f64>>,
) -> Table {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use tabsynth::autodiff::{Graph, Tensor};
    use tabsynth::models::encode_condition_batch;
    use tabsynth::table::Value;

    let z_dim = generator.config().z_dim;
    let card = generator.config().cond_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = |n: usize| {
        let mut t = Tensor::zeros(n, z_dim);
        for v in t.data_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        t
    };
    let mut out = Table::new(transformer.schema().clone());
    if card == 0 {
        let z = noise(rows);
        let mut g = Graph::new();
        let zv = g.input(z).unwrap();
        let o = generator.forward(&mut g, params, zv, None, true).unwrap();
        let vals = g.value(o).clone();
        for row in transformer.decode(&vals).unwrap().rows() {
            out.push_row(row.clone()).unwrap();
        }
        return out;
    }
    let mix = label_mix.unwrap();
    let label_attr = transformer.schema().label.unwrap();
    let total: f64 = mix.iter().sum();
    for (y, w) in mix.iter().enumerate() {
        let count = (w / total * rows as f64).round() as usize;
        if count == 0 {
            continue;
        }
        let z = noise(count);
        let cond = encode_condition_batch(&vec![y; count], card).unwrap();
        let mut g = Graph::new();
        let zv = g.input(z).unwrap();
        let cv = g.input(cond).unwrap();
        let o = generator.forward(&mut g, params, zv, Some(cv), true).unwrap();
        let vals = g.value(o).clone();
        for row in transformer.decode(&vals).unwrap().rows() {
            let mut row = row.clone();
            row[label_attr] = Value::Cat(y);
            out.push_row(row).unwrap();
        }
    }
    out
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("balanced");

    if mode == "balanced" {
        // criterion-5 style: balanced component-linked labels
        for (tag, steps, epochs, kl, z, hidden, simple_d, batch) in [
            ("defaults   ", None, 10, 1.0, 100, vec![100, 100], false, 128),
            ("steps200   ", Some(200), 10, 1.0, 100, vec![100, 100], false, 128),
            ("steps300sd ", Some(300), 10, 1.0, 100, vec![100, 100], true, 128),
            ("steps300   ", Some(300), 10, 1.0, 100, vec![100, 100], false, 128),
        ] {
            let setup = Setup {
                algorithm: Algorithm::Vanilla,
                epochs,
                steps,
                kl,
                z,
                hidden,
                simple_d,
                batch,
                lstm: false,
            };
            let mut diffs = Vec::new();
            let t0 = Instant::now();
            for seed in [1u64, 2, 3] {
                let sim = gen_sdata_num(&SimNumSpec {
                    n: 10_000,
                    rho: 0.5,
                    skew: 0.5,
                    label_mode: LabelMode::ComponentLinked,
                    seed,
                })
                .expect("sim");
                let (train, valid, test) = sim.table.split_stratified(seed).expect("split");
                let (fr, ff, d) = run(&setup, &train, &valid, &test, seed);
                println!("  {tag} seed {seed}: real {fr:.4} fake {ff:.4} diff {d:.4}");
                diffs.push(d);
            }
            diffs.sort_by(f64::total_cmp);
            println!(
                "{tag} median diff {:.4}  ({:.1}s for 3 seeds)\n",
                diffs[1],
                t0.elapsed().as_secs_f64()
            );
        }
    } else {
        // criterion-6 style: 1:9 skew, conditional vs vanilla
        for (tag, steps, epochs, kl_v, kl_c, batch, lstm) in
            [("lstm s100 kl0", Some(100), 10, 1.0, 0.0, 128, true)]
        {
            let t0 = Instant::now();
            let mut wins = 0;
            for seed in [1u64, 2, 3] {
                let sim = gen_sdata_num(&SimNumSpec {
                    n: 10_000,
                    rho: 0.5,
                    skew: 0.1,
                    label_mode: LabelMode::ComponentLinked,
                    seed,
                })
                .expect("sim");
                let (train, valid, test) = sim.table.split_stratified(seed).expect("split");
                let v = Setup {
                    algorithm: Algorithm::Vanilla,
                    epochs,
                    steps,
                    kl: kl_v,
                    z: 100,
                    hidden: vec![100, 100],
                    simple_d: false,
                    batch,
                    lstm,
                };
                let c = Setup {
                    algorithm: Algorithm::Conditional,
                    kl: kl_c,
                    hidden: v.hidden.clone(),
                    ..v
                };
                let (_, vf, vd) = run(&v, &train, &valid, &test, seed);
                let (_, cf, cd) = run(&c, &train, &valid, &test, seed);
                let win = cd <= vd;
                wins += usize::from(win);
                println!(
                    "  {tag} seed {seed}: vanilla fake {vf:.4} diff {vd:.4} | cond fake {cf:.4} diff {cd:.4}  {}",
                    if win { "cond <=" } else { "vanilla <" }
                );
            }
            println!("{tag} cond wins {wins}/3  ({:.1}s)\n", t0.elapsed().as_secs_f64());
        }
    }
}
