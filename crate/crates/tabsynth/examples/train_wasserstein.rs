//! Trains the critic-based variant and verifies its two distinguishing
//! mechanics: the critic runs several updates per generator update, and
//! every critic weight is clamped into [-clip_bound, clip_bound] after
//! each of those updates.

use tabsynth::models::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};
use tabsynth::simdata::{gen_sdata_num, LabelMode, SimNumSpec};
use tabsynth::training::{encode_for_training, Algorithm, GanModels, TrainConfig, Trainer};
use tabsynth::transform::{FittedTransformer, TransformSpec};

fn main() {
    let seed = 9;
    let sim = gen_sdata_num(&SimNumSpec {
        n: 2_000,
        rho: 0.5,
        skew: 0.5,
        label_mode: LabelMode::RatioQuota,
        seed,
    })
    .expect("valid request");

    let transformer =
        FittedTransformer::fit(&sim.table, TransformSpec::default(), seed).expect("fit succeeds");
    let data = encode_for_training(&sim.table, &transformer).expect("encodable");

    let generator = Generator::new(
        GeneratorConfig::mlp(vec![64, 64], 50),
        transformer.layout().clone(),
    )
    .expect("layout is valid");
    // The critic scores samples directly, so it is built without the final
    // sigmoid; constructing it with one is rejected at trainer setup.
    let discriminator = Discriminator::new(
        DiscriminatorConfig::new(data.width(), vec![64, 64]).without_sigmoid(),
    )
    .expect("widths are valid");
    let mut models = GanModels::new(generator, discriminator, seed).expect("widths agree");

    let cfg = TrainConfig::new(Algorithm::Wasserstein);
    println!(
        "defaults for this algorithm: lr = {:.0e} (both nets), critic_iters = {}, clip = {}",
        cfg.lr_d, cfg.critic_iters, cfg.clip_bound
    );
    assert_eq!(cfg.kl_weight, 0.0);

    let before = models.disc_params.max_abs_trainable();
    println!("largest critic weight before training: {before:.4}");

    let mut cfg = cfg;
    cfg.seed = seed;
    let mut trainer = Trainer::new(cfg.clone(), &mut models, &data).expect("setup is valid");
    trainer.set_record_noise(true); // records post-clip maxima too

    let iterations = 60;
    let mut last = (0.0, 0.0);
    for i in 1..=iterations {
        let s = trainer.step().expect("step runs");
        if i % 12 == 0 {
            println!("iter {i:>3}  critic loss {:>8.4}  generator loss {:>8.4}", s.d_loss, s.g_loss);
        }
        last = (s.d_loss, s.g_loss);
    }
    let _ = last;

    // One recorded maximum per critic update: iterations * critic_iters.
    let clip_log = trainer.post_clip_max().to_vec();
    assert_eq!(clip_log.len(), iterations * cfg.critic_iters);
    let worst = clip_log.iter().fold(0.0f64, |m, &v| m.max(v));
    println!(
        "\ncritic updates observed: {} ({} iterations x {} critic steps)",
        clip_log.len(),
        iterations,
        cfg.critic_iters
    );
    println!("largest post-clip critic weight across all updates: {worst:.6}");
    assert!(worst <= cfg.clip_bound + 1e-12);

    let after = models.disc_params.max_abs_trainable();
    println!("largest critic weight after training: {after:.6}");
    assert!(after <= cfg.clip_bound + 1e-12);
    println!("every critic weight stayed within the clip bound of {}", cfg.clip_bound);
}
