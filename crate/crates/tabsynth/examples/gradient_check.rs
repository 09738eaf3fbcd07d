//! Finite-difference validation of the reverse-mode gradients behind all
//! three networks: the MLP generator, the LSTM generator (whose
//! mixture-encoded numeric attribute spans two recurrent steps), and the
//! discriminator.
//!
//! Run with `cargo run --example gradient_check`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use tabsynth::autodiff::{grad_check, Graph, ParamSet, Tensor, VarId};
use tabsynth::models::{
    Discriminator, DiscriminatorConfig, Generator, GeneratorConfig,
};
use tabsynth::table::{AttrKind, AttributeMeta, Schema, Table, Value};
use tabsynth::transform::{FittedTransformer, TransformSpec};

const TOLERANCE: f64 = 1e-3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A small mixed table: the numeric attribute gets mixture encoding
    // (scalar + component one-hot), the categorical a plain one-hot.
    let schema = Schema::new(vec![
        AttributeMeta {
            name: "x".into(),
            kind: AttrKind::Numerical { min: -3.0, max: 3.0, discrete: false },
        },
        AttributeMeta {
            name: "c".into(),
            kind: AttrKind::Categorical { categories: vec!["a".into(), "b".into(), "c".into()] },
        },
    ]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut table = Table::new(schema);
    for i in 0..120 {
        let x: f64 = StandardNormal.sample(&mut rng);
        table.push_row(vec![Value::Num(x.clamp(-3.0, 3.0)), Value::Cat(i % 3)])?;
    }
    let spec = TransformSpec { gmm_components: 2, ..TransformSpec::default() };
    let transformer = FittedTransformer::fit(&table, spec, 3)?;
    let layout = transformer.layout();
    let width = layout.width;
    println!("sample layout: {width} columns across {} segments", layout.segments.len());

    // Fixed inputs shared by every probe: the checker re-runs the forward
    // pass, so nothing inside the closure may draw fresh randomness.
    let z = noise(&mut rng, 8, 6);
    let x_real = transformer.encode(&table.select(&(0..8).collect::<Vec<_>>()))?;
    let projector = noise(&mut rng, 8, width);

    let mlp = Generator::new(GeneratorConfig::mlp(vec![12, 12], 6), layout.clone())?;
    let report = check_generator("mlp generator", &mlp, &z, &projector)?;
    println!("{report}");

    let lstm = Generator::new(GeneratorConfig::lstm(10, 7, 6), layout.clone())?;
    let report = check_generator("lstm generator", &lstm, &z, &projector)?;
    println!("{report}");

    let disc = Discriminator::new(DiscriminatorConfig::new(width, vec![12, 8]))?;
    let params = disc.init_params(11);
    let report = grad_check(
        &params,
        |g, ps| {
            let x = g.input(x_real.clone())?;
            let logits = disc.forward_logits(g, ps, x, None).expect("widths agree");
            let log_d = g.log_sigmoid(logits)?;
            let loss = g.mean_all(log_d)?;
            g.neg(loss)
        },
        200,
        1e-5,
        17,
    )?;
    println!("{}", render("discriminator", report.max_rel_err, report.checked));
    assert!(report.max_rel_err < TOLERANCE);

    println!("\nall analytic gradients agree with central differences to {TOLERANCE:.0e}");
    Ok(())
}

/// Loss probing a generator: project the generated sample batch through a
/// fixed random matrix so every output column (tanh heads and softmax heads
/// alike) influences the scalar.
fn check_generator(
    name: &str,
    generator: &Generator,
    z: &Tensor,
    projector: &Tensor,
) -> Result<String, Box<dyn std::error::Error>> {
    let params = generator.init_params(9);
    let build = |g: &mut Graph, ps: &ParamSet| -> Result<VarId, tabsynth::autodiff::AdError> {
        let zv = g.input(z.clone())?;
        // Widths are fixed above, so a forward failure is a bug here.
        let out = generator.forward(g, ps, zv, None, true).expect("widths agree");
        let proj = g.input(projector.clone())?;
        let weighted = g.mul(out, proj)?;
        g.mean_all(weighted)
    };
    let report = grad_check(&params, build, 200, 1e-5, 13)?;
    assert!(report.max_rel_err < TOLERANCE, "{name}: {}", report.max_rel_err);
    Ok(render(name, report.max_rel_err, report.checked))
}

fn render(name: &str, err: f64, checked: usize) -> String {
    format!("{name:<16} max relative error {err:.3e} over {checked} sampled coordinates")
}

fn noise(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let mut t = Tensor::zeros(rows, cols);
    for v in t.data_mut() {
        *v = StandardNormal.sample(rng);
    }
    t
}
