//! The runnable verbs behind the command line: `synth` trains a generator
//! and writes a synthetic table, `eval` scores a synthetic table against the
//! real one, `bench` sweeps a grid of design choices, and `simdata` writes a
//! simulated table. Everything a verb produces is a pure function of its
//! config and seed, so reruns are byte-identical.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::autodiff::AdError;
use crate::config::{BenchCell, ConfigError, EvalConfig, GeneratorKind, RunConfig, SimKind};
use crate::eval::{
    dcr, gen_queries, hitting_rate, utility_aqp, utility_classification, utility_clustering,
    ClassifierKind, EvalError, EvalReport, F1Snapshot, HitMode,
};
use crate::models::{
    Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, ModelError,
};
use crate::simdata::{gen_sdata_cat, gen_sdata_num, SimError};
use crate::table::{read_schema, write_schema, Table, TableError};
use crate::training::{
    duplicate_rate, encode_for_training, generate, train_with_snapshots, write_epoch_log,
    EpochRecord, GanModels, GenerateSpec, SnapshotMetric, TrainError,
};
use crate::transform::{FittedTransformer, TransformError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Autodiff(#[from] AdError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl PipelineError {
    /// Process exit code: 2 for configuration problems, 3 for runtime
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            _ => 3,
        }
    }
}

fn config_error(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(ConfigError::Invalid(msg.into()))
}

/// Load a CSV with an explicit or inferred schema, then apply an optional
/// label designation.
pub fn load_table(
    csv: &Path,
    schema: Option<&Path>,
    label: Option<&str>,
    distinct_threshold: usize,
) -> Result<Table, PipelineError> {
    let table = match schema {
        Some(path) => {
            let schema = read_schema(path)?;
            Table::load_csv(csv, &schema)?
        }
        None => Table::load_csv_infer(csv, distinct_threshold)?,
    };
    match label {
        Some(name) => relabel(table, name),
        None => Ok(table),
    }
}

/// Re-designate the label attribute of an existing table.
pub fn relabel(table: Table, label: &str) -> Result<Table, PipelineError> {
    let schema = table.schema().clone().with_label(label)?;
    let rows = table.rows().to_vec();
    Ok(Table::from_rows(schema, rows)?)
}

/// Materialize the configured data source: read the CSV or draw the
/// simulated table.
pub fn source_table(cfg: &RunConfig) -> Result<Table, PipelineError> {
    if let Some(sim) = &cfg.data.sim {
        let table = match sim.kind {
            SimKind::Num => gen_sdata_num(&sim.num_spec(cfg.seed))?.table,
            SimKind::Cat => gen_sdata_cat(&sim.cat_spec(cfg.seed))?,
        };
        return match &cfg.data.label {
            Some(name) => relabel(table, name),
            None => Ok(table),
        };
    }
    let csv = cfg.data.csv.as_ref().ok_or_else(|| config_error("no data source configured"))?;
    load_table(csv, cfg.data.schema.as_deref(), cfg.data.label.as_deref(), cfg.data.distinct_threshold)
}

/// File-system layout of one synthesis run.
#[derive(Clone, Debug)]
pub struct SynthArtifacts {
    pub out_dir: PathBuf,
    pub fake: PathBuf,
    pub transformer: PathBuf,
    pub log: PathBuf,
    pub snapshots: Vec<PathBuf>,
    pub train: PathBuf,
    pub valid: PathBuf,
    pub test: PathBuf,
    /// Schema of the source table, label designation included, so the eval
    /// verb can read the split CSVs back without guessing.
    pub schema: PathBuf,
}

/// A completed synthesis run: the written artifacts plus the in-memory
/// tables for callers that keep going (bench, examples).
pub struct SynthRun {
    pub artifacts: SynthArtifacts,
    pub train: Table,
    pub valid: Table,
    pub test: Table,
    pub fake: Table,
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_metric: f64,
}

fn generation_seed(seed: u64) -> u64 {
    seed ^ 0xA076_1D64_78BD_642F
}

/// Build the generator/discriminator pair a config describes.
pub fn build_models(
    cfg: &RunConfig,
    transformer: &FittedTransformer,
    label_cardinality: usize,
) -> Result<GanModels, PipelineError> {
    let layout = transformer.layout();
    let train_cfg = cfg.train_config();
    let cond = if train_cfg.algorithm.is_conditional() { label_cardinality } else { 0 };
    if train_cfg.algorithm.is_conditional() && cond == 0 {
        return Err(config_error("conditional training requires a labelled data source"));
    }
    let gen_cfg = match cfg.model.generator {
        GeneratorKind::Mlp => GeneratorConfig::mlp(cfg.model.gen_hidden.clone(), cfg.model.z_dim),
        GeneratorKind::Lstm => {
            GeneratorConfig::lstm(cfg.model.lstm_hidden, cfg.model.lstm_feature, cfg.model.z_dim)
        }
    }
    .with_condition(cond);
    let generator = Generator::new(gen_cfg, layout.clone())?;
    let mut disc_cfg =
        DiscriminatorConfig::new(layout.width, cfg.model.disc_hidden.clone()).with_condition(cond);
    if train_cfg.algorithm.is_critic() {
        disc_cfg = disc_cfg.without_sigmoid();
    }
    let discriminator = Discriminator::new(disc_cfg)?;
    Ok(GanModels::new(generator, discriminator, cfg.seed)?)
}

/// Run the full synthesis pipeline: split the source table, fit the
/// transformer, train with per-epoch snapshots, generate `ratio * |train|`
/// rows from the best snapshot, and write every artifact under `cfg.out`.
pub fn run_synth(cfg: &RunConfig) -> Result<SynthRun, PipelineError> {
    cfg.validate()?;
    let table = source_table(cfg)?;
    let (train, valid, test) = table.split_stratified(cfg.seed)?;

    let out = &cfg.out;
    std::fs::create_dir_all(out.join("snapshots"))?;
    std::fs::write(out.join("config.toml"), cfg.to_toml()?)?;

    let paths = SynthArtifacts {
        out_dir: out.clone(),
        fake: out.join("fake.csv"),
        transformer: out.join("transformer.json"),
        log: out.join("train_log.csv"),
        snapshots: Vec::new(),
        train: out.join("train.csv"),
        valid: out.join("valid.csv"),
        test: out.join("test.csv"),
        schema: out.join("schema.json"),
    };
    train.write_csv(&paths.train)?;
    valid.write_csv(&paths.valid)?;
    test.write_csv(&paths.test)?;
    write_schema(table.schema(), &paths.schema)?;

    let transformer = FittedTransformer::fit(&train, cfg.transform_spec(), cfg.seed)?;
    transformer.save_json(&paths.transformer)?;

    let data = encode_for_training(&train, &transformer)?;
    let mut models = build_models(cfg, &transformer, data.label_cardinality)?;
    let train_cfg = cfg.train_config();

    // Snapshot selection: labelled data scores a small tree's F1 on the
    // validation split; unlabelled data falls back to output diversity.
    let mut f1_metric;
    let mut diversity_metric;
    let metric: &mut dyn SnapshotMetric = if valid.labels().is_some() {
        f1_metric = F1Snapshot::new(
            ClassifierKind::DecisionTree { max_depth: 10 },
            valid.clone(),
            cfg.seed,
        )?;
        &mut f1_metric
    } else {
        diversity_metric = |t: &Table| Ok(-duplicate_rate(t)?);
        &mut diversity_metric
    };

    let outcome =
        train_with_snapshots(&mut models, &data, &train_cfg, &transformer, metric, valid.n_rows())?;
    write_epoch_log(&paths.log, &outcome.log)?;
    let mut snapshot_paths = Vec::with_capacity(outcome.snapshots.len());
    for (i, snap) in outcome.snapshots.iter().enumerate() {
        let path = out.join(format!("snapshots/epoch_{}.params", i + 1));
        snap.save_snapshot(&path)?;
        snapshot_paths.push(path);
    }

    let label_mix = if train_cfg.algorithm.is_conditional() {
        let labels = train.labels().ok_or(TrainError::NoLabels)?;
        let mut counts = vec![0.0; train.schema().label_cardinality()];
        for y in labels {
            counts[y] += 1.0;
        }
        Some(counts)
    } else {
        None
    };
    let rows = ((cfg.ratio * train.n_rows() as f64).round() as usize).max(1);
    let spec = GenerateSpec { rows, seed: generation_seed(cfg.seed), label_mix };
    let fake = generate(&models.generator, &outcome.best_gen_params, &transformer, &spec)?;
    fake.write_csv(&paths.fake)?;

    Ok(SynthRun {
        artifacts: SynthArtifacts { snapshots: snapshot_paths, ..paths },
        train,
        valid,
        test,
        fake,
        log: outcome.log,
        best_epoch: outcome.best_epoch,
        best_metric: outcome.best_metric,
    })
}

/// The `synth` verb: run the pipeline and report what was written.
pub fn cmd_synth(cfg: &RunConfig) -> Result<SynthArtifacts, PipelineError> {
    Ok(run_synth(cfg)?.artifacts)
}

/// Score `fake` against `real`. Classifiers train on each full table and
/// are compared on the held-out `test` rows; clustering, queries and the
/// privacy metrics compare the full tables directly.
pub fn evaluate(
    real: &Table,
    test: &Table,
    fake: &Table,
    ecfg: &EvalConfig,
    kinds: &[ClassifierKind],
    seed: u64,
) -> Result<EvalReport, PipelineError> {
    let mut report = EvalReport::default();
    if ecfg.classification {
        report.classification = utility_classification(real, fake, test, kinds, seed)?;
    }
    if ecfg.clustering {
        report.nmi_diff = Some(utility_clustering(real, fake, seed)?);
    }
    if ecfg.aqp {
        let workload = gen_queries(real.schema(), ecfg.aqp_queries, seed)?;
        let result = utility_aqp(real, fake, &workload, ecfg.sample_frac, ecfg.draws, seed)?;
        report.aqp_diff = Some(result.diff);
    }
    if ecfg.classification || ecfg.clustering || ecfg.aqp {
        report.duplicate_rate = Some(duplicate_rate(fake)?);
    }
    if ecfg.privacy {
        report.hitting_rate =
            Some(hitting_rate(real, fake, ecfg.hit_sample, HitMode::MeanProportion, seed)?);
        report.dcr = Some(dcr(real, fake, ecfg.dcr_sample, seed)?);
    }
    Ok(report)
}

/// The `eval` verb: load both tables, score the synthetic one, and write
/// `report.json` plus a plain-text summary under `out`.
#[allow(clippy::too_many_arguments)]
pub fn cmd_eval(
    real_csv: &Path,
    fake_csv: &Path,
    schema: Option<&Path>,
    label: Option<&str>,
    ecfg: &EvalConfig,
    kinds: &[ClassifierKind],
    seed: u64,
    out: &Path,
) -> Result<EvalReport, PipelineError> {
    for path in [real_csv, fake_csv].into_iter().chain(schema) {
        if !path.exists() {
            return Err(config_error(format!("input file does not exist: {}", path.display())));
        }
    }
    let real = load_table(real_csv, schema, label, crate::table::DEFAULT_DISTINCT_THRESHOLD)?;
    // The synthetic table reuses the real schema so category indices line up.
    let mut fake = Table::load_csv(fake_csv, real.schema())?;
    if let Some(name) = label {
        fake = relabel(fake, name)?;
    }
    let needs_test = ecfg.classification;
    let test = if needs_test {
        let (_, _, test) = real.split_stratified(seed)?;
        test
    } else {
        real.clone()
    };
    let report = evaluate(&real, &test, &fake, ecfg, kinds, seed)?;
    std::fs::create_dir_all(out)?;
    report.save(&out.join("report.json"))?;
    std::fs::write(out.join("report.txt"), report.summary())?;
    Ok(report)
}

/// One bench grid cell's outcome.
#[derive(Clone, Debug)]
pub struct BenchRow {
    pub cell: BenchCell,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
}

fn worker_count(cells: usize) -> usize {
    let available = std::thread::available_parallelism().map(usize::from).unwrap_or(1);
    let cap = std::env::var("SYNTH_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(available);
    cells.clamp(1, cap)
}

fn run_cell(base: &RunConfig, cell: &BenchCell) -> Result<EvalReport, PipelineError> {
    let mut cfg = base.clone();
    cfg.model.generator = cell.generator;
    cfg.transform.numeric = cell.numeric;
    cfg.train.algorithm = cell.algorithm;
    cfg.out = base.out.join(format!("cell_{}", cell.index));
    let run = run_synth(&cfg)?;
    evaluate(&run.train, &run.test, &run.fake, &cfg.eval, &cfg.classifier_kinds(), cfg.seed)
}

/// The `bench` verb: run synth + eval for every grid cell and write one CSV
/// row per cell under `cfg.out/bench.csv`. Failed cells keep their row, with
/// the error column populated; cells run in a worker pool capped by the
/// `SYNTH_THREADS` environment variable, each cell single-threaded.
pub fn cmd_bench(cfg: &RunConfig) -> Result<(PathBuf, Vec<BenchRow>), PipelineError> {
    cfg.validate()?;
    let bench = cfg.bench.as_ref().ok_or_else(|| config_error("a [bench] section is required"))?;
    let cells = bench.cells();
    std::fs::create_dir_all(&cfg.out)?;

    let slots: Vec<Mutex<Option<BenchRow>>> = cells.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..worker_count(cells.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= cells.len() {
                    break;
                }
                let row = match run_cell(cfg, &cells[i]) {
                    Ok(report) => BenchRow { cell: cells[i], report: Some(report), error: None },
                    Err(e) => BenchRow { cell: cells[i], report: None, error: Some(e.to_string()) },
                };
                *slots[i].lock().unwrap() = Some(row);
            });
        }
    });
    let rows: Vec<BenchRow> =
        slots.into_iter().map(|s| s.into_inner().unwrap().expect("every cell ran")).collect();

    let path = cfg.out.join("bench.csv");
    write_bench_csv(&path, cfg, &rows)?;
    Ok((path, rows))
}

fn write_bench_csv(path: &Path, cfg: &RunConfig, rows: &[BenchRow]) -> Result<(), PipelineError> {
    let kinds = if cfg.eval.classification { cfg.classifier_kinds() } else { Vec::new() };
    let mut header =
        vec!["cell".to_string(), "generator".into(), "numeric".into(), "algorithm".into()];
    for kind in &kinds {
        header.push(format!("f1_diff_{kind}"));
    }
    for name in ["nmi_diff", "aqp_diff", "hitting_rate", "dcr", "duplicate_rate", "error"] {
        header.push(name.into());
    }

    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&header)?;
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in rows {
        let mut record = vec![
            row.cell.index.to_string(),
            row.cell.generator.to_string(),
            row.cell.numeric.to_string(),
            row.cell.algorithm.to_string(),
        ];
        for kind in &kinds {
            let diff = row.report.as_ref().and_then(|r| {
                r.classification.iter().find(|s| s.kind == *kind).map(|s| s.diff)
            });
            record.push(fmt(diff));
        }
        let r = row.report.as_ref();
        record.push(fmt(r.and_then(|r| r.nmi_diff)));
        record.push(fmt(r.and_then(|r| r.aqp_diff)));
        record.push(fmt(r.and_then(|r| r.hitting_rate)));
        record.push(fmt(r.and_then(|r| r.dcr)));
        record.push(fmt(r.and_then(|r| r.duplicate_rate)));
        record.push(row.error.clone().unwrap_or_default());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// The `simdata` verb: draw the configured simulated table and write it with
/// its schema under `cfg.out`.
pub fn cmd_simdata(cfg: &RunConfig) -> Result<(PathBuf, PathBuf), PipelineError> {
    cfg.validate()?;
    if cfg.data.sim.is_none() {
        return Err(config_error("simdata requires a [data.sim] section"));
    }
    let table = source_table(cfg)?;
    std::fs::create_dir_all(&cfg.out)?;
    let csv = cfg.out.join("sdata.csv");
    let schema = cfg.out.join("sdata_schema.json");
    table.write_csv(&csv)?;
    write_schema(table.schema(), &schema)?;
    Ok((csv, schema))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    fn sim_config(out: &Path) -> RunConfig {
        RunConfig::from_toml(&format!(
            r#"
            seed = 11
            out = "{}"
            [data.sim]
            kind = "num"
            n = 240
            [transform]
            numeric = "simple"
            [model]
            gen_hidden = [16]
            disc_hidden = [16]
            z_dim = 8
            [train]
            algorithm = "vanilla"
            batch = 20
            epochs = 2
            steps_per_epoch = 2
            [eval]
            aqp_queries = 20
            "#,
            out.display()
        ))
        .unwrap()
    }

    #[test]
    fn synth_writes_every_artifact_and_reruns_identically() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = sim_config(&dir.path().join("run"));
        let run = run_synth(&cfg).unwrap();
        for path in [
            &run.artifacts.fake,
            &run.artifacts.transformer,
            &run.artifacts.log,
            &run.artifacts.train,
            &run.artifacts.valid,
            &run.artifacts.test,
        ] {
            assert!(path.exists(), "missing artifact {}", path.display());
        }
        assert_eq!(run.artifacts.snapshots.len(), 2);
        assert!(run.artifacts.snapshots.iter().all(|p| p.exists()));
        assert_eq!(run.fake.n_rows(), run.train.n_rows());
        assert_eq!(run.log.len(), 2);
        assert!(run.best_epoch >= 1 && run.best_epoch <= 2);

        let first = std::fs::read(&run.artifacts.fake).unwrap();
        let cfg2 = sim_config(&dir.path().join("rerun"));
        let run2 = run_synth(&cfg2).unwrap();
        let second = std::fs::read(&run2.artifacts.fake).unwrap();
        assert_eq!(first, second, "same config and seed must reproduce the table");
    }

    #[test]
    fn ratio_scales_the_synthetic_row_count() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = sim_config(&dir.path().join("run"));
        cfg.ratio = 0.25;
        let run = run_synth(&cfg).unwrap();
        assert_eq!(run.fake.n_rows(), (run.train.n_rows() as f64 * 0.25).round() as usize);
    }

    #[test]
    fn eval_on_a_copy_reports_zero_diffs_and_zero_dcr() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = sim_config(&dir.path().join("run"));
        let real = source_table(&cfg).unwrap();
        let real_path = dir.path().join("real.csv");
        let fake_path = dir.path().join("fake.csv");
        real.write_csv(&real_path).unwrap();
        real.write_csv(&fake_path).unwrap();

        let out = dir.path().join("eval");
        let mut ecfg = cfg.eval.clone();
        ecfg.aqp = false; // sampling error is nonzero even on a copy
        let kinds = vec![ClassifierKind::DecisionTree { max_depth: 5 }];
        let report =
            cmd_eval(&real_path, &fake_path, None, Some("label"), &ecfg, &kinds, 5, &out).unwrap();
        assert!(report.classification.iter().all(|s| s.diff == 0.0));
        assert_eq!(report.nmi_diff, Some(0.0));
        assert_eq!(report.dcr, Some(0.0));
        assert!(out.join("report.json").exists());
        let text = std::fs::read_to_string(out.join("report.txt")).unwrap();
        assert!(text.contains("dcr: 0.0000"), "summary should list dcr, got: {text}");

        // The saved JSON parses back into the same shape.
        let loaded = EvalReport::load(&out.join("report.json")).unwrap();
        assert_eq!(loaded.dcr, Some(0.0));
    }

    #[test]
    fn privacy_only_toggle_reports_only_privacy_fields() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = sim_config(&dir.path().join("run"));
        let real = source_table(&cfg).unwrap();
        let real_path = dir.path().join("real.csv");
        real.write_csv(&real_path).unwrap();

        let mut ecfg = cfg.eval.clone();
        ecfg.classification = false;
        ecfg.clustering = false;
        ecfg.aqp = false;
        let out = dir.path().join("eval");
        let report =
            cmd_eval(&real_path, &real_path, None, None, &ecfg, &[], 5, &out).unwrap();
        assert!(report.classification.is_empty());
        assert!(report.nmi_diff.is_none() && report.aqp_diff.is_none());
        assert!(report.hitting_rate.is_some() && report.dcr.is_some());
        let json = std::fs::read_to_string(out.join("report.json")).unwrap();
        assert!(!json.contains("nmi_diff") && !json.contains("classification"));
    }

    #[test]
    fn missing_inputs_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let err = cmd_eval(
            &dir.path().join("absent.csv"),
            &dir.path().join("absent.csv"),
            None,
            None,
            &EvalConfig::default(),
            &[],
            0,
            dir.path(),
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);

        let mut cfg = sim_config(&dir.path().join("run"));
        cfg.bench = None;
        assert_eq!(cmd_bench(&cfg).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn bench_runs_every_cell_and_keeps_failures_in_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = sim_config(&dir.path().join("bench"));
        cfg.eval.aqp_queries = 10;
        cfg.bench = Some(crate::config::BenchConfig {
            generators: vec![GeneratorKind::Mlp],
            numerics: vec![crate::transform::NumericScheme::Simple],
            algorithms: vec![
                crate::training::Algorithm::Vanilla,
                crate::training::Algorithm::Wasserstein,
            ],
        });
        let (path, rows) = cmd_bench(&cfg).unwrap();
        assert!(path.exists());
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.error.is_none()), "{:?}", rows);
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("cell,generator,numeric,algorithm"));
        assert!(header.ends_with("nmi_diff,aqp_diff,hitting_rate,dcr,duplicate_rate,error"));
        assert_eq!(lines.clone().count(), 2);
        assert!(lines.next().unwrap().starts_with("0,mlp,simple,vanilla"));
        assert!(lines.next().unwrap().starts_with("1,mlp,simple,wasserstein"));
    }

    #[test]
    fn simdata_writes_table_and_schema() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = sim_config(&dir.path().join("sd"));
        let (csv, schema) = cmd_simdata(&cfg).unwrap();
        assert!(csv.exists() && schema.exists());
        let loaded = load_table(&csv, Some(schema.as_path()), None, 20).unwrap();
        assert_eq!(loaded.n_rows(), 240);
        assert!(loaded.labels().is_some(), "simulated tables carry their label");
    }
}
