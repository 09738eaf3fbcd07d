//! Scoring synthetic tables against the data they imitate, along three
//! axes: machine-learning utility (classification and clustering trained on
//! synthetic data, scored on real data), aggregate-query accuracy, and
//! disclosure risk (hitting rate and distance to the closest record).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::table::{AttrKind, Schema, Table, TableError, Value};
use crate::training::{SnapshotMetric, TrainError};

mod aqp;
mod classifiers;
mod cluster;
mod privacy;

pub use aqp::{
    exec_query, gen_queries, utility_aqp, Aggregate, AqpResult, Predicate, QueryAnswer, QuerySpec,
    DEFAULT_DRAWS, DEFAULT_SAMPLE_FRAC,
};
pub use classifiers::{default_kinds, train_classifier, Classifier, ClassifierKind};
pub use cluster::{kmeans, nmi, utility_clustering};
pub use privacy::{dcr, hitting_rate, HitMode, DEFAULT_DCR_SAMPLE, DEFAULT_HIT_SAMPLE};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("the table has no rows")]
    EmptyTable,
    #[error("a designated label attribute is required")]
    NoLabel,
    #[error("tables disagree on schema: {0}")]
    SchemaMismatch(String),
    #[error("prediction and truth lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("{n} points cannot form {k} clusters")]
    TooFewPoints { n: usize, k: usize },
    #[error("the query workload is empty")]
    EmptyWorkload,
    #[error("the schema has no attributes")]
    EmptySchema,
    #[error("the synthetic table has no rows")]
    EmptyFake,
    #[error("bad classifier request: {0}")]
    InvalidKind(String),
    #[error("query: {0}")]
    Query(String),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Structural agreement between two schemas: same attribute names in the
/// same order, same kinds with the same category lists, same label choice.
/// Numerical bounds may differ — a synthetic table legitimately spans a
/// slightly different range.
pub(crate) fn schema_compatible(a: &Schema, b: &Schema) -> bool {
    if a.label != b.label || a.attr_count() != b.attr_count() {
        return false;
    }
    a.attrs.iter().zip(&b.attrs).all(|(x, y)| {
        x.name == y.name
            && match (&x.kind, &y.kind) {
                (AttrKind::Numerical { .. }, AttrKind::Numerical { .. }) => true,
                (
                    AttrKind::Categorical { categories: ca },
                    AttrKind::Categorical { categories: cb },
                ) => ca == cb,
                _ => false,
            }
    })
}

/// Fixed feature preparation for the evaluation models: categorical
/// attributes one-hot encoded over their declared domains, numerical
/// attributes min-max scaled with bounds from the fitted table, and the
/// label attribute excluded.
#[derive(Clone, Debug)]
pub struct FeaturePipeline {
    columns: Vec<(usize, ColumnCode)>,
    width: usize,
}

#[derive(Clone, Debug)]
enum ColumnCode {
    MinMax { min: f64, max: f64 },
    OneHot { k: usize },
}

impl FeaturePipeline {
    pub fn fit(table: &Table) -> Result<Self, EvalError> {
        if table.is_empty() {
            return Err(EvalError::EmptyTable);
        }
        let schema = table.schema();
        let mut columns = Vec::new();
        let mut width = 0;
        for (i, attr) in schema.attrs.iter().enumerate() {
            if schema.label == Some(i) {
                continue;
            }
            let code = match &attr.kind {
                AttrKind::Numerical { .. } => {
                    let col = table.numeric_column(i);
                    let min = col.iter().copied().fold(f64::INFINITY, f64::min);
                    let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    width += 1;
                    ColumnCode::MinMax { min, max }
                }
                AttrKind::Categorical { categories } => {
                    width += categories.len();
                    ColumnCode::OneHot { k: categories.len() }
                }
            };
            columns.push((i, code));
        }
        Ok(FeaturePipeline { columns, width })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn transform(&self, table: &Table) -> Vec<Vec<f64>> {
        table.rows().iter().map(|r| self.transform_row(r)).collect()
    }

    fn transform_row(&self, row: &[Value]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width);
        for (i, code) in &self.columns {
            match code {
                ColumnCode::MinMax { min, max } => {
                    let v = row[*i].as_num().unwrap_or(*min);
                    let range = max - min;
                    out.push(if range > 0.0 { (v - min) / range } else { 0.0 });
                }
                ColumnCode::OneHot { k } => {
                    let c = row[*i].as_cat().unwrap_or(0);
                    for j in 0..*k {
                        out.push(f64::from(j == c));
                    }
                }
            }
        }
        out
    }
}

/// F1 score of the scoring target: the positive label (index 1) for binary
/// problems, otherwise the label rarest in the truth (ties to the lowest
/// index, classes absent from the truth ignored). Zero denominators score 0.
pub fn f1_target(
    predictions: &[usize],
    truth: &[usize],
    label_count: usize,
) -> Result<f64, EvalError> {
    if predictions.len() != truth.len() {
        return Err(EvalError::LengthMismatch(predictions.len(), truth.len()));
    }
    let target = if label_count == 2 {
        1
    } else {
        let mut counts = vec![0usize; label_count.max(1)];
        for &t in truth {
            if t < counts.len() {
                counts[t] += 1;
            }
        }
        counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .min_by_key(|&(i, &c)| (c, i))
            .map(|(i, _)| i)
            .unwrap_or(0)
    };
    let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
    for (&p, &t) in predictions.iter().zip(truth) {
        match (p == target, t == target) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fneg += 1.0,
            (false, false) => {}
        }
    }
    if tp == 0.0 {
        return Ok(0.0);
    }
    let precision = tp / (tp + fp);
    let recall = tp / (tp + fneg);
    Ok(2.0 * precision * recall / (precision + recall))
}

/// One classifier family's scores on the held-out test rows.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ClassifierScore {
    pub kind: ClassifierKind,
    pub f1_real: f64,
    pub f1_fake: f64,
    /// |f1_real − f1_fake|: how much utility the synthetic data loses.
    pub diff: f64,
}

/// Train each classifier kind twice — once on the real training rows, once
/// on the synthetic rows — and score both on the same real test rows. Each
/// arm fits its feature scaling on its own training table; the encoding
/// structure is shared through the common schema. Both arms of a kind use
/// the same derived seed, so identical inputs give a diff of exactly zero.
pub fn utility_classification(
    real_train: &Table,
    fake: &Table,
    test: &Table,
    kinds: &[ClassifierKind],
    seed: u64,
) -> Result<Vec<ClassifierScore>, EvalError> {
    if !schema_compatible(real_train.schema(), fake.schema())
        || !schema_compatible(real_train.schema(), test.schema())
    {
        return Err(EvalError::SchemaMismatch("classification inputs".into()));
    }
    let truth = test.labels().ok_or(EvalError::NoLabel)?;
    let label_count = test.schema().label_cardinality();
    let mut out = Vec::with_capacity(kinds.len());
    for (i, &kind) in kinds.iter().enumerate() {
        let kind_seed = seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let on_real = train_classifier(kind, real_train, kind_seed)?;
        let on_fake = train_classifier(kind, fake, kind_seed)?;
        let f1_real = f1_target(&on_real.predict_table(test), &truth, label_count)?;
        let f1_fake = f1_target(&on_fake.predict_table(test), &truth, label_count)?;
        out.push(ClassifierScore { kind, f1_real, f1_fake, diff: (f1_real - f1_fake).abs() });
    }
    Ok(out)
}

/// The full scorecard of one synthetic table. Every section is optional so
/// a report carries exactly the metrics that were requested; disabled ones
/// are left out of the JSON entirely.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classification: Vec<ClassifierScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nmi_diff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aqp_diff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hitting_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dcr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duplicate_rate: Option<f64>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string_pretty(self)
    }

    pub fn save(&self, path: &Path) -> Result<(), std::io::Error> {
        std::fs::write(path, self.to_json().map_err(std::io::Error::other)?)
    }

    pub fn load(path: &Path) -> Result<Self, std::io::Error> {
        serde_json::from_str(&std::fs::read_to_string(path)?).map_err(std::io::Error::other)
    }

    /// Plain-text rendering with one line per present metric.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for s in &self.classification {
            out.push_str(&format!(
                "f1 diff [{}]: {:.4} (real {:.4}, synthetic {:.4})\n",
                s.kind, s.diff, s.f1_real, s.f1_fake
            ));
        }
        if let Some(v) = self.nmi_diff {
            out.push_str(&format!("nmi diff: {v:.4}\n"));
        }
        if let Some(v) = self.aqp_diff {
            out.push_str(&format!("aqp diff: {v:.4}\n"));
        }
        if let Some(v) = self.hitting_rate {
            out.push_str(&format!("hitting rate: {v:.4}\n"));
        }
        if let Some(v) = self.dcr {
            out.push_str(&format!("dcr: {v:.4}\n"));
        }
        if let Some(v) = self.duplicate_rate {
            out.push_str(&format!("duplicate rate: {v:.3e}\n"));
        }
        out
    }
}

/// Epoch-snapshot scorer for training runs: fits one classifier on each
/// generated table and returns its F1 on a fixed validation table, so
/// snapshot selection favors the epoch with the most useful output.
#[derive(Clone, Debug)]
pub struct F1Snapshot {
    kind: ClassifierKind,
    validation: Table,
    seed: u64,
}

impl F1Snapshot {
    pub fn new(kind: ClassifierKind, validation: Table, seed: u64) -> Result<Self, EvalError> {
        if validation.is_empty() {
            return Err(EvalError::EmptyTable);
        }
        if validation.labels().is_none() {
            return Err(EvalError::NoLabel);
        }
        Ok(F1Snapshot { kind, validation, seed })
    }
}

impl SnapshotMetric for F1Snapshot {
    fn score(&mut self, synthetic: &Table) -> Result<f64, TrainError> {
        let metric = |e: EvalError| TrainError::Metric(e.to_string());
        let model = train_classifier(self.kind, synthetic, self.seed).map_err(metric)?;
        let truth = self.validation.labels().expect("checked at construction");
        let label_count = self.validation.schema().label_cardinality();
        f1_target(&model.predict_table(&self.validation), &truth, label_count).map_err(metric)
    }
}
