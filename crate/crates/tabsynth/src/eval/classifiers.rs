//! Seeded reference classifiers scored on real-vs-synthetic training data:
//! a CART decision tree, a bagged random forest, multi-class AdaBoost over
//! stumps, and one-vs-rest logistic regression.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::table::Table;

use super::{EvalError, FeaturePipeline};

/// Classifier family plus its capacity settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ClassifierKind {
    DecisionTree { max_depth: usize },
    RandomForest { trees: usize, max_depth: usize },
    AdaBoost { rounds: usize },
    Logistic { lr: f64, iterations: usize },
}

impl ClassifierKind {
    /// Reject zero-sized requests before any data is touched.
    pub fn validate(&self) -> Result<(), EvalError> {
        let complain = |msg: &str| Err(EvalError::InvalidKind(msg.into()));
        match *self {
            ClassifierKind::DecisionTree { max_depth: 0 } => {
                complain("tree depth must be at least 1")
            }
            ClassifierKind::RandomForest { trees, max_depth } if trees == 0 || max_depth == 0 => {
                complain("forest needs at least one tree of depth at least 1")
            }
            ClassifierKind::AdaBoost { rounds: 0 } => complain("boosting needs at least one round"),
            ClassifierKind::Logistic { lr, iterations }
                if lr <= 0.0 || !lr.is_finite() || iterations == 0 =>
            {
                complain("logistic regression needs a positive rate and iteration count")
            }
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            ClassifierKind::DecisionTree { max_depth } => write!(f, "dt{max_depth}"),
            ClassifierKind::RandomForest { trees, max_depth } => {
                write!(f, "rf{trees}x{max_depth}")
            }
            ClassifierKind::AdaBoost { rounds } => write!(f, "ada{rounds}"),
            ClassifierKind::Logistic { lr, iterations } => write!(f, "lr{lr}x{iterations}"),
        }
    }
}

/// The classifier families used by the evaluation reports by default.
pub fn default_kinds() -> Vec<ClassifierKind> {
    vec![
        ClassifierKind::DecisionTree { max_depth: 10 },
        ClassifierKind::DecisionTree { max_depth: 30 },
        ClassifierKind::RandomForest { trees: 10, max_depth: 10 },
        ClassifierKind::AdaBoost { rounds: 50 },
        ClassifierKind::Logistic { lr: 0.1, iterations: 300 },
    ]
}

#[derive(Clone, Debug)]
enum TreeNode {
    Leaf { class: usize },
    Split { feature: usize, threshold: f64, left: Box<TreeNode>, right: Box<TreeNode> },
}

impl TreeNode {
    fn predict(&self, x: &[f64]) -> usize {
        match self {
            TreeNode::Leaf { class } => *class,
            TreeNode::Split { feature, threshold, left, right } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Model {
    Tree(TreeNode),
    Forest(Vec<TreeNode>),
    Boost(Vec<(f64, TreeNode)>),
    /// Per-class weight vectors, bias last.
    Logistic(Vec<Vec<f64>>),
}

/// A fitted classifier together with the feature encoding it was fitted
/// with. The encoding (one-hot categories, min-max numeric scaling, label
/// excluded) is derived from the training table.
#[derive(Clone, Debug)]
pub struct Classifier {
    kind: ClassifierKind,
    label_count: usize,
    pipeline: FeaturePipeline,
    model: Model,
}

impl Classifier {
    pub fn kind(&self) -> ClassifierKind {
        self.kind
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    /// Predicted label index per row of an already-encoded feature matrix.
    pub fn predict_features(&self, rows: &[Vec<f64>]) -> Vec<usize> {
        rows.iter().map(|x| self.predict_one(x)).collect()
    }

    /// Predicted label index per row, encoding the table with the
    /// classifier's own fitted pipeline.
    pub fn predict_table(&self, table: &Table) -> Vec<usize> {
        self.predict_features(&self.pipeline.transform(table))
    }

    fn predict_one(&self, x: &[f64]) -> usize {
        match &self.model {
            Model::Tree(t) => t.predict(x),
            Model::Forest(trees) => {
                let mut votes = vec![0usize; self.label_count];
                for t in trees {
                    votes[t.predict(x)] += 1;
                }
                argmax_ties_lowest_usize(&votes)
            }
            Model::Boost(stumps) => {
                let mut scores = vec![0.0; self.label_count];
                for (alpha, stump) in stumps {
                    scores[stump.predict(x)] += alpha;
                }
                argmax_ties_lowest(&scores)
            }
            Model::Logistic(weights) => {
                let scores: Vec<f64> = weights.iter().map(|w| linear_score(w, x)).collect();
                argmax_ties_lowest(&scores)
            }
        }
    }
}

/// Fit a classifier of the requested kind on a labeled table. Categorical
/// features are one-hot encoded and numerical features min-max scaled, with
/// scaling bounds taken from this training table; the label attribute is
/// excluded from the features. Deterministic under `seed`.
pub fn train_classifier(
    kind: ClassifierKind,
    table: &Table,
    seed: u64,
) -> Result<Classifier, EvalError> {
    kind.validate()?;
    if table.is_empty() {
        return Err(EvalError::EmptyTable);
    }
    let labels = table.labels().ok_or(EvalError::NoLabel)?;
    let label_count = table.schema().label_cardinality();
    if label_count == 0 {
        return Err(EvalError::NoLabel);
    }
    let pipeline = FeaturePipeline::fit(table)?;
    let x = pipeline.transform(table);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let model = match kind {
        ClassifierKind::DecisionTree { max_depth } => {
            let rows: Vec<usize> = (0..x.len()).collect();
            let w = vec![1.0; x.len()];
            Model::Tree(fit_tree(&x, &labels, &w, &rows, max_depth, label_count, None, &mut rng))
        }
        ClassifierKind::RandomForest { trees, max_depth } => {
            let n = x.len();
            let n_features = pipeline.width();
            let m = ((n_features as f64).sqrt().floor() as usize).max(1);
            let w = vec![1.0; n];
            let mut fitted = Vec::with_capacity(trees);
            for _ in 0..trees {
                let rows: Vec<usize> =
                    (0..n).map(|_| rand::Rng::random_range(&mut rng, 0..n)).collect();
                fitted.push(fit_tree(
                    &x,
                    &labels,
                    &w,
                    &rows,
                    max_depth,
                    label_count,
                    Some(m),
                    &mut rng,
                ));
            }
            Model::Forest(fitted)
        }
        ClassifierKind::AdaBoost { rounds } => {
            Model::Boost(fit_boost(&x, &labels, label_count, rounds, &mut rng))
        }
        ClassifierKind::Logistic { lr, iterations } => {
            Model::Logistic(fit_logistic(&x, &labels, label_count, lr, iterations))
        }
    };
    Ok(Classifier { kind, label_count, pipeline, model })
}

/// Greedy CART growth with Gini impurity and per-example weights.
///
/// Candidate thresholds are midpoints between consecutive distinct feature
/// values; the best split by weighted child impurity wins even when it ties
/// the parent (the children may become separable deeper down, as in XOR).
/// Ties keep the lowest feature index and then the lowest threshold, and
/// leaves take the majority class with ties to the lowest index, so growth
/// is deterministic. `m_features` switches on per-split feature subsampling
/// for forests.
#[allow(clippy::too_many_arguments)]
fn fit_tree(
    x: &[Vec<f64>],
    y: &[usize],
    w: &[f64],
    rows: &[usize],
    depth: usize,
    k: usize,
    m_features: Option<usize>,
    rng: &mut ChaCha8Rng,
) -> TreeNode {
    let mut counts = vec![0.0; k];
    for &r in rows {
        counts[y[r]] += w[r];
    }
    let majority = argmax_ties_lowest(&counts);
    let total: f64 = counts.iter().sum();
    let classes_present = counts.iter().filter(|&&c| c > 0.0).count();
    if depth == 0 || rows.len() < 2 || classes_present <= 1 || total <= 0.0 {
        return TreeNode::Leaf { class: majority };
    }

    let n_features = x[0].len();
    let candidates: Vec<usize> = match m_features {
        Some(m) => {
            let mut s: Vec<usize> =
                rand::seq::index::sample(rng, n_features, m.min(n_features)).into_iter().collect();
            s.sort_unstable();
            s
        }
        None => (0..n_features).collect(),
    };

    let mut best: Option<(usize, f64, f64)> = None;
    let mut order = rows.to_vec();
    for &f in &candidates {
        order.sort_by(|&a, &b| x[a][f].partial_cmp(&x[b][f]).unwrap());
        let mut left = vec![0.0; k];
        let mut left_total = 0.0;
        for i in 0..order.len() - 1 {
            let r = order[i];
            left[y[r]] += w[r];
            left_total += w[r];
            let (va, vb) = (x[r][f], x[order[i + 1]][f]);
            if va == vb {
                continue;
            }
            let threshold = (va + vb) / 2.0;
            let right_total = total - left_total;
            let mut gl = 1.0;
            let mut gr = 1.0;
            for c in 0..k {
                if left_total > 0.0 {
                    let p = left[c] / left_total;
                    gl -= p * p;
                }
                if right_total > 0.0 {
                    let p = (counts[c] - left[c]) / right_total;
                    gr -= p * p;
                }
            }
            let impurity = (left_total * gl + right_total * gr) / total;
            if best.is_none_or(|(_, _, b)| impurity < b) {
                best = Some((f, threshold, impurity));
            }
        }
    }

    let Some((feature, threshold, _)) = best else {
        // Every candidate feature is constant on this node's rows.
        return TreeNode::Leaf { class: majority };
    };
    let (mut left_rows, mut right_rows) = (Vec::new(), Vec::new());
    for &r in rows {
        if x[r][feature] <= threshold {
            left_rows.push(r);
        } else {
            right_rows.push(r);
        }
    }
    TreeNode::Split {
        feature,
        threshold,
        left: Box::new(fit_tree(x, y, w, &left_rows, depth - 1, k, m_features, rng)),
        right: Box::new(fit_tree(x, y, w, &right_rows, depth - 1, k, m_features, rng)),
    }
}

/// Multi-class boosting over depth-1 stumps: each round fits a weighted
/// stump, weighs it by `ln((1-err)/err) + ln(K-1)` and upweights its
/// mistakes. Rounds stop early once a stump is no better than chance
/// (`err >= (K-1)/K`) or fits perfectly.
fn fit_boost(
    x: &[Vec<f64>],
    y: &[usize],
    k: usize,
    rounds: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(f64, TreeNode)> {
    let n = x.len();
    let rows: Vec<usize> = (0..n).collect();
    let mut wts = vec![1.0 / n as f64; n];
    let mut stumps: Vec<(f64, TreeNode)> = Vec::new();
    for _ in 0..rounds {
        let stump = fit_tree(x, y, &wts, &rows, 1, k, None, rng);
        let preds: Vec<usize> = x.iter().map(|r| stump.predict(r)).collect();
        let err: f64 =
            (0..n).filter(|&i| preds[i] != y[i]).map(|i| wts[i]).sum::<f64>();
        let chance = (k.saturating_sub(1)) as f64 / k as f64;
        if err >= chance {
            if stumps.is_empty() {
                stumps.push((1.0, stump));
            }
            break;
        }
        let clamped = err.max(1e-10);
        let alpha = ((1.0 - clamped) / clamped).ln() + ((k.max(2) - 1) as f64).ln();
        stumps.push((alpha, stump));
        if err <= 0.0 {
            break;
        }
        let bump = alpha.exp();
        for i in 0..n {
            if preds[i] != y[i] {
                wts[i] *= bump;
            }
        }
        let s: f64 = wts.iter().sum();
        for v in wts.iter_mut() {
            *v /= s;
        }
    }
    stumps
}

/// One-vs-rest logistic regression by full-batch gradient descent from a
/// zero initialization; one weight vector (bias last) per class.
fn fit_logistic(x: &[Vec<f64>], y: &[usize], k: usize, lr: f64, iterations: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let d = x[0].len();
    let mut weights = vec![vec![0.0; d + 1]; k];
    for (class, w) in weights.iter_mut().enumerate() {
        for _ in 0..iterations {
            let mut grad = vec![0.0; d + 1];
            for (xi, &yi) in x.iter().zip(y) {
                let target = f64::from(yi == class);
                let resid = sigmoid(linear_score(w, xi)) - target;
                for j in 0..d {
                    grad[j] += resid * xi[j];
                }
                grad[d] += resid;
            }
            for j in 0..=d {
                w[j] -= lr * grad[j] / n as f64;
            }
        }
    }
    weights
}

fn linear_score(w: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    let mut s = w[d];
    for j in 0..d {
        s += w[j] * x[j];
    }
    s
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn argmax_ties_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn argmax_ties_lowest_usize(values: &[usize]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::f1_target;
    use crate::table::{AttrKind, AttributeMeta, Schema, Table, Value};
    use rand::Rng;

    /// Numeric feature rows plus labels as a labeled table.
    fn feature_table(points: &[(f64, f64, usize)]) -> Table {
        let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y, _) in points {
            min_x = min_x.min(x);
            max_x = max_x.max(x);
            min_y = min_y.min(y);
            max_y = max_y.max(y);
        }
        let schema = Schema::new(vec![
            AttributeMeta {
                name: "x".into(),
                kind: AttrKind::Numerical { min: min_x, max: max_x, discrete: false },
            },
            AttributeMeta {
                name: "y".into(),
                kind: AttrKind::Numerical { min: min_y, max: max_y, discrete: false },
            },
            AttributeMeta {
                name: "label".into(),
                kind: AttrKind::Categorical { categories: vec!["0".into(), "1".into()] },
            },
        ])
        .with_label("label")
        .unwrap();
        let mut t = Table::new(schema);
        for &(x, y, lab) in points {
            t.push_row(vec![Value::Num(x), Value::Num(y), Value::Cat(lab)]).unwrap();
        }
        t
    }

    /// Two tight blobs far apart: linearly separable.
    fn blobs(seed: u64) -> Table {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::new();
        for i in 0..200 {
            let label = i % 2;
            let center = if label == 0 { 0.0 } else { 5.0 };
            points.push((
                center + rng.random_range(-0.5..0.5),
                center + rng.random_range(-0.5..0.5),
                label,
            ));
        }
        feature_table(&points)
    }

    fn all_kinds() -> Vec<ClassifierKind> {
        vec![
            ClassifierKind::DecisionTree { max_depth: 10 },
            ClassifierKind::RandomForest { trees: 10, max_depth: 10 },
            ClassifierKind::AdaBoost { rounds: 20 },
            ClassifierKind::Logistic { lr: 0.5, iterations: 500 },
        ]
    }

    #[test]
    fn every_kind_separates_distant_blobs() {
        let t = blobs(1);
        let truth = t.labels().unwrap();
        for kind in all_kinds() {
            let c = train_classifier(kind, &t, 7).unwrap();
            let preds = c.predict_table(&t);
            let f1 = f1_target(&preds, &truth, 2).unwrap();
            assert!(f1 >= 0.95, "{kind} reached only {f1}");
        }
    }

    #[test]
    fn single_class_data_predicts_that_class() {
        let t = feature_table(&[(0.0, 1.0, 1), (2.0, 3.0, 1), (4.0, 0.0, 1)]);
        for kind in all_kinds() {
            let c = train_classifier(kind, &t, 1).unwrap();
            assert!(c.predict_table(&t).iter().all(|&p| p == 1), "{kind}");
        }
    }

    #[test]
    fn a_stump_cannot_express_xor_but_two_levels_can() {
        let mut points = Vec::new();
        for _ in 0..10 {
            points.extend_from_slice(&[
                (0.0, 0.0, 0usize),
                (1.0, 1.0, 0),
                (0.0, 1.0, 1),
                (1.0, 0.0, 1),
            ]);
        }
        let t = feature_table(&points);
        let truth = t.labels().unwrap();

        // Any single split leaves both sides half-and-half, the tied leaves
        // fall back to class 0, and the positive label is never predicted.
        let stump = train_classifier(ClassifierKind::DecisionTree { max_depth: 1 }, &t, 1).unwrap();
        let preds = stump.predict_table(&t);
        assert!(preds.iter().all(|&p| p == 0));
        let hit = preds.iter().zip(&truth).filter(|(p, t)| p == t).count();
        assert_eq!(hit * 2, truth.len(), "stump should sit at chance accuracy");
        assert_eq!(f1_target(&preds, &truth, 2).unwrap(), 0.0);

        let deep = train_classifier(ClassifierKind::DecisionTree { max_depth: 2 }, &t, 1).unwrap();
        let preds = deep.predict_table(&t);
        assert_eq!(f1_target(&preds, &truth, 2).unwrap(), 1.0);
    }

    #[test]
    fn boosting_outperforms_its_own_stumps() {
        // y = 1 inside an interval: one threshold cannot carve it out, a
        // weighted committee of stumps can.
        let points: Vec<(f64, f64, usize)> = (0..100)
            .map(|i| {
                let x = i as f64 / 100.0;
                (x, 0.0, usize::from(x > 0.3 && x < 0.7))
            })
            .collect();
        let t = feature_table(&points);
        let truth = t.labels().unwrap();
        let stump = train_classifier(ClassifierKind::DecisionTree { max_depth: 1 }, &t, 1).unwrap();
        let boost = train_classifier(ClassifierKind::AdaBoost { rounds: 30 }, &t, 1).unwrap();
        let f1_stump = f1_target(&stump.predict_table(&t), &truth, 2).unwrap();
        let f1_boost = f1_target(&boost.predict_table(&t), &truth, 2).unwrap();
        assert!(f1_boost >= 0.9, "boosted committee reached only {f1_boost}");
        assert!(f1_boost > f1_stump, "{f1_boost} vs stump {f1_stump}");
    }

    #[test]
    fn forests_are_reproducible_under_a_seed() {
        let t = blobs(2);
        let kind = ClassifierKind::RandomForest { trees: 5, max_depth: 4 };
        let a = train_classifier(kind, &t, 42).unwrap().predict_table(&t);
        let b = train_classifier(kind, &t, 42).unwrap().predict_table(&t);
        assert_eq!(a, b);
        let c = train_classifier(kind, &t, 43).unwrap().predict_table(&t);
        // A different seed may legitimately agree on easy data; just check
        // the run completes and stays in range.
        assert!(c.iter().all(|&p| p < 2));
    }

    #[test]
    fn degenerate_requests_are_rejected() {
        let t = blobs(3);
        assert!(matches!(
            train_classifier(ClassifierKind::DecisionTree { max_depth: 0 }, &t, 1),
            Err(EvalError::InvalidKind(_))
        ));
        assert!(matches!(
            train_classifier(ClassifierKind::Logistic { lr: -0.1, iterations: 10 }, &t, 1),
            Err(EvalError::InvalidKind(_))
        ));
        let empty = Table::new(t.schema().clone());
        assert!(matches!(
            train_classifier(ClassifierKind::AdaBoost { rounds: 5 }, &empty, 1),
            Err(EvalError::EmptyTable)
        ));
        let unlabeled = {
            let mut schema = t.schema().clone();
            schema.label = None;
            Table::from_rows(schema, t.rows().to_vec()).unwrap()
        };
        assert!(matches!(
            train_classifier(ClassifierKind::DecisionTree { max_depth: 3 }, &unlabeled, 1),
            Err(EvalError::NoLabel)
        ));
    }

    #[test]
    fn kind_serialization_round_trips() {
        for kind in all_kinds() {
            let json = serde_json::to_string(&kind).unwrap();
            let back: ClassifierKind = serde_json::from_str(&json).unwrap();
            assert_eq!(kind, back);
        }
    }
}
