//! Reversible record encodings: per-attribute normalization schemes plus a
//! vector or matrix sample assembly.
//!
//! Numerical attributes are mapped either with a min-max rescale into
//! `[-1, 1]` or with a mode-aware scheme that picks the most responsible
//! component of a fitted Gaussian mixture, emits the value scaled by twice
//! that component's deviation, and appends the component choice one-hot.
//! Categorical attributes become one-hot vectors or single ordinal scalars.
//! The vector assembly concatenates all segments; the matrix assembly (only
//! available when every segment is one value wide) lays raw values out
//! row-major on a near-square grid, padding the tail with zeros.

mod gmm;

pub use gmm::{GmmFitStats, GmmModel};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::table::{AttrKind, Schema, Table, Value};

#[derive(Debug, thiserror::Error)]
pub enum TransformError {
    #[error("attribute '{attr}': constant column cannot be normalized")]
    DegenerateAttribute { attr: String },
    #[error("attribute '{attr}': {needed} values needed to fit, got {got}")]
    TooFewValues { attr: String, needed: usize, got: usize },
    #[error("matrix assembly requires width-1 segments: {0}")]
    IncompatibleAssembly(String),
    #[error("table schema does not match the fitted schema")]
    SchemaMismatch,
    #[error("sample width {got} does not match the fitted layout width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("fitted state does not match the schema: {0}")]
    StateMismatch(String),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("table: {0}")]
    Table(#[from] crate::table::TableError),
}

/// Normalization scheme for numerical attributes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericScheme {
    /// `-1 + 2 (v - min) / (max - min)`, inverted exactly.
    Simple,
    /// Mixture-based: `(v - mean_k) / (2 sigma_k)` clamped to `[-1, 1]` plus
    /// a one-hot of the most responsible component `k`.
    Gmm,
}

impl std::fmt::Display for NumericScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NumericScheme::Simple => "simple",
            NumericScheme::Gmm => "gmm",
        })
    }
}

/// Encoding scheme for categorical attributes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoricalScheme {
    OneHot,
    /// Single scalar: `i / (K - 1)` in the vector assembly, the raw index in
    /// the matrix assembly.
    Ordinal,
}

/// How per-attribute segments combine into one sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assembly {
    Vector,
    Matrix,
}

/// Scheme selection for a transformer fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub numeric: NumericScheme,
    /// Mixture size used when `numeric` is [`NumericScheme::Gmm`].
    pub gmm_components: usize,
    pub categorical: CategoricalScheme,
    pub assembly: Assembly,
}

impl Default for TransformSpec {
    fn default() -> Self {
        TransformSpec {
            numeric: NumericScheme::Gmm,
            gmm_components: 5,
            categorical: CategoricalScheme::OneHot,
            assembly: Assembly::Vector,
        }
    }
}

/// Fitted per-attribute state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum AttrState {
    Simple { min: f64, max: f64 },
    Gmm { model: GmmModel },
    OneHot { cardinality: usize },
    Ordinal { cardinality: usize },
}

/// Kind of one contiguous sample segment, which also determines the
/// generator head that produces it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SegmentKind {
    /// tanh-range scalar from simple normalization.
    TanhScalar,
    /// tanh-range scalar carrying the within-component value.
    GmmScalar,
    /// One-hot over mixture components (softmax head).
    GmmModes { k: usize },
    /// One-hot over categories (softmax head).
    OneHot { k: usize },
    /// Sigmoid-range scalar carrying a scaled category index.
    OrdinalScalar,
}

impl SegmentKind {
    pub fn width(&self) -> usize {
        match self {
            SegmentKind::GmmModes { k } | SegmentKind::OneHot { k } => *k,
            _ => 1,
        }
    }

    /// Segments produced by a softmax head (discrete choices).
    pub fn is_softmax(&self) -> bool {
        matches!(self, SegmentKind::GmmModes { .. } | SegmentKind::OneHot { .. })
    }
}

/// One contiguous span of sample columns belonging to a single attribute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub attr: usize,
    pub kind: SegmentKind,
    pub start: usize,
    pub width: usize,
}

/// Column layout of encoded samples in the vector assembly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleLayout {
    pub segments: Vec<Segment>,
    pub width: usize,
}

impl SampleLayout {
    /// (start, width) of every softmax segment, used by distribution-matching
    /// losses.
    pub fn softmax_spans(&self) -> Vec<(usize, usize)> {
        self.segments
            .iter()
            .filter(|s| s.kind.is_softmax())
            .map(|s| (s.start, s.width))
            .collect()
    }
}

/// Reversible record-to-sample mapping fitted on a table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedTransformer {
    schema: Schema,
    spec: TransformSpec,
    attrs: Vec<AttrState>,
}

impl FittedTransformer {
    /// Fit the chosen schemes on a table. Mixture initialization is seeded;
    /// everything else is deterministic.
    pub fn fit(table: &Table, spec: TransformSpec, seed: u64) -> Result<Self, TransformError> {
        let schema = table.schema().clone();
        let mut attrs = Vec::with_capacity(schema.attr_count());
        for (idx, meta) in schema.attrs.iter().enumerate() {
            let state = match &meta.kind {
                AttrKind::Numerical { .. } => {
                    let values = table.numeric_column(idx);
                    match spec.numeric {
                        NumericScheme::Simple => {
                            let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
                            let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                            if max <= min || !(max - min).is_finite() {
                                return Err(TransformError::DegenerateAttribute {
                                    attr: meta.name.clone(),
                                });
                            }
                            AttrState::Simple { min, max }
                        }
                        NumericScheme::Gmm => {
                            let (model, _) = GmmModel::fit(
                                &values,
                                spec.gmm_components,
                                seed.wrapping_add(idx as u64),
                                &meta.name,
                            )?;
                            AttrState::Gmm { model }
                        }
                    }
                }
                AttrKind::Categorical { categories } => match spec.categorical {
                    CategoricalScheme::OneHot => AttrState::OneHot { cardinality: categories.len() },
                    CategoricalScheme::Ordinal => {
                        AttrState::Ordinal { cardinality: categories.len() }
                    }
                },
            };
            attrs.push(state);
        }
        Self::from_parts(schema, spec, attrs)
    }

    /// Assemble a transformer from already-fitted per-attribute state, e.g.
    /// when mixture parameters are known in advance.
    pub fn from_parts(
        schema: Schema,
        spec: TransformSpec,
        attrs: Vec<AttrState>,
    ) -> Result<Self, TransformError> {
        if schema.attr_count() != attrs.len() {
            return Err(TransformError::StateMismatch(format!(
                "{} attributes vs {} fitted states",
                schema.attr_count(),
                attrs.len()
            )));
        }
        for (meta, state) in schema.attrs.iter().zip(&attrs) {
            let ok = match (&meta.kind, state) {
                (AttrKind::Numerical { .. }, AttrState::Simple { .. } | AttrState::Gmm { .. }) => {
                    true
                }
                (
                    AttrKind::Categorical { categories },
                    AttrState::OneHot { cardinality } | AttrState::Ordinal { cardinality },
                ) => categories.len() == *cardinality,
                _ => false,
            };
            if !ok {
                return Err(TransformError::StateMismatch(format!(
                    "attribute '{}' does not match its fitted state",
                    meta.name
                )));
            }
        }
        let t = FittedTransformer { schema, spec, attrs };
        if t.spec.assembly == Assembly::Matrix {
            if let Some(seg) = t.layout().segments.iter().find(|s| s.width != 1) {
                return Err(TransformError::IncompatibleAssembly(format!(
                    "attribute '{}' needs {} columns",
                    t.schema.attrs[seg.attr].name,
                    seg.width
                )));
            }
        }
        Ok(t)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn spec(&self) -> &TransformSpec {
        &self.spec
    }

    pub fn attr_states(&self) -> &[AttrState] {
        &self.attrs
    }

    /// Segment layout of encoded samples (vector-assembly column order;
    /// matrix assembly flattens the same order row-major onto the grid).
    pub fn layout(&self) -> SampleLayout {
        let mut segments = Vec::new();
        let mut at = 0;
        for (idx, state) in self.attrs.iter().enumerate() {
            let kinds: Vec<SegmentKind> = match state {
                AttrState::Simple { .. } => vec![SegmentKind::TanhScalar],
                AttrState::Gmm { model } => {
                    vec![SegmentKind::GmmScalar, SegmentKind::GmmModes { k: model.components() }]
                }
                AttrState::OneHot { cardinality } => vec![SegmentKind::OneHot { k: *cardinality }],
                AttrState::Ordinal { .. } => vec![SegmentKind::OrdinalScalar],
            };
            for kind in kinds {
                let width = kind.width();
                segments.push(Segment { attr: idx, kind, start: at, width });
                at += width;
            }
        }
        SampleLayout { segments, width: at }
    }

    /// Grid shape of the matrix assembly: near-square, row-major, trailing
    /// cells zero-padded.
    pub fn matrix_shape(&self) -> Option<(usize, usize)> {
        if self.spec.assembly != Assembly::Matrix {
            return None;
        }
        let s = self.layout().segments.len();
        let rows = (s as f64).sqrt().ceil() as usize;
        let cols = s.div_ceil(rows);
        Some((rows, cols))
    }

    /// Number of sample columns produced per record.
    pub fn sample_width(&self) -> usize {
        match self.matrix_shape() {
            Some((r, c)) => r * c,
            None => self.layout().width,
        }
    }

    /// Encode a whole table into an `n x sample_width` sample matrix.
    pub fn encode(&self, table: &Table) -> Result<Tensor, TransformError> {
        if table.schema() != &self.schema {
            return Err(TransformError::SchemaMismatch);
        }
        let width = self.sample_width();
        let mut out = Tensor::zeros(table.n_rows(), width);
        for (i, row) in table.rows().iter().enumerate() {
            self.encode_record(row, out.row_slice_mut(i));
        }
        Ok(out)
    }

    /// Encode one record into `out` (length `sample_width`).
    pub fn encode_record(&self, row: &[Value], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let layout = self.layout();
        let matrix = self.spec.assembly == Assembly::Matrix;
        for (pos, seg) in layout.segments.iter().enumerate() {
            // In the matrix assembly every segment is one cell wide and
            // lands at its row-major grid position.
            let start = if matrix { pos } else { seg.start };
            let cell = &mut out[start..start + seg.width];
            match (&self.attrs[seg.attr], seg.kind) {
                (AttrState::Simple { min, max }, SegmentKind::TanhScalar) => {
                    let v = row[seg.attr].as_num().unwrap_or(0.0);
                    let norm = -1.0 + 2.0 * (v - min) / (max - min);
                    cell[0] = norm.clamp(-1.0, 1.0);
                }
                (AttrState::Gmm { model }, SegmentKind::GmmScalar) => {
                    let v = row[seg.attr].as_num().unwrap_or(0.0);
                    let k = model.most_responsible(v);
                    cell[0] = ((v - model.means[k]) / (2.0 * model.sigmas[k])).clamp(-1.0, 1.0);
                }
                (AttrState::Gmm { model }, SegmentKind::GmmModes { .. }) => {
                    let v = row[seg.attr].as_num().unwrap_or(0.0);
                    cell[model.most_responsible(v)] = 1.0;
                }
                (AttrState::OneHot { .. }, SegmentKind::OneHot { .. }) => {
                    cell[row[seg.attr].as_cat().unwrap_or(0)] = 1.0;
                }
                (AttrState::Ordinal { cardinality }, SegmentKind::OrdinalScalar) => {
                    let i = row[seg.attr].as_cat().unwrap_or(0);
                    cell[0] = if matrix {
                        i as f64
                    } else if *cardinality > 1 {
                        i as f64 / (*cardinality - 1) as f64
                    } else {
                        0.0
                    };
                }
                _ => unreachable!("layout is derived from the same states"),
            }
        }
    }

    /// Decode a sample matrix back into records.
    pub fn decode(&self, samples: &Tensor) -> Result<Table, TransformError> {
        if samples.cols() != self.sample_width() {
            return Err(TransformError::WidthMismatch {
                expected: self.sample_width(),
                got: samples.cols(),
            });
        }
        let mut table = Table::new(self.schema.clone());
        for i in 0..samples.rows() {
            let row = self.decode_record(samples.row_slice(i));
            table.push_row(row)?;
        }
        Ok(table)
    }

    /// Decode one sample row into a record.
    pub fn decode_record(&self, sample: &[f64]) -> Vec<Value> {
        let layout = self.layout();
        let matrix = self.spec.assembly == Assembly::Matrix;
        let mut row = vec![Value::Num(0.0); self.schema.attr_count()];
        let mut pending_gmm_scalar = 0.0;
        for (pos, seg) in layout.segments.iter().enumerate() {
            let start = if matrix { pos } else { seg.start };
            let cell = &sample[start..start + seg.width];
            let meta = &self.schema.attrs[seg.attr];
            match (&self.attrs[seg.attr], seg.kind) {
                (AttrState::Simple { min, max }, SegmentKind::TanhScalar) => {
                    let x = cell[0].clamp(-1.0, 1.0);
                    let v = min + (x + 1.0) * (max - min) / 2.0;
                    row[seg.attr] = Value::Num(finish_numeric(v, &meta.kind));
                }
                (AttrState::Gmm { .. }, SegmentKind::GmmScalar) => {
                    pending_gmm_scalar = cell[0].clamp(-1.0, 1.0);
                }
                (AttrState::Gmm { model }, SegmentKind::GmmModes { .. }) => {
                    let k = argmax(cell);
                    let v = model.means[k] + pending_gmm_scalar * 2.0 * model.sigmas[k];
                    row[seg.attr] = Value::Num(finish_numeric(v, &meta.kind));
                }
                (AttrState::OneHot { .. }, SegmentKind::OneHot { .. }) => {
                    row[seg.attr] = Value::Cat(argmax(cell));
                }
                (AttrState::Ordinal { cardinality }, SegmentKind::OrdinalScalar) => {
                    let raw = if matrix {
                        cell[0]
                    } else {
                        cell[0].clamp(0.0, 1.0) * (*cardinality as f64 - 1.0).max(0.0)
                    };
                    let i = (raw.round().max(0.0) as usize).min(cardinality - 1);
                    row[seg.attr] = Value::Cat(i);
                }
                _ => unreachable!("layout is derived from the same states"),
            }
        }
        row
    }

    /// Persist as JSON.
    pub fn save_json(&self, path: &Path) -> Result<(), TransformError> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), self)?;
        Ok(())
    }

    /// Load a transformer persisted with [`FittedTransformer::save_json`].
    pub fn load_json(path: &Path) -> Result<Self, TransformError> {
        let f = std::fs::File::open(path)?;
        let t: FittedTransformer = serde_json::from_reader(std::io::BufReader::new(f))?;
        Self::from_parts(t.schema, t.spec, t.attrs)
    }
}

/// Round discrete numericals to integers and clamp into the schema bounds.
fn finish_numeric(v: f64, kind: &AttrKind) -> f64 {
    match kind {
        AttrKind::Numerical { min, max, discrete } => {
            let v = if *discrete { v.round() } else { v };
            v.clamp(*min, *max)
        }
        AttrKind::Categorical { .. } => v,
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
