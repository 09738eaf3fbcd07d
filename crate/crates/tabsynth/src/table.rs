//! Relational tables: typed schemas, CSV IO, schema inference and
//! label-stratified splitting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Distinct-value threshold above which an all-numeric column is inferred
/// as numerical rather than categorical.
pub const DEFAULT_DISTINCT_THRESHOLD: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("row {row}: expected {expected} fields, got {got}")]
    ArityMismatch { row: usize, expected: usize, got: usize },
    #[error("row {row}, attribute '{attr}': cannot parse '{value}' as a number")]
    ParseError { row: usize, attr: String, value: String },
    #[error("row {row}, attribute '{attr}': unknown category '{value}'")]
    UnknownCategory { row: usize, attr: String, value: String },
    #[error("row {row}, attribute '{attr}': missing value")]
    MissingValue { row: usize, attr: String },
    #[error("header mismatch: expected [{expected}], got [{got}]")]
    HeaderMismatch { expected: String, got: String },
    #[error("input contains no data rows")]
    EmptyInput,
    #[error("too few rows to split: every part must receive at least one row")]
    TooFewRows,
    #[error("unknown attribute '{0}'")]
    UnknownAttribute(String),
    #[error("schema file: {0}")]
    SchemaFormat(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Attribute domain: bounded numerical (optionally integer-valued) or
/// categorical over an ordered list of category names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum AttrKind {
    Numerical { min: f64, max: f64, discrete: bool },
    Categorical { categories: Vec<String> },
}

impl AttrKind {
    pub fn is_numerical(&self) -> bool {
        matches!(self, AttrKind::Numerical { .. })
    }

    pub fn category_count(&self) -> usize {
        match self {
            AttrKind::Numerical { .. } => 0,
            AttrKind::Categorical { categories } => categories.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeMeta {
    pub name: String,
    pub kind: AttrKind,
}

/// Ordered attribute list plus an optional label designation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub attrs: Vec<AttributeMeta>,
    /// Index of the classification label attribute, if any. The label must
    /// be categorical.
    pub label: Option<usize>,
}

impl Schema {
    pub fn new(attrs: Vec<AttributeMeta>) -> Self {
        Schema { attrs, label: None }
    }

    pub fn attr_count(&self) -> usize {
        self.attrs.len()
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.attrs.iter().position(|a| a.name == name)
    }

    /// Designate the label attribute by name; it must exist and be
    /// categorical.
    pub fn with_label(mut self, name: &str) -> Result<Self, TableError> {
        let idx = self.find(name).ok_or_else(|| TableError::UnknownAttribute(name.into()))?;
        if self.attrs[idx].kind.is_numerical() {
            return Err(TableError::SchemaFormat(format!(
                "label attribute '{name}' must be categorical"
            )));
        }
        self.label = Some(idx);
        Ok(self)
    }

    /// Number of label categories, 0 when no label is set.
    pub fn label_cardinality(&self) -> usize {
        self.label.map(|i| self.attrs[i].kind.category_count()).unwrap_or(0)
    }
}

/// One cell: a numeric value or a categorical index into the attribute's
/// category list.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Num(f64),
    Cat(usize),
}

impl Value {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(v) => Some(*v),
            Value::Cat(_) => None,
        }
    }

    pub fn as_cat(&self) -> Option<usize> {
        match self {
            Value::Cat(c) => Some(*c),
            Value::Num(_) => None,
        }
    }
}

/// In-memory table: a schema and rows of typed values.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    schema: Schema,
    rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(schema: Schema) -> Self {
        Table { schema, rows: Vec::new() }
    }

    pub fn from_rows(schema: Schema, rows: Vec<Vec<Value>>) -> Result<Self, TableError> {
        let mut t = Table::new(schema);
        for row in rows {
            t.push_row(row)?;
        }
        Ok(t)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[Value] {
        &self.rows[i]
    }

    pub fn value(&self, row: usize, attr: usize) -> Value {
        self.rows[row][attr]
    }

    /// Append a row after checking arity and per-cell type/category bounds.
    pub fn push_row(&mut self, row: Vec<Value>) -> Result<(), TableError> {
        let at = self.rows.len();
        if row.len() != self.schema.attr_count() {
            return Err(TableError::ArityMismatch {
                row: at,
                expected: self.schema.attr_count(),
                got: row.len(),
            });
        }
        for (j, (v, meta)) in row.iter().zip(&self.schema.attrs).enumerate() {
            match (v, &meta.kind) {
                (Value::Num(x), AttrKind::Numerical { .. }) => {
                    if !x.is_finite() {
                        return Err(TableError::ParseError {
                            row: at,
                            attr: meta.name.clone(),
                            value: x.to_string(),
                        });
                    }
                }
                (Value::Cat(c), AttrKind::Categorical { categories }) => {
                    if *c >= categories.len() {
                        return Err(TableError::UnknownCategory {
                            row: at,
                            attr: meta.name.clone(),
                            value: format!("#{c}"),
                        });
                    }
                }
                _ => {
                    return Err(TableError::ParseError {
                        row: at,
                        attr: self.schema.attrs[j].name.clone(),
                        value: "type mismatch".into(),
                    })
                }
            }
        }
        self.rows.push(row);
        Ok(())
    }

    /// Numeric column as a vector; non-numeric cells are skipped.
    pub fn numeric_column(&self, attr: usize) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r[attr].as_num()).collect()
    }

    /// Categorical column as indices; non-categorical cells are skipped.
    pub fn category_column(&self, attr: usize) -> Vec<usize> {
        self.rows.iter().filter_map(|r| r[attr].as_cat()).collect()
    }

    /// Label indices for every row, when the schema designates a label.
    pub fn labels(&self) -> Option<Vec<usize>> {
        let idx = self.schema.label?;
        Some(self.rows.iter().map(|r| r[idx].as_cat().unwrap_or(0)).collect())
    }

    /// Rows at the given indices, in order.
    pub fn select(&self, indices: &[usize]) -> Table {
        Table {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Seeded sample of `n` distinct rows (all rows when `n >= n_rows`).
    pub fn sample_without_replacement(&self, n: usize, rng: &mut ChaCha8Rng) -> Table {
        let mut idx: Vec<usize> = (0..self.n_rows()).collect();
        idx.shuffle(rng);
        idx.truncate(n.min(self.n_rows()));
        self.select(&idx)
    }

    /// Split into train/validation/test on a 4:1:1 pattern.
    ///
    /// When a label is designated the split is stratified: within each label
    /// group of size `g`, `g/6` rows (rounded down) go to validation,
    /// another `g/6` to test and the remainder to train. Without a label the
    /// same rule applies to the table as a whole. Group order is shuffled
    /// with the seed first, so repeated calls with one seed agree.
    pub fn split_stratified(&self, seed: u64) -> Result<(Table, Table, Table), TableError> {
        if self.is_empty() {
            return Err(TableError::EmptyInput);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let groups: Vec<Vec<usize>> = match self.labels() {
            Some(labels) => {
                let k = self.schema.label_cardinality();
                let mut g = vec![Vec::new(); k.max(1)];
                for (i, &l) in labels.iter().enumerate() {
                    g[l].push(i);
                }
                g
            }
            None => vec![(0..self.n_rows()).collect()],
        };

        let (mut train_idx, mut valid_idx, mut test_idx) = (Vec::new(), Vec::new(), Vec::new());
        for mut group in groups {
            group.shuffle(&mut rng);
            let part = group.len() / 6;
            valid_idx.extend_from_slice(&group[..part]);
            test_idx.extend_from_slice(&group[part..2 * part]);
            train_idx.extend_from_slice(&group[2 * part..]);
        }
        if valid_idx.is_empty() || test_idx.is_empty() {
            return Err(TableError::TooFewRows);
        }
        train_idx.sort_unstable();
        valid_idx.sort_unstable();
        test_idx.sort_unstable();
        Ok((self.select(&train_idx), self.select(&valid_idx), self.select(&test_idx)))
    }

    /// Format a cell the way [`Table::write_csv`] would.
    pub fn format_cell(&self, row: usize, attr: usize) -> String {
        format_value(&self.rows[row][attr], &self.schema.attrs[attr].kind)
    }

    /// Write the table as a comma-separated file with a header row.
    pub fn write_csv(&self, path: &Path) -> Result<(), TableError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.schema.attrs.iter().map(|a| a.name.as_str()))?;
        for row in &self.rows {
            let rec: Vec<String> = row
                .iter()
                .zip(&self.schema.attrs)
                .map(|(v, a)| format_value(v, &a.kind))
                .collect();
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a comma-separated file against a declared schema. The header
    /// must match the schema's attribute names in order.
    pub fn load_csv(path: &Path, schema: &Schema) -> Result<Table, TableError> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let header: Vec<String> =
            r.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let expected: Vec<&str> = schema.attrs.iter().map(|a| a.name.as_str()).collect();
        if header != expected {
            return Err(TableError::HeaderMismatch {
                expected: expected.join(","),
                got: header.join(","),
            });
        }
        let cat_maps: Vec<Option<BTreeMap<&str, usize>>> = schema
            .attrs
            .iter()
            .map(|a| match &a.kind {
                AttrKind::Categorical { categories } => {
                    Some(categories.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect())
                }
                AttrKind::Numerical { .. } => None,
            })
            .collect();

        let mut table = Table::new(schema.clone());
        for (row_idx, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != schema.attr_count() {
                return Err(TableError::ArityMismatch {
                    row: row_idx,
                    expected: schema.attr_count(),
                    got: rec.len(),
                });
            }
            let mut row = Vec::with_capacity(rec.len());
            for (j, cell) in rec.iter().enumerate() {
                let cell = cell.trim();
                let meta = &schema.attrs[j];
                if cell.is_empty() {
                    return Err(TableError::MissingValue { row: row_idx, attr: meta.name.clone() });
                }
                match &cat_maps[j] {
                    None => {
                        let v: f64 = cell.parse().map_err(|_| TableError::ParseError {
                            row: row_idx,
                            attr: meta.name.clone(),
                            value: cell.to_string(),
                        })?;
                        row.push(Value::Num(v));
                    }
                    Some(map) => match map.get(cell) {
                        Some(&i) => row.push(Value::Cat(i)),
                        None => {
                            return Err(TableError::UnknownCategory {
                                row: row_idx,
                                attr: meta.name.clone(),
                                value: cell.to_string(),
                            })
                        }
                    },
                }
            }
            table.rows.push(row);
        }
        if table.is_empty() {
            return Err(TableError::EmptyInput);
        }
        Ok(table)
    }

    /// Read a comma-separated file, inferring the schema from the data:
    /// a column whose values all parse as numbers and exceed
    /// `distinct_threshold` distinct values becomes numerical (flagged
    /// discrete when every value is an integer); anything else becomes
    /// categorical with its observed values as sorted category names.
    pub fn load_csv_infer(path: &Path, distinct_threshold: usize) -> Result<Table, TableError> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut columns: Vec<Vec<String>> = vec![Vec::new(); header.len()];
        for (row_idx, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(TableError::ArityMismatch {
                    row: row_idx,
                    expected: header.len(),
                    got: rec.len(),
                });
            }
            for (j, cell) in rec.iter().enumerate() {
                let cell = cell.trim();
                if cell.is_empty() {
                    return Err(TableError::MissingValue {
                        row: row_idx,
                        attr: header[j].clone(),
                    });
                }
                columns[j].push(cell.to_string());
            }
        }
        if columns.is_empty() || columns[0].is_empty() {
            return Err(TableError::EmptyInput);
        }
        let schema = infer_schema(&header, &columns, distinct_threshold)?;

        let mut table = Table::new(schema.clone());
        let n = columns[0].len();
        // Transpose: `i` walks the inner (row) axis of every column at once.
        #[allow(clippy::needless_range_loop)]
        for i in 0..n {
            let mut row = Vec::with_capacity(header.len());
            for (j, meta) in schema.attrs.iter().enumerate() {
                let cell = &columns[j][i];
                match &meta.kind {
                    AttrKind::Numerical { .. } => row.push(Value::Num(cell.parse().unwrap())),
                    AttrKind::Categorical { categories } => {
                        let idx = categories.binary_search_by(|c| cmp_categories(c, cell)).unwrap();
                        row.push(Value::Cat(idx));
                    }
                }
            }
            table.rows.push(row);
        }
        Ok(table)
    }
}

fn format_value(v: &Value, kind: &AttrKind) -> String {
    match (v, kind) {
        (Value::Num(x), AttrKind::Numerical { discrete, .. }) => {
            if *discrete && x.fract() == 0.0 && x.abs() < 9.0e15 {
                format!("{}", *x as i64)
            } else {
                // Shortest representation that round-trips through parsing.
                format!("{x}")
            }
        }
        (Value::Cat(c), AttrKind::Categorical { categories }) => categories[*c].clone(),
        _ => String::new(),
    }
}

/// Category ordering used by inference: numeric when both sides parse as
/// numbers, lexicographic otherwise.
fn cmp_categories(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.partial_cmp(&y).unwrap_or(std::cmp::Ordering::Equal),
        _ => a.cmp(b),
    }
}

/// Infer attribute kinds from string columns (see [`Table::load_csv_infer`]).
pub fn infer_schema(
    names: &[String],
    columns: &[Vec<String>],
    distinct_threshold: usize,
) -> Result<Schema, TableError> {
    let mut attrs = Vec::with_capacity(names.len());
    for (name, col) in names.iter().zip(columns) {
        if col.is_empty() {
            return Err(TableError::EmptyInput);
        }
        let parsed: Option<Vec<f64>> = col.iter().map(|s| s.parse::<f64>().ok()).collect();
        let distinct: BTreeSet<&str> = col.iter().map(|s| s.as_str()).collect();
        let kind = match parsed {
            Some(values) if distinct.len() > distinct_threshold => {
                let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let discrete = values.iter().all(|v| v.fract() == 0.0);
                AttrKind::Numerical { min, max, discrete }
            }
            _ => {
                let mut categories: Vec<String> = distinct.into_iter().map(String::from).collect();
                categories.sort_by(|a, b| cmp_categories(a, b));
                AttrKind::Categorical { categories }
            }
        };
        attrs.push(AttributeMeta { name: name.clone(), kind });
    }
    Ok(Schema::new(attrs))
}

// ---- schema declaration files ------------------------------------------

#[derive(Serialize, Deserialize)]
struct SchemaFileAttr {
    name: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    discrete: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    categories: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct SchemaFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, rename = "attribute")]
    attributes: Vec<SchemaFileAttr>,
}

/// Read a schema declaration file (TOML key-value format with one
/// `[[attribute]]` block per column and an optional top-level `label`).
pub fn read_schema(path: &Path) -> Result<Schema, TableError> {
    let text = std::fs::read_to_string(path)?;
    let file: SchemaFile =
        toml::from_str(&text).map_err(|e| TableError::SchemaFormat(e.to_string()))?;
    let mut attrs = Vec::with_capacity(file.attributes.len());
    for a in &file.attributes {
        let kind = match a.kind.as_str() {
            "numerical" => AttrKind::Numerical {
                min: a.min.ok_or_else(|| missing_key(&a.name, "min"))?,
                max: a.max.ok_or_else(|| missing_key(&a.name, "max"))?,
                discrete: a.discrete.unwrap_or(false),
            },
            "categorical" => AttrKind::Categorical {
                categories: a.categories.clone().ok_or_else(|| missing_key(&a.name, "categories"))?,
            },
            other => {
                return Err(TableError::SchemaFormat(format!(
                    "attribute '{}': unknown kind '{other}'",
                    a.name
                )))
            }
        };
        attrs.push(AttributeMeta { name: a.name.clone(), kind });
    }
    let schema = Schema::new(attrs);
    match &file.label {
        Some(name) => schema.with_label(name),
        None => Ok(schema),
    }
}

fn missing_key(attr: &str, key: &str) -> TableError {
    TableError::SchemaFormat(format!("attribute '{attr}': missing '{key}'"))
}

/// Write a schema declaration file readable by [`read_schema`].
pub fn write_schema(schema: &Schema, path: &Path) -> Result<(), TableError> {
    let file = SchemaFile {
        label: schema.label.map(|i| schema.attrs[i].name.clone()),
        attributes: schema
            .attrs
            .iter()
            .map(|a| match &a.kind {
                AttrKind::Numerical { min, max, discrete } => SchemaFileAttr {
                    name: a.name.clone(),
                    kind: "numerical".into(),
                    min: Some(*min),
                    max: Some(*max),
                    discrete: Some(*discrete),
                    categories: None,
                },
                AttrKind::Categorical { categories } => SchemaFileAttr {
                    name: a.name.clone(),
                    kind: "categorical".into(),
                    min: None,
                    max: None,
                    discrete: None,
                    categories: Some(categories.clone()),
                },
            })
            .collect(),
    };
    let mut text = String::new();
    if let Some(label) = &file.label {
        let _ = writeln!(text, "label = {:?}\n", label);
    }
    for a in &file.attributes {
        let body = toml::to_string(a).map_err(|e| TableError::SchemaFormat(e.to_string()))?;
        let _ = writeln!(text, "[[attribute]]\n{body}");
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy_schema() -> Schema {
        Schema::new(vec![
            AttributeMeta {
                name: "age".into(),
                kind: AttrKind::Numerical { min: 0.0, max: 100.0, discrete: true },
            },
            AttributeMeta {
                name: "score".into(),
                kind: AttrKind::Numerical { min: -1.0, max: 1.0, discrete: false },
            },
            AttributeMeta {
                name: "label".into(),
                kind: AttrKind::Categorical { categories: vec!["no".into(), "yes".into()] },
            },
        ])
        .with_label("label")
        .unwrap()
    }

    fn toy_table(n: usize) -> Table {
        let mut t = Table::new(toy_schema());
        for i in 0..n {
            t.push_row(vec![
                Value::Num(20.0 + (i % 50) as f64),
                Value::Num(-1.0 + 2.0 * (i as f64 / n as f64)),
                Value::Cat(i % 2),
            ])
            .unwrap();
        }
        t
    }

    #[test]
    fn push_row_validates_arity_and_categories() {
        let mut t = Table::new(toy_schema());
        assert!(matches!(
            t.push_row(vec![Value::Num(1.0)]),
            Err(TableError::ArityMismatch { .. })
        ));
        assert!(matches!(
            t.push_row(vec![Value::Num(1.0), Value::Num(0.0), Value::Cat(7)]),
            Err(TableError::UnknownCategory { .. })
        ));
        assert!(matches!(
            t.push_row(vec![Value::Cat(0), Value::Num(0.0), Value::Cat(1)]),
            Err(TableError::ParseError { .. })
        ));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let t = toy_table(97);
        t.write_csv(&path).unwrap();
        let back = Table::load_csv(&path, t.schema()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn csv_header_and_cells_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "age,wrong,label\n1,0.5,yes\n").unwrap();
        assert!(matches!(
            Table::load_csv(&path, &toy_schema()),
            Err(TableError::HeaderMismatch { .. })
        ));

        std::fs::write(&path, "age,score,label\nabc,0.5,yes\n").unwrap();
        assert!(matches!(
            Table::load_csv(&path, &toy_schema()),
            Err(TableError::ParseError { .. })
        ));

        std::fs::write(&path, "age,score,label\n40,0.5,maybe\n").unwrap();
        assert!(matches!(
            Table::load_csv(&path, &toy_schema()),
            Err(TableError::UnknownCategory { .. })
        ));

        std::fs::write(&path, "age,score,label\n40,,yes\n").unwrap();
        assert!(matches!(
            Table::load_csv(&path, &toy_schema()),
            Err(TableError::MissingValue { .. })
        ));

        std::fs::write(&path, "age,score,label\n").unwrap();
        assert!(matches!(Table::load_csv(&path, &toy_schema()), Err(TableError::EmptyInput)));
    }

    #[test]
    fn inference_splits_numeric_and_categorical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("infer.csv");
        let mut text = String::from("num,small,word\n");
        for i in 0..30 {
            text.push_str(&format!("{}.5,{},{}\n", i, i % 3, if i % 2 == 0 { "a" } else { "b" }));
        }
        std::fs::write(&path, text).unwrap();
        let t = Table::load_csv_infer(&path, DEFAULT_DISTINCT_THRESHOLD).unwrap();
        let s = t.schema();
        assert!(matches!(s.attrs[0].kind, AttrKind::Numerical { discrete: false, .. }));
        // 3 distinct numeric values: below threshold, categorical.
        assert_eq!(
            s.attrs[1].kind,
            AttrKind::Categorical { categories: vec!["0".into(), "1".into(), "2".into()] }
        );
        assert_eq!(
            s.attrs[2].kind,
            AttrKind::Categorical { categories: vec!["a".into(), "b".into()] }
        );
        if let AttrKind::Numerical { min, max, .. } = s.attrs[0].kind {
            assert_eq!(min, 0.5);
            assert_eq!(max, 29.5);
        }
    }

    #[test]
    fn inference_marks_integer_columns_discrete() {
        let names = vec!["x".to_string()];
        let col: Vec<String> = (0..40).map(|i| i.to_string()).collect();
        let s = infer_schema(&names, &[col], DEFAULT_DISTINCT_THRESHOLD).unwrap();
        assert_eq!(s.attrs[0].kind, AttrKind::Numerical { min: 0.0, max: 39.0, discrete: true });
    }

    #[test]
    fn stratified_split_follows_4_1_1() {
        let t = toy_table(600);
        let (train, valid, test) = t.split_stratified(11).unwrap();
        assert_eq!(train.n_rows(), 400);
        assert_eq!(valid.n_rows(), 100);
        assert_eq!(test.n_rows(), 100);
        // Stratification: each label appears 300 times; each part keeps the
        // same label balance.
        for part in [&train, &valid, &test] {
            let labels = part.labels().unwrap();
            let ones = labels.iter().filter(|&&l| l == 1).count();
            assert_eq!(ones * 2, labels.len());
        }
        // No row lost or duplicated.
        assert_eq!(train.n_rows() + valid.n_rows() + test.n_rows(), t.n_rows());
    }

    #[test]
    fn split_is_seed_deterministic() {
        let t = toy_table(120);
        let a = t.split_stratified(5).unwrap();
        let b = t.split_stratified(5).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.2, b.2);
        let c = t.split_stratified(6).unwrap();
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn tiny_tables_cannot_split() {
        let t = toy_table(5);
        assert!(matches!(t.split_stratified(1), Err(TableError::TooFewRows)));
    }

    #[test]
    fn schema_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("schema.toml");
        let s = toy_schema();
        write_schema(&s, &path).unwrap();
        let back = read_schema(&path).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn schema_file_rejects_bad_kind() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("schema.toml");
        std::fs::write(&path, "[[attribute]]\nname = \"x\"\nkind = \"text\"\n").unwrap();
        assert!(matches!(read_schema(&path), Err(TableError::SchemaFormat(_))));
    }

    #[test]
    fn discrete_numbers_are_written_without_decimals() {
        let t = toy_table(3);
        assert_eq!(t.format_cell(0, 0), "20");
        assert!(t.format_cell(0, 1).contains('-'));
    }
}
