//! Aggregate-query accuracy: a seeded workload of count/avg/sum queries
//! with conjunctive predicates, executed against the real table, the
//! synthetic table, and small row samples of the real table as a baseline.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::table::{AttrKind, Schema, Table};

use super::EvalError;

pub const DEFAULT_SAMPLE_FRAC: f64 = 0.01;
pub const DEFAULT_DRAWS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    Count,
    Avg,
    Sum,
}

/// One conjunct of a query's row filter, addressed by attribute name so
/// workloads stay readable in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Predicate {
    Equals { attr: String, category: String },
    /// Inclusive numeric interval.
    Range { attr: String, lo: f64, hi: f64 },
}

/// An aggregate query: `aggregate(target) WHERE predicates [GROUP BY
/// group_by]`. `target` is absent exactly for counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub aggregate: Aggregate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub predicates: Vec<Predicate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_by: Option<String>,
}

/// Result of one query execution.
#[derive(Clone, Debug, PartialEq)]
pub enum QueryAnswer {
    /// Global aggregate; `None` marks an average over an empty selection.
    Scalar(Option<f64>),
    /// Per-group aggregates keyed by the grouping category's name. Groups
    /// only appear when at least one row selects into them, so every value
    /// is defined.
    Groups(BTreeMap<String, f64>),
}

/// A seeded random workload over the schema: aggregates uniform over
/// count/avg/sum (count when no numerical attribute exists), one to three
/// predicates over distinct attributes — `Equals` on a random category for
/// categorical attributes, an inclusive interval covering at least 10% of
/// the declared range for numerical ones — and, with probability one half
/// when a categorical attribute exists, a random grouping attribute.
pub fn gen_queries(schema: &Schema, n: usize, seed: u64) -> Result<Vec<QuerySpec>, EvalError> {
    if schema.attr_count() == 0 {
        return Err(EvalError::EmptySchema);
    }
    let numeric: Vec<usize> =
        (0..schema.attr_count()).filter(|&i| schema.attrs[i].kind.is_numerical()).collect();
    let categorical: Vec<usize> =
        (0..schema.attr_count()).filter(|&i| !schema.attrs[i].kind.is_numerical()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let aggregate = if numeric.is_empty() {
            Aggregate::Count
        } else {
            match rng.random_range(0..3) {
                0 => Aggregate::Count,
                1 => Aggregate::Avg,
                _ => Aggregate::Sum,
            }
        };
        let target = match aggregate {
            Aggregate::Count => None,
            _ => Some(schema.attrs[numeric[rng.random_range(0..numeric.len())]].name.clone()),
        };
        let wanted = rng.random_range(1..=3usize).min(schema.attr_count());
        let chosen = rand::seq::index::sample(&mut rng, schema.attr_count(), wanted);
        let mut predicates = Vec::with_capacity(wanted);
        for attr_idx in chosen {
            let attr = &schema.attrs[attr_idx];
            let pred = match &attr.kind {
                AttrKind::Categorical { categories } => Predicate::Equals {
                    attr: attr.name.clone(),
                    category: categories[rng.random_range(0..categories.len())].clone(),
                },
                AttrKind::Numerical { min, max, .. } => {
                    let span = max - min;
                    let width = span * rng.random_range(0.1..=1.0);
                    let slack = span - width;
                    let lo = min + if slack > 0.0 { rng.random_range(0.0..=slack) } else { 0.0 };
                    Predicate::Range { attr: attr.name.clone(), lo, hi: lo + width }
                }
            };
            predicates.push(pred);
        }
        let group_by = if !categorical.is_empty() && rng.random_bool(0.5) {
            Some(schema.attrs[categorical[rng.random_range(0..categorical.len())]].name.clone())
        } else {
            None
        };
        out.push(QuerySpec { aggregate, target, predicates, group_by });
    }
    Ok(out)
}

enum CompiledPred {
    /// `cat` is `None` when the named category is absent from this table's
    /// domain; such a predicate selects nothing.
    CatEq { attr: usize, cat: Option<usize> },
    NumRange { attr: usize, lo: f64, hi: f64 },
}

fn resolve(schema: &Schema, name: &str) -> Result<usize, EvalError> {
    schema.find(name).ok_or_else(|| EvalError::Query(format!("unknown attribute '{name}'")))
}

/// Run one query: keep the rows satisfying every predicate, then aggregate
/// globally or per group. An empty selection yields 0 for count and sum and
/// the undefined marker for avg.
pub fn exec_query(table: &Table, q: &QuerySpec) -> Result<QueryAnswer, EvalError> {
    let schema = table.schema();
    let mut compiled = Vec::with_capacity(q.predicates.len());
    for p in &q.predicates {
        compiled.push(match p {
            Predicate::Equals { attr, category } => {
                let idx = resolve(schema, attr)?;
                let AttrKind::Categorical { categories } = &schema.attrs[idx].kind else {
                    return Err(EvalError::Query(format!(
                        "equality predicate on numerical attribute '{attr}'"
                    )));
                };
                CompiledPred::CatEq { attr: idx, cat: categories.iter().position(|c| c == category) }
            }
            Predicate::Range { attr, lo, hi } => {
                let idx = resolve(schema, attr)?;
                if !schema.attrs[idx].kind.is_numerical() {
                    return Err(EvalError::Query(format!(
                        "range predicate on categorical attribute '{attr}'"
                    )));
                }
                CompiledPred::NumRange { attr: idx, lo: *lo, hi: *hi }
            }
        });
    }
    let target = match (&q.aggregate, &q.target) {
        (Aggregate::Count, _) => None,
        (_, Some(name)) => {
            let idx = resolve(schema, name)?;
            if !schema.attrs[idx].kind.is_numerical() {
                return Err(EvalError::Query(format!(
                    "aggregate target '{name}' is not numerical"
                )));
            }
            Some(idx)
        }
        (_, None) => return Err(EvalError::Query("avg/sum need a target attribute".into())),
    };
    let group = match &q.group_by {
        Some(name) => {
            let idx = resolve(schema, name)?;
            let AttrKind::Categorical { categories } = &schema.attrs[idx].kind else {
                return Err(EvalError::Query(format!("grouping attribute '{name}' is numerical")));
            };
            Some((idx, categories.clone()))
        }
        None => None,
    };

    // (sum, count) accumulators, one per group or a single global one.
    let mut global = (0.0f64, 0.0f64);
    let mut grouped: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    'rows: for row in table.rows() {
        for p in &compiled {
            match *p {
                CompiledPred::CatEq { attr, cat } => {
                    if cat.is_none() || row[attr].as_cat() != cat {
                        continue 'rows;
                    }
                }
                CompiledPred::NumRange { attr, lo, hi } => {
                    let v = row[attr].as_num().unwrap_or(f64::NAN);
                    if !(lo..=hi).contains(&v) {
                        continue 'rows;
                    }
                }
            }
        }
        let contribution = target.map_or(0.0, |t| row[t].as_num().unwrap_or(0.0));
        match &group {
            Some((idx, _)) => {
                let g = row[*idx].as_cat().unwrap_or(0);
                let slot = grouped.entry(g).or_insert((0.0, 0.0));
                slot.0 += contribution;
                slot.1 += 1.0;
            }
            None => {
                global.0 += contribution;
                global.1 += 1.0;
            }
        }
    }

    let finish = |(sum, cnt): (f64, f64)| -> Option<f64> {
        match q.aggregate {
            Aggregate::Count => Some(cnt),
            Aggregate::Sum => Some(sum),
            Aggregate::Avg => (cnt > 0.0).then_some(sum / cnt),
        }
    };
    Ok(match group {
        Some((_, categories)) => QueryAnswer::Groups(
            grouped
                .into_iter()
                .map(|(g, acc)| {
                    // Selected groups hold at least one row, so the
                    // aggregate is always defined.
                    (categories[g].clone(), finish(acc).unwrap())
                })
                .collect(),
        ),
        None => QueryAnswer::Scalar(finish(global)),
    })
}

/// Workload-level comparison of synthetic data against small-sample
/// estimation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AqpResult {
    /// Mean absolute gap between the synthetic and the sampling errors.
    pub diff: f64,
    /// Mean relative error of the scaled sample answers.
    pub mean_e: f64,
    /// Mean relative error of the synthetic answers.
    pub mean_e_prime: f64,
    /// Queries with a defined answer on the real table.
    pub retained: usize,
}

/// Compare synthetic-table query errors against sample-estimate errors.
///
/// Per query, the exact answer `a` comes from the real table. The synthetic
/// error is `|answer(fake) − a| / max(|a|, 1)`; the sampling error averages
/// the same relative error over `draws` row samples of fraction `frac`
/// drawn once up front and reused for every query, with count and sum
/// answers scaled by `1/frac` and averages left as computed. Grouped
/// queries average over the groups of the real answer, charging error 1 for
/// groups the other side is missing; an undefined answer on the other side
/// also counts as error 1. Queries whose real answer is undefined (or that
/// select no group) are skipped. The headline number is the mean absolute
/// difference between the two errors over the retained queries.
pub fn utility_aqp(
    real: &Table,
    fake: &Table,
    workload: &[QuerySpec],
    frac: f64,
    draws: usize,
    seed: u64,
) -> Result<AqpResult, EvalError> {
    if workload.is_empty() {
        return Err(EvalError::EmptyWorkload);
    }
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(EvalError::Query(format!("sample fraction {frac} outside (0, 1]")));
    }
    if draws == 0 {
        return Err(EvalError::Query("at least one sample draw is required".into()));
    }
    if real.is_empty() {
        return Err(EvalError::EmptyTable);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = ((frac * real.n_rows() as f64).round() as usize).clamp(1, real.n_rows());
    let samples: Vec<Table> =
        (0..draws).map(|_| real.sample_without_replacement(size, &mut rng)).collect();
    let scale_of = |agg: Aggregate| match agg {
        Aggregate::Count | Aggregate::Sum => 1.0 / frac,
        Aggregate::Avg => 1.0,
    };

    let mut retained = 0usize;
    let (mut sum_diff, mut sum_e, mut sum_ep) = (0.0, 0.0, 0.0);
    for q in workload {
        let scale = scale_of(q.aggregate);
        let (e, e_prime) = match exec_query(real, q)? {
            QueryAnswer::Scalar(None) => continue,
            QueryAnswer::Scalar(Some(a)) => {
                let fake_ans = match exec_query(fake, q)? {
                    QueryAnswer::Scalar(v) => v,
                    QueryAnswer::Groups(_) => unreachable!("same query, same shape"),
                };
                let e_prime = scalar_error(fake_ans, 1.0, a);
                let mut e = 0.0;
                for s in &samples {
                    let ans = match exec_query(s, q)? {
                        QueryAnswer::Scalar(v) => v,
                        QueryAnswer::Groups(_) => unreachable!("same query, same shape"),
                    };
                    e += scalar_error(ans, scale, a);
                }
                (e / draws as f64, e_prime)
            }
            QueryAnswer::Groups(real_groups) => {
                if real_groups.is_empty() {
                    continue;
                }
                let fake_groups = match exec_query(fake, q)? {
                    QueryAnswer::Groups(g) => g,
                    QueryAnswer::Scalar(_) => unreachable!("same query, same shape"),
                };
                let e_prime = group_error(&fake_groups, 1.0, &real_groups);
                let mut e = 0.0;
                for s in &samples {
                    let ans = match exec_query(s, q)? {
                        QueryAnswer::Groups(g) => g,
                        QueryAnswer::Scalar(_) => unreachable!("same query, same shape"),
                    };
                    e += group_error(&ans, scale, &real_groups);
                }
                (e / draws as f64, e_prime)
            }
        };
        retained += 1;
        sum_diff += (e - e_prime).abs();
        sum_e += e;
        sum_ep += e_prime;
    }
    let denom = retained.max(1) as f64;
    Ok(AqpResult {
        diff: sum_diff / denom,
        mean_e: sum_e / denom,
        mean_e_prime: sum_ep / denom,
        retained,
    })
}

fn relative_error(x: f64, a: f64) -> f64 {
    (x - a).abs() / a.abs().max(1.0)
}

fn scalar_error(ans: Option<f64>, scale: f64, a: f64) -> f64 {
    match ans {
        Some(x) => relative_error(x * scale, a),
        None => 1.0,
    }
}

fn group_error(ans: &BTreeMap<String, f64>, scale: f64, real: &BTreeMap<String, f64>) -> f64 {
    let total: f64 = real
        .iter()
        .map(|(name, &a)| ans.get(name).map_or(1.0, |&x| relative_error(x * scale, a)))
        .sum();
    total / real.len() as f64
}
