//! Disclosure-risk metrics: how often synthetic rows land next to real
//! ones, and how far real rows sit from their nearest synthetic neighbor.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::table::{AttrKind, Table, Value};

use super::{schema_compatible, EvalError};

pub const DEFAULT_HIT_SAMPLE: usize = 5000;
pub const DEFAULT_DCR_SAMPLE: usize = 3000;

/// How the per-row match counts aggregate into the hitting rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HitMode {
    /// Mean, over sampled synthetic rows, of the proportion of real rows
    /// the synthetic row matches.
    MeanProportion,
    /// Fraction of sampled synthetic rows that match at least one real row.
    AnyHit,
}

/// Per-attribute closeness thresholds: categorical cells must be equal,
/// numerical cells must sit within 1/30 of the real data's value range.
fn match_thresholds(real: &Table) -> Vec<Option<f64>> {
    let schema = real.schema();
    (0..schema.attr_count())
        .map(|i| match schema.attrs[i].kind {
            AttrKind::Categorical { .. } => None,
            AttrKind::Numerical { .. } => {
                let col = real.numeric_column(i);
                let min = col.iter().copied().fold(f64::INFINITY, f64::min);
                let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Some((max - min) / 30.0)
            }
        })
        .collect()
}

fn rows_match(a: &[Value], b: &[Value], thresholds: &[Option<f64>]) -> bool {
    a.iter().zip(b).zip(thresholds).all(|((x, y), t)| match t {
        None => x.as_cat() == y.as_cat(),
        Some(eps) => match (x.as_num(), y.as_num()) {
            (Some(u), Some(v)) => (u - v).abs() <= *eps,
            _ => false,
        },
    })
}

/// How much of the real table a sampled synthetic row "hits": a hit means
/// every categorical cell is equal and every numerical cell lies within the
/// real attribute's range divided by 30. Samples `min(n, |fake|)` synthetic
/// rows without replacement.
pub fn hitting_rate(
    real: &Table,
    fake: &Table,
    n: usize,
    mode: HitMode,
    seed: u64,
) -> Result<f64, EvalError> {
    if !schema_compatible(real.schema(), fake.schema()) {
        return Err(EvalError::SchemaMismatch("hitting-rate inputs".into()));
    }
    if real.is_empty() {
        return Err(EvalError::EmptyTable);
    }
    if fake.is_empty() {
        return Err(EvalError::EmptyFake);
    }
    let thresholds = match_thresholds(real);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = fake.sample_without_replacement(n.max(1), &mut rng);
    let total_real = real.n_rows() as f64;
    let mut acc = 0.0;
    for srow in sample.rows() {
        let hits = real.rows().iter().filter(|rrow| rows_match(srow, rrow, &thresholds)).count();
        acc += match mode {
            HitMode::MeanProportion => hits as f64 / total_real,
            HitMode::AnyHit => f64::from(hits > 0),
        };
    }
    Ok(acc / sample.n_rows() as f64)
}

/// Mean distance from sampled real rows to their closest synthetic row.
///
/// Distances are Euclidean over attribute-wise terms: numerical cells are
/// min-max normalized with bounds taken from the real data, categorical
/// cells contribute 0 when equal and 1 otherwise. Samples `min(n, |real|)`
/// real rows without replacement.
pub fn dcr(real: &Table, fake: &Table, n: usize, seed: u64) -> Result<f64, EvalError> {
    if !schema_compatible(real.schema(), fake.schema()) {
        return Err(EvalError::SchemaMismatch("distance inputs".into()));
    }
    if fake.is_empty() {
        return Err(EvalError::EmptyFake);
    }
    if real.is_empty() {
        return Err(EvalError::EmptyTable);
    }
    let schema = real.schema();
    let bounds: Vec<Option<(f64, f64)>> = (0..schema.attr_count())
        .map(|i| {
            schema.attrs[i].kind.is_numerical().then(|| {
                let col = real.numeric_column(i);
                let min = col.iter().copied().fold(f64::INFINITY, f64::min);
                let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (min, max)
            })
        })
        .collect();
    let norm = |v: f64, (min, max): (f64, f64)| -> f64 {
        if max > min {
            (v - min) / (max - min)
        } else {
            0.0
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = real.sample_without_replacement(n.max(1), &mut rng);
    let mut total = 0.0;
    for rrow in sample.rows() {
        let mut best = f64::INFINITY;
        for frow in fake.rows() {
            let mut d2 = 0.0;
            for (i, b) in bounds.iter().enumerate() {
                let term = match b {
                    Some(bounds) => {
                        let u = norm(rrow[i].as_num().unwrap_or(0.0), *bounds);
                        let v = norm(frow[i].as_num().unwrap_or(0.0), *bounds);
                        u - v
                    }
                    None => f64::from(rrow[i].as_cat() != frow[i].as_cat()),
                };
                d2 += term * term;
            }
            best = best.min(d2);
        }
        total += best.sqrt();
    }
    Ok(total / sample.n_rows() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{AttributeMeta, Schema};
    use rand::Rng;

    fn two_attr_schema() -> Schema {
        Schema::new(vec![
            AttributeMeta {
                name: "v".into(),
                kind: AttrKind::Numerical { min: 0.0, max: 100.0, discrete: false },
            },
            AttributeMeta {
                name: "c".into(),
                kind: AttrKind::Categorical { categories: vec!["a".into(), "b".into()] },
            },
        ])
    }

    fn table_of(rows: &[(f64, usize)]) -> Table {
        let mut t = Table::new(two_attr_schema());
        for &(v, c) in rows {
            t.push_row(vec![Value::Num(v), Value::Cat(c)]).unwrap();
        }
        t
    }

    #[test]
    fn self_match_rates_and_shifted_misses() {
        // Ten rows spaced farther apart than range/30: each synthetic row
        // matches exactly itself.
        let rows: Vec<(f64, usize)> = (0..10).map(|i| (i as f64 * 10.0, i % 2)).collect();
        let real = table_of(&rows);
        let rate =
            hitting_rate(&real, &real, DEFAULT_HIT_SAMPLE, HitMode::MeanProportion, 1).unwrap();
        assert!((rate - 0.1).abs() < 1e-12, "rate {rate}");
        assert_eq!(hitting_rate(&real, &real, 5000, HitMode::AnyHit, 1).unwrap(), 1.0);

        // A shift beyond range/30 (90/30 = 3) on every row misses entirely.
        let shifted: Vec<(f64, usize)> = rows.iter().map(|&(v, c)| (v + 4.0, c)).collect();
        let fake = table_of(&shifted);
        assert_eq!(hitting_rate(&real, &fake, 5000, HitMode::MeanProportion, 1).unwrap(), 0.0);
        assert_eq!(hitting_rate(&real, &fake, 5000, HitMode::AnyHit, 1).unwrap(), 0.0);
    }

    #[test]
    fn modes_differ_when_matches_concentrate() {
        // One synthetic row equal to a real row, the rest far away: the
        // any-hit rate sees the single match, the mean proportion dilutes it.
        let real = table_of(&[(0.0, 0), (50.0, 1), (100.0, 0)]);
        let fake = table_of(&[(0.0, 0), (200.0, 1)]);
        let mean = hitting_rate(&real, &fake, 10, HitMode::MeanProportion, 3).unwrap();
        let any = hitting_rate(&real, &fake, 10, HitMode::AnyHit, 3).unwrap();
        assert!((mean - (1.0 / 3.0) / 2.0).abs() < 1e-12, "mean {mean}");
        assert_eq!(any, 0.5);
    }

    #[test]
    fn rates_agree_with_a_quadratic_oracle_on_random_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for round in 0..10 {
            let real_rows: Vec<(f64, usize)> = (0..30)
                .map(|_| (rng.random_range(0.0..100.0), rng.random_range(0..2)))
                .collect();
            let fake_rows: Vec<(f64, usize)> = (0..25)
                .map(|_| (rng.random_range(0.0..100.0), rng.random_range(0..2)))
                .collect();
            let real = table_of(&real_rows);
            let fake = table_of(&fake_rows);

            // Oracle: every synthetic row against every real row.
            let min = real_rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
            let max = real_rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
            let eps = (max - min) / 30.0;
            let mut mean_oracle = 0.0;
            let mut any_oracle = 0.0;
            for f in &fake_rows {
                let hits = real_rows
                    .iter()
                    .filter(|r| (f.0 - r.0).abs() <= eps && f.1 == r.1)
                    .count();
                mean_oracle += hits as f64 / real_rows.len() as f64;
                any_oracle += f64::from(hits > 0);
            }
            mean_oracle /= fake_rows.len() as f64;
            any_oracle /= fake_rows.len() as f64;

            // n exceeds |fake|, so sampling collects every synthetic row.
            let mean =
                hitting_rate(&real, &fake, 999, HitMode::MeanProportion, round).unwrap();
            let any = hitting_rate(&real, &fake, 999, HitMode::AnyHit, round).unwrap();
            assert!((mean - mean_oracle).abs() < 1e-12);
            assert!((any - any_oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn closest_distances_match_hand_cases_and_the_oracle() {
        let real = table_of(&[(0.0, 0), (50.0, 1), (100.0, 0)]);
        assert_eq!(dcr(&real, &real, 3000, 1).unwrap(), 0.0);

        // Same number, different category: distance exactly 1.
        let one_real = table_of(&[(42.0, 0)]);
        let one_fake = table_of(&[(42.0, 1)]);
        assert_eq!(dcr(&one_real, &one_fake, 3000, 1).unwrap(), 1.0);

        // 4 real x 3 fake rows against an exhaustive oracle.
        let real = table_of(&[(0.0, 0), (30.0, 1), (60.0, 0), (90.0, 1)]);
        let fake = table_of(&[(10.0, 0), (55.0, 1), (90.0, 0)]);
        let range = 90.0;
        let mut oracle = 0.0;
        for r in [(0.0, 0), (30.0, 1), (60.0, 0), (90.0, 1)] {
            let mut best = f64::INFINITY;
            for f in [(10.0, 0), (55.0, 1), (90.0, 0)] {
                let dn = (r.0 - f.0) / range;
                let dc = f64::from(r.1 != f.1);
                best = best.min((dn * dn + dc * dc).sqrt());
            }
            oracle += best;
        }
        oracle /= 4.0;
        let got = dcr(&real, &fake, 3000, 1).unwrap();
        assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
        assert!(got > 0.0);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let real = table_of(&[(1.0, 0)]);
        let empty = Table::new(two_attr_schema());
        assert!(matches!(dcr(&real, &empty, 10, 0), Err(EvalError::EmptyFake)));
        assert!(matches!(
            hitting_rate(&real, &empty, 10, HitMode::AnyHit, 0),
            Err(EvalError::EmptyFake)
        ));
        assert!(matches!(dcr(&empty, &real, 10, 0), Err(EvalError::EmptyTable)));

        let other = Table::new(Schema::new(vec![AttributeMeta {
            name: "z".into(),
            kind: AttrKind::Numerical { min: 0.0, max: 1.0, discrete: false },
        }]));
        assert!(matches!(
            hitting_rate(&real, &other, 10, HitMode::AnyHit, 0),
            Err(EvalError::SchemaMismatch(_))
        ));
    }
}
