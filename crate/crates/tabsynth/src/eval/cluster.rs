//! K-means clustering agreement between real and synthetic tables, scored
//! by normalized mutual information against the label attribute.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::table::Table;

use super::{schema_compatible, EvalError, FeaturePipeline};

/// Cluster assignments from seeded k-means++ initialization followed by
/// Lloyd iterations, run until the assignments stop changing or 300 rounds.
/// Distance ties go to the lowest center index and a cluster that loses all
/// its points keeps its previous center, so runs are deterministic.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<usize>, EvalError> {
    let n = points.len();
    if k == 0 || n < k {
        return Err(EvalError::TooFewPoints { n, k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++: spread the initial centers by squared-distance sampling.
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n)].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            chosen
        } else {
            // All points coincide with a center; any choice is equivalent.
            rng.random_range(0..n)
        };
        centers.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, centers.last().unwrap()));
        }
    }

    let mut assign = vec![0usize; n];
    for _ in 0..300 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = dist2(p, &centers[0]);
            for (c, center) in centers.iter().enumerate().skip(1) {
                let d = dist2(p, center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            counts[assign[i]] += 1;
            for (s, v) in sums[assign[i]].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                continue; // empty cluster keeps its previous center
            }
            for (slot, s) in centers[c].iter_mut().zip(&sums[c]) {
                *slot = s / counts[c] as f64;
            }
        }
    }
    Ok(assign)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Normalized mutual information `I(A;B) / sqrt(H(A) H(B))` with natural
/// logarithms. Two trivial partitions score 1, a trivial partition against
/// an informative one scores 0, and identical partitions score 1.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Ok(1.0);
    }
    let n = a.len() as f64;
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut joint = vec![vec![0.0; kb]; ka];
    let mut ca = vec![0.0; ka];
    let mut cb = vec![0.0; kb];
    for (&x, &y) in a.iter().zip(b) {
        joint[x][y] += 1.0;
        ca[x] += 1.0;
        cb[y] += 1.0;
    }
    let h = |counts: &[f64]| -> f64 {
        counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| {
                let p = c / n;
                -p * p.ln()
            })
            .sum()
    };
    let (ha, hb) = (h(&ca), h(&cb));
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    let mut info = 0.0;
    for (x, row) in joint.iter().enumerate() {
        for (y, &c) in row.iter().enumerate() {
            if c > 0.0 {
                let p = c / n;
                info += p * (p * n * n / (ca[x] * cb[y])).ln();
            }
        }
    }
    Ok((info / (ha * hb).sqrt()).clamp(0.0, 1.0))
}

/// Absolute difference between the two tables' clustering quality: each
/// table is clustered on its own encoded features (label excluded) with
/// `k` = the label count, and scored by NMI against its own labels.
pub fn utility_clustering(real: &Table, fake: &Table, seed: u64) -> Result<f64, EvalError> {
    if !schema_compatible(real.schema(), fake.schema()) {
        return Err(EvalError::SchemaMismatch("clustering inputs".into()));
    }
    let k = real.schema().label_cardinality();
    if k == 0 {
        return Err(EvalError::NoLabel);
    }
    let score = |t: &Table| -> Result<f64, EvalError> {
        let labels = t.labels().ok_or(EvalError::NoLabel)?;
        let features = FeaturePipeline::fit(t)?.transform(t);
        let assign = kmeans(&features, k, seed)?;
        nmi(&assign, &labels)
    };
    Ok((score(real)? - score(fake)?).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{AttrKind, AttributeMeta, Schema, Value};

    fn labeled_points(points: &[(f64, f64, usize)]) -> Table {
        let schema = Schema::new(vec![
            AttributeMeta {
                name: "x".into(),
                kind: AttrKind::Numerical { min: -10.0, max: 10.0, discrete: false },
            },
            AttributeMeta {
                name: "y".into(),
                kind: AttrKind::Numerical { min: -10.0, max: 10.0, discrete: false },
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

    #[test]
    fn one_cluster_takes_everything_and_tiny_inputs_error() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![3.0, 1.0]];
        assert_eq!(kmeans(&pts, 1, 0).unwrap(), vec![0, 0, 0]);
        assert!(matches!(kmeans(&pts, 4, 0), Err(EvalError::TooFewPoints { n: 3, k: 4 })));
        assert!(matches!(kmeans(&pts, 0, 0), Err(EvalError::TooFewPoints { .. })));
    }

    #[test]
    fn far_blobs_split_cleanly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for i in 0..60 {
            let side = i % 2;
            let c = if side == 0 { -5.0 } else { 5.0 };
            pts.push(vec![c + rng.random_range(-0.3..0.3), c + rng.random_range(-0.3..0.3)]);
            truth.push(side);
        }
        let assign = kmeans(&pts, 2, 9).unwrap();
        assert_eq!(nmi(&assign, &truth).unwrap(), 1.0);
    }

    #[test]
    fn distinct_points_fill_every_cluster_when_k_equals_n() {
        let pts = vec![vec![0.0], vec![10.0], vec![20.0], vec![30.0]];
        let assign = kmeans(&pts, 4, 3).unwrap();
        let mut seen = assign.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 4, "assignments {assign:?} reuse a cluster");
    }

    #[test]
    fn information_score_matches_hand_computed_cases() {
        assert_eq!(nmi(&[0, 1, 2, 0], &[0, 1, 2, 0]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 0, 0, 0], &[0, 1, 0, 1]).unwrap(), 0.0);
        assert!(matches!(nmi(&[0, 1], &[0]), Err(EvalError::LengthMismatch(2, 1))));

        // Six points, clusters (0,0,0,1,1,1) vs labels (0,0,1,1,1,0):
        // joint counts [[2,1],[1,2]], uniform marginals, so both entropies
        // are ln 2 and the score reduces to I / ln 2 ≈ 0.0818.
        let c = [0, 0, 0, 1, 1, 1];
        let y = [0, 0, 1, 1, 1, 0];
        let v = nmi(&c, &y).unwrap();
        let info = (2.0 / 3.0) * (4.0f64 / 3.0).ln() + (1.0 / 3.0) * (2.0f64 / 3.0).ln();
        let direct = info / 2.0f64.ln();
        assert!((v - direct).abs() < 1e-12, "{v} vs {direct}");
        assert!((v - 0.0818).abs() < 5e-4, "{v}");
    }

    #[test]
    fn score_is_symmetric_and_permutation_invariant() {
        let a = [0, 1, 1, 2, 0, 2, 1, 0];
        let b = [1, 1, 0, 2, 2, 0, 0, 1];
        let ab = nmi(&a, &b).unwrap();
        assert_eq!(ab, nmi(&b, &a).unwrap());
        // Relabel a: 0 -> 2, 1 -> 0, 2 -> 1.
        let relabeled: Vec<usize> = a.iter().map(|&v| [2, 0, 1][v]).collect();
        assert!((nmi(&relabeled, &b).unwrap() - ab).abs() < 1e-12);
    }

    #[test]
    fn matching_tables_score_zero_and_noise_scores_the_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut pts = Vec::new();
        for i in 0..80 {
            let lab = i % 2;
            let c = if lab == 0 { -5.0 } else { 5.0 };
            pts.push((c + rng.random_range(-0.3..0.3), c + rng.random_range(-0.3..0.3), lab));
        }
        let real = labeled_points(&pts);
        assert_eq!(utility_clustering(&real, &real, 4).unwrap(), 0.0);

        // Same labels over featureless noise: the synthetic side carries no
        // cluster structure, so the difference approaches the real score.
        let noise: Vec<(f64, f64, usize)> = (0..80)
            .map(|i| (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), i % 2))
            .collect();
        let fake = labeled_points(&noise);
        let diff = utility_clustering(&real, &fake, 4).unwrap();
        assert!(diff > 0.6, "noise features should break the clustering, diff {diff}");
        assert!((0.0..=1.0).contains(&diff));
    }
}
