//! Seeded table simulators for controlled experiments: a bivariate
//! Gaussian-mixture table with tunable in-component correlation, and a
//! categorical table whose attributes form a Markov chain.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::table::{AttrKind, AttributeMeta, Schema, Table, TableError, Value};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("correlation must satisfy |rho| < 1, got {0}")]
    InvalidRho(f64),
    #[error("a positive row count is required")]
    EmptyRequest,
    #[error("skew fraction must lie in [0, 1], got {0}")]
    InvalidSkew(f64),
    #[error("chain probability must lie in [1/domain_size, 1], got {0}")]
    InvalidChainProb(f64),
    #[error("the chain needs at least two values per attribute, got {0}")]
    InvalidDomain(usize),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// How labels attach to simulated numeric records.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// An exact positive quota assigned to shuffled row positions,
    /// independent of the features.
    RatioQuota,
    /// Rows drawn from a fixed subset of mixture components are positive;
    /// the subset holds `round(skew * 25)` components, at least one.
    ComponentLinked,
}

/// Request for the Gaussian-mixture table.
#[derive(Clone, Copy, Debug)]
pub struct SimNumSpec {
    pub n: usize,
    /// In-component correlation between the two attributes.
    pub rho: f64,
    /// Positive-label share ([`LabelMode::RatioQuota`]) or positive
    /// component share ([`LabelMode::ComponentLinked`]).
    pub skew: f64,
    pub label_mode: LabelMode,
    pub seed: u64,
}

/// Generated numeric table plus the ground truth behind each row.
#[derive(Clone, Debug)]
pub struct SimNumOutput {
    pub table: Table,
    /// Mixture component of each row.
    pub components: Vec<usize>,
    /// Component means, in component order.
    pub means: Vec<(f64, f64)>,
    /// Component variances, in component order.
    pub variances: Vec<(f64, f64)>,
}

/// Number of mixture components in the numeric simulator.
pub const NUM_COMPONENTS: usize = 25;
/// Grid coordinates the component means are shuffled over.
const GRID: [f64; 5] = [-4.0, -2.0, 0.0, 2.0, 4.0];

/// Two numeric attributes drawn from a 25-component bivariate Gaussian
/// mixture. Component means occupy a shuffled 5x5 grid, the per-attribute
/// variances are uniform in [0.5, 1], and the in-component covariance is
/// `rho * sqrt(vx * vy)`, so the within-component correlation is exactly
/// `rho`. Components are sampled uniformly.
pub fn gen_sdata_num(spec: &SimNumSpec) -> Result<SimNumOutput, SimError> {
    if spec.n == 0 {
        return Err(SimError::EmptyRequest);
    }
    if !spec.rho.is_finite() || spec.rho.abs() >= 1.0 {
        return Err(SimError::InvalidRho(spec.rho));
    }
    if !(0.0..=1.0).contains(&spec.skew) {
        return Err(SimError::InvalidSkew(spec.skew));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut means: Vec<(f64, f64)> = Vec::with_capacity(NUM_COMPONENTS);
    for &mx in &GRID {
        for &my in &GRID {
            means.push((mx, my));
        }
    }
    means.shuffle(&mut rng);
    let variances: Vec<(f64, f64)> = (0..NUM_COMPONENTS)
        .map(|_| (rng.random_range(0.5..1.0), rng.random_range(0.5..1.0)))
        .collect();

    let mut components = Vec::with_capacity(spec.n);
    let mut points = Vec::with_capacity(spec.n);
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..spec.n {
        let k = rng.random_range(0..NUM_COMPONENTS);
        let (mx, my) = means[k];
        let (vx, vy) = variances[k];
        let cov = spec.rho * (vx * vy).sqrt();
        let n1: f64 = StandardNormal.sample(&mut rng);
        let n2: f64 = StandardNormal.sample(&mut rng);
        // Cholesky factor of [[vx, cov], [cov, vy]].
        let x = mx + vx.sqrt() * n1;
        let y = my + (cov / vx.sqrt()) * n1 + (vy - cov * cov / vx).sqrt() * n2;
        components.push(k);
        points.push((x, y));
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        min_y = min_y.min(y);
        max_y = max_y.max(y);
    }

    let labels = match spec.label_mode {
        LabelMode::RatioQuota => quota_labels(spec.n, spec.skew, &mut rng),
        LabelMode::ComponentLinked => {
            let positive = ((spec.skew * NUM_COMPONENTS as f64).round() as usize).max(1);
            components.iter().map(|&k| usize::from(k < positive)).collect()
        }
    };

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
    .with_label("label")?;
    let mut table = Table::new(schema);
    for ((x, y), &lab) in points.into_iter().zip(&labels) {
        table.push_row(vec![Value::Num(x), Value::Num(y), Value::Cat(lab)])?;
    }
    Ok(SimNumOutput { table, components, means, variances })
}

/// Request for the chained categorical table.
#[derive(Clone, Copy, Debug)]
pub struct SimCatSpec {
    pub n: usize,
    /// Probability that an attribute repeats its predecessor's value; the
    /// remaining mass spreads uniformly over the other values, so it must
    /// be at least `1 / domain_size` (the independence point).
    pub chain_prob: f64,
    /// Positive-label share, assigned by exact quota.
    pub skew: f64,
    /// Values per attribute; [`CAT_DOMAIN`] unless overridden.
    pub domain_size: usize,
    pub seed: u64,
}

/// Attribute count of the categorical simulator.
pub const CAT_ATTRS: usize = 5;
/// Default domain size of every categorical attribute.
pub const CAT_DOMAIN: usize = 4;

/// Five categorical attributes over a shared domain: the first is uniform
/// and each subsequent one repeats its predecessor with probability
/// `chain_prob`, otherwise moving uniformly to one of the other values.
pub fn gen_sdata_cat(spec: &SimCatSpec) -> Result<Table, SimError> {
    if spec.n == 0 {
        return Err(SimError::EmptyRequest);
    }
    if spec.domain_size < 2 {
        return Err(SimError::InvalidDomain(spec.domain_size));
    }
    let p_floor = 1.0 / spec.domain_size as f64;
    if !(p_floor..=1.0).contains(&spec.chain_prob) || !spec.chain_prob.is_finite() {
        return Err(SimError::InvalidChainProb(spec.chain_prob));
    }
    if !(0.0..=1.0).contains(&spec.skew) {
        return Err(SimError::InvalidSkew(spec.skew));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let d = spec.domain_size;
    let mut rows = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let mut row = Vec::with_capacity(CAT_ATTRS);
        let mut current = rng.random_range(0..d);
        row.push(current);
        for _ in 1..CAT_ATTRS {
            if rng.random_range(0.0..1.0) >= spec.chain_prob {
                // Uniform over the other d - 1 values.
                let mut next = rng.random_range(0..d - 1);
                if next >= current {
                    next += 1;
                }
                current = next;
            }
            row.push(current);
        }
        rows.push(row);
    }
    let labels = quota_labels(spec.n, spec.skew, &mut rng);

    let domain: Vec<String> = (0..d).map(|v| v.to_string()).collect();
    let mut attrs: Vec<AttributeMeta> = (1..=CAT_ATTRS)
        .map(|i| AttributeMeta {
            name: format!("a{i}"),
            kind: AttrKind::Categorical { categories: domain.clone() },
        })
        .collect();
    attrs.push(AttributeMeta {
        name: "label".into(),
        kind: AttrKind::Categorical { categories: vec!["0".into(), "1".into()] },
    });
    let schema = Schema::new(attrs).with_label("label")?;
    let mut table = Table::new(schema);
    for (row, &lab) in rows.into_iter().zip(&labels) {
        let mut values: Vec<Value> = row.into_iter().map(Value::Cat).collect();
        values.push(Value::Cat(lab));
        table.push_row(values)?;
    }
    Ok(table)
}

/// Exactly `round(skew * n)` ones at shuffled positions.
fn quota_labels(n: usize, skew: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let positives = ((skew * n as f64).round() as usize).min(n);
    let mut labels = vec![0usize; n];
    for slot in labels.iter_mut().take(positives) {
        *slot = 1;
    }
    labels.shuffle(rng);
    labels
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        for (&x, &y) in xs.iter().zip(ys) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        sxy / (sxx * syy).sqrt()
    }

    #[test]
    fn component_moments_match_the_ground_truth() {
        let spec = SimNumSpec {
            n: 200_000,
            rho: 0.5,
            skew: 0.5,
            label_mode: LabelMode::RatioQuota,
            seed: 1,
        };
        let out = gen_sdata_num(&spec).unwrap();
        assert_eq!(out.table.n_rows(), 200_000);
        assert_eq!(out.means.len(), NUM_COMPONENTS);
        // Shuffled means still cover the whole grid.
        let mut sorted = out.means.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut expected = Vec::new();
        for &mx in &GRID {
            for &my in &GRID {
                expected.push((mx, my));
            }
        }
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(sorted, expected);

        let xs = out.table.numeric_column(0);
        let ys = out.table.numeric_column(1);
        for k in 0..NUM_COMPONENTS {
            let idx: Vec<usize> =
                (0..out.components.len()).filter(|&i| out.components[i] == k).collect();
            assert!(idx.len() > 1000, "component {k} undersampled: {}", idx.len());
            let cx: Vec<f64> = idx.iter().map(|&i| xs[i]).collect();
            let cy: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
            let mean_x = cx.iter().sum::<f64>() / cx.len() as f64;
            let mean_y = cy.iter().sum::<f64>() / cy.len() as f64;
            let (mx, my) = out.means[k];
            assert!((mean_x - mx).abs() < 0.05, "component {k}: mean x {mean_x} vs {mx}");
            assert!((mean_y - my).abs() < 0.05, "component {k}: mean y {mean_y} vs {my}");
            let r = pearson(&cx, &cy);
            assert!((r - 0.5).abs() < 0.03, "component {k}: correlation {r}");
        }
    }

    #[test]
    fn numeric_labels_follow_the_requested_mode() {
        let quota = gen_sdata_num(&SimNumSpec {
            n: 1000,
            rho: 0.2,
            skew: 0.3,
            label_mode: LabelMode::RatioQuota,
            seed: 2,
        })
        .unwrap();
        let labels = quota.table.labels().unwrap();
        assert_eq!(labels.iter().sum::<usize>(), 300);

        let linked = gen_sdata_num(&SimNumSpec {
            n: 1000,
            rho: 0.2,
            skew: 0.5,
            label_mode: LabelMode::ComponentLinked,
            seed: 2,
        })
        .unwrap();
        let labels = linked.table.labels().unwrap();
        // round(0.5 * 25) = 13 positive components.
        for (i, &lab) in labels.iter().enumerate() {
            assert_eq!(lab, usize::from(linked.components[i] < 13));
        }
        let share = labels.iter().sum::<usize>() as f64 / 1000.0;
        assert!((share - 13.0 / 25.0).abs() < 0.05, "positive share {share}");
    }

    #[test]
    fn rejects_degenerate_requests() {
        let base = SimNumSpec {
            n: 10,
            rho: 0.0,
            skew: 0.5,
            label_mode: LabelMode::RatioQuota,
            seed: 0,
        };
        assert!(matches!(
            gen_sdata_num(&SimNumSpec { rho: 1.0, ..base }),
            Err(SimError::InvalidRho(_))
        ));
        assert!(matches!(
            gen_sdata_num(&SimNumSpec { rho: -1.3, ..base }),
            Err(SimError::InvalidRho(_))
        ));
        assert!(matches!(
            gen_sdata_num(&SimNumSpec { n: 0, ..base }),
            Err(SimError::EmptyRequest)
        ));
        assert!(matches!(
            gen_sdata_num(&SimNumSpec { skew: 1.5, ..base }),
            Err(SimError::InvalidSkew(_))
        ));
        let cat =
            SimCatSpec { n: 10, chain_prob: 0.9, skew: 0.5, domain_size: CAT_DOMAIN, seed: 0 };
        assert!(matches!(
            gen_sdata_cat(&SimCatSpec { chain_prob: 1.5, ..cat }),
            Err(SimError::InvalidChainProb(_))
        ));
        // Below the independence point 1/domain_size the kernel would
        // anti-correlate, which the chain does not model.
        assert!(matches!(
            gen_sdata_cat(&SimCatSpec { chain_prob: 0.2, ..cat }),
            Err(SimError::InvalidChainProb(_))
        ));
        assert!(matches!(
            gen_sdata_cat(&SimCatSpec { domain_size: 1, ..cat }),
            Err(SimError::InvalidDomain(1))
        ));
    }

    #[test]
    fn chain_repeats_with_the_configured_probability() {
        let t = gen_sdata_cat(&SimCatSpec {
            n: 30_000,
            chain_prob: 0.9,
            skew: 0.5,
            domain_size: CAT_DOMAIN,
            seed: 3,
        })
        .unwrap();
        assert_eq!(t.n_rows(), 30_000);
        // Adjacent attributes agree with probability ~0.9.
        for j in 0..CAT_ATTRS - 1 {
            let a = t.category_column(j);
            let b = t.category_column(j + 1);
            let agree =
                a.iter().zip(&b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64;
            assert!((agree - 0.9).abs() < 0.01, "attrs {j},{} agree {agree}", j + 1);
        }
        // The symmetric kernel keeps every marginal near uniform.
        for j in 0..CAT_ATTRS {
            let col = t.category_column(j);
            for v in 0..CAT_DOMAIN {
                let share = col.iter().filter(|&&c| c == v).count() as f64 / col.len() as f64;
                assert!((share - 0.25).abs() < 0.02, "attr {j} value {v} share {share}");
            }
        }
        let labels = t.labels().unwrap();
        assert_eq!(labels.iter().sum::<usize>(), 15_000);
    }

    #[test]
    fn chain_extremes_and_custom_domains_behave() {
        // A sticky chain copies the first value down the whole row.
        let glued = gen_sdata_cat(&SimCatSpec {
            n: 50,
            chain_prob: 1.0,
            skew: 0.5,
            domain_size: CAT_DOMAIN,
            seed: 4,
        })
        .unwrap();
        for r in 0..glued.n_rows() {
            let row = glued.rows()[r].clone();
            for j in 1..CAT_ATTRS {
                assert_eq!(row[j], row[0]);
            }
        }

        // At the independence point the next attribute forgets the current
        // one: P(X2 | X1) stays uniform.
        let free = gen_sdata_cat(&SimCatSpec {
            n: 10_000,
            chain_prob: 0.25,
            skew: 0.5,
            domain_size: CAT_DOMAIN,
            seed: 5,
        })
        .unwrap();
        let a = free.category_column(0);
        let b = free.category_column(1);
        for given in 0..CAT_DOMAIN {
            let idx: Vec<usize> = (0..a.len()).filter(|&i| a[i] == given).collect();
            for v in 0..CAT_DOMAIN {
                let share =
                    idx.iter().filter(|&&i| b[i] == v).count() as f64 / idx.len() as f64;
                assert!((share - 0.25).abs() < 0.03, "P(X2={v} | X1={given}) = {share}");
            }
        }

        // A six-value domain keeps the diagonal rate and uniform marginals.
        let wide = gen_sdata_cat(&SimCatSpec {
            n: 30_000,
            chain_prob: 0.7,
            skew: 0.5,
            domain_size: 6,
            seed: 6,
        })
        .unwrap();
        let a = wide.category_column(0);
        let b = wide.category_column(1);
        let agree = a.iter().zip(&b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64;
        assert!((agree - 0.7).abs() < 0.01, "diagonal rate {agree}");
        for v in 0..6 {
            let share = a.iter().filter(|&&c| c == v).count() as f64 / a.len() as f64;
            assert!((share - 1.0 / 6.0).abs() < 0.02, "value {v} share {share}");
        }
    }

    #[test]
    fn same_seed_reproduces_the_table() {
        let spec =
            SimCatSpec { n: 200, chain_prob: 0.5, skew: 0.4, domain_size: CAT_DOMAIN, seed: 11 };
        let a = gen_sdata_cat(&spec).unwrap();
        let b = gen_sdata_cat(&spec).unwrap();
        assert_eq!(a.rows(), b.rows());
        let c = gen_sdata_cat(&SimCatSpec { seed: 12, ..spec }).unwrap();
        assert_ne!(a.rows(), c.rows());

        let nspec = SimNumSpec {
            n: 100,
            rho: 0.4,
            skew: 0.5,
            label_mode: LabelMode::ComponentLinked,
            seed: 5,
        };
        let x = gen_sdata_num(&nspec).unwrap();
        let y = gen_sdata_num(&nspec).unwrap();
        assert_eq!(x.table.rows(), y.table.rows());
        assert_eq!(x.components, y.components);
    }
}
