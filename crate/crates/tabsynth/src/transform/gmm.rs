//! One-dimensional Gaussian mixtures fitted by expectation-maximization,
//! used for mode-aware normalization of numerical attributes.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TransformError;

const MAX_ITERS: usize = 300;
const LOGLIK_TOL: f64 = 1e-6;
/// Standard deviations are floored at this fraction of the value range.
const SIGMA_FLOOR_FRAC: f64 = 1e-4;
const LN_2PI: f64 = 1.8378770664093453;

/// Mixture of univariate Gaussians: weights, means and standard deviations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub sigmas: Vec<f64>,
}

/// Convergence details from [`GmmModel::fit`].
#[derive(Clone, Debug)]
pub struct GmmFitStats {
    pub iterations: usize,
    /// Total data log-likelihood after every EM iteration (non-decreasing).
    pub log_likelihood_trace: Vec<f64>,
}

impl GmmModel {
    pub fn components(&self) -> usize {
        self.means.len()
    }

    /// Fit by EM with a seeded, distance-weighted center initialization.
    /// Stops when the total log-likelihood improves by less than `1e-6`
    /// or after 300 iterations.
    pub fn fit(
        values: &[f64],
        components: usize,
        seed: u64,
        attr_name: &str,
    ) -> Result<(GmmModel, GmmFitStats), TransformError> {
        let n = values.len();
        if n < components {
            return Err(TransformError::TooFewValues {
                attr: attr_name.to_string(),
                needed: components,
                got: n,
            });
        }
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        if range <= 0.0 || !range.is_finite() {
            return Err(TransformError::DegenerateAttribute { attr: attr_name.to_string() });
        }
        let sigma_floor = SIGMA_FLOOR_FRAC * range;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let means = init_centers(values, components, &mut rng);
        let mut model = initial_model(values, &means, sigma_floor);

        let mut stats = GmmFitStats { iterations: 0, log_likelihood_trace: Vec::new() };
        let mut resp = vec![0.0; n * components];
        let mut prev_ll = f64::NEG_INFINITY;
        for iter in 0..MAX_ITERS {
            // E-step in the log domain; also accumulates the log-likelihood.
            let mut ll = 0.0;
            for (i, &v) in values.iter().enumerate() {
                let row = &mut resp[i * components..(i + 1) * components];
                ll += model.log_responsibilities(v, row);
            }
            stats.log_likelihood_trace.push(ll);
            stats.iterations = iter + 1;

            // M-step.
            for k in 0..components {
                let mut wsum = 0.0;
                let mut mean = 0.0;
                for (i, &v) in values.iter().enumerate() {
                    let r = resp[i * components + k];
                    wsum += r;
                    mean += r * v;
                }
                if wsum > 0.0 {
                    mean /= wsum;
                    let mut var = 0.0;
                    for (i, &v) in values.iter().enumerate() {
                        let d = v - mean;
                        var += resp[i * components + k] * d * d;
                    }
                    var /= wsum;
                    model.weights[k] = wsum / n as f64;
                    model.means[k] = mean;
                    model.sigmas[k] = var.sqrt().max(sigma_floor);
                }
            }
            let total_w: f64 = model.weights.iter().sum();
            model.weights.iter_mut().for_each(|w| *w /= total_w);

            if (ll - prev_ll).abs() < LOGLIK_TOL {
                break;
            }
            prev_ll = ll;
        }
        Ok((model, stats))
    }

    /// Posterior responsibilities of each component for `v`, written into
    /// `out`; returns the log-density of `v` under the mixture.
    fn log_responsibilities(&self, v: f64, out: &mut [f64]) -> f64 {
        let mut max_lp = f64::NEG_INFINITY;
        for (i, o) in out.iter_mut().enumerate() {
            let z = (v - self.means[i]) / self.sigmas[i];
            let lp = self.weights[i].max(1e-300).ln() - self.sigmas[i].ln()
                - 0.5 * (LN_2PI + z * z);
            *o = lp;
            max_lp = max_lp.max(lp);
        }
        let mut total = 0.0;
        for o in out.iter_mut() {
            *o = (*o - max_lp).exp();
            total += *o;
        }
        for o in out.iter_mut() {
            *o /= total;
        }
        max_lp + total.ln()
    }

    /// Posterior responsibilities of each component for `v`.
    pub fn responsibilities(&self, v: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.components()];
        self.log_responsibilities(v, &mut out);
        out
    }

    /// Component with the highest posterior responsibility for `v`
    /// (ties pick the lowest index).
    pub fn most_responsible(&self, v: f64) -> usize {
        let r = self.responsibilities(v);
        let mut best = 0;
        for (i, &x) in r.iter().enumerate() {
            if x > r[best] {
                best = i;
            }
        }
        best
    }

    /// Total log-likelihood of `values` under the mixture.
    pub fn log_likelihood(&self, values: &[f64]) -> f64 {
        let mut scratch = vec![0.0; self.components()];
        values.iter().map(|&v| self.log_responsibilities(v, &mut scratch)).sum()
    }
}

/// Distance-weighted center choice: the first center is a random value, each
/// further center is drawn with probability proportional to the squared
/// distance to the nearest chosen center.
fn init_centers(values: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut centers = Vec::with_capacity(k);
    centers.push(values[rng.random_range(0..values.len())]);
    let mut d2: Vec<f64> = values.iter().map(|&v| (v - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = values.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            values[idx]
        } else {
            values[rng.random_range(0..values.len())]
        };
        centers.push(next);
        for (d, &v) in d2.iter_mut().zip(values) {
            *d = d.min((v - next).powi(2));
        }
    }
    centers
}

/// Hard-assignment pass turning centers into a full initial model.
fn initial_model(values: &[f64], centers: &[f64], sigma_floor: f64) -> GmmModel {
    let k = centers.len();
    let n = values.len();
    let mut count = vec![0usize; k];
    let mut sum = vec![0.0; k];
    let mut sumsq = vec![0.0; k];
    for &v in values {
        let mut best = 0;
        for (i, &c) in centers.iter().enumerate() {
            if (v - c).abs() < (v - centers[best]).abs() {
                best = i;
            }
        }
        count[best] += 1;
        sum[best] += v;
        sumsq[best] += v * v;
    }
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut sigmas = Vec::with_capacity(k);
    for i in 0..k {
        if count[i] == 0 {
            weights.push(1e-3);
            means.push(centers[i]);
            sigmas.push(sigma_floor.max(1.0));
        } else {
            let m = sum[i] / count[i] as f64;
            let var = (sumsq[i] / count[i] as f64 - m * m).max(0.0);
            weights.push(count[i] as f64 / n as f64);
            means.push(m);
            sigmas.push(var.sqrt().max(sigma_floor));
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    GmmModel { weights, means, sigmas }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn two_mode_sample(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lo = Normal::new(-5.0, 0.8).unwrap();
        let hi = Normal::new(6.0, 1.2).unwrap();
        (0..n)
            .map(|i| if i % 2 == 0 { lo.sample(&mut rng) } else { hi.sample(&mut rng) })
            .collect()
    }

    #[test]
    fn em_recovers_well_separated_modes() {
        let values = two_mode_sample(3, 4000);
        let (model, _) = GmmModel::fit(&values, 2, 7, "x").unwrap();
        let mut means = model.means.clone();
        means.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((means[0] - -5.0).abs() < 0.15, "low mean {}", means[0]);
        assert!((means[1] - 6.0).abs() < 0.15, "high mean {}", means[1]);
        for w in &model.weights {
            assert!((w - 0.5).abs() < 0.05);
        }
    }

    #[test]
    fn log_likelihood_trace_is_non_decreasing() {
        let values = two_mode_sample(11, 1500);
        let (_, stats) = GmmModel::fit(&values, 3, 5, "x").unwrap();
        for pair in stats.log_likelihood_trace.windows(2) {
            assert!(
                pair[1] >= pair[0] - 1e-9,
                "log-likelihood decreased: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn fit_is_deterministic_for_a_seed() {
        let values = two_mode_sample(2, 800);
        let (a, _) = GmmModel::fit(&values, 2, 9, "x").unwrap();
        let (b, _) = GmmModel::fit(&values, 2, 9, "x").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_and_tiny_inputs_error() {
        assert!(matches!(
            GmmModel::fit(&[4.0; 50], 2, 1, "c"),
            Err(TransformError::DegenerateAttribute { .. })
        ));
        assert!(matches!(
            GmmModel::fit(&[1.0, 2.0], 5, 1, "c"),
            Err(TransformError::TooFewValues { .. })
        ));
    }

    #[test]
    fn responsibilities_sum_to_one_and_pick_nearest_basin() {
        let model = GmmModel {
            weights: vec![0.5, 0.5],
            means: vec![20.0, 50.0],
            sigmas: vec![10.0, 5.0],
        };
        let r = model.responsibilities(43.0);
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(model.most_responsible(43.0), 1);
        assert_eq!(model.most_responsible(25.0), 0);
    }
}
