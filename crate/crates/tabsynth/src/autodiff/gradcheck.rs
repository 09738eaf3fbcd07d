//! Finite-difference validation of analytic gradients.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, VarId};
use super::params::ParamSet;
use super::AdError;

/// Outcome of a [`grad_check`] run.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Largest relative error across all probed coordinates.
    pub max_rel_err: f64,
    /// Coordinate of the worst error as (parameter name, flat index).
    pub worst: Option<(String, usize)>,
    /// Number of coordinates probed.
    pub checked: usize,
}

/// Compare analytic gradients of `build` against central finite differences.
///
/// `build` must construct a fresh graph from the given parameters and return
/// the scalar loss node; it is invoked repeatedly with perturbed copies, so
/// any internal randomness must be fixed. Up to `max_coords` coordinates are
/// probed, chosen uniformly without replacement from all trainable scalars
/// (seeded, so runs are reproducible). The relative error of a coordinate is
/// `|a - n| / max(|a|, |n|, 1e-6)` where `a` is the analytic and `n` the
/// numerical derivative with step `h`.
pub fn grad_check(
    params: &ParamSet,
    mut build: impl FnMut(&mut Graph, &ParamSet) -> Result<VarId, AdError>,
    max_coords: usize,
    h: f64,
    seed: u64,
) -> Result<GradCheckReport, AdError> {
    // Analytic pass.
    let mut work = params.clone();
    work.zero_grads();
    let mut g = Graph::new();
    let loss = build(&mut g, &work)?;
    let base_params = work.clone();
    g.backward(loss, &mut work)?;

    // Candidate coordinates: (entry index, flat offset).
    let mut coords: Vec<(usize, usize)> = Vec::new();
    for (i, e) in work.entries().iter().enumerate() {
        if e.trainable {
            coords.extend((0..e.value.len()).map(|j| (i, j)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    coords.shuffle(&mut rng);
    coords.truncate(max_coords);

    let mut eval = |ps: &ParamSet| -> Result<f64, AdError> {
        let mut g = Graph::new();
        let loss = build(&mut g, ps)?;
        Ok(g.value(loss).item())
    };

    let mut report = GradCheckReport { max_rel_err: 0.0, worst: None, checked: coords.len() };
    for (entry_idx, offset) in coords {
        let analytic = work.entries()[entry_idx].grad.data()[offset];
        let name = work.entries()[entry_idx].name.clone();

        let mut plus = base_params.clone();
        plus.get_mut(&name)?.data_mut()[offset] += h;
        let mut minus = base_params.clone();
        minus.get_mut(&name)?.data_mut()[offset] -= h;
        let numeric = (eval(&plus)? - eval(&minus)?) / (2.0 * h);

        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst = Some((name, offset));
        }
    }
    Ok(report)
}
