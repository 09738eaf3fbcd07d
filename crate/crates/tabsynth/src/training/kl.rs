//! Distribution-matching warm-up term over the discrete sample segments.

use crate::autodiff::{AdError, Graph, Tensor, VarId};

/// Smoothing constant added to each empirical class count.
pub const KL_SMOOTHING: f64 = 1e-3;

/// Sum over the given column spans of the divergence between the reference
/// batch's class distribution and the mean generated distribution.
///
/// For each span, `p` is the smoothed empirical distribution from the
/// `reference` rows (their one-hot columns summed to counts) and `q` is the
/// per-column mean of `fake` over the span; the span contributes
/// `sum_c p_c * (ln p_c - ln q_c)`. The `fake` entries in each span must be
/// strictly positive rows summing to one, as produced by a softmax head.
pub fn kl_term_node(
    g: &mut Graph,
    reference: &Tensor,
    fake: VarId,
    spans: &[(usize, usize)],
) -> Result<VarId, AdError> {
    let mut total = g.scalar(0.0)?;
    for &(start, width) in spans {
        let m = reference.rows() as f64;
        let mut p = vec![0.0; width];
        for r in 0..reference.rows() {
            let row = reference.row_slice(r);
            for (c, slot) in p.iter_mut().enumerate() {
                *slot += row[start + c];
            }
        }
        let denom = m + width as f64 * KL_SMOOTHING;
        for v in p.iter_mut() {
            *v = (*v + KL_SMOOTHING) / denom;
        }
        let self_info: f64 = p.iter().map(|&x| x * x.ln()).sum();

        let span_vals = g.slice_cols(fake, start, width)?;
        let q = g.mean_rows(span_vals)?;
        let log_q = g.log(q)?;
        let p_row = g.input(Tensor::from_vec(1, width, p)?)?;
        let cross = g.mul(p_row, log_q)?;
        let cross_sum = g.sum_all(cross)?;
        let neg_cross = g.neg(cross_sum)?;
        let const_part = g.scalar(self_info)?;
        let term = g.add(const_part, neg_cross)?;
        total = g.add(total, term)?;
    }
    Ok(total)
}

/// Value-level wrapper around [`kl_term_node`].
pub fn kl_term(
    reference: &Tensor,
    fake: &Tensor,
    spans: &[(usize, usize)],
) -> Result<f64, AdError> {
    let mut g = Graph::new();
    let f = g.input(fake.clone())?;
    let node = kl_term_node(&mut g, reference, f, spans)?;
    Ok(g.value(node).item())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Rows one-hot over a single 3-wide span with counts 2/1/1.
    fn reference() -> Tensor {
        Tensor::from_vec(
            4,
            3,
            vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        )
        .unwrap()
    }

    fn smoothed_p() -> [f64; 3] {
        let d = 4.0 + 3.0 * KL_SMOOTHING;
        [(2.0 + KL_SMOOTHING) / d, (1.0 + KL_SMOOTHING) / d, (1.0 + KL_SMOOTHING) / d]
    }

    #[test]
    fn zero_when_generated_matches_the_smoothed_reference() {
        let p = smoothed_p();
        let fake = Tensor::from_vec(2, 3, vec![p[0], p[1], p[2], p[0], p[1], p[2]]).unwrap();
        let v = kl_term(&reference(), &fake, &[(0, 3)]).unwrap();
        assert!(v.abs() < 1e-12, "expected zero divergence, got {v}");
    }

    #[test]
    fn matches_direct_formula_and_stays_non_negative() {
        let q = [0.5, 0.3, 0.2];
        let fake = Tensor::from_vec(1, 3, q.to_vec()).unwrap();
        let p = smoothed_p();
        let expected: f64 =
            p.iter().zip(q.iter()).map(|(&pc, &qc)| pc * (pc.ln() - qc.ln())).sum();
        let v = kl_term(&reference(), &fake, &[(0, 3)]).unwrap();
        assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
        assert!(v > 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let mut row: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
            let fake = Tensor::from_vec(1, 3, row).unwrap();
            assert!(kl_term(&reference(), &fake, &[(0, 3)]).unwrap() >= 0.0);
        }
    }

    #[test]
    fn even_split_against_a_skewed_mean_gives_the_textbook_value() {
        // Equal counts smooth to exactly (0.5, 0.5), so the divergence
        // against a (0.9, 0.1) generated mean is
        // 0.5 ln(0.5/0.9) + 0.5 ln(0.5/0.1) = ln(25/9) / 2.
        let reference =
            Tensor::from_vec(4, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        let fake = Tensor::from_vec(2, 2, vec![0.9, 0.1, 0.9, 0.1]).unwrap();
        let v = kl_term(&reference, &fake, &[(0, 2)]).unwrap();
        let expected = (25.0f64 / 9.0).ln() / 2.0;
        assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
        assert!((v - 0.5108).abs() < 1e-3);
    }

    #[test]
    fn spans_add_up_and_empty_span_list_is_zero() {
        // Two identical spans side by side double the single-span value.
        let reference2 = {
            let r = reference();
            let mut data = Vec::new();
            for i in 0..r.rows() {
                data.extend_from_slice(r.row_slice(i));
                data.extend_from_slice(r.row_slice(i));
            }
            Tensor::from_vec(4, 6, data).unwrap()
        };
        let fake = Tensor::from_vec(1, 6, vec![0.5, 0.3, 0.2, 0.5, 0.3, 0.2]).unwrap();
        let f3 = Tensor::from_vec(1, 3, fake.row_slice(0)[..3].to_vec()).unwrap();
        let single = kl_term(&reference(), &f3, &[(0, 3)]).unwrap();
        let both = kl_term(&reference2, &fake, &[(0, 3), (3, 3)]).unwrap();
        assert!((both - 2.0 * single).abs() < 1e-12);
        assert_eq!(kl_term(&reference2, &fake, &[]).unwrap(), 0.0);
    }
}
