//! The uncorrected nearest-neighbor rank correlation coefficient.

use serde::Serialize;

use crate::dataset::RankVector;
use crate::error::{Error, Result};
use crate::nn_graph::NnGraph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TnValue {
    pub value: f64,
    pub n: usize,
}

/// `6 / (n² − 1) · Σ min(r_i, r_{nn(i)}) − (2n + 1) / (n − 1)`.
///
/// The sum is accumulated exactly in integers and divided once.
pub fn chatterjee_t(ranks: &RankVector, nn: &NnGraph) -> Result<TnValue> {
    let r = ranks.as_slice();
    let n = r.len();
    if nn.len() != n {
        return Err(Error::DimensionMismatch {
            what: "ranks vs nearest-neighbor graph",
            expected: n,
            found: nn.len(),
        });
    }
    if n < 2 {
        return Err(Error::InsufficientRows(n));
    }
    let sum: u128 = r
        .iter()
        .zip(&nn.nn)
        .map(|(&ri, &j)| ri.min(r[j]) as u128)
        .sum();
    let nf = n as f64;
    let value = 6.0 * sum as f64 / (nf * nf - 1.0) - (2.0 * nf + 1.0) / (nf - 1.0);
    Ok(TnValue { value, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{compute_ranks, Matrix};
    use crate::nn_graph::build_nn;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t_of(x: &[f64], y: &[f64]) -> f64 {
        let xm = Matrix::from_row_major(x.len(), 1, x.to_vec()).unwrap();
        let g = build_nn(&xm).unwrap();
        chatterjee_t(&compute_ranks(y).unwrap(), &g).unwrap().value
    }

    #[test]
    fn three_point_hand_evaluation() {
        assert_eq!(t_of(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), -0.5);
    }

    #[test]
    fn two_points_give_minus_one() {
        assert_eq!(t_of(&[0.0, 5.0], &[1.0, 2.0]), -1.0);
        assert_eq!(t_of(&[0.0, 5.0], &[2.0, 1.0]), -1.0);
    }

    #[test]
    fn functional_dependence_approaches_one() {
        let n = 10_000;
        let v: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        let t = t_of(&v, &v);
        assert!((0.99..=1.0).contains(&t), "{t}");
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let g = build_nn(&Matrix::from_row_major(3, 1, vec![0.0, 1.0, 2.0]).unwrap()).unwrap();
        let r = compute_ranks(&[1.0, 2.0]).unwrap();
        assert_eq!(chatterjee_t(&r, &g).unwrap_err().code(), "dimension_mismatch");
    }

    #[test]
    fn independent_uniforms_stay_near_zero() {
        let mut fails = 0;
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 5000;
            let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let t = t_of(&x, &y);
            assert!(t.is_finite() && (-3.0..=1.5).contains(&t));
            if t.abs() >= 0.05 {
                fails += 1;
            }
        }
        assert_eq!(fails, 0);
    }

    #[test]
    fn increasing_transform_of_y_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..300).map(|_| rng.random()).collect();
        let y: Vec<f64> = (0..300).map(|_| rng.random::<f64>() - 0.5).collect();
        let y2: Vec<f64> = y.iter().map(|v| (3.0 * v).exp() + v.powi(3)).collect();
        assert_eq!(t_of(&x, &y).to_bits(), t_of(&x, &y2).to_bits());
    }
}
