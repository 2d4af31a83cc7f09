//! Leading-bias estimate and the bias-corrected coefficient.
//!
//! The bias term is the U-statistic
//!
//! ```text
//! L̂ = 1/(n(n-1)) Σ_{i≠j} [ Ĝ_{X_i}(Y_j) Ĝ_{X_N(i)}(Y_j) − Ĝ_{X_i}(Y_j)² ]
//! ```
//!
//! and the corrected coefficient is `T̂ − 6 L̂`. Row sums are formed
//! independently (possibly in parallel) and reduced in index order, so the
//! result does not depend on the thread count.

use rayon::prelude::*;
use serde::Serialize;

use crate::bootstrap::{Interval, VarianceEstimate};
use crate::dataset::{compute_ranks, CovariateMap, Sample};
use crate::error::{Error, Result};
use crate::estimator::chatterjee_t;
use crate::nn_graph::{build_nn, NnGraph};
use crate::ridge_series::{ghat_matrix, GhatMatrix, RidgeFit, RidgeModel, DEFAULT_BASIS_CAP};

/// Entries of `Ĝ` materialized per block on the streaming path.
const STREAM_BLOCK_ENTRIES: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineConfig {
    /// Total degree of the power basis.
    pub degree: u32,
    /// `c` in `λ_n = n^{-c}`.
    pub lambda_exponent: f64,
    pub scale_covariates: bool,
    /// Clamp `Ĝ` into [0, 1]. Experimental, off by default.
    pub clamp_ghat: bool,
    /// Largest `n` for which the full `n × n` matrix `Ĝ` is built.
    pub ghat_dense_cap: usize,
    pub basis_cap: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            degree: 2,
            lambda_exponent: 0.85,
            scale_covariates: true,
            clamp_ghat: false,
            ghat_dense_cap: 20_000,
            basis_cap: DEFAULT_BASIS_CAP,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_exponent > 0.0 && self.lambda_exponent.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda exponent must be positive, got {}",
                self.lambda_exponent
            )));
        }
        Ok(())
    }

    pub fn covariate_map(&self) -> CovariateMap {
        if self.scale_covariates {
            CovariateMap::MinMax
        } else {
            CovariateMap::Identity
        }
    }

    /// Ridge penalty `n^{-c}`.
    pub fn lambda(&self, n: usize) -> f64 {
        (n as f64).powf(-self.lambda_exponent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    pub t_hat: f64,
    pub l_hat: f64,
    pub t_bc: f64,
    pub n: usize,
    pub d: usize,
    pub config: PipelineConfig,
    pub variance_t: Option<VarianceEstimate>,
    pub variance_tbc: Option<VarianceEstimate>,
    pub ci_t: Option<Interval>,
    pub ci_tbc: Option<Interval>,
}

#[inline]
fn row_term(gi: &[f64], gk: &[f64], skip: Option<usize>) -> f64 {
    let mut s = 0.0;
    let (head, tail) = match skip {
        Some(i) => (0..i, i + 1..gi.len()),
        None => (0..gi.len(), 0..0),
    };
    for j in head.chain(tail) {
        let a = gi[j];
        s += a * gk[j] - a * a;
    }
    s
}

fn check_nn(n: usize, nn: &NnGraph) -> Result<()> {
    if nn.len() != n {
        return Err(Error::DimensionMismatch {
            what: "ghat vs nearest-neighbor graph",
            expected: n,
            found: nn.len(),
        });
    }
    if n < 2 {
        return Err(Error::InsufficientRows(n));
    }
    Ok(())
}

pub fn bias_estimate(g: &GhatMatrix, nn: &NnGraph) -> Result<f64> {
    let n = g.n();
    check_nn(n, nn)?;
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| row_term(g.row(i), g.row(nn.nn[i]), Some(i)))
        .collect();
    let total: f64 = rows.iter().sum();
    Ok(total / (n as f64 * (n as f64 - 1.0)))
}

/// Same statistic as [`bias_estimate`] without materializing `Ĝ`: column
/// blocks of `block` thresholds are rebuilt from the coefficients.
pub fn bias_estimate_streaming(
    fit: &RidgeFit,
    nn: &NnGraph,
    block: usize,
    clamp: bool,
) -> Result<f64> {
    let n = fit.n();
    check_nn(n, nn)?;
    let block = block.clamp(1, n);
    let mut rows = vec![0.0; n];
    for j0 in (0..n).step_by(block) {
        let j1 = (j0 + block).min(n);
        let b = j1 - j0;
        let g = fit.ghat_block(j0, j1, clamp);
        rows.par_iter_mut().enumerate().for_each(|(i, acc)| {
            let k = nn.nn[i];
            let skip = (j0..j1).contains(&i).then(|| i - j0);
            *acc += row_term(&g[i * b..(i + 1) * b], &g[k * b..(k + 1) * b], skip);
        });
    }
    let total: f64 = rows.iter().sum();
    Ok(total / (n as f64 * (n as f64 - 1.0)))
}

/// Ranks, NN graph, `T̂`, ridge fit, `L̂`, and `T̂ − 6L̂` for one sample.
pub fn estimate(sample: &Sample, config: &PipelineConfig) -> Result<EstimateResult> {
    estimate_with_map(sample, config, &config.covariate_map())
}

/// [`estimate`] with an explicit covariate map for the basis, overriding
/// `scale_covariates`. The nearest-neighbor graph always uses raw covariates.
pub fn estimate_with_map(
    sample: &Sample,
    config: &PipelineConfig,
    map: &CovariateMap,
) -> Result<EstimateResult> {
    config.validate()?;
    let n = sample.n();
    let ranks = compute_ranks(sample.y())?;
    let nn = build_nn(sample.x())?;
    let t_hat = chatterjee_t(&ranks, &nn)?.value;

    let model = RidgeModel::fit(
        sample.x(),
        sample.y(),
        config.degree,
        config.lambda(n),
        map,
        config.basis_cap,
    )?;
    let l_hat = if n <= config.ghat_dense_cap {
        bias_estimate(&ghat_matrix(&model.fit, config.clamp_ghat), &nn)?
    } else {
        let block = (STREAM_BLOCK_ENTRIES / n).max(1);
        bias_estimate_streaming(&model.fit, &nn, block, config.clamp_ghat)?
    };
    Ok(EstimateResult {
        t_hat,
        l_hat,
        t_bc: t_hat - 6.0 * l_hat,
        n,
        d: sample.d(),
        config: *config,
        variance_t: None,
        variance_tbc: None,
        ci_t: None,
        ci_tbc: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Matrix;
    use crate::ridge_series::RidgeModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn literal(g: &GhatMatrix, nn: &NnGraph) -> f64 {
        let n = g.n();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += g.get(i, j) * g.get(nn.nn[i], j) - g.get(i, j).powi(2);
                }
            }
        }
        s / (n * (n - 1)) as f64
    }

    fn random_nn(n: usize, rng: &mut ChaCha8Rng) -> NnGraph {
        let nn = (0..n)
            .map(|i| {
                let j = rng.random_range(0..n - 1);
                if j >= i {
                    j + 1
                } else {
                    j
                }
            })
            .collect();
        NnGraph {
            nn,
            dist: vec![0.0; n],
        }
    }

    #[test]
    fn two_by_two_hand_expansion() {
        let g = GhatMatrix::from_row_major(2, vec![1.0, 0.5, 0.25, 0.75]).unwrap();
        let nn = NnGraph {
            nn: vec![1, 0],
            dist: vec![1.0, 1.0],
        };
        assert!((bias_estimate(&g, &nn).unwrap() - 0.15625).abs() < 1e-15);
    }

    #[test]
    fn identical_rows_give_zero() {
        let row = [0.9, 0.4, 0.1, 0.7];
        let g = GhatMatrix::from_row_major(4, row.repeat(4)).unwrap();
        let nn = NnGraph {
            nn: vec![1, 2, 3, 0],
            dist: vec![0.0; 4],
        };
        assert_eq!(bias_estimate(&g, &nn).unwrap(), 0.0);
    }

    #[test]
    fn matches_literal_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let n = 50;
            let g = GhatMatrix::from_row_major(n, (0..n * n).map(|_| rng.random()).collect())
                .unwrap();
            let nn = random_nn(n, &mut rng);
            assert!((bias_estimate(&g, &nn).unwrap() - literal(&g, &nn)).abs() < 1e-12);
        }
    }

    #[test]
    fn streaming_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 157;
        let x = Matrix::from_row_major(n, 3, (0..n * 3).map(|_| rng.random()).collect()).unwrap();
        let y: Vec<f64> = (0..n).map(|i| x.get(i, 0) + rng.random::<f64>()).collect();
        let model = RidgeModel::fit(&x, &y, 2, 0.01, &CovariateMap::MinMax, DEFAULT_BASIS_CAP).unwrap();
        let nn = build_nn(&x).unwrap();
        for clamp in [false, true] {
            let dense = bias_estimate(&ghat_matrix(&model.fit, clamp), &nn).unwrap();
            for block in [1, 7, 64, n, 10 * n] {
                let s = bias_estimate_streaming(&model.fit, &nn, block, clamp).unwrap();
                assert!((dense - s).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn dense_cap_boundary_is_seamless() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200;
        let x = Matrix::from_row_major(n, 2, (0..n * 2).map(|_| rng.random()).collect()).unwrap();
        let y = (0..n).map(|i| x.get(i, 1) * 2.0 + rng.random::<f64>()).collect();
        let sample = Sample::new(x, y).unwrap();
        let dense = estimate(&sample, &PipelineConfig::default()).unwrap();
        let streamed = estimate(
            &sample,
            &PipelineConfig {
                ghat_dense_cap: n - 1,
                ..PipelineConfig::default()
            },
        )
        .unwrap();
        assert_eq!(dense.t_hat, streamed.t_hat);
        assert!((dense.l_hat - streamed.l_hat).abs() < 1e-10);
    }

    #[test]
    fn degree_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 120;
        let x = Matrix::from_row_major(n, 3, (0..n * 3).map(|_| rng.random()).collect()).unwrap();
        let y = (0..n).map(|_| rng.random()).collect();
        let r = estimate(
            &Sample::new(x, y).unwrap(),
            &PipelineConfig {
                degree: 0,
                ..PipelineConfig::default()
            },
        )
        .unwrap();
        assert_eq!(r.l_hat, 0.0);
        assert_eq!(r.t_bc, r.t_hat);
    }

    #[test]
    fn noiseless_monotone_response() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 5000;
        let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let sample = Sample::new(Matrix::from_row_major(n, 1, x.clone()).unwrap(), x).unwrap();
        let r = estimate(&sample, &PipelineConfig::default()).unwrap();
        assert!((0.95..=1.05).contains(&r.t_bc), "{}", r.t_bc);
        assert!((r.t_bc - (r.t_hat - 6.0 * r.l_hat)).abs() <= 1e-12);
    }

    #[test]
    fn two_point_sample_is_defined() {
        let sample = Sample::new(
            Matrix::from_row_major(2, 1, vec![0.0, 1.0]).unwrap(),
            vec![1.0, 2.0],
        )
        .unwrap();
        let r = estimate(&sample, &PipelineConfig::default()).unwrap();
        assert_eq!(r.t_hat, -1.0);
        assert!(r.t_bc.is_finite());
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let g = GhatMatrix::from_row_major(2, vec![0.0; 4]).unwrap();
        let nn = NnGraph {
            nn: vec![1, 2, 0],
            dist: vec![0.0; 3],
        };
        assert!(bias_estimate(&g, &nn).is_err());
    }
}
