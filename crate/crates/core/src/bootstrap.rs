//! m-out-of-n bootstrap variance and confidence intervals.
//!
//! Subsamples of size `m` (default `⌊√n⌋`) are drawn and the statistic is
//! recomputed on each, with the ridge penalty following the subsample size.
//! Since `Var(T_m) ≈ σ²/m`, the limiting variance is estimated as
//! `σ̂² = m · Var_boot` and the standard error of the full-sample statistic as
//! `sqrt(σ̂² / n)`.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bias_correction::{estimate_with_map, PipelineConfig};
use crate::dataset::{compute_ranks, minmax_scale, CovariateMap, Sample};
use crate::error::{Error, Result};
use crate::estimator::chatterjee_t;
use crate::nn_graph::build_nn;
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    THat,
    TBc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Resampling {
    #[default]
    WithReplacement,
    WithoutReplacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    #[default]
    Normal,
    Percentile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapConfig {
    pub b_reps: usize,
    /// Subsample size; `None` means `⌊√n⌋`.
    pub m: Option<usize>,
    pub seed: u64,
    pub resampling: Resampling,
    pub interval: IntervalMethod,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            b_reps: 200,
            m: None,
            seed: 0,
            resampling: Resampling::default(),
            interval: IntervalMethod::default(),
        }
    }
}

impl BootstrapConfig {
    /// Effective subsample size for a sample of `n` rows.
    pub fn subsample_size(&self, n: usize) -> Result<usize> {
        let m = self.m.unwrap_or_else(|| n.isqrt());
        if m < 2 || m > n {
            return Err(Error::InvalidParameter(format!(
                "bootstrap subsample size must satisfy 2 <= m <= n = {n}, got {m}"
            )));
        }
        if self.b_reps < 2 {
            return Err(Error::InvalidParameter(format!(
                "bootstrap needs at least 2 replicates, got {}",
                self.b_reps
            )));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceEstimate {
    /// Estimate of the limiting variance of `sqrt(n)·T`.
    pub sigma2_hat: f64,
    pub se: f64,
    pub m: usize,
    pub b_reps: usize,
    pub seed: u64,
    #[serde(skip)]
    pub replicates: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub alpha: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// Runs `stat` on `b_reps` subsample index sets; replicate `r` draws from
/// the stream `(seed, r)`. Output order is replicate order.
pub fn replicate<T, F>(n: usize, cfg: &BootstrapConfig, stat: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[usize]) -> Result<T> + Sync,
{
    let m = cfg.subsample_size(n)?;
    (0..cfg.b_reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(&[cfg.seed, r as u64]);
            let idx: Vec<usize> = match cfg.resampling {
                Resampling::WithReplacement => (0..m).map(|_| rng.random_range(0..n)).collect(),
                Resampling::WithoutReplacement => index::sample(&mut rng, n, m).into_vec(),
            };
            stat(&idx)
        })
        .collect()
}

/// Rescaled bootstrap variance for a full sample of size `n`.
pub fn variance_from_replicates(
    replicates: Vec<f64>,
    n: usize,
    m: usize,
    seed: u64,
) -> VarianceEstimate {
    let b = replicates.len();
    // shifted two-sum: exact zero for a constant statistic
    let shift = replicates[0];
    let (s1, s2) = replicates.iter().fold((0.0, 0.0), |(a, q), v| {
        let d = v - shift;
        (a + d, q + d * d)
    });
    let var = ((s2 - s1 * s1 / b as f64) / (b as f64 - 1.0)).max(0.0);
    let sigma2_hat = m as f64 * var;
    VarianceEstimate {
        sigma2_hat,
        se: (sigma2_hat / n as f64).sqrt(),
        m,
        b_reps: b,
        seed,
        replicates,
    }
}

/// Bootstrap with an arbitrary statistic of the subsample indices.
pub fn mn_bootstrap_with<F>(n: usize, cfg: &BootstrapConfig, stat: F) -> Result<VarianceEstimate>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    let m = cfg.subsample_size(n)?;
    let reps = replicate(n, cfg, stat)?;
    Ok(variance_from_replicates(reps, n, m, cfg.seed))
}

fn t_hat_of(sample: &Sample) -> Result<f64> {
    let ranks = compute_ranks(sample.y())?;
    let nn = build_nn(sample.x())?;
    Ok(chatterjee_t(&ranks, &nn)?.value)
}

/// Covariate map fitted on the full sample; subsamples reuse it so every
/// replicate evaluates the basis on the same scale as the point estimate.
fn full_sample_map(sample: &Sample, pipeline: &PipelineConfig) -> Result<CovariateMap> {
    Ok(if pipeline.scale_covariates {
        let s = minmax_scale(sample.x())?;
        CovariateMap::Fixed {
            offsets: s.offsets,
            scales: s.scales,
        }
    } else {
        CovariateMap::Identity
    })
}

pub fn mn_bootstrap(
    sample: &Sample,
    pipeline: &PipelineConfig,
    which: Statistic,
    cfg: &BootstrapConfig,
) -> Result<VarianceEstimate> {
    let map = full_sample_map(sample, pipeline)?;
    mn_bootstrap_with(sample.n(), cfg, |idx| {
        let sub = sample.select(idx)?;
        match which {
            Statistic::THat => t_hat_of(&sub),
            Statistic::TBc => Ok(estimate_with_map(&sub, pipeline, &map)?.t_bc),
        }
    })
}

/// Variances of `T̂` and `T̂_bc` from one shared set of subsamples.
pub fn mn_bootstrap_both(
    sample: &Sample,
    pipeline: &PipelineConfig,
    cfg: &BootstrapConfig,
) -> Result<(VarianceEstimate, VarianceEstimate)> {
    let n = sample.n();
    let m = cfg.subsample_size(n)?;
    let map = full_sample_map(sample, pipeline)?;
    let pairs = replicate(n, cfg, |idx| {
        let r = estimate_with_map(&sample.select(idx)?, pipeline, &map)?;
        Ok((r.t_hat, r.t_bc))
    })?;
    let (t, tbc): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok((
        variance_from_replicates(t, n, m, cfg.seed),
        variance_from_replicates(tbc, n, m, cfg.seed),
    ))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// `point ± z_{1-α/2} · se`.
pub fn confidence_interval(point: f64, v: &VarianceEstimate, alpha: f64) -> Result<Interval> {
    check_alpha(alpha)?;
    let half = normal_quantile(1.0 - alpha / 2.0) * v.se;
    Ok(Interval {
        lo: point - half,
        hi: point + half,
        alpha,
    })
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Basic interval from quantiles of `sqrt(m)(T*_m − mean T*_m)`, rescaled
/// to the full sample size `n`.
pub fn percentile_interval(
    point: f64,
    v: &VarianceEstimate,
    alpha: f64,
    n: usize,
) -> Result<Interval> {
    check_alpha(alpha)?;
    if v.replicates.len() < 2 {
        return Err(Error::InvalidParameter(
            "percentile interval needs stored bootstrap replicates".into(),
        ));
    }
    let mean = v.replicates.iter().sum::<f64>() / v.replicates.len() as f64;
    let root_m = (v.m as f64).sqrt();
    let mut w: Vec<f64> = v.replicates.iter().map(|r| root_m * (r - mean)).collect();
    w.sort_by(f64::total_cmp);
    let root_n = (n as f64).sqrt();
    Ok(Interval {
        lo: point - quantile_sorted(&w, 1.0 - alpha / 2.0) / root_n,
        hi: point - quantile_sorted(&w, alpha / 2.0) / root_n,
        alpha,
    })
}

/// Interval by the configured method.
pub fn interval(
    method: IntervalMethod,
    point: f64,
    v: &VarianceEstimate,
    alpha: f64,
    n: usize,
) -> Result<Interval> {
    match method {
        IntervalMethod::Normal => confidence_interval(point, v, alpha),
        IntervalMethod::Percentile => percentile_interval(point, v, alpha, n),
    }
}
