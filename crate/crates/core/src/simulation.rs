//! Gaussian-copula data, closed-form truth, and the Monte-Carlo study.
//!
//! Latent `X̃ ~ N(0, I_d)`, `Ỹ = ρ X̃₁ + sqrt(1 − ρ²) Z`; the observed data
//! are `X = Φ(X̃)` componentwise and `Y = Φ(Ỹ)`. For this design the
//! population coefficient is `(3/π) asin((1 + ρ²)/2) − 1/2`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::bias_correction::{estimate, PipelineConfig};
use crate::bootstrap::{interval, mn_bootstrap_both, BootstrapConfig, Interval};
use crate::dataset::{Matrix, Sample};
use crate::error::{Error, Result};
use crate::json::fmt_f64;
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CopulaConfig {
    pub n: usize,
    pub d: usize,
    pub rho: f64,
    pub seed: u64,
}

impl CopulaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InsufficientRows(self.n));
        }
        if self.d == 0 {
            return Err(Error::NoCovariates);
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidParameter(format!(
                "rho must lie in [0, 1), got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Draws from the copula design using the generator `rng`.
pub fn sample_gaussian_copula<R: Rng>(rng: &mut R, n: usize, d: usize, rho: f64) -> Result<Sample> {
    let noise = (1.0 - rho * rho).sqrt();
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let first: f64 = rng.sample(StandardNormal);
        x.push(std_normal_cdf(first));
        for _ in 1..d {
            x.push(std_normal_cdf(rng.sample(StandardNormal)));
        }
        let z: f64 = rng.sample(StandardNormal);
        y.push(std_normal_cdf(rho * first + noise * z));
    }
    Sample::new(Matrix::from_row_major(n, d, x)?, y)
}

pub fn gen_gaussian_copula(cfg: &CopulaConfig) -> Result<Sample> {
    cfg.validate()?;
    sample_gaussian_copula(&mut stream(&[cfg.seed]), cfg.n, cfg.d, cfg.rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrueT {
    pub value: f64,
}

pub fn true_t(rho: f64) -> Result<TrueT> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!(
            "rho must lie in [0, 1], got {rho}"
        )));
    }
    Ok(TrueT {
        value: 3.0 / PI * ((1.0 + rho * rho) / 2.0).asin() - 0.5,
    })
}

/// One `(ρ, d, n)` design point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub rho: f64,
    pub d: usize,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StudyConfig {
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
    pub pipeline: PipelineConfig,
    /// `seed` here is ignored; replicate streams derive from the study seed.
    pub bootstrap: BootstrapConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            reps: 200,
            alpha: 0.05,
            seed: 0,
            pipeline: PipelineConfig::default(),
            bootstrap: BootstrapConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub cell_id: usize,
    pub rep: usize,
    pub t_hat: f64,
    pub t_bc: f64,
    pub ci_t: Interval,
    pub ci_tbc: Interval,
    pub true_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellReport {
    pub rho: f64,
    pub d: usize,
    pub n: usize,
    pub reps: usize,
    pub true_t: f64,
    pub rmse_t: f64,
    pub rmse_tbc: f64,
    pub ecp_t: f64,
    pub ecp_tbc: f64,
    pub mean_t: f64,
    pub mean_tbc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub cells: Vec<CellReport>,
    pub alpha: f64,
    /// Excluded from JSON so that reports are byte-reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct StudyOutput {
    pub report: SimReport,
    pub records: Vec<ReplicationRecord>,
}

fn data_stream_seed(study_seed: u64, cell_id: usize, rep: usize) -> u64 {
    derive_seed(&[study_seed, cell_id as u64, rep as u64, 0])
}

/// Simulated data for replication `rep` of cell `cell_id`.
pub fn replication_sample(cell: &Cell, cell_id: usize, rep: usize, study_seed: u64) -> Result<Sample> {
    let cfg = CopulaConfig {
        n: cell.n,
        d: cell.d,
        rho: cell.rho,
        seed: data_stream_seed(study_seed, cell_id, rep),
    };
    gen_gaussian_copula(&cfg)
}

/// Point estimates, bootstrap intervals for both estimators, and the truth.
pub fn run_replication(
    cell: &Cell,
    cell_id: usize,
    rep: usize,
    cfg: &StudyConfig,
) -> Result<ReplicationRecord> {
    let sample = replication_sample(cell, cell_id, rep, cfg.seed)?;
    let est = estimate(&sample, &cfg.pipeline)?;
    let boot = BootstrapConfig {
        seed: derive_seed(&[cfg.seed, cell_id as u64, rep as u64, 1]),
        ..cfg.bootstrap
    };
    let (v_t, v_tbc) = mn_bootstrap_both(&sample, &cfg.pipeline, &boot)?;
    Ok(ReplicationRecord {
        cell_id,
        rep,
        t_hat: est.t_hat,
        t_bc: est.t_bc,
        ci_t: interval(boot.interval, est.t_hat, &v_t, cfg.alpha, cell.n)?,
        ci_tbc: interval(boot.interval, est.t_bc, &v_tbc, cfg.alpha, cell.n)?,
        true_t: true_t(cell.rho)?.value,
    })
}

/// `(T̂, T̂_bc)` for each replication of a cell, without bootstrap.
pub fn point_estimates(
    cell: &Cell,
    cell_id: usize,
    reps: usize,
    study_seed: u64,
    pipeline: &PipelineConfig,
) -> Result<Vec<(f64, f64)>> {
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let s = replication_sample(cell, cell_id, rep, study_seed)?;
            let e = estimate(&s, pipeline)?;
            Ok((e.t_hat, e.t_bc))
        })
        .collect()
}

/// RMSE, coverage, and means over stored replication records, reduced in
/// record order.
pub fn aggregate(cell: &Cell, records: &[ReplicationRecord]) -> CellReport {
    let reps = records.len();
    let r = reps as f64;
    let truth = records.first().map_or(f64::NAN, |rec| rec.true_t);
    let mut se_t = 0.0;
    let mut se_tbc = 0.0;
    let mut cov_t = 0usize;
    let mut cov_tbc = 0usize;
    let mut sum_t = 0.0;
    let mut sum_tbc = 0.0;
    for rec in records {
        se_t += (rec.t_hat - rec.true_t).powi(2);
        se_tbc += (rec.t_bc - rec.true_t).powi(2);
        cov_t += rec.ci_t.contains(rec.true_t) as usize;
        cov_tbc += rec.ci_tbc.contains(rec.true_t) as usize;
        sum_t += rec.t_hat;
        sum_tbc += rec.t_bc;
    }
    CellReport {
        rho: cell.rho,
        d: cell.d,
        n: cell.n,
        reps,
        true_t: truth,
        rmse_t: (se_t / r).sqrt(),
        rmse_tbc: (se_tbc / r).sqrt(),
        ecp_t: cov_t as f64 / r,
        ecp_tbc: cov_tbc as f64 / r,
        mean_t: sum_t / r,
        mean_tbc: sum_tbc / r,
    }
}

pub fn run_study(grid: &[Cell], cfg: &StudyConfig) -> Result<StudyOutput> {
    if cfg.reps < 1 {
        return Err(Error::InvalidParameter("reps must be at least 1".into()));
    }
    for cell in grid {
        CopulaConfig {
            n: cell.n,
            d: cell.d,
            rho: cell.rho,
            seed: 0,
        }
        .validate()?;
        cfg.bootstrap.subsample_size(cell.n)?;
    }
    cfg.pipeline.validate()?;

    let start = Instant::now();
    let mut cells = Vec::with_capacity(grid.len());
    let mut records = Vec::with_capacity(grid.len() * cfg.reps);
    for (cell_id, cell) in grid.iter().enumerate() {
        let recs: Vec<ReplicationRecord> = (0..cfg.reps)
            .into_par_iter()
            .map(|rep| {
                run_replication(cell, cell_id, rep, cfg).map_err(|e| Error::Replication {
                    cell: cell_id,
                    rep,
                    source: Box::new(e),
                })
            })
            .collect::<Result<_>>()?;
        cells.push(aggregate(cell, &recs));
        records.extend(recs);
    }
    Ok(StudyOutput {
        report: SimReport {
            cells,
            alpha: cfg.alpha,
            wall_time: start.elapsed().as_secs_f64(),
        },
        records,
    })
}

/// Aligned table, one row per cell.
pub fn report_text(report: &SimReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>5} {:>4} {:>6} {:>5} {:>8} | {:>9} {:>9} | {:>7} {:>7} | {:>9} {:>9}",
        "rho", "d", "n", "reps", "T", "RMSE T", "RMSE Tbc", "ECP T", "ECP Tbc", "mean T", "mean Tbc"
    );
    let _ = writeln!(s, "{}", "-".repeat(102));
    for c in &report.cells {
        let _ = writeln!(
            s,
            "{:>5.2} {:>4} {:>6} {:>5} {:>8.4} | {:>9.4} {:>9.4} | {:>7.3} {:>7.3} | {:>9.4} {:>9.4}",
            c.rho, c.d, c.n, c.reps, c.true_t, c.rmse_t, c.rmse_tbc, c.ecp_t, c.ecp_tbc, c.mean_t, c.mean_tbc
        );
    }
    let _ = writeln!(s, "\nnominal coverage {:.3}", 1.0 - report.alpha);
    let _ = writeln!(s, "wall time {:.1} s", report.wall_time);
    s
}

pub const RAW_CSV_HEADER: &str = "cell_id,rep,t_hat,t_bc,ci_lo_t,ci_hi_t,ci_lo_tbc,ci_hi_tbc,true_t";

/// Per-replication records as CSV.
pub fn raw_csv(records: &[ReplicationRecord]) -> String {
    let mut s = String::with_capacity(records.len() * 200);
    s.push_str(RAW_CSV_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.cell_id,
            r.rep,
            fmt_f64(r.t_hat),
            fmt_f64(r.t_bc),
            fmt_f64(r.ci_t.lo),
            fmt_f64(r.ci_t.hi),
            fmt_f64(r.ci_tbc.lo),
            fmt_f64(r.ci_tbc.hi),
            fmt_f64(r.true_t)
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    fn first_column(s: &Sample) -> Vec<f64> {
        (0..s.n()).map(|i| s.x().get(i, 0)).collect()
    }

    #[test]
    fn independence_design() {
        let s = gen_gaussian_copula(&CopulaConfig {
            n: 10_000,
            d: 3,
            rho: 0.0,
            seed: 1,
        })
        .unwrap();
        assert!(pearson(&first_column(&s), s.y()).abs() < 0.03);
        assert!(s.x().as_slice().iter().chain(s.y()).all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn latent_correlation_is_recovered() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let s = gen_gaussian_copula(&CopulaConfig {
            n: 10_000,
            d: 2,
            rho: 0.9,
            seed: 2,
        })
        .unwrap();
        let nrm = Normal::standard();
        let a: Vec<f64> = first_column(&s).iter().map(|&u| nrm.inverse_cdf(u)).collect();
        let b: Vec<f64> = s.y().iter().map(|&u| nrm.inverse_cdf(u)).collect();
        assert!((pearson(&a, &b) - 0.9).abs() < 0.02);
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let cfg = CopulaConfig {
            n: 50,
            d: 4,
            rho: 0.5,
            seed: 9,
        };
        assert_eq!(gen_gaussian_copula(&cfg).unwrap(), gen_gaussian_copula(&cfg).unwrap());
        assert!(gen_gaussian_copula(&CopulaConfig { rho: 1.0, ..cfg }).is_err());
    }

    #[test]
    fn normal_cdf_reference_values() {
        // mpmath.ncdf at 30 digits
        let cases = [
            (0.0, 0.5),
            (1.0, 0.841344746068542948585232545632),
            (-1.959963984540054, 0.0250000000000000137652513622944),
            (-5.0, 2.86651571879193911673752332875e-7),
            (3.5, 0.999767370920964474963650074113),
        ];
        for (x, p) in cases {
            assert!((std_normal_cdf(x) - p).abs() <= 1e-12 * p.max(1e-3), "{x}");
        }
    }

    #[test]
    fn truth_endpoints_and_midpoint() {
        assert_eq!(true_t(0.0).unwrap().value, 0.0);
        assert_eq!(true_t(1.0).unwrap().value, 1.0);
        // mpmath, 30 digits
        assert!((true_t(0.5).unwrap().value - 0.144703124224823999848979139572).abs() < 1e-10);
        assert!((true_t(0.9).unwrap().value - 0.580388050989837900363628098904).abs() < 1e-10);
        assert!(true_t(-0.1).is_err() && true_t(1.1).is_err());
        let grid: Vec<f64> = (0..=100).map(|i| true_t(i as f64 / 100.0).unwrap().value).collect();
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }

    fn record(t_hat: f64, t_bc: f64, lo: f64, hi: f64) -> ReplicationRecord {
        ReplicationRecord {
            cell_id: 0,
            rep: 0,
            t_hat,
            t_bc,
            ci_t: Interval { lo, hi, alpha: 0.05 },
            ci_tbc: Interval {
                lo: t_bc - 0.1,
                hi: t_bc + 0.1,
                alpha: 0.05,
            },
            true_t: 0.5,
        }
    }

    #[test]
    fn aggregation_matches_naive_recomputation() {
        let cell = Cell { rho: 0.5, d: 6, n: 300 };
        let recs = vec![
            record(0.6, 0.52, 0.55, 0.65),
            record(0.4, 0.45, 0.3, 0.7),
            record(0.7, 0.61, 0.45, 0.9),
        ];
        let c = aggregate(&cell, &recs);
        let naive_rmse = ((0.01f64 + 0.01 + 0.04) / 3.0).sqrt();
        assert!((c.rmse_t - naive_rmse).abs() < 1e-15);
        let naive_rmse_bc = ((0.0004f64 + 0.0025 + 0.0121) / 3.0).sqrt();
        assert!((c.rmse_tbc - naive_rmse_bc).abs() < 1e-15);
        assert!((c.ecp_t - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.ecp_tbc - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.mean_t - 1.7 / 3.0).abs() < 1e-15);

        let single = aggregate(&cell, &recs[..1]);
        assert!((single.rmse_t - 0.1).abs() < 1e-15);
        assert!(single.ecp_t == 0.0 || single.ecp_t == 1.0);
    }

    #[test]
    fn single_replication_study() {
        let out = run_study(
            &[Cell { rho: 0.3, d: 2, n: 60 }],
            &StudyConfig {
                reps: 1,
                bootstrap: BootstrapConfig {
                    b_reps: 10,
                    ..Default::default()
                },
                ..Default::default()
            },
        )
        .unwrap();
        let c = out.report.cells[0];
        let r = out.records[0];
        assert!((c.rmse_t - (r.t_hat - r.true_t).abs()).abs() < 1e-15);
        assert!(c.ecp_tbc == 0.0 || c.ecp_tbc == 1.0);
        let csv = raw_csv(&out.records);
        assert_eq!(csv.lines().count(), 2);
        assert!(report_text(&out.report).lines().count() >= 3);
    }

    #[test]
    fn invalid_grid_is_rejected() {
        let cfg = StudyConfig::default();
        assert!(run_study(&[Cell { rho: 1.0, d: 2, n: 50 }], &cfg).is_err());
        assert!(run_study(&[Cell { rho: 0.0, d: 0, n: 50 }], &cfg).is_err());
        assert!(run_study(&[Cell { rho: 0.0, d: 2, n: 3 }], &cfg).is_err());
    }
}
