//! Oracle-equivalence suites run by `acbc selftest`.
//!
//! Each suite pits a fast path against an independent slow recomputation on
//! seeded random instances.

use nalgebra::DMatrix;
use rand::Rng;

use crate::bias_correction::bias_estimate;
use crate::dataset::Matrix;
use crate::error::Result;
use crate::nn_graph::{build_nn, nn_brute_force, NnGraph};
use crate::ridge_series::{basis_index_set, design_matrix, ridge_fit_all, GhatMatrix};
use crate::rng::stream;
use crate::simulation::true_t;

/// Builder under test in the nearest-neighbor suite.
pub type NnBuilder = fn(&Matrix) -> Result<NnGraph>;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

const SUITE_TAG: u64 = 0x5E1F_7E57;

fn max_n(quick: bool, full: usize) -> usize {
    if quick {
        full.min(128)
    } else {
        full
    }
}

/// `builder` vs the quadratic scan on 100 instances; every third one is
/// integer-lattice data so distance ties actually occur.
pub fn nn_oracle_suite(builder: NnBuilder, quick: bool) -> SuiteOutcome {
    let upper = max_n(quick, 512);
    let mut failures = Vec::new();
    for inst in 0..100u64 {
        let mut rng = stream(&[SUITE_TAG, 1, inst]);
        let n = rng.random_range(2..=upper);
        let d = rng.random_range(1..=12);
        let lattice = inst % 3 == 0;
        let data = (0..n * d)
            .map(|_| {
                if lattice {
                    rng.random_range(0..4) as f64
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        let x = Matrix::from_row_major(n, d, data).expect("sized buffer");
        let same = match (builder(&x), nn_brute_force(&x)) {
            (Ok(a), Ok(b)) => a == b,
            _ => false,
        };
        if !same {
            failures.push(format!("#{inst} (n={n}, d={d})"));
        }
    }
    outcome("nn_oracle", 100, failures)
}

/// Row-wise bias estimate vs the literal double sum, tolerance 1e-12.
pub fn bias_oracle_suite(quick: bool) -> SuiteOutcome {
    let upper = max_n(quick, 300);
    let mut failures = Vec::new();
    for inst in 0..50u64 {
        let mut rng = stream(&[SUITE_TAG, 2, inst]);
        let n = rng.random_range(2..=upper);
        let g: Vec<f64> = (0..n * n).map(|_| rng.random_range(-0.5..1.5)).collect();
        let nn: Vec<usize> = (0..n)
            .map(|i| (i + rng.random_range(1..n)) % n)
            .collect();
        let graph = NnGraph {
            nn,
            dist: vec![0.0; n],
        };
        let gm = GhatMatrix::from_row_major(n, g).expect("sized buffer");
        let mut literal = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let a = gm.get(i, j);
                    literal += a * gm.get(graph.nn[i], j) - a * a;
                }
            }
        }
        literal /= (n * (n - 1)) as f64;
        match bias_estimate(&gm, &graph) {
            Ok(v) if (v - literal).abs() <= 1e-12 => {}
            _ => failures.push(format!("#{inst} (n={n})")),
        }
    }
    outcome("bias_oracle", 50, failures)
}

/// Normal-equation residuals of the shared-factorization fit, checked
/// against directly assembled systems over a penalty grid.
pub fn ridge_suite(quick: bool) -> SuiteOutcome {
    let upper = max_n(quick, 400);
    let mut failures = Vec::new();
    for inst in 0..20u64 {
        let mut rng = stream(&[SUITE_TAG, 3, inst]);
        let n = rng.random_range(10..=upper);
        let d = rng.random_range(1..=6);
        let degree = rng.random_range(0..=2);
        let x = Matrix::from_row_major(n, d, (0..n * d).map(|_| rng.random()).collect())
            .expect("sized buffer");
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..(n / 2).max(2)) as f64).collect();
        let basis = basis_index_set(d, degree).expect("small basis");
        let p = design_matrix(&x, &basis).expect("matching dims");
        let k = p.ncols();
        let pt = p.transpose();
        let gram = &pt * &p;
        let mut worst: f64 = 0.0;
        for lambda in [1e-6, 1e-3, (n as f64).powf(-0.85), 1.0, 100.0] {
            let Ok(fit) = ridge_fit_all(p.clone(), &y, lambda) else {
                worst = f64::INFINITY;
                continue;
            };
            let mut a = gram.clone();
            for c in 0..k {
                a[(c, c)] += n as f64 * lambda;
            }
            for j in 0..n {
                let ind = DMatrix::from_fn(n, 1, |i, _| if y[i] >= y[j] { 1.0 } else { 0.0 });
                let b = &pt * ind;
                let r = (&a * fit.betas().column(j) - &b).norm() / (1.0 + b.norm());
                worst = worst.max(r);
            }
        }
        if !(worst <= 1e-8) {
            failures.push(format!("#{inst} (n={n}, d={d}, q={degree}, residual {worst:.2e})"));
        }
    }
    outcome("ridge_normal_equations", 20, failures)
}

/// arcsin by its Maclaurin series, independent of `f64::asin`.
fn asin_series(x: f64) -> f64 {
    let mut coef = 1.0;
    let mut power = x;
    let mut sum = 0.0;
    for k in 0..400 {
        let term = coef * power / (2 * k + 1) as f64;
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
        coef *= (2 * k + 1) as f64 / (2 * k + 2) as f64;
        power *= x * x;
    }
    sum
}

pub fn true_t_suite() -> SuiteOutcome {
    let mut failures = Vec::new();
    let at = |rho: f64| true_t(rho).map(|t| t.value).unwrap_or(f64::NAN);
    if at(0.0) != 0.0 {
        failures.push("true_t(0) != 0".to_string());
    }
    if at(1.0) != 1.0 {
        failures.push("true_t(1) != 1".to_string());
    }
    for rho in [0.3, 0.5, 0.7, 0.9] {
        let reference = 3.0 / std::f64::consts::PI * asin_series((1.0 + rho * rho) / 2.0) - 0.5;
        if (at(rho) - reference).abs() > 1e-10 {
            failures.push(format!("true_t({rho}) off by {:.2e}", at(rho) - reference));
        }
    }
    outcome("true_t_closed_form", 6, failures)
}

fn outcome(name: &'static str, instances: usize, failures: Vec<String>) -> SuiteOutcome {
    let passed = failures.is_empty();
    let detail = if passed {
        format!("{instances} instances")
    } else {
        format!(
            "{} of {instances} failed: {}",
            failures.len(),
            failures.join(", ")
        )
    };
    SuiteOutcome {
        name,
        passed,
        detail,
    }
}

pub fn run_all_with(builder: NnBuilder, quick: bool) -> Vec<SuiteOutcome> {
    vec![
        nn_oracle_suite(builder, quick),
        bias_oracle_suite(quick),
        ridge_suite(quick),
        true_t_suite(),
    ]
}

pub fn run_all(quick: bool) -> Vec<SuiteOutcome> {
    run_all_with(build_nn, quick)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_matches_library_asin() {
        for x in [0.0, 0.1, 0.5, 0.625, 0.905] {
            assert!((asin_series(x) - x.asin()).abs() < 1e-14);
        }
    }

    #[test]
    fn quick_suites_pass() {
        for s in run_all(true) {
            assert!(s.passed, "{}: {}", s.name, s.detail);
        }
    }
}
