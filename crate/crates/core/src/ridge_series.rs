//! Power-series ridge regression of the indicators `1(Y >= t)` on `X`.
//!
//! Fits `G_x(t) = P(Y >= t | X = x)` as a linear probability model at every
//! observed threshold `t = y_j`. The shifted Gram matrix `PᵀP + nλI` does not
//! depend on `t`, so it is factorized once and reused for all `n` right-hand
//! sides.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::dataset::{CovariateMap, Matrix};
use crate::error::{Error, Result};

pub const DEFAULT_BASIS_CAP: usize = 10_000;

/// Multi-indices of a total-degree power basis, graded then lexicographic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisSpec {
    d: usize,
    degree: u32,
    exponents: Vec<Vec<u32>>,
}

impl BasisSpec {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn k(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    /// Monomials of `point` in basis order, `0^0 = 1`.
    pub fn evaluate_into(&self, point: &[f64], out: &mut [f64]) {
        let q = self.degree as usize;
        let mut powers = vec![1.0; self.d * (q + 1)];
        for (m, &v) in point.iter().enumerate() {
            for e in 1..=q {
                powers[m * (q + 1) + e] = powers[m * (q + 1) + e - 1] * v;
            }
        }
        for (slot, alpha) in out.iter_mut().zip(&self.exponents) {
            *slot = alpha
                .iter()
                .enumerate()
                .map(|(m, &e)| powers[m * (q + 1) + e as usize])
                .product();
        }
    }
}

fn binomial(n: u128, k: u128) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

pub fn basis_index_set(d: usize, degree: u32) -> Result<BasisSpec> {
    basis_index_set_capped(d, degree, DEFAULT_BASIS_CAP)
}

pub fn basis_index_set_capped(d: usize, degree: u32, cap: usize) -> Result<BasisSpec> {
    if d == 0 {
        return Err(Error::NoCovariates);
    }
    let k = binomial(d as u128 + degree as u128, degree as u128).unwrap_or(u128::MAX);
    if k > cap as u128 {
        return Err(Error::BasisTooLarge { k, cap });
    }
    let mut exponents = Vec::with_capacity(k as usize);
    let mut current = vec![0u32; d];
    for total in 0..=degree {
        push_lex(&mut current, 0, total, &mut exponents);
    }
    Ok(BasisSpec {
        d,
        degree,
        exponents,
    })
}

// Enumerates all tuples of the given total in ascending lexicographic order.
fn push_lex(current: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(current.to_vec());
        return;
    }
    for e in 0..=remaining {
        current[pos] = e;
        push_lex(current, pos + 1, remaining - e, out);
    }
    current[pos] = 0;
}

/// `P[i][k] = xs_i^{α_k}`.
pub fn design_matrix(xs: &Matrix, basis: &BasisSpec) -> Result<DMatrix<f64>> {
    if xs.cols() != basis.d {
        return Err(Error::DimensionMismatch {
            what: "design matrix columns",
            expected: basis.d,
            found: xs.cols(),
        });
    }
    let k = basis.k();
    let mut p = DMatrix::zeros(xs.rows(), k);
    let mut row = vec![0.0; k];
    for i in 0..xs.rows() {
        basis.evaluate_into(xs.row(i), &mut row);
        for (c, v) in row.iter().enumerate() {
            p[(i, c)] = *v;
        }
    }
    Ok(p)
}

/// `Pᵀ 1(y >= y_j)` for every `j`, as a K × n matrix, via suffix sums over
/// the rows sorted by `y`.
pub fn indicator_cross_products(p: &DMatrix<f64>, y: &[f64]) -> DMatrix<f64> {
    let (n, k) = p.shape();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| y[b].total_cmp(&y[a]));

    let mut out = DMatrix::zeros(k, n);
    let mut acc = vec![0.0; k];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && y[order[end]] == y[order[start]] {
            end += 1;
        }
        for &i in &order[start..end] {
            for (c, a) in acc.iter_mut().enumerate() {
                *a += p[(i, c)];
            }
        }
        for &j in &order[start..end] {
            out.column_mut(j).copy_from_slice(&acc);
        }
        start = end;
    }
    out
}

/// Ridge coefficients for all `n` thresholds sharing one factorization.
#[derive(Debug, Clone)]
pub struct RidgeFit {
    p: DMatrix<f64>,
    pt: DMatrix<f64>,
    lambda: f64,
    factor: Cholesky<f64, Dyn>,
    betas: DMatrix<f64>,
}

impl RidgeFit {
    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn k(&self) -> usize {
        self.p.ncols()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// K × n; column `j` is the coefficient vector at threshold `y_j`.
    pub fn betas(&self) -> &DMatrix<f64> {
        &self.betas
    }

    /// `L Lᵀ` rebuilt from the stored factor.
    pub fn reconstructed_gram(&self) -> DMatrix<f64> {
        let l = self.factor.l();
        &l * l.transpose()
    }

    /// Solves the shifted system for an arbitrary right-hand side.
    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.factor.solve(rhs)
    }

    /// Rows `i` of `Ĝ` restricted to threshold columns `j0..j1`, row-major
    /// `n × (j1 - j0)`.
    pub fn ghat_block(&self, j0: usize, j1: usize, clamp: bool) -> Vec<f64> {
        let block = self.betas.columns(j0, j1 - j0).transpose() * &self.pt;
        // column-major (j1-j0) × n is row-major n × (j1-j0)
        let mut g = block.data.as_vec().clone();
        if clamp {
            g.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        }
        g
    }
}

pub fn ridge_fit_all(p: DMatrix<f64>, y: &[f64], lambda: f64) -> Result<RidgeFit> {
    let (n, k) = p.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            what: "ridge response",
            expected: n,
            found: y.len(),
        });
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "ridge penalty must be positive and finite, got {lambda}"
        )));
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::Factorization);
    }
    let pt = p.transpose();
    let mut gram = &pt * &p;
    for c in 0..k {
        gram[(c, c)] += n as f64 * lambda;
    }
    let factor = Cholesky::new(gram).ok_or(Error::Factorization)?;
    let rhs = indicator_cross_products(&p, y);
    let betas = factor.solve(&rhs);
    Ok(RidgeFit {
        p,
        pt,
        lambda,
        factor,
        betas,
    })
}

/// `g[i][j] = Ĝ_{X_i}(Y_j)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GhatMatrix {
    n: usize,
    g: Vec<f64>,
}

impl GhatMatrix {
    pub fn from_row_major(n: usize, g: Vec<f64>) -> Result<Self> {
        if g.len() != n * n {
            return Err(Error::DimensionMismatch {
                what: "ghat matrix",
                expected: n * n,
                found: g.len(),
            });
        }
        Ok(Self { n, g })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.g[i * self.n..(i + 1) * self.n]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.g[i * self.n + j]
    }
}

pub fn ghat_matrix(fit: &RidgeFit, clamp: bool) -> GhatMatrix {
    let n = fit.n();
    GhatMatrix {
        n,
        g: fit.ghat_block(0, n, clamp),
    }
}

/// Basis, covariate map, and ridge fit bundled so that new points can be
/// evaluated consistently with the training data.
#[derive(Debug, Clone)]
pub struct RidgeModel {
    pub basis: BasisSpec,
    pub offsets: Vec<f64>,
    pub scales: Vec<f64>,
    pub fit: RidgeFit,
}

impl RidgeModel {
    pub fn fit(
        x: &Matrix,
        y: &[f64],
        degree: u32,
        lambda: f64,
        map: &CovariateMap,
        basis_cap: usize,
    ) -> Result<Self> {
        let scaled = map.apply(x)?;
        let basis = basis_index_set_capped(x.cols(), degree, basis_cap)?;
        let p = design_matrix(&scaled.xs, &basis)?;
        let fit = ridge_fit_all(p, y, lambda)?;
        Ok(Self {
            basis,
            offsets: scaled.offsets,
            scales: scaled.scales,
            fit,
        })
    }

    /// `Ĝ_point(y_j)` for every training threshold `j`.
    pub fn predict(&self, point: &[f64]) -> Vec<f64> {
        let xs: Vec<f64> = point
            .iter()
            .zip(self.offsets.iter().zip(&self.scales))
            .map(|(v, (o, s))| (v - o) / s)
            .collect();
        let mut basis_row = vec![0.0; self.basis.k()];
        self.basis.evaluate_into(&xs, &mut basis_row);
        let b = self.fit.betas();
        (0..b.ncols())
            .map(|j| b.column(j).iter().zip(&basis_row).map(|(a, c)| a * c).sum())
            .collect()
    }
}
