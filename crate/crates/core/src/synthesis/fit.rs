use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest Gram-matrix condition number accepted by the fitter.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Least-squares fit Σ c_k β^{e_k} of sampled profile values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonomialFit {
    pub exponents: Vec<u32>,
    pub coefficients: Vec<f64>,
    pub domain: (f64, f64),
    /// Max residual over the fitting grid.
    pub sup_error: f64,
    pub gram_condition: f64,
}

/// A fit restricted to the odd monomials β, β³, ….
pub type OddPolynomialFit = MonomialFit;

impl MonomialFit {
    pub fn eval(&self, beta: f64) -> f64 {
        self.exponents
            .iter()
            .zip(&self.coefficients)
            .map(|(&e, &c)| c * beta.powi(e as i32))
            .sum()
    }

    pub fn max_degree(&self) -> u32 {
        self.exponents.iter().copied().max().unwrap_or(0)
    }
}

fn vandermonde(grid: &[f64], exponents: &[u32]) -> DMatrix<f64> {
    DMatrix::from_fn(grid.len(), exponents.len(), |i, j| grid[i].powi(exponents[j] as i32))
}

fn lstsq(v: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let svd = v.clone().svd(true, true);
    let sv = &svd.singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = if v.ncols() > v.nrows() || min == 0.0 { f64::INFINITY } else { (max / min).powi(2) };
    let c = svd.solve(y, 0.0).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok((c, cond))
}

/// Fits `values` sampled at `grid` over β^{e} for the given exponents.
///
/// Prefixes of the exponent list are fitted too and the smallest sup error
/// wins, so the reported error never grows when exponents are appended.
pub fn fit_monomials(grid: &[f64], values: &[f64], exponents: &[u32]) -> Result<MonomialFit> {
    if grid.is_empty() || grid.len() != values.len() {
        return Err(Error::Grid("fit needs one value per grid point".into()));
    }
    if grid.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
        return Err(Error::Grid("fit grid must lie in (0, inf)".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite profile value".into()));
    }
    if exponents.is_empty() {
        return Err(Error::Spec("no monomials to fit with".into()));
    }
    let y = DVector::from_column_slice(values);
    let full = vandermonde(grid, exponents);
    let (_, condition) = lstsq(&full, &y)?;
    if condition > MAX_GRAM_CONDITION {
        return Err(Error::DegreeTooHigh { degree: *exponents.iter().max().expect("nonempty") as usize, condition });
    }
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut best: Option<MonomialFit> = None;
    for k in 1..=exponents.len() {
        let (c, _) = lstsq(&vandermonde(grid, &exponents[..k]), &y)?;
        let mut coefficients = c.as_slice().to_vec();
        coefficients.resize(exponents.len(), 0.0);
        let mut fit = MonomialFit {
            exponents: exponents.to_vec(),
            coefficients,
            domain: (lo, hi),
            sup_error: 0.0,
            gram_condition: condition,
        };
        fit.sup_error = grid.iter().zip(values).map(|(&b, &v)| (fit.eval(b) - v).abs()).fold(0.0, f64::max);
        if best.as_ref().map_or(true, |b| fit.sup_error < b.sup_error) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one prefix"))
}

pub fn odd_exponents(degree_bound: usize) -> Result<Vec<u32>> {
    if degree_bound == 0 || degree_bound % 2 == 0 {
        return Err(Error::Spec(format!("degree bound must be odd and at least 1, got {degree_bound}")));
    }
    Ok((1..=degree_bound as u32).step_by(2).collect())
}

/// Least-squares fit over {β, β³, …, β^degree_bound}.
pub fn fit_odd_polynomial(grid: &[f64], values: &[f64], degree_bound: usize) -> Result<OddPolynomialFit> {
    fit_monomials(grid, values, &odd_exponents(degree_bound)?)
}
