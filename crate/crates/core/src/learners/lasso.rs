//! Lasso by cyclic coordinate descent with soft-thresholding.
//!
//! Minimises `1/2 * sum_i v_i (y_i - z_i . gamma)^2 + lambda * |gamma|_1`
//! over standardised features (weights `v` sum to one). Intercepts are
//! unpenalised and handled by centring.

use super::design::Design;
use super::{Family, LinearModel, TrainConfig};
use crate::dataset::GroupedDataset;
use crate::error::{Error, Result};

pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct CdFit {
    pub coef: Vec<f64>,
    /// Objective after each full sweep, starting with the value at zero.
    pub objective_trace: Vec<f64>,
    pub sweeps: usize,
}

pub fn objective(cols: &[Vec<f64>], y: &[f64], v: &[f64], coef: &[f64], lambda: f64) -> f64 {
    let mut loss = 0.0;
    for i in 0..y.len() {
        let pred: f64 = cols.iter().zip(coef).map(|(c, b)| c[i] * b).sum();
        loss += v[i] * (y[i] - pred).powi(2);
    }
    0.5 * loss + lambda * coef.iter().map(|b| b.abs()).sum::<f64>()
}

/// Runs sweeps until the largest coefficient change in a sweep is below
/// `tol`. Column-major input: `cols[j][i]` is feature `j` of row `i`.
pub fn coordinate_descent(
    cols: &[Vec<f64>],
    y: &[f64],
    v: &[f64],
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<CdFit> {
    let d = cols.len();
    let mut coef = vec![0.0; d];
    let mut resid = y.to_vec();
    let curvature: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().zip(v).map(|(x, w)| w * x * x).sum())
        .collect();
    let mut trace = vec![objective(cols, y, v, &coef, lambda)];
    let mut max_change = f64::INFINITY;
    for sweep in 1..=max_iter {
        max_change = 0.0f64;
        for j in 0..d {
            if curvature[j] <= 0.0 {
                continue;
            }
            let col = &cols[j];
            let grad: f64 = col.iter().zip(&resid).zip(v).map(|((x, r), w)| w * x * r).sum();
            let updated = soft_threshold(grad + curvature[j] * coef[j], lambda) / curvature[j];
            let step = updated - coef[j];
            if step != 0.0 {
                resid.iter_mut().zip(col).for_each(|(r, x)| *r -= step * x);
                coef[j] = updated;
                max_change = max_change.max(step.abs());
            }
        }
        trace.push(objective(cols, y, v, &coef, lambda));
        if max_change < tol {
            return Ok(CdFit {
                coef,
                objective_trace: trace,
                sweeps: sweep,
            });
        }
    }
    Err(Error::NonConvergence {
        max_iter,
        last_iterate: coef,
        residual: max_change,
    })
}

pub(crate) fn fit(dataset: &GroupedDataset, config: &TrainConfig, lambda: f64) -> Result<LinearModel> {
    let design = Design::centered(dataset, config)?;
    let cd = coordinate_descent(&design.cols, &design.y, &design.v, lambda, config.tol, config.max_iter)?;
    let (weights, intercepts) = design.unstandardize(&cd.coef, &design.y_means);
    Ok(LinearModel {
        family: Family::Lasso,
        weights,
        intercepts,
        lambda,
    })
}
