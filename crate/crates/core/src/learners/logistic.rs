//! Weighted logistic regression by gradient descent with Armijo backtracking,
//! starting from zero. Penalty `lambda/2 * |gamma|^2` on the standardised
//! slopes; intercepts are free.

use super::design::Design;
use super::{Family, LinearModel, TrainConfig};
use crate::dataset::GroupedDataset;
use crate::error::{Error, Result};

/// Numerically stable `ln(1 + e^s)`.
fn softplus(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Log-loss of a linear score against a {0,1} label.
pub fn log_loss(score: f64, label: f64) -> f64 {
    softplus(score) - label * score
}

/// Parameter layout: `d` slopes followed by one intercept per block.
pub struct LogisticProblem<'a> {
    pub cols: &'a [Vec<f64>],
    pub y: &'a [f64],
    pub v: &'a [f64],
    pub block_of: &'a [usize],
    pub n_blocks: usize,
    pub lambda: f64,
}

impl LogisticProblem<'_> {
    pub fn n_params(&self) -> usize {
        self.cols.len() + self.n_blocks
    }

    fn scores(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.cols.len();
        (0..self.y.len())
            .map(|i| theta[d + self.block_of[i]] + self.cols.iter().zip(theta).map(|(c, t)| c[i] * t).sum::<f64>())
            .collect()
    }

    pub fn loss(&self, theta: &[f64]) -> f64 {
        let d = self.cols.len();
        let data: f64 = self
            .scores(theta)
            .iter()
            .zip(self.y)
            .zip(self.v)
            .map(|((s, y), w)| w * log_loss(*s, *y))
            .sum();
        data + 0.5 * self.lambda * theta[..d].iter().map(|t| t * t).sum::<f64>()
    }

    pub fn loss_and_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let d = self.cols.len();
        let scores = self.scores(theta);
        let mut grad = vec![0.0; self.n_params()];
        let mut loss = 0.0;
        for i in 0..self.y.len() {
            loss += self.v[i] * log_loss(scores[i], self.y[i]);
            let r = self.v[i] * (sigmoid(scores[i]) - self.y[i]);
            for (g, c) in grad[..d].iter_mut().zip(self.cols) {
                *g += r * c[i];
            }
            grad[d + self.block_of[i]] += r;
        }
        for j in 0..d {
            loss += 0.5 * self.lambda * theta[j] * theta[j];
            grad[j] += self.lambda * theta[j];
        }
        (loss, grad)
    }

    /// Gradient descent; stops once a step moves no parameter by `tol` or more.
    pub fn minimize(&self, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        let mut theta = vec![0.0; self.n_params()];
        let mut step = 1.0;
        let mut last_change = f64::INFINITY;
        for _ in 0..max_iter {
            let (f, g) = self.loss_and_grad(&theta);
            let g2: f64 = g.iter().map(|x| x * x).sum();
            if g2 == 0.0 {
                return Ok(theta);
            }
            step *= 2.0;
            let candidate = loop {
                let cand: Vec<f64> = theta.iter().zip(&g).map(|(t, gi)| t - step * gi).collect();
                if self.loss(&cand) <= f - 0.5 * step * g2 || step < 1e-20 {
                    break cand;
                }
                step *= 0.5;
            };
            last_change = candidate
                .iter()
                .zip(&theta)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            theta = candidate;
            if last_change < tol {
                return Ok(theta);
            }
        }
        Err(Error::NonConvergence {
            max_iter,
            last_iterate: theta,
            residual: last_change,
        })
    }
}

pub(crate) fn fit(dataset: &GroupedDataset, config: &TrainConfig, lambda: f64) -> Result<LinearModel> {
    let design = Design::standardized(dataset, config)?;
    let problem = LogisticProblem {
        cols: &design.cols,
        y: &design.y,
        v: &design.v,
        block_of: &design.block_of,
        n_blocks: design.n_blocks_used(),
        lambda,
    };
    let theta = problem.minimize(config.tol, config.max_iter)?;
    let d = design.cols.len();
    let (weights, intercepts) = design.unstandardize(&theta[..d], &theta[d..]);
    Ok(LinearModel {
        family: Family::Logistic,
        weights,
        intercepts,
        lambda,
    })
}
