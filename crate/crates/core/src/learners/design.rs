use super::{InterceptMode, Intercepts, TrainConfig};
use crate::dataset::GroupedDataset;
use crate::error::{Error, Result};
use crate::group::GroupId;
use std::collections::BTreeMap;

/// Weighted, standardised design matrix with intercept blocks.
///
/// Intercepts are never penalised, so for squared loss they are profiled out
/// by centring features and labels within each intercept block (one block for
/// a shared intercept, one per source group otherwise).
pub(crate) struct Design {
    /// Standardised feature columns.
    pub cols: Vec<Vec<f64>>,
    /// Labels; centred within blocks for squared loss, raw for logistic.
    pub y: Vec<f64>,
    /// Instance weights normalised to sum to one.
    pub v: Vec<f64>,
    pub scale: Vec<f64>,
    /// Intercept block keys; `None` for a shared intercept.
    pub blocks: Option<Vec<GroupId>>,
    pub block_of: Vec<usize>,
    /// Per-block feature offsets subtracted before scaling.
    pub x_offsets: Vec<Vec<f64>>,
    /// Per-block label means (squared loss only).
    pub y_means: Vec<f64>,
}

/// Intercept block keys (`None` when shared), block of each row, normalised row weights.
type Blocks = (Option<Vec<GroupId>>, Vec<usize>, Vec<f64>);

impl Design {
    fn blocks_and_weights(dataset: &GroupedDataset, config: &TrainConfig) -> Result<Blocks> {
        let insts = dataset.instances();
        let (blocks, block_of) = match config.intercept_mode {
            InterceptMode::Shared => (None, vec![0; insts.len()]),
            InterceptMode::PerGroup => {
                let keys: Vec<GroupId> = dataset.source_groups().cloned().collect();
                let pos: BTreeMap<&GroupId, usize> = keys.iter().enumerate().map(|(i, g)| (g, i)).collect();
                let block_of = insts.iter().map(|i| pos[&i.source_group]).collect();
                (Some(keys), block_of)
            }
        };
        let raw: Vec<f64> = insts.iter().map(|i| config.weight_of(&i.source_group)).collect();
        let total: f64 = raw.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::DegenerateDesign("total training weight is zero".into()));
        }
        Ok((blocks, block_of, raw.into_iter().map(|w| w / total).collect()))
    }

    fn n_blocks(blocks: &Option<Vec<GroupId>>) -> usize {
        blocks.as_ref().map_or(1, Vec::len)
    }

    /// Design for squared-loss families: centred within blocks, then scaled.
    pub fn centered(dataset: &GroupedDataset, config: &TrainConfig) -> Result<Design> {
        let (blocks, block_of, v) = Self::blocks_and_weights(dataset, config)?;
        let k = Self::n_blocks(&blocks);
        let d = dataset.feature_dim();
        let insts = dataset.instances();
        let mut mass = vec![0.0; k];
        let mut x_offsets = vec![vec![0.0; d]; k];
        let mut y_means = vec![0.0; k];
        for (i, inst) in insts.iter().enumerate() {
            let b = block_of[i];
            mass[b] += v[i];
            y_means[b] += v[i] * inst.label;
            for (m, x) in x_offsets[b].iter_mut().zip(&inst.features) {
                *m += v[i] * x;
            }
        }
        for b in 0..k {
            y_means[b] /= mass[b];
            x_offsets[b].iter_mut().for_each(|m| *m /= mass[b]);
        }
        let y = insts
            .iter()
            .enumerate()
            .map(|(i, inst)| inst.label - y_means[block_of[i]])
            .collect();
        let (cols, scale) = scaled_columns(dataset, &v, |i, j| x_offsets[block_of[i]][j]);
        Ok(Design {
            cols,
            y,
            v,
            scale,
            blocks,
            block_of,
            x_offsets,
            y_means,
        })
    }

    /// Design for logistic loss: globally standardised features, raw labels;
    /// intercepts stay explicit parameters.
    pub fn standardized(dataset: &GroupedDataset, config: &TrainConfig) -> Result<Design> {
        let (blocks, block_of, v) = Self::blocks_and_weights(dataset, config)?;
        let k = Self::n_blocks(&blocks);
        let d = dataset.feature_dim();
        let insts = dataset.instances();
        let mut mean = vec![0.0; d];
        for (inst, w) in insts.iter().zip(&v) {
            for (m, x) in mean.iter_mut().zip(&inst.features) {
                *m += w * x;
            }
        }
        let (cols, scale) = scaled_columns(dataset, &v, |_, j| mean[j]);
        Ok(Design {
            cols,
            y: dataset.labels(),
            v,
            scale,
            blocks,
            block_of,
            x_offsets: vec![mean; k],
            y_means: vec![0.0; k],
        })
    }

    pub fn n_blocks_used(&self) -> usize {
        Self::n_blocks(&self.blocks)
    }

    /// Maps standardised coefficients and per-block offsets (label means for
    /// squared loss, fitted intercepts for logistic) back to raw features.
    pub fn unstandardize(&self, gamma: &[f64], block_offsets: &[f64]) -> (Vec<f64>, Intercepts) {
        let beta: Vec<f64> = gamma
            .iter()
            .zip(&self.scale)
            .map(|(g, s)| if *s > 0.0 { g / s } else { 0.0 })
            .collect();
        let icpt: Vec<f64> = block_offsets
            .iter()
            .zip(&self.x_offsets)
            .map(|(c, xm)| c - beta.iter().zip(xm).map(|(b, m)| b * m).sum::<f64>())
            .collect();
        let intercepts = match &self.blocks {
            None => Intercepts::Shared(icpt[0]),
            Some(keys) => Intercepts::PerGroup(keys.iter().cloned().zip(icpt).collect()),
        };
        (beta, intercepts)
    }
}

/// Columns `(x_ij - offset(i, j)) / s_j` with `s_j` the weighted RMS of the
/// offset column. Numerically constant columns get scale 0 and are zeroed.
fn scaled_columns(
    dataset: &GroupedDataset,
    v: &[f64],
    offset: impl Fn(usize, usize) -> f64,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d = dataset.feature_dim();
    let insts = dataset.instances();
    let mut cols = Vec::with_capacity(d);
    let mut scale = Vec::with_capacity(d);
    for j in 0..d {
        let mut col: Vec<f64> = insts
            .iter()
            .enumerate()
            .map(|(i, inst)| inst.features[j] - offset(i, j))
            .collect();
        let ss: f64 = col.iter().zip(v).map(|(x, w)| w * x * x).sum();
        let magnitude = insts.iter().map(|i| i.features[j].abs()).fold(1.0, f64::max);
        let s = ss.sqrt();
        if s > 1e-12 * magnitude {
            col.iter_mut().for_each(|x| *x /= s);
            scale.push(s);
        } else {
            col.iter_mut().for_each(|x| *x = 0.0);
            scale.push(0.0);
        }
        cols.push(col);
    }
    (cols, scale)
}
