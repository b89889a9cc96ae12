use super::{fit_with_lambda, logistic::log_loss, predict, Family, LinearModel, Penalty, TrainConfig};
use crate::dataset::GroupedDataset;
use crate::error::{Error, Result};
use crate::sampling::stratified_folds;
use crate::seed::{Purpose, SeedSpec};

/// Group-weighted mean training loss of `model` on `dataset`: squared error
/// for regression families, log-loss for logistic.
pub fn validation_loss(model: &LinearModel, dataset: &GroupedDataset, config: &TrainConfig) -> Result<f64> {
    let (mut total, mut mass) = (0.0, 0.0);
    for inst in dataset.instances() {
        let w = config.weight_of(&inst.source_group);
        let s = predict(model, &inst.features, &inst.source_group)?;
        let loss = match model.family {
            Family::Logistic => log_loss(s, inst.label),
            _ => (s - inst.label).powi(2),
        };
        total += w * loss;
        mass += w;
    }
    if mass == 0.0 {
        return Err(Error::DegenerateDesign("empty validation fold".into()));
    }
    Ok(total / mass)
}

/// Mean validation loss for each candidate penalty, in grid order.
pub(crate) fn fold_losses(
    dataset: &GroupedDataset,
    config: &TrainConfig,
    grid: &[f64],
    k: usize,
    seed: &SeedSpec,
) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("cv needs at least 2 folds, got {k}")));
    }
    if dataset.len() < k {
        return Err(Error::InvalidConfig(format!(
            "cv with {k} folds needs at least {k} instances, got {}",
            dataset.len()
        )));
    }
    let folds = stratified_folds(dataset, k, &seed.child(Purpose::CvFolds, seed.trial, seed.alloc_index));
    let splits: Vec<(GroupedDataset, GroupedDataset)> = (0..k)
        .map(|f| {
            let (mut tr, mut va) = (Vec::new(), Vec::new());
            for (inst, &fold) in dataset.instances().iter().zip(&folds) {
                if fold == f { &mut va } else { &mut tr }.push(inst.clone());
            }
            Ok((
                GroupedDataset::new(tr, dataset.feature_dim(), dataset.task())?,
                GroupedDataset::new(va, dataset.feature_dim(), dataset.task())?,
            ))
        })
        .collect::<Result<_>>()?;
    grid.iter()
        .map(|&lambda| {
            let mut sum = 0.0;
            for (tr, va) in &splits {
                let model = fit_with_lambda(tr, config, lambda)?;
                sum += validation_loss(&model, va, config)?;
            }
            Ok(sum / k as f64)
        })
        .collect()
}

/// Penalty from the configured grid with the lowest mean k-fold validation
/// loss. Folds are stratified by source group; ties go to the larger penalty.
pub fn cv_select_lambda(dataset: &GroupedDataset, config: &TrainConfig, k: usize, seed: &SeedSpec) -> Result<f64> {
    let grid = match &config.penalty {
        Penalty::Cv { grid, .. } => grid.clone(),
        Penalty::Lambda(l) => vec![*l],
    };
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let losses = fold_losses(dataset, config, &grid, k, seed)?;
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[a].total_cmp(&grid[b]));
    let mut best = order[0];
    for &i in &order[1..] {
        let tie = (losses[i] - losses[best]).abs() <= 1e-12 * losses[best].abs().max(f64::MIN_POSITIVE);
        if losses[i] < losses[best] || tie {
            best = i;
        }
    }
    Ok(grid[best])
}
