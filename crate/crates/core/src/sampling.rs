use crate::allocation::Allocation;
use crate::dataset::{GroupedDataset, Instance};
use crate::error::{Error, Result};
use crate::group::GroupId;
use crate::seed::SeedSpec;
use rand::seq::{index, SliceRandom};

/// Instance indices of `group`, sorted by content so that later random
/// selection does not depend on the row order of the input.
fn canonical_indices(dataset: &GroupedDataset, group: &GroupId) -> Vec<usize> {
    let inst = dataset.instances();
    let mut idx = dataset.indices_of(group).to_vec();
    idx.sort_by(|&a, &b| inst[a].content_cmp(&inst[b]));
    idx
}

/// Draws exactly `alloc[g]` instances of every source group uniformly without
/// replacement.
///
/// The result depends only on the dataset content, the allocation and the
/// seed; reordering the input rows does not change it.
pub fn subsample(dataset: &GroupedDataset, alloc: &Allocation, seed: &SeedSpec) -> Result<GroupedDataset> {
    for (g, n) in alloc.iter() {
        let available = dataset.count(g);
        if n > available {
            return Err(Error::AllocationExceedsAvailable {
                group: g.clone(),
                requested: n,
                available,
            });
        }
    }
    let mut rng = seed.rng();
    let mut out: Vec<Instance> = Vec::with_capacity(alloc.total());
    for g in dataset.source_groups() {
        let n = alloc.get(g);
        if n == 0 {
            continue;
        }
        let canon = canonical_indices(dataset, g);
        let mut picked = index::sample(&mut rng, canon.len(), n).into_vec();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|p| dataset.instances()[canon[p]].clone()));
    }
    GroupedDataset::new(out, dataset.feature_dim(), dataset.task())
}

/// Group-stratified random split into `(train, eval)`; `eval_fraction` of
/// every source group (rounded) goes to the evaluation part.
pub fn stratified_split(
    dataset: &GroupedDataset,
    eval_fraction: f64,
    seed: &SeedSpec,
) -> Result<(GroupedDataset, GroupedDataset)> {
    if !(0.0..=1.0).contains(&eval_fraction) {
        return Err(Error::InvalidConfig(format!(
            "eval fraction {eval_fraction} outside [0, 1]"
        )));
    }
    let mut rng = seed.rng();
    let (mut train, mut eval) = (Vec::new(), Vec::new());
    for g in dataset.source_groups() {
        let mut canon = canonical_indices(dataset, g);
        canon.shuffle(&mut rng);
        let n_eval = (eval_fraction * canon.len() as f64).round() as usize;
        let (e, t) = canon.split_at(n_eval);
        let mut e = e.to_vec();
        let mut t = t.to_vec();
        e.sort_unstable();
        t.sort_unstable();
        eval.extend(e.into_iter().map(|i| dataset.instances()[i].clone()));
        train.extend(t.into_iter().map(|i| dataset.instances()[i].clone()));
    }
    Ok((
        GroupedDataset::new(train, dataset.feature_dim(), dataset.task())?,
        GroupedDataset::new(eval, dataset.feature_dim(), dataset.task())?,
    ))
}

/// Fold label in `0..k` for every instance, balanced within each source group.
pub fn stratified_folds(dataset: &GroupedDataset, k: usize, seed: &SeedSpec) -> Vec<usize> {
    let mut rng = seed.rng();
    let mut folds = vec![0; dataset.len()];
    let mut offset = 0;
    for g in dataset.source_groups() {
        let mut canon = canonical_indices(dataset, g);
        canon.shuffle(&mut rng);
        for (pos, &i) in canon.iter().enumerate() {
            folds[i] = (pos + offset) % k;
        }
        // rotate so small groups do not all start in fold 0
        offset += canon.len();
    }
    folds
}
