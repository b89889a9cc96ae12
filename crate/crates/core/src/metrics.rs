//! Per-group risks. Everything is reported in risk orientation (lower is
//! better); AUROC enters as `1 - AUROC`.

use crate::dataset::{GroupedDataset, Instance};
use crate::error::{Error, Result};
use crate::group::GroupId;
use crate::learners::{predict, LinearModel};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    #[default]
    Mse,
    AurocComplement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRisk {
    pub group: GroupId,
    pub metric: Metric,
    pub value: f64,
    pub n_eval: usize,
}

/// Mean squared error of `scorer` over the instances tagged with `group`.
pub fn mse_with<F>(evalset: &GroupedDataset, group: &GroupId, mut scorer: F) -> Result<GroupRisk>
where
    F: FnMut(&Instance) -> Result<f64>,
{
    let (mut sum, mut n) = (0.0, 0usize);
    for inst in evalset.eval_slice(group) {
        sum += (scorer(inst)? - inst.label).powi(2);
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyEvaluationGroup(group.clone()));
    }
    Ok(GroupRisk {
        group: group.clone(),
        metric: Metric::Mse,
        value: sum / n as f64,
        n_eval: n,
    })
}

pub fn mse_risk(model: &LinearModel, evalset: &GroupedDataset, group: &GroupId) -> Result<GroupRisk> {
    mse_with(evalset, group, |inst| {
        predict(model, &inst.features, &inst.source_group)
    })
}

/// Mann-Whitney AUROC with midrank tie handling, O(n log n).
pub fn auroc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&y| y == 1.0).count();
    let n_neg = labels.iter().filter(|&&y| y == 0.0).count();
    if n_pos + n_neg != labels.len() {
        return Err(Error::InvalidDataset("AUROC labels must be 0 or 1".into()));
    }
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClassUndefined(format!(
            "{n_pos} positives, {n_neg} negatives"
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidDataset("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of (1-based) midranks of positives
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let midrank = (start + end + 1) as f64 / 2.0;
        let positives = order[start..end].iter().filter(|&&i| labels[i] == 1.0).count();
        rank_sum += midrank * positives as f64;
        start = end;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

pub fn auroc_complement_with<F>(evalset: &GroupedDataset, group: &GroupId, mut scorer: F) -> Result<GroupRisk>
where
    F: FnMut(&Instance) -> Result<f64>,
{
    let (mut scores, mut labels) = (Vec::new(), Vec::new());
    for inst in evalset.eval_slice(group) {
        scores.push(scorer(inst)?);
        labels.push(inst.label);
    }
    if scores.is_empty() {
        return Err(Error::EmptyEvaluationGroup(group.clone()));
    }
    let auc = auroc(&scores, &labels).map_err(|e| match e {
        Error::SingleClassUndefined(m) => Error::SingleClassUndefined(format!("group {group}: {m}")),
        e => e,
    })?;
    Ok(GroupRisk {
        group: group.clone(),
        metric: Metric::AurocComplement,
        value: 1.0 - auc,
        n_eval: scores.len(),
    })
}

pub fn group_auroc(model: &LinearModel, evalset: &GroupedDataset, group: &GroupId) -> Result<GroupRisk> {
    auroc_complement_with(evalset, group, |inst| {
        predict(model, &inst.features, &inst.source_group)
    })
}

/// Risk of `scorer` on `group` under `metric`.
pub fn group_risk_with<F>(metric: Metric, evalset: &GroupedDataset, group: &GroupId, scorer: F) -> Result<GroupRisk>
where
    F: FnMut(&Instance) -> Result<f64>,
{
    match metric {
        Metric::Mse => mse_with(evalset, group, scorer),
        Metric::AurocComplement => auroc_complement_with(evalset, group, scorer),
    }
}

pub fn group_risk(metric: Metric, model: &LinearModel, evalset: &GroupedDataset, group: &GroupId) -> Result<GroupRisk> {
    group_risk_with(metric, evalset, group, |inst| {
        predict(model, &inst.features, &inst.source_group)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Task;
    use crate::learners::{Family, Intercepts};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// O(n^2) pairwise oracle.
    fn pairwise_auroc(scores: &[f64], labels: &[f64]) -> f64 {
        let (mut credit, mut pairs) = (0.0, 0.0);
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] == 1.0 && labels[j] == 0.0 {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        credit += 1.0;
                    } else if scores[i] == scores[j] {
                        credit += 0.5;
                    }
                }
            }
        }
        credit / pairs
    }

    fn constant_model(b: f64) -> LinearModel {
        LinearModel {
            family: Family::Ols,
            weights: vec![0.0],
            intercepts: Intercepts::Shared(b),
            lambda: 0.0,
        }
    }

    fn evalset(rows: &[(f64, f64)]) -> GroupedDataset {
        let inst = rows
            .iter()
            .map(|&(x, y)| Instance::new(vec![x], y, "A".into()).self_evaluated())
            .collect();
        GroupedDataset::new(inst, 1, Task::Regression).unwrap()
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.9, 0.8, 0.1], &[1.0, 1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.3; 6], &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]).unwrap(), 0.5);
        assert_eq!(auroc(&[0.2, 0.8, 0.5, 0.5], &[0.0, 1.0, 1.0, 0.0]).unwrap(), 0.875);
        assert_eq!(pairwise_auroc(&[0.2, 0.8, 0.5, 0.5], &[0.0, 1.0, 1.0, 0.0]), 0.875);
        assert!(matches!(
            auroc(&[0.1, 0.2], &[1.0, 1.0]),
            Err(Error::SingleClassUndefined(_))
        ));
    }

    #[test]
    fn rank_based_equals_pairwise_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let n = rng.random_range(2..200);
            // coarse grid of scores to force ties
            let scores: Vec<f64> = (0..n).map(|_| (rng.random_range(0..20) as f64) / 4.0).collect();
            let mut labels: Vec<f64> = (0..n).map(|_| f64::from(rng.random_bool(0.4))).collect();
            labels[0] = 1.0;
            labels[1] = 0.0;
            let fast = auroc(&scores, &labels).unwrap();
            assert!((fast - pairwise_auroc(&scores, &labels)).abs() < 1e-12);
        }
    }

    #[test]
    fn mse_examples() {
        let ev = evalset(&[(1.0, 2.0), (5.0, 2.0), (-3.0, 2.0)]);
        assert_eq!(mse_risk(&constant_model(0.0), &ev, &"A".into()).unwrap().value, 4.0);
        assert_eq!(mse_risk(&constant_model(2.0), &ev, &"A".into()).unwrap().value, 0.0);
        assert!(matches!(
            mse_risk(&constant_model(0.0), &ev, &"B".into()),
            Err(Error::EmptyEvaluationGroup(_))
        ));
    }

    #[test]
    fn mse_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<(f64, f64)> = (0..37)
            .map(|_| (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)))
            .collect();
        let model = LinearModel {
            weights: vec![0.7],
            ..constant_model(-1.3)
        };
        let mut naive = 0.0;
        for &(x, y) in &rows {
            let e = 0.7 * x - 1.3 - y;
            naive += e * e;
        }
        naive /= rows.len() as f64;
        let r = mse_risk(&model, &evalset(&rows), &"A".into()).unwrap();
        assert!((r.value - naive).abs() < 1e-12);
        assert_eq!(r.n_eval, 37);
    }

    #[test]
    fn group_auroc_orientation() {
        let ident = LinearModel {
            weights: vec![1.0],
            ..constant_model(0.0)
        };
        let rows = [(0.1, 0.0), (0.2, 0.0), (0.7, 1.0), (0.9, 1.0)];
        let inst: Vec<Instance> = rows
            .iter()
            .map(|&(x, y)| Instance::new(vec![x], y, "A".into()).self_evaluated())
            .collect();
        let ev = GroupedDataset::new(inst, 1, Task::BinaryClassification).unwrap();
        assert_eq!(group_auroc(&ident, &ev, &"A".into()).unwrap().value, 0.0);
        let flipped = LinearModel {
            weights: vec![-1.0],
            ..ident.clone()
        };
        assert_eq!(group_auroc(&flipped, &ev, &"A".into()).unwrap().value, 1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let inst: Vec<Instance> = (0..100)
            .map(|i| {
                Instance::new(vec![rng.random_range(-1.0..1.0)], f64::from(i % 3 == 0), "A".into()).self_evaluated()
            })
            .collect();
        let ev = GroupedDataset::new(inst, 1, Task::BinaryClassification).unwrap();
        let scores: Vec<f64> = ev.instances().iter().map(|i| i.features[0]).collect();
        let r = group_auroc(&ident, &ev, &"A".into()).unwrap();
        assert_eq!(r.value, 1.0 - auroc(&scores, &ev.labels()).unwrap());
    }

    proptest! {
        #[test]
        fn invariant_under_monotone_maps(
            pts in prop::collection::vec((-100i32..100, any::<bool>()), 2..80),
            a in 0.1f64..10.0,
            b in -5.0f64..5.0,
        ) {
            let mut labels: Vec<f64> = pts.iter().map(|p| f64::from(p.1)).collect();
            labels[0] = 1.0;
            labels[1] = 0.0;
            let scores: Vec<f64> = pts.iter().map(|p| p.0 as f64 / 10.0).collect();
            let base = auroc(&scores, &labels).unwrap();
            let mapped: Vec<f64> = scores.iter().map(|s| (a * s + b).tanh() + s.powi(3)).collect();
            prop_assert!((auroc(&mapped, &labels).unwrap() - base).abs() < 1e-12);
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            prop_assert!((auroc(&neg, &labels).unwrap() + base - 1.0).abs() < 1e-12);
        }
    }
}
