use crate::error::{Error, Result};
use crate::group::GroupId;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Regression,
    BinaryClassification,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub features: Vec<f64>,
    pub label: f64,
    pub source_group: GroupId,
    /// Evaluation groups this instance belongs to; empty for training-only rows.
    pub eval_groups: BTreeSet<GroupId>,
}

impl Instance {
    pub fn new(features: Vec<f64>, label: f64, source_group: GroupId) -> Self {
        Instance {
            features,
            label,
            source_group,
            eval_groups: BTreeSet::new(),
        }
    }

    /// Tags the instance with its own source group as the only evaluation group.
    pub fn self_evaluated(mut self) -> Self {
        self.eval_groups.insert(self.source_group.clone());
        self
    }

    /// Total order on content, used to make sampling independent of row order.
    pub(crate) fn content_cmp(&self, other: &Self) -> Ordering {
        self.content_cmp_features(other)
            .then_with(|| self.eval_groups.cmp(&other.eval_groups))
    }

    /// Like `content_cmp` but ignoring evaluation-group tags.
    pub(crate) fn content_cmp_features(&self, other: &Self) -> Ordering {
        self.features
            .iter()
            .zip(&other.features)
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
            .then_with(|| self.label.total_cmp(&other.label))
            .then_with(|| self.source_group.cmp(&other.source_group))
    }
}

/// Labelled instances, each tagged with exactly one source group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedDataset {
    instances: Vec<Instance>,
    feature_dim: usize,
    task: Task,
    by_source: BTreeMap<GroupId, Vec<usize>>,
}

impl GroupedDataset {
    pub fn new(instances: Vec<Instance>, feature_dim: usize, task: Task) -> Result<Self> {
        if feature_dim == 0 {
            return Err(Error::InvalidDataset("feature_dim must be positive".into()));
        }
        let mut by_source: BTreeMap<GroupId, Vec<usize>> = BTreeMap::new();
        for (i, inst) in instances.iter().enumerate() {
            if inst.features.len() != feature_dim {
                return Err(Error::DimensionMismatch {
                    expected: feature_dim,
                    got: inst.features.len(),
                });
            }
            if !inst.label.is_finite() || inst.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!("instance {i} has non-finite values")));
            }
            if task == Task::BinaryClassification && inst.label != 0.0 && inst.label != 1.0 {
                return Err(Error::InvalidDataset(format!(
                    "instance {i} has label {} but classification labels must be 0 or 1",
                    inst.label
                )));
            }
            by_source.entry(inst.source_group.clone()).or_default().push(i);
        }
        Ok(GroupedDataset {
            instances,
            feature_dim,
            task,
            by_source,
        })
    }

    pub fn empty(feature_dim: usize, task: Task) -> Result<Self> {
        Self::new(Vec::new(), feature_dim, task)
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn into_instances(self) -> Vec<Instance> {
        self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn source_groups(&self) -> impl Iterator<Item = &GroupId> {
        self.by_source.keys()
    }

    pub fn count(&self, group: &GroupId) -> usize {
        self.by_source.get(group).map_or(0, Vec::len)
    }

    pub fn counts(&self) -> BTreeMap<GroupId, usize> {
        self.by_source.iter().map(|(g, idx)| (g.clone(), idx.len())).collect()
    }

    /// Indices of the instances drawn from `group`.
    pub fn indices_of(&self, group: &GroupId) -> &[usize] {
        self.by_source.get(group).map_or(&[], Vec::as_slice)
    }

    /// All evaluation groups that tag at least one instance.
    pub fn eval_groups(&self) -> BTreeSet<GroupId> {
        self.instances
            .iter()
            .flat_map(|i| i.eval_groups.iter().cloned())
            .collect()
    }

    /// Instances whose evaluation groups contain `group`.
    pub fn eval_slice<'a>(&'a self, group: &'a GroupId) -> impl Iterator<Item = &'a Instance> + 'a {
        self.instances.iter().filter(move |i| i.eval_groups.contains(group))
    }

    pub fn labels(&self) -> Vec<f64> {
        self.instances.iter().map(|i| i.label).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(x: f64, y: f64, g: &str) -> Instance {
        Instance::new(vec![x], y, GroupId::new(g))
    }

    #[test]
    fn counts_and_index() {
        let ds = GroupedDataset::new(
            vec![inst(1.0, 0.0, "A"), inst(2.0, 1.0, "B"), inst(3.0, 1.0, "A")],
            1,
            Task::BinaryClassification,
        )
        .unwrap();
        assert_eq!(ds.count(&"A".into()), 2);
        assert_eq!(ds.count(&"C".into()), 0);
        assert_eq!(ds.indices_of(&"A".into()), &[0, 2]);
    }

    #[test]
    fn rejects_bad_labels_and_dims() {
        let bad_label = GroupedDataset::new(vec![inst(1.0, 0.5, "A")], 1, Task::BinaryClassification);
        assert!(matches!(bad_label, Err(Error::InvalidDataset(_))));
        let bad_dim = GroupedDataset::new(vec![inst(1.0, 0.5, "A")], 2, Task::Regression);
        assert!(matches!(bad_dim, Err(Error::DimensionMismatch { .. })));
        assert!(GroupedDataset::empty(0, Task::Regression).is_err());
    }
}
