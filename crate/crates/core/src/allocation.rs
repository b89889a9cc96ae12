use crate::group::GroupId;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Requested number of training instances per source group.
///
/// Groups that are absent count as zero, so `{A: 5}` and `{A: 5, B: 0}`
/// compare equal.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Allocation {
    counts: BTreeMap<GroupId, usize>,
}

impl Allocation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<'a, I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, usize)>,
    {
        pairs.into_iter().map(|(g, n)| (GroupId::new(g), n)).collect()
    }

    pub fn with(mut self, group: GroupId, count: usize) -> Self {
        self.counts.insert(group, count);
        self
    }

    pub fn set(&mut self, group: GroupId, count: usize) {
        self.counts.insert(group, count);
    }

    pub fn get(&self, group: &GroupId) -> usize {
        self.counts.get(group).copied().unwrap_or(0)
    }

    pub fn groups(&self) -> impl Iterator<Item = &GroupId> {
        self.counts.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroupId, usize)> {
        self.counts.iter().map(|(g, &n)| (g, n))
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    /// Componentwise `self <= other`.
    pub fn dominated_by(&self, other: &Allocation) -> bool {
        self.counts.iter().all(|(g, &n)| n <= other.get(g))
    }

    /// Same allocation with `group` removed from consideration (set to zero).
    pub fn without(&self, group: &GroupId) -> Allocation {
        let mut out = self.clone();
        out.counts.remove(group);
        out
    }
}

impl PartialEq for Allocation {
    fn eq(&self, other: &Self) -> bool {
        self.dominated_by(other) && other.dominated_by(self)
    }
}

impl Eq for Allocation {}

impl FromIterator<(GroupId, usize)> for Allocation {
    fn from_iter<T: IntoIterator<Item = (GroupId, usize)>>(iter: T) -> Self {
        Allocation {
            counts: iter.into_iter().collect(),
        }
    }
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (g, n)) in self.counts.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{g}:{n}")?;
        }
        f.write_str("}")
    }
}

/// Index pairs `(sub, sup)` of grid allocations with `sub <= sup` componentwise
/// and `sub != sup`.
pub fn dominated_pairs(grid: &[Allocation]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (sup, a) in grid.iter().enumerate() {
        for (sub, b) in grid.iter().enumerate() {
            if b.dominated_by(a) && !a.dominated_by(b) {
                out.push((sub, sup));
            }
        }
    }
    out.sort_unstable();
    out
}
