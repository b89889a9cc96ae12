//! Grouped affine data generators.
//!
//! Each group `g` draws a latent feature `z ~ N(mu_g, sigma_g^2)`, observes
//! `x = z + e_x` with `e_x ~ N(0, feature_noise_sd_g^2)`, and gets label
//! `y = w * x + b_g + e_y` with `e_y ~ N(0, label_noise_sd_g^2)`. The slope
//! `w` is shared; the intercept and the distributions are per group. All
//! second parameters of normal distributions are standard deviations.

use crate::allocation::Allocation;
use crate::dataset::{GroupedDataset, Instance, Task};
use crate::error::{Error, Result};
use crate::group::GroupId;
use crate::seed::SeedSpec;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupParams {
    pub intercept: f64,
    pub feature_mean: f64,
    pub feature_sd: f64,
    pub feature_noise_sd: f64,
    pub label_noise_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineGroupSpec {
    pub weight: f64,
    pub groups: BTreeMap<GroupId, GroupParams>,
}

impl AffineGroupSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.weight.is_finite() {
            return Err(Error::InvalidConfig("weight must be finite".into()));
        }
        if self.groups.is_empty() {
            return Err(Error::InvalidConfig("generator spec has no groups".into()));
        }
        for (g, p) in &self.groups {
            let finite = [
                p.intercept,
                p.feature_mean,
                p.feature_sd,
                p.feature_noise_sd,
                p.label_noise_sd,
            ]
            .iter()
            .all(|v| v.is_finite());
            if !finite || p.feature_sd <= 0.0 || p.feature_noise_sd < 0.0 || p.label_noise_sd < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "group {g}: need feature_sd > 0, noise sds >= 0, all finite"
                )));
            }
        }
        Ok(())
    }

    pub fn group(&self, g: &GroupId) -> Option<&GroupParams> {
        self.groups.get(g)
    }

    /// Allocation with `n` instances for every group of the spec.
    pub fn uniform_allocation(&self, n: usize) -> Allocation {
        self.groups.keys().map(|g| (g.clone(), n)).collect()
    }
}

/// Different intercepts and feature means, identical noise.
pub fn example1_spec() -> AffineGroupSpec {
    let p = |intercept, feature_mean| GroupParams {
        intercept,
        feature_mean,
        feature_sd: 5.0,
        feature_noise_sd: 1.0,
        label_noise_sd: 1.0,
    };
    AffineGroupSpec {
        weight: -1.0,
        groups: BTreeMap::from([(GroupId::new("A"), p(-10.0, 10.0)), (GroupId::new("B"), p(10.0, -10.0))]),
    }
}

/// Shared true model; group B has a narrower feature spread and much
/// noisier observations.
pub fn example2_spec() -> AffineGroupSpec {
    let p = |feature_sd, noise| GroupParams {
        intercept: -10.0,
        feature_mean: -10.0,
        feature_sd,
        feature_noise_sd: noise,
        label_noise_sd: noise,
    };
    AffineGroupSpec {
        weight: -1.0,
        groups: BTreeMap::from([(GroupId::new("A"), p(5.0, 1.0)), (GroupId::new("B"), p(2.0, 10.0))]),
    }
}

/// Fresh i.i.d. draw with exactly `alloc[g]` instances per group. Every
/// instance is tagged with its own group as evaluation group.
pub fn gen_affine(spec: &AffineGroupSpec, alloc: &Allocation, seed: &SeedSpec) -> Result<GroupedDataset> {
    spec.validate()?;
    let mut plan = Vec::new();
    for (g, n) in alloc.iter() {
        let params = spec
            .group(g)
            .ok_or_else(|| Error::UnknownGroupInAllocation(g.clone()))?;
        plan.push((g, n, params));
    }
    let mut rng = seed.rng();
    let mut out = Vec::with_capacity(alloc.total());
    for (g, n, p) in plan {
        let latent = Normal::new(p.feature_mean, p.feature_sd).expect("validated");
        let x_noise = Normal::new(0.0, p.feature_noise_sd).expect("validated");
        let y_noise = Normal::new(0.0, p.label_noise_sd).expect("validated");
        for _ in 0..n {
            let x = latent.sample(&mut rng) + x_noise.sample(&mut rng);
            let y = spec.weight * x + p.intercept + y_noise.sample(&mut rng);
            out.push(Instance::new(vec![x], y, g.clone()).self_evaluated());
        }
    }
    GroupedDataset::new(out, 1, Task::Regression)
}
