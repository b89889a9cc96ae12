//! Remedies for detected externalities.
//!
//! The main one is the split model: for every evaluation group with a
//! significant positive Δ, retrain on its best dominated sub-allocation and
//! apply that model only to instances of the group. Everything else keeps
//! the reference ("fallback") model, so untargeted groups see exactly the
//! same predictions as before.

use crate::allocation::Allocation;
use crate::dataset::{GroupedDataset, Instance};
use crate::error::{Error, Result};
use crate::externality::DeltaReport;
use crate::group::GroupId;
use crate::learners::{predict, train, LinearModel, TrainConfig};
use crate::metrics::{group_risk_with, Metric};
use crate::seed::{Purpose, SeedSpec};
use crate::sweep::DataSource;
use crate::synthetic::AffineGroupSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

pub const DEFAULT_MAX_ROUTES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitOptions {
    /// Minimum Welch z of a Δ for its group to get its own model.
    pub z_threshold: f64,
    pub max_routes: usize,
}

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions {
            z_threshold: crate::externality::DEFAULT_Z_THRESHOLD,
            max_routes: DEFAULT_MAX_ROUTES,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Route {
    pub model: Arc<LinearModel>,
    pub sub_allocation: Allocation,
    pub delta: f64,
    /// False when the route shares the fallback model.
    pub targeted: bool,
}

#[derive(Debug, Clone)]
pub struct SplitModel {
    routes: BTreeMap<GroupId, Route>,
    fallback: Arc<LinearModel>,
    reference: Allocation,
}

impl SplitModel {
    pub fn routes(&self) -> &BTreeMap<GroupId, Route> {
        &self.routes
    }

    pub fn fallback(&self) -> &LinearModel {
        &self.fallback
    }

    pub fn reference(&self) -> &Allocation {
        &self.reference
    }

    pub fn targeted_groups(&self) -> impl Iterator<Item = &GroupId> {
        self.routes.iter().filter(|(_, r)| r.targeted).map(|(g, _)| g)
    }

    /// Model applied to an instance with these evaluation groups. Among
    /// several targeted matches the larger Δ wins, then the smaller name.
    pub fn model_for(&self, eval_groups: &BTreeSet<GroupId>) -> &LinearModel {
        let mut best: Option<&Route> = None;
        for g in eval_groups {
            let Some(r) = self.routes.get(g).filter(|r| r.targeted) else {
                continue;
            };
            // groups iterate in name order, so strict > keeps the smaller name
            if best.is_none_or(|b| r.delta > b.delta) {
                best = Some(r);
            }
        }
        best.map_or(&self.fallback, |r| &r.model)
    }
}

/// Score of the split model for one instance.
pub fn predict_split(
    split: &SplitModel,
    x: &[f64],
    source_group: &GroupId,
    eval_groups: &BTreeSet<GroupId>,
) -> Result<f64> {
    predict(split.model_for(eval_groups), x, source_group)
}

/// Trains the fallback on `reference` and one model per significant Δ on
/// its best sub-allocation. `rebuild` selects independent seed streams, so
/// repeated builds give independent draws of the construction.
pub fn build_split(
    source: &DataSource,
    reference: &Allocation,
    reports: &[DeltaReport],
    config: &TrainConfig,
    master_seed: u64,
    rebuild: u64,
    options: &SplitOptions,
) -> Result<SplitModel> {
    let fallback_seed = SeedSpec::stream(master_seed, Purpose::Fallback, rebuild, 0);
    let fallback = Arc::new(train(&source.draw(reference, &fallback_seed)?, config, &fallback_seed)?);

    let mut by_group: BTreeMap<&GroupId, &DeltaReport> = BTreeMap::new();
    for r in reports {
        if r.reference != *reference {
            return Err(Error::InvalidConfig(format!(
                "delta report for {} uses reference {} but the split model uses {}",
                r.eval_group, r.reference, reference
            )));
        }
        by_group.insert(&r.eval_group, r);
    }

    let mut targets: Vec<(usize, &DeltaReport)> = by_group
        .values()
        .enumerate()
        .filter(|(_, r)| r.is_significant(options.z_threshold))
        .map(|(i, r)| (i, *r))
        .collect();
    targets.sort_by(|a, b| b.1.delta.total_cmp(&a.1.delta).then(a.0.cmp(&b.0)));
    if targets.len() > options.max_routes {
        log::warn!(
            "{} groups qualify for a split route but the limit is {}; the smallest {} fall back",
            targets.len(),
            options.max_routes,
            targets.len() - options.max_routes
        );
        targets.truncate(options.max_routes);
    }

    let trained: Vec<(GroupId, Result<LinearModel>)> = targets
        .par_iter()
        .map(|&(i, r)| {
            let seed = SeedSpec::stream(master_seed, Purpose::Route, rebuild, i as u64);
            let model = source.draw(&r.best_sub, &seed).and_then(|ds| train(&ds, config, &seed));
            (r.eval_group.clone(), model)
        })
        .collect();
    let mut trained_map = BTreeMap::new();
    for (g, m) in trained {
        trained_map.insert(g, Arc::new(m?));
    }

    let routes = by_group
        .into_iter()
        .map(|(g, r)| {
            let route = match trained_map.remove(g) {
                Some(model) => Route {
                    model,
                    sub_allocation: r.best_sub.clone(),
                    delta: r.delta,
                    targeted: true,
                },
                None => Route {
                    model: Arc::clone(&fallback),
                    sub_allocation: reference.clone(),
                    delta: r.delta,
                    targeted: false,
                },
            };
            (g.clone(), route)
        })
        .collect();
    Ok(SplitModel {
        routes,
        fallback,
        reference: reference.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterventionRow {
    pub eval_group: GroupId,
    pub risk_before: f64,
    pub risk_after: f64,
    pub n_eval: usize,
}

impl InterventionRow {
    pub fn improvement(&self) -> f64 {
        self.risk_before - self.risk_after
    }
}

/// Risk of the fallback alone versus the routed split model, per group.
pub fn evaluate_intervention(
    split: &SplitModel,
    evalset: &GroupedDataset,
    groups: &[GroupId],
    metric: Metric,
) -> Result<Vec<InterventionRow>> {
    let before = |i: &Instance| predict(&split.fallback, &i.features, &i.source_group);
    let after = |i: &Instance| predict_split(split, &i.features, &i.source_group, &i.eval_groups);
    groups
        .iter()
        .map(|g| {
            let b = group_risk_with(metric, evalset, g, before)?;
            let a = group_risk_with(metric, evalset, g, after)?;
            Ok(InterventionRow {
                eval_group: g.clone(),
                risk_before: b.value,
                risk_after: a.value,
                n_eval: b.n_eval,
            })
        })
        .collect()
}

/// Per-group training weights proportional to inverse label-noise variance,
/// scaled so the least noisy group has weight 1.
pub fn inverse_noise_weights(spec: &AffineGroupSpec) -> BTreeMap<GroupId, f64> {
    let min_var = spec
        .groups
        .values()
        .map(|p| p.label_noise_sd * p.label_noise_sd)
        .fold(f64::INFINITY, f64::min);
    spec.groups
        .iter()
        .map(|(g, p)| {
            let var = p.label_noise_sd * p.label_noise_sd;
            let w = if var > 0.0 { min_var / var } else { 1.0 };
            (g.clone(), w)
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct RouteJson {
    model: LinearModel,
    sub_allocation: Allocation,
    delta: f64,
    targeted: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitJson {
    reference: Allocation,
    routes: BTreeMap<GroupId, RouteJson>,
    fallback: LinearModel,
}

impl Serialize for SplitModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SplitJson {
            reference: self.reference.clone(),
            routes: self
                .routes
                .iter()
                .map(|(g, r)| {
                    let json = RouteJson {
                        model: (*r.model).clone(),
                        sub_allocation: r.sub_allocation.clone(),
                        delta: r.delta,
                        targeted: r.targeted,
                    };
                    (g.clone(), json)
                })
                .collect(),
            fallback: (*self.fallback).clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SplitModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let json = SplitJson::deserialize(d)?;
        let fallback = Arc::new(json.fallback);
        let routes = json
            .routes
            .into_iter()
            .map(|(g, r)| {
                let model = if r.targeted {
                    Arc::new(r.model)
                } else {
                    Arc::clone(&fallback)
                };
                let route = Route {
                    model,
                    sub_allocation: r.sub_allocation,
                    delta: r.delta,
                    targeted: r.targeted,
                };
                (g, route)
            })
            .collect();
        Ok(SplitModel {
            routes,
            fallback,
            reference: json.reference,
        })
    }
}
