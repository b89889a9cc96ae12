//! Monte-Carlo estimation of expected group risk over a grid of allocations.
//!
//! Work units are `(allocation, trial)` pairs. Each unit draws its training
//! set from the stream `(master, Train, trial, allocation index)`, trains,
//! and scores every evaluation group on the fixed evaluation set, so results
//! are identical for any number of worker threads.

mod surface;

pub use surface::{Cell, RiskSurface, SurfaceMeta, TrialResult};

use crate::allocation::Allocation;
use crate::dataset::GroupedDataset;
use crate::error::{Error, Result};
use crate::group::GroupId;
use crate::learners::{train, TrainConfig};
use crate::metrics::{group_risk, Metric};
use crate::sampling::subsample;
use crate::seed::{Purpose, SeedSpec};
use crate::synthetic::{gen_affine, AffineGroupSpec};
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Default per-group evaluation set size for synthetic sources.
pub const DEFAULT_EVAL_SIZE: usize = 10_000;
pub const DEFAULT_TRIALS: usize = 10;

/// Default sample-count axis: 0 and powers of ten up to 1e5.
pub fn default_axis_values() -> Vec<usize> {
    vec![0, 10, 100, 1_000, 10_000, 100_000]
}

#[derive(Debug, Clone)]
pub enum DataSource {
    /// Fresh i.i.d. draws per trial.
    Synthetic(AffineGroupSpec),
    /// Uniform subsampling without replacement from a fixed pool.
    Empirical(GroupedDataset),
}

impl DataSource {
    /// Training set for `alloc` from the given stream.
    pub fn draw(&self, alloc: &Allocation, seed: &SeedSpec) -> Result<GroupedDataset> {
        match self {
            DataSource::Synthetic(spec) => gen_affine(spec, alloc, seed),
            DataSource::Empirical(pool) => subsample(pool, alloc, seed),
        }
    }

    fn check_satisfiable(&self, alloc: &Allocation) -> Result<()> {
        match self {
            DataSource::Synthetic(spec) => {
                for g in alloc.groups() {
                    if spec.group(g).is_none() {
                        return Err(Error::UnknownGroupInAllocation(g.clone()));
                    }
                }
            }
            DataSource::Empirical(pool) => {
                for (g, n) in alloc.iter() {
                    if n > pool.count(g) {
                        return Err(Error::AllocationExceedsAvailable {
                            group: g.clone(),
                            requested: n,
                            available: pool.count(g),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub source: DataSource,
    pub grid: Vec<Allocation>,
    pub trials: usize,
    pub train: TrainConfig,
    /// Fixed evaluation instances, tagged with their evaluation groups.
    pub eval_set: GroupedDataset,
    pub eval_groups: Vec<GroupId>,
    pub metric: Metric,
    pub master_seed: u64,
}

/// Synthetic evaluation set: `per_group` instances of every spec group,
/// drawn once from the dedicated evaluation stream.
pub fn synthetic_eval_set(spec: &AffineGroupSpec, per_group: usize, master_seed: u64) -> Result<GroupedDataset> {
    gen_affine(
        spec,
        &spec.uniform_allocation(per_group),
        &SeedSpec::new(master_seed, Purpose::Eval),
    )
}

impl SweepPlan {
    pub fn synthetic(
        spec: AffineGroupSpec,
        grid: Vec<Allocation>,
        trials: usize,
        train: TrainConfig,
        master_seed: u64,
        eval_size: usize,
    ) -> Result<SweepPlan> {
        let eval_set = synthetic_eval_set(&spec, eval_size, master_seed)?;
        let eval_groups = eval_set.eval_groups().into_iter().collect();
        Ok(SweepPlan {
            source: DataSource::Synthetic(spec),
            grid,
            trials,
            train,
            eval_set,
            eval_groups,
            metric: Metric::Mse,
            master_seed,
        })
    }

    pub fn empirical(
        pool: GroupedDataset,
        eval_set: GroupedDataset,
        grid: Vec<Allocation>,
        trials: usize,
        train: TrainConfig,
        metric: Metric,
        master_seed: u64,
    ) -> SweepPlan {
        let eval_groups = eval_set.eval_groups().into_iter().collect();
        SweepPlan {
            source: DataSource::Empirical(pool),
            grid,
            trials,
            train,
            eval_set,
            eval_groups,
            metric,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::InvalidConfig("allocation grid is empty".into()));
        }
        if self.eval_groups.is_empty() {
            return Err(Error::InvalidConfig("no evaluation groups".into()));
        }
        self.train.validate()?;
        for alloc in &self.grid {
            self.source.check_satisfiable(alloc)?;
        }
        for g in &self.eval_groups {
            if self.eval_set.eval_slice(g).next().is_none() {
                return Err(Error::EmptyEvaluationGroup(g.clone()));
            }
        }
        if let DataSource::Empirical(pool) = &self.source {
            if pool.feature_dim() != self.eval_set.feature_dim() {
                return Err(Error::DimensionMismatch {
                    expected: pool.feature_dim(),
                    got: self.eval_set.feature_dim(),
                });
            }
            ensure_disjoint(pool, &self.eval_set)?;
        }
        Ok(())
    }

    pub fn seed_for(&self, trial: usize, alloc_index: usize) -> SeedSpec {
        SeedSpec::stream(self.master_seed, Purpose::Train, trial as u64, alloc_index as u64)
    }

    fn run_unit(&self, alloc_index: usize, trial: usize) -> Vec<TrialResult> {
        let seed = self.seed_for(trial, alloc_index);
        let fail = |e: Error| TrialResult::Failed(format!("{}: {e}", e.kind()));
        let model = match self
            .source
            .draw(&self.grid[alloc_index], &seed)
            .and_then(|ds| train(&ds, &self.train, &seed))
        {
            Ok(m) => m,
            Err(e) => {
                let r = fail(e);
                return vec![r; self.eval_groups.len()];
            }
        };
        self.eval_groups
            .iter()
            .map(|g| match group_risk(self.metric, &model, &self.eval_set, g) {
                Ok(r) => TrialResult::Risk(r.value),
                Err(e) => fail(e),
            })
            .collect()
    }
}

/// Rows are compared by content, so genuine duplicates in the source data
/// look like overlap. An evaluation set found entirely inside the pool is
/// rejected; partial overlap is only reported.
fn ensure_disjoint(pool: &GroupedDataset, eval: &GroupedDataset) -> Result<()> {
    let mut a: Vec<_> = pool.instances().iter().collect();
    let mut b: Vec<_> = eval.instances().iter().collect();
    a.sort_by(|x, y| x.content_cmp_features(y));
    b.sort_by(|x, y| x.content_cmp_features(y));
    let (mut i, mut j, mut shared) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].content_cmp_features(b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                j += 1;
            }
        }
    }
    if shared > 0 && shared == b.len() {
        return Err(Error::InvalidDataset(
            "every evaluation instance also occurs in the training pool".into(),
        ));
    }
    if shared > 0 {
        log::warn!(
            "{shared} of {} evaluation instances have an identical row in the training pool",
            b.len()
        );
    }
    Ok(())
}

/// Runs every `(allocation, trial)` unit on the current rayon pool.
pub fn run_sweep(plan: &SweepPlan) -> Result<RiskSurface> {
    plan.validate()?;
    let units: Vec<(usize, usize)> = (0..plan.grid.len())
        .flat_map(|a| (0..plan.trials).map(move |t| (a, t)))
        .collect();
    let results: Vec<Vec<TrialResult>> = units.par_iter().map(|&(a, t)| plan.run_unit(a, t)).collect();

    let meta = SurfaceMeta {
        trials: plan.trials,
        master_seed: plan.master_seed,
        config_fingerprint: plan.train.fingerprint(),
        metric: plan.metric,
    };
    let mut surface = RiskSurface::new(plan.grid.clone(), plan.eval_groups.clone(), meta);
    let mut per_cell: BTreeMap<(usize, usize), Vec<TrialResult>> = BTreeMap::new();
    for (&(a, _), res) in units.iter().zip(results) {
        for (g, r) in res.into_iter().enumerate() {
            per_cell.entry((a, g)).or_default().push(r);
        }
    }
    for ((a, g), trials) in per_cell {
        surface.set_trials(a, &plan.eval_groups[g], trials);
    }
    Ok(surface)
}

/// Like [`run_sweep`] on a dedicated pool of `threads` workers.
pub fn run_sweep_with_threads(plan: &SweepPlan, threads: usize) -> Result<RiskSurface> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| run_sweep(plan))
}

/// One allocation per value of the varying group, all other counts fixed.
pub fn grid_axis(fixed: &Allocation, varying: &GroupId, values: &[usize]) -> Vec<Allocation> {
    debug_assert!(values.windows(2).all(|w| w[0] <= w[1]), "axis values must be ascending");
    values.iter().map(|&n| fixed.clone().with(varying.clone(), n)).collect()
}
