//! Scanning a risk surface for negative data externalities.
//!
//! A finding is a pair of grid allocations `sub <= sup` (componentwise) where
//! the larger training set has higher mean risk on some evaluation group.
//! `delta` is the largest such risk reduction reachable from a reference
//! allocation by moving to a dominated grid point. It is restricted to the
//! sampled grid, so it lower-bounds the reduction over all sub-allocations.

use crate::allocation::{dominated_pairs, Allocation};
use crate::error::{Error, Result};
use crate::group::GroupId;
use crate::sweep::{Cell, RiskSurface};
use serde::Serialize;

/// Default significance threshold, matching two-standard-error bands.
pub const DEFAULT_Z_THRESHOLD: f64 = 2.0;

/// Welch two-sample z for `mean(hi) - mean(lo)` from trial-level risks.
/// `None` when either cell is invalid or has fewer than two trials.
pub fn welch_z(hi: &Cell, lo: &Cell) -> Option<f64> {
    let diff = hi.mean()? - lo.mean()?;
    let se = pooled_se(hi, lo)?;
    Some(if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    })
}

/// `sqrt(se_a^2 + se_b^2)`.
pub fn pooled_se(a: &Cell, b: &Cell) -> Option<f64> {
    Some(a.se()?.hypot(b.se()?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExternalityFinding {
    pub eval_group: GroupId,
    pub sup: Allocation,
    pub sub: Allocation,
    #[serde(skip)]
    pub sup_index: usize,
    #[serde(skip)]
    pub sub_index: usize,
    /// `mean risk(sup) - mean risk(sub)`, always positive.
    pub magnitude: f64,
    pub z: Option<f64>,
    pub significant: bool,
}

fn is_significant(z: Option<f64>, threshold: f64) -> bool {
    z.is_some_and(|z| z >= threshold)
}

/// Every (evaluation group, dominated pair) with a mean-risk inversion,
/// largest magnitude first.
pub fn detect(surface: &RiskSurface, z_threshold: f64) -> Vec<ExternalityFinding> {
    let pairs = dominated_pairs(surface.grid());
    let mut out = Vec::new();
    for g in surface.eval_groups() {
        for &(sub, sup) in &pairs {
            let (Some(lo), Some(hi)) = (surface.cell(sub, g), surface.cell(sup, g)) else {
                continue;
            };
            let (Some(m_lo), Some(m_hi)) = (lo.mean(), hi.mean()) else {
                continue;
            };
            if m_lo < m_hi {
                let z = welch_z(hi, lo);
                out.push(ExternalityFinding {
                    eval_group: g.clone(),
                    sup: surface.grid()[sup].clone(),
                    sub: surface.grid()[sub].clone(),
                    sup_index: sup,
                    sub_index: sub,
                    magnitude: m_hi - m_lo,
                    z,
                    significant: is_significant(z, z_threshold),
                });
            }
        }
    }
    out.sort_by(|a, b| {
        b.magnitude
            .total_cmp(&a.magnitude)
            .then_with(|| a.eval_group.cmp(&b.eval_group))
            .then_with(|| a.sup_index.cmp(&b.sup_index))
            .then_with(|| a.sub_index.cmp(&b.sub_index))
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaReport {
    pub eval_group: GroupId,
    pub reference: Allocation,
    pub best_sub: Allocation,
    #[serde(skip)]
    pub reference_index: usize,
    #[serde(skip)]
    pub best_sub_index: usize,
    pub delta: f64,
    pub z: Option<f64>,
    /// Pooled standard error of the winning comparison.
    pub se: Option<f64>,
    pub tie_policy: &'static str,
}

const TIE_POLICY: &str = "ties broken toward the smallest total sample count, then lowest grid index";

impl DeltaReport {
    pub fn is_significant(&self, z_threshold: f64) -> bool {
        self.delta > 0.0 && is_significant(self.z, z_threshold)
    }
}

/// Largest mean-risk reduction for `eval_group` over grid points dominated
/// by `reference`, clamped at zero.
pub fn delta(surface: &RiskSurface, eval_group: &GroupId, reference: &Allocation) -> Result<DeltaReport> {
    let not_found = || Error::ReferenceNotInGrid(reference.to_string(), eval_group.clone());
    let ref_index = surface
        .grid()
        .iter()
        .enumerate()
        .position(|(i, a)| a == reference && surface.cell(i, eval_group).is_some_and(Cell::is_valid))
        .ok_or_else(not_found)?;
    let ref_cell = surface.cell(ref_index, eval_group).ok_or_else(not_found)?;
    let ref_mean = ref_cell.mean().ok_or_else(not_found)?;

    let mut best: Option<(usize, f64)> = None;
    for (i, a) in surface.grid().iter().enumerate() {
        if !a.dominated_by(reference) || a == reference {
            continue;
        }
        let Some(m) = surface.mean(i, eval_group) else { continue };
        let gain = ref_mean - m;
        if gain <= 0.0 {
            continue;
        }
        let better = match best {
            None => true,
            Some((j, g)) => gain > g || (gain == g && a.total() < surface.grid()[j].total()),
        };
        if better {
            best = Some((i, gain));
        }
    }
    let (best_index, delta, z, se) = match best {
        Some((i, gain)) => {
            let cell = surface.cell(i, eval_group).expect("valid cell");
            (i, gain, welch_z(ref_cell, cell), pooled_se(ref_cell, cell))
        }
        None => (ref_index, 0.0, None, None),
    };
    Ok(DeltaReport {
        eval_group: eval_group.clone(),
        reference: reference.clone(),
        best_sub: surface.grid()[best_index].clone(),
        reference_index: ref_index,
        best_sub_index: best_index,
        delta,
        z,
        se,
        tie_policy: TIE_POLICY,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeSegment {
    /// Counts of the groups held fixed along this line.
    pub fixed: Allocation,
    pub from_count: usize,
    pub to_count: usize,
    #[serde(skip)]
    pub from_index: usize,
    #[serde(skip)]
    pub to_index: usize,
    /// Mean-risk change from the smaller to the larger count.
    pub change: f64,
    /// Sign of `change` in risk orientation; 0 within relative 1e-12.
    pub sign: i8,
    pub z: Option<f64>,
}

/// Risk changes between neighbouring grid points that differ only in the
/// count of `varying`. A positive sign means more data from `varying` made
/// `eval_group` worse. Failed cells are skipped.
pub fn slope_scan(surface: &RiskSurface, eval_group: &GroupId, varying: &GroupId) -> Result<Vec<SlopeSegment>> {
    let mut lines: Vec<(Allocation, Vec<usize>)> = Vec::new();
    for (i, a) in surface.grid().iter().enumerate() {
        if surface.mean(i, eval_group).is_none() {
            continue;
        }
        let key = a.without(varying);
        match lines.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(i),
            None => lines.push((key, vec![i])),
        }
    }
    let mut out = Vec::new();
    let mut found_axis = false;
    for (fixed, mut idx) in lines {
        idx.sort_by_key(|&i| (surface.grid()[i].get(varying), i));
        idx.dedup_by_key(|i| surface.grid()[*i].get(varying));
        if idx.len() < 2 {
            continue;
        }
        found_axis = true;
        for w in idx.windows(2) {
            let (lo, hi) = (
                surface.cell(w[0], eval_group).unwrap(),
                surface.cell(w[1], eval_group).unwrap(),
            );
            let (m0, m1) = (lo.mean().unwrap(), hi.mean().unwrap());
            let change = m1 - m0;
            let sign = if change.abs() <= 1e-12 * m0.abs().max(m1.abs()) {
                0
            } else if change > 0.0 {
                1
            } else {
                -1
            };
            out.push(SlopeSegment {
                fixed: fixed.clone(),
                from_count: surface.grid()[w[0]].get(varying),
                to_count: surface.grid()[w[1]].get(varying),
                from_index: w[0],
                to_index: w[1],
                change,
                sign,
                z: welch_z(hi, lo),
            });
        }
    }
    if !found_axis {
        return Err(Error::AxisNotFound(varying.clone()));
    }
    Ok(out)
}
