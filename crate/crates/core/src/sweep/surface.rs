use crate::allocation::Allocation;
use crate::error::{Error, Result};
use crate::group::GroupId;
use crate::metrics::Metric;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};

#[derive(Debug, Clone, PartialEq)]
pub enum TrialResult {
    Risk(f64),
    Failed(String),
}

/// Trial outcomes for one (allocation, evaluation group) pair; `trials[t]`
/// is trial `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub alloc_index: usize,
    pub eval_group: GroupId,
    pub trials: Vec<TrialResult>,
}

impl Cell {
    pub fn failure(&self) -> Option<&str> {
        self.trials.iter().find_map(|t| match t {
            TrialResult::Failed(m) => Some(m.as_str()),
            TrialResult::Risk(_) => None,
        })
    }

    pub fn is_valid(&self) -> bool {
        !self.trials.is_empty() && self.failure().is_none()
    }

    pub fn risks(&self) -> Vec<f64> {
        self.trials
            .iter()
            .filter_map(|t| match t {
                TrialResult::Risk(r) => Some(*r),
                TrialResult::Failed(_) => None,
            })
            .collect()
    }

    pub fn mean(&self) -> Option<f64> {
        if !self.is_valid() {
            return None;
        }
        let r = self.risks();
        Some(r.iter().sum::<f64>() / r.len() as f64)
    }

    /// Sample standard deviation over sqrt(trials); `None` below two trials.
    pub fn se(&self) -> Option<f64> {
        let m = self.mean()?;
        let r = self.risks();
        if r.len() < 2 {
            return None;
        }
        let n = r.len() as f64;
        let var = r.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        Some((var / n).sqrt())
    }
}

/// Plan echo stored alongside the cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMeta {
    pub trials: usize,
    pub master_seed: u64,
    pub config_fingerprint: String,
    pub metric: Metric,
}

/// Monte-Carlo estimate of expected per-group risk over an allocation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSurface {
    grid: Vec<Allocation>,
    source_groups: Vec<GroupId>,
    eval_groups: Vec<GroupId>,
    cells: Vec<Cell>,
    pub meta: SurfaceMeta,
}

impl RiskSurface {
    /// Surface with every cell empty; fill with [`RiskSurface::set_trials`].
    pub fn new(grid: Vec<Allocation>, eval_groups: Vec<GroupId>, meta: SurfaceMeta) -> Self {
        let mut source_groups: Vec<GroupId> = grid.iter().flat_map(|a| a.groups().cloned()).collect();
        source_groups.sort();
        source_groups.dedup();
        let cells = (0..grid.len())
            .flat_map(|a| {
                eval_groups.iter().map(move |g| Cell {
                    alloc_index: a,
                    eval_group: g.clone(),
                    trials: Vec::new(),
                })
            })
            .collect();
        RiskSurface {
            grid,
            source_groups,
            eval_groups,
            cells,
            meta,
        }
    }

    /// Builds a surface from per-cell trial risks, mostly for analysis tests.
    pub fn from_risks(grid: Vec<Allocation>, eval_groups: Vec<GroupId>, risks: &[Vec<Vec<f64>>]) -> Self {
        let trials = risks.iter().flatten().map(Vec::len).max().unwrap_or(0);
        let meta = SurfaceMeta {
            trials,
            master_seed: 0,
            config_fingerprint: String::new(),
            metric: Metric::Mse,
        };
        let mut s = RiskSurface::new(grid, eval_groups.clone(), meta);
        for (a, per_group) in risks.iter().enumerate() {
            for (g, r) in eval_groups.iter().zip(per_group) {
                s.set_trials(a, g, r.iter().map(|&x| TrialResult::Risk(x)).collect());
            }
        }
        s
    }

    pub fn grid(&self) -> &[Allocation] {
        &self.grid
    }

    pub fn source_groups(&self) -> &[GroupId] {
        &self.source_groups
    }

    pub fn eval_groups(&self) -> &[GroupId] {
        &self.eval_groups
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    fn position(&self, alloc_index: usize, group: &GroupId) -> Option<usize> {
        let g = self.eval_groups.iter().position(|e| e == group)?;
        (alloc_index < self.grid.len()).then(|| alloc_index * self.eval_groups.len() + g)
    }

    pub fn cell(&self, alloc_index: usize, group: &GroupId) -> Option<&Cell> {
        self.position(alloc_index, group).map(|p| &self.cells[p])
    }

    pub fn set_trials(&mut self, alloc_index: usize, group: &GroupId, trials: Vec<TrialResult>) {
        let p = self
            .position(alloc_index, group)
            .expect("cell exists for grid index and evaluation group");
        self.cells[p].trials = trials;
    }

    pub fn mean(&self, alloc_index: usize, group: &GroupId) -> Option<f64> {
        self.cell(alloc_index, group)?.mean()
    }

    pub fn grid_index(&self, alloc: &Allocation) -> Option<usize> {
        self.grid.iter().position(|a| a == alloc)
    }

    /// Copy with every trial risk multiplied by `c`.
    pub fn scaled(&self, c: f64) -> RiskSurface {
        let mut out = self.clone();
        for cell in &mut out.cells {
            for t in &mut cell.trials {
                if let TrialResult::Risk(r) = t {
                    *r *= c;
                }
            }
        }
        out
    }

    /// Copy restricted to the grid points whose index satisfies `keep`.
    pub fn retain_grid(&self, keep: impl Fn(usize) -> bool) -> RiskSurface {
        let kept: Vec<usize> = (0..self.grid.len()).filter(|&i| keep(i)).collect();
        let grid = kept.iter().map(|&i| self.grid[i].clone()).collect();
        let mut out = RiskSurface::new(grid, self.eval_groups.clone(), self.meta.clone());
        for (new, &old) in kept.iter().enumerate() {
            for g in &self.eval_groups {
                let trials = self.cell(old, g).expect("cell").trials.clone();
                out.set_trials(new, g, trials);
            }
        }
        out
    }

    fn count_header(g: &GroupId) -> String {
        format!("n_{g}")
    }

    /// One row per (allocation, evaluation group, trial):
    /// `alloc_index, n_<g>..., eval_group, trial, risk, error`.
    pub fn write_detail_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["alloc_index".to_string()];
        header.extend(self.source_groups.iter().map(Self::count_header));
        header.extend(["eval_group", "trial", "risk", "error"].map(String::from));
        w.write_record(&header)?;
        for cell in &self.cells {
            for (t, outcome) in cell.trials.iter().enumerate() {
                let mut row = self.alloc_columns(cell.alloc_index);
                row.insert(0, cell.alloc_index.to_string());
                row.push(cell.eval_group.to_string());
                row.push(t.to_string());
                match outcome {
                    TrialResult::Risk(r) => row.extend([r.to_string(), String::new()]),
                    TrialResult::Failed(m) => row.extend([String::new(), m.clone()]),
                }
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// One row per cell: `n_<g>..., eval_group, mean, se, trials`. Failed
    /// cells have empty mean and se.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = self.source_groups.iter().map(Self::count_header).collect();
        header.extend(["eval_group", "mean", "se", "trials"].map(String::from));
        w.write_record(&header)?;
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for cell in &self.cells {
            let mut row = self.alloc_columns(cell.alloc_index);
            row.push(cell.eval_group.to_string());
            row.push(fmt(cell.mean()));
            row.push(fmt(cell.se()));
            row.push(cell.risks().len().to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    fn alloc_columns(&self, alloc_index: usize) -> Vec<String> {
        let a = &self.grid[alloc_index];
        self.source_groups.iter().map(|g| a.get(g).to_string()).collect()
    }

    /// Reads the detail format back; rows are numbered from 1 after the
    /// header. `meta` is taken from the plan echo when
    /// available; its `trials` is replaced by the count found in the file.
    pub fn read_detail_csv<R: Read>(input: R, meta: Option<SurfaceMeta>) -> Result<RiskSurface> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let col = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::SchemaMismatch(format!("detail csv lacks column '{name}'")))
        };
        let (ia, ig, it, ir, ie) = (
            col("alloc_index")?,
            col("eval_group")?,
            col("trial")?,
            col("risk")?,
            col("error")?,
        );
        let count_cols: Vec<(usize, GroupId)> = header
            .iter()
            .enumerate()
            .filter_map(|(i, h)| h.strip_prefix("n_").and_then(GroupId::try_new).map(|g| (i, g)))
            .collect();
        let mut grid: BTreeMap<usize, Allocation> = BTreeMap::new();
        let mut eval_groups: Vec<GroupId> = Vec::new();
        let mut outcomes: BTreeMap<(usize, GroupId), BTreeMap<usize, TrialResult>> = BTreeMap::new();
        for (row_no, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = row_no + 1;
            let parse_usize = |i: usize| {
                rec[i].parse::<usize>().map_err(|e| Error::Parse {
                    row,
                    column: header[i].to_string(),
                    message: e.to_string(),
                })
            };
            let a = parse_usize(ia)?;
            let alloc: Allocation = count_cols
                .iter()
                .map(|(i, g)| Ok((g.clone(), parse_usize(*i)?)))
                .collect::<Result<_>>()?;
            if let Some(prev) = grid.insert(a, alloc.clone()) {
                if prev != alloc {
                    return Err(Error::Parse {
                        row,
                        column: "alloc_index".into(),
                        message: format!("allocation index {a} has inconsistent counts"),
                    });
                }
            }
            let g = GroupId::try_new(&rec[ig]).ok_or_else(|| Error::Parse {
                row,
                column: "eval_group".into(),
                message: "empty group".into(),
            })?;
            if !eval_groups.contains(&g) {
                eval_groups.push(g.clone());
            }
            let t = parse_usize(it)?;
            let outcome = if rec[ie].is_empty() {
                TrialResult::Risk(rec[ir].parse::<f64>().map_err(|e| Error::Parse {
                    row,
                    column: "risk".into(),
                    message: e.to_string(),
                })?)
            } else {
                TrialResult::Failed(rec[ie].to_string())
            };
            outcomes.entry((a, g)).or_default().insert(t, outcome);
        }
        if grid.keys().copied().ne(0..grid.len()) {
            return Err(Error::SchemaMismatch(
                "alloc_index values are not contiguous from 0".into(),
            ));
        }
        let trials = outcomes.values().map(BTreeMap::len).max().unwrap_or(0);
        let meta = SurfaceMeta {
            trials,
            ..meta.unwrap_or(SurfaceMeta {
                trials,
                master_seed: 0,
                config_fingerprint: String::new(),
                metric: Metric::Mse,
            })
        };
        let mut s = RiskSurface::new(grid.into_values().collect(), eval_groups, meta);
        for ((a, g), by_trial) in outcomes {
            s.set_trials(a, &g, by_trial.into_values().collect());
        }
        Ok(s)
    }
}
