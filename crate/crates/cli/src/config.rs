use dataext_core::dataio::CsvSchema;
use dataext_core::intervention::SplitOptions;
use dataext_core::learners::TrainConfig;
use dataext_core::metrics::Metric;
use dataext_core::sweep::{grid_axis, DEFAULT_EVAL_SIZE, DEFAULT_TRIALS};
use dataext_core::synthetic::{example1_spec, example2_spec, AffineGroupSpec};
use dataext_core::{Allocation, Error, GroupId, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Example1,
    Example2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DataConfig {
    Preset(Preset),
    Spec(AffineGroupSpec),
    Csv(CsvData),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvData {
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
    #[serde(default)]
    pub schema: CsvSchema,
    /// Separate evaluation file; without it the pool is split.
    #[serde(default)]
    pub eval_path: Option<PathBuf>,
    #[serde(default = "default_eval_fraction")]
    pub eval_fraction: f64,
}

fn default_eval_fraction() -> f64 {
    0.2
}

impl DataConfig {
    pub fn synthetic_spec(&self) -> Option<AffineGroupSpec> {
        match self {
            DataConfig::Preset(Preset::Example1) => Some(example1_spec()),
            DataConfig::Preset(Preset::Example2) => Some(example2_spec()),
            DataConfig::Spec(s) => Some(s.clone()),
            DataConfig::Csv(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub allocation: Allocation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisGrid {
    #[serde(default)]
    pub fixed: Allocation,
    pub varying: GroupId,
    pub values: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum GridConfig {
    Axis(AxisGrid),
    Allocations(Vec<Allocation>),
}

impl GridConfig {
    pub fn allocations(&self) -> Result<Vec<Allocation>> {
        let grid = match self {
            GridConfig::Axis(a) => {
                let mut values = a.values.clone();
                values.sort_unstable();
                values.dedup();
                grid_axis(&a.fixed, &a.varying, &values)
            }
            GridConfig::Allocations(v) => v.clone(),
        };
        if grid.is_empty() {
            return Err(Error::InvalidConfig("sweep.grid has no allocations".into()));
        }
        for (i, a) in grid.iter().enumerate() {
            if grid[..i].contains(a) {
                return Err(Error::InvalidConfig(format!("sweep.grid lists {a} twice")));
            }
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub grid: GridConfig,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Synthetic evaluation instances per group.
    #[serde(default = "default_eval_size")]
    pub eval_size: usize,
    #[serde(default)]
    pub metric: Metric,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn default_eval_size() -> usize {
    DEFAULT_EVAL_SIZE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectConfig {
    pub z_threshold: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            z_threshold: dataext_core::externality::DEFAULT_Z_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeltaConfig {
    /// Defaults to the grid allocation with the most training data.
    pub reference: Option<Allocation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    /// Independent rebuilds of the split model to evaluate.
    pub rebuilds: usize,
    pub z_threshold: f64,
    pub max_routes: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let options = SplitOptions::default();
        SplitConfig {
            rebuilds: 1,
            z_threshold: options.z_threshold,
            max_routes: options.max_routes,
        }
    }
}

impl SplitConfig {
    pub fn options(&self) -> SplitOptions {
        SplitOptions {
            z_threshold: self.z_threshold,
            max_routes: self.max_routes,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    /// Source group on the x axis; defaults to the varying group of an axis grid.
    pub axis: Option<GroupId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    pub data: DataConfig,
    #[serde(default)]
    pub synth: Option<SynthConfig>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub detect: DetectConfig,
    #[serde(default)]
    pub delta: DeltaConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub report: ReportConfig,
}

impl RunConfig {
    /// Parses and validates; relative data paths become relative to `path`'s directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let DataConfig::Csv(csv) = &mut cfg.data {
            csv.path = base.join(&csv.path);
            if let Some(p) = &mut csv.eval_path {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if let Some(spec) = self.data.synthetic_spec() {
            spec.validate()?;
        }
        if let DataConfig::Csv(c) = &self.data {
            if !(0.0..1.0).contains(&c.eval_fraction) || (c.eval_path.is_none() && c.eval_fraction == 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "data.csv.eval_fraction must be in (0, 1), got {}",
                    c.eval_fraction
                )));
            }
        }
        if let Some(s) = &self.sweep {
            s.grid.allocations()?;
            if s.trials == 0 {
                return Err(Error::InvalidConfig("sweep.trials must be at least 1".into()));
            }
            if s.eval_size == 0 {
                return Err(Error::InvalidConfig("sweep.eval_size must be at least 1".into()));
            }
        }
        if !self.detect.z_threshold.is_finite() || !self.split.z_threshold.is_finite() {
            return Err(Error::InvalidConfig("z thresholds must be finite".into()));
        }
        if self.split.rebuilds == 0 {
            return Err(Error::InvalidConfig("split.rebuilds must be at least 1".into()));
        }
        Ok(())
    }

    pub fn sweep_config(&self) -> Result<&SweepConfig> {
        self.sweep
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("this command needs a 'sweep' section".into()))
    }

    /// The parts of the config a risk surface depends on.
    pub fn surface_key(&self) -> serde_json::Value {
        serde_json::json!({
            "seed": self.seed,
            "data": self.data,
            "train": self.train,
            "sweep": self.sweep,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_and_unknown_keys() {
        let cfg: RunConfig = serde_json::from_str(r#"{"data": {"preset": "example1"}}"#).unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.split.max_routes, 16);
        cfg.validate().unwrap();
        assert!(serde_json::from_str::<RunConfig>(r#"{"data": {"preset": "example1"}, "sweeps": {}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"data": {"preset": "example3"}}"#).is_err());
    }

    #[test]
    fn axis_grid_is_sorted() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"data": {"preset": "example1"},
                "sweep": {"grid": {"axis": {"fixed": {"A": 10}, "varying": "B", "values": [100, 0, 10]}}}}"#,
        )
        .unwrap();
        let grid = cfg.sweep_config().unwrap().grid.allocations().unwrap();
        let counts: Vec<usize> = grid.iter().map(|a| a.get(&"B".into())).collect();
        assert_eq!(counts, vec![0, 10, 100]);
        assert!(grid.iter().all(|a| a.get(&"A".into()) == 10));
    }
}
