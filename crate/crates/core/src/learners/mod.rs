//! Fixed training procedures: regularised linear models with an intercept
//! capacity knob (shared vs per-group) and per-source-group loss weights.

mod cv;
mod design;
pub mod lasso;
mod linear;
pub mod logistic;

pub use cv::{cv_select_lambda, validation_loss};

use crate::dataset::{GroupedDataset, Task};
use crate::error::{Error, Result};
use crate::group::GroupId;
use crate::seed::SeedSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Ols,
    Ridge,
    Lasso,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterceptMode {
    #[default]
    Shared,
    PerGroup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    Lambda(f64),
    Cv { grid: Vec<f64>, folds: usize },
}

impl Penalty {
    /// Ten log-spaced values from 1e-4 to 1e2, five folds.
    pub fn default_cv() -> Self {
        let grid = (0..10).map(|i| 10f64.powf(-4.0 + 6.0 * i as f64 / 9.0)).collect();
        Penalty::Cv { grid, folds: 5 }
    }
}

impl Default for Penalty {
    fn default() -> Self {
        Penalty::Lambda(0.0)
    }
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub family: Family,
    #[serde(default)]
    pub penalty: Penalty,
    #[serde(default)]
    pub intercept_mode: InterceptMode,
    /// Loss weight per source group; missing groups weigh 1.
    #[serde(default)]
    pub group_weights: BTreeMap<GroupId, f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::new(Family::Ols)
    }
}

impl TrainConfig {
    pub fn new(family: Family) -> Self {
        TrainConfig {
            family,
            penalty: Penalty::default(),
            intercept_mode: InterceptMode::Shared,
            group_weights: BTreeMap::new(),
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.penalty = Penalty::Lambda(lambda);
        self
    }

    pub fn with_intercept_mode(mut self, mode: InterceptMode) -> Self {
        self.intercept_mode = mode;
        self
    }

    pub fn with_group_weight(mut self, group: GroupId, weight: f64) -> Self {
        self.group_weights.insert(group, weight);
        self
    }

    pub fn weight_of(&self, group: &GroupId) -> f64 {
        self.group_weights.get(group).copied().unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        match &self.penalty {
            Penalty::Lambda(l) if !(l.is_finite() && *l >= 0.0) => return bad(format!("lambda {l} must be >= 0")),
            Penalty::Cv { grid, folds } => {
                if grid.is_empty() {
                    return bad("cv requires a non-empty lambda grid".into());
                }
                if grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                    return bad("cv lambda grid values must be >= 0".into());
                }
                if *folds < 2 {
                    return bad(format!("cv needs at least 2 folds, got {folds}"));
                }
            }
            _ => {}
        }
        if let Some((g, w)) = self.group_weights.iter().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
            return bad(format!("weight for group {g} must be positive, got {w}"));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return bad("tol must be positive".into());
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        Ok(())
    }

    /// Short stable hash of the configuration, echoed in sweep outputs.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serialises");
        let digest = Sha256::digest(&canonical);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Key used for the single intercept of a shared-intercept model in JSON.
pub const SHARED_INTERCEPT_KEY: &str = "*";

#[derive(Debug, Clone, PartialEq)]
pub enum Intercepts {
    Shared(f64),
    PerGroup(BTreeMap<GroupId, f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelJson", into = "ModelJson")]
pub struct LinearModel {
    pub family: Family,
    pub weights: Vec<f64>,
    pub intercepts: Intercepts,
    pub lambda: f64,
}

impl LinearModel {
    pub fn intercept_mode(&self) -> InterceptMode {
        match self.intercepts {
            Intercepts::Shared(_) => InterceptMode::Shared,
            Intercepts::PerGroup(_) => InterceptMode::PerGroup,
        }
    }

    pub fn intercept(&self, group: &GroupId) -> Result<f64> {
        match &self.intercepts {
            Intercepts::Shared(b) => Ok(*b),
            Intercepts::PerGroup(m) => m
                .get(group)
                .copied()
                .ok_or_else(|| Error::UnknownGroupIntercept(group.clone())),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelJson {
    family: Family,
    intercept_mode: InterceptMode,
    weights: Vec<f64>,
    intercepts: BTreeMap<String, f64>,
    lambda: f64,
}

impl From<LinearModel> for ModelJson {
    fn from(m: LinearModel) -> Self {
        let intercept_mode = m.intercept_mode();
        let intercepts = match m.intercepts {
            Intercepts::Shared(b) => BTreeMap::from([(SHARED_INTERCEPT_KEY.to_string(), b)]),
            Intercepts::PerGroup(map) => map.into_iter().map(|(g, b)| (g.as_str().to_string(), b)).collect(),
        };
        ModelJson {
            family: m.family,
            intercept_mode,
            weights: m.weights,
            intercepts,
            lambda: m.lambda,
        }
    }
}

impl TryFrom<ModelJson> for LinearModel {
    type Error = String;

    fn try_from(j: ModelJson) -> std::result::Result<Self, String> {
        let intercepts = match j.intercept_mode {
            InterceptMode::Shared => match j.intercepts.get(SHARED_INTERCEPT_KEY) {
                Some(&b) if j.intercepts.len() == 1 => Intercepts::Shared(b),
                _ => {
                    return Err(format!(
                        "shared model needs exactly one '{SHARED_INTERCEPT_KEY}' intercept"
                    ))
                }
            },
            InterceptMode::PerGroup => Intercepts::PerGroup(
                j.intercepts
                    .into_iter()
                    .map(|(g, b)| GroupId::try_new(&g).map(|g| (g, b)).ok_or("empty group name"))
                    .collect::<std::result::Result<_, _>>()?,
            ),
        };
        Ok(LinearModel {
            family: j.family,
            weights: j.weights,
            intercepts,
            lambda: j.lambda,
        })
    }
}

/// Linear score `w . x + b_g`; for logistic models this is the log-odds.
pub fn predict(model: &LinearModel, x: &[f64], group: &GroupId) -> Result<f64> {
    if x.len() != model.weights.len() {
        return Err(Error::DimensionMismatch {
            expected: model.weights.len(),
            got: x.len(),
        });
    }
    let b = model.intercept(group)?;
    Ok(model.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
}

fn check_task(dataset: &GroupedDataset, config: &TrainConfig) -> Result<()> {
    match (dataset.task(), config.family) {
        (Task::BinaryClassification, Family::Logistic)
        | (Task::Regression, Family::Ols | Family::Ridge | Family::Lasso) => Ok(()),
        (task, family) => Err(Error::InvalidConfig(format!(
            "family {family:?} cannot be trained on a {task:?} task"
        ))),
    }
}

/// Fits at a fixed penalty value, ignoring any CV settings in `config`.
pub fn fit_with_lambda(dataset: &GroupedDataset, config: &TrainConfig, lambda: f64) -> Result<LinearModel> {
    check_task(dataset, config)?;
    if dataset.is_empty() {
        return Err(Error::DegenerateDesign("training set is empty".into()));
    }
    match config.family {
        Family::Ols => linear::fit_closed_form(dataset, config, 0.0, Family::Ols),
        Family::Ridge => linear::fit_closed_form(dataset, config, lambda, Family::Ridge),
        Family::Lasso => lasso::fit(dataset, config, lambda),
        Family::Logistic => logistic::fit(dataset, config, lambda),
    }
}

/// Empirical minimiser of the group-weighted training loss. The seed is used
/// only to assign cross-validation folds.
pub fn train(dataset: &GroupedDataset, config: &TrainConfig, seed: &SeedSpec) -> Result<LinearModel> {
    config.validate()?;
    check_task(dataset, config)?;
    if dataset.is_empty() {
        return Err(Error::DegenerateDesign("training set is empty".into()));
    }
    let lambda = match &config.penalty {
        Penalty::Lambda(l) => *l,
        Penalty::Cv { folds, .. } => cv_select_lambda(dataset, config, *folds, seed)?,
    };
    fit_with_lambda(dataset, config, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(intercepts: Intercepts) -> LinearModel {
        LinearModel {
            family: Family::Ols,
            weights: vec![-1.0],
            intercepts,
            lambda: 0.0,
        }
    }

    #[test]
    fn predict_examples() {
        let zero = LinearModel {
            weights: vec![0.0, 0.0],
            ..model(Intercepts::Shared(3.0))
        };
        assert_eq!(predict(&zero, &[5.0, -2.0], &"A".into()).unwrap(), 3.0);

        let m = model(Intercepts::Shared(-10.0));
        assert_eq!(predict(&m, &[-10.0], &"B".into()).unwrap(), 0.0);

        let pg = model(Intercepts::PerGroup(BTreeMap::from([
            ("A".into(), -10.0),
            ("B".into(), 10.0),
        ])));
        let a = predict(&pg, &[3.0], &"A".into()).unwrap();
        let b = predict(&pg, &[3.0], &"B".into()).unwrap();
        assert_eq!(b - a, 20.0);
        assert!(matches!(
            predict(&pg, &[3.0], &"C".into()),
            Err(Error::UnknownGroupIntercept(_))
        ));
        assert!(matches!(
            predict(&pg, &[3.0, 1.0], &"A".into()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn model_json_shape() {
        let m = model(Intercepts::Shared(2.5));
        let v: serde_json::Value = serde_json::to_value(&m).unwrap();
        assert_eq!(v["family"], "ols");
        assert_eq!(v["intercepts"]["*"], 2.5);
        assert_eq!(v["lambda"], 0.0);
        let back: LinearModel = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);

        let pg = model(Intercepts::PerGroup(BTreeMap::from([("A".into(), 1.0)])));
        let back: LinearModel = serde_json::from_str(&serde_json::to_string(&pg).unwrap()).unwrap();
        assert_eq!(back, pg);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::new(Family::Ridge).with_lambda(-1.0).validate().is_err());
        let mut c = TrainConfig::new(Family::Lasso);
        c.penalty = Penalty::Cv { grid: vec![], folds: 5 };
        assert!(c.validate().is_err());
        let c = TrainConfig::new(Family::Ols).with_group_weight("B".into(), 0.0);
        assert!(c.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
        let Penalty::Cv { grid, folds } = Penalty::default_cv() else {
            unreachable!()
        };
        assert_eq!((grid.len(), folds), (10, 5));
        assert!((grid[0] - 1e-4).abs() < 1e-18 && (grid[9] - 1e2).abs() < 1e-10);
    }

    #[test]
    fn config_json_rejects_unknown_keys() {
        let ok: TrainConfig = serde_json::from_str(r#"{"family":"lasso","penalty":{"lambda":0.1}}"#).unwrap();
        assert_eq!(ok.penalty, Penalty::Lambda(0.1));
        assert_eq!(ok.max_iter, 10_000);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"family":"ols","bogus":1}"#).is_err());
    }

    #[test]
    fn fingerprint_is_stable_and_sensitive() {
        let a = TrainConfig::new(Family::Ols);
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
        assert_ne!(
            a.fingerprint(),
            a.with_intercept_mode(InterceptMode::PerGroup).fingerprint()
        );
    }
}
