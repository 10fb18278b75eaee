//! Random hyperparameter search scored by stratified k-fold AUC-PR.

use std::collections::BTreeMap;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::metrics::auc_pr;
use crate::dataset::stratified_kfold;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{GbtConfig, LogisticConfig, MlpConfig, ModelKind, ModelSpec};
use crate::rng;
use crate::sampling::SmoteConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Domain {
    Fixed { value: Value },
    Choice { values: Vec<Value> },
    Uniform { low: f64, high: f64 },
    LogUniform { low: f64, high: f64 },
    /// Inclusive integer range.
    IntRange { low: i64, high: i64 },
}

impl Domain {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            Domain::Fixed { .. } => true,
            Domain::Choice { values } => !values.is_empty(),
            Domain::Uniform { low, high } => low <= high && low.is_finite() && high.is_finite(),
            Domain::LogUniform { low, high } => *low > 0.0 && low <= high && high.is_finite(),
            Domain::IntRange { low, high } => low <= high,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("empty or malformed domain {self:?}")))
        }
    }

    fn sample(&self, r: &mut rng::Rng) -> Value {
        match self {
            Domain::Fixed { value } => value.clone(),
            Domain::Choice { values } => values[r.random_range(0..values.len())].clone(),
            Domain::Uniform { low, high } => Value::from(if low == high { *low } else { r.random_range(*low..*high) }),
            Domain::LogUniform { low, high } => {
                let (a, b) = (low.ln(), high.ln());
                Value::from(if a == b { *low } else { r.random_range(a..b).exp() })
            }
            Domain::IntRange { low, high } => Value::from(r.random_range(*low..=*high)),
        }
    }

    pub fn contains(&self, v: &Value) -> bool {
        match self {
            Domain::Fixed { value } => value == v,
            Domain::Choice { values } => values.iter().any(|c| same_value(c, v)),
            Domain::Uniform { low, high } | Domain::LogUniform { low, high } => {
                v.as_f64().is_some_and(|x| *low <= x && x <= *high)
            }
            Domain::IntRange { low, high } => v.as_i64().is_some_and(|x| *low <= x && x <= *high),
        }
    }
}

fn same_value(a: &Value, b: &Value) -> bool {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => x == y,
        _ => a == b,
    }
}

/// Domains for named top-level fields of a base model spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub base: ModelSpec,
    #[serde(default)]
    pub params: BTreeMap<String, Domain>,
}

fn choice<T: Into<Value>>(values: impl IntoIterator<Item = T>) -> Domain {
    Domain::Choice {
        values: values.into_iter().map(Into::into).collect(),
    }
}

impl SearchSpace {
    pub fn single(base: ModelSpec) -> Self {
        SearchSpace {
            base,
            params: BTreeMap::new(),
        }
    }

    /// The published search ranges for each model family.
    pub fn standard(kind: ModelKind) -> Self {
        let mut params = BTreeMap::new();
        let base = match kind {
            ModelKind::Logistic => {
                params.insert("C".into(), Domain::Uniform { low: 0.0, high: 1.0 });
                ModelSpec::Logistic(LogisticConfig::default())
            }
            ModelKind::Gbt => {
                params.insert("learning_rate".into(), Domain::LogUniform { low: 0.01, high: 0.1 });
                params.insert("max_depth".into(), Domain::IntRange { low: 3, high: 12 });
                params.insert("min_child_weight".into(), Domain::Uniform { low: 1.0, high: 10.0 });
                ModelSpec::Gbt(GbtConfig::default())
            }
            ModelKind::Mlp => {
                params.insert("learning_rate".into(), Domain::LogUniform { low: 0.001, high: 0.1 });
                params.insert("activation".into(), choice(["relu", "leaky_relu", "tanh"]));
                params.insert("epochs".into(), choice([5, 10, 20]));
                params.insert("batch_size".into(), choice([16, 32, 64, 128, 256]));
                params.insert("dropout".into(), choice([0.0, 0.1, 0.5]));
                ModelSpec::Mlp(MlpConfig::default())
            }
        };
        SearchSpace { base, params }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.values().try_for_each(Domain::validate)?;
        self.base.validate()
    }

    fn apply(&self, values: &BTreeMap<String, Value>) -> Result<ModelSpec> {
        let mut v = serde_json::to_value(&self.base)?;
        let obj = v.as_object_mut().expect("model spec serializes to an object");
        for (k, val) in values {
            if !obj.contains_key(k) {
                return Err(Error::config(format!("unknown hyperparameter {k:?} for {}", self.base.kind().name())));
            }
            obj.insert(k.clone(), val.clone());
        }
        let spec: ModelSpec = serde_json::from_value(v).map_err(|e| Error::config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn sample(&self, r: &mut rng::Rng) -> Result<ModelSpec> {
        let values = self.params.iter().map(|(k, d)| (k.clone(), d.sample(r))).collect();
        self.apply(&values)
    }

    /// Whether every searched field of `spec` lies in its domain.
    pub fn contains(&self, spec: &ModelSpec) -> bool {
        let Ok(v) = serde_json::to_value(spec) else { return false };
        spec.kind() == self.base.kind()
            && self.params.iter().all(|(k, d)| v.get(k.as_str()).is_some_and(|x| d.contains(x)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub k_folds: usize,
    pub n_trials: usize,
    pub seed: u64,
    /// Oversample each fold's training part when set.
    pub smote: Option<SmoteConfig>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            k_folds: 5,
            n_trials: 40,
            seed: 0,
            smote: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub index: usize,
    pub spec: ModelSpec,
    pub fold_metrics: Vec<f64>,
    /// Mean fold AUC-PR; `None` when the trial failed.
    pub mean_metric: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: TrialResult,
    pub trials: Vec<TrialResult>,
}

fn run_trial(
    index: usize,
    spec: ModelSpec,
    x: &Matrix,
    y: &[bool],
    folds: &[crate::dataset::Split],
    smote: Option<&SmoteConfig>,
) -> TrialResult {
    let mut fold_metrics = Vec::with_capacity(folds.len());
    let mut error = None;
    for (f, split) in folds.iter().enumerate() {
        let outcome = (|| -> Result<f64> {
            let tx = x.select_rows(&split.train);
            let ty: Vec<bool> = split.train.iter().map(|&i| y[i]).collect();
            let smote = smote.map(|cfg| SmoteConfig {
                seed: rng::derive_seed_indexed(cfg.seed, "search/smote", f as u64),
                ..cfg.clone()
            });
            let model = spec.fit_oversampled(&tx, &ty, smote.as_ref())?;
            let vx = x.select_rows(&split.test);
            let vy: Vec<bool> = split.test.iter().map(|&i| y[i]).collect();
            auc_pr(&model.predict_proba(&vx)?, &vy)
        })();
        match outcome {
            Ok(m) => fold_metrics.push(m),
            Err(e) => {
                error = Some(format!("fold {f}: {e}"));
                break;
            }
        }
    }
    let mean_metric = error
        .is_none()
        .then(|| fold_metrics.iter().sum::<f64>() / fold_metrics.len() as f64);
    TrialResult {
        index,
        spec,
        fold_metrics,
        mean_metric,
        error,
    }
}

pub fn hyperparameter_search(
    space: &SearchSpace,
    x: &Matrix,
    y: &[bool],
    options: &SearchOptions,
) -> Result<SearchOutcome> {
    space.validate()?;
    if options.n_trials == 0 {
        return Err(Error::config("n_trials must be at least 1"));
    }
    if x.rows() != y.len() {
        return Err(Error::invalid("labels and rows differ"));
    }
    let folds = stratified_kfold(y, options.k_folds, rng::derive_seed(options.seed, "search/folds"))?;
    let specs: Vec<ModelSpec> = (0..options.n_trials)
        .map(|i| {
            let mut r = rng::stream_indexed(options.seed, "search/sample", i as u64);
            let seed = rng::derive_seed_indexed(options.seed, "search/trial", i as u64);
            space.sample(&mut r).map(|s| s.with_seed(seed))
        })
        .collect::<Result<_>>()?;
    let trials: Vec<TrialResult> = specs
        .into_par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let t = run_trial(i, spec, x, y, &folds, options.smote.as_ref());
            log::info!(
                "trial {i}: {}",
                t.mean_metric.map_or_else(|| t.error.clone().unwrap_or_default(), |m| format!("{m:.4}"))
            );
            t
        })
        .collect();
    let best = trials
        .iter()
        .filter_map(|t| t.mean_metric.map(|m| (m, t)))
        .fold(None::<(f64, &TrialResult)>, |acc, (m, t)| match acc {
            Some((b, _)) if m <= b => acc,
            _ => Some((m, t)),
        })
        .map(|(_, t)| t.clone())
        .ok_or_else(|| {
            let first = trials.iter().find_map(|t| t.error.clone()).unwrap_or_default();
            Error::training(format!("every search trial failed (first error: {first})"))
        })?;
    Ok(SearchOutcome { best, trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::SamplerKind;

    fn data() -> (Matrix, Vec<bool>) {
        let mut r = rng::stream(31, "search-data");
        let rows: Vec<[f64; 3]> = (0..300).map(|_| [r.random(), r.random(), r.random()]).collect();
        let y = rows.iter().map(|v| v[0] + 0.4 * v[1] + 0.3 * r.random::<f64>() > 1.0).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn samples_stay_in_domain() {
        for kind in [ModelKind::Logistic, ModelKind::Gbt, ModelKind::Mlp] {
            let space = SearchSpace::standard(kind);
            for i in 0..50 {
                let mut r = rng::stream_indexed(1, "t", i);
                let spec = space.sample(&mut r).unwrap();
                assert!(space.contains(&spec), "{spec:?}");
            }
        }
    }

    #[test]
    fn single_config_space_returns_it() {
        let (x, y) = data();
        let space = SearchSpace::single(ModelSpec::Logistic(LogisticConfig { c: 0.3, ..Default::default() }));
        let opts = SearchOptions {
            k_folds: 3,
            n_trials: 2,
            ..Default::default()
        };
        let out = hyperparameter_search(&space, &x, &y, &opts).unwrap();
        let ModelSpec::Logistic(c) = &out.best.spec else { panic!() };
        assert_eq!(c.c, 0.3);
        assert_eq!(out.best.index, 0);
    }

    #[test]
    fn best_is_argmax_and_deterministic() {
        let (x, y) = data();
        let space = SearchSpace::standard(ModelKind::Logistic);
        let opts = SearchOptions {
            k_folds: 3,
            n_trials: 6,
            seed: 4,
            smote: None,
        };
        let a = hyperparameter_search(&space, &x, &y, &opts).unwrap();
        let b = hyperparameter_search(&space, &x, &y, &opts).unwrap();
        assert_eq!(a, b);
        let best = a.best.mean_metric.unwrap();
        assert!(a.trials.iter().all(|t| t.mean_metric.unwrap() <= best));
        assert_eq!(a.trials.iter().map(|t| t.index).collect::<Vec<_>>(), (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn failed_trials_are_excluded() {
        let (x, y) = data();
        let mut space = SearchSpace::single(ModelSpec::Mlp(MlpConfig {
            hidden_sizes: vec![4],
            epochs: 1,
            batch_size: 32,
            sampler: SamplerKind::Plain,
            ..Default::default()
        }));
        // Diverging learning rates fail; the tiny one succeeds.
        space.params.insert("learning_rate".into(), choice([1e300, 1e-3]));
        let opts = SearchOptions {
            k_folds: 2,
            n_trials: 6,
            seed: 2,
            smote: None,
        };
        let out = hyperparameter_search(&space, &x, &y, &opts).unwrap();
        assert!(out.trials.iter().any(|t| t.error.is_some()));
        assert!(out.best.error.is_none());

        space.params.insert("learning_rate".into(), choice([1e300]));
        assert!(hyperparameter_search(&space, &x, &y, &opts).is_err());
    }

    #[test]
    fn unknown_field_rejected() {
        let mut space = SearchSpace::standard(ModelKind::Gbt);
        space.params.insert("bogus".into(), choice([1]));
        let mut r = rng::stream(0, "x");
        assert!(space.sample(&mut r).is_err());
    }
}
