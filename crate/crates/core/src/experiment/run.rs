use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{AttributionSettings, ExperimentConfig};
use super::pipeline::{load_and_prepare, prepare, sha256_file, Prepared};
use crate::attribution::{shap_values, stratified_background, write_attributions, Attribution, FeatureGrouping};
use crate::dataset::io::{write_schema_json, SCHEMA_FILE};
use crate::dataset::BondRecord;
use crate::error::{Error, Result, StageExt};
use crate::evaluation::{
    ablation_run, evaluate, hyperparameter_search, rating_predictions, spread_baseline, AblationOptions,
    AblationTable, EvalReport, SearchOptions, SearchOutcome, SearchSpace, PR_CURVE_FILE, REPORT_FILE,
};
use crate::models::{load_model, save_model, Model};
use crate::rng;

pub const CONFIG_FILE: &str = "config.toml";
pub const DATASET_FILE: &str = "dataset.json";
pub const MODEL_FILE: &str = "model.scm";
pub const BASELINES_FILE: &str = "baselines.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Files a finished run directory always holds, in manifest order.
pub const RUN_FILES: [&str; 7] = [
    CONFIG_FILE,
    DATASET_FILE,
    SCHEMA_FILE,
    MODEL_FILE,
    REPORT_FILE,
    PR_CURVE_FILE,
    BASELINES_FILE,
];

/// The two human-estimate baselines scored on the test rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub spread: EvalReport,
    pub rating: EvalReport,
}

pub fn baselines(test_records: &[BondRecord], threshold: f64) -> Result<Baselines> {
    let labels: Vec<bool> = test_records.iter().map(|r| r.defaulted).collect();
    let spreads: Vec<f64> = test_records.iter().map(|r| r.spread).collect();
    let spread = evaluate("spread baseline", &spread_baseline(&spreads)?, &labels, threshold)?;
    let ratings: Vec<_> = test_records.iter().map(|r| r.rating).collect();
    let rating_scores: Vec<f64> = rating_predictions(&ratings).iter().map(|&p| f64::from(u8::from(p))).collect();
    let rating = evaluate("rating baseline", &rating_scores, &labels, 0.5)?;
    Ok(Baselines { spread, rating })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub created_at: String,
    pub files: Vec<ManifestEntry>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn write_manifest(dir: &Path, files: &[&str]) -> Result<()> {
    let files = files
        .iter()
        .map(|f| {
            let p = dir.join(f);
            let bytes = std::fs::metadata(&p).map_err(|e| Error::io(&p, e))?.len();
            Ok(ManifestEntry {
                file: f.to_string(),
                bytes,
                sha256: sha256_file(&p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let created_at = chrono::DateTime::<chrono::Utc>::from(std::time::SystemTime::now())
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    write_json(
        &dir.join(MANIFEST_FILE),
        &Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            created_at,
            files,
        },
    )
}

/// Builds a directory next to `out` and renames it into place once every
/// file is written, so a failed run never leaves a half-filled `out`.
pub fn write_atomically(out: &Path, overwrite: bool, fill: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    if out.exists() {
        let empty = out.is_dir() && std::fs::read_dir(out).map_err(|e| Error::io(out, e))?.next().is_none();
        if !(overwrite || empty) {
            return Err(Error::config(format!(
                "output directory {} already exists (pass --force to replace it)",
                out.display()
            )));
        }
    }
    let name = out
        .file_name()
        .ok_or_else(|| Error::config(format!("bad output directory {}", out.display())))?
        .to_string_lossy();
    let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let tmp = parent.join(format!(".{name}.partial-{}", std::process::id()));
    if tmp.exists() {
        std::fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    std::fs::create_dir(&tmp).map_err(|e| Error::io(&tmp, e))?;
    if let Err(e) = fill(&tmp) {
        let _ = std::fs::remove_dir_all(&tmp);
        return Err(e);
    }
    if out.exists() {
        std::fs::remove_dir_all(out).map_err(|e| Error::io(out, e))?;
    }
    std::fs::rename(&tmp, out).map_err(|e| Error::io(out, e))
}

/// What a training run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub model: Model,
    pub report: EvalReport,
    pub baselines: Baselines,
}

/// Trains the configured model on the training split and returns its
/// test-split scores.
pub fn train_and_score(prepared: &Prepared, cfg: &ExperimentConfig) -> Result<(Model, Vec<f64>)> {
    let train = &prepared.train;
    let smote = cfg.sampling.smote.then(|| {
        cfg.sampling
            .smote_config(rng::derive_seed(cfg.seed, "smote"))
            .with_schema_groups(&train.schema)
    });
    let mut model = cfg
        .model_spec()
        .fit_oversampled(&train.values, &train.labels, smote.as_ref())
        .stage("training")?;
    model.schema_fingerprint = train.schema.fingerprint();
    let scores = model.predict_proba(&prepared.test.values).stage("evaluation")?;
    Ok((model, scores))
}

/// Full pipeline: data, split, embeddings, optional oversampling, training,
/// evaluation and baselines, written to `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, overwrite: bool) -> Result<RunOutcome> {
    cfg.validate().stage("config")?;
    let (_, prepared) = load_and_prepare(cfg)?;
    run_prepared(&prepared, cfg, overwrite)
}

/// [`run_experiment`] on already prepared matrices.
pub fn run_prepared(prepared: &Prepared, cfg: &ExperimentConfig, overwrite: bool) -> Result<RunOutcome> {
    let (model, scores) = train_and_score(prepared, cfg)?;
    let description = if cfg.description.is_empty() {
        format!("{}{}", cfg.model.kind().name(), if cfg.sampling.smote { " + smote" } else { "" })
    } else {
        cfg.description.clone()
    };
    let report = evaluate(description, &scores, &prepared.test.labels, cfg.threshold).stage("evaluation")?;
    let baselines = baselines(&prepared.test_records, cfg.threshold).stage("baselines")?;

    let out = cfg.output_dir.clone();
    write_atomically(&out, overwrite, |dir| {
        std::fs::write(dir.join(CONFIG_FILE), cfg.to_toml()?).map_err(|e| Error::io(dir.join(CONFIG_FILE), e))?;
        write_json(&dir.join(DATASET_FILE), &prepared.fingerprint)?;
        write_schema_json(dir.join(SCHEMA_FILE), &prepared.train.schema)?;
        save_model(&model, dir.join(MODEL_FILE))?;
        report.write_json(dir.join(REPORT_FILE))?;
        report.write_pr_csv(dir.join(PR_CURVE_FILE))?;
        write_json(&dir.join(BASELINES_FILE), &baselines)?;
        write_manifest(dir, &RUN_FILES)
    })
    .stage("output")?;
    Ok(RunOutcome {
        dir: out,
        model,
        report,
        baselines,
    })
}

/// Reads a finished run's config and model.
pub fn load_run(dir: &Path) -> Result<(ExperimentConfig, Model)> {
    let path = dir.join(CONFIG_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let cfg = ExperimentConfig::from_toml_with(&text, &[], None)?;
    let model = load_model(dir.join(MODEL_FILE))?;
    Ok((cfg, model))
}

fn check_fingerprint(model: &Model, prepared: &Prepared) -> Result<()> {
    let found = &prepared.fingerprint.schema_fingerprint;
    if !model.schema_fingerprint.is_empty() && &model.schema_fingerprint != found {
        return Err(Error::invalid(format!(
            "model was fitted on schema {} but the data encodes to schema {found}",
            model.schema_fingerprint
        )));
    }
    Ok(())
}

/// Re-scores a saved run's model on the test split of `records`, writing
/// the report, curve and baselines to `out`.
pub fn evaluate_run(run_dir: &Path, records: &[BondRecord], out: &Path, overwrite: bool) -> Result<EvalReport> {
    let (cfg, model) = load_run(run_dir).stage("load")?;
    let prepared = prepare(records, &cfg)?;
    check_fingerprint(&model, &prepared).stage("encode")?;
    let scores = model.predict_proba(&prepared.test.values).stage("evaluation")?;
    let description = format!("{} on {}", model.kind().name(), prepared.fingerprint.source);
    let report = evaluate(description, &scores, &prepared.test.labels, cfg.threshold).stage("evaluation")?;
    let baselines = baselines(&prepared.test_records, cfg.threshold).stage("baselines")?;
    write_atomically(out, overwrite, |dir| {
        report.write_json(dir.join(REPORT_FILE))?;
        report.write_pr_csv(dir.join(PR_CURVE_FILE))?;
        write_json(&dir.join(BASELINES_FILE), &baselines)?;
        write_json(&dir.join(DATASET_FILE), &prepared.fingerprint)?;
        write_manifest(dir, &[REPORT_FILE, PR_CURVE_FILE, BASELINES_FILE, DATASET_FILE])
    })
    .stage("output")?;
    Ok(report)
}

pub const SEARCH_FILE: &str = "search.json";

/// Cross-validated random search over the standard space for the
/// configured model family, on the training split.
pub fn run_search(cfg: &ExperimentConfig, prepared: &Prepared, space: Option<SearchSpace>) -> Result<SearchOutcome> {
    let space = space.unwrap_or_else(|| SearchSpace::standard(cfg.model.kind()));
    let options = SearchOptions {
        k_folds: cfg.split.k_folds,
        n_trials: cfg.search.n_trials,
        seed: rng::derive_seed(cfg.seed, "search"),
        smote: cfg.sampling.smote.then(|| {
            cfg.sampling
                .smote_config(rng::derive_seed(cfg.seed, "smote"))
                .with_schema_groups(&prepared.train.schema)
        }),
    };
    hyperparameter_search(&space, &prepared.train.values, &prepared.train.labels, &options).stage("search")
}

pub const ABLATION_FILE: &str = "ablation.json";

pub fn run_ablation(cfg: &ExperimentConfig, prepared: &Prepared) -> Result<AblationTable> {
    let options = AblationOptions {
        seed: cfg.seed,
        smote: cfg.sampling.smote_config(0),
        threshold: cfg.threshold,
    };
    ablation_run(&prepared.train, &prepared.test, &cfg.model_spec(), &options).stage("ablation")
}

/// Group Shapley values for the highest-scoring test rows of a saved run.
/// `settings` replaces the run's own attribution settings when given.
pub fn attribute_run(
    run_dir: &Path,
    records: &[BondRecord],
    settings: Option<&AttributionSettings>,
    out: &Path,
    overwrite: bool,
) -> Result<Vec<Attribution>> {
    let (mut cfg, model) = load_run(run_dir).stage("load")?;
    if let Some(s) = settings {
        cfg.attribution = s.clone();
    }
    let prepared = prepare(records, &cfg)?;
    check_fingerprint(&model, &prepared).stage("encode")?;
    let test = &prepared.test;
    let scores = model.predict_proba(&test.values).stage("attribution")?;
    let mut order: Vec<usize> = (0..test.rows()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(cfg.attribution.rows);

    let train = &prepared.train;
    let bg_idx = stratified_background(&train.labels, cfg.attribution.background, rng::derive_seed(cfg.seed, "attribution"));
    let background = train.values.select_rows(&bg_idx);
    let grouping = FeatureGrouping::from_schema(&train.schema).stage("attribution")?;
    let attributions = order
        .iter()
        .map(|&i| {
            shap_values(
                &model,
                &test.row_keys[i],
                test.values.row(i),
                &background,
                &grouping,
                cfg.attribution.n_samples,
                rng::derive_seed_indexed(cfg.seed, "attribution/row", i as u64),
            )
        })
        .collect::<Result<Vec<_>>>()
        .stage("attribution")?;
    write_atomically(out, overwrite, |dir| write_attributions(dir, &attributions).map(|_| ())).stage("output")?;
    Ok(attributions)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_cleans_up_on_failure() {
        let root = tempfile::tempdir().unwrap();
        let out = root.path().join("run");
        let e = write_atomically(&out, false, |d| {
            std::fs::write(d.join("a"), "x").unwrap();
            Err(Error::training("boom"))
        })
        .unwrap_err();
        assert_eq!(e.exit_code(), 3);
        assert!(!out.exists());
        assert_eq!(std::fs::read_dir(root.path()).unwrap().count(), 0);

        write_atomically(&out, false, |d| std::fs::write(d.join("a"), "x").map_err(|e| Error::io(d, e))).unwrap();
        assert!(out.join("a").exists());
        assert!(write_atomically(&out, false, |_| Ok(())).is_err());
        write_atomically(&out, true, |_| Ok(())).unwrap();
        assert!(!out.join("a").exists());
    }
}
