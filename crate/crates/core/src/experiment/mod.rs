//! Configured end-to-end runs and their on-disk artifacts.

mod config;
mod pipeline;
mod run;

pub use config::{
    apply_override, AttributionSettings, EmbeddingProvider, EmbeddingSettings, ExperimentConfig, SamplingSettings,
    SearchSettings, SplitSettings, SEED_ENV,
};
pub use pipeline::{load_and_prepare, load_records, prepare, DatasetFingerprint, Embeddings, Prepared};
pub use run::{
    attribute_run, baselines, evaluate_run, load_run, run_ablation, run_experiment, run_prepared, run_search,
    train_and_score, Baselines, Manifest, ManifestEntry, RunOutcome, ABLATION_FILE, BASELINES_FILE, CONFIG_FILE,
    DATASET_FILE, MANIFEST_FILE, MODEL_FILE, RUN_FILES, SEARCH_FILE,
};
pub use run::{write_atomically, write_json};
