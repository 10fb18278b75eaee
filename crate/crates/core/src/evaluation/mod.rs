//! Metrics, human baselines, hyperparameter search and ablation.

mod ablation;
mod baselines;
mod metrics;
mod report;
mod search;

pub use ablation::{ablation_cells, ablation_run, AblationCell, AblationOptions, AblationTable, ALL_CELLS};
pub use baselines::{rating_baseline, rating_predictions, spread_baseline, SPREAD_SATURATION};
pub use metrics::{auc_pr, auc_pr_from_curve, confusion_at, ks_statistic, pr_curve, roc_auc, ConfusionCounts, PrPoint};
pub use report::{
    csv_table, emit_report, evaluate, markdown_table, EvalReport, TableRow, PR_CURVE_FILE, REPORT_FILE, TABLE_COLUMNS,
};
pub use search::{hyperparameter_search, Domain, SearchOptions, SearchOutcome, SearchSpace, TrialResult};
