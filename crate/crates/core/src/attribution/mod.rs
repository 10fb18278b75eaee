//! Group-level Shapley attribution with interventional masking.

mod shap;

pub use shap::{
    global_importance, shap_values, stratified_background, write_attributions, Attribution, FeatureGroup,
    FeatureGrouping, FnScorer, GroupValue, Scorer, EMBEDDING_GROUP,
};
