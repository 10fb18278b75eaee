//! Bond records, the synthetic generator, feature encoding, macro series
//! ingestion and splits.

mod generator;
pub mod io;
mod macro_series;
mod record;
mod schema;
mod split;

pub use generator::{generate_synthetic, generate_with_macro, synthetic_macro_path, GeneratorConfig, PlantedSignal, STATES};
pub use macro_series::{load_macro_csv, MacroSeries};
pub use record::{BondRecord, MacroSnapshot, Rating, TabularRecord, UNDISCLOSED};
pub use schema::{
    encode_features, fit_schema, CategoricalBlock, ColumnDescriptor, ColumnKind, ContinuousParam, FeatureMatrix,
    FeatureSchema,
};
pub use split::{split_holdout, stratified_kfold, Split};
