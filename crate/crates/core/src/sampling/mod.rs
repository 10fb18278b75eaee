//! Minority oversampling and balanced batch composition.

mod batch;
mod smote;

pub use batch::{class_weights, shuffled_batches, weighted_batch_sampler, ClassWeights, WeightedBatchSampler};
pub use smote::{
    category_of, encode_nominal_enc, minority_label, nearest_neighbors, smote_enc, Category, EncodedSpace,
    GroupEncoding, SmoteConfig,
};
