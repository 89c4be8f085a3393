//! Interaction logs: ingest, filtering, train/test protocols and triplet sampling.

mod matrix;
mod sampling;
mod split;
pub mod synthetic;

pub use matrix::{
    filter_min_interactions, load_interactions, read_interactions, Delimiter, DelimiterSpec,
    Interaction, InteractionMatrix, Vocab,
};
pub use sampling::{
    draw_negative, sample_global_triplets, sample_global_triplets_from, sample_loo_negatives,
    GlobalTripletSampler, Triplet,
};
pub use split::{split, Split, SplitProtocol, SplitSpec, TestSet};
