//! Collaborative filtering over several global and local user-item representation
//! spaces, fused per user-item pair by a representation-level attention network and
//! served through a k-means coarse-to-fine index.
//!
//! Pipeline: [`corpus`] builds the binary interaction matrix and splits; [`towers`]
//! trains two-tower triplet models; [`clusterindex`] clusters items in a global space
//! and mines local triplets; [`fusion`] learns the attention over frozen spaces;
//! [`recommend`] runs the cluster shortlist plus attentive re-ranking; [`metrics`]
//! scores the results; [`pipeline`] ties the stages to persisted artifacts.

pub mod clusterindex;
pub mod corpus;
pub mod digest;
pub mod error;
pub mod fusion;
pub mod metrics;
pub mod pipeline;
pub mod recommend;
pub mod seed;
pub mod tensornet;
pub mod towers;

pub use clusterindex::{ClusterIndex, LocalTripletSets};
pub use corpus::{InteractionMatrix, Split, SplitProtocol, SplitSpec, Triplet};
pub use error::{Error, ErrorClass, Result};
pub use fusion::{AttentionModel, AttentiveTriple};
pub use metrics::EvalResult;
pub use recommend::{RecommendConfig, RecommendationList, ScoreKind};
pub use pipeline::{Pipeline, RunConfig, RunManifest};
pub use towers::{LossKind, RepresentationModel, SourceKind, TrainConfig};
