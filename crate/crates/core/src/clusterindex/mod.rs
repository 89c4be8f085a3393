//! k-means item clusters, the inverted-list index, and local triplet mining.

mod index;
mod kmeans;
mod local;

pub use index::{build_index, build_index_from_vectors, index_objective, ClusterIndex};
pub use kmeans::{kmeans, nearest, KMeansConfig, KMeansResult};
pub use local::{
    mine_local_triplets, mine_local_triplets_from_vectors, passes_inter, passes_intra, train_local,
    LocalTripletSets, MiningConfig, MiningMode,
};
