//! Shared setup for the benchmarks in `benches/`.

use glocal::clusterindex::{build_index, ClusterIndex};
use glocal::corpus::synthetic::SyntheticSpec;
use glocal::towers::{LossKind, RepresentationModel, SourceKind, TowerArch};
use glocal::InteractionMatrix;

/// A MovieLens-100k sized log (943 users, 1682 items, ~100k interactions).
pub fn movielens_sized() -> InteractionMatrix {
    SyntheticSpec {
        users: 943,
        items: 1682,
        groups: 19,
        min_degree: 20,
        max_degree: 190,
        ..Default::default()
    }
    .matrix()
    .expect("valid synthetic spec")
}

/// An untrained 64-dimensional model; timings do not depend on the weights.
pub fn model(m: &InteractionMatrix, loss: LossKind) -> RepresentationModel<f32> {
    RepresentationModel::new(m.user_count(), m.item_count(), &TowerArch::uniform(64), loss, SourceKind::Global, 7)
        .expect("valid arch")
}

pub fn index(model: &RepresentationModel<f32>, clusters: usize) -> ClusterIndex {
    build_index(model, clusters, 11).expect("index")
}
