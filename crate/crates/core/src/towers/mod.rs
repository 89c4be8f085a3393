//! Two-tower representation networks, the product and distance triplet losses, and
//! the global training loop.

mod loss;
mod model;
mod train;

pub use loss::{
    distance_loss, product_loss, softplus_neg, triplet_loss, triplet_loss_grad, LossKind,
};
pub use model::{RepresentationModel, SourceKind, TowerArch};
pub(crate) use train::hold_out;
pub use train::{
    fit, mean_objective, train_global, HardNegatives, TrainConfig, TrainReport, TripletObjective,
};
