//! Representation-level attention: per-channel transforms, softmax compatibility
//! weights and blended triplets over frozen representation models.

mod model;
mod net;

pub use model::{train_attention, AttentionModel, AttentiveTriple, ChannelRef, UserContext};
pub use net::{softmax, AttentionNet, BlendOutput, ChannelBatch};
