use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ClusterIndex;
use crate::corpus::{InteractionMatrix, Triplet};
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::tensornet::{squared_distance, Matrix};
use crate::towers::{fit, hold_out, LossKind, RepresentationModel, SourceKind, TrainConfig, TrainReport};

/// Local triplets mined around each user's candidate clusters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LocalTripletSets {
    /// Both items in one cluster; the negative is closer to the user than the positive.
    pub intra: Vec<Triplet>,
    /// Items in different clusters; the negative's centroid is closer to the user.
    pub inter: Vec<Triplet>,
    /// Users without any positive (or any negative) inside their candidate clusters.
    pub skipped_users: usize,
}

impl LocalTripletSets {
    pub fn len(&self) -> usize {
        self.intra.len() + self.inter.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiningMode {
    /// Every (positive, negative) pair inside the candidate clusters.
    Exhaustive,
    /// This many uniformly drawn candidate negatives per positive.
    Sampled { draws_per_positive: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MiningConfig {
    /// Candidate clusters per user.
    pub j: usize,
    pub mode: MiningMode,
}

impl Default for MiningConfig {
    fn default() -> Self {
        Self {
            j: 5,
            mode: MiningMode::Sampled {
                draws_per_positive: 10,
            },
        }
    }
}

/// Intra-cluster test: `‖û − î⁺‖ > ‖û − î⁻‖`.
pub fn passes_intra(u: &[f32], pos: &[f32], neg: &[f32]) -> bool {
    squared_distance(u, pos) > squared_distance(u, neg)
}

/// Inter-cluster test: `‖û − μ_j‖ > ‖û − μ_k‖` for the clusters of the positive and negative.
pub fn passes_inter(u: &[f32], pos_centroid: &[f32], neg_centroid: &[f32]) -> bool {
    squared_distance(u, pos_centroid) > squared_distance(u, neg_centroid)
}

/// Mines local triplets from precomputed global user and item vectors. `index` must have
/// been built over `items`.
pub fn mine_local_triplets_from_vectors(
    users: &Matrix<f32>,
    items: &Matrix<f32>,
    index: &ClusterIndex,
    train: &InteractionMatrix,
    cfg: &MiningConfig,
    seed: u64,
) -> Result<LocalTripletSets> {
    if users.rows() != train.user_count() || items.rows() != train.item_count() {
        return Err(Error::Shape("embedding tables do not match the interaction matrix".into()));
    }
    if index.item_count() != train.item_count() {
        return Err(Error::Shape("index and interaction matrix differ in item count".into()));
    }
    if let MiningMode::Sampled { draws_per_positive: 0 } = cfg.mode {
        return Err(Error::InvalidArgument("draws_per_positive must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sets = LocalTripletSets::default();
    for u in 0..train.user_count() as u32 {
        let uv = users.row(u as usize);
        let candidates = index.candidates(uv, cfg.j)?;
        let positives: Vec<u32> = candidates.iter().copied().filter(|&i| train.contains(u, i)).collect();
        let negatives: Vec<u32> = candidates.iter().copied().filter(|&i| !train.contains(u, i)).collect();
        if positives.is_empty() || negatives.is_empty() {
            sets.skipped_users += 1;
            continue;
        }
        let mut route = |pos: u32, neg: u32| {
            let (cp, cn) = (index.cluster_of(pos), index.cluster_of(neg));
            if cp == cn {
                if passes_intra(uv, items.row(pos as usize), items.row(neg as usize)) {
                    sets.intra.push(Triplet::new(u, pos, neg));
                }
            } else if passes_inter(uv, index.centroid(cp), index.centroid(cn)) {
                sets.inter.push(Triplet::new(u, pos, neg));
            }
        };
        match cfg.mode {
            MiningMode::Exhaustive => {
                for &p in &positives {
                    for &n in &negatives {
                        route(p, n);
                    }
                }
            }
            MiningMode::Sampled { draws_per_positive } => {
                for &p in &positives {
                    for _ in 0..draws_per_positive {
                        route(p, negatives[rng.gen_range(0..negatives.len())]);
                    }
                }
            }
        }
    }
    if sets.skipped_users > 0 {
        log::info!("local mining skipped {} users", sets.skipped_users);
    }
    log::info!("mined {} intra and {} inter triplets", sets.intra.len(), sets.inter.len());
    Ok(sets)
}

/// Mines local triplets in the space of the (frozen) global model the index was built on.
pub fn mine_local_triplets(
    global: &RepresentationModel<f32>,
    index: &ClusterIndex,
    train: &InteractionMatrix,
    cfg: &MiningConfig,
    seed: u64,
) -> Result<LocalTripletSets> {
    if global.tag() != index.space_tag {
        log::warn!("mining in {} space with an index built over {}", global.tag(), index.space_tag);
    }
    mine_local_triplets_from_vectors(
        &global.user_embeddings(),
        &global.item_embeddings(),
        index,
        train,
        cfg,
        seed,
    )
}

/// Draws an epoch of `n` triplets alternating between `a` and `b` (uniformly, with
/// replacement). Falls back to the non-empty pool when one is empty.
pub(crate) fn interleave_epoch(a: &[Triplet], b: &[Triplet], n: usize, rng: &mut ChaCha8Rng) -> Vec<Triplet> {
    let pools: Vec<&[Triplet]> = [a, b].into_iter().filter(|p| !p.is_empty()).collect();
    if pools.is_empty() {
        return Vec::new();
    }
    (0..n)
        .map(|k| {
            let pool = pools[k % pools.len()];
            *pool.choose(rng).expect("non-empty pool")
        })
        .collect()
}

/// Trains a local model on a 1:1 mix of intra and inter triplets, redrawn each epoch.
/// One epoch has as many triplets as `m` has positives. Training starts from a copy of
/// `init` when given, otherwise from a fresh initialization.
pub fn train_local(
    m: &InteractionMatrix,
    sets: &LocalTripletSets,
    loss_kind: LossKind,
    cfg: &TrainConfig,
    init: Option<&RepresentationModel<f32>>,
) -> Result<(RepresentationModel<f32>, TrainReport)> {
    cfg.validate()?;
    if sets.is_empty() {
        return Err(Error::Data("no local triplets to train on".into()));
    }
    if sets.intra.is_empty() || sets.inter.is_empty() {
        log::warn!(
            "local training with {} intra and {} inter triplets; using the non-empty set only",
            sets.intra.len(),
            sets.inter.len()
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "validation"));
    let (intra, mut validation) = hold_out(&sets.intra, cfg.validation_fraction, &mut rng);
    let (inter, val_inter) = hold_out(&sets.inter, cfg.validation_fraction, &mut rng);
    validation.extend(val_inter);
    let epoch_len = m.len().max(1);

    let mut model = match init {
        Some(start) => {
            if start.user_count() != m.user_count() || start.item_count() != m.item_count() {
                return Err(Error::Shape("initial model does not match the interaction matrix".into()));
            }
            let mut copy = start.clone();
            copy.loss_kind = loss_kind;
            copy.source_kind = SourceKind::Local;
            copy
        }
        None => RepresentationModel::new(
            m.user_count(),
            m.item_count(),
            &cfg.arch,
            loss_kind,
            SourceKind::Local,
            derive_seed(cfg.seed, "init"),
        )?,
    };
    let report = fit(
        &mut model,
        cfg,
        &validation,
        |rng| {
            let mut epoch = interleave_epoch(&intra, &inter, epoch_len, rng);
            epoch.shuffle(rng);
            Ok(epoch)
        },
        |_, _, _| Ok(0),
    )?;
    Ok((model, report))
}
