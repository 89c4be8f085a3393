//! Coarse-to-fine top-N retrieval: nearest clusters in the indexing space, the union of
//! their inverted lists as candidates, then attentive re-ranking.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clusterindex::ClusterIndex;
use crate::corpus::InteractionMatrix;
use crate::error::{Error, Result};
use crate::fusion::AttentionModel;
use crate::tensornet::{dot, squared_distance, Matrix};
use crate::towers::{LossKind, RepresentationModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    /// Higher dot product is better.
    Dot,
    /// Scores are negated Euclidean distances.
    Euclidean,
}

impl ScoreKind {
    pub fn for_loss(kind: LossKind) -> Self {
        match kind {
            LossKind::Product => ScoreKind::Dot,
            LossKind::Distance => ScoreKind::Euclidean,
        }
    }

    pub fn score(self, user: &[f64], item: &[f64]) -> f64 {
        match self {
            ScoreKind::Dot => dot(user, item),
            ScoreKind::Euclidean => -squared_distance(user, item).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecommendConfig {
    /// Candidate clusters searched.
    pub k: usize,
    /// Length of the returned list.
    pub n: usize,
    pub scorer: ScoreKind,
    pub exclude_train_positives: bool,
}

impl RecommendConfig {
    pub fn new(k: usize, n: usize, loss_kind: LossKind) -> Self {
        Self {
            k,
            n,
            scorer: ScoreKind::for_loss(loss_kind),
            exclude_train_positives: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationList {
    pub user: u32,
    /// `(item, score)`, best first.
    pub items: Vec<(u32, f64)>,
    /// Items scored to produce the list.
    pub candidate_count: usize,
}

impl RecommendationList {
    pub fn item_ids(&self) -> Vec<u32> {
        self.items.iter().map(|&(i, _)| i).collect()
    }
}

/// Scores `(user, item)` pairs; implemented by attention models and single spaces.
pub trait PairScorer: Sync {
    fn loss_kind(&self) -> LossKind;
    fn user_count(&self) -> usize;
    fn item_count(&self) -> usize;
    /// One score per candidate, higher is better.
    fn score(&self, user: u32, candidates: &[u32], kind: ScoreKind) -> Result<Vec<f64>>;
}

impl PairScorer for AttentionModel {
    fn loss_kind(&self) -> LossKind {
        self.loss_kind
    }

    fn user_count(&self) -> usize {
        AttentionModel::user_count(self)
    }

    fn item_count(&self) -> usize {
        AttentionModel::item_count(self)
    }

    fn score(&self, user: u32, candidates: &[u32], kind: ScoreKind) -> Result<Vec<f64>> {
        let ctx = self.user_context(user)?;
        let d = self.dim();
        let mut w = vec![0.0; self.channel_count()];
        let mut ub = vec![0.0; d];
        let mut ib = vec![0.0; d];
        candidates
            .iter()
            .map(|&i| {
                if i as usize >= self.item_count() {
                    return Err(Error::OutOfRange { index: i as usize, size: self.item_count() });
                }
                self.blend_pair_into(&ctx, i, &mut w, &mut ub, &mut ib);
                Ok(kind.score(&ub, &ib))
            })
            .collect()
    }
}

/// One frozen representation space with precomputed user and item vectors.
#[derive(Debug, Clone)]
pub struct SingleSpace {
    pub tag: String,
    pub loss_kind: LossKind,
    pub users: Matrix<f32>,
    pub items: Matrix<f32>,
}

impl SingleSpace {
    pub fn new(model: &RepresentationModel<f32>) -> Self {
        Self {
            tag: model.tag(),
            loss_kind: model.loss_kind,
            users: model.user_embeddings(),
            items: model.item_embeddings(),
        }
    }
}

impl PairScorer for SingleSpace {
    fn loss_kind(&self) -> LossKind {
        self.loss_kind
    }

    fn user_count(&self) -> usize {
        self.users.rows()
    }

    fn item_count(&self) -> usize {
        self.items.rows()
    }

    fn score(&self, user: u32, candidates: &[u32], kind: ScoreKind) -> Result<Vec<f64>> {
        if user as usize >= self.users.rows() {
            return Err(Error::OutOfRange { index: user as usize, size: self.users.rows() });
        }
        let u = self.users.row(user as usize);
        candidates
            .iter()
            .map(|&i| {
                if i as usize >= self.items.rows() {
                    return Err(Error::OutOfRange { index: i as usize, size: self.items.rows() });
                }
                let v = self.items.row(i as usize);
                Ok(match kind {
                    ScoreKind::Dot => dot(u, v),
                    ScoreKind::Euclidean => -squared_distance(u, v).sqrt(),
                })
            })
            .collect()
    }
}

/// The frozen pieces Algorithm 1 runs over.
pub struct Recommender<'a> {
    pub index: &'a ClusterIndex,
    /// User vectors in the space the index was built in.
    pub index_users: &'a Matrix<f32>,
    pub scorer: &'a dyn PairScorer,
    /// Training positives, excluded from candidates when configured.
    pub train: Option<&'a InteractionMatrix>,
}

impl<'a> Recommender<'a> {
    pub fn new(
        index: &'a ClusterIndex,
        index_users: &'a Matrix<f32>,
        scorer: &'a dyn PairScorer,
        train: Option<&'a InteractionMatrix>,
    ) -> Result<Self> {
        if index.item_count() != scorer.item_count() {
            return Err(Error::Shape(format!(
                "index covers {} items, scorer {}",
                index.item_count(),
                scorer.item_count()
            )));
        }
        if index_users.rows() != scorer.user_count() || index_users.cols() != index.dim() {
            return Err(Error::Shape("indexing-space user table does not match".into()));
        }
        Ok(Self {
            index,
            index_users,
            scorer,
            train,
        })
    }

    fn check(&self, cfg: &RecommendConfig) -> Result<()> {
        if cfg.n == 0 {
            return Err(Error::InvalidArgument("N must be at least 1".into()));
        }
        if cfg.scorer != ScoreKind::for_loss(self.scorer.loss_kind()) {
            return Err(Error::InvalidArgument(format!(
                "scorer {:?} does not match a {} model",
                cfg.scorer,
                self.scorer.loss_kind()
            )));
        }
        if cfg.exclude_train_positives && self.train.is_none() {
            return Err(Error::InvalidArgument("excluding training positives needs the training matrix".into()));
        }
        Ok(())
    }

    /// Candidate items for `user` under `cfg`, ascending.
    pub fn candidates(&self, user: u32, cfg: &RecommendConfig) -> Result<Vec<u32>> {
        if user as usize >= self.index_users.rows() {
            return Err(Error::OutOfRange { index: user as usize, size: self.index_users.rows() });
        }
        let mut items = self.index.candidates(self.index_users.row(user as usize), cfg.k)?;
        if cfg.exclude_train_positives {
            let train = self.train.expect("checked");
            items.retain(|&i| !train.contains(user, i));
        }
        Ok(items)
    }

    pub fn recommend(&self, user: u32, cfg: &RecommendConfig) -> Result<RecommendationList> {
        self.check(cfg)?;
        let candidates = self.candidates(user, cfg)?;
        if candidates.is_empty() {
            log::warn!("user {user}: no candidates in the {} nearest clusters", cfg.k);
        }
        let scores = self.scorer.score(user, &candidates, cfg.scorer)?;
        let mut ranked: Vec<(u32, f64)> = candidates.iter().copied().zip(scores).collect();
        sort_ranked(&mut ranked);
        ranked.truncate(cfg.n);
        Ok(RecommendationList {
            user,
            items: ranked,
            candidate_count: candidates.len(),
        })
    }

    /// Lists for many users, computed in parallel; output order follows `users`.
    pub fn recommend_all(&self, users: &[u32], cfg: &RecommendConfig) -> Result<Vec<RecommendationList>> {
        users.par_iter().map(|&u| self.recommend(u, cfg)).collect()
    }
}

/// Best score first, lower item id first among equal scores.
pub fn sort_ranked(ranked: &mut [(u32, f64)]) {
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

/// Scores exactly `candidates` (duplicates kept) and sorts them.
pub fn rank_fixed_candidates(
    user: u32,
    candidates: &[u32],
    scorer: &dyn PairScorer,
    kind: ScoreKind,
) -> Result<Vec<(u32, f64)>> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidates to rank".into()));
    }
    let scores = scorer.score(user, candidates, kind)?;
    let mut ranked: Vec<(u32, f64)> = candidates.iter().copied().zip(scores).collect();
    sort_ranked(&mut ranked);
    Ok(ranked)
}

/// Writes `user<TAB>rank<TAB>item<TAB>score` lines, ranks from 1, using the supplied
/// external names.
pub fn write_recommendations<W: Write>(
    mut w: W,
    lists: &[RecommendationList],
    user_name: impl Fn(u32) -> String,
    item_name: impl Fn(u32) -> String,
) -> Result<()> {
    let io = |e| Error::io("<recommendations>", e);
    for list in lists {
        let u = user_name(list.user);
        for (rank, &(item, score)) in list.items.iter().enumerate() {
            writeln!(w, "{u}\t{}\t{}\t{score:.6}", rank + 1, item_name(item)).map_err(io)?;
        }
    }
    Ok(())
}
