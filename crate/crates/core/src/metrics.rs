//! Accuracy metrics over ranked lists and the top-N, leave-one-out and candidate-coverage
//! evaluation drivers.
//!
//! `q` is a ranked recommendation list (rank 1 first, items distinct) and `g` the user's
//! held-out ground truth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clusterindex::ClusterIndex;
use crate::corpus::{sample_loo_negatives, InteractionMatrix, TestSet};
use crate::error::{Error, Result};
use crate::recommend::{rank_fixed_candidates, PairScorer, RecommendConfig, Recommender, ScoreKind};
use crate::seed::derive_seed;
use crate::tensornet::Matrix;

fn hit_ranks<'a>(q: &'a [u32], g: &'a [u32]) -> impl Iterator<Item = usize> + 'a {
    q.iter()
        .enumerate()
        .filter(|(_, i)| g.contains(i))
        .map(|(k, _)| k + 1)
}

pub fn hits(q: &[u32], g: &[u32]) -> usize {
    hit_ranks(q, g).count()
}

/// `|q ∩ g| / |g|`; `None` for empty ground truth.
pub fn recall(q: &[u32], g: &[u32]) -> Option<f64> {
    if g.is_empty() {
        return None;
    }
    Some(hits(q, g) as f64 / g.len() as f64)
}

/// `|q ∩ g| / |q|`; zero for an empty list.
pub fn precision(q: &[u32], g: &[u32]) -> f64 {
    if q.is_empty() {
        log::warn!("precision of an empty recommendation list taken as 0");
        return 0.0;
    }
    hits(q, g) as f64 / q.len() as f64
}

pub fn hit_rate(q: &[u32], g: &[u32]) -> f64 {
    if hit_ranks(q, g).next().is_some() {
        1.0
    } else {
        0.0
    }
}

/// Sum of reciprocal ranks of the hits.
pub fn arhr(q: &[u32], g: &[u32]) -> f64 {
    hit_ranks(q, g).map(|r| 1.0 / r as f64).sum()
}

/// Sum of `1 / log2(rank + 1)` over the hits (no ideal-DCG normalization).
pub fn ndcg_hits(q: &[u32], g: &[u32]) -> f64 {
    hit_ranks(q, g).map(|r| 1.0 / ((r + 1) as f64).log2()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserMetrics {
    pub user: u32,
    pub recall: f64,
    pub precision: f64,
    pub hit_rate: f64,
    pub arhr: f64,
    pub ndcg: f64,
}

impl UserMetrics {
    pub fn of(user: u32, q: &[u32], g: &[u32]) -> Option<Self> {
        Some(Self {
            user,
            recall: recall(q, g)?,
            precision: precision(q, g),
            hit_rate: hit_rate(q, g),
            arhr: arhr(q, g),
            ndcg: ndcg_hits(q, g),
        })
    }
}

/// Mean metrics of one `(representation, K, N)` cell plus the per-user values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub tag: String,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub recall: f64,
    pub precision: f64,
    pub hit_rate: f64,
    pub arhr: f64,
    pub ndcg: f64,
    pub users: usize,
    /// Users with empty ground truth.
    pub skipped_users: usize,
    /// Mean number of scored candidates per user.
    pub mean_candidates: f64,
    #[serde(skip)]
    pub per_user: Vec<UserMetrics>,
}

impl EvalResult {
    pub const TSV_HEADER: &'static str = "tag\tK\tN\tM\td\tusers\trecall\tprecision\thit_rate\tarhr\tndcg";

    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            self.tag, self.k, self.n, self.m, self.d, self.users, self.recall, self.precision, self.hit_rate, self.arhr, self.ndcg
        )
    }

    fn from_users(tag: &str, k: usize, n: usize, m: usize, d: usize, per_user: Vec<UserMetrics>, skipped: usize, candidates: f64) -> Self {
        let count = per_user.len().max(1) as f64;
        // Ordered sums keep results independent of the thread count.
        let mean = |f: fn(&UserMetrics) -> f64| per_user.iter().map(f).sum::<f64>() / count;
        Self {
            tag: tag.to_string(),
            k,
            n,
            m,
            d,
            recall: mean(|u| u.recall),
            precision: mean(|u| u.precision),
            hit_rate: mean(|u| u.hit_rate),
            arhr: mean(|u| u.arhr),
            ndcg: mean(|u| u.ndcg),
            users: per_user.len(),
            skipped_users: skipped,
            mean_candidates: candidates,
            per_user,
        }
    }
}

/// Top-N evaluation at fixed `k` for every `n` in `ns`. Each user's list is computed once
/// at the largest `n`; shorter lists are its prefixes.
pub fn evaluate_topn(
    test: &TestSet,
    rec: &Recommender<'_>,
    k: usize,
    ns: &[usize],
    tag: &str,
) -> Result<Vec<EvalResult>> {
    let max_n = *ns
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidArgument("empty N sweep".into()))?;
    let cfg = RecommendConfig {
        k,
        n: max_n,
        scorer: ScoreKind::for_loss(rec.scorer.loss_kind()),
        exclude_train_positives: rec.train.is_some(),
    };
    let users: Vec<(u32, &Vec<u32>)> = test.iter().map(|(&u, g)| (u, g)).collect();
    let skipped = users.iter().filter(|(_, g)| g.is_empty()).count();
    let lists = users
        .par_iter()
        .filter(|(_, g)| !g.is_empty())
        .map(|&(u, g)| rec.recommend(u, &cfg).map(|l| (l, g)))
        .collect::<Result<Vec<_>>>()?;
    if skipped > 0 {
        log::info!("{tag}: {skipped} users with empty ground truth skipped");
    }
    let mean_candidates =
        lists.iter().map(|(l, _)| l.candidate_count as f64).sum::<f64>() / lists.len().max(1) as f64;
    let (m, d) = (rec.index.cluster_count(), rec.index.dim());
    Ok(ns
        .iter()
        .map(|&n| {
            let per_user = lists
                .iter()
                .filter_map(|(l, g)| {
                    let q: Vec<u32> = l.items.iter().take(n).map(|&(i, _)| i).collect();
                    UserMetrics::of(l.user, &q, g)
                })
                .collect();
            EvalResult::from_users(tag, k, n, m, d, per_user, skipped, mean_candidates)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooResult {
    pub tag: String,
    pub hr: f64,
    pub ndcg: f64,
    pub users: usize,
    pub top_k: usize,
    pub negatives: usize,
    /// 1-based rank of each user's held-out item among its candidates.
    #[serde(skip)]
    pub ranks: Vec<(u32, usize)>,
}

/// Ranks each user's held-out item against `negatives` items the user never interacted
/// with in `full`, and reports HR@`top_k` and NDCG@`top_k`.
pub fn evaluate_loo(
    test: &TestSet,
    full: &InteractionMatrix,
    scorer: &dyn PairScorer,
    negatives: usize,
    top_k: usize,
    seed: u64,
    tag: &str,
) -> Result<LooResult> {
    let users: Vec<(u32, u32)> = test
        .iter()
        .filter_map(|(&u, g)| g.first().map(|&i| (u, i)))
        .collect();
    let kind = ScoreKind::for_loss(scorer.loss_kind());
    let ranks = users
        .par_iter()
        .map(|&(u, pos)| {
            let mut candidates = sample_loo_negatives(full, u, negatives, derive_seed(seed, &format!("loo/{u}")))?;
            candidates.push(pos);
            let ranked = rank_fixed_candidates(u, &candidates, scorer, kind)?;
            let rank = ranked.iter().position(|&(i, _)| i == pos).expect("positive is a candidate") + 1;
            Ok((u, rank))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = ranks.len().max(1) as f64;
    let hr = ranks.iter().filter(|&&(_, r)| r <= top_k).count() as f64 / n;
    let ndcg = ranks
        .iter()
        .filter(|&&(_, r)| r <= top_k)
        .map(|&(_, r)| 1.0 / ((r + 1) as f64).log2())
        .sum::<f64>()
        / n;
    Ok(LooResult {
        tag: tag.to_string(),
        hr,
        ndcg,
        users: ranks.len(),
        top_k,
        negatives,
        ranks,
    })
}

/// Recall of top-`n` lists restricted to the `k` nearest clusters, for each `k` in `ks`.
pub fn coverage_recall(
    index: &ClusterIndex,
    index_users: &Matrix<f32>,
    scorer: &dyn PairScorer,
    train: &InteractionMatrix,
    test: &TestSet,
    ks: &[usize],
    n: usize,
) -> Result<Vec<(usize, f64)>> {
    let rec = Recommender::new(index, index_users, scorer, Some(train))?;
    ks.iter()
        .map(|&k| {
            let r = evaluate_topn(test, &rec, k, &[n], "coverage")?;
            Ok((k, r[0].recall))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_examples() {
        let (a, b, c, d) = (0u32, 1, 2, 3);
        assert_eq!(recall(&[a, b, c], &[b]), Some(1.0));
        assert_eq!(recall(&[a], &[b]), Some(0.0));
        assert_eq!(recall(&[a, b], &[a, b, c, d]), Some(0.5));
        assert_eq!(recall(&[a], &[]), None);
        assert_eq!(precision(&[a, b, c], &[b]), 1.0 / 3.0);
        assert_eq!(precision(&[a, b], &[a, b, c]), 1.0);
        let q: Vec<u32> = (0..15).collect();
        assert_eq!(precision(&q, &[3, 7, 14, 99]), 0.2);
        assert_eq!(precision(&[], &[a]), 0.0);
        assert_eq!(hit_rate(&[a, b], &[b]), 1.0);
        assert_eq!(hit_rate(&[a, b], &[c]), 0.0);
        assert_eq!(hit_rate(&[a, b], &[a, b]), 1.0);
        assert_eq!(arhr(&[a, b], &[b]), 0.5);
        assert_eq!(arhr(&[a, b], &[a, b]), 1.5);
        assert_eq!(arhr(&[a, b], &[c]), 0.0);
        assert_eq!(ndcg_hits(&[a, b], &[a]), 1.0);
        assert!((ndcg_hits(&[a, b], &[b]) - 0.630_929_753_571_457_4).abs() < 1e-15);
        assert_eq!(ndcg_hits(&[a, b], &[c]), 0.0);
    }

    #[test]
    fn tsv_row_has_header_width() {
        let r = EvalResult::from_users("AD", 2, 15, 20, 64, vec![], 0, 0.0);
        assert_eq!(r.tsv_row().split('\t').count(), EvalResult::TSV_HEADER.split('\t').count());
    }
}
