use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::InteractionMatrix;
use crate::error::{Error, Result};

/// `(user, positive item, negative item)` training unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triplet {
    pub user: u32,
    pub pos_item: u32,
    pub neg_item: u32,
}

impl Triplet {
    pub fn new(user: u32, pos_item: u32, neg_item: u32) -> Self {
        Self {
            user,
            pos_item,
            neg_item,
        }
    }

    /// Positive observed, negative unobserved (hence distinct).
    pub fn is_legal(&self, m: &InteractionMatrix) -> bool {
        m.contains(self.user, self.pos_item)
            && !m.contains(self.user, self.neg_item)
            && (self.neg_item as usize) < m.item_count()
    }
}

/// Uniform draw among the items `user` has not interacted with, by rejection.
///
/// Returns `None` when the user interacted with every item.
pub fn draw_negative<R: Rng + ?Sized>(m: &InteractionMatrix, user: u32, rng: &mut R) -> Option<u32> {
    let n = m.item_count();
    let deg = m.user_degree(user);
    if deg >= n {
        return None;
    }
    if deg * 2 > n {
        // Dense row: index directly into the complement.
        let k = rng.gen_range(0..n - deg);
        return nth_unobserved(m, user, k);
    }
    loop {
        let cand = rng.gen_range(0..n as u32);
        if !m.contains(user, cand) {
            return Some(cand);
        }
    }
}

fn nth_unobserved(m: &InteractionMatrix, user: u32, mut k: usize) -> Option<u32> {
    let mut positives = m.user_items(user).peekable();
    for i in 0..m.item_count() as u32 {
        if positives.peek() == Some(&i) {
            positives.next();
            continue;
        }
        if k == 0 {
            return Some(i);
        }
        k -= 1;
    }
    None
}

/// Stream of global triplets: for every training positive `(u, i+)` in (user, item)
/// order, `per_positive` triplets with a uniformly drawn unobserved negative.
pub struct GlobalTripletSampler<'a> {
    train: &'a InteractionMatrix,
    universe: &'a InteractionMatrix,
    per_positive: usize,
    rng: ChaCha8Rng,
    cursor: usize,
    emitted_for_cursor: usize,
    skipped_users: Vec<u32>,
}

impl<'a> GlobalTripletSampler<'a> {
    pub fn skipped_users(&self) -> &[u32] {
        &self.skipped_users
    }
}

impl Iterator for GlobalTripletSampler<'_> {
    type Item = Triplet;

    fn next(&mut self) -> Option<Triplet> {
        let its = self.train.interactions();
        loop {
            let it = its.get(self.cursor)?;
            if self.emitted_for_cursor == self.per_positive {
                self.cursor += 1;
                self.emitted_for_cursor = 0;
                continue;
            }
            match draw_negative(self.universe, it.user, &mut self.rng) {
                Some(neg) => {
                    self.emitted_for_cursor += 1;
                    return Some(Triplet::new(it.user, it.item, neg));
                }
                None => {
                    log::warn!("user {} interacted with every item; skipped", it.user);
                    self.skipped_users.push(it.user);
                    self.cursor += self.train.user_degree(it.user);
                    self.emitted_for_cursor = 0;
                }
            }
        }
    }
}

pub fn sample_global_triplets(
    train: &InteractionMatrix,
    per_positive: usize,
    seed: u64,
) -> Result<GlobalTripletSampler<'_>> {
    sample_global_triplets_from(train, train, per_positive, seed)
}

/// Like [`sample_global_triplets`], with positives from `source` and negatives drawn among
/// the items unobserved in `universe` (a superset of `source`).
pub fn sample_global_triplets_from<'a>(
    source: &'a InteractionMatrix,
    universe: &'a InteractionMatrix,
    per_positive: usize,
    seed: u64,
) -> Result<GlobalTripletSampler<'a>> {
    if source.user_count() != universe.user_count() || source.item_count() != universe.item_count() {
        return Err(Error::Shape("source and universe matrices differ in shape".into()));
    }
    if per_positive == 0 {
        return Err(Error::InvalidArgument("per_positive must be at least 1".into()));
    }
    Ok(GlobalTripletSampler {
        train: source,
        universe,
        per_positive,
        rng: ChaCha8Rng::seed_from_u64(seed),
        cursor: 0,
        emitted_for_cursor: 0,
        skipped_users: Vec::new(),
    })
}

/// `count` distinct items `user` has not interacted with in `m`.
pub fn sample_loo_negatives(
    m: &InteractionMatrix,
    user: u32,
    count: usize,
    seed: u64,
) -> Result<Vec<u32>> {
    if user as usize >= m.user_count() {
        return Err(Error::OutOfRange {
            index: user as usize,
            size: m.user_count(),
        });
    }
    let mut positives = m.user_items(user).peekable();
    let mut pool = Vec::with_capacity(m.item_count() - m.user_degree(user));
    for i in 0..m.item_count() as u32 {
        if positives.peek() == Some(&i) {
            positives.next();
        } else {
            pool.push(i);
        }
    }
    if pool.len() < count {
        return Err(Error::Data(format!(
            "user {user} has {} unobserved items, {count} requested",
            pool.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, pool.len(), count);
    Ok(picks.into_iter().map(|k| pool[k]).collect())
}
