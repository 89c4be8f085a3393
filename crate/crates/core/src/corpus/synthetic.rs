//! Seeded interaction logs with planted taste groups, for tests and benchmarks.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Interaction, InteractionMatrix, Vocab};
use crate::error::{Error, Result};

/// Shape of a planted-group log. Items are split round-robin into `groups`; every user
/// belongs to one group and draws `in_group` of its interactions from that group and the
/// rest from all items, with Zipf-like item popularity of exponent `popularity_skew`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub users: usize,
    pub items: usize,
    pub groups: usize,
    pub min_degree: usize,
    pub max_degree: usize,
    pub in_group: f64,
    pub popularity_skew: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            users: 200,
            items: 300,
            groups: 6,
            min_degree: 20,
            max_degree: 40,
            in_group: 0.85,
            popularity_skew: 0.6,
            seed: 0,
        }
    }
}

/// Cumulative weights for inverse-CDF draws.
struct Sampler {
    cumulative: Vec<f64>,
}

impl Sampler {
    fn new(weights: impl Iterator<Item = f64>) -> Self {
        let mut acc = 0.0;
        let cumulative = weights
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Self { cumulative }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty");
        let x = rng.gen::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= x).min(self.cumulative.len() - 1)
    }
}

impl SyntheticSpec {
    fn check(&self) -> Result<()> {
        if self.users == 0 || self.items == 0 || self.groups == 0 || self.groups > self.items {
            return Err(Error::InvalidArgument("synthetic log needs users, items and 1..=items groups".into()));
        }
        if self.min_degree == 0 || self.min_degree > self.max_degree || self.max_degree > self.items {
            return Err(Error::InvalidArgument(format!(
                "degree range {}..={} does not fit {} items",
                self.min_degree, self.max_degree, self.items
            )));
        }
        if !(0.0..=1.0).contains(&self.in_group) {
            return Err(Error::InvalidArgument("in_group must be a probability".into()));
        }
        Ok(())
    }

    /// `(user, item, timestamp)` triples; timestamps increase per user.
    pub fn triples(&self) -> Result<Vec<(u32, u32, i64)>> {
        self.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let weight = |i: usize| 1.0 / ((i / self.groups) as f64 + 1.0).powf(self.popularity_skew);
        let everything = Sampler::new((0..self.items).map(weight));
        let per_group: Vec<(Vec<usize>, Sampler)> = (0..self.groups)
            .map(|g| {
                let members: Vec<usize> = (g..self.items).step_by(self.groups).collect();
                let s = Sampler::new(members.iter().map(|&i| weight(i)));
                (members, s)
            })
            .collect();
        let mut out = Vec::new();
        for u in 0..self.users {
            let (members, group) = &per_group[u % self.groups];
            let degree = rng.gen_range(self.min_degree..=self.max_degree).min(self.items);
            let mut seen = BTreeSet::new();
            let mut t = 0i64;
            let mut attempts = 0usize;
            while seen.len() < degree && attempts < degree * 200 {
                attempts += 1;
                let item = if rng.gen_bool(self.in_group) {
                    members[group.draw(&mut rng)]
                } else {
                    everything.draw(&mut rng)
                };
                if seen.insert(item) {
                    t += rng.gen_range(1..1000);
                    out.push((u as u32, item as u32, t));
                }
            }
        }
        Ok(out)
    }

    pub fn matrix(&self) -> Result<InteractionMatrix> {
        let interactions = self
            .triples()?
            .into_iter()
            .enumerate()
            .map(|(seq, (user, item, ts))| Interaction {
                user,
                item,
                timestamp: Some(ts),
                seq: seq as u64,
            })
            .collect();
        InteractionMatrix::from_interactions(Vocab::sequential(self.users), Vocab::sequential(self.items), interactions)
    }

    /// Writes `user<TAB>item<TAB>1<TAB>timestamp` lines with 1-based raw ids.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let mut text = Vec::new();
        for (u, i, t) in self.triples()? {
            writeln!(text, "{}\t{}\t1\t{t}", u + 1, i + 1).expect("write to vec");
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
