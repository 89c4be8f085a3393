use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Interaction, InteractionMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitProtocol {
    /// Half of all positives, drawn uniformly, go to test.
    RandomHalf,
    /// `n_test` random positives of every user with more than `n_test` go to test.
    PerUserHoldout { n_test: usize },
    /// The latest positive of every user with at least two goes to test.
    LeaveOneOut,
}

impl std::fmt::Display for SplitProtocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SplitProtocol::RandomHalf => write!(f, "random-half"),
            SplitProtocol::PerUserHoldout { n_test } => write!(f, "per-user-holdout({n_test})"),
            SplitProtocol::LeaveOneOut => write!(f, "leave-one-out"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub protocol: SplitProtocol,
    pub seed: u64,
    pub min_interactions: usize,
}

/// Held-out items per user; only users that have at least one test item appear.
pub type TestSet = BTreeMap<u32, Vec<u32>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: InteractionMatrix,
    pub test: TestSet,
    /// Users with too few interactions for the protocol; all their positives stay in train.
    pub excluded_users: Vec<u32>,
}

/// Partitions the positives of `m` into train and test. Train keeps the vocabularies of
/// `m`. The `min_interactions` filter is applied separately by the caller.
pub fn split(m: &InteractionMatrix, spec: &SplitSpec) -> Result<Split> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train: Vec<Interaction> = Vec::with_capacity(m.len());
    let mut test: TestSet = BTreeMap::new();
    let mut excluded = Vec::new();

    match spec.protocol {
        SplitProtocol::RandomHalf => {
            let mut all = m.interactions().to_vec();
            all.shuffle(&mut rng);
            let n_test = all.len() / 2;
            for it in all.drain(..n_test) {
                test.entry(it.user).or_default().push(it.item);
            }
            train = all;
        }
        SplitProtocol::PerUserHoldout { n_test } => {
            if n_test == 0 {
                return Err(Error::InvalidArgument("per-user holdout needs n_test >= 1".into()));
            }
            for u in 0..m.user_count() as u32 {
                let mut its = m.user_interactions(u).to_vec();
                if its.len() <= n_test {
                    excluded.push(u);
                    train.extend(its);
                    continue;
                }
                its.shuffle(&mut rng);
                test.insert(u, its[..n_test].iter().map(|it| it.item).collect());
                train.extend_from_slice(&its[n_test..]);
            }
        }
        SplitProtocol::LeaveOneOut => {
            for u in 0..m.user_count() as u32 {
                let its = m.user_interactions(u);
                if its.len() < 2 {
                    excluded.push(u);
                    train.extend_from_slice(its);
                    continue;
                }
                // Latest timestamp; file position breaks ties and stands in when absent.
                let latest = its
                    .iter()
                    .max_by_key(|it| (it.timestamp, it.seq))
                    .expect("non-empty");
                test.insert(u, vec![latest.item]);
                train.extend(its.iter().filter(|it| it.item != latest.item));
            }
        }
    }

    if !excluded.is_empty() {
        log::warn!(
            "{} split: {} users lack enough interactions and have no test items",
            spec.protocol,
            excluded.len()
        );
    }
    for items in test.values_mut() {
        items.sort_unstable();
    }
    Ok(Split {
        train: m.with_interactions(train)?,
        test,
        excluded_users: excluded,
    })
}

impl Split {
    /// Text manifest: one `user_index<TAB>item_index<TAB>fold` line per positive, preceded
    /// by `# excluded` comment lines.
    pub fn write_manifest<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<split manifest>", e);
        for u in &self.excluded_users {
            writeln!(w, "# excluded\t{u}").map_err(io)?;
        }
        let mut rows: Vec<(u32, u32, &str)> = self
            .train
            .positives()
            .map(|(u, i)| (u, i, "train"))
            .collect();
        for (&u, items) in &self.test {
            rows.extend(items.iter().map(|&i| (u, i, "test")));
        }
        rows.sort_unstable();
        for (u, i, fold) in rows {
            writeln!(w, "{u}\t{i}\t{fold}").map_err(io)?;
        }
        Ok(())
    }

    /// Restores a split of `base` from its manifest.
    pub fn read_manifest<R: BufRead>(base: &InteractionMatrix, r: R) -> Result<Self> {
        let mut train = Vec::new();
        let mut test: TestSet = BTreeMap::new();
        let mut excluded = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<split manifest>", e))?;
            let bad = |message: String| Error::Parse {
                line: idx + 1,
                message,
            };
            if let Some(rest) = line.strip_prefix("# excluded\t") {
                excluded.push(rest.parse().map_err(|_| bad(format!("bad user `{rest}`")))?);
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(bad(format!("expected 3 fields in `{line}`")));
            }
            let u: u32 = f[0].parse().map_err(|_| bad(format!("bad user `{}`", f[0])))?;
            let i: u32 = f[1].parse().map_err(|_| bad(format!("bad item `{}`", f[1])))?;
            if !base.contains(u, i) {
                return Err(bad(format!("({u}, {i}) is not a positive of the corpus")));
            }
            let it = *base
                .user_interactions(u)
                .iter()
                .find(|it| it.item == i)
                .expect("checked above");
            match f[2] {
                "train" => train.push(it),
                "test" => test.entry(u).or_default().push(i),
                other => return Err(bad(format!("unknown fold `{other}`"))),
            }
        }
        for items in test.values_mut() {
            items.sort_unstable();
        }
        Ok(Self {
            train: base.with_interactions(train)?,
            test,
            excluded_users: excluded,
        })
    }

    pub fn test_len(&self) -> usize {
        self.test.values().map(Vec::len).sum()
    }
}
