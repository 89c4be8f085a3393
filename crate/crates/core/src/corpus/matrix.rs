use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};

/// Raw ID ↔ dense index mapping.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Vocabulary whose raw IDs are the decimal indices `0..n`.
    pub fn sequential(n: usize) -> Self {
        let mut v = Self::new();
        for i in 0..n {
            v.intern(&i.to_string());
        }
        v
    }

    pub fn intern(&mut self, raw: &str) -> u32 {
        if let Some(&i) = self.index.get(raw) {
            return i;
        }
        let i = self.names.len() as u32;
        self.names.push(raw.to_string());
        self.index.insert(raw.to_string(), i);
        i
    }

    pub fn get(&self, raw: &str) -> Option<u32> {
        self.index.get(raw).copied()
    }

    pub fn name(&self, i: u32) -> &str {
        &self.names[i as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// One distinct positive user-item pair.
///
/// `seq` is the 0-based line position of the (last) occurrence in the source file and
/// orders interactions that share a timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interaction {
    pub user: u32,
    pub item: u32,
    pub timestamp: Option<i64>,
    pub seq: u64,
}

/// Binary implicit-feedback matrix: `a_ui = 1` iff `(u, i)` was observed at least once.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    users: Vocab,
    items: Vocab,
    /// Sorted by (user, item), no duplicates.
    interactions: Vec<Interaction>,
    /// `interactions[offsets[u]..offsets[u + 1]]` belong to user `u`.
    offsets: Vec<usize>,
}

impl InteractionMatrix {
    /// Builds a matrix, collapsing duplicate pairs (keeping the latest timestamp and
    /// file position).
    pub fn from_interactions(
        users: Vocab,
        items: Vocab,
        mut interactions: Vec<Interaction>,
    ) -> Result<Self> {
        for it in &interactions {
            if it.user as usize >= users.len() {
                return Err(Error::OutOfRange {
                    index: it.user as usize,
                    size: users.len(),
                });
            }
            if it.item as usize >= items.len() {
                return Err(Error::OutOfRange {
                    index: it.item as usize,
                    size: items.len(),
                });
            }
        }
        interactions.sort_by_key(|it| (it.user, it.item, it.seq));
        let mut dedup: Vec<Interaction> = Vec::with_capacity(interactions.len());
        for it in interactions {
            match dedup.last_mut() {
                Some(last) if last.user == it.user && last.item == it.item => {
                    last.timestamp = last.timestamp.max(it.timestamp);
                    last.seq = last.seq.max(it.seq);
                }
                _ => dedup.push(it),
            }
        }
        let mut offsets = vec![0usize; users.len() + 1];
        for it in &dedup {
            offsets[it.user as usize + 1] += 1;
        }
        for u in 0..users.len() {
            offsets[u + 1] += offsets[u];
        }
        Ok(Self {
            users,
            items,
            interactions: dedup,
            offsets,
        })
    }

    /// Matrix over sequential vocabularies from bare index pairs, in the given order.
    pub fn from_pairs(user_count: usize, item_count: usize, pairs: &[(u32, u32)]) -> Result<Self> {
        let interactions = pairs
            .iter()
            .enumerate()
            .map(|(seq, &(user, item))| Interaction {
                user,
                item,
                timestamp: None,
                seq: seq as u64,
            })
            .collect();
        Self::from_interactions(
            Vocab::sequential(user_count),
            Vocab::sequential(item_count),
            interactions,
        )
    }

    /// Same vocabularies, different positives.
    pub fn with_interactions(&self, interactions: Vec<Interaction>) -> Result<Self> {
        Self::from_interactions(self.users.clone(), self.items.clone(), interactions)
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn item_count(&self) -> usize {
        self.items.len()
    }

    pub fn users(&self) -> &Vocab {
        &self.users
    }

    pub fn items(&self) -> &Vocab {
        &self.items
    }

    /// Number of positives.
    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn density(&self) -> f64 {
        self.len() as f64 / (self.user_count() as f64 * self.item_count() as f64)
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn positives(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.interactions.iter().map(|it| (it.user, it.item))
    }

    pub fn user_interactions(&self, user: u32) -> &[Interaction] {
        let u = user as usize;
        &self.interactions[self.offsets[u]..self.offsets[u + 1]]
    }

    /// Items of `user` in ascending order.
    pub fn user_items(&self, user: u32) -> impl ExactSizeIterator<Item = u32> + '_ {
        self.user_interactions(user).iter().map(|it| it.item)
    }

    pub fn user_degree(&self, user: u32) -> usize {
        let u = user as usize;
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn contains(&self, user: u32, item: u32) -> bool {
        if user as usize >= self.user_count() {
            return false;
        }
        self.user_interactions(user)
            .binary_search_by_key(&item, |it| it.item)
            .is_ok()
    }

    /// Per-item interaction counts.
    pub fn item_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.item_count()];
        for it in &self.interactions {
            deg[it.item as usize] += 1;
        }
        deg
    }
}

/// Column separator for interaction files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Delimiter {
    Char(char),
    /// Any run of whitespace.
    Whitespace,
}

impl std::str::FromStr for Delimiter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tab" | "\\t" | "\t" => Ok(Delimiter::Char('\t')),
            "comma" | "," => Ok(Delimiter::Char(',')),
            "whitespace" | "space" => Ok(Delimiter::Whitespace),
            "::" => Err(Error::Config("multi-character delimiters are not supported".into())),
            other => {
                let mut chars = other.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => Ok(Delimiter::Char(c)),
                    _ => Err(Error::Config(format!("unknown delimiter `{other}`"))),
                }
            }
        }
    }
}

/// Which columns of a delimited line hold which field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelimiterSpec {
    pub delimiter: Delimiter,
    pub user_col: usize,
    pub item_col: usize,
    pub rating_col: Option<usize>,
    pub timestamp_col: Option<usize>,
    pub header_lines: usize,
}

impl Default for DelimiterSpec {
    fn default() -> Self {
        Self {
            delimiter: Delimiter::Char('\t'),
            user_col: 0,
            item_col: 1,
            rating_col: None,
            timestamp_col: None,
            header_lines: 0,
        }
    }
}

impl DelimiterSpec {
    /// `user<TAB>item<TAB>rating<TAB>timestamp`, the MovieLens-100k `u.data` layout.
    pub fn movielens() -> Self {
        Self {
            rating_col: Some(2),
            timestamp_col: Some(3),
            ..Self::default()
        }
    }

    /// Parses a column list such as `user,item,rating,timestamp`; `_` skips a column.
    pub fn from_columns(delimiter: Delimiter, columns: &str, header_lines: usize) -> Result<Self> {
        let mut user = None;
        let mut item = None;
        let mut rating = None;
        let mut timestamp = None;
        for (i, name) in columns.split(',').map(str::trim).enumerate() {
            let slot = match name {
                "user" => &mut user,
                "item" => &mut item,
                "rating" => &mut rating,
                "timestamp" => &mut timestamp,
                "_" | "" => continue,
                other => return Err(Error::Config(format!("unknown column `{other}`"))),
            };
            if slot.replace(i).is_some() {
                return Err(Error::Config(format!("column `{name}` listed twice")));
            }
        }
        Ok(Self {
            delimiter,
            user_col: user.ok_or_else(|| Error::Config("columns lack `user`".into()))?,
            item_col: item.ok_or_else(|| Error::Config("columns lack `item`".into()))?,
            rating_col: rating,
            timestamp_col: timestamp,
            header_lines,
        })
    }

    fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match self.delimiter {
            Delimiter::Char(c) => line.split(c).map(str::trim).collect(),
            Delimiter::Whitespace => line.split_whitespace().collect(),
        }
    }
}

/// Reads a delimited interaction log. Every parsed pair is a positive regardless of rating.
pub fn load_interactions(path: &Path, format: &DelimiterSpec) -> Result<InteractionMatrix> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_interactions(std::io::BufReader::new(f), format).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_interactions<R: BufRead>(reader: R, format: &DelimiterSpec) -> Result<InteractionMatrix> {
    let mut users = Vocab::new();
    let mut items = Vocab::new();
    let mut interactions = Vec::new();
    let width = [
        Some(format.user_col),
        Some(format.item_col),
        format.rating_col,
        format.timestamp_col,
    ]
    .into_iter()
    .flatten()
    .max()
    .unwrap_or(0)
        + 1;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io("<input>", e))?;
        if idx < format.header_lines || line.trim().is_empty() {
            continue;
        }
        let fields = format.split(&line);
        if fields.len() < width {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected at least {width} columns, found {}", fields.len()),
            });
        }
        let (raw_user, raw_item) = (fields[format.user_col], fields[format.item_col]);
        if raw_user.is_empty() || raw_item.is_empty() {
            return Err(Error::Parse {
                line: lineno,
                message: "empty user or item id".into(),
            });
        }
        if let Some(c) = format.rating_col {
            if fields[c].parse::<f64>().map_or(true, |r| !r.is_finite()) {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("rating `{}` is not a number", fields[c]),
                });
            }
        }
        let timestamp = match format.timestamp_col {
            Some(c) => Some(parse_timestamp(fields[c]).ok_or_else(|| Error::Parse {
                line: lineno,
                message: format!("timestamp `{}` is not a number", fields[c]),
            })?),
            None => None,
        };
        interactions.push(Interaction {
            user: users.intern(raw_user),
            item: items.intern(raw_item),
            timestamp,
            seq: idx as u64,
        });
    }
    if interactions.is_empty() {
        return Err(Error::Data("interaction file contains no interactions".into()));
    }
    InteractionMatrix::from_interactions(users, items, interactions)
}

fn parse_timestamp(s: &str) -> Option<i64> {
    s.parse::<i64>().ok().or_else(|| {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(|v| v.round() as i64)
    })
}

/// Drops users with fewer than `threshold` interactions, then drops items left without
/// interactions and re-densifies both vocabularies. Single pass, no cascade.
pub fn filter_min_interactions(m: &InteractionMatrix, threshold: usize) -> Result<InteractionMatrix> {
    if threshold == 0 {
        return Ok(m.clone());
    }
    let kept_users: Vec<u32> = (0..m.user_count() as u32)
        .filter(|&u| m.user_degree(u) >= threshold)
        .collect();
    if kept_users.is_empty() {
        return Err(Error::Data(format!(
            "no user has at least {threshold} interactions"
        )));
    }
    let mut users = Vocab::new();
    let mut user_map = vec![None; m.user_count()];
    for &u in &kept_users {
        user_map[u as usize] = Some(users.intern(m.users.name(u)));
    }
    let mut item_used = vec![false; m.item_count()];
    for &u in &kept_users {
        for i in m.user_items(u) {
            item_used[i as usize] = true;
        }
    }
    let mut items = Vocab::new();
    let mut item_map = vec![None; m.item_count()];
    for (i, used) in item_used.iter().enumerate() {
        if *used {
            item_map[i] = Some(items.intern(m.items.name(i as u32)));
        }
    }
    let dropped_items = item_used.iter().filter(|u| !**u).count();
    log::info!(
        "min-interaction filter {threshold}: kept {} of {} users; dropped {dropped_items} items left without interactions (no cascade)",
        kept_users.len(),
        m.user_count()
    );
    let interactions = m
        .interactions
        .iter()
        .filter_map(|it| {
            Some(Interaction {
                user: user_map[it.user as usize]?,
                item: item_map[it.item as usize]?,
                ..*it
            })
        })
        .collect();
    InteractionMatrix::from_interactions(users, items, interactions)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, spec: &DelimiterSpec) -> Result<InteractionMatrix> {
        read_interactions(text.as_bytes(), spec)
    }

    #[test]
    fn three_line_file() {
        let m = parse("A\tx\nA\ty\nB\tx\n", &DelimiterSpec::default()).unwrap();
        assert_eq!((m.user_count(), m.item_count(), m.len()), (2, 2, 3));
        assert!(m.contains(0, 0) && m.contains(0, 1) && m.contains(1, 0));
        assert!(!m.contains(1, 1));
    }

    #[test]
    fn duplicates_collapse() {
        let m = parse("A\tx\t5\t10\nA\tx\t1\t30\nB\tx\t2\t20\n", &DelimiterSpec::movielens()).unwrap();
        assert_eq!(m.len(), 2);
        let it = m.user_interactions(0)[0];
        assert_eq!(it.timestamp, Some(30));
        assert_eq!(it.seq, 1);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse("A\tx\nB\n", &DelimiterSpec::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse("A\tx\t4\tnoon\n", &DelimiterSpec::movielens()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(
            parse("", &DelimiterSpec::default()),
            Err(Error::Data(_))
        ));
        assert!(parse("\n\n", &DelimiterSpec::default()).is_err());
    }

    #[test]
    fn header_and_column_order() {
        let spec = DelimiterSpec::from_columns(Delimiter::Char(','), "item,_,user", 1).unwrap();
        let m = parse("item,junk,user\nx,1,A\ny,2,A\n", &spec).unwrap();
        assert_eq!(m.user_count(), 1);
        assert_eq!(m.items().names(), &["x".to_string(), "y".to_string()]);
    }

    #[test]
    fn threshold_zero_is_identity() {
        let m = InteractionMatrix::from_pairs(2, 2, &[(0, 0), (1, 1)]).unwrap();
        assert_eq!(filter_min_interactions(&m, 0).unwrap(), m);
    }

    #[test]
    fn filter_keeps_heavy_users_and_redensifies_items() {
        // user degrees 2, 7, 9 over 12 items; item 11 only used by the light user.
        let mut pairs = vec![(0, 11), (0, 0)];
        pairs.extend((0..7).map(|i| (1, i)));
        pairs.extend((0..9).map(|i| (2, i)));
        let m = InteractionMatrix::from_pairs(3, 12, &pairs).unwrap();
        let f = filter_min_interactions(&m, 6).unwrap();
        assert_eq!(f.user_count(), 2);
        assert_eq!(f.item_count(), 9);
        assert_eq!(f.len(), 16);
        assert_eq!(f.users().name(0), "1");
    }

    #[test]
    fn filter_removing_everyone_fails() {
        let m = InteractionMatrix::from_pairs(2, 2, &[(0, 0), (1, 1)]).unwrap();
        assert!(filter_min_interactions(&m, 5).is_err());
    }
}
