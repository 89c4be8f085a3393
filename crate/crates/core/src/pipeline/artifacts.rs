use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::clusterindex::LocalTripletSets;
use crate::corpus::{Triplet, Vocab};
use crate::error::{Error, Result};

/// `kind<TAB>user<TAB>pos<TAB>neg` per triplet, `kind` being `intra` or `inter`, after a
/// `# skipped_users<TAB>n` line.
pub fn write_triplet_sets(path: &Path, sets: &LocalTripletSets) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let io = |e| Error::io(path, e);
    writeln!(w, "# skipped_users\t{}", sets.skipped_users).map_err(io)?;
    for (kind, list) in [("intra", &sets.intra), ("inter", &sets.inter)] {
        for t in list {
            writeln!(w, "{kind}\t{}\t{}\t{}", t.user, t.pos_item, t.neg_item).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_triplet_sets(path: &Path) -> Result<LocalTripletSets> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut sets = LocalTripletSets::default();
    for (idx, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let bad = |message: String| Error::Parse { line: idx + 1, message };
        if let Some(n) = line.strip_prefix("# skipped_users\t") {
            sets.skipped_users = n.parse().map_err(|_| bad(format!("bad count `{n}`")))?;
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(bad(format!("expected 4 fields in `{line}`")));
        }
        let num = |s: &str| s.parse::<u32>().map_err(|_| bad(format!("bad index `{s}`")));
        let t = Triplet::new(num(f[1])?, num(f[2])?, num(f[3])?);
        match f[0] {
            "intra" => sets.intra.push(t),
            "inter" => sets.inter.push(t),
            other => return Err(bad(format!("unknown triplet kind `{other}`"))),
        }
    }
    Ok(sets)
}

/// One raw id per line, in index order.
pub fn write_vocab(path: &Path, vocab: &Vocab) -> Result<()> {
    let mut text = String::new();
    for name in vocab.names() {
        text.push_str(name);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplet_sets_round_trip() {
        let sets = LocalTripletSets {
            intra: vec![Triplet::new(0, 1, 2), Triplet::new(3, 4, 5)],
            inter: vec![Triplet::new(6, 7, 8)],
            skipped_users: 4,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.tsv");
        write_triplet_sets(&p, &sets).unwrap();
        assert_eq!(read_triplet_sets(&p).unwrap(), sets);
        std::fs::write(&p, "intra\t1\t2\n").unwrap();
        assert!(matches!(read_triplet_sets(&p), Err(Error::Parse { line: 1, .. })));
    }
}
