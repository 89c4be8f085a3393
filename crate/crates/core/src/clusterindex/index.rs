use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::kmeans::{kmeans, mixed_squared_distance, nearest, KMeansConfig};
use crate::error::{Error, Result};
use crate::tensornet::{squared_distance, Matrix, Scalar};
use crate::towers::RepresentationModel;

const MAGIC: &str = "CIDX 1";

/// Item clusters in one representation space with their inverted lists.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterIndex {
    pub centroids: Matrix<f32>,
    pub inverted_lists: Vec<Vec<u32>>,
    /// Cluster of every item.
    pub assignments: Vec<u32>,
    /// Tag of the model whose item space was clustered, e.g. `GD`.
    pub space_tag: String,
    pub seed: u64,
}

impl ClusterIndex {
    /// Builds lists from `assignments`; items are listed in ascending order.
    pub fn from_assignments(
        centroids: Matrix<f32>,
        assignments: Vec<u32>,
        space_tag: impl Into<String>,
        seed: u64,
    ) -> Result<Self> {
        let m = centroids.rows();
        let mut lists = vec![Vec::new(); m];
        for (item, &c) in assignments.iter().enumerate() {
            lists
                .get_mut(c as usize)
                .ok_or(Error::OutOfRange { index: c as usize, size: m })?
                .push(item as u32);
        }
        Ok(Self {
            centroids,
            inverted_lists: lists,
            assignments,
            space_tag: space_tag.into(),
            seed,
        })
    }

    pub fn cluster_count(&self) -> usize {
        self.centroids.rows()
    }

    pub fn dim(&self) -> usize {
        self.centroids.cols()
    }

    pub fn item_count(&self) -> usize {
        self.assignments.len()
    }

    pub fn cluster_of(&self, item: u32) -> usize {
        self.assignments[item as usize] as usize
    }

    pub fn centroid(&self, j: usize) -> &[f32] {
        self.centroids.row(j)
    }

    /// The `k` clusters nearest to `query` by Euclidean distance, nearest first; ties go
    /// to the lower cluster id.
    pub fn top_k_clusters<T: Scalar>(&self, query: &[T], k: usize) -> Result<Vec<usize>> {
        let m = self.cluster_count();
        if k == 0 || k > m {
            return Err(Error::InvalidArgument(format!("K must be in 1..={m}, got {k}")));
        }
        if query.len() != self.dim() {
            return Err(Error::Shape(format!(
                "query has {} dimensions, index has {}",
                query.len(),
                self.dim()
            )));
        }
        let mut order: Vec<(f64, usize)> = self
            .centroids
            .iter_rows()
            .enumerate()
            .map(|(j, c)| (mixed_squared_distance(query, c), j))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(order.into_iter().take(k).map(|(_, j)| j).collect())
    }

    /// Union of the inverted lists of `clusters`, ascending.
    pub fn gather(&self, clusters: &[usize]) -> Vec<u32> {
        let mut items: Vec<u32> = clusters
            .iter()
            .flat_map(|&j| self.inverted_lists[j].iter().copied())
            .collect();
        items.sort_unstable();
        items.dedup();
        items
    }

    /// Items of the `k` clusters nearest to `query`, ascending.
    pub fn candidates<T: Scalar>(&self, query: &[T], k: usize) -> Result<Vec<u32>> {
        Ok(self.gather(&self.top_k_clusters(query, k)?))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<cluster index>", e);
        writeln!(w, "{MAGIC}").map_err(io)?;
        writeln!(w, "clusters {}", self.cluster_count()).map_err(io)?;
        writeln!(w, "dim {}", self.dim()).map_err(io)?;
        writeln!(w, "items {}", self.item_count()).map_err(io)?;
        writeln!(w, "space_tag {}", self.space_tag).map_err(io)?;
        writeln!(w, "seed {}", self.seed).map_err(io)?;
        writeln!(w, "data").map_err(io)?;
        let mut buf = Vec::with_capacity(4 * (self.centroids.as_slice().len() + self.item_count() + self.cluster_count()));
        for v in self.centroids.as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for list in &self.inverted_lists {
            buf.extend_from_slice(&(list.len() as u32).to_le_bytes());
            for i in list {
                buf.extend_from_slice(&i.to_le_bytes());
            }
        }
        w.write_all(&buf).map_err(io)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut header = Vec::new();
        loop {
            let mut line = String::new();
            let n = r.read_line(&mut line).map_err(|e| Error::io("<cluster index>", e))?;
            if n == 0 {
                return Err(Error::Format("cluster index header ends before `data`".into()));
            }
            let line = line.trim_end_matches('\n').to_string();
            if line == "data" {
                break;
            }
            header.push(line);
        }
        if header.first().map(String::as_str) != Some(MAGIC) {
            return Err(Error::Format(format!("not a cluster index (expected `{MAGIC}`)")));
        }
        let field = |key: &str| -> Result<&str> {
            header
                .iter()
                .find_map(|l| l.strip_prefix(key).and_then(|rest| rest.strip_prefix(' ')))
                .ok_or_else(|| Error::Format(format!("cluster index lacks `{key}`")))
        };
        let num = |key: &str| -> Result<u64> {
            field(key)?
                .parse()
                .map_err(|e| Error::Format(format!("bad `{key}`: {e}")))
        };
        let (m, d, n) = (num("clusters")? as usize, num("dim")? as usize, num("items")? as usize);
        let space_tag = field("space_tag")?.to_string();
        let seed = num("seed")?;

        let mut body = Vec::new();
        r.read_to_end(&mut body).map_err(|e| Error::io("<cluster index>", e))?;
        let mut words = body.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]);
        if body.len() % 4 != 0 {
            return Err(Error::Format("cluster index body is not word-aligned".into()));
        }
        let truncated = || Error::Format("cluster index body is truncated".into());
        let mut centroids = Vec::with_capacity(m * d);
        for _ in 0..m * d {
            centroids.push(f32::from_le_bytes(words.next().ok_or_else(truncated)?));
        }
        let mut assignments = vec![u32::MAX; n];
        let mut lists = Vec::with_capacity(m);
        for j in 0..m {
            let len = u32::from_le_bytes(words.next().ok_or_else(truncated)?) as usize;
            let mut list = Vec::with_capacity(len);
            for _ in 0..len {
                let item = u32::from_le_bytes(words.next().ok_or_else(truncated)?);
                let slot = assignments
                    .get_mut(item as usize)
                    .ok_or(Error::OutOfRange { index: item as usize, size: n })?;
                if *slot != u32::MAX {
                    return Err(Error::Format(format!("item {item} appears in two inverted lists")));
                }
                *slot = j as u32;
                list.push(item);
            }
            lists.push(list);
        }
        if words.next().is_some() {
            return Err(Error::Format("trailing bytes after inverted lists".into()));
        }
        if let Some(missing) = assignments.iter().position(|&a| a == u32::MAX) {
            return Err(Error::Format(format!("item {missing} is in no inverted list")));
        }
        Ok(Self {
            centroids: Matrix::from_vec(m, d, centroids),
            inverted_lists: lists,
            assignments,
            space_tag,
            seed,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(f)
    }
}

/// Clusters the item vectors into `m` groups. Each item is listed under the stored (f32)
/// centroid nearest to it.
pub fn build_index_from_vectors(
    items: &Matrix<f32>,
    m: usize,
    space_tag: &str,
    seed: u64,
    cfg: &KMeansConfig,
) -> Result<ClusterIndex> {
    let km = kmeans(items, m, seed, cfg)?;
    let centroids = km.centroids.map(|v| v as f32);
    let assignments: Vec<u32> = items
        .iter_rows()
        .map(|p| nearest(p, &centroids).0 as u32)
        .collect();
    let index = ClusterIndex::from_assignments(centroids, assignments, space_tag, seed)?;
    let empty = index.inverted_lists.iter().filter(|l| l.is_empty()).count();
    if empty > 0 {
        log::warn!("{empty} of {m} clusters are empty after rounding centroids");
    }
    log::info!(
        "index over {}: {m} clusters, objective {:.4}, list sizes {}..={}",
        space_tag,
        km.objective(),
        index.inverted_lists.iter().map(Vec::len).min().unwrap_or(0),
        index.inverted_lists.iter().map(Vec::len).max().unwrap_or(0)
    );
    Ok(index)
}

/// Clusters every item of `model`'s item space.
pub fn build_index(model: &RepresentationModel<f32>, m: usize, seed: u64) -> Result<ClusterIndex> {
    build_index_from_vectors(&model.item_embeddings(), m, &model.tag(), seed, &KMeansConfig::default())
}

/// Sum of squared distances from each item to its listed centroid.
pub fn index_objective(index: &ClusterIndex, items: &Matrix<f32>) -> f64 {
    items
        .iter_rows()
        .zip(&index.assignments)
        .map(|(p, &c)| squared_distance(p, index.centroid(c as usize)))
        .sum()
}
