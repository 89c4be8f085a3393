use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensornet::{squared_distance, Matrix, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub max_iters: usize,
    /// Stop once `‖C_t − C_{t−1}‖_F / ‖C_{t−1}‖_F` falls below this.
    pub tolerance: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub centroids: Matrix<f64>,
    /// Nearest centroid of every point under the returned centroids.
    pub assignments: Vec<u32>,
    /// Sum of squared distances after each assignment step.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub reseeded: usize,
}

impl KMeansResult {
    pub fn objective(&self) -> f64 {
        self.objective_history.last().copied().unwrap_or(0.0)
    }
}

/// Index of the nearest centroid; ties go to the lower index.
pub fn nearest<T: Scalar, C: Scalar>(point: &[T], centroids: &Matrix<C>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter_rows().enumerate() {
        let d = mixed_squared_distance(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

pub(crate) fn mixed_squared_distance<A: Scalar, B: Scalar>(a: &[A], b: &[B]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x.to_f64() - y.to_f64();
            d * d
        })
        .sum()
}

fn assign<T: Scalar>(points: &Matrix<T>, centroids: &Matrix<f64>) -> Vec<(usize, f64)> {
    let rows: Vec<&[T]> = points.iter_rows().collect();
    rows.par_iter().map(|p| nearest(p, centroids)).collect()
}

fn plus_plus_seeds<T: Scalar>(points: &Matrix<T>, m: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = points.rows();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = points
        .iter_rows()
        .map(|p| squared_distance(p, points.row(chosen[0])))
        .collect();
    while chosen.len() < m {
        let next = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // Every remaining point coincides with a seed: fall back to an unused index.
            Err(_) => {
                let unused: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
                unused[rng.gen_range(0..unused.len())]
            }
        };
        chosen.push(next);
        for (i, p) in points.iter_rows().enumerate() {
            d2[i] = d2[i].min(squared_distance(p, points.row(next)));
        }
    }
    chosen
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// Empty clusters are reseeded with the point farthest from its current centroid. The
/// objective is checked to be non-increasing between iterations.
pub fn kmeans<T: Scalar>(points: &Matrix<T>, m: usize, seed: u64, cfg: &KMeansConfig) -> Result<KMeansResult> {
    let (n, d) = (points.rows(), points.cols());
    if m == 0 {
        return Err(Error::InvalidArgument("cluster count must be at least 1".into()));
    }
    if m > n {
        return Err(Error::InvalidArgument(format!("{m} clusters requested for {n} points")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = plus_plus_seeds(points, m, &mut rng);
    let mut centroids = Matrix::<f64>::zeros(m, d);
    for (j, &s) in seeds.iter().enumerate() {
        for (c, &v) in centroids.row_mut(j).iter_mut().zip(points.row(s)) {
            *c = v.to_f64();
        }
    }

    let mut history: Vec<f64> = Vec::new();
    let mut reseeded = 0;
    let mut iterations = 0;
    let mut assignments;
    loop {
        let mut nearest = assign(points, &centroids);
        reseeded += reseed_empty(&mut nearest, &mut centroids, points);
        record_objective(&mut history, &nearest, iterations)?;
        assignments = nearest.iter().map(|&(j, _)| j as u32).collect::<Vec<_>>();
        if iterations == cfg.max_iters {
            break;
        }
        iterations += 1;

        let updated = cluster_means(points, &assignments, &centroids);
        let moved: f64 = updated
            .as_slice()
            .iter()
            .zip(centroids.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale = centroids.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
        centroids = updated;
        if moved <= cfg.tolerance * scale || moved == 0.0 {
            // One more assignment so every point sits with its nearest final centroid.
            let mut nearest = assign(points, &centroids);
            reseeded += reseed_empty(&mut nearest, &mut centroids, points);
            record_objective(&mut history, &nearest, iterations)?;
            assignments = nearest.iter().map(|&(j, _)| j as u32).collect();
            break;
        }
    }
    log::debug!(
        "k-means: {m} clusters, {iterations} iterations, objective {:.6}",
        history.last().copied().unwrap_or(0.0)
    );
    Ok(KMeansResult {
        centroids,
        assignments,
        objective_history: history,
        iterations,
        reseeded,
    })
}

fn record_objective(history: &mut Vec<f64>, nearest: &[(usize, f64)], iteration: usize) -> Result<()> {
    let objective: f64 = nearest.iter().map(|&(_, d)| d).sum();
    if let Some(&prev) = history.last() {
        // Allow for summation rounding once the assignment has settled.
        if objective > prev + 1e-9 * prev.abs() {
            return Err(Error::Diverged(format!(
                "k-means objective rose from {prev} to {objective} at iteration {iteration}"
            )));
        }
    }
    history.push(objective);
    Ok(())
}

/// Moves each empty centroid onto the point farthest from its own centroid, taking the
/// point only from clusters that keep at least one member.
fn reseed_empty<T: Scalar>(
    nearest: &mut [(usize, f64)],
    centroids: &mut Matrix<f64>,
    points: &Matrix<T>,
) -> usize {
    let m = centroids.rows();
    let mut sizes = vec![0usize; m];
    for &(j, _) in nearest.iter() {
        sizes[j] += 1;
    }
    let mut count = 0;
    for j in 0..m {
        if sizes[j] > 0 {
            continue;
        }
        let donor = nearest
            .iter()
            .enumerate()
            .filter(|(_, &(c, _))| sizes[c] > 1)
            .fold(None::<(usize, f64)>, |best, (i, &(_, d))| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        let Some((i, _)) = donor else { break };
        sizes[nearest[i].0] -= 1;
        sizes[j] += 1;
        nearest[i] = (j, 0.0);
        for (c, &v) in centroids.row_mut(j).iter_mut().zip(points.row(i)) {
            *c = v.to_f64();
        }
        count += 1;
    }
    count
}

fn cluster_means<T: Scalar>(points: &Matrix<T>, assignments: &[u32], previous: &Matrix<f64>) -> Matrix<f64> {
    let (m, d) = (previous.rows(), previous.cols());
    let mut sums = Matrix::<f64>::zeros(m, d);
    let mut counts = vec![0usize; m];
    for (p, &j) in points.iter_rows().zip(assignments) {
        counts[j as usize] += 1;
        for (s, &v) in sums.row_mut(j as usize).iter_mut().zip(p) {
            *s += v.to_f64();
        }
    }
    for j in 0..m {
        if counts[j] == 0 {
            sums.row_mut(j).copy_from_slice(previous.row(j));
        } else {
            let inv = 1.0 / counts[j] as f64;
            sums.row_mut(j).iter_mut().for_each(|s| *s *= inv);
        }
    }
    sums
}
