//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 1-5 and 10 are deterministic invariants and fail the target when they fail.
//! Criteria 6-9 reproduce stochastic published numbers on MovieLens-100k; they are
//! evaluated at their stated tolerances and reported, and fail the target only with
//! `GLOCAL_ACCEPTANCE_STRICT=1`.
//!
//! Environment:
//! - `GLOCAL_MOVIELENS`: path of `u.data` (default `data/ml-100k/u.data` at the workspace root);
//!   criteria 5-9 are SKIPPED when it is missing.
//! - `GLOCAL_ACCEPTANCE_QUICK=1`: run only the criteria that need no model training.
//! - `GLOCAL_ACCEPTANCE_DIR`: keep run directories there instead of a temporary directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use glocal::clusterindex::{kmeans, ClusterIndex, KMeansConfig};
use glocal::corpus::synthetic::SyntheticSpec;
use glocal::corpus::sample_global_triplets;
use glocal::fusion::{AttentionModel, AttentionNet, ChannelBatch};
use glocal::metrics::{arhr, hit_rate, ndcg_hits, precision, recall};
use glocal::pipeline::{Fusion, MetricsRecord, Pipeline, Representation, RunConfig};
use glocal::recommend::{RecommendConfig, Recommender};
use glocal::tensornet::{Matrix, ParamTensor};
use glocal::towers::{LossKind, RepresentationModel, SourceKind, TowerArch};
use glocal::Triplet;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 3] = [0, 1, 2];

#[derive(Debug, PartialEq)]
enum Outcome {
    Pass,
    Fail,
    Skipped,
}

struct Verdict {
    id: u8,
    name: &'static str,
    outcome: Outcome,
    detail: String,
    seconds: f64,
}

impl Verdict {
    fn line(&self) -> String {
        let tag = match self.outcome {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Skipped => "SKIPPED",
        };
        format!("{tag} criterion {:>2} {}: {} [{:.1} s]", self.id, self.name, self.detail, self.seconds)
    }
}

/// Runs `f`, timing it; the closure returns (passed, detail).
fn criterion(id: u8, name: &'static str, limit_s: Option<f64>, f: impl FnOnce() -> (bool, String)) -> Verdict {
    let started = Instant::now();
    let (ok, mut detail) = f();
    let seconds = started.elapsed().as_secs_f64();
    let in_time = limit_s.map_or(true, |l| seconds < l);
    if !in_time {
        detail.push_str(&format!("; runtime {seconds:.0} s over the {:.0} s limit", limit_s.unwrap()));
    }
    Verdict { id, name, outcome: if ok && in_time { Outcome::Pass } else { Outcome::Fail }, detail, seconds }
}

fn skipped(id: u8, name: &'static str, why: &str) -> Verdict {
    Verdict { id, name, outcome: Outcome::Skipped, detail: why.to_string(), seconds: 0.0 }
}

// ---------------------------------------------------------------------------------------
// Criterion 1: finite-difference gradients.

const FD_STEP: f64 = 1e-4;
const FD_TOLERANCE: f64 = 1e-4;

/// `|a - n| / max(|a|, |n|)`, with the denominator floored at 1e-6 so entries whose true
/// gradient is zero are judged on absolute error.
fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Central differences over the selected entries of every tensor; returns the largest
/// relative error and where it occurred.
fn fd_check<M>(
    model: &mut M,
    params_mut: impl Fn(&mut M) -> Vec<&mut ParamTensor<f64>>,
    objective: impl Fn(&M) -> f64,
    entries: impl Fn(&ParamTensor<f64>) -> Vec<usize>,
) -> (f64, String) {
    let mut worst = (0.0, String::new());
    let n_tensors = params_mut(model).len();
    for t in 0..n_tensors {
        let (name, picks, grads) = {
            let p = &params_mut(model)[t];
            let picks = entries(p);
            let grads: Vec<f64> = picks.iter().map(|&k| p.grad[k]).collect();
            (p.name.clone(), picks, grads)
        };
        for (&k, &analytic) in picks.iter().zip(&grads) {
            let original = params_mut(model)[t].values[k];
            params_mut(model)[t].values[k] = original + FD_STEP;
            let plus = objective(model);
            params_mut(model)[t].values[k] = original - FD_STEP;
            let minus = objective(model);
            params_mut(model)[t].values[k] = original;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let err = relative_error(analytic, numeric);
            if err > worst.0 || worst.1.is_empty() {
                worst = (err, format!("{name}[{k}] analytic {analytic:.6e} numeric {numeric:.6e}"));
            }
        }
    }
    worst
}

fn all_entries(p: &ParamTensor<f64>) -> Vec<usize> {
    (0..p.values.len()).collect()
}

/// Embedding rows used by the batch (plus one unused row) and every dense entry.
fn touched_entries<'a>(
    used_users: &'a BTreeSet<usize>,
    used_items: &'a BTreeSet<usize>,
) -> impl Fn(&ParamTensor<f64>) -> Vec<usize> + 'a {
    move |p| {
        if !p.name.ends_with(".embedding") {
            return all_entries(p);
        }
        let rows = if p.name.starts_with("user") { used_users } else { used_items };
        let width = p.shape[1];
        let spare = (0..p.shape[0]).find(|r| !rows.contains(r));
        rows.iter()
            .copied()
            .chain(spare)
            .flat_map(|r| (r * width)..(r + 1) * width)
            .collect()
    }
}

fn tower_gradients(
    users: usize,
    items: usize,
    batch: &[Triplet],
    kind: LossKind,
    seed: u64,
) -> (f64, String) {
    let l2 = if kind == LossKind::Product { 1e-2 } else { 0.0 };
    let mut m = RepresentationModel::<f64>::new(users, items, &TowerArch::uniform(8), kind, SourceKind::Global, seed).unwrap();
    // Keep pre-normalization outputs away from the origin, where normalization has a kink.
    for p in m.params_mut().into_iter().filter(|p| p.name.ends_with("bias")) {
        p.values.iter_mut().enumerate().for_each(|(j, v)| *v = 0.05 * (j % 3) as f64 + 0.02);
    }
    for p in m.params_mut() {
        p.zero_grad();
    }
    m.accumulate_batch(batch, 0.5, l2).unwrap();
    let used_users: BTreeSet<usize> = batch.iter().map(|t| t.user as usize).collect();
    let used_items: BTreeSet<usize> = batch.iter().flat_map(|t| [t.pos_item as usize, t.neg_item as usize]).collect();
    fd_check(
        &mut m,
        |m| m.params_mut(),
        |m| m.batch_objective(batch, 0.5, l2).unwrap(),
        touched_entries(&used_users, &used_items),
    )
}

fn attention_gradients(mut net: AttentionNet<f64>, batch: &ChannelBatch<f64>, kind: LossKind) -> (f64, String) {
    for p in net.params_mut() {
        p.zero_grad();
    }
    net.accumulate(batch, kind, 0.5).unwrap();
    fd_check(&mut net, |n| n.params_mut(), |n| n.objective(batch, kind, 0.5).unwrap(), all_entries)
}

fn random_channel_batch(channels: usize, b: usize, d: usize, seed: u64) -> ChannelBatch<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut block = || Matrix::from_vec(b, d, (0..b * d).map(|_| rng.gen_range(-1.0..1.0)).collect());
    ChannelBatch {
        users: (0..channels).map(|_| block()).collect(),
        pos: (0..channels).map(|_| block()).collect(),
        neg: (0..channels).map(|_| block()).collect(),
    }
}

fn criterion_1() -> Verdict {
    criterion(1, "finite-difference gradients", Some(10.0), || {
        let batch = [
            Triplet::new(0, 1, 2),
            Triplet::new(1, 0, 3),
            Triplet::new(2, 3, 1),
            Triplet::new(0, 4, 0),
            Triplet::new(3, 2, 5),
            Triplet::new(1, 5, 4),
        ];
        let mut lines = Vec::new();
        let mut worst: f64 = 0.0;
        for kind in [LossKind::Product, LossKind::Distance] {
            let (e, at) = tower_gradients(4, 6, &batch, kind, 5);
            worst = worst.max(e);
            lines.push(format!("towers/{kind} {e:.2e} ({at})"));
            let mut net = AttentionNet::<f64>::new(2, 8, 11);
            // Larger weights give a softmax far from uniform.
            for p in net.params_mut() {
                p.values.iter_mut().for_each(|v| *v *= 3.0);
            }
            let (e, at) = attention_gradients(net, &random_channel_batch(2, 6, 8, 3), kind);
            worst = worst.max(e);
            lines.push(format!("attention/{kind} {e:.2e} ({at})"));
        }
        (worst < FD_TOLERANCE, format!("max relative error {worst:.2e} (limit {FD_TOLERANCE:.0e}); {}", lines.join("; ")))
    })
}

// ---------------------------------------------------------------------------------------
// Criterion 2: metrics against a brute-force oracle.

/// Reference values from the definitions, walking list positions in order.
fn metric_oracle(q: &[u32], g: &[u32]) -> [f64; 5] {
    let mut hits = 0usize;
    let mut rr = 0.0;
    let mut dcg = 0.0;
    for (pos, item) in q.iter().enumerate() {
        if g.iter().any(|x| x == item) {
            hits += 1;
            rr += 1.0 / (pos + 1) as f64;
            dcg += 1.0 / ((pos + 2) as f64).log2();
        }
    }
    let prec = if q.is_empty() { 0.0 } else { hits as f64 / q.len() as f64 };
    [hits as f64 / g.len() as f64, prec, if hits > 0 { 1.0 } else { 0.0 }, rr, dcg]
}

fn library_metrics(q: &[u32], g: &[u32]) -> [f64; 5] {
    [recall(q, g).unwrap(), precision(q, g), hit_rate(q, g), arhr(q, g), ndcg_hits(q, g)]
}

fn ordered_lists(universe: u32, max_len: usize) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for l in &frontier {
            for i in 0..universe {
                if !l.contains(&i) {
                    let mut e = l.clone();
                    e.push(i);
                    next.push(e);
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn criterion_2() -> Verdict {
    criterion(2, "metric oracle", Some(10.0), || {
        let lists = ordered_lists(8, 5);
        let truths: Vec<Vec<u32>> = (1u32..256).map(|mask| (0..8).filter(|i| mask & (1 << i) != 0).collect()).collect();
        let mut checked = 0usize;
        let mut mismatches = Vec::new();
        for q in &lists {
            for g in &truths {
                checked += 1;
                let (lib, ora) = (library_metrics(q, g), metric_oracle(q, g));
                let hits = q.iter().filter(|i| g.contains(i)).count() as f64;
                let identity = (lib[1] * q.len() as f64 - hits).abs() < 1e-9 && (lib[0] * g.len() as f64 - hits).abs() < 1e-9;
                if lib != ora || !identity {
                    mismatches.push(format!("q={q:?} g={g:?}: {lib:?} vs {ora:?}"));
                }
            }
        }
        let detail = format!(
            "{} ordered lists x {} ground truths = {checked} cases, {} mismatches{}",
            lists.len(),
            truths.len(),
            mismatches.len(),
            mismatches.first().map(|m| format!(", first {m}")).unwrap_or_default()
        );
        (mismatches.is_empty() && lists.len() == 8801, detail)
    })
}

// ---------------------------------------------------------------------------------------
// Criterion 3: Algorithm 1 with K = M against exhaustive attentive ranking.

/// Attentive scores of every item, computed from the channel tables and transforms with
/// explicit loops, sorted best first with lower ids first on ties.
fn exhaustive_attentive_ranking(model: &AttentionModel, user: u32) -> Vec<u32> {
    let r = model.channel_count();
    let tu: Vec<Vec<f32>> = (0..r).map(|c| model.channel_transform(c, model.user_vector(c, user)).unwrap()).collect();
    let mut scored: Vec<(u32, f64)> = (0..model.item_count() as u32)
        .map(|i| {
            let compat: Vec<f64> = (0..r)
                .map(|c| {
                    let ti = model.channel_transform(c, model.item_vector(c, i)).unwrap();
                    tu[c].iter().zip(&ti).map(|(a, b)| *a as f64 * *b as f64).sum()
                })
                .collect();
            let max = compat.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = compat.iter().map(|s| (s - max).exp()).collect();
            let z: f64 = e.iter().sum();
            let d = model.dim();
            let (mut ub, mut ib) = (vec![0.0; d], vec![0.0; d]);
            for c in 0..r {
                let w = e[c] / z;
                for j in 0..d {
                    ub[j] += w * model.user_vector(c, user)[j] as f64;
                    ib[j] += w * model.item_vector(c, i)[j] as f64;
                }
            }
            let score = match model.loss_kind {
                LossKind::Product => ub.iter().zip(&ib).map(|(a, b)| a * b).sum(),
                LossKind::Distance => -ub.iter().zip(&ib).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
            };
            (i, score)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.into_iter().map(|(i, _)| i).collect()
}

/// Users whose K = M recommendation differs from the exhaustive ranking, out of `sample`.
fn retrieval_mismatches(
    model: &AttentionModel,
    index: &ClusterIndex,
    index_users: &Matrix<f32>,
    sample: &[u32],
    n: usize,
) -> Vec<u32> {
    let rec = Recommender::new(index, index_users, model, None).unwrap();
    let mut cfg = RecommendConfig::new(index.cluster_count(), n, model.loss_kind);
    cfg.exclude_train_positives = false;
    sample
        .iter()
        .copied()
        .filter(|&u| {
            let got = rec.recommend(u, &cfg).unwrap().item_ids();
            let mut want = exhaustive_attentive_ranking(model, u);
            want.truncate(n);
            got != want
        })
        .collect()
}

fn random_channels(users: usize, items: usize, d: usize, seed: u64) -> Vec<std::sync::Arc<RepresentationModel<f32>>> {
    [(LossKind::Distance, SourceKind::Global), (LossKind::Product, SourceKind::Global), (LossKind::Distance, SourceKind::Local), (LossKind::Product, SourceKind::Local)]
        .into_iter()
        .enumerate()
        .map(|(c, (loss, src))| {
            std::sync::Arc::new(
                RepresentationModel::new(users, items, &TowerArch::uniform(d), loss, src, seed + c as u64).unwrap(),
            )
        })
        .collect()
}

fn criterion_3() -> Verdict {
    criterion(3, "retrieval equivalence at K = M", Some(30.0), || {
        let data = SyntheticSpec::default();
        let (users, items) = (data.users, data.items);
        let mut detail = Vec::new();
        let mut ok = true;
        for (loss, tag) in [(LossKind::Distance, "AD"), (LossKind::Product, "AP")] {
            let channels = random_channels(users, items, 8, 21);
            let model = AttentionModel::new(channels.clone(), loss, 5).unwrap();
            let gd = &channels[0];
            let km = kmeans(&gd.item_embeddings(), 6, 9, &KMeansConfig::default()).unwrap();
            let index = ClusterIndex::from_assignments(km.centroids.map(|v| v as f32), km.assignments, "GD", 9).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let sample: Vec<u32> = rand::seq::index::sample(&mut rng, users, 100).into_iter().map(|u| u as u32).collect();
            let bad = retrieval_mismatches(&model, &index, &gd.user_embeddings(), &sample, items);
            ok &= bad.is_empty();
            detail.push(format!("{tag}: {} of 100 users differ over full {items}-item lists", bad.len()));
        }
        (ok, detail.join("; "))
    })
}

// ---------------------------------------------------------------------------------------
// Criterion 4: k-means properties.

fn non_increasing(history: &[f64]) -> bool {
    history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12))
}

fn criterion_4() -> Verdict {
    criterion(4, "k-means properties", Some(10.0), || {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let mut violations = 0;
        let mut iterations = 0;
        for inst in 0..50u64 {
            let n = rng.gen_range(20..400);
            let d = rng.gen_range(2..9);
            let m = rng.gen_range(2..12);
            let pts = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.gen_range(-1.0f32..1.0)).collect());
            let r = kmeans(&pts, m, inst, &KMeansConfig::default()).unwrap();
            iterations += r.iterations;
            if !non_increasing(&r.objective_history) {
                violations += 1;
            }
        }
        let mut recovered = 0;
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let mut rows = Vec::new();
            let mut truth = Vec::new();
            for (label, centre) in [(0u32, -5.0f64), (1, 5.0)] {
                for _ in 0..100 {
                    rows.push([centre + rng.gen_range(-1.0..1.0), centre + rng.gen_range(-1.0..1.0)]);
                    truth.push(label);
                }
            }
            let r = kmeans(&Matrix::from_rows(&rows), 2, seed, &KMeansConfig::default()).unwrap();
            let same = r.assignments.iter().zip(&truth).all(|(a, t)| a == t);
            let flipped = r.assignments.iter().zip(&truth).all(|(a, t)| *a != *t);
            if same || flipped {
                recovered += 1;
            }
        }
        (
            violations == 0 && recovered == 5,
            format!("{violations} of 50 random instances with a rising objective ({iterations} Lloyd iterations in total); two blobs recovered in {recovered} of 5 seeds"),
        )
    })
}

// ---------------------------------------------------------------------------------------
// MovieLens runs shared by criteria 5-9.

struct Run {
    pipeline: Pipeline,
    metrics: MetricsRecord,
}

impl Run {
    fn stage_seconds(&self, keep: impl Fn(&str) -> bool) -> f64 {
        self.pipeline.manifest().stages.iter().filter(|(k, _)| keep(k)).map(|(_, s)| s.seconds).sum()
    }

    fn recall(&self, tag: &str, n: usize) -> f64 {
        self.metrics
            .topn
            .iter()
            .find(|r| r.tag == tag && r.n == n)
            .unwrap_or_else(|| panic!("no top-{n} row for {tag}"))
            .recall
    }
}

fn movielens_config(data: &Path, out: &Path, seed: u64, extra: &str) -> RunConfig {
    let text = format!(
        "dataset.path = {}\nout = {}\nseed = {seed}\ndim = 64\nclusters = 20\ncandidate_clusters = 2\n\
         eval.n = 15\neval.coverage_k = 1,2,3,4,5\neval.coverage_n = 20\n{extra}",
        data.display(),
        out.display()
    );
    RunConfig::parse(&text).unwrap()
}

fn run_pipeline(cfg: RunConfig) -> glocal::Result<Run> {
    let mut pipeline = Pipeline::open(cfg)?;
    pipeline.train_all()?;
    let metrics = pipeline.evaluate()?;
    Ok(Run { pipeline, metrics })
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn criterion_5(run: &Run) -> Verdict {
    criterion(5, "candidate sets nested in K (MovieLens index)", Some(60.0), || {
        let index = run.pipeline.load_index().unwrap();
        let users = run.pipeline.load_representation(Representation::GD).unwrap().user_embeddings();
        let m = index.cluster_count();
        let mut violations = 0;
        let mut not_strict = 0;
        for u in 0..users.rows() {
            let mut prev: Vec<u32> = Vec::new();
            for k in 1..=m {
                let cur = index.candidates(users.row(u), k).unwrap();
                let set: BTreeSet<u32> = cur.iter().copied().collect();
                if !prev.iter().all(|i| set.contains(i)) {
                    violations += 1;
                }
                let added = index.top_k_clusters(users.row(u), k).unwrap()[k - 1];
                if cur.len() == prev.len() && !index.inverted_lists[added].is_empty() {
                    not_strict += 1;
                }
                prev = cur;
            }
            if prev.len() != index.item_count() {
                violations += 1;
            }
        }
        let empty = index.inverted_lists.iter().filter(|l| l.is_empty()).count();
        (
            violations == 0 && not_strict == 0,
            format!(
                "{} users x K = 1..{m}: {violations} superset violations, {not_strict} non-strict steps ({empty} empty clusters)",
                users.rows()
            ),
        )
    })
}

fn criterion_6(runs: &[Run]) -> Verdict {
    criterion(6, "MovieLens-100k ablation (AD/AP)", None, || {
        let singles = ["GD", "GP", "LD", "LP"];
        let mut ok = true;
        let mut parts = Vec::new();
        for tag in ["AD", "AP"] {
            let avg = mean(runs.iter().map(|r| r.recall(tag, 15)));
            let in_band = (0.27..=0.33).contains(&avg);
            let wins = runs
                .iter()
                .filter(|r| r.recall(tag, 15) >= singles.iter().map(|s| r.recall(s, 15)).fold(f64::MIN, f64::max))
                .count();
            ok &= in_band && wins >= 2;
            parts.push(format!(
                "{tag} recall@15 mean {avg:.4} (band [0.27, 0.33] {}), beats its four channels in {wins}/3 seeds",
                if in_band { "met" } else { "missed" }
            ));
        }
        for r in runs {
            let row: Vec<String> = ["GD", "GP", "LD", "LP", "AD", "AP"].iter().map(|t| format!("{t} {:.4}", r.recall(t, 15))).collect();
            parts.push(format!("seed {}: {}", r.pipeline.manifest().seed, row.join(" ")));
        }
        let secs: f64 = runs.iter().map(|r| r.stage_seconds(|s| !s.starts_with("attend:GAD") && !s.starts_with("attend:LAD"))).sum();
        ok &= secs < 45.0 * 60.0;
        parts.push(format!("training and evaluation {:.1} min (limit 45)", secs / 60.0));
        (ok, parts.join("; "))
    })
}

fn criterion_7(runs: &[Run]) -> Verdict {
    criterion(7, "attention gain over channels", None, || {
        let mut ok = true;
        let mut parts = Vec::new();
        for (tag, a, b) in [("GAD", "GD", "GP"), ("LAD", "LD", "LP")] {
            let wins = runs.iter().filter(|r| r.recall(tag, 15) >= r.recall(a, 15).max(r.recall(b, 15))).count();
            ok &= wins >= 2;
            let vals: Vec<String> = runs
                .iter()
                .map(|r| format!("{:.4} vs {:.4}", r.recall(tag, 15), r.recall(a, 15).max(r.recall(b, 15))))
                .collect();
            parts.push(format!("{tag} >= max({a}, {b}) in {wins}/3 seeds ({})", vals.join(", ")));
        }
        (ok, parts.join("; "))
    })
}

fn criterion_8(runs: &[Run]) -> Verdict {
    criterion(8, "leave-one-out reproduction (AP)", None, || {
        let rows: Vec<_> = runs
            .iter()
            .map(|r| r.metrics.loo.iter().find(|l| l.tag == "AP").expect("AP leave-one-out row").clone())
            .collect();
        let hr = mean(rows.iter().map(|l| l.hr));
        let ndcg = mean(rows.iter().map(|l| l.ndcg));
        let secs: f64 = runs.iter().map(|r| r.stage_seconds(|_| true)).sum();
        let ok = (0.62..=0.78).contains(&hr) && (0.40..=0.55).contains(&ndcg) && secs < 45.0 * 60.0;
        let per_seed: Vec<String> = rows.iter().map(|l| format!("{:.4}/{:.4}", l.hr, l.ndcg)).collect();
        (
            ok,
            format!(
                "HR@10 {hr:.4} (band [0.62, 0.78]), NDCG@10 {ndcg:.4} (band [0.40, 0.55]); per seed HR/NDCG {}; {:.1} min (limit 45)",
                per_seed.join(", "),
                secs / 60.0
            ),
        )
    })
}

fn criterion_9(runs: &[Run]) -> Verdict {
    criterion(9, "AD coverage curve shape", None, || {
        let curve: Vec<(usize, f64)> = (1..=5)
            .map(|k| {
                let v = mean(runs.iter().map(|r| {
                    r.metrics.coverage.iter().find(|p| p.tag == "AD" && p.k == k).expect("AD coverage point").recall
                }));
                (k, v)
            })
            .collect();
        let monotone = curve.windows(2).all(|w| w[1].1 >= w[0].1);
        let ratio = curve[1].1 / curve[4].1;
        let secs: f64 = runs.iter().map(|r| r.stage_seconds(|s| s == "evaluate")).sum();
        let ok = monotone && ratio >= 0.8 && secs < 15.0 * 60.0;
        let pts: Vec<String> = curve.iter().map(|(k, v)| format!("K={k} {v:.4}")).collect();
        (
            ok,
            format!(
                "mean recall@20 {} ; non-decreasing {monotone}; K=2 reaches {:.1}% of K=5 (need 80%); evaluation {:.1} min (limit 15)",
                pts.join(", "),
                100.0 * ratio,
                secs / 60.0
            ),
        )
    })
}

// ---------------------------------------------------------------------------------------
// Criterion 10: invariants on a 10%-user subsample of an Amazon-shaped surrogate.

/// Synthetic log with the published Amazon Movies & TV shape (32,910 users, 45,585 items,
/// about 1.09M interactions, at least six per user) and a long-tailed popularity.
fn amazon_surrogate() -> SyntheticSpec {
    SyntheticSpec {
        users: 32_910,
        items: 45_585,
        groups: 100,
        min_degree: 6,
        max_degree: 60,
        in_group: 0.7,
        popularity_skew: 0.9,
        seed: 2024,
    }
}

fn write_user_subsample(spec: &SyntheticSpec, fraction: f64, seed: u64, path: &Path) -> usize {
    let triples = spec.triples().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut users: Vec<u32> = (0..spec.users as u32).collect();
    users.shuffle(&mut rng);
    let keep: BTreeSet<u32> = users[..(spec.users as f64 * fraction).round() as usize].iter().copied().collect();
    let mut text = String::new();
    for (u, i, t) in triples.into_iter().filter(|(u, _, _)| keep.contains(u)) {
        text.push_str(&format!("{}\t{}\t1\t{t}\n", u + 1, i + 1));
    }
    std::fs::write(path, text).unwrap();
    keep.len()
}

fn surrogate_invariants(run: &Run) -> (bool, Vec<String>) {
    let p = &run.pipeline;
    let mut parts = Vec::new();
    let mut ok = true;
    let corpus = Pipeline::open(p.config().clone()).and_then(|mut q| q.corpus()).unwrap();
    let train = &corpus.split.train;
    let gd = p.load_representation(Representation::GD).unwrap();
    let index = p.load_index().unwrap();
    let ad = p.load_attention(Fusion::AD).unwrap();
    let gd_users = gd.user_embeddings();

    // (1) gradients on batches drawn from the subsample.
    let batch: Vec<Triplet> = sample_global_triplets(train, 1, 77).unwrap().step_by(9973).take(6).collect();
    let mut worst: f64 = 0.0;
    for kind in [LossKind::Product, LossKind::Distance] {
        worst = worst.max(tower_gradients(train.user_count(), train.item_count(), &batch, kind, 8).0);
        let cb = ad.channel_batch(&batch).unwrap();
        let cb64 = ChannelBatch {
            users: cb.users.iter().map(|m| m.map(|v| v as f64)).collect(),
            pos: cb.pos.iter().map(|m| m.map(|v| v as f64)).collect(),
            neg: cb.neg.iter().map(|m| m.map(|v| v as f64)).collect(),
        };
        worst = worst.max(attention_gradients(ad.net.cast::<f64>(), &cb64, kind).0);
    }
    ok &= worst < FD_TOLERANCE;
    parts.push(format!("(1) max FD relative error {worst:.2e}"));

    // (2) metrics on the AD top-15 lists equal the oracle.
    let rec = Recommender::new(&index, &gd_users, &ad, Some(train)).unwrap();
    let cfg = RecommendConfig::new(2, 15, LossKind::Distance);
    let mut mismatched = 0;
    let mut non_finite = 0;
    for (&u, g) in &corpus.split.test {
        let list = rec.recommend(u, &cfg).unwrap();
        non_finite += list.items.iter().filter(|(_, s)| !s.is_finite()).count();
        let q = list.item_ids();
        if library_metrics(&q, g) != metric_oracle(&q, g) {
            mismatched += 1;
        }
    }
    ok &= mismatched == 0 && non_finite == 0;
    parts.push(format!("(2) {mismatched} of {} users with metric mismatches, {non_finite} non-finite scores", corpus.split.test.len()));

    // (3) K = M equals exhaustive ranking for 100 users.
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let sample: Vec<u32> = rand::seq::index::sample(&mut rng, train.user_count(), 100).into_iter().map(|u| u as u32).collect();
    let bad = retrieval_mismatches(&ad, &index, &gd_users, &sample, 50);
    ok &= bad.is_empty();
    parts.push(format!("(3) {} of 100 users differ at K = M", bad.len()));

    // (4) k-means over the GD item space, replayed with the index seed.
    let km = kmeans(&gd.item_embeddings(), index.cluster_count(), index.seed, &p.config().kmeans_config().unwrap()).unwrap();
    let monotone = non_increasing(&km.objective_history);
    ok &= monotone;
    parts.push(format!("(4) objective non-increasing over {} iterations: {monotone}", km.iterations));

    // (5) candidate sets nested in K.
    let m = index.cluster_count();
    let mut violations = 0;
    for u in 0..gd_users.rows() {
        let order = index.top_k_clusters(gd_users.row(u), m).unwrap();
        for k in 1..m {
            if index.top_k_clusters(gd_users.row(u), k).unwrap() != order[..k] {
                violations += 1;
            }
        }
    }
    for &u in sample.iter().take(20) {
        let mut prev: BTreeSet<u32> = BTreeSet::new();
        for k in 1..=m {
            let cur: BTreeSet<u32> = index.candidates(gd_users.row(u as usize), k).unwrap().into_iter().collect();
            if !cur.is_superset(&prev) {
                violations += 1;
            }
            prev = cur;
        }
    }
    ok &= violations == 0;
    parts.push(format!("(5) {violations} nesting violations over K = 1..{m}"));
    (ok, parts)
}

fn criterion_10(dir: &Path) -> Verdict {
    criterion(10, "Amazon-shaped 10% subsample end to end", None, || {
        let data = dir.join("amazon-surrogate-10pct.tsv");
        let users = write_user_subsample(&amazon_surrogate(), 0.1, 7, &data);
        let text = format!(
            "dataset.path = {}\nout = {}\ndataset.min_interactions = 6\nsplit.protocol = per-user-holdout:3\n\
             dim = 64\nclusters = 100\ncandidate_clusters = 2\neval.n = 15\neval.coverage_k = 1,2,5\n",
            data.display(),
            dir.join("amazon-run").display()
        );
        match run_pipeline(RunConfig::parse(&text).unwrap()) {
            Err(e) => (false, format!("pipeline failed on {users} users: {e}")),
            Ok(run) => {
                let finite = run.metrics.topn.iter().all(|r| r.recall.is_finite() && r.ndcg.is_finite());
                let (ok, parts) = surrogate_invariants(&run);
                let summary: Vec<String> = run.metrics.topn.iter().map(|r| format!("{} {:.4}", r.tag, r.recall)).collect();
                (
                    ok && finite,
                    format!("{users} users; recall@15 {}; {}", summary.join(" "), parts.join("; ")),
                )
            }
        }
    })
}

// ---------------------------------------------------------------------------------------

fn movielens_path() -> PathBuf {
    std::env::var_os("GLOCAL_MOVIELENS").map(PathBuf::from).unwrap_or_else(|| {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/ml-100k/u.data")
    })
}

fn flag(name: &str) -> bool {
    std::env::var(name).map_or(false, |v| v == "1")
}

fn main() {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn,glocal::metrics=error")).is_test(true).try_init();
    let strict = flag("GLOCAL_ACCEPTANCE_STRICT");
    let quick = flag("GLOCAL_ACCEPTANCE_QUICK");
    let temp = tempfile::tempdir().unwrap();
    let work = std::env::var_os("GLOCAL_ACCEPTANCE_DIR").map(PathBuf::from).unwrap_or_else(|| temp.path().to_path_buf());
    std::fs::create_dir_all(&work).unwrap();

    let mut verdicts = Vec::new();
    let mut report = |v: Verdict| {
        println!("{}", v.line());
        verdicts.push(v);
    };
    report(criterion_1());
    report(criterion_2());
    report(criterion_3());
    report(criterion_4());

    let data = movielens_path();
    let names: [(u8, &str); 5] = [
        (5, "candidate sets nested in K (MovieLens index)"),
        (6, "MovieLens-100k ablation (AD/AP)"),
        (7, "attention gain over channels"),
        (8, "leave-one-out reproduction (AP)"),
        (9, "AD coverage curve shape"),
    ];
    if quick {
        for (id, name) in names {
            report(skipped(id, name, "GLOCAL_ACCEPTANCE_QUICK=1"));
        }
        report(skipped(10, "Amazon-shaped 10% subsample end to end", "GLOCAL_ACCEPTANCE_QUICK=1"));
    } else {
        if data.exists() {
            let ablation: Vec<Run> = SEEDS
                .iter()
                .map(|&s| {
                    let cfg = movielens_config(&data, &work.join(format!("ml100k-seed{s}")), s, "attention = AD,AP,GAD,LAD\n");
                    run_pipeline(cfg).expect("MovieLens ablation run")
                })
                .collect();
            report(criterion_5(&ablation[0]));
            report(criterion_6(&ablation));
            report(criterion_7(&ablation));
            let loo: Vec<Run> = SEEDS
                .iter()
                .map(|&s| {
                    let cfg = movielens_config(
                        &data,
                        &work.join(format!("ml100k-loo-seed{s}")),
                        s,
                        "split.protocol = leave-one-out\nattention = AP\neval.coverage_k =\n",
                    );
                    run_pipeline(cfg).expect("MovieLens leave-one-out run")
                })
                .collect();
            report(criterion_8(&loo));
            report(criterion_9(&ablation));
        } else {
            let why = format!("{} not found (see scripts/fetch-movielens.sh)", data.display());
            for (id, name) in names {
                report(skipped(id, name, &why));
            }
        }
        report(criterion_10(&work));
    }

    let failed: Vec<&Verdict> = verdicts.iter().filter(|v| v.outcome == Outcome::Fail).collect();
    let blocking: Vec<u8> = failed
        .iter()
        .filter(|v| strict || !(6..=9).contains(&v.id))
        .map(|v| v.id)
        .collect();
    let count = |o: Outcome| verdicts.iter().filter(|v| v.outcome == o).count();
    println!(
        "acceptance: {} passed, {} failed, {} skipped{}",
        count(Outcome::Pass),
        count(Outcome::Fail),
        count(Outcome::Skipped),
        if strict { " (strict)" } else { "" }
    );
    if !blocking.is_empty() {
        println!("blocking failures: {blocking:?}");
        std::process::exit(1);
    }
}
