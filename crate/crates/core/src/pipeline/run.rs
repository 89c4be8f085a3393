use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use super::artifacts::{read_triplet_sets, write_triplet_sets, write_vocab};
use super::config::{Fusion, ModelTag, Representation, RunConfig};
use super::manifest::{CoveragePoint, MetricsRecord, RunManifest, StageKey, StageRecord};
use crate::clusterindex::{build_index_from_vectors, mine_local_triplets, train_local, ClusterIndex, LocalTripletSets};
use crate::corpus::{
    filter_min_interactions, load_interactions, sample_global_triplets, split, InteractionMatrix, Split,
    SplitProtocol, SplitSpec, Triplet,
};
use crate::digest::file_sha256;
use crate::error::{Error, Result};
use crate::fusion::{train_attention, AttentionModel, ChannelRef};
use crate::metrics::{coverage_recall, evaluate_loo, evaluate_topn, EvalResult, LooResult};
use crate::recommend::{write_recommendations, PairScorer, RecommendConfig, Recommender, SingleSpace};
use crate::seed::derive_seed;
use crate::towers::{train_global, RepresentationModel, TrainReport};

pub const MANIFEST_FILE: &str = "manifest.json";
const SPLIT_FILE: &str = "corpus/split.tsv";
const USERS_FILE: &str = "corpus/users.txt";
const ITEMS_FILE: &str = "corpus/items.txt";
const INDEX_FILE: &str = "index/GD.cidx";
const TRIPLETS_FILE: &str = "local/triplets.tsv";
const TOPN_FILE: &str = "eval/topn.tsv";
const COVERAGE_FILE: &str = "eval/coverage.tsv";
const LOO_FILE: &str = "eval/loo.tsv";

pub fn model_file(r: Representation) -> String {
    format!("models/{r}.bin")
}

pub fn attention_file(a: Fusion) -> String {
    format!("attention/{a}.bin")
}

pub fn recommend_file(tag: ModelTag) -> String {
    format!("recommend/{tag}.tsv")
}

fn stage_of(r: Representation) -> String {
    format!("train:{r}")
}

fn attend_stage(a: Fusion) -> String {
    format!("attend:{a}")
}

/// The filtered dataset and its train/test split.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub full: InteractionMatrix,
    pub split: Split,
}

/// A model ready to score user-item pairs.
pub enum LoadedModel {
    Single(SingleSpace),
    Attention(AttentionModel),
}

impl LoadedModel {
    pub fn scorer(&self) -> &dyn PairScorer {
        match self {
            Self::Single(s) => s,
            Self::Attention(a) => a,
        }
    }
}

/// A run directory: stage artifacts plus `manifest.json`.
///
/// Each stage is skipped when the manifest already holds a record with the same input key
/// and every recorded artifact still hashes to its recorded value.
pub struct Pipeline {
    cfg: RunConfig,
    out: PathBuf,
    manifest: RunManifest,
    corpus: Option<Arc<Corpus>>,
}

impl Pipeline {
    pub fn open(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let out = cfg.out_dir();
        std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        let path = out.join(MANIFEST_FILE);
        let mut manifest = if path.exists() {
            RunManifest::load(&path)?
        } else {
            RunManifest::default()
        };
        manifest.config = cfg.pairs().clone();
        manifest.seed = cfg.seed()?;
        Ok(Self {
            cfg,
            out,
            manifest,
            corpus: None,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn seed(&self) -> u64 {
        self.manifest.seed
    }

    fn save_manifest(&self) -> Result<()> {
        self.manifest.save(&self.path(MANIFEST_FILE))
    }

    fn up_to_date(&self, stage: &str, key: &str) -> bool {
        let Some(rec) = self.manifest.stages.get(stage) else {
            return false;
        };
        rec.input_key == key
            && rec
                .artifacts
                .iter()
                .all(|(rel, hash)| file_sha256(&self.path(rel)).is_ok_and(|h| &h == hash))
    }

    fn record(
        &mut self,
        stage: &str,
        key: String,
        seed: Option<u64>,
        started: Instant,
        artifacts: &[String],
        notes: BTreeMap<String, String>,
    ) -> Result<()> {
        let artifacts = artifacts
            .iter()
            .map(|rel| Ok((rel.clone(), file_sha256(&self.path(rel))?)))
            .collect::<Result<_>>()?;
        let seconds = started.elapsed().as_secs_f64();
        log::info!("stage {stage} done in {seconds:.1}s");
        self.manifest.stages.insert(
            stage.to_string(),
            StageRecord {
                input_key: key,
                seconds,
                seed,
                artifacts,
                notes,
            },
        );
        self.save_manifest()
    }

    fn skip(&self, stage: &str, key: &str) -> bool {
        let fresh = self.up_to_date(stage, key);
        if fresh {
            log::info!("stage {stage} is up to date");
        }
        fresh
    }

    /// Path and hash of an artifact some earlier stage must have produced.
    fn require(&self, stage: &str, rel: &str) -> Result<(PathBuf, String)> {
        let missing = || Error::MissingDependency {
            stage: stage.to_string(),
            what: rel.to_string(),
        };
        let (_, hash) = self.manifest.artifact_hash(rel).ok_or_else(missing)?;
        let path = self.path(rel);
        if !path.exists() {
            return Err(missing());
        }
        Ok((path, hash.to_string()))
    }

    fn ensure_dir(&self, rel: &str) -> Result<()> {
        let p = self.path(rel);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))
    }

    fn load_full(&self) -> Result<(InteractionMatrix, String)> {
        let path = self.cfg.dataset_path()?;
        let hash = file_sha256(&path)?;
        let raw = load_interactions(&path, &self.cfg.delimiter_spec()?)?;
        Ok((filter_min_interactions(&raw, self.cfg.min_interactions()?)?, hash))
    }

    /// Reads the dataset, applies the interaction filter and splits it.
    pub fn ingest(&mut self) -> Result<bool> {
        let path = self.cfg.dataset_path()?;
        let dataset_hash = file_sha256(&path)?;
        let seed = derive_seed(self.seed(), "split");
        let key = StageKey::new("ingest")
            .text(&self.cfg.section(&["dataset.", "split."]))
            .with("dataset_sha256", &dataset_hash)
            .with("seed", seed)
            .finish();
        if self.skip("ingest", &key) {
            return Ok(false);
        }
        let started = Instant::now();
        let (full, _) = self.load_full()?;
        let spec = SplitSpec {
            protocol: self.cfg.split_protocol()?,
            seed,
            min_interactions: self.cfg.min_interactions()?,
        };
        let sp = split(&full, &spec)?;
        self.ensure_dir("corpus")?;
        let split_path = self.path(SPLIT_FILE);
        let f = std::fs::File::create(&split_path).map_err(|e| Error::io(&split_path, e))?;
        let mut w = BufWriter::new(f);
        sp.write_manifest(&mut w)?;
        w.flush().map_err(|e| Error::io(&split_path, e))?;
        write_vocab(&self.path(USERS_FILE), full.users())?;
        write_vocab(&self.path(ITEMS_FILE), full.items())?;
        let notes = [
            ("users", full.user_count()),
            ("items", full.item_count()),
            ("interactions", full.len()),
            ("train", sp.train.len()),
            ("test", sp.test_len()),
            ("excluded_users", sp.excluded_users.len()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        self.manifest.dataset_sha256 = Some(dataset_hash);
        self.corpus = Some(Arc::new(Corpus { full, split: sp }));
        self.record(
            "ingest",
            key,
            Some(seed),
            started,
            &[SPLIT_FILE.into(), USERS_FILE.into(), ITEMS_FILE.into()],
            notes,
        )?;
        Ok(true)
    }

    /// The ingested corpus, re-read from the dataset and the saved split.
    pub fn corpus(&mut self) -> Result<Arc<Corpus>> {
        if let Some(c) = &self.corpus {
            return Ok(c.clone());
        }
        let (split_path, _) = self.require("ingest", SPLIT_FILE)?;
        let (full, hash) = self.load_full()?;
        if self.manifest.dataset_sha256.as_deref() != Some(hash.as_str()) {
            return Err(Error::Data(format!(
                "dataset {} changed since ingest; run ingest again",
                self.cfg.dataset_path()?.display()
            )));
        }
        let f = std::fs::File::open(&split_path).map_err(|e| Error::io(&split_path, e))?;
        let sp = Split::read_manifest(&full, BufReader::new(f))?;
        let c = Arc::new(Corpus { full, split: sp });
        self.corpus = Some(c.clone());
        Ok(c)
    }

    fn split_hash(&self) -> Result<String> {
        Ok(self.require("ingest", SPLIT_FILE)?.1)
    }

    fn train_notes(report: &TrainReport) -> BTreeMap<String, String> {
        let mut n = BTreeMap::new();
        n.insert("epochs_run".into(), report.epochs_run.to_string());
        n.insert("best_epoch".into(), report.best_epoch.to_string());
        n.insert("stopped_early".into(), report.stopped_early.to_string());
        if let Some(v) = report.best_val_loss() {
            n.insert("best_val_loss".into(), format!("{v:.6}"));
        }
        n
    }

    /// Trains one single-space representation. Local ones need the mined triplets.
    pub fn train_representation(&mut self, r: Representation) -> Result<bool> {
        let stage = stage_of(r);
        let seed = derive_seed(self.seed(), &r.to_string());
        let mut key = StageKey::new(&stage)
            .text(&self.cfg.section(&["train.", "dim"]))
            .with("seed", seed)
            .with("split", self.split_hash()?);
        if r.source() == crate::towers::SourceKind::Local {
            key = key.with("triplets", self.require("mine", TRIPLETS_FILE)?.1);
        }
        let key = key.finish();
        if self.skip(&stage, &key) {
            return Ok(false);
        }
        let started = Instant::now();
        let corpus = self.corpus()?;
        let mut cfg = self.cfg.train_config()?;
        cfg.seed = seed;
        let (model, report) = match r.source() {
            crate::towers::SourceKind::Global => train_global(&corpus.split.train, r.loss(), &cfg)?,
            crate::towers::SourceKind::Local => {
                let sets = read_triplet_sets(&self.require("mine", TRIPLETS_FILE)?.0)?;
                train_local(&corpus.split.train, &sets, r.loss(), &cfg, None)?
            }
        };
        self.ensure_dir("models")?;
        let rel = model_file(r);
        model.save(&self.path(&rel), Some(&cfg))?;
        self.record(&stage, key, Some(seed), started, &[rel], Self::train_notes(&report))?;
        Ok(true)
    }

    pub fn load_representation(&self, r: Representation) -> Result<RepresentationModel<f32>> {
        RepresentationModel::load(&self.require(&stage_of(r), &model_file(r))?.0)
    }

    /// Clusters the GD item vectors.
    pub fn build_index(&mut self) -> Result<bool> {
        let (gd_path, gd_hash) = self.require(&stage_of(Representation::GD), &model_file(Representation::GD))?;
        let seed = derive_seed(self.seed(), "index");
        let key = StageKey::new("index")
            .text(&self.cfg.section(&["clusters", "kmeans."]))
            .with("seed", seed)
            .with("GD", &gd_hash)
            .finish();
        if self.skip("index", &key) {
            return Ok(false);
        }
        let started = Instant::now();
        let gd = RepresentationModel::load(&gd_path)?;
        let index = build_index_from_vectors(
            &gd.item_embeddings(),
            self.cfg.clusters()?,
            &gd.tag(),
            seed,
            &self.cfg.kmeans_config()?,
        )?;
        self.ensure_dir("index")?;
        index.save(&self.path(INDEX_FILE))?;
        let sizes: Vec<String> = index.inverted_lists.iter().map(|l| l.len().to_string()).collect();
        let notes = [("list_sizes".to_string(), sizes.join(","))].into_iter().collect();
        self.record("index", key, Some(seed), started, &[INDEX_FILE.into()], notes)?;
        Ok(true)
    }

    pub fn load_index(&self) -> Result<ClusterIndex> {
        ClusterIndex::load(&self.require("index", INDEX_FILE)?.0)
    }

    /// Mines local intra and inter triplets around each user's candidate clusters.
    pub fn mine(&mut self) -> Result<bool> {
        let (gd_path, gd_hash) = self.require(&stage_of(Representation::GD), &model_file(Representation::GD))?;
        let (_, index_hash) = self.require("index", INDEX_FILE)?;
        let seed = derive_seed(self.seed(), "mine");
        let key = StageKey::new("mine")
            .text(&self.cfg.section(&["mining."]))
            .with("seed", seed)
            .with("GD", &gd_hash)
            .with("index", &index_hash)
            .with("split", self.split_hash()?)
            .finish();
        if self.skip("mine", &key) {
            return Ok(false);
        }
        let started = Instant::now();
        let corpus = self.corpus()?;
        let gd = RepresentationModel::load(&gd_path)?;
        let index = self.load_index()?;
        let sets = mine_local_triplets(&gd, &index, &corpus.split.train, &self.cfg.mining_config()?, seed)?;
        if sets.is_empty() {
            return Err(Error::Data("local mining produced no triplets".into()));
        }
        self.ensure_dir("local")?;
        write_triplet_sets(&self.path(TRIPLETS_FILE), &sets)?;
        let notes = [
            ("intra", sets.intra.len()),
            ("inter", sets.inter.len()),
            ("skipped_users", sets.skipped_users),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        self.record("mine", key, Some(seed), started, &[TRIPLETS_FILE.into()], notes)?;
        Ok(true)
    }

    fn load_triplets(&self) -> Result<LocalTripletSets> {
        read_triplet_sets(&self.require("mine", TRIPLETS_FILE)?.0)
    }

    /// Trains the attention of one configuration over its frozen channels.
    pub fn attend(&mut self, a: Fusion) -> Result<bool> {
        let stage = attend_stage(a);
        let seed = derive_seed(self.seed(), &a.to_string());
        let mut key = StageKey::new(&stage)
            .text(&self.cfg.section(&["train."]))
            .with("seed", seed)
            .with("split", self.split_hash()?)
            .with("triplets", self.require("mine", TRIPLETS_FILE)?.1);
        let mut refs = Vec::new();
        for &r in a.channels() {
            let (path, hash) = self.require(&stage_of(r), &model_file(r))?;
            key = key.with(&r.to_string(), &hash);
            refs.push((r, path, hash));
        }
        let key = key.finish();
        if self.skip(&stage, &key) {
            return Ok(false);
        }
        let started = Instant::now();
        let corpus = self.corpus()?;
        let channels = refs
            .iter()
            .map(|(_, p, _)| RepresentationModel::load(p).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        let sets = self.load_triplets()?;
        let global: Vec<Triplet> =
            sample_global_triplets(&corpus.split.train, 1, derive_seed(seed, "global-triplets"))?.collect();
        let mut cfg = self.cfg.train_config()?;
        cfg.seed = seed;
        let (model, report) = train_attention(
            &corpus.split.train,
            channels,
            &[&global, &sets.intra, &sets.inter],
            a.loss(),
            &cfg,
        )?;
        self.ensure_dir("attention")?;
        let rel = attention_file(a);
        let channel_refs: Vec<ChannelRef> = refs
            .into_iter()
            .map(|(r, _, sha256)| ChannelRef {
                tag: r.to_string(),
                path: PathBuf::from("..").join(model_file(r)),
                sha256,
            })
            .collect();
        model.save(&self.path(&rel), &channel_refs)?;
        self.record(&stage, key, Some(seed), started, &[rel], Self::train_notes(&report))?;
        Ok(true)
    }

    pub fn load_attention(&self, a: Fusion) -> Result<AttentionModel> {
        AttentionModel::load(&self.require(&attend_stage(a), &attention_file(a))?.0)
    }

    pub fn load_model(&self, tag: ModelTag) -> Result<LoadedModel> {
        Ok(match tag {
            ModelTag::Single(r) => LoadedModel::Single(SingleSpace::new(&self.load_representation(r)?)),
            ModelTag::Attention(a) => LoadedModel::Attention(self.load_attention(a)?),
        })
    }

    fn model_hash(&self, tag: ModelTag) -> Result<String> {
        Ok(match tag {
            ModelTag::Single(r) => self.require(&stage_of(r), &model_file(r))?.1,
            ModelTag::Attention(a) => self.require(&attend_stage(a), &attention_file(a))?.1,
        })
    }

    /// Every configured model, representations first.
    pub fn model_tags(&self) -> Result<Vec<ModelTag>> {
        let mut tags: Vec<ModelTag> = self.cfg.representations()?.into_iter().map(ModelTag::Single).collect();
        tags.extend(self.cfg.fusions()?.into_iter().map(ModelTag::Attention));
        Ok(tags)
    }

    /// All training stages in dependency order.
    pub fn train_all(&mut self) -> Result<()> {
        self.ingest()?;
        let reps = self.cfg.representations()?;
        for &r in reps.iter().filter(|r| r.source() == crate::towers::SourceKind::Global) {
            self.train_representation(r)?;
        }
        if reps.contains(&Representation::GD) {
            self.build_index()?;
        }
        let locals: Vec<Representation> = reps
            .iter()
            .copied()
            .filter(|r| r.source() == crate::towers::SourceKind::Local)
            .collect();
        if !locals.is_empty() || !self.cfg.fusions()?.is_empty() {
            self.mine()?;
        }
        for r in locals {
            self.train_representation(r)?;
        }
        for a in self.cfg.fusions()? {
            self.attend(a)?;
        }
        Ok(())
    }

    /// Writes the top-N table at the configured K, the candidate-coverage curve and, for
    /// leave-one-out splits, the HR/NDCG table.
    pub fn evaluate(&mut self) -> Result<MetricsRecord> {
        let tags = self.model_tags()?;
        let mut key = StageKey::new("evaluate")
            .text(&self.cfg.section(&["eval.", "candidate_clusters"]))
            .with("split", self.split_hash()?)
            .with("index", self.require("index", INDEX_FILE)?.1);
        for &t in &tags {
            key = key.with(&t.to_string(), self.model_hash(t)?);
        }
        let key = key.finish();
        let loo = self.cfg.split_protocol()? == SplitProtocol::LeaveOneOut;
        if self.skip("evaluate", &key) {
            if let Some(m) = &self.manifest.metrics {
                return Ok(m.clone());
            }
        }
        let started = Instant::now();
        let corpus = self.corpus()?;
        let index = self.load_index()?;
        let gd_users = self.load_representation(Representation::GD)?.user_embeddings();
        let k = self.cfg.candidate_clusters()?;
        let ns = self.cfg.eval_ns()?;
        let cov_ks: Vec<usize> = self
            .cfg
            .coverage_ks()?
            .into_iter()
            .filter(|&c| c <= index.cluster_count())
            .collect();
        let cov_n = self.cfg.coverage_n()?;
        let (negatives, top) = self.cfg.loo_settings()?;
        let mut record = MetricsRecord::default();
        for &tag in &tags {
            let model = self.load_model(tag)?;
            let scorer = model.scorer();
            let name = tag.to_string();
            let rec = Recommender::new(&index, &gd_users, scorer, Some(&corpus.split.train))?;
            record.topn.extend(evaluate_topn(&corpus.split.test, &rec, k, &ns, &name)?);
            if !cov_ks.is_empty() {
                let curve = coverage_recall(&index, &gd_users, scorer, &corpus.split.train, &corpus.split.test, &cov_ks, cov_n)?;
                record.coverage.extend(curve.into_iter().map(|(k, recall)| CoveragePoint {
                    tag: name.clone(),
                    k,
                    n: cov_n,
                    recall,
                }));
            }
            if loo {
                let seed = derive_seed(self.seed(), "loo");
                record.loo.push(evaluate_loo(&corpus.split.test, &corpus.full, scorer, negatives, top, seed, &name)?);
            }
        }
        self.ensure_dir("eval")?;
        let mut artifacts = vec![TOPN_FILE.to_string(), COVERAGE_FILE.to_string()];
        write_text(&self.path(TOPN_FILE), &topn_table(&record.topn))?;
        write_text(&self.path(COVERAGE_FILE), &coverage_table(&record.coverage))?;
        if loo {
            write_text(&self.path(LOO_FILE), &loo_table(&record.loo))?;
            artifacts.push(LOO_FILE.into());
        }
        self.manifest.metrics = Some(record.clone());
        self.record("evaluate", key, None, started, &artifacts, BTreeMap::new())?;
        Ok(record)
    }

    /// Writes top-N recommendations for `users` (raw ids; every user when `None`) from the
    /// configured model, returning the output path.
    pub fn recommend(&mut self, users: Option<&[String]>) -> Result<PathBuf> {
        let tag = self
            .cfg
            .recommend_model()?
            .ok_or_else(|| Error::Config("no model to recommend from".into()))?;
        let started = Instant::now();
        let corpus = self.corpus()?;
        let train = &corpus.split.train;
        let ids: Vec<u32> = match users {
            None => (0..train.user_count() as u32).collect(),
            Some(raw) => raw
                .iter()
                .map(|u| {
                    train
                        .users()
                        .get(u)
                        .ok_or_else(|| Error::Data(format!("unknown user `{u}`")))
                })
                .collect::<Result<_>>()?,
        };
        let mut user_list = String::new();
        for u in &ids {
            let _ = writeln!(user_list, "{u}");
        }
        let key = StageKey::new("recommend")
            .text(&self.cfg.section(&["recommend.", "candidate_clusters"]))
            .with("model", self.model_hash(tag)?)
            .with("index", self.require("index", INDEX_FILE)?.1)
            .with("split", self.split_hash()?)
            .with("users", crate::digest::sha256_hex(user_list.as_bytes()))
            .finish();
        let rel = recommend_file(tag);
        if self.skip("recommend", &key) {
            return Ok(self.path(&rel));
        }
        let index = self.load_index()?;
        let gd_users = self.load_representation(Representation::GD)?.user_embeddings();
        let model = self.load_model(tag)?;
        let rec = Recommender::new(&index, &gd_users, model.scorer(), Some(train))?;
        let cfg = RecommendConfig::new(self.cfg.candidate_clusters()?, self.cfg.recommend_n()?, model.scorer().loss_kind());
        let lists = rec.recommend_all(&ids, &cfg)?;
        self.ensure_dir("recommend")?;
        let path = self.path(&rel);
        let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(f);
        write_recommendations(
            &mut w,
            &lists,
            |u| train.users().name(u).to_string(),
            |i| train.items().name(i).to_string(),
        )?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        let notes = [("model".to_string(), tag.to_string()), ("users".to_string(), ids.len().to_string())]
            .into_iter()
            .collect();
        self.record("recommend", key, None, started, &[rel], notes)?;
        Ok(path)
    }

    /// Human-readable summary of the stages and metrics recorded so far.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "run directory: {}", self.out.display());
        let _ = writeln!(s, "seed: {}", self.manifest.seed);
        if let Some(h) = &self.manifest.dataset_sha256 {
            let _ = writeln!(s, "dataset sha256: {h}");
        }
        let _ = writeln!(s, "\nstage\tseconds\tnotes");
        for (name, rec) in &self.manifest.stages {
            let notes: Vec<String> = rec.notes.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(s, "{name}\t{:.1}\t{}", rec.seconds, notes.join(" "));
        }
        if let Some(m) = &self.manifest.metrics {
            if !m.topn.is_empty() {
                let _ = write!(s, "\n{}", topn_table(&m.topn));
            }
            if !m.coverage.is_empty() {
                let _ = write!(s, "\n{}", coverage_table(&m.coverage));
            }
            if !m.loo.is_empty() {
                let _ = write!(s, "\n{}", loo_table(&m.loo));
            }
        }
        s
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn topn_table(rows: &[EvalResult]) -> String {
    let mut s = format!("{}\n", EvalResult::TSV_HEADER);
    for r in rows {
        s.push_str(&r.tsv_row());
        s.push('\n');
    }
    s
}

pub fn coverage_table(points: &[CoveragePoint]) -> String {
    let mut s = String::from("tag\tK\tN\trecall\n");
    for p in points {
        let _ = writeln!(s, "{}\t{}\t{}\t{:.6}", p.tag, p.k, p.n, p.recall);
    }
    s
}

pub fn loo_table(rows: &[LooResult]) -> String {
    let mut s = String::from("tag\tusers\tnegatives\ttop\thr\tndcg\n");
    for r in rows {
        let _ = writeln!(s, "{}\t{}\t{}\t{}\t{:.6}\t{:.6}", r.tag, r.users, r.negatives, r.top_k, r.hr, r.ndcg);
    }
    s
}
