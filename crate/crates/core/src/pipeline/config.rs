use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::clusterindex::{MiningConfig, MiningMode};
use crate::corpus::{Delimiter, DelimiterSpec, SplitProtocol};
use crate::error::{Error, Result};
use crate::towers::{LossKind, SourceKind, TowerArch, TrainConfig};

/// One of the four single-space representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Representation {
    GD,
    GP,
    LD,
    LP,
}

impl Representation {
    pub const ALL: [Representation; 4] = [Self::GD, Self::GP, Self::LD, Self::LP];

    pub fn source(self) -> SourceKind {
        match self {
            Self::GD | Self::GP => SourceKind::Global,
            Self::LD | Self::LP => SourceKind::Local,
        }
    }

    pub fn loss(self) -> LossKind {
        match self {
            Self::GD | Self::LD => LossKind::Distance,
            Self::GP | Self::LP => LossKind::Product,
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "GD" => Ok(Self::GD),
            "GP" => Ok(Self::GP),
            "LD" => Ok(Self::LD),
            "LP" => Ok(Self::LP),
            other => Err(Error::Config(format!("unknown representation `{other}`"))),
        }
    }
}

/// Attention configurations over fixed channel sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Fusion {
    GAD,
    GAP,
    LAD,
    LAP,
    AD,
    AP,
}

impl Fusion {
    pub const ALL: [Fusion; 6] = [Self::GAD, Self::GAP, Self::LAD, Self::LAP, Self::AD, Self::AP];

    /// Channels in their fixed order.
    pub fn channels(self) -> &'static [Representation] {
        use Representation::*;
        match self {
            Self::GAD | Self::GAP => &[GD, GP],
            Self::LAD | Self::LAP => &[LD, LP],
            Self::AD | Self::AP => &[GD, GP, LD, LP],
        }
    }

    pub fn loss(self) -> LossKind {
        match self {
            Self::GAD | Self::LAD | Self::AD => LossKind::Distance,
            Self::GAP | Self::LAP | Self::AP => LossKind::Product,
        }
    }
}

impl fmt::Display for Fusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Fusion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown attention configuration `{s}`")))
    }
}

/// A model the recommend and evaluate stages can serve from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelTag {
    Single(Representation),
    Attention(Fusion),
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Single(r) => r.fmt(f),
            Self::Attention(a) => a.fmt(f),
        }
    }
}

impl FromStr for ModelTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.parse()
            .map(Self::Single)
            .or_else(|_| s.parse().map(Self::Attention))
            .map_err(|_| Error::Config(format!("unknown model `{s}`")))
    }
}

/// Every recognised key with its default and a one-line description. Parsing rejects
/// anything else.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("dataset.path", "", "interaction file"),
    ("dataset.delimiter", "tab", "tab, comma, whitespace or a single character"),
    ("dataset.columns", "user,item,rating,timestamp", "column roles in file order; `_` skips a column"),
    ("dataset.header_lines", "0", "lines skipped at the top of the file"),
    ("dataset.min_interactions", "0", "drop users with fewer interactions before splitting"),
    ("split.protocol", "random-half", "random-half, per-user-holdout:<n> or leave-one-out"),
    ("out", "run", "output directory"),
    ("seed", "0", "global seed; every stage derives its own"),
    ("dim", "64", "representation width d (32, 64 or 128)"),
    ("clusters", "20", "k-means clusters M"),
    ("kmeans.max_iters", "50", "Lloyd iteration cap"),
    ("kmeans.tolerance", "1e-4", "relative centroid movement that stops Lloyd iterations"),
    ("candidate_clusters", "2", "clusters K searched per query"),
    ("mining.j", "5", "candidate clusters per user when mining local triplets"),
    ("mining.mode", "sampled", "sampled or exhaustive"),
    ("mining.draws_per_positive", "10", "candidate negatives drawn per positive in sampled mode"),
    ("representations", "GD,GP,LD,LP", "single-space models to train"),
    ("attention", "AD,AP", "attention configurations to train (may be empty)"),
    ("eval.n", "5,10,15,20,25,30", "top-N list lengths"),
    ("eval.coverage_k", "1,2,3,4,5", "K values of the candidate-coverage curve"),
    ("eval.coverage_n", "20", "list length of the candidate-coverage curve"),
    ("eval.loo_negatives", "99", "sampled negatives per user in leave-one-out evaluation"),
    ("eval.loo_top", "10", "cutoff of leave-one-out HR and NDCG"),
    ("recommend.model", "", "model served by `recommend`; defaults to the first attention configuration"),
    ("recommend.n", "15", "recommendations per user"),
    ("train.batch_size", "512", "triplets per step"),
    ("train.max_epochs", "200", "epoch cap"),
    ("train.learning_rate", "0.00017", "Adam step size"),
    ("train.margin", "0.5", "distance-loss margin"),
    ("train.patience", "10", "epochs without validation improvement before stopping"),
    ("train.l2_reg", "1e-6", "pre-normalization output penalty (product loss)"),
    ("train.validation_fraction", "0.05", "held-out share for early stopping"),
    ("train.hard_negative_draws", "5", "negative redraws while a global distance triplet has zero loss"),
];

fn default_of(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(k, _, _)| *k == key).map(|&(_, v, _)| v)
}

/// Experiment configuration. Parsed from flat `key = value` text; `#` starts a comment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    /// Directory relative paths in the file resolve against.
    base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            values: KEYS.iter().map(|&(k, v, _)| (k.to_string(), v.to_string())).collect(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{raw}`", idx + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", idx + 1, strip_prefix(&e))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths in it resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if default_of(key).is_none() {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{pair}` is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = dir.into();
        self
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).expect("every key has a default")
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key);
        v.parse()
            .map_err(|_| Error::Config(format!("`{key}` has invalid value `{v}`")))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        self.get(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::Config(format!("`{key}` has invalid entry `{s}`")))
            })
            .collect()
    }

    /// All keys with their effective values, sorted.
    pub fn pairs(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// Canonical text form; parsing it yields the same configuration.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Checks every typed accessor and the cross-key invariants.
    pub fn validate(&self) -> Result<()> {
        self.delimiter_spec()?;
        self.split_protocol()?;
        self.seed()?;
        self.train_config()?;
        self.mining_config()?;
        self.coverage_ks()?;
        self.loo_settings()?;
        self.recommend_model()?;
        let dim = self.dim()?;
        if ![32, 64, 128].contains(&dim) {
            log::warn!("dim {dim} is outside the usual 32/64/128");
        }
        let m = self.clusters()?;
        if m == 0 {
            return Err(Error::Config("clusters must be at least 1".into()));
        }
        let k = self.candidate_clusters()?;
        if k == 0 || k > m {
            return Err(Error::Config(format!("candidate_clusters must be in 1..={m}, got {k}")));
        }
        let ns = self.eval_ns()?;
        if ns.is_empty() || ns.contains(&0) {
            return Err(Error::Config("eval.n needs positive list lengths".into()));
        }
        let reps = self.representations()?;
        let needs_index = reps.iter().any(|r| r.source() == SourceKind::Local);
        if needs_index && !reps.contains(&Representation::GD) {
            return Err(Error::Config("local representations are mined in the GD space; add GD".into()));
        }
        for a in self.fusions()? {
            if let Some(missing) = a.channels().iter().find(|c| !reps.contains(c)) {
                return Err(Error::Config(format!("{a} needs representation {missing}, which is not trained")));
            }
        }
        Ok(())
    }

    pub fn dataset_path(&self) -> Result<PathBuf> {
        let p = self.get("dataset.path");
        if p.is_empty() {
            return Err(Error::Config("dataset.path is not set".into()));
        }
        Ok(self.resolve(p))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(self.get("out"))
    }

    fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn delimiter_spec(&self) -> Result<DelimiterSpec> {
        let delimiter: Delimiter = self.get("dataset.delimiter").parse()?;
        DelimiterSpec::from_columns(delimiter, self.get("dataset.columns"), self.parsed("dataset.header_lines")?)
    }

    pub fn min_interactions(&self) -> Result<usize> {
        self.parsed("dataset.min_interactions")
    }

    pub fn split_protocol(&self) -> Result<SplitProtocol> {
        let v = self.get("split.protocol");
        match v {
            "random-half" => Ok(SplitProtocol::RandomHalf),
            "leave-one-out" => Ok(SplitProtocol::LeaveOneOut),
            other => match other.strip_prefix("per-user-holdout:").map(str::parse) {
                Some(Ok(n_test)) if n_test > 0 => Ok(SplitProtocol::PerUserHoldout { n_test }),
                _ => Err(Error::Config(format!("unknown split protocol `{other}`"))),
            },
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.parsed("seed")
    }

    pub fn dim(&self) -> Result<usize> {
        self.parsed("dim")
    }

    pub fn clusters(&self) -> Result<usize> {
        self.parsed("clusters")
    }

    pub fn kmeans_config(&self) -> Result<crate::clusterindex::KMeansConfig> {
        Ok(crate::clusterindex::KMeansConfig {
            max_iters: self.parsed("kmeans.max_iters")?,
            tolerance: self.parsed("kmeans.tolerance")?,
        })
    }

    pub fn candidate_clusters(&self) -> Result<usize> {
        self.parsed("candidate_clusters")
    }

    pub fn mining_config(&self) -> Result<MiningConfig> {
        let mode = match self.get("mining.mode") {
            "exhaustive" => MiningMode::Exhaustive,
            "sampled" => {
                let draws: usize = self.parsed("mining.draws_per_positive")?;
                if draws == 0 {
                    return Err(Error::Config("mining.draws_per_positive must be at least 1".into()));
                }
                MiningMode::Sampled { draws_per_positive: draws }
            }
            other => return Err(Error::Config(format!("unknown mining mode `{other}`"))),
        };
        let j: usize = self.parsed("mining.j")?;
        if j == 0 {
            return Err(Error::Config("mining.j must be at least 1".into()));
        }
        Ok(MiningConfig { j, mode })
    }

    /// Requested representations, deduplicated, in canonical order.
    pub fn representations(&self) -> Result<Vec<Representation>> {
        let mut v: Vec<Representation> = self.list("representations")?;
        v.sort();
        v.dedup();
        Ok(v)
    }

    pub fn fusions(&self) -> Result<Vec<Fusion>> {
        let mut v: Vec<Fusion> = self.list("attention")?;
        v.sort();
        v.dedup();
        Ok(v)
    }

    pub fn eval_ns(&self) -> Result<Vec<usize>> {
        self.list("eval.n")
    }

    pub fn coverage_ks(&self) -> Result<Vec<usize>> {
        let ks: Vec<usize> = self.list("eval.coverage_k")?;
        if let Some(&bad) = ks.iter().find(|&&k| k == 0) {
            return Err(Error::Config(format!("eval.coverage_k entry {bad} must be at least 1")));
        }
        Ok(ks)
    }

    pub fn coverage_n(&self) -> Result<usize> {
        self.parsed("eval.coverage_n")
    }

    /// `(negatives, cutoff)` of the leave-one-out protocol.
    pub fn loo_settings(&self) -> Result<(usize, usize)> {
        let negatives: usize = self.parsed("eval.loo_negatives")?;
        let top: usize = self.parsed("eval.loo_top")?;
        if negatives == 0 || top == 0 {
            return Err(Error::Config("leave-one-out needs at least one negative and a positive cutoff".into()));
        }
        Ok((negatives, top))
    }

    /// The model `recommend` serves: `recommend.model` when set, else the first attention
    /// configuration, else the first representation.
    pub fn recommend_model(&self) -> Result<Option<ModelTag>> {
        let v = self.get("recommend.model");
        if !v.is_empty() {
            return v.parse().map(Some);
        }
        if let Some(&a) = self.fusions()?.first() {
            return Ok(Some(ModelTag::Attention(a)));
        }
        Ok(self.representations()?.first().map(|&r| ModelTag::Single(r)))
    }

    pub fn recommend_n(&self) -> Result<usize> {
        self.parsed("recommend.n")
    }

    /// Training hyperparameters; `seed` is left at the global seed and replaced per stage.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            batch_size: self.parsed("train.batch_size")?,
            max_epochs: self.parsed("train.max_epochs")?,
            margin: self.parsed("train.margin")?,
            learning_rate: self.parsed("train.learning_rate")?,
            patience: self.parsed("train.patience")?,
            l2_reg: self.parsed("train.l2_reg")?,
            validation_fraction: self.parsed("train.validation_fraction")?,
            hard_negative_draws: self.parsed("train.hard_negative_draws")?,
            seed: self.seed()?,
            arch: TowerArch::uniform(self.dim()?),
        };
        cfg.validate().map_err(|e| Error::Config(strip_prefix(&e)))?;
        Ok(cfg)
    }

    /// Values of every key starting with one of `prefixes`, as sorted `key=value` lines.
    pub fn section(&self, prefixes: &[&str]) -> String {
        self.values
            .iter()
            .filter(|(k, _)| prefixes.iter().any(|p| k.starts_with(p)))
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) | Error::InvalidArgument(m) => m.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let back = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back.pairs(), cfg.pairs());
        assert_eq!(cfg.train_config().unwrap().learning_rate, 0.00017);
        assert_eq!(cfg.clusters().unwrap(), 20);
        assert_eq!(cfg.representations().unwrap(), Representation::ALL.to_vec());
    }

    #[test]
    fn unknown_key_is_a_config_error() {
        let err = RunConfig::parse("dataset.path = x\nlearning_rate = 0.1\n").unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("line 2") && m.contains("learning_rate")));
    }

    #[test]
    fn comments_blank_lines_and_overrides() {
        let mut cfg = RunConfig::parse("# experiment\n\nclusters = 10 # fewer\nrepresentations=GD\nattention=\n").unwrap();
        assert_eq!(cfg.clusters().unwrap(), 10);
        assert!(cfg.fusions().unwrap().is_empty());
        assert_eq!(cfg.recommend_model().unwrap(), Some(ModelTag::Single(Representation::GD)));
        cfg.set_pair("clusters=12").unwrap();
        assert_eq!(cfg.clusters().unwrap(), 12);
        assert!(cfg.set_pair("clusters").is_err());
        assert!(cfg.set_pair("nope=1").is_err());
    }

    #[test]
    fn attention_needs_its_channels() {
        let err = RunConfig::parse("representations = GD,GP,LP\nattention = AD\n").unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("LD")));
        RunConfig::parse("representations = GD,GP\nattention = GAD,GAP\n").unwrap();
        assert!(RunConfig::parse("representations = LD\nattention=\n").is_err());
    }

    #[test]
    fn typed_values_are_checked() {
        assert!(RunConfig::parse("clusters = many").is_err());
        assert!(RunConfig::parse("candidate_clusters = 21").is_err());
        assert!(RunConfig::parse("split.protocol = thirds").is_err());
        assert!(RunConfig::parse("train.margin = -1").is_err());
        assert!(RunConfig::parse("mining.mode = greedy").is_err());
        let cfg = RunConfig::parse("split.protocol = per-user-holdout:3").unwrap();
        assert_eq!(cfg.split_protocol().unwrap(), SplitProtocol::PerUserHoldout { n_test: 3 });
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let cfg = RunConfig::parse("dataset.path = data/u.data\nout = /tmp/x").unwrap().with_base_dir("/etc/exp");
        assert_eq!(cfg.dataset_path().unwrap(), PathBuf::from("/etc/exp/data/u.data"));
        assert_eq!(cfg.out_dir(), PathBuf::from("/tmp/x"));
    }

    #[test]
    fn tags_parse() {
        assert_eq!("LAP".parse::<ModelTag>().unwrap(), ModelTag::Attention(Fusion::LAP));
        assert_eq!("GP".parse::<ModelTag>().unwrap(), ModelTag::Single(Representation::GP));
        assert!("XD".parse::<ModelTag>().is_err());
        assert_eq!(Fusion::AD.channels().len(), 4);
        assert_eq!(Fusion::LAP.loss(), LossKind::Product);
    }
}
