use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{triplet_loss, triplet_loss_grad, LossKind, TrainConfig};
use crate::corpus::Triplet;
use crate::error::{Error, Result};
use crate::tensornet::{Activation, Container, Matrix, ParamTensor, Scalar, Tower, TowerSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Global,
    Local,
}

impl std::fmt::Display for SourceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SourceKind::Global => "global",
            SourceKind::Local => "local",
        })
    }
}

impl std::str::FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(SourceKind::Global),
            "local" => Ok(SourceKind::Local),
            other => Err(Error::Format(format!("unknown source kind `{other}`"))),
        }
    }
}

/// Layer widths shared by the user and item towers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TowerArch {
    pub embed_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub dim: usize,
    pub activation: Activation,
}

impl TowerArch {
    pub fn uniform(dim: usize) -> Self {
        Self {
            embed_dim: dim,
            hidden_dims: vec![dim, dim],
            dim,
            activation: Activation::Relu,
        }
    }

    pub fn tower_spec(&self, vocab_size: usize) -> TowerSpec {
        TowerSpec {
            vocab_size,
            embed_dim: self.embed_dim,
            hidden_dims: self.hidden_dims.clone(),
            out_dim: self.dim,
            activation: self.activation,
        }
    }
}

impl Default for TowerArch {
    fn default() -> Self {
        Self::uniform(64)
    }
}

/// User tower and item tower projecting into one normalized `d`-dimensional space.
/// The towers share no parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationModel<T = f32> {
    pub user_tower: Tower<T>,
    pub item_tower: Tower<T>,
    pub loss_kind: LossKind,
    pub source_kind: SourceKind,
}

impl<T: Scalar> RepresentationModel<T> {
    pub fn new(
        user_count: usize,
        item_count: usize,
        arch: &TowerArch,
        loss_kind: LossKind,
        source_kind: SourceKind,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            user_tower: Tower::new("user", arch.tower_spec(user_count), &mut rng)?,
            item_tower: Tower::new("item", arch.tower_spec(item_count), &mut rng)?,
            loss_kind,
            source_kind,
        })
    }

    pub fn dim(&self) -> usize {
        self.user_tower.out_dim()
    }

    pub fn user_count(&self) -> usize {
        self.user_tower.spec().vocab_size
    }

    pub fn item_count(&self) -> usize {
        self.item_tower.spec().vocab_size
    }

    /// Short label such as `GD` or `LP`.
    pub fn tag(&self) -> String {
        let s = match self.source_kind {
            SourceKind::Global => 'G',
            SourceKind::Local => 'L',
        };
        format!("{s}{}", self.loss_kind.letter())
    }

    pub fn embed_user(&self, user: u32) -> Result<Vec<T>> {
        self.user_tower.forward_one(user as usize)
    }

    pub fn embed_item(&self, item: u32) -> Result<Vec<T>> {
        self.item_tower.forward_one(item as usize)
    }

    pub fn user_embeddings(&self) -> Matrix<T> {
        embed_all(&self.user_tower)
    }

    pub fn item_embeddings(&self) -> Matrix<T> {
        embed_all(&self.item_tower)
    }

    pub fn params(&self) -> Vec<&ParamTensor<T>> {
        let mut v = self.user_tower.params();
        v.extend(self.item_tower.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor<T>> {
        let mut v = self.user_tower.params_mut();
        v.extend(self.item_tower.params_mut());
        v
    }

    pub fn cast<U: Scalar>(&self) -> RepresentationModel<U> {
        RepresentationModel {
            user_tower: self.user_tower.cast(),
            item_tower: self.item_tower.cast(),
            loss_kind: self.loss_kind,
            source_kind: self.source_kind,
        }
    }

    /// Mean objective over `batch`: triplet loss plus `l2_reg` times the squared norms of
    /// the three pre-normalization outputs.
    pub fn batch_objective(&self, batch: &[Triplet], margin: f64, l2_reg: f64) -> Result<f64> {
        if batch.is_empty() {
            return Ok(0.0);
        }
        let (users, items) = batch_ids(batch);
        let (u, ucache) = self.user_tower.forward(&users)?;
        let (it, icache) = self.item_tower.forward(&items)?;
        let b = batch.len();
        let mut total = 0.0;
        for r in 0..b {
            total += triplet_loss(self.loss_kind, margin, u.row(r), it.row(r), it.row(b + r));
        }
        if l2_reg != 0.0 {
            let sq: f64 = ucache.prenorm_squared_norms().chain(icache.prenorm_squared_norms()).sum();
            total += l2_reg * sq;
        }
        Ok(total / b as f64)
    }

    /// Accumulates gradients of [`Self::batch_objective`] into the tower tensors and
    /// returns the objective value.
    pub fn accumulate_batch(&mut self, batch: &[Triplet], margin: f64, l2_reg: f64) -> Result<f64> {
        if batch.is_empty() {
            return Ok(0.0);
        }
        let (users, items) = batch_ids(batch);
        let (u, ucache) = self.user_tower.forward(&users)?;
        let (it, icache) = self.item_tower.forward(&items)?;
        let b = batch.len();
        let d = self.dim();
        let scale = 1.0 / b as f64;
        let mut gu = Matrix::zeros(b, d);
        let mut gi = Matrix::zeros(2 * b, d);
        let mut total = 0.0;
        {
            let (gpos, gneg) = gi.as_mut_slice().split_at_mut(b * d);
            for r in 0..b {
                total += triplet_loss_grad(
                    self.loss_kind,
                    margin,
                    u.row(r),
                    it.row(r),
                    it.row(b + r),
                    scale,
                    gu.row_mut(r),
                    &mut gpos[r * d..(r + 1) * d],
                    &mut gneg[r * d..(r + 1) * d],
                );
            }
        }
        if l2_reg != 0.0 {
            let sq: f64 = ucache.prenorm_squared_norms().chain(icache.prenorm_squared_norms()).sum();
            total += l2_reg * sq;
        }
        self.user_tower.backward(&ucache, &gu, l2_reg * scale)?;
        self.item_tower.backward(&icache, &gi, l2_reg * scale)?;
        Ok(total * scale)
    }
}

fn batch_ids(batch: &[Triplet]) -> (Vec<usize>, Vec<usize>) {
    let users = batch.iter().map(|t| t.user as usize).collect();
    let items = batch
        .iter()
        .map(|t| t.pos_item as usize)
        .chain(batch.iter().map(|t| t.neg_item as usize))
        .collect();
    (users, items)
}

fn embed_all<T: Scalar>(tower: &Tower<T>) -> Matrix<T> {
    let n = tower.spec().vocab_size;
    let mut out = Vec::with_capacity(n * tower.out_dim());
    let ids: Vec<usize> = (0..n).collect();
    for chunk in ids.chunks(1024) {
        out.extend(tower.infer(chunk).expect("ids in range").into_vec());
    }
    Matrix::from_vec(n, tower.out_dim(), out)
}

impl RepresentationModel<f32> {
    /// Parameters and a manifest recording kind, dimension and training setup.
    pub fn to_container(&self, cfg: Option<&TrainConfig>) -> Result<Container> {
        let spec_json = |s: &TowerSpec| serde_json::to_string(s).expect("serializable");
        let mut c = Container::new()
            .with_meta("kind", "representation")
            .with_meta("loss_kind", self.loss_kind)
            .with_meta("source_kind", self.source_kind)
            .with_meta("dim", self.dim())
            .with_meta("user_tower", spec_json(self.user_tower.spec()))
            .with_meta("item_tower", spec_json(self.item_tower.spec()));
        if let Some(cfg) = cfg {
            c = c
                .with_meta("train_config", serde_json::to_string(cfg).expect("serializable"))
                .with_meta("seed", cfg.seed);
        }
        c.tensors = self.params().into_iter().cloned().collect();
        for t in &mut c.tensors {
            t.zero_grad();
        }
        Ok(c)
    }

    pub fn from_container(mut c: Container) -> Result<Self> {
        if c.meta("kind")? != "representation" {
            return Err(Error::Format("container does not hold a representation model".into()));
        }
        let spec = |key: &str, c: &Container| -> Result<TowerSpec> {
            serde_json::from_str(c.meta(key)?)
                .map_err(|e| Error::Format(format!("bad `{key}` spec: {e}")))
        };
        let user_spec = spec("user_tower", &c)?;
        let item_spec = spec("item_tower", &c)?;
        let loss_kind = c.parse_meta("loss_kind")?;
        let source_kind = c.parse_meta("source_kind")?;
        let user_params = c.take_prefixed("user.");
        let item_params = c.take_prefixed("item.");
        let model = Self {
            user_tower: Tower::from_params(user_spec, user_params)?,
            item_tower: Tower::from_params(item_spec, item_params)?,
            loss_kind,
            source_kind,
        };
        if model.user_tower.out_dim() != model.item_tower.out_dim() {
            return Err(Error::Shape("user and item towers differ in output width".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path, cfg: Option<&TrainConfig>) -> Result<()> {
        self.to_container(cfg)?.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(Container::load(path)?)
    }
}
