use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::net::{AttentionNet, ChannelBatch};
use crate::corpus::{InteractionMatrix, Triplet};
use crate::digest::file_sha256;
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::tensornet::{dot, Container, Matrix, ParamTensor};
use crate::towers::{
    fit, hold_out, LossKind, RepresentationModel, SourceKind, TrainConfig, TrainReport, TripletObjective,
};

/// Blended user, positive and negative representations of one triplet and the channel
/// weights that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentiveTriple {
    pub user_blend: Vec<f64>,
    pub pos_blend: Vec<f64>,
    pub neg_blend: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Where a channel model was loaded from; recorded when the attention model is saved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelRef {
    pub tag: String,
    pub path: PathBuf,
    pub sha256: String,
}

/// Per-user quantities reused across all candidate items.
#[derive(Debug, Clone)]
pub struct UserContext {
    pub user: u32,
    /// `f^(r)(g^(r)(u))` per channel.
    transformed: Vec<Vec<f32>>,
}

/// Representation-level attention over a fixed, ordered list of frozen models.
#[derive(Debug, Clone)]
pub struct AttentionModel {
    pub net: AttentionNet<f32>,
    pub loss_kind: LossKind,
    channels: Vec<Arc<RepresentationModel<f32>>>,
    user_tables: Arc<Vec<Matrix<f32>>>,
    item_tables: Arc<Vec<Matrix<f32>>>,
    /// `f^(r)(g^(r)(i))` for every item; rebuilt by [`Self::refresh`].
    transformed_items: Arc<Vec<Matrix<f32>>>,
}

impl AttentionModel {
    pub fn new(channels: Vec<Arc<RepresentationModel<f32>>>, loss_kind: LossKind, seed: u64) -> Result<Self> {
        let dim = check_channels(&channels)?;
        let net = AttentionNet::new(channels.len(), dim, seed);
        Self::from_parts(channels, net, loss_kind)
    }

    pub fn from_parts(
        channels: Vec<Arc<RepresentationModel<f32>>>,
        net: AttentionNet<f32>,
        loss_kind: LossKind,
    ) -> Result<Self> {
        let dim = check_channels(&channels)?;
        if net.channel_count() != channels.len() || net.dim() != dim {
            return Err(Error::Shape(format!(
                "attention net has {} channels of width {}, models give {} of width {dim}",
                net.channel_count(),
                net.dim(),
                channels.len()
            )));
        }
        let user_tables = channels.iter().map(|c| c.user_embeddings()).collect();
        let item_tables = channels.iter().map(|c| c.item_embeddings()).collect();
        let mut model = Self {
            net,
            loss_kind,
            channels,
            user_tables: Arc::new(user_tables),
            item_tables: Arc::new(item_tables),
            transformed_items: Arc::new(Vec::new()),
        };
        model.refresh()?;
        Ok(model)
    }

    /// Recomputes the cached item transforms after the net changed.
    pub fn refresh(&mut self) -> Result<()> {
        let t = (0..self.channel_count())
            .map(|r| self.net.transform_rows(r, &self.item_tables[r]))
            .collect::<Result<Vec<_>>>()?;
        self.transformed_items = Arc::new(t);
        Ok(())
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn dim(&self) -> usize {
        self.net.dim()
    }

    pub fn user_count(&self) -> usize {
        self.user_tables[0].rows()
    }

    pub fn item_count(&self) -> usize {
        self.item_tables[0].rows()
    }

    pub fn channels(&self) -> &[Arc<RepresentationModel<f32>>] {
        &self.channels
    }

    pub fn channel_tags(&self) -> Vec<String> {
        self.channels.iter().map(|c| c.tag()).collect()
    }

    /// `AD`/`AP` over mixed channels, `GAD`/`GAP` over global ones, `LAD`/`LAP` over local.
    pub fn tag(&self) -> String {
        let all = |k| self.channels.iter().all(|c| c.source_kind == k);
        let prefix = if all(SourceKind::Global) {
            "GA"
        } else if all(SourceKind::Local) {
            "LA"
        } else {
            "A"
        };
        format!("{prefix}{}", self.loss_kind.letter())
    }

    /// `g^(r)(u)`
    pub fn user_vector(&self, r: usize, user: u32) -> &[f32] {
        self.user_tables[r].row(user as usize)
    }

    /// `g^(r)(i)`
    pub fn item_vector(&self, r: usize, item: u32) -> &[f32] {
        self.item_tables[r].row(item as usize)
    }

    pub fn channel_transform(&self, r: usize, vec: &[f32]) -> Result<Vec<f32>> {
        self.net.transform(r, vec)
    }

    fn check_user(&self, user: u32) -> Result<()> {
        if user as usize >= self.user_count() {
            return Err(Error::OutOfRange { index: user as usize, size: self.user_count() });
        }
        Ok(())
    }

    fn check_item(&self, item: u32) -> Result<()> {
        if item as usize >= self.item_count() {
            return Err(Error::OutOfRange { index: item as usize, size: self.item_count() });
        }
        Ok(())
    }

    pub fn user_context(&self, user: u32) -> Result<UserContext> {
        self.check_user(user)?;
        let transformed = (0..self.channel_count())
            .map(|r| self.net.transform(r, self.user_vector(r, user)))
            .collect::<Result<_>>()?;
        Ok(UserContext { user, transformed })
    }

    /// Softmax weights of `(user, item)`; `weights_into` must have one slot per channel.
    pub fn weights_into(&self, ctx: &UserContext, item: u32, weights_into: &mut [f64]) {
        let mut max = f64::NEG_INFINITY;
        for (r, w) in weights_into.iter_mut().enumerate() {
            *w = dot(&ctx.transformed[r], self.transformed_items[r].row(item as usize));
            max = max.max(*w);
        }
        let mut total = 0.0;
        for w in weights_into.iter_mut() {
            *w = (*w - max).exp();
            total += *w;
        }
        for w in weights_into.iter_mut() {
            *w /= total;
        }
    }

    pub fn attention_weights(&self, user: u32, item: u32) -> Result<Vec<f64>> {
        self.check_item(item)?;
        let ctx = self.user_context(user)?;
        let mut w = vec![0.0; self.channel_count()];
        self.weights_into(&ctx, item, &mut w);
        Ok(w)
    }

    /// Blends user and candidate item for scoring; the candidate takes the positive slot.
    pub fn blend_pair_into(
        &self,
        ctx: &UserContext,
        item: u32,
        weights: &mut [f64],
        user_blend: &mut [f64],
        item_blend: &mut [f64],
    ) {
        self.weights_into(ctx, item, weights);
        user_blend.iter_mut().for_each(|v| *v = 0.0);
        item_blend.iter_mut().for_each(|v| *v = 0.0);
        for (r, &a) in weights.iter().enumerate() {
            let u = self.user_vector(r, ctx.user);
            let i = self.item_vector(r, item);
            for j in 0..u.len() {
                user_blend[j] += a * u[j] as f64;
                item_blend[j] += a * i[j] as f64;
            }
        }
    }

    pub fn blend(&self, user: u32, pos: u32, neg: u32) -> Result<AttentiveTriple> {
        self.check_item(pos)?;
        self.check_item(neg)?;
        let ctx = self.user_context(user)?;
        let d = self.dim();
        let mut weights = vec![0.0; self.channel_count()];
        let mut user_blend = vec![0.0; d];
        let mut pos_blend = vec![0.0; d];
        self.blend_pair_into(&ctx, pos, &mut weights, &mut user_blend, &mut pos_blend);
        let mut neg_blend = vec![0.0; d];
        for (r, &a) in weights.iter().enumerate() {
            for (acc, &v) in neg_blend.iter_mut().zip(self.item_vector(r, neg)) {
                *acc += a * v as f64;
            }
        }
        Ok(AttentiveTriple {
            user_blend,
            pos_blend,
            neg_blend,
            weights,
        })
    }

    pub fn channel_batch(&self, batch: &[Triplet]) -> Result<ChannelBatch<f32>> {
        for t in batch {
            self.check_user(t.user)?;
            self.check_item(t.pos_item)?;
            self.check_item(t.neg_item)?;
        }
        let users: Vec<usize> = batch.iter().map(|t| t.user as usize).collect();
        let pos: Vec<usize> = batch.iter().map(|t| t.pos_item as usize).collect();
        let neg: Vec<usize> = batch.iter().map(|t| t.neg_item as usize).collect();
        Ok(ChannelBatch {
            users: self.user_tables.iter().map(|m| m.select_rows(&users)).collect(),
            pos: self.item_tables.iter().map(|m| m.select_rows(&pos)).collect(),
            neg: self.item_tables.iter().map(|m| m.select_rows(&neg)).collect(),
        })
    }

    /// Transform tensors plus the channel references and loss kind.
    pub fn to_container(&self, refs: &[ChannelRef]) -> Result<Container> {
        if refs.len() != self.channel_count() {
            return Err(Error::InvalidArgument(format!(
                "{} channel references for {} channels",
                refs.len(),
                self.channel_count()
            )));
        }
        let mut c = Container::new()
            .with_meta("kind", "attention")
            .with_meta("loss_kind", self.loss_kind)
            .with_meta("channels", self.channel_count())
            .with_meta("dim", self.dim());
        for (r, cr) in refs.iter().enumerate() {
            c = c
                .with_meta(&format!("channel{r}.tag"), &cr.tag)
                .with_meta(&format!("channel{r}.path"), cr.path.display())
                .with_meta(&format!("channel{r}.sha256"), &cr.sha256);
        }
        c.tensors = self.net.params().into_iter().cloned().collect();
        for t in &mut c.tensors {
            t.zero_grad();
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path, refs: &[ChannelRef]) -> Result<()> {
        self.to_container(refs)?.save(path)
    }

    /// Channel references recorded in a saved attention model.
    pub fn read_refs(c: &Container) -> Result<Vec<ChannelRef>> {
        if c.meta("kind")? != "attention" {
            return Err(Error::Format("container does not hold an attention model".into()));
        }
        let n: usize = c.parse_meta("channels")?;
        (0..n)
            .map(|r| {
                Ok(ChannelRef {
                    tag: c.meta(&format!("channel{r}.tag"))?.to_string(),
                    path: PathBuf::from(c.meta(&format!("channel{r}.path"))?),
                    sha256: c.meta(&format!("channel{r}.sha256"))?.to_string(),
                })
            })
            .collect()
    }

    pub fn from_container(c: Container, channels: Vec<Arc<RepresentationModel<f32>>>) -> Result<Self> {
        let refs = Self::read_refs(&c)?;
        if refs.len() != channels.len() {
            return Err(Error::Shape(format!(
                "attention model expects {} channels, {} given",
                refs.len(),
                channels.len()
            )));
        }
        let loss_kind = c.parse_meta("loss_kind")?;
        let mut tensors = c.tensors.into_iter();
        let mut transforms = Vec::with_capacity(refs.len());
        for r in 0..refs.len() {
            let (Some(weight), Some(bias)) = (tensors.next(), tensors.next()) else {
                return Err(Error::Format(format!("attention model lacks tensors of channel {r}")));
            };
            if weight.name != format!("attn{r}.weight") || bias.name != format!("attn{r}.bias") {
                return Err(Error::Format(format!("unexpected tensors `{}`, `{}`", weight.name, bias.name)));
            }
            transforms.push(crate::tensornet::Linear { weight, bias });
        }
        Self::from_parts(channels, AttentionNet { transforms }, loss_kind)
    }

    /// Loads the model and its channels from the recorded paths (relative paths resolve
    /// against the model file's directory), verifying each channel's hash.
    pub fn load(path: &Path) -> Result<Self> {
        let c = Container::load(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let channels = Self::read_refs(&c)?
            .iter()
            .map(|cr| {
                let p = if cr.path.is_absolute() { cr.path.clone() } else { base.join(&cr.path) };
                let hash = file_sha256(&p)?;
                if hash != cr.sha256 {
                    return Err(Error::Format(format!(
                        "channel {} at {} has hash {hash}, expected {}",
                        cr.tag,
                        p.display(),
                        cr.sha256
                    )));
                }
                Ok(Arc::new(RepresentationModel::load(&p)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_container(c, channels)
    }
}

fn check_channels(channels: &[Arc<RepresentationModel<f32>>]) -> Result<usize> {
    if channels.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "attention needs at least two channels, got {}",
            channels.len()
        )));
    }
    let first = &channels[0];
    for c in &channels[1..] {
        if c.dim() != first.dim() || c.user_count() != first.user_count() || c.item_count() != first.item_count() {
            return Err(Error::Shape(format!(
                "channel {} ({}x{} users/items, d={}) does not match {} ({}x{}, d={})",
                c.tag(),
                c.user_count(),
                c.item_count(),
                c.dim(),
                first.tag(),
                first.user_count(),
                first.item_count(),
                first.dim()
            )));
        }
    }
    Ok(first.dim())
}

impl TripletObjective for AttentionModel {
    fn tag(&self) -> String {
        AttentionModel::tag(self)
    }

    fn l2_weight(&self, _cfg: &TrainConfig) -> f64 {
        0.0
    }

    fn params(&self) -> Vec<&ParamTensor<f32>> {
        self.net.params()
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor<f32>> {
        self.net.params_mut()
    }

    fn batch_objective(&self, batch: &[Triplet], margin: f64, _l2: f64) -> Result<f64> {
        self.net.objective(&self.channel_batch(batch)?, self.loss_kind, margin)
    }

    fn accumulate_batch(&mut self, batch: &[Triplet], margin: f64, _l2: f64) -> Result<f64> {
        let cb = self.channel_batch(batch)?;
        self.net.accumulate(&cb, self.loss_kind, margin)
    }
}

/// Trains the channel transforms over frozen `channels` on triplets drawn uniformly from the
/// concatenation of `sources`. Each epoch is a fresh shuffle of the pool, cut to as many
/// triplets as `m` has positives.
pub fn train_attention(
    m: &InteractionMatrix,
    channels: Vec<Arc<RepresentationModel<f32>>>,
    sources: &[&[Triplet]],
    loss_kind: LossKind,
    cfg: &TrainConfig,
) -> Result<(AttentionModel, TrainReport)> {
    cfg.validate()?;
    let pool: Vec<Triplet> = sources.iter().flat_map(|s| s.iter().copied()).collect();
    if pool.is_empty() {
        return Err(Error::Data("no triplets to train the attention on".into()));
    }
    let mut model = AttentionModel::new(channels, loss_kind, derive_seed(cfg.seed, "attention-init"))?;
    if model.user_count() != m.user_count() || model.item_count() != m.item_count() {
        return Err(Error::Shape("channel models do not match the interaction matrix".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "attention-validation"));
    let (mut fit_pool, validation) = hold_out(&pool, cfg.validation_fraction, &mut rng);
    let epoch_len = m.len().clamp(1, fit_pool.len());
    let report = fit(
        &mut model,
        cfg,
        &validation,
        |rng| {
            fit_pool.shuffle(rng);
            Ok(fit_pool[..epoch_len].to_vec())
        },
        |_, _, _| Ok(0),
    )?;
    model.refresh()?;
    Ok((model, report))
}

