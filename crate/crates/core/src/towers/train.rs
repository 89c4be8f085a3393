use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LossKind, RepresentationModel, SourceKind, TowerArch};
use crate::corpus::{draw_negative, sample_global_triplets_from, InteractionMatrix, Triplet};
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::tensornet::{AdamConfig, AdamState, ParamTensor, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Hinge margin of the distance loss.
    pub margin: f64,
    pub learning_rate: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Weight of the squared pre-normalization output norms; product loss only.
    pub l2_reg: f64,
    /// Fraction of the training triplets held out for early stopping.
    pub validation_fraction: f64,
    /// Negative draws per triplet until its loss is positive (global distance training).
    pub hard_negative_draws: usize,
    pub seed: u64,
    pub arch: TowerArch,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 512,
            max_epochs: 200,
            margin: 0.5,
            learning_rate: 0.00017,
            patience: 10,
            l2_reg: 1e-6,
            validation_fraction: 0.05,
            hard_negative_draws: 5,
            seed: 0,
            arch: TowerArch::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.margin <= 0.0 {
            return Err(Error::InvalidArgument(format!("margin must be positive, got {}", self.margin)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidArgument("validation fraction must be in [0, 1)".into()));
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }

    pub fn l2_for(&self, kind: LossKind) -> f64 {
        match kind {
            LossKind::Product => self.l2_reg,
            LossKind::Distance => 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub stopped_early: bool,
    /// Triplets whose best-of-N negative still had zero loss (distance loss only).
    pub unmined_triplets: usize,
}

impl TrainReport {
    pub fn best_val_loss(&self) -> Option<f64> {
        self.best_epoch
            .checked_sub(1)
            .and_then(|e| self.val_loss.get(e))
            .copied()
    }
}

/// A model trained by [`fit`]: a mean triplet objective over mini-batches whose gradients
/// land in `f32` parameter tensors.
pub trait TripletObjective: Clone {
    fn tag(&self) -> String;
    /// Weight of the output regularizer under `cfg`.
    fn l2_weight(&self, cfg: &TrainConfig) -> f64;
    fn params(&self) -> Vec<&ParamTensor<f32>>;
    fn params_mut(&mut self) -> Vec<&mut ParamTensor<f32>>;
    fn batch_objective(&self, batch: &[Triplet], margin: f64, l2: f64) -> Result<f64>;
    /// Accumulates gradients of the batch objective and returns its value.
    fn accumulate_batch(&mut self, batch: &[Triplet], margin: f64, l2: f64) -> Result<f64>;
}

impl TripletObjective for RepresentationModel<f32> {
    fn tag(&self) -> String {
        RepresentationModel::tag(self)
    }

    fn l2_weight(&self, cfg: &TrainConfig) -> f64 {
        cfg.l2_for(self.loss_kind)
    }

    fn params(&self) -> Vec<&ParamTensor<f32>> {
        RepresentationModel::params(self)
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor<f32>> {
        RepresentationModel::params_mut(self)
    }

    fn batch_objective(&self, batch: &[Triplet], margin: f64, l2: f64) -> Result<f64> {
        RepresentationModel::batch_objective(self, batch, margin, l2)
    }

    fn accumulate_batch(&mut self, batch: &[Triplet], margin: f64, l2: f64) -> Result<f64> {
        RepresentationModel::accumulate_batch(self, batch, margin, l2)
    }
}

/// Redraws negatives for global triplets whose loss is zero under the current model.
pub struct HardNegatives<'a> {
    pub universe: &'a InteractionMatrix,
    pub draws: usize,
}

impl HardNegatives<'_> {
    /// Returns how many triplets still have zero loss after the last draw.
    pub fn mine<T: Scalar>(
        &self,
        model: &RepresentationModel<T>,
        batch: &mut [Triplet],
        margin: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<usize> {
        // Product loss is strictly positive, so the first draw is always accepted.
        if model.loss_kind == LossKind::Product || self.draws <= 1 || batch.is_empty() {
            return Ok(0);
        }
        let users: Vec<usize> = batch.iter().map(|t| t.user as usize).collect();
        let pos: Vec<usize> = batch.iter().map(|t| t.pos_item as usize).collect();
        let u = model.user_tower.infer(&users)?;
        let p = model.item_tower.infer(&pos)?;
        let mut active: Vec<usize> = (0..batch.len()).collect();
        for attempt in 0..self.draws {
            let negs: Vec<usize> = active.iter().map(|&r| batch[r].neg_item as usize).collect();
            let n = model.item_tower.infer(&negs)?;
            let mut still_zero = Vec::new();
            for (k, &r) in active.iter().enumerate() {
                let l = super::distance_loss(u.row(r), p.row(r), n.row(k), margin);
                if l <= 0.0 {
                    still_zero.push(r);
                }
            }
            if still_zero.is_empty() || attempt + 1 == self.draws {
                return Ok(still_zero.len());
            }
            for &r in &still_zero {
                let t = &mut batch[r];
                if let Some(neg) = draw_negative(self.universe, t.user, rng) {
                    t.neg_item = neg;
                }
            }
            active = still_zero;
        }
        Ok(0)
    }
}

/// Mini-batch Adam over freshly generated epochs with early stopping on `validation`.
///
/// `prepare` may rewrite each batch before its gradient step and returns a count that is
/// summed into [`TrainReport::unmined_triplets`]. Returns the parameters of the epoch with
/// the lowest validation objective.
pub fn fit<M, F, P>(
    model: &mut M,
    cfg: &TrainConfig,
    validation: &[Triplet],
    mut next_epoch: F,
    mut prepare: P,
) -> Result<TrainReport>
where
    M: TripletObjective,
    F: FnMut(&mut ChaCha8Rng) -> Result<Vec<Triplet>>,
    P: FnMut(&M, &mut [Triplet], &mut ChaCha8Rng) -> Result<usize>,
{
    cfg.validate()?;
    let l2 = model.l2_weight(cfg);
    let mut adam = AdamState::new(cfg.adam(), &model.params());
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "epochs"));
    let mut report = TrainReport::default();
    let mut best: Option<(f64, M)> = None;
    let mut since_best = 0usize;
    let tag = model.tag();

    for epoch in 1..=cfg.max_epochs {
        let mut triplets = next_epoch(&mut rng)?;
        if triplets.is_empty() {
            return Err(Error::Data(format!("{tag}: epoch {epoch} produced no triplets")));
        }
        triplets.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, batch) in triplets.chunks_mut(cfg.batch_size).enumerate() {
            report.unmined_triplets += prepare(model, batch, &mut rng)?;
            let loss = model.accumulate_batch(batch, cfg.margin, l2)?;
            if !loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "{tag}: loss {loss} at epoch {epoch}, batch {b}"
                )));
            }
            adam.step(&mut model.params_mut()).map_err(|e| {
                Error::Diverged(format!("{tag}: epoch {epoch}, batch {b}: {e}"))
            })?;
            loss_sum += loss * batch.len() as f64;
        }
        let train_loss = loss_sum / triplets.len() as f64;
        let val_loss = if validation.is_empty() {
            train_loss
        } else {
            mean_objective(model, validation, cfg.margin, l2)?
        };
        if !val_loss.is_finite() {
            return Err(Error::Diverged(format!("{tag}: validation loss {val_loss} at epoch {epoch}")));
        }
        report.train_loss.push(train_loss);
        report.val_loss.push(val_loss);
        report.epochs_run = epoch;
        log::debug!("{tag} epoch {epoch}: train {train_loss:.5} val {val_loss:.5}");

        if best.as_ref().map_or(true, |(b, _)| val_loss < *b) {
            best = Some((val_loss, model.clone()));
            report.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                report.stopped_early = true;
                break;
            }
        }
    }
    if let Some((_, m)) = best {
        *model = m;
    }
    log::info!(
        "{tag}: {} epochs, best epoch {} (val {:.5})",
        report.epochs_run,
        report.best_epoch,
        report.best_val_loss().unwrap_or(f64::NAN)
    );
    Ok(report)
}

/// Mean objective over a triplet list, evaluated in chunks.
pub fn mean_objective<M: TripletObjective>(
    model: &M,
    triplets: &[Triplet],
    margin: f64,
    l2: f64,
) -> Result<f64> {
    if triplets.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for chunk in triplets.chunks(2048) {
        total += model.batch_objective(chunk, margin, l2)? * chunk.len() as f64;
    }
    Ok(total / triplets.len() as f64)
}

/// Splits off `fraction` of `items` (at least one when `fraction > 0` and more than one
/// item) as a held-out set.
pub(crate) fn hold_out<T: Clone>(items: &[T], fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<T>, Vec<T>) {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(rng);
    let mut n = (items.len() as f64 * fraction).round() as usize;
    if fraction > 0.0 && n == 0 && items.len() > 1 {
        n = 1;
    }
    let mut held: Vec<usize> = idx[..n].to_vec();
    let mut kept: Vec<usize> = idx[n..].to_vec();
    held.sort_unstable();
    kept.sort_unstable();
    (
        kept.into_iter().map(|i| items[i].clone()).collect(),
        held.into_iter().map(|i| items[i].clone()).collect(),
    )
}

/// Trains a global model on `(u, i+, i-)` triplets with uniformly drawn negatives,
/// resampled every epoch; one epoch visits every training positive once.
pub fn train_global(
    m: &InteractionMatrix,
    loss_kind: LossKind,
    cfg: &TrainConfig,
) -> Result<(RepresentationModel<f32>, TrainReport)> {
    cfg.validate()?;
    if m.is_empty() {
        return Err(Error::Data("cannot train on an empty interaction matrix".into()));
    }
    let mut split_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "validation"));
    let (fit_pos, val_pos) = hold_out(m.interactions(), cfg.validation_fraction, &mut split_rng);
    let fit_matrix = m.with_interactions(fit_pos)?;
    let validation: Vec<Triplet> = val_pos
        .iter()
        .filter_map(|it| {
            draw_negative(m, it.user, &mut split_rng).map(|n| Triplet::new(it.user, it.item, n))
        })
        .collect();

    let hard = HardNegatives {
        universe: m,
        draws: cfg.hard_negative_draws,
    };
    let margin = cfg.margin;
    let mut model = RepresentationModel::new(
        m.user_count(),
        m.item_count(),
        &cfg.arch,
        loss_kind,
        SourceKind::Global,
        derive_seed(cfg.seed, "init"),
    )?;
    let report = fit(
        &mut model,
        cfg,
        &validation,
        |rng| {
            let seed = rand::Rng::gen(rng);
            Ok(sample_global_triplets_from(&fit_matrix, m, 1, seed)?.collect())
        },
        |model, batch, rng| hard.mine(model, batch, margin, rng),
    )?;
    Ok((model, report))
}
